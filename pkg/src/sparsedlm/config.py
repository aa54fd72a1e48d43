"""Run configuration: a JSON document with one section per concern.

Every section is a flat mapping with fixed keys. Unknown keys are rejected
so that typos fail loudly instead of silently falling back to defaults.
"""

from dataclasses import asdict, dataclass, field, fields
import hashlib
import json
from pathlib import Path

import numpy as np

from .errors import InputError
from .priors import DEFAULT_NU_GRID, PUBLISHED_RATE_D, PUBLISHED_TAU0, GammaParams, HierarchyPrior, PointMassPrior


class ConfigError(InputError):
    """Malformed or inconsistent run configuration."""


@dataclass
class SimulateSection:
    kind: str = "trivariate"
    T: int = 285
    # trivariate design
    phi: list = None
    signal_noise_ratio: float = 1.0
    lambda_theta: float = 1.0
    alpha: list = None
    scan_interval: float = 2.0
    microtime_dt: float = 0.1
    shared_obs_regressor: bool = True
    # univariate sparse-signal study
    V: float = 1.0
    W_over_V: float = 1.0
    kappa: float = 20.0
    ar_coef: float = 0.5
    pi_mix: float = 0.9
    mixture: str = "caption"

    def validate(self):
        if self.kind not in ("trivariate", "univariate_sparse"):
            raise ConfigError(f"simulate.kind must be 'trivariate' or 'univariate_sparse', got {self.kind!r}")
        if self.mixture not in ("caption", "equation"):
            raise ConfigError(f"simulate.mixture must be 'caption' or 'equation', got {self.mixture!r}")


@dataclass
class DataSection:
    path: str = None
    series: list = None
    detrend: bool = True
    detrend_k: int = 30
    standardize: bool = True

    def validate(self):
        if self.detrend_k < 3:
            raise ConfigError("data.detrend_k must be >= 3")


@dataclass
class ModelSection:
    trend: bool = True
    structure: list = None
    a_pi: float = 6.0
    b_pi: float = 3.0
    c: float = None
    d: float = PUBLISHED_RATE_D
    tau0: float = PUBLISHED_TAU0
    nu_grid: list = field(default_factory=lambda: list(DEFAULT_NU_GRID))
    nu_alpha: list = None
    obs_shape: float = 0.001
    obs_rate: float = 0.001
    fixed_lambda_theta: float = None
    trend_prior_var: float = 100.0
    state_prior_var: float = 10.0

    def slab(self):
        c = self.tau0 * self.d + 1.0 if self.c is None else self.c
        return PointMassPrior(a_pi=self.a_pi, b_pi=self.b_pi, c=c, d=self.d)

    def hierarchy(self):
        return HierarchyPrior(nu_grid=tuple(self.nu_grid), alpha=None if self.nu_alpha is None else tuple(self.nu_alpha))

    def obs_prior(self):
        return GammaParams(self.obs_shape, self.obs_rate)

    def validate(self):
        self.slab()
        self.hierarchy()
        self.obs_prior()
        if self.structure is not None:
            s = np.asarray(self.structure)
            if s.ndim != 2 or s.shape[0] != s.shape[1]:
                raise ConfigError("model.structure must be a square 0/1 matrix")


@dataclass
class McmcSection:
    n_iter: int = 6000
    burn_in: int = 1000
    thin: int = 1
    n_chains: int = 1
    phi_mask: list = field(default_factory=list)
    store_states: bool = False

    def validate(self):
        if not (self.n_iter > self.burn_in >= 0):
            raise ConfigError("mcmc: need n_iter > burn_in >= 0")
        if self.thin < 1 or self.n_chains < 1:
            raise ConfigError("mcmc: thin and n_chains must be >= 1")
        for ij in self.phi_mask:
            if len(ij) != 2:
                raise ConfigError("mcmc.phi_mask entries must be [i, j] pairs (1-based)")


@dataclass
class ElicitSection:
    tau0: float = PUBLISHED_TAU0
    target_quantile: float = None
    prob: float = 0.01
    rate_d: float = PUBLISHED_RATE_D
    a: float = 6.0
    b: float = 3.0


SECTIONS = {
    "simulate": SimulateSection,
    "data": DataSection,
    "model": ModelSection,
    "mcmc": McmcSection,
    "elicit": ElicitSection,
}


@dataclass
class RunConfig:
    seed: int = 0
    out_dir: str = "out"
    simulate: SimulateSection = field(default_factory=SimulateSection)
    data: DataSection = field(default_factory=DataSection)
    model: ModelSection = field(default_factory=ModelSection)
    mcmc: McmcSection = field(default_factory=McmcSection)
    elicit: ElicitSection = field(default_factory=ElicitSection)

    @classmethod
    def from_dict(cls, doc):
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        top = {f.name for f in fields(cls)}
        unknown = sorted(set(doc) - top)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        kwargs = {}
        for key, value in doc.items():
            if key in SECTIONS:
                kwargs[key] = _section(SECTIONS[key], key, value)
            else:
                kwargs[key] = value
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path):
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_dict(doc)

    def validate(self):
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        for key in SECTIONS:
            section = getattr(self, key)
            if hasattr(section, "validate"):
                try:
                    section.validate()
                except ConfigError:
                    raise
                except (InputError, TypeError, ValueError) as exc:
                    raise ConfigError(f"{key}: {exc}") from None
        return self

    def to_dict(self):
        return asdict(self)

    def dumps(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def digest(self):
        """SHA-256 of the canonical JSON form."""
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()


def _section(cls, name, value):
    if not isinstance(value, dict):
        raise ConfigError(f"section {name!r} must be an object")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(value) - known)
    if unknown:
        raise ConfigError(f"unknown keys in {name!r}: {', '.join(unknown)}")
    return cls(**value)
