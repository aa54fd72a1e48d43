"""Synthetic fMRI-like data: HRF regressors and DLM simulations."""

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .data import Dataset
from .dlm import DlmModel, kalman_filter
from .errors import InputError

#: Connectivity truth used by the trivariate simulation (row i = target region).
TABLE1_PHI = np.array([
    [0.0, -0.1495, -3.0382],
    [0.0, -0.8365, -0.2667],
    [0.4179, 0.1365, 0.0],
])


@dataclass(frozen=True)
class HrfParams:
    """Double-gamma HRF. Each lobe is a gamma density whose mode sits at its delay."""

    peak_delay: float = 6.0
    undershoot_delay: float = 16.0
    peak_dispersion: float = 1.0
    undershoot_dispersion: float = 1.0
    undershoot_ratio: float = 1.0 / 6.0

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            if getattr(self, name) <= 0:
                raise InputError(f"{name} must be positive")

    def _lobes(self):
        peak = stats.gamma(self.peak_delay / self.peak_dispersion + 1.0, scale=self.peak_dispersion)
        under = stats.gamma(self.undershoot_delay / self.undershoot_dispersion + 1.0, scale=self.undershoot_dispersion)
        return peak, under


@dataclass
class StimulusDesign:
    """Boxcar stimulus: s(t) = 1 on each ``[onset, onset + duration)`` block."""

    total_time: float
    blocks: list
    microtime_dt: float = 0.1
    scan_interval: float = 2.0

    def __post_init__(self):
        if self.microtime_dt <= 0 or self.scan_interval <= 0:
            raise InputError("microtime_dt and scan_interval must be positive")
        self.blocks = sorted((float(a), float(b)) for a, b in self.blocks)
        end = -np.inf
        for onset, dur in self.blocks:
            if onset < 0 or dur <= 0 or onset + dur > self.total_time + 1e-9:
                raise InputError(f"block ({onset}, {dur}) lies outside [0, {self.total_time}]")
            if onset < end - 1e-9:
                raise InputError("stimulus blocks overlap")
            end = onset + dur

    @property
    def n_scans(self):
        return int(np.floor(self.total_time / self.scan_interval + 1e-9))

    @property
    def scan_times(self):
        return np.arange(self.n_scans) * self.scan_interval


def block_design(n_scans, scan_interval=2.0, trials_per_block=18, trial_time=2.0, start_on=False, microtime_dt=0.1,
                 n_on_blocks=6):
    """Alternating OFF/ON blocks of ``trials_per_block`` trials.

    ``n_on_blocks`` ON blocks are placed (``None`` fills the whole run); any
    time after the last block stays OFF.
    """
    total = n_scans * scan_interval
    block_len = trials_per_block * trial_time
    blocks = []
    onset = 0.0 if start_on else block_len
    while onset < total and (n_on_blocks is None or len(blocks) < n_on_blocks):
        blocks.append((onset, min(block_len, total - onset)))
        onset += 2 * block_len
    return StimulusDesign(total, blocks, microtime_dt=microtime_dt, scan_interval=scan_interval)


def hrf(u, params=HrfParams()):
    """Double-gamma haemodynamic response at peristimulus time ``u`` (seconds)."""
    u = np.asarray(u, dtype=float)
    peak, under = params._lobes()
    out = np.where(u > 0, peak.pdf(u) - params.undershoot_ratio * under.pdf(u), 0.0)
    return out if out.ndim else float(out)


def hrf_integral(u, params=HrfParams()):
    """Cumulative integral of :func:`hrf` from 0 to ``u``."""
    u = np.maximum(np.asarray(u, dtype=float), 0.0)
    peak, under = params._lobes()
    return peak.cdf(u) - params.undershoot_ratio * under.cdf(u)


def stimulus_on_grid(design):
    """Stimulus indicator on microtime cells ``[k dt, (k + 1) dt)``."""
    dt = design.microtime_dt
    n = int(round(design.total_time / dt))
    mid = (np.arange(n) + 0.5) * dt
    s = np.zeros(n)
    for onset, dur in design.blocks:
        s[(mid >= onset) & (mid < onset + dur)] = 1.0
    return s


def convolve_stimulus(design, params=HrfParams(), stimulus=None):
    """BOLD regressor x(t) = int_0^t h(u) s(t - u) du sampled at scan times.

    The convolution is discrete on the microtime grid with the HRF integrated
    over each cell, so block edges on the grid are handled without
    quadrature error. ``stimulus`` overrides the boxcar built from
    ``design.blocks``.
    """
    dt = design.microtime_dt
    if dt > design.scan_interval:
        raise InputError("microtime grid must be at least as fine as the scan spacing")
    step = design.scan_interval / dt
    if abs(step - round(step)) > 1e-9:
        raise InputError("scan interval must be a multiple of microtime_dt")
    s = stimulus_on_grid(design) if stimulus is None else np.asarray(stimulus, dtype=float)
    n = len(s)
    kernel = np.diff(hrf_integral(np.arange(n + 1) * dt, params))
    # x(n dt) = sum_k kernel[k] s[n - 1 - k]
    full = np.convolve(s, kernel)[:n]
    x_grid = np.r_[0.0, full]
    idx = np.round(design.scan_times / dt).astype(int)
    return x_grid[idx]


# ---------------------------------------------------------------------------
# univariate sparse-signal study


@dataclass
class SparseTruth:
    theta: np.ndarray
    w: np.ndarray
    v: np.ndarray
    outlier: np.ndarray
    V: float
    W: float
    kappa: float
    phi: float
    pi_mix: float
    seed: int
    mixture: str = "caption"

    @property
    def lambda_theta(self):
        """State precision of the regular innovation relative to V."""
        return self.V / self.W if self.mixture == "caption" else 1.0


MIXTURE_READINGS = ("caption", "equation")


def simulate_univariate_sparse(V=1.0, W_over_V=1.0, kappa=20.0, phi=0.5, pi_mix=0.9, T=285, seed=0,
                               mixture="caption"):
    """y_t = theta_t + v_t, theta_t = phi theta_{t-1} + w_t, v_t ~ N(0, V), theta_0 = 0.

    The innovations are a two-component mixture. With ``mixture="caption"``
    w_t ~ pi N(0, W) + (1 - pi) N(0, kappa V), so W / V is the signal/noise
    ratio of the regular component and 1 / lambda_theta = W / V.
    ``mixture="equation"`` gives w_t ~ pi N(0, V) + (1 - pi) N(0, kappa W).

    Returns ``(Dataset, SparseTruth)``; ``truth.outlier`` flags times that drew
    the inflated component.
    """
    if V <= 0 or W_over_V <= 0 or kappa <= 0:
        raise InputError("V, W_over_V and kappa must be positive")
    if not 0.0 < pi_mix <= 1.0:
        raise InputError("pi_mix must lie in (0, 1]")
    if mixture not in MIXTURE_READINGS:
        raise InputError(f"mixture must be one of {MIXTURE_READINGS}")
    rng = np.random.default_rng(seed)
    W = W_over_V * V
    regular, inflated = (W, kappa * V) if mixture == "caption" else (V, kappa * W)
    outlier = rng.random(T) >= pi_mix
    sd = np.where(outlier, np.sqrt(inflated), np.sqrt(regular))
    w = sd * rng.standard_normal(T)
    v = np.sqrt(V) * rng.standard_normal(T)
    theta = np.zeros(T + 1)
    for t in range(T):
        theta[t + 1] = phi * theta[t] + w[t]
    y = theta[1:] + v
    data = Dataset(series=y[:, None], regressors=np.ones((T, 1)), labels=["y"],
                   metadata={"kind": "univariate_sparse", "seed": seed, "mixture": mixture})
    truth = SparseTruth(theta=theta, w=w, v=v, outlier=outlier, V=V, W=W, kappa=kappa, phi=phi, pi_mix=pi_mix, seed=seed,
                        mixture=mixture)
    return data, truth


# ---------------------------------------------------------------------------
# trivariate connectivity design


@dataclass
class SimRecipe:
    """Settings of the trivariate simulation.

    ``signal_noise_ratio`` is lambda_theta^{-1} / lambda_y^{-1}; with
    ``lambda_theta`` fixed the observation precision is ratio * lambda_theta.
    """

    T: int = 285
    phi: np.ndarray = field(default_factory=lambda: TABLE1_PHI.copy())
    signal_noise_ratio: float = 1.0
    lambda_theta: float = 1.0
    alpha: np.ndarray = field(default_factory=lambda: np.ones(3))
    seed: int = 0
    scan_interval: float = 2.0
    microtime_dt: float = 0.1
    shared_obs_regressor: bool = True

    def __post_init__(self):
        self.phi = np.asarray(self.phi, dtype=float)
        self.alpha = np.asarray(self.alpha, dtype=float)
        m = self.phi.shape[0]
        if self.phi.shape != (m, m) or self.alpha.shape != (m,):
            raise InputError("phi must be square and alpha must match its size")
        if self.T < 2:
            raise InputError("T must be >= 2")
        if self.signal_noise_ratio <= 0 or self.lambda_theta <= 0:
            raise InputError("signal_noise_ratio and lambda_theta must be positive")

    @property
    def lambda_y(self):
        return self.signal_noise_ratio * self.lambda_theta


@dataclass
class TrivariateTruth:
    theta: np.ndarray
    alpha: np.ndarray
    phi: np.ndarray
    lambda_y: np.ndarray
    lambda_theta: np.ndarray
    x_obs: np.ndarray
    x_trans: np.ndarray
    loglik: float
    seed: int

    def model(self):
        return truth_model(self)


def default_bold(T, scan_interval=2.0, microtime_dt=0.1, m=3, params=HrfParams()):
    """HRF-convolved alternating block design replicated for ``m`` regions."""
    design = block_design(T, scan_interval=scan_interval, microtime_dt=microtime_dt)
    x = convolve_stimulus(design, params)
    return np.repeat(x[:, None], m, axis=1)


def _system(phi, alpha, lambda_y, lambda_theta, x_obs, x_trans):
    T, m = x_obs.shape
    p = 2 * m
    idx = np.arange(m)
    x_lag = np.vstack([x_trans[:1], x_trans[:-1]])
    F = np.zeros((T, m, p))
    F[:, idx, idx] = 1.0
    F[:, idx, m + idx] = x_obs
    G = np.zeros((T, p, p))
    G[:, idx, idx] = 1.0
    G[:, m:, m:] = phi[None] * x_lag[:, None, :]
    W = np.zeros((T, p, p))
    W[:, m + idx, m + idx] = 1.0 / (lambda_y * lambda_theta)
    V = np.diag(1.0 / lambda_y)
    m0 = np.r_[alpha, np.zeros(m)]
    return DlmModel(F, G, V, W, m0, np.zeros((p, p)))


def truth_model(truth):
    """Exact generating DLM of a trivariate truth record (theta_0 pinned)."""
    return _system(truth.phi, truth.alpha, truth.lambda_y, truth.lambda_theta, truth.x_obs, truth.x_trans)


def simulate_trivariate(recipe, bold=None):
    """Simulate the trend + activation connectivity model.

    ``bold`` is a (T, m) array of regressors x_{t,i}; by default the
    HRF-convolved block design. With ``recipe.shared_obs_regressor`` the first
    column multiplies every activation in the observation equation, while the
    transition always uses the per-region lags x_{t-1, j}.
    """
    m = recipe.phi.shape[0]
    if bold is None:
        bold = default_bold(recipe.T, recipe.scan_interval, recipe.microtime_dt, m)
    bold = np.asarray(bold, dtype=float)
    if bold.ndim == 1:
        bold = np.repeat(bold[:, None], m, axis=1)
    if bold.shape != (recipe.T, m):
        raise InputError(f"bold regressors must have shape {(recipe.T, m)}")
    x_obs = np.repeat(bold[:, :1], m, axis=1) if recipe.shared_obs_regressor else bold.copy()
    lambda_y = np.full(m, recipe.lambda_y)
    lambda_theta = np.full(m, recipe.lambda_theta)
    model = _system(recipe.phi, recipe.alpha, lambda_y, lambda_theta, x_obs, bold)

    rng = np.random.default_rng(recipe.seed)
    T, p = recipe.T, 2 * m
    theta = np.empty((T + 1, p))
    theta[0] = model.m0
    y = np.empty((T, m))
    w_sd = np.sqrt(np.diag(model.W[0]))
    v_sd = np.sqrt(np.diag(model.V))
    for k in range(T):
        theta[k + 1] = model.G[k] @ theta[k] + w_sd * rng.standard_normal(p)
        y[k] = model.F[k] @ theta[k + 1] + v_sd * rng.standard_normal(m)
    loglik = kalman_filter(model, y).loglik
    labels = [f"y{i + 1}" for i in range(m)]
    data = Dataset(series=y, regressors=bold, labels=labels, sampling_interval=recipe.scan_interval,
                   metadata={"kind": "trivariate", "seed": recipe.seed,
                             "signal_noise_ratio": recipe.signal_noise_ratio,
                             "shared_obs_regressor": recipe.shared_obs_regressor})
    truth = TrivariateTruth(theta=theta, alpha=recipe.alpha.copy(), phi=recipe.phi.copy(), lambda_y=lambda_y,
                            lambda_theta=lambda_theta, x_obs=x_obs, x_trans=bold, loglik=loglik, seed=recipe.seed)
    return data, truth
