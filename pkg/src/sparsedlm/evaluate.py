"""Fit accuracy, posterior summaries and convergence diagnostics."""

from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .errors import InputError

QUANTILES = (0.025, 0.5, 0.975)
MIN_DIAGNOSTIC_DRAWS = 100


# ---------------------------------------------------------------------------
# accuracy


@dataclass
class AccuracyReport:
    """MAD and MSE of the fitted mean.

    ``mad`` and ``mse`` divide the sum over all series and times by T only,
    which keeps the numbers comparable with published tables. The
    ``*_per_obs`` variants divide by the number of residuals, T * m.
    """

    mad: float
    mse: float
    divisor: int
    mad_per_obs: float
    mse_per_obs: float
    per_series_mad: np.ndarray
    per_series_mse: np.ndarray

    def as_dict(self):
        out = {"mad": self.mad, "mse": self.mse, "divisor": self.divisor,
               "mad_per_obs": self.mad_per_obs, "mse_per_obs": self.mse_per_obs}
        for i, (a, b) in enumerate(zip(self.per_series_mad, self.per_series_mse)):
            out[f"mad_{i + 1}"] = float(a)
            out[f"mse_{i + 1}"] = float(b)
        return out


def _as_matrix(x, name):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise InputError(f"{name} must be a (T, m) array")
    return x


def mad_mse(y, alpha, theta, x_obs=None):
    """Residuals e_{t,i} = y_{t,i} - (alpha_i + x_{t,i} theta_{t,i}).

    ``y`` may be a :class:`Dataset` (its regressors are then the default
    ``x_obs``). ``theta`` holds activations for t = 1..T, or t = 0..T in which
    case the first row is dropped.
    """
    if isinstance(y, Dataset):
        x_obs = y.regressors if x_obs is None else x_obs
        y = y.series
    y = _as_matrix(y, "y")
    T, m = y.shape
    theta = _as_matrix(theta, "theta")
    if theta.shape == (T + 1, m):
        theta = theta[1:]
    if theta.shape != (T, m):
        raise InputError(f"theta must have shape {(T, m)} or {(T + 1, m)}, got {theta.shape}")
    x_obs = np.ones((T, m)) if x_obs is None else _as_matrix(x_obs, "x_obs")
    if x_obs.shape != (T, m):
        raise InputError(f"x_obs must have shape {(T, m)}, got {x_obs.shape}")
    alpha = np.broadcast_to(np.asarray(alpha, dtype=float), (m,))
    e = y - (alpha + x_obs * theta)
    abs_sum = np.abs(e).sum(axis=0)
    sq_sum = (e * e).sum(axis=0)
    return AccuracyReport(
        mad=float(abs_sum.sum() / T),
        mse=float(sq_sum.sum() / T),
        divisor=T,
        mad_per_obs=float(abs_sum.sum() / (T * m)),
        mse_per_obs=float(sq_sum.sum() / (T * m)),
        per_series_mad=abs_sum / T,
        per_series_mse=sq_sum / T,
    )


# ---------------------------------------------------------------------------
# posterior summaries


@dataclass
class ParameterSummary:
    name: str
    mean: float
    sd: float
    q025: float
    q50: float
    q975: float
    p_zero: float = np.nan


@dataclass
class PosteriorSummary:
    rows: list = field(default_factory=list)

    def __getitem__(self, name):
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)

    @property
    def names(self):
        return [r.name for r in self.rows]

    def to_columns(self):
        cols = {k: [] for k in ParameterSummary.__dataclass_fields__}
        for r in self.rows:
            for k in cols:
                cols[k].append(getattr(r, k))
        return cols


def _summary_columns(draws):
    """Name -> 1-D draws, plus name -> inclusion indicators for coefficients."""
    if hasattr(draws, "scalar_columns"):
        cols = draws.scalar_columns()
    else:
        cols = {k: np.asarray(v) for k, v in dict(draws).items()}
    cols = {k: np.asarray(v) for k, v in cols.items() if k not in ("chain", "iteration")}
    indicators = {k[len("gamma_"):]: v for k, v in cols.items() if k.startswith("gamma_")}
    values = {k: v.astype(float) for k, v in cols.items() if not k.startswith("gamma_")}
    return values, indicators


def summarize(draws):
    """Mean, sd and 2.5/50/97.5% quantiles of every scalar parameter.

    ``draws`` is a :class:`~sparsedlm.sampler.DrawsStore` or a mapping of
    name to 1-D draws. Coefficient means include the excluded (zero) draws.
    For each ``phi_ij`` the atom probability is the fraction of draws with
    the inclusion indicator off (or with phi exactly zero when no indicator
    is available).
    """
    values, indicators = _summary_columns(draws)
    if not values or min(len(v) for v in values.values()) == 0:
        raise InputError("cannot summarize an empty draws store")
    out = PosteriorSummary()
    for name, x in values.items():
        q = np.quantile(x, QUANTILES)
        row = ParameterSummary(name, float(x.mean()), float(x.std()), *map(float, q))
        if name.startswith("phi_"):
            ind = indicators.get(name[len("phi_"):])
            row.p_zero = float(1.0 - np.mean(ind)) if ind is not None else float(np.mean(x == 0.0))
        out.rows.append(row)
    return out


# ---------------------------------------------------------------------------
# convergence diagnostics


def autocorrelation(x, max_lag=None):
    """Sample ACF r_k = c_k / c_0 with c_k = sum (x_t - xbar)(x_{t+k} - xbar) / N.

    A constant stream is perfectly correlated with itself, so every lag gets 1.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    max_lag = n - 1 if max_lag is None else min(int(max_lag), n - 1)
    xc = x - x.mean()
    if not np.any(xc):
        return np.ones(max_lag + 1)
    nfft = 1 << int(np.ceil(np.log2(2 * n)))
    f = np.fft.rfft(xc, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[: max_lag + 1]
    return acov / acov[0]


def effective_sample_size(x):
    """ESS by Geyer's initial positive sequence.

    Pairs Gamma_k = r_{2k} + r_{2k+1} are summed while positive and
    ESS = N / (-1 + 2 sum Gamma_k).
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    if n < 2:
        raise InputError("need at least two draws")
    r = autocorrelation(x)
    if np.all(r == 1.0):
        return 1.0
    total = 0.0
    for k in range(0, n - 1, 2):
        pair = r[k] + r[k + 1]
        if pair <= 0:
            break
        total += pair
    tau = max(-1.0 + 2.0 * total, 1.0 / n)
    return float(min(n / tau, n * np.log10(n)))


def cumulative_quantiles(x, probs=QUANTILES, n_points=50):
    """Running quantile estimates on an even grid of prefix lengths.

    Returns ``(lengths, q)`` with ``q[k, j]`` the ``probs[j]`` quantile of the
    first ``lengths[k]`` draws.
    """
    x = np.asarray(x, dtype=float)
    lengths = np.unique(np.linspace(1, len(x), min(n_points, len(x))).round().astype(int))
    q = np.array([np.quantile(x[:n], probs) for n in lengths])
    return lengths, q


@dataclass
class Diagnostic:
    name: str
    acf: np.ndarray
    ess: float
    n: int
    lengths: np.ndarray
    cumulative_q: np.ndarray


def diagnostics(draws, max_lag=50, n_points=50):
    """ACF, ESS and cumulative quantile traces for every scalar parameter.

    Each chain is diagnosed separately and ESS summed over chains; ACF and
    quantile traces come from the first chain.
    """
    values, _ = _summary_columns(draws)
    chains = draws.chain if hasattr(draws, "chain") else dict(draws).get("chain")
    chains = None if chains is None else np.asarray(chains)
    n = min(len(v) for v in values.values()) if values else 0
    if n < MIN_DIAGNOSTIC_DRAWS:
        raise InputError(f"diagnostics need at least {MIN_DIAGNOSTIC_DRAWS} retained draws, got {n}")
    groups = [np.ones(n, dtype=bool)] if chains is None else [chains == c for c in np.unique(chains)]
    out = {}
    for name, x in values.items():
        first = x[groups[0]]
        lengths, q = cumulative_quantiles(first, n_points=n_points)
        ess = sum(effective_sample_size(x[g]) for g in groups)
        out[name] = Diagnostic(name, autocorrelation(first, max_lag), ess, len(x), lengths, q)
    return out
