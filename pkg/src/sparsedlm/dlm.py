"""Gaussian dynamic linear models: filtering, prediction and FFBS.

The model is

    y_t     = F_t theta_t + v_t,        v_t ~ N(0, V)
    theta_t = G_t theta_{t-1} + w_t,    w_t ~ N(0, W_t)
    theta_0 ~ N(m0, C0)

for t = 1..T. System matrices are stored as stacked arrays with axis 0 running
over t = 1..T, so ``F[t - 1]`` is F_t.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import FilterDivergenceError, InputError

#: Relative eigenvalue tolerance for PSD checks and clipping.
PSD_RTOL = 1e-10


def _check_psd(A, name):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InputError(f"{name} must be square, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InputError(f"{name} has non-finite entries")
    if not np.allclose(A, A.T, rtol=1e-10, atol=1e-12):
        raise InputError(f"{name} is not symmetric")
    vals = np.linalg.eigvalsh(A)
    if vals.size and vals.min() < -PSD_RTOL * max(np.abs(vals).max(), 0.0):
        raise InputError(f"{name} is not positive semi-definite (min eig {vals.min():.3g})")


@dataclass
class DlmModel:
    """System matrices of a (possibly time-varying) DLM.

    Attributes
    ----------
    F : (T, m, p) array
    G : (T, p, p) array
    V : (m, m) array
    W : (T, p, p) array, zero rows/columns allowed
    m0 : (p,) array
    C0 : (p, p) array
    """

    F: np.ndarray
    G: np.ndarray
    V: np.ndarray
    W: np.ndarray
    m0: np.ndarray
    C0: np.ndarray

    def __post_init__(self):
        self.F = np.ascontiguousarray(self.F, dtype=float)
        self.G = np.ascontiguousarray(self.G, dtype=float)
        self.V = np.ascontiguousarray(np.atleast_2d(self.V), dtype=float)
        self.W = np.ascontiguousarray(self.W, dtype=float)
        self.m0 = np.ascontiguousarray(np.atleast_1d(self.m0), dtype=float)
        self.C0 = np.ascontiguousarray(np.atleast_2d(self.C0), dtype=float)
        T, m, p = self.F.shape
        if self.G.shape != (T, p, p):
            raise InputError(f"G must have shape {(T, p, p)}, got {self.G.shape}")
        if self.W.shape != (T, p, p):
            raise InputError(f"W must have shape {(T, p, p)}, got {self.W.shape}")
        if self.V.shape != (m, m):
            raise InputError(f"V must have shape {(m, m)}, got {self.V.shape}")
        if self.m0.shape != (p,) or self.C0.shape != (p, p):
            raise InputError("m0/C0 do not match the state dimension")
        if T < 1:
            raise InputError("horizon T must be >= 1")

    @property
    def T(self):
        return self.F.shape[0]

    @property
    def m(self):
        return self.F.shape[1]

    @property
    def p(self):
        return self.F.shape[2]

    @classmethod
    def from_functions(cls, F, G, V, W, m0, C0, T):
        """Build a model by evaluating ``F(t)``, ``G(t)``, ``W(t)`` for t = 1..T.

        Any of F, G, W may also be a constant matrix.
        """
        def stack(fn):
            if callable(fn):
                return np.stack([np.atleast_2d(np.asarray(fn(t), dtype=float)) for t in range(1, T + 1)])
            A = np.atleast_2d(np.asarray(fn, dtype=float))
            return np.broadcast_to(A, (T,) + A.shape).copy()

        return cls(stack(F), stack(G), V, stack(W), m0, C0)

    def validate(self):
        """Check finiteness and PSD-ness of every covariance."""
        if not (np.all(np.isfinite(self.F)) and np.all(np.isfinite(self.G))):
            raise InputError("F and G must be finite")
        _check_psd(self.V, "V")
        _check_psd(self.C0, "C0")
        for k in range(self.T):
            _check_psd(self.W[k], f"W({k + 1})")
        return self


@dataclass
class FilterResult:
    """Forward-filtering output.

    ``m[0], C[0]`` are the prior moments; ``m[t], C[t]`` condition on y_1..y_t.
    ``a[t-1], R[t-1]`` are the state prior moments of theta_t given y_1..y_{t-1}
    and ``f[t-1], Q[t-1]`` the one-step predictive moments of y_t.
    """

    m: np.ndarray
    C: np.ndarray
    a: np.ndarray
    R: np.ndarray
    f: np.ndarray
    Q: np.ndarray
    loglik_terms: np.ndarray

    @property
    def loglik(self):
        return float(self.loglik_terms.sum())


@dataclass
class StatePath:
    """One joint draw of theta_0..theta_T, shape (T + 1, p)."""

    theta: np.ndarray
    n_singular: int = 0


def _as_obs(model, y):
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        y = y[:, None] if model.m == 1 else y[None, :]
    if y.shape != (model.T, model.m):
        raise InputError(f"observations must have shape {(model.T, model.m)}, got {y.shape}")
    if not np.all(np.isfinite(y)):
        raise InputError("observations contain non-finite values")
    return np.ascontiguousarray(y)


def kalman_filter(model, y):
    """Run the Kalman filter and return all filtering/predictive moments.

    Covariances are symmetrized after every update and the state update uses
    the Joseph form. Raises :class:`FilterDivergenceError` when a predictive
    covariance Q_t is not positive definite.
    """
    y = _as_obs(model, y)
    a, R, m, C, f, Q, ll, bad = _kernels.filter_kernel(
        model.F, model.G, model.V, model.W, model.m0, model.C0, y, PSD_RTOL
    )
    if bad:
        raise FilterDivergenceError(bad, "one-step predictive covariance is not positive definite")
    return FilterResult(m=m, C=C, a=a, R=R, f=f, Q=Q, loglik_terms=ll)


def ffbs_sample(model, filt, rng):
    """Draw theta_{0:T} jointly from p(theta | y_{1:T}) by backward sampling.

    Conditional covariances are factored through a clipped eigendecomposition,
    so directions with zero variance (e.g. states with W = 0) receive no noise.
    Singular backward-conditioning covariances are handled with a
    pseudo-inverse; the number of such steps is reported in ``n_singular``.
    """
    z = rng.standard_normal((model.T + 1, model.p))
    theta, n_singular = _kernels.backward_kernel(model.G, filt.a, filt.R, filt.m, filt.C, z, PSD_RTOL)
    return StatePath(theta=theta, n_singular=int(n_singular))


def one_step_predictive_density(model, filt, t, y_t):
    """log N(y_t; f_t, Q_t) for 1 <= t <= T."""
    if not 1 <= t <= model.T:
        raise InputError(f"t must lie in [1, {model.T}], got {t}")
    f = filt.f[t - 1]
    Q = filt.Q[t - 1]
    y_t = np.atleast_1d(np.asarray(y_t, dtype=float))
    sign, logdet = np.linalg.slogdet(Q)
    if sign <= 0:
        raise FilterDivergenceError(t, "predictive covariance has non-positive determinant")
    e = y_t - f
    return float(-0.5 * (len(f) * np.log(2 * np.pi) + logdet + e @ np.linalg.solve(Q, e)))


def simulate(model, rng, theta0=None):
    """Simulate states and observations from the model.

    Returns ``(theta, y)`` with shapes (T + 1, p) and (T, m). Noise is drawn
    through clipped eigen-factors so singular W and V are allowed.
    """
    def factor(A):
        vals, vecs = np.linalg.eigh(0.5 * (A + A.T))
        vals[vals <= PSD_RTOL * max(np.abs(vals).max(), 0.0)] = 0.0
        return vecs * np.sqrt(vals)

    theta = np.empty((model.T + 1, model.p))
    y = np.empty((model.T, model.m))
    if theta0 is None:
        theta[0] = model.m0 + factor(model.C0) @ rng.standard_normal(model.p)
    else:
        theta[0] = theta0
    LV = factor(model.V)
    for k in range(model.T):
        theta[k + 1] = model.G[k] @ theta[k] + factor(model.W[k]) @ rng.standard_normal(model.p)
        y[k] = model.F[k] @ theta[k + 1] + LV @ rng.standard_normal(model.m)
    return theta, y
