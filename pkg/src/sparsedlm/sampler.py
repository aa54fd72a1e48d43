"""Gibbs sampler for the sparse multivariate DLM.

State vector (with trends): (alpha_1..alpha_m, theta_{t,1}..theta_{t,m}).

    y_{t,i}     = alpha_i + xo_{t,i} theta_{t,i} + v_{t,i},   v ~ N(0, 1/lambda_y_i)
    theta_{t,i} = sum_j phi_ij xg_{t-1,j} theta_{t-1,j} + w_{t,i}
    w_{t,i}     ~ N(0, 1 / (lambda_y_i lambda_theta_i omega_{t,i}))

phi_ij carries a spike-and-slab prior and the state precisions a Beta-prime
hierarchy (see :mod:`sparsedlm.priors`). One sweep updates, in order: the
state path (FFBS), lambda_y, the variance hierarchy, each phi_ij, pi, tau.
"""

from dataclasses import dataclass, field
import logging

import numpy as np
from scipy import special

from .dlm import DlmModel, ffbs_sample, kalman_filter
from .errors import FilterDivergenceError, InputError, SamplerError
from .priors import GammaParams, HierarchyPrior, PointMassPrior, StateVarianceHierarchy, sample_gig

log = logging.getLogger(__name__)


@dataclass
class McmcConfig:
    """Chain length and bookkeeping.

    ``n_iter`` counts all sweeps including ``burn_in``; every ``thin``-th sweep
    after burn-in is kept. ``phi_mask`` lists (i, j) pairs (0-based) forced to
    zero.
    """

    n_iter: int = 6000
    burn_in: int = 1000
    thin: int = 1
    seed: int = 0
    n_chains: int = 1
    phi_mask: frozenset = frozenset()
    store_states: bool = False

    def __post_init__(self):
        self.phi_mask = frozenset(tuple(int(v) for v in ij) for ij in self.phi_mask)
        if not (self.n_iter > self.burn_in >= 0):
            raise InputError("need n_iter > burn_in >= 0")
        if self.thin < 1:
            raise InputError("thin must be >= 1")
        if self.n_chains < 1:
            raise InputError("n_chains must be >= 1")

    @property
    def n_keep(self):
        return (self.n_iter - self.burn_in) // self.thin


@dataclass
class ModelSpec:
    """Data, regressors, connectivity structure and priors of one fit.

    Parameters
    ----------
    y : (T, m) observations.
    x_obs : (T, m) regressors multiplying theta_{t,i} in the observation
        equation; defaults to ones.
    x_trans : (T, m) regressors entering the transition as x_{t-1,j}; defaults
        to ones. The lag at t = 1 reuses the first row.
    trend : include a static intercept state per series.
    structure : (m, m) boolean, which phi_ij are part of the model.
    fixed_lambda_theta : known state precisions; disables the hierarchy and
        pins omega at 1.
    """

    y: np.ndarray
    x_obs: np.ndarray = None
    x_trans: np.ndarray = None
    trend: bool = True
    structure: np.ndarray = None
    slab: PointMassPrior = field(default_factory=PointMassPrior)
    hierarchy: HierarchyPrior = field(default_factory=HierarchyPrior)
    obs_prior: GammaParams = field(default_factory=lambda: GammaParams(0.001, 0.001))
    fixed_lambda_theta: np.ndarray = None
    trend_prior_var: float = 100.0
    state_prior_var: float = 10.0

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        if y.ndim == 1:
            y = y[:, None]
        if y.ndim != 2 or y.shape[0] < 2:
            raise InputError("y must be a (T, m) array with T >= 2")
        if not np.all(np.isfinite(y)):
            raise InputError("y contains non-finite values")
        self.y = y
        T, m = y.shape
        self.x_obs = self._regressor(self.x_obs, "x_obs")
        self.x_trans = self._regressor(self.x_trans, "x_trans")
        if self.structure is None:
            self.structure = np.ones((m, m), dtype=bool)
        self.structure = np.asarray(self.structure, dtype=bool)
        if self.structure.shape != (m, m):
            raise InputError(f"structure must have shape {(m, m)}")
        if self.fixed_lambda_theta is not None:
            lt = np.broadcast_to(np.asarray(self.fixed_lambda_theta, dtype=float), (m,)).copy()
            if np.any(lt <= 0):
                raise InputError("fixed_lambda_theta must be positive")
            self.fixed_lambda_theta = lt

    def _regressor(self, x, name):
        T, m = self.y.shape
        if x is None:
            return np.ones((T, m))
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = np.repeat(x[:, None], m, axis=1)
        if x.shape != (T, m):
            raise InputError(f"{name} must have shape {(T, m)}, got {x.shape}")
        if not np.all(np.isfinite(x)):
            raise InputError(f"{name} contains non-finite values")
        return x

    @property
    def T(self):
        return self.y.shape[0]

    @property
    def m(self):
        return self.y.shape[1]

    @property
    def p(self):
        return 2 * self.m if self.trend else self.m

    @property
    def n_trend(self):
        return self.m if self.trend else 0

    @property
    def x_lag(self):
        """x_{t-1, j} for t = 1..T."""
        return np.vstack([self.x_trans[:1], self.x_trans[:-1]])

    def free_mask(self, phi_mask=frozenset()):
        free = self.structure.copy()
        for i, j in phi_mask:
            free[i, j] = False
        return free

    def build_model(self, phi, lambda_y, state_precision):
        """DLM system matrices for given connectivity and precisions.

        ``state_precision`` is the (T, m) array lambda_y lambda_theta omega.
        """
        T, m, k = self.T, self.m, self.n_trend
        p = self.p
        F = np.zeros((T, m, p))
        G = np.zeros((T, p, p))
        W = np.zeros((T, p, p))
        idx = np.arange(m)
        if k:
            F[:, idx, idx] = 1.0
            G[:, idx, idx] = 1.0
        F[:, idx, k + idx] = self.x_obs
        G[:, k:, k:] = phi[None, :, :] * self.x_lag[:, None, :]
        W[:, k + idx, k + idx] = 1.0 / state_precision
        V = np.diag(1.0 / lambda_y)
        m0 = np.zeros(p)
        C0 = np.diag(np.r_[np.full(k, self.trend_prior_var), np.full(m, self.state_prior_var)])
        return DlmModel(F, G, V, W, m0, C0)


@dataclass
class ChainState:
    theta: np.ndarray
    phi: np.ndarray
    gamma: np.ndarray
    tau: np.ndarray
    pi: float
    lambda_y: np.ndarray
    hier: StateVarianceHierarchy
    loglik: float = np.nan
    incl_prob: np.ndarray = None
    zero_regressor: set = field(default_factory=set)
    n_singular: int = 0

    def state_precision(self):
        return self.lambda_y * self.hier.lambda_theta * self.hier.omega


def initial_state(spec, cfg=None):
    """Cold start: all coefficients spiked, latents at 1, lambda_y from data."""
    T, m = spec.T, spec.m
    var = spec.y.var(axis=0)
    lambda_y = np.where(var > 0, 1.0 / np.where(var > 0, var, 1.0), 1.0)
    hier = StateVarianceHierarchy.initial(T, m, spec.hierarchy)
    if spec.fixed_lambda_theta is not None:
        hier.lambda_theta = spec.fixed_lambda_theta.copy()
    slab = spec.slab
    return ChainState(
        theta=np.zeros((T + 1, spec.p)),
        phi=np.zeros((m, m)),
        gamma=np.zeros((m, m), dtype=bool),
        tau=np.full((m, m), slab.c / slab.d),
        pi=slab.a_pi / (slab.a_pi + slab.b_pi),
        lambda_y=lambda_y,
        hier=hier,
        incl_prob=np.zeros((m, m)),
    )


# ---------------------------------------------------------------------------
# full conditionals


def activation_design(spec, theta):
    """Regression pieces of the state equation.

    Returns (Z, A) where A = theta_{1:T} activations (T, m) and
    Z[t, j] = x_{t-1, j} theta_{t-1, j}.
    """
    act = theta[:, spec.n_trend:]
    return spec.x_lag * act[:-1], act[1:]


def state_residuals(spec, state):
    Z, A = activation_design(spec, state.theta)
    return A - Z @ state.phi.T


def obs_residuals(spec, theta):
    k = spec.n_trend
    fit = spec.x_obs * theta[1:, k:]
    if k:
        fit = fit + theta[1:, :k]
    return spec.y - fit


def update_states(spec, state, rng):
    model = spec.build_model(state.phi, state.lambda_y, state.state_precision())
    filt = kalman_filter(model, spec.y)
    path = ffbs_sample(model, filt, rng)
    state.theta = path.theta
    state.loglik = filt.loglik
    state.n_singular += path.n_singular
    return state


def update_obs_precision(spec, state, rng):
    r = obs_residuals(spec, state.theta)
    e = state_residuals(spec, state)
    h = state.hier
    shape = spec.obs_prior.shape + 0.5 * spec.T + 0.5 * spec.T
    rate = spec.obs_prior.rate + 0.5 * np.sum(r * r, axis=0) + 0.5 * h.lambda_theta * np.sum(h.omega * e * e, axis=0)
    state.lambda_y = rng.gamma(shape, 1.0 / rate)
    return state


def _nu_log_weights(h, T):
    grid = h.nu_grid[None, :]
    half = 0.5 * grid
    sum_log_omega = np.sum(np.log(h.omega), axis=0)[:, None]
    sum_omega = np.sum(h.omega, axis=0)[:, None]
    lw = T * (half * np.log(half) - special.gammaln(half)) + (half - 1.0) * sum_log_omega - half * sum_omega
    # lambda_theta ~ Gamma((nu - 1)/2, rho/beta)
    shape = 0.5 * (grid - 1.0)
    rate = (h.rho / h.beta)[:, None]
    lam = h.lambda_theta[:, None]
    lw += shape * np.log(rate) - special.gammaln(shape) + (shape - 1.0) * np.log(lam) - rate * lam
    return lw + np.log(h.varphi)


def _checked(name, vals):
    if not np.all(np.isfinite(vals)) or np.any(vals <= 0):
        raise SamplerError("non-finite or non-positive hierarchy value", parameter=name)
    return vals


def update_hierarchy(spec, state, rng):
    """Refresh every latent of the state-variance hierarchy in turn.

    omega, lambda_theta, rho and xi have Gamma full conditionals, beta a
    generalized inverse Gaussian one, nu a discrete one on the grid and
    varphi a Dirichlet one.
    """
    if spec.fixed_lambda_theta is not None:
        return state
    h = state.hier
    T, m = spec.T, spec.m
    e = state_residuals(spec, state)
    se2 = state.lambda_y * e * e

    h.omega = _checked("omega", rng.gamma(0.5 * (h.nu + 1.0), 1.0 / (0.5 * (h.nu + h.lambda_theta * se2)), size=(T, m)))
    shape = 0.5 * (h.nu - 1.0) + 0.5 * T
    rate = h.rho / h.beta + 0.5 * np.sum(h.omega * se2, axis=0)
    h.lambda_theta = _checked("lambda_theta", rng.gamma(shape, 1.0 / rate))

    a = 0.5 * (h.nu - 1.0)
    h.rho = _checked("rho", rng.gamma(1.0 + a, 1.0 / (1.0 + h.lambda_theta / h.beta)))
    # beta^(-a) exp(-xi beta - rho lambda / beta): GIG(1 - a, 2 xi, 2 rho lambda)
    gig_a = _checked("beta", 2.0 * h.xi)
    gig_b = _checked("beta", 2.0 * h.rho * h.lambda_theta)
    h.beta = _checked("beta", np.array([sample_gig(1.0 - a[i], gig_a[i], gig_b[i], rng) for i in range(m)]))
    h.xi = _checked("xi", rng.gamma(2.0, 1.0 / (1.0 + h.beta)))

    lw = _nu_log_weights(h, T)
    prob = np.exp(lw - lw.max(axis=1, keepdims=True))
    prob /= prob.sum(axis=1, keepdims=True)
    if not np.all(np.isfinite(prob)):
        raise SamplerError("non-finite degrees-of-freedom weights", parameter="nu")
    k = np.array([rng.choice(len(h.nu_grid), p=row) for row in prob])
    h.nu = h.nu_grid[k]
    alpha = np.asarray(spec.hierarchy.alpha)
    if len(alpha) == 1:
        h.varphi = np.ones((m, 1))
    else:
        h.varphi = np.array([rng.dirichlet(alpha + (np.arange(len(alpha)) == ki)) for ki in k])
    return state


def inclusion_log_odds(z, r, w, tau, pi):
    """Posterior log odds of phi != 0 in r_t = phi z_t + e_t, e_t ~ N(0, 1/w_t).

    The slab N(0, 1/tau) is integrated out analytically. Also returns the
    conditional posterior mean and precision of phi under inclusion.
    """
    prec = tau + np.sum(w * z * z)
    mean = np.sum(w * z * r) / prec
    log_bf = 0.5 * (np.log(tau) - np.log(prec)) + 0.5 * prec * mean * mean
    if pi >= 1.0:
        return np.inf, mean, prec
    if pi <= 0.0:
        return -np.inf, mean, prec
    return np.log(pi) - np.log1p(-pi) + log_bf, mean, prec


def update_connectivity(spec, state, ij, rng):
    """Spike-and-slab update of one coefficient; returns (phi_ij, included)."""
    i, j = ij
    Z, A = activation_design(spec, state.theta)
    w = state.state_precision()[:, i]
    r = A[:, i] - Z @ state.phi[i] + Z[:, j] * state.phi[i, j]
    z = Z[:, j]
    if not np.any(z * w):
        state.zero_regressor.add((i, j))
    log_odds, mean, prec = inclusion_log_odds(z, r, w, state.tau[i, j], state.pi)
    p_incl = special.expit(log_odds)
    included = bool(rng.random() < p_incl)
    state.phi[i, j] = mean + rng.standard_normal() / np.sqrt(prec) if included else 0.0
    state.gamma[i, j] = included
    state.incl_prob[i, j] = p_incl
    return state.phi[i, j], included


def update_inclusion_weight(spec, state, free, rng):
    k = int(np.sum(state.gamma & free))
    K = int(np.sum(free))
    state.pi = float(rng.beta(spec.slab.a_pi + k, spec.slab.b_pi + K - k))
    return state


def update_slab_precision(spec, state, rng):
    c, d = spec.slab.c, spec.slab.d
    shape = np.where(state.gamma, c + 0.5, c)
    rate = d + 0.5 * np.where(state.gamma, state.phi**2, 0.0)
    state.tau = rng.gamma(shape, 1.0 / rate)
    return state


def gibbs_sweep(spec, state, free, rng):
    update_states(spec, state, rng)
    update_obs_precision(spec, state, rng)
    update_hierarchy(spec, state, rng)
    for i, j in zip(*np.nonzero(free)):
        update_connectivity(spec, state, (int(i), int(j)), rng)
    update_inclusion_weight(spec, state, free, rng)
    update_slab_precision(spec, state, rng)
    return state


# ---------------------------------------------------------------------------
# draw storage


@dataclass
class DrawsStore:
    """Retained draws, one row per kept sweep (chains stacked)."""

    chain: np.ndarray
    iteration: np.ndarray
    phi: np.ndarray
    gamma: np.ndarray
    tau: np.ndarray
    pi: np.ndarray
    lambda_y: np.ndarray
    lambda_theta: np.ndarray
    omega: np.ndarray
    rho: np.ndarray
    beta: np.ndarray
    xi: np.ndarray
    nu: np.ndarray
    varphi: np.ndarray
    loglik: np.ndarray
    incl_prob: np.ndarray
    states: np.ndarray = None
    state_mean: np.ndarray = None
    free: np.ndarray = None
    zero_regressor: frozenset = frozenset()

    @property
    def n_draws(self):
        return len(self.iteration)

    @property
    def m(self):
        return self.phi.shape[1]

    @classmethod
    def allocate(cls, n, T, m, p, n_grid, store_states):
        return cls(
            chain=np.zeros(n, dtype=int),
            iteration=np.zeros(n, dtype=int),
            phi=np.zeros((n, m, m)),
            gamma=np.zeros((n, m, m), dtype=bool),
            tau=np.zeros((n, m, m)),
            pi=np.zeros(n),
            lambda_y=np.zeros((n, m)),
            lambda_theta=np.zeros((n, m)),
            omega=np.zeros((n, T, m)),
            rho=np.zeros((n, m)),
            beta=np.zeros((n, m)),
            xi=np.zeros((n, m)),
            nu=np.zeros((n, m)),
            varphi=np.zeros((n, m, n_grid)),
            loglik=np.zeros(n),
            incl_prob=np.zeros((n, m, m)),
            states=np.zeros((n, T + 1, p)) if store_states else None,
            state_mean=np.zeros((T + 1, p)),
        )

    def record(self, k, chain, iteration, s):
        self.chain[k] = chain
        self.iteration[k] = iteration
        self.phi[k] = s.phi
        self.gamma[k] = s.gamma
        self.tau[k] = s.tau
        self.pi[k] = s.pi
        self.lambda_y[k] = s.lambda_y
        h = s.hier
        self.lambda_theta[k] = h.lambda_theta
        self.omega[k] = h.omega
        self.rho[k] = h.rho
        self.beta[k] = h.beta
        self.xi[k] = h.xi
        self.nu[k] = h.nu
        self.varphi[k] = h.varphi
        self.loglik[k] = s.loglik
        self.incl_prob[k] = s.incl_prob
        if self.states is not None:
            self.states[k] = s.theta
        self.state_mean += (s.theta - self.state_mean) / (k + 1)

    @classmethod
    def merge(cls, stores):
        if len(stores) == 1:
            return stores[0]
        out = {}
        for name in cls.__dataclass_fields__:
            vals = [getattr(s, name) for s in stores]
            if name == "state_mean":
                w = np.array([s.n_draws for s in stores], dtype=float)
                out[name] = np.tensordot(w / w.sum(), np.stack(vals), axes=1)
            elif name == "free":
                out[name] = vals[0]
            elif name == "zero_regressor":
                out[name] = frozenset().union(*vals)
            elif vals[0] is None:
                out[name] = None
            else:
                out[name] = np.concatenate(vals)
        return cls(**out)

    def scalar_columns(self):
        """Flat name -> 1-D array mapping of every scalar parameter.

        Region indices are 1-based in the names (phi_13 couples state 1 to
        lagged state 3).
        """
        m = self.m
        cols = {"chain": self.chain, "iteration": self.iteration, "loglik": self.loglik, "pi": self.pi}
        for name in ("lambda_y", "lambda_theta", "rho", "beta", "xi", "nu"):
            arr = getattr(self, name)
            for i in range(m):
                cols[f"{name}_{i + 1}"] = arr[:, i]
        for name in ("phi", "gamma", "tau"):
            arr = getattr(self, name)
            for i in range(m):
                for j in range(m):
                    col = arr[:, i, j]
                    cols[f"{name}_{i + 1}{j + 1}"] = col.astype(int) if name == "gamma" else col
        return cols


# ---------------------------------------------------------------------------
# drivers


def _check_finite(state, it):
    for name in ("theta", "phi", "tau", "lambda_y"):
        if not np.all(np.isfinite(getattr(state, name))):
            raise SamplerError("non-finite draw", iteration=it, parameter=name)
    if not np.isfinite(state.pi):
        raise SamplerError("non-finite draw", iteration=it, parameter="pi")


def run_chain(spec, cfg, chain=0, state=None, callback=None):
    """Run one chain and return its retained draws.

    The random stream is seeded from ``(cfg.seed, chain)`` so chains are
    reproducible and mutually independent.
    """
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, chain]))
    free = spec.free_mask(cfg.phi_mask)
    state = state if state is not None else initial_state(spec, cfg)
    for j in np.flatnonzero(spec.y.var(axis=0) == 0):
        # a constant series carries no information about its lagged influence
        log.warning("series %d is constant", j + 1)
        state.zero_regressor.update((int(i), int(j)) for i in np.flatnonzero(free[:, j]))
    store = DrawsStore.allocate(cfg.n_keep, spec.T, spec.m, spec.p, len(spec.hierarchy.nu_grid), cfg.store_states)
    store.free = free
    k = 0
    for it in range(1, cfg.n_iter + 1):
        try:
            gibbs_sweep(spec, state, free, rng)
        except FilterDivergenceError as exc:
            raise SamplerError(str(exc), iteration=it, parameter="states") from exc
        except SamplerError as exc:
            raise SamplerError(exc.message, iteration=it, parameter=exc.parameter) from exc
        _check_finite(state, it)
        if it > cfg.burn_in and (it - cfg.burn_in) % cfg.thin == 0 and k < cfg.n_keep:
            store.record(k, chain, it, state)
            k += 1
        if callback is not None:
            callback(it, state)
    if state.zero_regressor:
        log.warning("zero regressor variance for coefficients %s", sorted(state.zero_regressor))
    if state.n_singular:
        log.info("pseudo-inverse used in %d backward steps", state.n_singular)
    store.zero_regressor = frozenset(state.zero_regressor)
    return store


def run_chains(spec, cfg, callback=None):
    """Run ``cfg.n_chains`` independent chains and stack their draws."""
    return DrawsStore.merge([run_chain(spec, cfg, chain=c, callback=callback) for c in range(cfg.n_chains)])


# ---------------------------------------------------------------------------
# forward simulation from the prior (used by joint-distribution tests)


def sample_prior(spec, free, rng):
    """Draw every parameter and latent from the prior; returns a ChainState.

    The state path is left at zero; see :func:`simulate_from_state`.
    """
    T, m = spec.T, spec.m
    hp = spec.hierarchy
    grid = np.asarray(hp.nu_grid)
    varphi = rng.dirichlet(np.asarray(hp.alpha), size=m)
    k = np.array([rng.choice(len(grid), p=row) for row in varphi])
    nu = grid[k]
    xi = rng.gamma(1.0, 1.0, size=m)
    beta = rng.gamma(1.0, 1.0 / xi)
    rho = rng.gamma(1.0, 1.0, size=m)
    if spec.fixed_lambda_theta is not None:
        lambda_theta = spec.fixed_lambda_theta.copy()
        omega = np.ones((T, m))
    else:
        lambda_theta = rng.gamma(0.5 * (nu - 1.0), beta / rho)
        omega = rng.gamma(0.5 * nu, 2.0 / nu, size=(T, m))
    hier = StateVarianceHierarchy(lambda_theta=lambda_theta, omega=omega, rho=rho, beta=beta, xi=xi, nu=nu,
                                  varphi=varphi, nu_grid=grid)
    slab = spec.slab
    pi = float(rng.beta(slab.a_pi, slab.b_pi))
    tau = rng.gamma(slab.c, 1.0 / slab.d, size=(m, m))
    gamma = (rng.random((m, m)) < pi) & free
    phi = np.where(gamma, rng.standard_normal((m, m)) / np.sqrt(tau), 0.0)
    lambda_y = rng.gamma(spec.obs_prior.shape, 1.0 / spec.obs_prior.rate, size=m)
    return ChainState(theta=np.zeros((T + 1, spec.p)), phi=phi, gamma=gamma, tau=tau, pi=pi, lambda_y=lambda_y,
                      hier=hier, incl_prob=np.zeros((m, m)))


def simulate_from_state(spec, state, rng):
    """Draw (theta, y) from the DLM implied by ``state``; updates state.theta."""
    from .dlm import simulate

    model = spec.build_model(state.phi, state.lambda_y, state.state_precision())
    theta, y = simulate(model, rng)
    state.theta = theta
    return y
