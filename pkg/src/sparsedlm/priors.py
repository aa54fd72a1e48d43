"""Priors for connectivity coefficients and state variances.

Rates are used throughout for Gamma distributions: ``Gamma(shape, rate)`` has
mean ``shape / rate``. The one exception is the Beta-prime mixing step, where
the scale of the exponential stage is written out explicitly.
"""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy import special, stats

from .errors import InputError

#: tau_0 reported for the first-percentile elicitation of the slab precision.
PUBLISHED_TAU0 = 1.82
#: Rate of the slab-precision Gamma prior used alongside PUBLISHED_TAU0.
PUBLISHED_RATE_D = 1.53

DEFAULT_NU_GRID = (2.0, 3.0, 5.0, 10.0, 20.0, 50.0)


def _positive(**kwargs):
    for name, value in kwargs.items():
        if not np.all(np.asarray(value) > 0):
            raise InputError(f"{name} must be positive, got {value}")


@dataclass(frozen=True)
class GammaParams:
    shape: float
    rate: float

    def __post_init__(self):
        _positive(shape=self.shape, rate=self.rate)

    @property
    def mean(self):
        return self.shape / self.rate

    def __str__(self):
        return f"Gamma({self.shape:.2f}, {self.rate:.2f})"


@dataclass(frozen=True)
class BetaParams:
    a: float
    b: float

    def __post_init__(self):
        _positive(a=self.a, b=self.b)

    @property
    def mean(self):
        return self.a / (self.a + self.b)

    @property
    def sd(self):
        s = self.a + self.b
        return float(np.sqrt(self.a * self.b / (s * s * (s + 1.0))))

    def __str__(self):
        return f"Beta({self.a:g}, {self.b:g})"


@dataclass(frozen=True)
class PointMassPrior:
    """Spike-and-slab prior: phi = 0 w.p. 1 - pi, else N(0, 1/tau).

    pi ~ Beta(a_pi, b_pi) and tau ~ Gamma(c, d).
    """

    a_pi: float = 6.0
    b_pi: float = 3.0
    c: float = PUBLISHED_TAU0 * PUBLISHED_RATE_D + 1.0
    d: float = PUBLISHED_RATE_D

    def __post_init__(self):
        _positive(a_pi=self.a_pi, b_pi=self.b_pi, c=self.c, d=self.d)


@dataclass(frozen=True)
class HierarchyPrior:
    """Hyperparameters of the state-variance hierarchy.

    ``nu_grid`` holds the support of the degrees of freedom and ``alpha`` the
    Dirichlet concentration over it (uniform 1 when omitted).
    """

    nu_grid: tuple = DEFAULT_NU_GRID
    alpha: tuple = None

    def __post_init__(self):
        grid = tuple(float(v) for v in self.nu_grid)
        if not grid or min(grid) <= 1.0:
            raise InputError("every nu grid value must exceed 1")
        object.__setattr__(self, "nu_grid", grid)
        alpha = self.alpha if self.alpha is not None else (1.0,) * len(grid)
        alpha = tuple(float(v) for v in alpha)
        if len(alpha) != len(grid):
            raise InputError("alpha must have one entry per nu grid value")
        _positive(alpha=np.array(alpha))
        object.__setattr__(self, "alpha", alpha)


@dataclass
class StateVarianceHierarchy:
    """Current values of the state-variance latents, one entry per component.

    ``omega`` has shape (T, k); the remaining vectors have length k, and
    ``varphi`` has shape (k, len(nu_grid)).
    """

    lambda_theta: np.ndarray
    omega: np.ndarray
    rho: np.ndarray
    beta: np.ndarray
    xi: np.ndarray
    nu: np.ndarray
    varphi: np.ndarray
    nu_grid: np.ndarray = field(default_factory=lambda: np.asarray(DEFAULT_NU_GRID))

    @classmethod
    def initial(cls, T, k, prior):
        grid = np.asarray(prior.nu_grid)
        return cls(
            lambda_theta=np.ones(k),
            omega=np.ones((T, k)),
            rho=np.ones(k),
            beta=np.ones(k),
            xi=np.ones(k),
            nu=np.full(k, grid[len(grid) // 2]),
            varphi=np.tile(np.asarray(prior.alpha) / np.sum(prior.alpha), (k, 1)),
            nu_grid=grid,
        )

    def copy(self):
        return StateVarianceHierarchy(**{k: np.array(v, copy=True) for k, v in self.__dict__.items()})


# ---------------------------------------------------------------------------
# densities and samplers


def beta_prime_density(x, p, q, beta):
    """Scaled Beta-prime density with shapes ``p``, ``q`` and scale ``beta``."""
    _positive(p=p, q=q, beta=beta)
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise InputError("beta-prime density is defined for x >= 0")
    u = x / beta
    with np.errstate(divide="ignore"):
        log_kernel = special.xlogy(p - 1.0, u) - (p + q) * np.log1p(u)
    out = np.exp(special.gammaln(p + q) - special.gammaln(p) - special.gammaln(q) - np.log(beta) + log_kernel)
    return out if out.ndim else float(out)


def beta_prime_cdf(x, p, q, beta):
    """CDF of the scaled Beta-prime, through the regularized incomplete beta."""
    u = np.asarray(x, dtype=float) / beta
    return special.betainc(p, q, u / (1.0 + u))


def sample_beta_prime_mixture(q, beta, rng, size=None):
    """Draw from BetaPrime(1, q) with scale ``beta`` via its Gamma mixture.

    rho ~ Gamma(q, rate=1), then x | rho ~ Gamma(1, scale=beta / rho).
    """
    _positive(q=q, beta=beta)
    rho = rng.gamma(q, 1.0, size=size)
    return rng.gamma(1.0, beta / rho, size=size)


def marginal_state_prior_density(theta, mean, sigma, nu, beta):
    """Closed-form marginal prior of a state given its predicted mean.

    (nu - 1) / (2 s (1 + |theta - mean| / s)^nu) with s = sqrt(sigma nu beta).
    """
    if nu <= 1:
        raise InputError("nu must exceed 1 for a normalizable density")
    _positive(sigma=sigma, beta=beta)
    s = np.sqrt(sigma * nu * beta)
    z = np.abs(np.asarray(theta, dtype=float) - mean) / s
    out = (nu - 1.0) / (2.0 * s) * np.exp(-nu * np.log1p(z))
    return out if out.ndim else float(out)


def point_mass_log_prior(phi, pi, tau, included=None):
    """log prior of a spike-and-slab coefficient.

    The atom is identified by ``included`` when given, otherwise by
    ``phi == 0``. Returns log(1 - pi) on the atom and
    log(pi) + log N(phi; 0, 1/tau) off it.
    """
    if not 0.0 <= pi <= 1.0:
        raise InputError("pi must lie in [0, 1]")
    _positive(tau=tau)
    on_atom = (phi == 0.0) if included is None else not included
    if on_atom:
        return float(np.log1p(-pi)) if pi < 1.0 else -np.inf
    return float(np.log(pi) + stats.norm.logpdf(phi, 0.0, 1.0 / np.sqrt(tau)))


# ---------------------------------------------------------------------------
# elicitation


def tau0_from_quantile(target_quantile, prob):
    """Precision of a zero-mean normal whose ``prob`` quantile is ``target_quantile``."""
    if not 0.0 < prob < 1.0:
        raise InputError("prob must lie in (0, 1)")
    z = stats.norm.ppf(prob)
    if target_quantile == 0 or np.sign(target_quantile) != np.sign(z):
        raise InputError("target quantile must lie on the same side of zero as the probability")
    return float((target_quantile / z) ** -2)


def elicit_slab_precision(target_quantile=-1.0, prob=0.01, rate_d=PUBLISHED_RATE_D, tau0=None):
    """Gamma(c, d) prior for the slab precision with mode ``tau0``.

    ``tau0`` is computed from the quantile statement unless given directly;
    the shape follows from equating the mode, c = tau0 * d + 1.
    """
    _positive(rate_d=rate_d)
    if tau0 is None:
        tau0 = tau0_from_quantile(target_quantile, prob)
    if tau0 < 0:
        raise InputError("tau0 must be non-negative")
    return GammaParams(shape=tau0 * rate_d + 1.0, rate=rate_d)


def elicit_inclusion_prior(a, b):
    """Beta(a, b) prior for the inclusion weight; see ``.mean`` and ``.sd``."""
    return BetaParams(a, b)


def _gig_standard(lam, omega, rng):
    """Draw from density prop. to x^(lam-1) exp(-omega (x + 1/x) / 2), lam >= 0.

    Devroye (2014), "Random variate generation for the generalized inverse
    Gaussian distribution"; uniformly bounded rejection rate.
    """
    alpha = math.sqrt(omega * omega + lam * lam) - lam

    def psi(x):
        return -alpha * (math.cosh(x) - 1.0) - lam * (math.expm1(x) - x)

    def dpsi(x):
        return -alpha * math.sinh(x) - lam * math.expm1(x)

    x = -psi(1.0)
    if x > 2.0:
        t = math.sqrt(2.0 / (alpha + lam))
    elif x < 0.5:
        t = math.log(4.0 / (alpha + 2.0 * lam))
    else:
        t = 1.0
    x = -psi(-1.0)
    if x > 2.0:
        s = math.sqrt(4.0 / (alpha * math.cosh(1.0) + lam))
    elif x < 0.5:
        s = math.log1p(1.0 / alpha + math.sqrt(1.0 / (alpha * alpha) + 2.0 / alpha))
        if lam > 0:
            s = min(1.0 / lam, s)
    else:
        s = 1.0
    eta, zeta, theta, xi = -psi(t), -dpsi(t), -psi(-s), dpsi(-s)
    p, r = 1.0 / xi, 1.0 / zeta
    td = t - r * eta
    sd = s - p * theta
    q = td + sd
    while True:
        u, v, w = rng.random(3)
        if u < q / (p + q + r):
            x = -sd + q * v
        elif u < (q + r) / (p + q + r):
            x = td - r * math.log(v)
        else:
            x = -sd + p * math.log(v)
        if x > td:
            chi = math.exp(-eta - zeta * (x - t))
        elif x < -sd:
            chi = math.exp(-theta + xi * (x + s))
        else:
            chi = 1.0
        if w * chi <= math.exp(psi(x)):
            break
    return (lam / omega + math.sqrt(1.0 + (lam / omega) ** 2)) * math.exp(x)


def sample_gig(p, a, b, rng):
    """Generalized inverse Gaussian draw, density prop. to
    x^(p-1) exp(-(a x + b / x) / 2) with a, b > 0."""
    _positive(a=a, b=b)
    omega = math.sqrt(a * b)
    scale = math.sqrt(b / a)
    if p >= 0:
        return scale * _gig_standard(p, omega, rng)
    return scale / _gig_standard(-p, omega, rng)
