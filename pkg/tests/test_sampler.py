import numpy as np
import pytest
from scipy import integrate, stats

from sparsedlm import sampler as smp
from sparsedlm.errors import FilterDivergenceError, InputError, SamplerError
from sparsedlm.priors import HierarchyPrior
from sparsedlm.sampler import (
    McmcConfig,
    ModelSpec,
    inclusion_log_odds,
    initial_state,
    run_chain,
    run_chains,
    update_connectivity,
    update_hierarchy,
)


def _ar_data(T=120, phi=0.6, seed=0):
    rng = np.random.default_rng(seed)
    th = np.zeros(T + 1)
    for t in range(T):
        th[t + 1] = phi * th[t] + rng.standard_normal()
    return th[1:] + 0.5 * rng.standard_normal(T)


def test_config_validation():
    with pytest.raises(InputError):
        McmcConfig(n_iter=10, burn_in=10)
    with pytest.raises(InputError):
        McmcConfig(thin=0)
    with pytest.raises(InputError):
        McmcConfig(n_chains=0)
    assert McmcConfig(n_iter=100, burn_in=20, thin=4).n_keep == 20


def test_spec_validation():
    with pytest.raises(InputError):
        ModelSpec(y=np.array([[1.0], [np.nan]]))
    with pytest.raises(InputError):
        ModelSpec(y=np.zeros((10, 2)), x_obs=np.zeros((9, 2)))
    with pytest.raises(InputError):
        ModelSpec(y=np.zeros((10, 2)), structure=np.ones((3, 3)))


def test_inclusion_odds_match_quadrature():
    rng = np.random.default_rng(1)
    z = rng.normal(size=8)
    r = 0.3 * z + rng.normal(size=8)
    w = rng.uniform(0.5, 2.0, size=8)
    tau, pi = 1.7, 0.4
    lo, mean, prec = inclusion_log_odds(z, r, w, tau, pi)

    def lik(phi):
        return np.prod(stats.norm.pdf(r, phi * z, 1 / np.sqrt(w)))

    slab, _ = integrate.quad(lambda f: lik(f) * stats.norm.pdf(f, 0, 1 / np.sqrt(tau)), -20, 20, points=[mean])
    expected = np.log(pi / (1 - pi)) + np.log(slab / lik(0.0))
    assert lo == pytest.approx(expected, rel=1e-7)
    # conditional mean and precision of phi
    m1, _ = integrate.quad(lambda f: f * lik(f) * stats.norm.pdf(f, 0, 1 / np.sqrt(tau)), -20, 20, points=[mean])
    assert mean == pytest.approx(m1 / slab, rel=1e-7)
    assert prec == pytest.approx(tau + np.sum(w * z * z))


def test_strong_signal_inclusion():
    rng = np.random.default_rng(2)
    z = rng.normal(size=200)
    r = -3.0 * z + 0.1 * rng.normal(size=200)
    lo, mean, _ = inclusion_log_odds(z, r, np.full(200, 100.0), 3.78 / 1.53, 2 / 3)
    assert 1 / (1 + np.exp(-lo)) > 0.99
    assert mean == pytest.approx(-3.0, abs=0.01)


def _state_for(spec, seed=0):
    rng = np.random.default_rng(seed)
    state = initial_state(spec)
    state.theta = rng.normal(size=(spec.T + 1, spec.p))
    return state, rng


def test_pi_one_always_includes():
    spec = ModelSpec(y=_ar_data(60)[:, None], trend=False)
    state, rng = _state_for(spec)
    state.pi = 1.0
    for _ in range(50):
        _, included = update_connectivity(spec, state, (0, 0), rng)
        assert included


def test_zero_regressor_gives_prior_odds():
    T = 40
    y = np.random.default_rng(3).normal(size=(T, 2))
    x = np.ones((T, 2))
    x[:, 1] = 0.0
    spec = ModelSpec(y=y, x_trans=x, trend=False)
    state, rng = _state_for(spec)
    state.pi = 0.37
    update_connectivity(spec, state, (0, 1), rng)
    assert state.incl_prob[0, 1] == pytest.approx(0.37, abs=1e-12)
    assert (0, 1) in state.zero_regressor


def test_hierarchy_with_zero_residuals():
    T = 400
    spec = ModelSpec(y=np.zeros((T, 1)), trend=False)
    state = initial_state(spec)
    state.theta = np.zeros((T + 1, 1))
    rng = np.random.default_rng(4)
    draws = []
    fresh = state.hier.copy()
    for _ in range(200):
        state.hier = fresh.copy()
        state.hier.nu = np.array([3.0])
        update_hierarchy(spec, state, rng)
        draws.append(state.hier.omega.mean())
    # omega | e = 0 ~ Gamma((nu + 1) / 2, nu / 2), mean (nu + 1) / nu
    assert np.mean(draws) == pytest.approx(4.0 / 3.0, rel=0.01)


def test_single_nu_grid():
    spec = ModelSpec(y=_ar_data(50)[:, None], trend=False, hierarchy=HierarchyPrior(nu_grid=(3.0,)))
    d = run_chain(spec, McmcConfig(n_iter=30, burn_in=10, seed=1))
    np.testing.assert_array_equal(d.nu, 3.0)
    np.testing.assert_array_equal(d.varphi, 1.0)


def test_fixed_lambda_theta_pins_hierarchy():
    spec = ModelSpec(y=_ar_data(50)[:, None], trend=False, fixed_lambda_theta=2.0)
    d = run_chain(spec, McmcConfig(n_iter=30, burn_in=10, seed=1))
    np.testing.assert_array_equal(d.lambda_theta, 2.0)
    np.testing.assert_array_equal(d.omega, 1.0)


def test_chain_determinism_and_seed_sensitivity():
    spec = ModelSpec(y=_ar_data(60)[:, None])
    cfg = McmcConfig(n_iter=40, burn_in=10, seed=5)
    a = run_chain(spec, cfg)
    b = run_chain(spec, cfg)
    for name in ("phi", "lambda_y", "omega", "loglik", "state_mean"):
        np.testing.assert_array_equal(getattr(a, name), getattr(b, name))
    c = run_chain(spec, McmcConfig(n_iter=40, burn_in=10, seed=6))
    assert not np.array_equal(a.lambda_y, c.lambda_y)


def test_draw_invariants():
    rng = np.random.default_rng(7)
    y = rng.normal(size=(80, 2)).cumsum(axis=0) * 0.1 + rng.normal(size=(80, 2))
    spec = ModelSpec(y=y)
    d = run_chain(spec, McmcConfig(n_iter=60, burn_in=20, thin=2, seed=2))
    assert d.n_draws == 20
    assert np.all(d.phi[~d.gamma] == 0.0)
    for name in ("lambda_y", "lambda_theta", "omega", "rho", "beta", "xi", "tau"):
        assert np.all(getattr(d, name) > 0), name
    assert np.all(np.diff(d.iteration) == 2)


def test_chains_merge_and_differ():
    spec = ModelSpec(y=_ar_data(40)[:, None], trend=False)
    d = run_chains(spec, McmcConfig(n_iter=30, burn_in=10, seed=3, n_chains=2))
    assert d.n_draws == 40
    np.testing.assert_array_equal(np.bincount(d.chain), [20, 20])
    assert not np.array_equal(d.lambda_y[d.chain == 0], d.lambda_y[d.chain == 1])


def test_phi_mask_forces_zero():
    spec = ModelSpec(y=np.random.default_rng(0).normal(size=(50, 2)), trend=False)
    d = run_chain(spec, McmcConfig(n_iter=30, burn_in=0, seed=0, phi_mask={(0, 1)}))
    assert np.all(d.phi[:, 0, 1] == 0.0) and not d.gamma[:, 0, 1].any()
    assert not d.free[0, 1]


def test_scalar_columns_names():
    spec = ModelSpec(y=np.random.default_rng(0).normal(size=(30, 2)))
    d = run_chain(spec, McmcConfig(n_iter=12, burn_in=2, seed=0))
    cols = d.scalar_columns()
    for name in ("chain", "iteration", "loglik", "pi", "lambda_y_2", "nu_1", "phi_12", "gamma_21", "tau_22"):
        assert name in cols and len(cols[name]) == 10
    assert cols["gamma_12"].dtype.kind == "i"


def test_divergence_reports_iteration(monkeypatch):
    spec = ModelSpec(y=_ar_data(30)[:, None], trend=False)
    calls = {"n": 0}
    real = smp.kalman_filter

    def flaky(model, y):
        calls["n"] += 1
        if calls["n"] == 3:
            raise FilterDivergenceError(7, "singular")
        return real(model, y)

    monkeypatch.setattr(smp, "kalman_filter", flaky)
    with pytest.raises(SamplerError) as info:
        run_chain(spec, McmcConfig(n_iter=10, burn_in=0, seed=0))
    assert info.value.iteration == 3 and info.value.parameter == "states"
    assert "t=7" in str(info.value)


def test_nonfinite_draw_names_parameter(monkeypatch):
    spec = ModelSpec(y=_ar_data(30)[:, None], trend=False)

    def bad(spec, state, rng):
        state.lambda_y = np.array([np.inf])
        return state

    monkeypatch.setattr(smp, "update_obs_precision", bad)
    with pytest.raises(SamplerError) as info:
        run_chain(spec, McmcConfig(n_iter=10, burn_in=0, seed=0))
    assert info.value.parameter is not None and info.value.iteration == 1


def test_constant_series_is_flagged():
    y = np.column_stack([np.full(40, 2.0), np.random.default_rng(1).normal(size=40)])
    d = run_chain(ModelSpec(y=y), McmcConfig(n_iter=15, burn_in=5, seed=0))
    assert {(0, 0), (1, 0)} <= set(d.zero_regressor)


def _pair_data(phi12, T=200, seed=0):
    rng = np.random.default_rng(seed)
    th = np.zeros((T + 1, 2))
    for t in range(T):
        th[t + 1, 1] = rng.standard_normal()
        th[t + 1, 0] = phi12 * th[t, 1] + 0.5 * rng.standard_normal()
    return th[1:] + 0.1 * rng.standard_normal((T, 2))


def test_inclusion_monotone_in_signal():
    probs = []
    for phi12 in (0.0, 0.5, 3.0):
        spec = ModelSpec(y=_pair_data(phi12), trend=False)
        d = run_chain(spec, McmcConfig(n_iter=400, burn_in=100, seed=0))
        probs.append(d.gamma[:, 0, 1].mean())
    assert probs[0] <= probs[1] <= probs[2]
    assert probs[0] < 0.5 and probs[2] > 0.99
