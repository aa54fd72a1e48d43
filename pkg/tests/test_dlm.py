import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sparsedlm.dlm import DlmModel, ffbs_sample, kalman_filter, one_step_predictive_density, simulate
from sparsedlm.errors import FilterDivergenceError, InputError

from oracles import dense_loglik, filtered_moments, random_model, smoothed_moments


def scalar_model(T, F=1.0, G=1.0, V=1.0, W=0.0, m0=0.0, C0=0.0):
    return DlmModel.from_functions(F, G, [[V]], [[W]], [m0], [[C0]], T)


def test_pinned_state():
    model = scalar_model(6, W=0.0, C0=0.0)
    y = np.array([3.0, -1.0, 2.0, 0.5, 7.0, -4.0])
    filt = kalman_filter(model, y)
    np.testing.assert_array_equal(filt.m[:, 0], 0.0)
    np.testing.assert_array_equal(filt.C[:, 0, 0], 0.0)
    np.testing.assert_array_equal(filt.f[:, 0], 0.0)
    np.testing.assert_array_equal(filt.Q[:, 0, 0], 1.0)


def test_single_update_by_hand():
    model = scalar_model(1, C0=1.0)
    filt = kalman_filter(model, [2.0])
    assert filt.f[0, 0] == pytest.approx(0.0)
    assert filt.Q[0, 0, 0] == pytest.approx(2.0)
    assert filt.m[1, 0] == pytest.approx(1.0)
    assert filt.C[1, 0, 0] == pytest.approx(0.5)


@pytest.mark.parametrize("seed", range(10))
def test_filter_matches_dense_conditioning(seed):
    rng = np.random.default_rng(seed)
    model = random_model(rng, T=5, zero_state_noise=seed % 2 == 0)
    _, y = simulate(model, rng)
    filt = kalman_filter(model, y)
    m_ref, C_ref = filtered_moments(model, y)
    np.testing.assert_allclose(filt.m, m_ref, rtol=1e-8, atol=1e-10)
    np.testing.assert_allclose(filt.C, C_ref, rtol=1e-8, atol=1e-10)
    assert filt.loglik == pytest.approx(dense_loglik(model, y), rel=1e-10)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_filter_oracle_property(seed):
    rng = np.random.default_rng(seed)
    model = random_model(rng)
    _, y = simulate(model, rng)
    filt = kalman_filter(model, y)
    m_ref, C_ref = filtered_moments(model, y)
    scale = max(1.0, np.abs(C_ref).max())
    np.testing.assert_allclose(filt.m, m_ref, rtol=1e-8, atol=1e-8 * scale)
    np.testing.assert_allclose(filt.C, C_ref, rtol=1e-8, atol=1e-8 * scale)
    for t in range(model.T + 1):
        assert np.max(np.abs(filt.C[t] - filt.C[t].T)) == 0.0
    for t in range(model.T):
        assert np.max(np.abs(filt.Q[t] - filt.Q[t].T)) == 0.0
        R = model.G[t] @ filt.C[t] @ model.G[t].T + model.W[t]
        np.testing.assert_allclose(filt.Q[t], model.F[t] @ R @ model.F[t].T + model.V, rtol=1e-10, atol=1e-12)


def test_loglik_is_sum_of_predictive_densities():
    rng = np.random.default_rng(3)
    model = random_model(rng, p=3, m=2, T=6)
    _, y = simulate(model, rng)
    filt = kalman_filter(model, y)
    total = sum(one_step_predictive_density(model, filt, t, y[t - 1]) for t in range(1, 7))
    assert filt.loglik == pytest.approx(total, abs=1e-10)


def test_predictive_density_values():
    model = scalar_model(1, W=0.0, C0=0.0)
    filt = kalman_filter(model, [0.0])
    assert one_step_predictive_density(model, filt, 1, 0.0) == pytest.approx(-0.5 * np.log(2 * np.pi))

    # C_{t-1} + sigma^2 = 1 with C_{t-1} = 0, tau^2 = 1, sigma^2 = 1: Q = 2
    sigma2, tau2 = 1.0, 1.0
    model = scalar_model(1, V=sigma2, W=tau2 * sigma2, C0=0.0)
    filt = kalman_filter(model, [0.3])
    assert filt.Q[0, 0, 0] == pytest.approx(2.0)


def test_predictive_density_bivariate_oracle():
    from scipy.stats import multivariate_normal

    rng = np.random.default_rng(11)
    model = random_model(rng, p=2, m=2, T=4)
    _, y = simulate(model, rng)
    filt = kalman_filter(model, y)
    for t in range(1, 5):
        ref = multivariate_normal(filt.f[t - 1], filt.Q[t - 1]).logpdf(y[t - 1])
        assert one_step_predictive_density(model, filt, t, y[t - 1]) == pytest.approx(ref, rel=1e-12)


def test_predictive_density_bad_index():
    model = scalar_model(2, C0=1.0)
    filt = kalman_filter(model, [0.0, 0.0])
    with pytest.raises(InputError):
        one_step_predictive_density(model, filt, 3, 0.0)


def test_divergence_names_time():
    # zero observation noise and a pinned state make Q_2 singular
    F = lambda t: [[1.0]] if t == 1 else [[0.0]]
    model = DlmModel.from_functions(F, 1.0, [[0.0]], [[0.0]], [0.0], [[1.0]], 3)
    with pytest.raises(FilterDivergenceError) as err:
        kalman_filter(model, [1.0, 1.0, 1.0])
    assert err.value.t == 2
    assert "t=2" in str(err.value)


def test_dimension_mismatch():
    model = scalar_model(3, C0=1.0)
    with pytest.raises(InputError):
        kalman_filter(model, np.zeros(4))
    with pytest.raises(InputError):
        DlmModel(np.ones((3, 1, 1)), np.ones((3, 2, 2)), [[1.0]], np.zeros((3, 1, 1)), [0.0], [[1.0]])


def test_validate_rejects_indefinite():
    model = scalar_model(2, C0=1.0)
    model.W[1] = [[-1.0]]
    with pytest.raises(InputError):
        model.validate()


def test_ffbs_deterministic_trajectory():
    T = 8
    G = lambda t: [[np.cos(0.3 * t), -np.sin(0.3 * t)], [np.sin(0.3 * t), 1.1 * np.cos(0.3 * t)]]
    model = DlmModel.from_functions(np.eye(2)[:1], G, [[1.0]], np.zeros((2, 2)), [1.0, -2.0], np.zeros((2, 2)), T)
    y = np.random.default_rng(0).normal(size=(T, 1))
    filt = kalman_filter(model, y)
    expected = [model.m0]
    for k in range(T):
        expected.append(model.G[k] @ expected[-1])
    rng = np.random.default_rng(1)
    for _ in range(5):
        path = ffbs_sample(model, filt, rng)
        np.testing.assert_allclose(path.theta, np.array(expected), rtol=1e-12, atol=1e-12)


def test_ffbs_seed_determinism():
    rng = np.random.default_rng(5)
    model = random_model(rng, p=3, m=2, T=6)
    _, y = simulate(model, rng)
    filt = kalman_filter(model, y)
    a = ffbs_sample(model, filt, np.random.default_rng(42)).theta
    b = ffbs_sample(model, filt, np.random.default_rng(42)).theta
    np.testing.assert_array_equal(a, b)


def test_ffbs_zero_noise_component_is_constant():
    # trend-like first component: W row zero, G identity on it
    T = 30
    G = np.diag([1.0, 0.7])
    W = np.diag([0.0, 0.5])
    model = DlmModel.from_functions([[1.0, 1.0]], G, [[0.3]], W, [0.0, 0.0], np.diag([5.0, 1.0]), T)
    rng = np.random.default_rng(2)
    _, y = simulate(model, rng)
    filt = kalman_filter(model, y)
    for _ in range(20):
        theta = ffbs_sample(model, filt, rng).theta
        assert np.ptp(theta[:, 0]) < 1e-10


def test_ffbs_local_level_matches_smoother():
    T = 10
    model = scalar_model(T, V=1.0, W=0.5, m0=0.0, C0=2.0)
    rng = np.random.default_rng(8)
    _, y = simulate(model, rng)
    filt = kalman_filter(model, y)
    n = 10_000
    draws = np.array([ffbs_sample(model, filt, rng).theta[:, 0] for _ in range(n)])
    mean_ref, cov_ref = smoothed_moments(model, y)
    se = np.sqrt(cov_ref[:, 0, 0] / n)
    assert np.all(np.abs(draws.mean(0) - mean_ref[:, 0]) < 3.5 * se)
    # sample variance: se of s^2 is about var * sqrt(2/n)
    var_se = cov_ref[:, 0, 0] * np.sqrt(2.0 / n)
    assert np.all(np.abs(draws.var(0) - cov_ref[:, 0, 0]) < 4 * var_se)
