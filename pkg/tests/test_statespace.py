import numpy as np
import pytest
from scipy.signal import lfilter

from fraccomp.exceptions import InvalidArgumentError
from fraccomp.fracdiff import pi_coeffs
from fraccomp.model import DofcParams, DofcSpec, simulate_dofc
from fraccomp.statespace import (
    arma_approx,
    build_system,
    kalman_filter,
    kalman_smoother,
    loglikelihood,
    predict,
)
from fraccomp.statespace.kalman import _run_numba, _run_numpy

from oracles import brute_loglik, joint_moments, random_small_model


def test_arma_approx_small_d():
    fit = arma_approx(0.0025, 500)
    psi = fit.impulse_response(500)
    assert psi[0] == pytest.approx(1.0)
    assert np.abs(psi[1:]).max() < 0.02


def test_arma_approx_matches_fractional_weights():
    fit = arma_approx(0.4, 2156)
    psi = fit.impulse_response(50)
    rmse = np.sqrt(np.mean((psi - pi_coeffs(-0.4, 50)) ** 2))
    assert rmse < 1e-2
    assert fit.stable


def test_arma_approx_error_falls_with_order():
    errors = [arma_approx(0.4, 1000, order=o).discrepancy for o in [(1, 1), (2, 2), (3, 3)]]
    assert errors[0] > errors[1] > errors[2]


def test_arma_approx_rejects_bad_d():
    with pytest.raises(InvalidArgumentError):
        arma_approx(-0.1, 500)


def test_system_dimension(small_params):
    spec = DofcSpec(4, (2,), 1, 1)
    params = small_params.replace(d=[0.6], lam=np.array([[1.0, 0.0], [0.6, 0.8], [0.4, -0.5], [0.2, 0.3]]))
    system = build_system(spec, params, 200)
    # two 4-state ARMA(3,3) blocks plus one AR(1) state
    assert system.m == 9
    assert system.state_noise_loading.shape == (9, 3)


def test_zero_loadings_leave_noise(small_spec, small_params):
    params = small_params.replace(lam=np.zeros((4, 2)), gamma=np.zeros((4, 1)))
    system = build_system(small_spec, params, 100)
    y = np.random.default_rng(0).standard_normal((100, 4))
    ll = loglikelihood(system, y)
    sd = np.sqrt(params.h)
    oracle = np.sum(-0.5 * np.log(2 * np.pi * params.h) - 0.5 * ((y - params.c) / sd) ** 2)
    np.testing.assert_allclose(ll, oracle, rtol=1e-12)


def test_fractional_block_reproduces_arma_impulse():
    spec = DofcSpec(1, (1,), 0)
    params = DofcParams(d=[0.4], lam=[[1.0]], gamma=np.zeros((1, 0)), phi=np.zeros((0, 1)), h=[1.0])
    system = build_system(spec, params, 300)
    blk = system.blocks[0]["states"]
    T, R = system.transition[blk, blk], system.state_noise_loading[blk, 0]
    # first state of the block responds to a unit shock like the ARMA filter
    state, resp = R.copy(), []
    for _ in range(30):
        resp.append(state[0])
        state = T @ state
    approx = arma_approx(0.4, 300)
    np.testing.assert_allclose(resp, approx.impulse_response(30), atol=2e-3)


@pytest.mark.parametrize("seed", range(10))
def test_kalman_loglik_matches_joint_density(seed):
    rng = np.random.default_rng(seed)
    spec, params = random_small_model(rng)
    n = int(rng.integers(10, 51))
    system = build_system(spec, params, n)
    y = simulate_dofc(spec, params, n, rng)
    np.testing.assert_allclose(kalman_filter(system, y).loglik, brute_loglik(system, y),
                               rtol=0, atol=1e-8)


def test_kalman_loglik_with_missing(small_spec, small_params):
    rng = np.random.default_rng(4)
    system = build_system(small_spec, small_params, 40)
    y = simulate_dofc(small_spec, small_params, 40, rng)
    y[3, 1] = np.nan
    y[10] = np.nan
    y[20, [0, 2]] = np.nan
    for engine in ("numba", "numpy"):
        np.testing.assert_allclose(kalman_filter(system, y, engine=engine).loglik,
                                   brute_loglik(system, y), atol=1e-8)


def test_engines_agree(small_spec, small_params):
    y = simulate_dofc(small_spec, small_params, 400, 5)
    system = build_system(small_spec, small_params, 400)
    a = kalman_filter(system, y, engine="numba")
    b = kalman_filter(system, y, engine="numpy")
    np.testing.assert_allclose(a.loglik, b.loglik, rtol=1e-12)
    np.testing.assert_allclose(a.predicted_means, b.predicted_means, atol=1e-10)
    np.testing.assert_allclose(a.loglik_t, b.loglik_t, atol=1e-10)


def test_steady_state_shortcut(small_spec, small_params):
    y = simulate_dofc(small_spec, small_params, 600, 6)
    system = build_system(small_spec, small_params, 600)
    full = kalman_filter(system, y, steady_state=False)
    fast = kalman_filter(system, y, steady_state=True)
    np.testing.assert_allclose(fast.loglik, full.loglik, atol=1e-6)


def test_standardized_residuals_whiten(small_spec, small_params):
    y = simulate_dofc(small_spec, small_params, 2000, 7)
    out = kalman_filter(build_system(small_spec, small_params, 2000), y)
    e = out.standardized_residuals()
    np.testing.assert_allclose(e.var(axis=0), 1.0, atol=0.1)


def test_smoother_matches_conditional_expectation(small_spec, small_params):
    n = 30
    rng = np.random.default_rng(8)
    system = build_system(small_spec, small_params, n)
    y = simulate_dofc(small_spec, small_params, n, rng)
    y[5, 2] = np.nan
    smoothed = kalman_smoother(system, y)
    # oracle: E[alpha_t | y] from the joint Gaussian of states and observations
    T, Z, m, p = system.transition, system.observation, system.m, system.p
    P = [system.initial_cov]
    for _ in range(n - 1):
        P.append(T @ P[-1] @ T.T + system.state_noise_cov)
    mean_y, cov_y = joint_moments(system, n)
    cross = np.zeros((n * m, n * p))  # Cov(alpha_t, y_s)
    for s in range(n):
        c = P[s]
        for t in range(s, n):
            cross[t * m:(t + 1) * m, s * p:(s + 1) * p] = c @ Z.T
            cross[s * m:(s + 1) * m, t * p:(t + 1) * p] = (Z @ c).T
            c = T @ c
    vec = y.ravel()
    keep = ~np.isnan(vec)
    gain = np.linalg.solve(cov_y[np.ix_(keep, keep)], (vec - mean_y)[keep])
    oracle = (cross[:, keep] @ gain).reshape(n, m)
    np.testing.assert_allclose(smoothed.means, oracle, atol=1e-8)


def test_predict_one_step_equals_filter(small_spec, small_params):
    y = simulate_dofc(small_spec, small_params, 200, 9)
    system = build_system(small_spec, small_params, 201)
    out = kalman_filter(system, y)
    means, covs = predict(system, out, 3)
    full = kalman_filter(system, np.vstack([y, np.full((1, 4), np.nan)]))
    np.testing.assert_allclose(means[0], system.obs_intercept + system.observation
                               @ full.predicted_means[-1], atol=1e-10)
    assert means.shape == (3, 4) and covs.shape == (3, 4, 4)
    # predictive variances grow with the horizon
    assert np.all(np.diff(np.diagonal(covs, axis1=1, axis2=2), axis=0) > 0)
    with pytest.raises(InvalidArgumentError):
        predict(system, out, 0)


def test_ar_component_forecast_decays():
    spec = DofcSpec(1, (), 1, 1)
    params = DofcParams(d=np.zeros(0), lam=np.zeros((1, 0)), gamma=[[1.0]], phi=[[0.6]], h=[1e-6])
    y = lfilter([1.0], [1.0, -0.6], np.random.default_rng(1).standard_normal(300))[:, None]
    system = build_system(spec, params, 300)
    means, _ = predict(system, kalman_filter(system, y), 4)
    np.testing.assert_allclose(means[:, 0], y[-1, 0] * 0.6 ** np.arange(1, 5), rtol=1e-4)
