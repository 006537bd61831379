import numpy as np
import pandas as pd
import pytest
from scipy import stats
from scipy.signal import lfilter

from fraccomp.exceptions import InvalidArgumentError
from fraccomp.fracdiff import simulate_fi
from fraccomp.forecast import (
    CawDcc,
    CawDiag,
    DiagonalLinear,
    LossTable,
    benchmark,
    block_bootstrap_indices,
    css_residuals,
    fit_univariate,
    loss_frobenius,
    loss_l3,
    loss_log_score,
    loss_min_variance,
    loss_record,
    loss_stein,
    min_variance_weights,
    model_confidence_set,
    risk_table,
    rolling_eval,
    wishart_logpdf,
)
from fraccomp.realized import CovPanel


def random_pd(rng, k):
    a = rng.standard_normal((k, k))
    return a @ a.T + 0.5 * np.eye(k)


def caw_path(rng, n, target, a, b, nu):
    """Simulate a diagonal CAW(1,1) path by its defining recursion."""
    k = target.shape[0]
    alpha, beta = np.outer(a, a), np.outer(b, b)
    s = target.copy()
    x_prev = target.copy()
    out = []
    for _ in range(n):
        s = target + beta * (s - target) + alpha * (x_prev - target)
        x_prev = stats.wishart(df=nu, scale=s / nu).rvs(random_state=rng)
        out.append(x_prev)
    return np.array(out)


# --- losses -----------------------------------------------------------------

def test_losses_zero_at_equality(rng):
    for _ in range(20):
        x = random_pd(rng, 4)
        assert abs(loss_frobenius(x, x)) < 1e-12
        assert abs(loss_stein(x, x)) < 1e-10
        assert abs(loss_l3(x, x)) < 1e-10


def test_losses_hand_values():
    pred, real = np.eye(2), np.diag([2.0, 1.0])
    np.testing.assert_allclose(loss_frobenius(pred, real), 1.0)
    np.testing.assert_allclose(loss_stein(pred, real), 1.0 - np.log(2.0))
    # tr(X^3 - Xhat^3)/6 - tr(Xhat^2 (X - Xhat))/2 = 7/6 - 1/2
    np.testing.assert_allclose(loss_l3(pred, real), 7 / 6 - 0.5)


def test_losses_positive_off_equality(rng):
    for _ in range(20):
        a, b = random_pd(rng, 3), random_pd(rng, 3)
        assert loss_stein(a, b) > 0 and loss_l3(a, b) > 0 and loss_frobenius(a, b) > 0


def test_min_variance_weights():
    np.testing.assert_allclose(min_variance_weights(np.eye(6)), np.full(6, 1 / 6))
    x = np.diag([1.0, 4.0])
    w = min_variance_weights(x)
    np.testing.assert_allclose(w, [0.8, 0.2])
    np.testing.assert_allclose(loss_min_variance(x, np.eye(2)), 0.68)


def test_log_score_standard_normal():
    np.testing.assert_allclose(loss_log_score(np.array([[1.0]]), np.array([0.0])),
                               0.5 * np.log(2 * np.pi), rtol=1e-14)
    assert round(0.5 * np.log(2 * np.pi), 4) == 0.9189


def test_log_score_matches_scipy(rng):
    x, r = random_pd(rng, 3), rng.standard_normal(3)
    np.testing.assert_allclose(loss_log_score(x, r),
                               -stats.multivariate_normal(np.zeros(3), x).logpdf(r), rtol=1e-12)


def test_loss_record_without_returns(rng):
    rec = loss_record(np.eye(2), random_pd(rng, 2))
    assert set(rec) == {"LF", "LS", "L3", "LMV", "LD"} and np.isnan(rec["LD"])


def test_singular_forecast_fails():
    with pytest.raises(Exception):
        loss_stein(np.zeros((2, 2)), np.eye(2))


# --- Wishart models ----------------------------------------------------------

def test_wishart_density_matches_scipy(rng):
    s, x = random_pd(rng, 3), random_pd(rng, 3)
    for nu in (4.5, 10.0, 50.0):
        np.testing.assert_allclose(wishart_logpdf(x, nu, s),
                                   stats.wishart(df=nu, scale=s / nu).logpdf(x), rtol=1e-12)


def test_wishart_concentrates_with_nu(rng):
    x = random_pd(rng, 3)
    assert wishart_logpdf(x, 200.0, x) > wishart_logpdf(x, 8.0, x)


def test_caw_degenerate_recursion(rng):
    x = np.array([random_pd(rng, 2) for _ in range(50)])
    model = CawDiag(2, 1)
    model.a, model.b = np.zeros((1, 2)), np.zeros((2, 2))
    model.target = x.mean(axis=0)
    np.testing.assert_allclose(model.means(x), np.broadcast_to(x.mean(axis=0), (51, 2, 2)))


def test_caw_fit_recovers_parameters():
    rng = np.random.default_rng(0)
    target = np.array([[1.0, 0.3], [0.3, 0.8]])
    x = caw_path(rng, 1500, target, np.sqrt([0.2, 0.2]), np.sqrt([0.7, 0.7]), 12.0)
    model = CawDiag(1, 1).fit(x)
    np.testing.assert_allclose(model.a[0] ** 2, 0.2, atol=0.06)
    np.testing.assert_allclose(model.b[0] ** 2, 0.7, atol=0.1)
    np.testing.assert_allclose(model.nu, 12.0, rtol=0.1)


def test_caw_forecast_matches_simulation():
    rng = np.random.default_rng(1)
    target = np.array([[1.0, 0.3], [0.3, 0.8]])
    x = caw_path(rng, 200, target, np.sqrt([0.3, 0.2]), np.sqrt([0.6, 0.7]), 10.0)
    model = CawDiag(1, 1)
    model.a, model.b = np.sqrt([[0.3, 0.2]]), np.sqrt([[0.6, 0.7]])
    model.target, model.nu = target, 10.0
    fc = model.forecast(x, 3)
    np.testing.assert_allclose(fc[0], model.means(x)[-1])
    sims = []
    for _ in range(1500):
        path = x
        for _ in range(3):
            s = model.means(path)[-1]
            path = np.concatenate([path, stats.wishart(df=10.0, scale=s / 10.0).rvs(random_state=rng)[None]])
        sims.append(path[-1])
    np.testing.assert_allclose(np.mean(sims, axis=0), fc[2], atol=0.05)


def test_caw_forecast_tends_to_target(rng):
    x = np.array([random_pd(rng, 2) for _ in range(300)])
    model = CawDiag(2, 1).fit(x)
    np.testing.assert_allclose(model.forecast(x, 400)[-1], model.target, atol=1e-3)
    with pytest.raises(InvalidArgumentError):
        model.forecast(x, 0)


def test_caw_dcc_fit_and_forecast(rng):
    target = np.array([[1.0, 0.3], [0.3, 0.8]])
    x = caw_path(rng, 400, target, np.sqrt([0.2, 0.2]), np.sqrt([0.7, 0.7]), 15.0)
    model = CawDcc(2, 1, 2, 1).fit(x)
    fc = model.forecast(x, 5)
    assert fc.shape == (5, 2, 2)
    assert np.all(np.linalg.eigvalsh(fc) > 0)
    assert model.nu > 1


# --- linear benchmarks -------------------------------------------------------

def test_ar1_forecast_closed_form(rng):
    y = 2.0 + lfilter([1.0], [1.0, -0.6], rng.standard_normal((800, 1)), axis=0)
    model = DiagonalLinear(1, 0).fit(y)
    eq = model.equations[0]
    means, covs = model.forecast(y, 3)
    h = np.arange(1, 4)
    np.testing.assert_allclose(means[:, 0], eq.c + eq.ar[0] ** h * (y[-1, 0] - eq.c), rtol=1e-10)
    var = model.resid_cov[0, 0] * np.cumsum(eq.ar[0] ** (2 * (h - 1)))
    np.testing.assert_allclose(covs[:, 0, 0], var, rtol=1e-10)
    np.testing.assert_allclose(eq.ar[0], 0.6, atol=0.06)


def test_white_noise_forecast(rng):
    y = 1.5 + rng.standard_normal((500, 2))
    model = DiagonalLinear(1, 0).fit(y)
    means, _ = model.forecast(y, 10)
    np.testing.assert_allclose(means[-1], y.mean(axis=0), atol=0.1)


def test_css_residuals_invert_arma(rng):
    e = rng.standard_normal(300)
    y = 0.5 + lfilter([1.0, 0.4], [1.0, -0.5], e)
    np.testing.assert_allclose(css_residuals(y, 0.5, [0.5], [0.4]), e, atol=1e-12)


def test_arfima_recovers_memory():
    est = [fit_univariate(simulate_fi(0.3, 1508, np.random.default_rng(s)), 1, 1, fractional=True).d
           for s in range(5)]
    assert abs(np.median(est) - 0.3) < 0.1


def test_arfima_fit_runs(rng):
    fit = fit_univariate(simulate_fi(0.4, 600, rng), 1, 1, fractional=True)
    assert -0.45 <= fit.d <= 1.45 and fit.sigma2 > 0


# --- model confidence set ----------------------------------------------------

def test_block_bootstrap_indices(rng):
    idx = block_bootstrap_indices(10, 3, 4, rng)
    assert idx.shape == (4, 10)
    # consecutive indices within a block (circular)
    np.testing.assert_array_equal((idx[:, 1] - idx[:, 0]) % 10, 1)


def test_mcs_single_model(rng):
    res = model_confidence_set(pd.DataFrame({"a": rng.standard_normal(40)}))
    assert res.pvalues["a"] == 1.0 and res.included(0.9) == ["a"]


def test_mcs_eliminates_shifted_model(rng):
    losses = rng.standard_normal((250, 3))
    losses[:, 2] += 10
    res = model_confidence_set(pd.DataFrame(losses, columns=list("abc")), n_boot=299, rng=1)
    assert "c" not in res.included(0.8) and "c" not in res.included(0.9)
    assert res.elimination_order[0] == "c"
    assert res.marker(res.best) == "***"


def test_mcs_ties_and_missing(rng):
    base = rng.standard_normal(100)
    losses = pd.DataFrame({"a": base, "b": base})
    losses.iloc[5, 0] = np.nan
    with pytest.warns(UserWarning):
        res = model_confidence_set(losses, n_boot=99, rng=0)
    assert res.ties and res.n_dropped == 1 and res.n_obs == 99
    assert set(res.included(0.9)) == {"a", "b"}


def test_mcs_size_under_null():
    kept = 0
    for s in range(60):
        rng = np.random.default_rng(s)
        losses = rng.standard_normal((200, 4)) + rng.standard_normal((200, 1))
        res = model_confidence_set(losses, n_boot=199, rng=s)
        kept += res.best in res.included(0.9)
    assert kept / 60 >= 0.9


def test_mcs_needs_enough_periods(rng):
    with pytest.raises(InvalidArgumentError):
        model_confidence_set(rng.standard_normal((10, 2)))


# --- rolling evaluation ------------------------------------------------------

class MeanForecaster:
    def fit(self, window):
        self.mean = window.mats.mean(axis=0)
        return self

    def forecast(self, window, horizons, rng=None):
        return {h: self.mean for h in horizons}


class BrokenForecaster(MeanForecaster):
    def forecast(self, window, horizons, rng=None):
        raise ValueError("no forecast today")


@pytest.fixture(scope="module")
def cov_panel():
    rng = np.random.default_rng(3)
    target = np.array([[1.0, 0.3], [0.3, 0.8]])
    return CovPanel(caw_path(rng, 80, target, np.sqrt([0.3, 0.3]), np.sqrt([0.6, 0.6]), 10.0))


def test_rolling_single_origin(cov_panel):
    table = rolling_eval({"mean": MeanForecaster()}, cov_panel[:51], window=50, horizons=(1,))
    assert len(table.frame) == 1 and table.frame["origin"].iloc[0] == 50


def test_rolling_identical_models(cov_panel):
    table = rolling_eval({"a": MeanForecaster(), "b": MeanForecaster()}, cov_panel, window=40,
                         horizons=(1, 5))
    for h in (1, 5):
        mat = table.matrix("LS", h)
        np.testing.assert_array_equal(mat["a"].to_numpy(), mat["b"].to_numpy())
    assert len(table.matrix("LS", 1)) == 40 and len(table.matrix("LS", 5)) == 36


def test_rolling_records_failures(cov_panel, tmp_path):
    table = rolling_eval({"ok": MeanForecaster(), "bad": BrokenForecaster()}, cov_panel,
                         window=40, horizons=(1,))
    bad = table.frame[table.frame["model"] == "bad"]
    assert bad["LS"].isna().all() and bad["error"].str.contains("no forecast today").all()
    assert table.n_failed()[(1, "bad")] == 40
    table.to_csv(tmp_path / "losses.csv")
    back = LossTable.read_csv(tmp_path / "losses.csv")
    np.testing.assert_allclose(back.matrix("LF", 1)["ok"], table.matrix("LF", 1)["ok"])


def test_rolling_with_benchmarks_and_risks(cov_panel):
    rng = np.random.default_rng(0)
    returns = rng.standard_normal((cov_panel.n, 2))
    models = {"mean": MeanForecaster(), "ARMA": benchmark("ARMA", n_sim=100),
              "CAW.diag": benchmark("CAW.diag")}
    table = rolling_eval(models, cov_panel, window=45, horizons=(1, 2), returns=returns,
                         refit_every=10, seed=1)
    assert table.frame[["LF", "LS", "L3", "LMV", "LD"]].notna().all().all()
    risks, details = risk_table(table, n_boot=99)
    assert set(risks.index.get_level_values("model")) == {"mean", "ARMA", "CAW.diag"}
    assert "LS_mcs" in risks.columns and (1, "LS") in details
    again = rolling_eval(models, cov_panel, window=45, horizons=(1, 2), returns=returns,
                         refit_every=10, seed=1)
    pd.testing.assert_frame_equal(table.frame, again.frame)


def test_rolling_rejects_short_panel(cov_panel):
    with pytest.raises(InvalidArgumentError):
        rolling_eval({"m": MeanForecaster()}, cov_panel[:20], window=20, horizons=(1,))
