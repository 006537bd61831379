import mpmath
import numpy as np
import pandas as pd
import pytest

from fraccomp.exceptions import DataError, InvalidArgumentError
from fraccomp.realized import (
    CovPanel,
    chol_inverse,
    chol_transform,
    from_logz,
    load_panel,
    logz_columns,
    nearest_pd,
    save_panel,
    to_logz,
    z_pairs,
)


def random_pd(rng, k, n=None):
    shape = (k, k) if n is None else (n, k, k)
    a = rng.standard_normal(shape)
    return a @ np.swapaxes(a, -1, -2) + 0.5 * np.eye(k)


def test_z_ordering_runs_down_columns():
    assert z_pairs(3) == [(1, 0), (2, 0), (2, 1)]
    assert logz_columns(3)[3:] == ["Z21", "Z31", "Z32"]


def test_unit_diagonal_maps_to_zero():
    out = to_logz(np.eye(3)[None])
    np.testing.assert_allclose(out, 0.0, atol=1e-15)


def test_fisher_z_of_one_half():
    oracle = float(mpmath.mpf("0.5") * mpmath.log(3))
    x = np.array([[[1.0, 0.5], [0.5, 1.0]]])
    np.testing.assert_allclose(to_logz(x)[0, 2], oracle, rtol=1e-14)
    assert round(oracle, 4) == 0.5493


def test_logz_round_trip(rng):
    mats = random_pd(rng, 4, 20)
    y = np.asarray(to_logz(mats))
    back = np.array([from_logz(row) for row in y])
    np.testing.assert_allclose(back, mats, rtol=1e-10)


def test_logz_clips_perfect_correlation():
    x = np.array([[[1.0, 1.0], [1.0, 1.0]]])
    with pytest.warns(UserWarning):
        out = to_logz(x)
    assert np.all(np.isfinite(out))


def test_zero_predictive_covariance_equals_point(rng):
    y = np.asarray(to_logz(random_pd(rng, 3)[None]))[0]
    np.testing.assert_allclose(from_logz(y, np.zeros((6, 6)), rng=1), from_logz(y))


def test_lognormal_mean_identity():
    mu, sigma2 = 0.3, 0.25
    draws = [from_logz([mu], [[sigma2]], n_sim=10000, rng=s)[0, 0] for s in range(5)]
    target = np.exp(mu + sigma2 / 2)
    mc_se = np.sqrt((np.exp(sigma2) - 1) * np.exp(2 * mu + sigma2) / 10000)
    assert abs(np.mean(draws) - target) < 4 * mc_se


def test_bias_corrected_result_is_pd(rng):
    y = np.asarray(to_logz(random_pd(rng, 3)[None]))[0]
    out = from_logz(y, 0.3 * np.eye(6), n_sim=500, rng=2)
    assert np.linalg.eigvalsh(out).min() > 0
    np.testing.assert_allclose(out, out.T)


def test_nearest_pd_clips_eigenvalues():
    x = np.diag([2.0, -1.0])
    out = nearest_pd(x)
    assert np.linalg.eigvalsh(out).min() > 0
    np.testing.assert_allclose(out[0, 0], 2.0)


def test_cholesky_hand_value():
    out = np.asarray(chol_transform(np.array([[[4.0, 2.0], [2.0, 5.0]]])))
    np.testing.assert_allclose(out[0], [2.0, 1.0, 2.0])
    np.testing.assert_allclose(chol_inverse(out[0]), [[4.0, 2.0], [2.0, 5.0]])


def test_cholesky_identity_and_round_trip(rng):
    out = np.asarray(chol_transform(np.eye(3)[None]))[0]
    np.testing.assert_allclose(out, [1, 0, 1, 0, 0, 1])
    mats = random_pd(rng, 4, 10)
    np.testing.assert_allclose(chol_inverse(np.asarray(chol_transform(mats))), mats, rtol=1e-12)


def test_cholesky_rejects_non_pd():
    with pytest.raises(InvalidArgumentError):
        chol_transform(np.array([[[1.0, 2.0], [2.0, 1.0]]]))


def test_cov_panel_validation(rng):
    mats = random_pd(rng, 2, 5)
    mats[3, 0, 0] = -1.0
    panel = CovPanel(mats)
    assert list(panel.invalid_rows()) == [3]
    with pytest.raises(DataError):
        panel.validate()
    assert isinstance(panel[1:3], CovPanel) and len(panel[1:3]) == 2


def test_wide_file_round_trip(tmp_path, rng):
    mats = random_pd(rng, 3, 6)
    panel = CovPanel(mats, index=pd.date_range("2001-01-01", periods=6))
    path = tmp_path / "cov.csv"
    save_panel(path, panel)
    back = load_panel(path)
    assert back.k == 3 and back.n == 6
    np.testing.assert_allclose(back.mats, mats, rtol=1e-14)
    frame = to_logz(back)
    assert list(frame.columns) == logz_columns(3)


def test_long_file_round_trip(tmp_path, rng):
    mats = random_pd(rng, 2, 4)
    path = tmp_path / "cov_long.csv"
    save_panel(path, CovPanel(mats), format="long")
    np.testing.assert_allclose(load_panel(path, format="long").mats, mats, rtol=1e-15)


def test_negative_variance_names_row(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("date,X11,X12,X22\n2001-01-01,1.0,0.1,1.0\n2001-01-02,-1.0,0.1,1.0\n")
    with pytest.raises(DataError, match="2"):
        load_panel(path)


def test_dimension_mismatch_in_file(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("1.0,0.1,1.0,0.5\n")
    with pytest.raises((DataError, InvalidArgumentError)):
        load_panel(path)
