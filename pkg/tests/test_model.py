import numpy as np
import pytest

from fraccomp.exceptions import (
    DegenerateModelError,
    InvalidArgumentError,
    UnsupportedRepresentationError,
)
from fraccomp.fracdiff import frac_diff
from fraccomp.model import (
    DofcParams,
    DofcSpec,
    coint_subspaces,
    load_params,
    n_free,
    natural_names,
    natural_vector,
    pack,
    save_params,
    simulate_dofc,
    triangular_form,
    unpack,
    validate,
    vecm_form,
)


def test_valid_params_pass(small_spec, small_params):
    assert validate(small_spec, small_params) == []


def test_upper_triangle_violation():
    spec = DofcSpec(3, (2,), 0)
    params = DofcParams(d=[0.4], lam=[[1.0, 0.5], [0.2, 1.0], [0.1, 0.3]], gamma=np.zeros((3, 0)),
                        phi=np.zeros((0, 1)), h=np.ones(3))
    assert any("upper-triangle loading nonzero" in v for v in validate(spec, params))


def test_ascending_memory_violation(small_spec, small_params):
    bad = small_params.replace(d=[0.3, 0.6])
    assert "memory parameters not strictly descending" in validate(small_spec, bad)


def test_dimension_mismatch(small_spec, small_params):
    with pytest.raises(InvalidArgumentError):
        validate(small_spec, small_params.replace(h=np.ones(3)))


def test_pack_round_trip(small_spec, small_params):
    back = unpack(small_spec, pack(small_spec, small_params))
    for name in ("d", "lam", "gamma", "phi", "h", "c"):
        np.testing.assert_allclose(getattr(back, name), getattr(small_params, name), atol=1e-12)


def test_unpack_length_mismatch(small_spec):
    with pytest.raises(InvalidArgumentError):
        unpack(small_spec, np.zeros(n_free(small_spec) + 1))


def test_free_parameter_count_by_enumeration():
    spec = DofcSpec(21, (2, 9), 2, 1)
    # enumerate the free cells of every lower-triangular loading block
    lam_cells = sum(1 for s in spec.group_sizes for col in range(s) for row in range(21) if row >= col)
    gamma_cells = sum(1 for col in range(2) for row in range(21) if row >= col)
    assert lam_cells == 194 and gamma_cells == 41
    assert n_free(spec) == 2 + lam_cells + gamma_cells + 2 + 21 + 21 == 281
    assert len(natural_names(spec)) == 281


def test_any_vector_unpacks_to_valid(rng, small_spec):
    for _ in range(50):
        theta = 3 * rng.standard_normal(n_free(small_spec))
        assert validate(small_spec, unpack(small_spec, theta)) == []


def test_natural_vector_order(small_spec, small_params):
    vec = natural_vector(small_spec, small_params)
    names = natural_names(small_spec)
    assert vec.size == len(names)
    assert names[:2] == ["d1", "d2"]
    np.testing.assert_allclose(vec[:2], small_params.d)


def test_params_json_round_trip(tmp_path, small_spec, small_params):
    path = tmp_path / "params.json"
    save_params(path, small_params, small_spec)
    spec, back = load_params(path)
    assert spec == small_spec
    np.testing.assert_array_equal(back.lam, small_params.lam)
    np.testing.assert_array_equal(back.d, small_params.d)


def test_coint_subspace_unit_vector():
    (s1,) = coint_subspaces(np.array([[1.0], [0.0]]), (1,))
    np.testing.assert_allclose(np.abs(s1.ravel()), [0.0, 1.0], atol=1e-15)


def test_coint_subspaces_nested(rng):
    lam = rng.standard_normal((3, 2))
    s1, s2 = coint_subspaces(lam, (1, 1))
    assert s1.shape == (3, 2) and s2.shape == (3, 1)
    # S2 lies inside S1
    np.testing.assert_allclose(s1 @ (s1.T @ s2), s2, atol=1e-12)
    np.testing.assert_allclose(s1.T @ lam[:, :1], 0.0, atol=1e-12)
    np.testing.assert_allclose(s2.T @ lam, 0.0, atol=1e-12)


def test_coint_subspaces_rank_deficient():
    with pytest.raises(DegenerateModelError):
        coint_subspaces(np.array([[1.0, 2.0], [2.0, 4.0], [0.0, 0.0]]), (1, 1))


def test_vecm_identity_loadings():
    form = vecm_form(np.eye(2), (1, 1), (0.7, 0.3))
    np.testing.assert_allclose(form.N, np.diag([0.0, 1.0]), atol=1e-15)
    np.testing.assert_allclose(form.M, np.diag([1.0, 0.0]), atol=1e-15)
    np.testing.assert_allclose(form.alpha @ form.beta.T, -form.N, atol=1e-15)


def test_vecm_projection_identities(rng):
    lam = rng.standard_normal((4, 4))
    form = vecm_form(lam, (2, 2), (0.7, 0.3))
    M, N = form.M, form.N
    np.testing.assert_allclose(M + N, np.eye(4), atol=1e-12)
    np.testing.assert_allclose(M @ M, M, atol=1e-12)
    np.testing.assert_allclose(N @ N, N, atol=1e-12)
    np.testing.assert_allclose(M @ N, 0.0, atol=1e-12)
    np.testing.assert_allclose(form.beta.T @ lam[:, :2], 0.0, atol=1e-12)


def test_vecm_unsupported():
    with pytest.raises(UnsupportedRepresentationError):
        vecm_form(np.eye(3)[:, :2], (1, 1), (0.7, 0.3))
    with pytest.raises(UnsupportedRepresentationError):
        vecm_form(np.eye(3), (1, 1, 1), (0.7, 0.5, 0.3))


def test_vecm_residual_removes_high_memory(rng):
    spec = DofcSpec(2, (1, 1), 0)
    lam = np.array([[1.0, 0.0], [0.8, 1.0]])
    params = DofcParams(d=[0.9, 0.2], lam=lam, gamma=np.zeros((2, 0)), phi=np.zeros((0, 1)),
                        h=[1e-8, 1e-8])
    y, states = simulate_dofc(spec, params, 500, rng, return_states=True)
    form = vecm_form(lam, (1, 1), params.d)
    kappa = form.residual(y)
    # kappa = Delta^{d1} (Lambda x) - alpha beta' L D^{d2} y is free of the I(0.9) trend
    assert np.var(kappa) < 10 * np.var(frac_diff(y, 0.9))


def test_triangular_hand_value():
    lam = np.array([[1.0, 0.0], [0.37, 1.0]])
    form = triangular_form(lam, (1, 1))
    np.testing.assert_allclose(form.b_matrix, [[1.0, 0.0], [-0.37, 1.0]], atol=1e-15)


def test_triangular_block_diagonal_identity():
    lam = np.array([[2.0, 0.0, 0.0], [0.5, 1.0, 0.0], [0.0, 0.0, 3.0]])
    form = triangular_form(lam, (2, 1))
    np.testing.assert_allclose(form.b_matrix, np.eye(3), atol=1e-15)


def test_triangular_reorders_when_needed():
    lam = np.array([[0.0, 1.0], [1.0, 0.5]])
    form = triangular_form(lam, (1, 1), d=(0.7, 0.3))
    assert list(form.permutation) == [1, 0]
    bl = form.b_matrix @ lam[form.permutation]
    # the second row of B y no longer loads on the first component
    np.testing.assert_allclose(bl[1, 0], 0.0, atol=1e-15)


def test_triangular_no_ordering():
    with pytest.raises(DegenerateModelError):
        triangular_form(np.zeros((2, 2)), (1, 1))


def test_simulate_pure_noise():
    spec = DofcSpec(3, (), 0)
    params = DofcParams(d=np.zeros(0), lam=np.zeros((3, 0)), gamma=np.zeros((3, 0)),
                        phi=np.zeros((0, 1)), h=[0.5, 1.0, 2.0])
    y = simulate_dofc(spec, params, 20000, 1)
    np.testing.assert_allclose(y.var(axis=0), [0.5, 1.0, 2.0], rtol=0.05)


def test_simulate_determinism(small_spec, small_params):
    a = simulate_dofc(small_spec, small_params, 100, 9)
    b = simulate_dofc(small_spec, small_params, 100, 9)
    np.testing.assert_array_equal(a, b)


def test_triangular_whitens_blocks(rng):
    spec = DofcSpec(3, (1, 1), 0)
    lam = np.array([[1.0, 0.0], [0.6, 1.0], [0.3, -0.5]])
    params = DofcParams(d=[0.8, 0.3], lam=lam, gamma=np.zeros((3, 0)), phi=np.zeros((0, 1)),
                        h=np.full(3, 1e-6))
    y = simulate_dofc(spec, params, 3000, rng)
    form = triangular_form(lam, (1, 1), d=params.d)
    omega = form.omega(y)
    # first two blocks become the unit innovations of the fractional components
    for col in range(2):
        r1 = np.corrcoef(omega[1:, col], omega[:-1, col])[0, 1]
        assert abs(r1) < 0.1
