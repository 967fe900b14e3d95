import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ctrg.errors import NumericError, ShapeError
from ctrg.tensor import (
    IndexPartition,
    contract,
    deterministic,
    ein,
    frobenius_norm,
    permute_reshape,
    svd_split,
    truncated_eig,
    undo_permute_reshape,
)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def test_contract_identity():
    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    np.testing.assert_array_equal(contract(a, np.eye(2), [(1, 0)]), a)


def test_contract_dot():
    assert contract(np.array([1.0, 2.0]), np.array([3.0, 4.0]), [(0, 0)]) == 11.0


def test_contract_full_is_squared_norm(rng):
    t = rng.standard_normal((2, 3, 4))
    full = contract(t, t.copy(), [(0, 0), (1, 1), (2, 2)])
    assert full == pytest.approx(float(np.sum(t * t)), rel=1e-14)


def test_contract_errors():
    with pytest.raises(ShapeError):
        contract(np.ones((2, 3)), np.ones((2, 3)), [(1, 0)])
    with pytest.raises(ValueError):
        contract(np.ones((2, 2)), np.ones((2, 2)), [(0, 0), (0, 1)])


@given(arrays(np.float64, (3, 4), elements=finite), arrays(np.float64, (4, 2), elements=finite),
       finite)
def test_contract_bilinear(a, b, alpha):
    lhs = contract(alpha * a, b, [(1, 0)])
    rhs = alpha * contract(a, b, [(1, 0)])
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-9)


def test_ein_matches_numpy(rng):
    a, b = rng.standard_normal((3, 4, 5)), rng.standard_normal((5, 3, 2))
    np.testing.assert_allclose(ein("ijk,kil->lj", a, b), np.einsum("ijk,kil->lj", a, b))


def test_permute_reshape_roundtrips(rng):
    t = rng.standard_normal((2, 3))
    np.testing.assert_array_equal(permute_reshape(t, [0, 1]), t)
    np.testing.assert_array_equal(permute_reshape(permute_reshape(t, [1, 0]), [1, 0]), t)
    cube = rng.standard_normal((2, 2, 2))
    m = permute_reshape(cube, [0, 1, 2], [[0, 1], [2]])
    assert m.shape == (4, 2)
    np.testing.assert_array_equal(undo_permute_reshape(m, [0, 1, 2], cube.shape), cube)
    with pytest.raises(ValueError):
        permute_reshape(cube, [0, 0, 1])


def test_svd_split_examples(rng):
    _, s, _ = svd_split(np.outer([1.0, 0.0], [0.0, 1.0]), [0], 2)
    assert np.count_nonzero(s > 1e-14) == 1 and s[0] == pytest.approx(1.0)
    u, s, vh = svd_split(np.eye(3), [0], 3)
    np.testing.assert_allclose(s, 1.0)
    np.testing.assert_allclose(u @ np.diag(s) @ vh, np.eye(3), atol=1e-15)
    m = rng.standard_normal((8, 8))
    full = np.linalg.svd(m, compute_uv=False)
    u, s, vh = svd_split(m, [0], 4)
    err = np.linalg.norm(m - u @ np.diag(s) @ vh)
    assert err == pytest.approx(np.sqrt(np.sum(full[4:] ** 2)), abs=1e-12)
    with pytest.raises(NumericError):
        svd_split(np.array([[np.nan, 1.0], [0.0, 1.0]]), [0], 1)


@settings(max_examples=25)
@given(arrays(np.float64, (2, 3, 2, 2), elements=finite))
def test_svd_split_full_rank_roundtrip(t):
    u, s, vh = svd_split(t, IndexPartition((0, 2), (1, 3)), 9)
    back = np.einsum("acx,x,xbd->abcd", u, s, vh)
    assert np.linalg.norm(back - t) <= 1e-12 * max(np.linalg.norm(t), 1e-300) + 1e-300


def test_truncated_eig_examples(rng):
    y, _ = truncated_eig(np.eye(4), 2)
    np.testing.assert_array_equal(y.T @ y, np.eye(2))
    y, w = truncated_eig(np.diag([9.0, 4.0, 1.0]), 2)
    np.testing.assert_allclose(w[:2], [9.0, 4.0])
    np.testing.assert_allclose(np.abs(y), np.eye(3)[:, :2])
    with pytest.raises(ShapeError):
        truncated_eig(np.ones((2, 3)), 1)
    with pytest.raises(NumericError):
        truncated_eig(np.array([[np.inf, 0.0], [0.0, 1.0]]), 1)


def test_truncated_eig_projector_error(rng):
    f = rng.standard_normal((6, 10))
    y, w = truncated_eig(f @ f.T, 3)
    np.testing.assert_allclose(y.T @ y, np.eye(3), atol=1e-12)
    err = np.linalg.norm(f - y @ y.T @ f)
    assert err == pytest.approx(np.sqrt(np.sum(w[3:])), rel=1e-10)
    u, s, _ = svd_split(f, [0], 3)
    np.testing.assert_allclose(y @ y.T, u @ u.T, atol=1e-10)
    np.testing.assert_allclose(np.sort(w)[::-1], np.linalg.svd(f, compute_uv=False) ** 2,
                               rtol=1e-10)


def test_frobenius_norm(rng):
    assert frobenius_norm(np.zeros((2, 3))) == 0.0
    assert frobenius_norm(np.eye(2)) == pytest.approx(np.sqrt(2.0))
    t = rng.standard_normal((3, 3, 3))
    assert frobenius_norm(-2.5 * t) == pytest.approx(2.5 * frobenius_norm(t))


def test_deterministic_bit_identical(rng):
    m = rng.standard_normal((40, 40))
    h = m @ m.T
    with deterministic():
        a = truncated_eig(h, 5)
        b = truncated_eig(h, 5)
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])
