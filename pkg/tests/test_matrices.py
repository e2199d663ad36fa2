import numpy as np
import pytest

from mddconc.errors import InputError
from mddconc.matrices import half_squared_distance, pairwise_abs_distance, u_center


def naive_u_center(m):
    n = m.shape[0]
    out = np.zeros_like(m)
    total = sum(m[i, l] for i in range(n) for l in range(n))
    for i in range(n):
        for l in range(n):
            if i == l:
                continue
            row = sum(m[i, q] for q in range(n))
            col = sum(m[k, l] for k in range(n))
            out[i, l] = m[i, l] - row / (n - 2) - col / (n - 2) + total / ((n - 1) * (n - 2))
    return out


def test_distance_matrices():
    x = np.array([0.0, 1.0, 3.0])
    np.testing.assert_array_equal(pairwise_abs_distance(x), [[0, 1, 3], [1, 0, 2], [3, 2, 0]])
    np.testing.assert_array_equal(half_squared_distance(x), [[0, 0.5, 4.5], [0.5, 0, 2], [4.5, 2, 0]])


def test_distance_rejects_nonfinite_and_short():
    with pytest.raises(InputError, match=r"x\[1\]"):
        pairwise_abs_distance([0.0, np.nan, 1.0])
    with pytest.raises(InputError):
        half_squared_distance([1.0])


@pytest.mark.parametrize("n", [4, 5, 9])
def test_u_center_matches_naive(n):
    rng = np.random.default_rng(n)
    m = pairwise_abs_distance(rng.standard_normal(n))
    np.testing.assert_allclose(u_center(m), naive_u_center(m), atol=1e-12)


def test_u_center_rows_and_diagonal_zero():
    rng = np.random.default_rng(1)
    c = u_center(half_squared_distance(rng.standard_normal(10)))
    np.testing.assert_allclose(c.sum(axis=0), 0, atol=1e-12)
    np.testing.assert_allclose(c.sum(axis=1), 0, atol=1e-12)
    assert np.all(np.diag(c) == 0)
    np.testing.assert_allclose(c, c.T)


def test_u_center_needs_four():
    with pytest.raises(InputError):
        u_center(np.zeros((3, 3)))
    with pytest.raises(InputError):
        u_center(np.zeros((4, 5)))


def test_u_center_constant_matrix():
    m = np.ones((6, 6)) - np.eye(6)
    np.testing.assert_allclose(u_center(m), 0, atol=1e-12)
