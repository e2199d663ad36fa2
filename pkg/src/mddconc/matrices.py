"""Pairwise distance matrices and U-centering.

Every MDD quantity in this package is an inner product of U-centered
pairwise matrices, so these three functions are the innermost kernel.
"""

from __future__ import annotations

import numpy as np

from .errors import InputError

__all__ = ["pairwise_abs_distance", "half_squared_distance", "u_center"]


def _finite_vector(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise InputError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size < 2:
        raise InputError(f"{name} needs at least 2 entries, got {arr.size}")
    bad = np.flatnonzero(~np.isfinite(arr))
    if bad.size:
        raise InputError(f"{name}[{bad[0]}] is not finite ({float(arr[bad[0]])!r})")
    return arr


def pairwise_abs_distance(x) -> np.ndarray:
    """Matrix of absolute differences ``|x_i - x_l|``.

    Parameters
    ----------
    x : (n,) array_like
        Finite sample of a scalar covariate, ``n >= 2``.

    Returns
    -------
    (n, n) ndarray
        Symmetric, nonnegative, zero diagonal.

    Examples
    --------
    >>> pairwise_abs_distance([0, 1, 3])
    array([[0., 1., 3.],
           [1., 0., 2.],
           [3., 2., 0.]])
    """
    x = _finite_vector(x, "x")
    return np.abs(x[:, None] - x[None, :])


def half_squared_distance(y) -> np.ndarray:
    """Matrix of ``(y_i - y_l)**2 / 2``."""
    y = _finite_vector(y, "y")
    d = y[:, None] - y[None, :]
    return 0.5 * d * d


def u_center(m) -> np.ndarray:
    """U-centered version of a pairwise matrix.

    Off-diagonal entries are

    .. math::

        \\bar{M}_{il} = M_{il} - \\frac{1}{n-2}\\sum_q M_{iq}
            - \\frac{1}{n-2}\\sum_q M_{ql}
            + \\frac{1}{(n-1)(n-2)}\\sum_{q,r} M_{qr},

    with sums over all indices; the diagonal is set to exactly zero.

    Parameters
    ----------
    m : (n, n) array_like
        Pairwise matrix with zero diagonal, ``n >= 4``.

    Returns
    -------
    (n, n) ndarray
        Symmetric matrix whose off-diagonal row sums vanish.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InputError(f"expected a square matrix, got shape {m.shape}")
    n = m.shape[0]
    if n < 4:
        raise InputError(f"U-centering needs n >= 4, got n={n}")
    row = m.sum(axis=1)
    col = m.sum(axis=0)
    total = row.sum()
    out = m - row[:, None] / (n - 2) - col[None, :] / (n - 2) + total / ((n - 1) * (n - 2))
    np.fill_diagonal(out, 0.0)
    return out
