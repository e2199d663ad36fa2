"""Unbiased MDD estimation and the pointwise test statistic at one instant.

The production estimator is the O(n^2) inner product of U-centered
matrices. :func:`mdd_oracle` evaluates the same quantity as an order-four
U-statistic in O(n^4) and exists only to check the fast path.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .data import resolve_subset
from .errors import DegenerateDataError, InputError
from .matrices import half_squared_distance, pairwise_abs_distance, u_center

__all__ = [
    "PointwiseStat",
    "mdd_unbiased",
    "mdd_oracle",
    "cn_factor",
    "pointwise_variance",
    "instant_weights",
    "pointwise_statistic",
]


def _check_pair(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InputError(f"matrices must be square and of equal size, got {a.shape} and {b.shape}")
    if a.shape[0] < 4:
        raise InputError(f"need n >= 4, got n={a.shape[0]}")
    return a, b


def mdd_unbiased(a, b) -> float:
    """Unbiased MDD^2 estimate from U-centered matrices.

    ``a`` is the U-centered covariate distance matrix and ``b`` the
    U-centered half squared response distance matrix. Returns
    ``sum_{i != l} a_il b_il / (n (n - 3))``. The value can be negative.
    """
    a, b = _check_pair(a, b)
    n = a.shape[0]
    prod = a * b
    np.fill_diagonal(prod, 0.0)
    return float(prod.sum() / (n * (n - 3)))


_PERMS = np.array(list(itertools.permutations(range(4))))


def mdd_oracle(x, y, chunk: int = 2000) -> float | np.ndarray:
    """Order-four U-statistic form of the unbiased MDD^2 estimator.

    Averages the symmetric kernel

    ``h = (1/24) sum_perm (A_sw B_uv + A_sw B_sw - 2 A_sw B_su)``

    over all 4-subsets of the sample. Cost is O(n^4); use only for small n.

    Parameters
    ----------
    x, y : (n,) or (R, n) array_like
        A leading axis evaluates R independent samples at once.
    chunk : int
        Samples processed per batch when ``x`` is 2-D.

    Returns
    -------
    float or (R,) ndarray
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise InputError(f"x and y must have the same shape, got {x.shape} and {y.shape}")
    single = x.ndim == 1
    x = np.atleast_2d(x)
    y = np.atleast_2d(y)
    n = x.shape[1]
    if n < 4:
        raise InputError(f"need n >= 4, got n={n}")
    quads = np.array(list(itertools.combinations(range(n), 4)))
    out = np.empty(x.shape[0])
    for start in range(0, x.shape[0], chunk):
        xs = x[start:start + chunk]
        ys = y[start:start + chunk]
        amat = np.abs(xs[:, :, None] - xs[:, None, :])
        bmat = 0.5 * (ys[:, :, None] - ys[:, None, :]) ** 2
        total = np.zeros((xs.shape[0], quads.shape[0]))
        for perm in _PERMS:
            s, w, u, v = (quads[:, k] for k in perm)
            a_sw = amat[:, s, w]
            total += a_sw * (bmat[:, u, v] + bmat[:, s, w] - 2.0 * bmat[:, s, u])
        out[start:start + chunk] = total.mean(axis=1) / 24.0
    return float(out[0]) if single else out


def cn_factor(n: int) -> float:
    """Normalizing constant of the pointwise variance estimator.

    ``(n-3)^4/(n-1)^4 + 2(n-3)^4/((n-1)^4 (n-2)^3) + 2(n-3)/((n-1)^4 (n-2)^3)``
    """
    if n < 4:
        raise InputError(f"need n >= 4, got n={n}")
    n = float(n)
    d = (n - 1) ** 4 * (n - 2) ** 3
    return (n - 3) ** 4 / (n - 1) ** 4 + 2 * (n - 3) ** 4 / d + 2 * (n - 3) / d


def _summed(a_list, b):
    if isinstance(a_list, np.ndarray) and a_list.ndim == 2:
        a_list = [a_list]
    a_list = list(a_list)
    if not a_list:
        raise InputError("covariate subset is empty")
    b = np.asarray(b, dtype=float)
    total = np.zeros_like(b)
    for a in a_list:
        a, _ = _check_pair(a, b)
        total += a
    return total, b


def pointwise_variance(a_list, b) -> float:
    """Variance estimate of the summed MDD numerator at one instant.

    Computes ``2/(n(n-1) c_n) sum_{l<q} (sum_j a_j[l,q])^2 b[l,q]^2``, which
    equals the double sum over covariate pairs (j, j') and is never negative.
    """
    total, b = _summed(a_list, b)
    n = b.shape[0]
    w = total * b
    np.fill_diagonal(w, 0.0)
    return float((w * w).sum() / (n * (n - 1) * cn_factor(n)))


def instant_weights(y, xs) -> np.ndarray:
    """Elementwise product of the summed U-centered covariate matrices with
    the U-centered response matrix, for one instant.

    All pointwise and bootstrap quantities at that instant are reductions of
    this ``(n, n)`` matrix.
    """
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    b = u_center(half_squared_distance(y))
    total = np.zeros_like(b)
    for x in xs:
        total += u_center(pairwise_abs_distance(x))
    return total * b


def _numerator(w):
    n = w.shape[0]
    return math.sqrt(math.comb(n, 2)) * w.sum() / (n * (n - 3))


def _variance(w):
    n = w.shape[0]
    return (w * w).sum() / (n * (n - 1) * cn_factor(n))


@dataclass(frozen=True)
class PointwiseStat:
    """Pointwise statistic at one instant.

    ``numerator`` is ``sqrt(C(n,2)) * sum_j MDD_n^2``, ``variance_est`` the
    variance estimate and ``statistic = numerator / sqrt(variance_est)``.
    """

    numerator: float
    variance_est: float
    statistic: float


def pointwise_statistic(dataset, u: int, subset=None) -> PointwiseStat:
    """Pointwise MDD statistic for the covariates in ``subset`` at instant ``u``.

    Raises
    ------
    DegenerateDataError
        If the variance estimate is zero (constant response or covariates
        at this instant).
    """
    dataset.require_complete()
    subset = resolve_subset(dataset, subset)
    y = dataset.response[:, u]
    if y.size < 4:
        raise InputError(f"need n >= 4, got n={y.size}")
    w = instant_weights(y, dataset.covariates[list(subset), :, u])
    var = _variance(w)
    if not var > 0:
        raise DegenerateDataError(
            f"variance estimate is zero at instant {u} (t={dataset.grid[u]!r}); "
            "the response or the tested covariates are constant there", instant=u)
    num = _numerator(w)
    return PointwiseStat(numerator=float(num), variance_est=float(var),
                         statistic=float(num / math.sqrt(var)))
