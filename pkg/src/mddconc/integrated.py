"""Integration of pointwise MDD quantities over the time grid."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import check_grid, resolve_subset
from .errors import DegenerateDataError, InputError
from .matrices import half_squared_distance, pairwise_abs_distance, u_center
from .pointwise import cn_factor

__all__ = [
    "InstantSeries",
    "IntegratedStat",
    "integrate_on_grid",
    "instant_series",
    "integrated_mdd",
    "integrated_variance",
    "statistic_td",
    "statistic_e",
]


def integrate_on_grid(values, grid):
    """Composite trapezoid rule along the last axis.

    Parameters
    ----------
    values : (..., T) array_like
    grid : (T,) array_like
        Strictly increasing, possibly non-uniform.
    """
    grid = check_grid(grid)
    values = np.asarray(values, dtype=float)
    if values.shape[-1] != grid.size:
        raise InputError(f"values have {values.shape[-1]} instants but the grid has {grid.size}")
    step = np.diff(grid)
    result = ((values[..., 1:] + values[..., :-1]) * step).sum(axis=-1) / 2.0
    return float(result) if np.ndim(result) == 0 else result


@dataclass(frozen=True)
class InstantSeries:
    """Per-instant ingredients of the integrated statistics.

    Attributes
    ----------
    mdd : (T, d) ndarray
        Unbiased MDD^2 per instant and covariate in the subset.
    numerators : (T,) ndarray
        ``sqrt(C(n,2)) * sum_j MDD^2`` per instant.
    variances : (T,) ndarray
        Pointwise variance estimate per instant.
    """

    subset: tuple
    mdd: np.ndarray
    numerators: np.ndarray
    variances: np.ndarray


def instant_series(dataset, subset=None) -> InstantSeries:
    """Compute per-instant MDD, numerators and variances, one column at a time."""
    dataset.require_complete()
    subset = resolve_subset(dataset, subset)
    n = dataset.n
    if n < 4:
        raise InputError(f"need n >= 4, got n={n}")
    norm = n * (n - 3)
    scale = math.sqrt(math.comb(n, 2))
    var_norm = n * (n - 1) * cn_factor(n)
    mdd = np.empty((dataset.T, len(subset)))
    variances = np.empty(dataset.T)
    for u in range(dataset.T):
        b = u_center(half_squared_distance(dataset.response[:, u]))
        total = np.zeros_like(b)
        for k, j in enumerate(subset):
            a = u_center(pairwise_abs_distance(dataset.covariates[j, :, u]))
            mdd[u, k] = (a * b).sum() / norm
            total += a
        w = total * b
        variances[u] = (w * w).sum() / var_norm
    return InstantSeries(subset=subset, mdd=mdd, numerators=scale * mdd.sum(axis=1),
                         variances=variances)


def integrated_mdd(dataset, j) -> float:
    """Trapezoid integral over the grid of the unbiased MDD^2 of covariate ``j``."""
    series = instant_series(dataset, [j])
    return integrate_on_grid(series.mdd[:, 0], dataset.grid)


def integrated_variance(dataset, subset=None) -> float:
    """Integrated variance estimate for the covariates in ``subset``."""
    series = instant_series(dataset, subset)
    return integrate_on_grid(series.variances, dataset.grid)


@dataclass(frozen=True)
class IntegratedStat:
    """Integrated statistics over the grid.

    ``td_value`` is the ratio of the integrated numerator to the square root
    of the integrated variance. ``e_value`` is the integral of per-instant
    ratios; it is ``None`` when some instant has zero variance.
    """

    subset: tuple
    td_value: float
    e_value: float | None
    integrated_mdd: np.ndarray
    integrated_variance: float


def statistic_td(dataset, subset=None, series: InstantSeries | None = None) -> IntegratedStat:
    """Integrated statistic for ``subset``, with the integral-of-ratios form alongside.

    Raises
    ------
    DegenerateDataError
        If the integrated variance is zero.
    """
    if series is None:
        series = instant_series(dataset, subset)
    grid = dataset.grid
    n = dataset.n
    imdd = integrate_on_grid(series.mdd.T, grid)
    ivar = integrate_on_grid(series.variances, grid)
    if not ivar > 0:
        raise DegenerateDataError(
            "integrated variance is zero; the response or the tested covariates "
            "are constant at every instant")
    td = math.sqrt(math.comb(n, 2)) * float(np.sum(imdd)) / math.sqrt(ivar)
    e_value = None
    if np.all(series.variances > 0):
        e_value = statistic_e(series.numerators, np.sqrt(series.variances), grid)
    return IntegratedStat(subset=series.subset, td_value=td, e_value=e_value,
                          integrated_mdd=np.atleast_1d(imdd), integrated_variance=ivar)


def statistic_e(numerators, scales, grid) -> float:
    """Trapezoid integral of ``numerators[u] / scales[u]`` over the grid.

    Raises
    ------
    DegenerateDataError
        If any scale is zero; the message names the instant.
    """
    numerators = np.asarray(numerators, dtype=float)
    scales = np.asarray(scales, dtype=float)
    if numerators.shape != scales.shape:
        raise InputError("numerators and scales must have equal length")
    bad = np.flatnonzero(~(scales > 0))
    if bad.size:
        u = int(bad[0])
        raise DegenerateDataError(f"variance estimate is zero at instant {u}", instant=u)
    return integrate_on_grid(numerators / scales, grid)
