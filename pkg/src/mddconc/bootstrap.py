"""Wild bootstrap for the pointwise and global MDD tests.

Multipliers come from a counter-based generator (Philox). The key is
derived from ``(master_seed, stream, instant)``, and replicate ``b`` always
reads words ``[b*n, (b+1)*n)`` of that key's stream. Any replicate can
therefore be regenerated on its own, and results do not depend on how
replicates are split across workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .data import resolve_subset
from .errors import DegenerateDataError, InputError
from .integrated import instant_series, integrate_on_grid
from .pointwise import instant_weights, pointwise_statistic

__all__ = [
    "MULTIPLIER_MODES",
    "STATISTICS",
    "BootstrapOutcome",
    "GlobalBootstrap",
    "wild_multipliers",
    "multiplier_block",
    "bootstrap_mdd_star",
    "bootstrap_variance_star",
    "bootstrap_pvalue",
    "run_algorithm1",
    "run_algorithm2",
    "global_bootstrap",
]

MULTIPLIER_MODES = ("shared", "per-instant")
STATISTICS = ("td", "e")

# Fixed replicate block size; keeps floating-point reductions identical for
# any worker count.
CHUNK = 128

_SEED_LIMIT = 2 ** 64


def _check_seed(seed) -> int:
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise InputError(f"seed must be an integer, got {seed!r}")
    seed = int(seed)
    if not 0 <= seed < _SEED_LIMIT:
        raise InputError(f"seed must lie in [0, 2**64), got {seed}")
    return seed


def _stream_key(master_seed, stream, instant):
    seq = np.random.SeedSequence(
        entropy=_check_seed(master_seed),
        spawn_key=(int(stream), 0 if instant is None else int(instant) + 1))
    return seq.generate_state(2, dtype=np.uint64)


def multiplier_block(master_seed, start, stop, n, instant=None, stream=0) -> np.ndarray:
    """Standard normal multipliers for replicates ``start .. stop-1``.

    Parameters
    ----------
    master_seed : int
        64-bit unsigned seed.
    start, stop : int
        Replicate index range.
    n : int
        Multipliers per replicate (sample size).
    instant : int or None
        Time-instant index for per-instant streams; ``None`` for the
        stream shared by all instants.
    stream : int
        Substream tag (e.g. one per partial test).

    Returns
    -------
    (stop - start, n) ndarray
    """
    if n < 1:
        raise InputError(f"n must be positive, got {n}")
    if not 0 <= start <= stop:
        raise InputError(f"invalid replicate range [{start}, {stop})")
    first = start * n
    count = (stop - start) * n
    counter = np.array([first // 4, 0, 0, 0], dtype=np.uint64)
    bitgen = np.random.Philox(key=_stream_key(master_seed, stream, instant), counter=counter)
    skip = first % 4
    raw = bitgen.random_raw(skip + count)[skip:]
    unif = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53
    return ndtri(unif).reshape(stop - start, n)


def wild_multipliers(master_seed, replicate_index, n, instant=None, stream=0) -> np.ndarray:
    """The ``n`` i.i.d. N(0, 1) multipliers of one bootstrap replicate."""
    return multiplier_block(master_seed, replicate_index, replicate_index + 1, n,
                            instant, stream)[0]


def _weights(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InputError(f"matrices must be square and of equal size, got {a.shape} and {b.shape}")
    if a.shape[0] < 4:
        raise InputError(f"need n >= 4, got n={a.shape[0]}")
    w = a * b
    np.fill_diagonal(w, 0.0)
    return w


def _check_e(e, n):
    e = np.asarray(e, dtype=float)
    if e.shape != (n,):
        raise InputError(f"multiplier vector must have length {n}, got shape {e.shape}")
    return e


def bootstrap_mdd_star(a_j, b, e) -> float:
    """Bootstrap MDD^2: ``sum_{l != q} a_j[l,q] b[l,q] e_l e_q / (n (n - 1))``."""
    w = _weights(a_j, b)
    n = w.shape[0]
    e = _check_e(e, n)
    return float(e @ w @ e / (n * (n - 1)))


def bootstrap_variance_star(a_list, b, e) -> float:
    """Bootstrap variance: ``sum_{l<q} (sum_j a_j[l,q])^2 b[l,q]^2 e_l^2 e_q^2 / C(n,2)``."""
    if isinstance(a_list, np.ndarray) and a_list.ndim == 2:
        a_list = [a_list]
    a_list = list(a_list)
    if not a_list:
        raise InputError("covariate subset is empty")
    w = _weights(sum(np.asarray(a, dtype=float) for a in a_list), b)
    n = w.shape[0]
    e2 = _check_e(e, n) ** 2
    return float(e2 @ (w * w) @ e2 / (2 * math.comb(n, 2)))


def bootstrap_pvalue(observed: float, replicates) -> float:
    """Fraction of replicates greater than or equal to the observed value."""
    replicates = np.asarray(replicates)
    if replicates.size == 0:
        raise InputError("no bootstrap replicates")
    return int(np.count_nonzero(replicates >= observed)) / replicates.size


@dataclass(frozen=True, eq=False)
class BootstrapOutcome:
    """Observed statistic, its bootstrap replicates and the p-value."""

    observed: float
    replicates: np.ndarray
    p_value: float
    B: int
    seed: int
    statistic: str = ""

    @classmethod
    def from_replicates(cls, observed, replicates, seed, statistic=""):
        replicates = np.asarray(replicates, dtype=float)
        return cls(observed=float(observed), replicates=replicates,
                   p_value=bootstrap_pvalue(observed, replicates), B=replicates.size,
                   seed=int(seed), statistic=statistic)


def _replicate_kernel(w, w2, e, scale, num_norm, var_norm):
    num = scale * np.einsum("bi,bi->b", e @ w, e) / num_norm
    e2 = e * e
    var = np.einsum("bi,bi->b", e2 @ w2, e2) / var_norm
    return num, var


def _bootstrap_series(weights, B, seed, mode, stream, workers, multiplier_source=None):
    """Bootstrap numerators and variances, shape ``(B, T)`` each."""
    if mode not in MULTIPLIER_MODES:
        raise InputError(f"multiplier_mode must be one of {MULTIPLIER_MODES}, got {mode!r}")
    if isinstance(B, bool) or not isinstance(B, (int, np.integer)) or B < 1:
        raise InputError(f"B must be a positive integer, got {B!r}")
    seed = _check_seed(seed)
    n = weights[0].shape[0]
    T = len(weights)
    scale = math.sqrt(math.comb(n, 2))
    num_norm = n * (n - 1)
    var_norm = 2 * math.comb(n, 2)
    squares = [w * w for w in weights]
    source = multiplier_source or (
        lambda lo, hi, size, instant: multiplier_block(seed, lo, hi, size, instant, stream))
    nums = np.empty((B, T))
    variances = np.empty((B, T))

    def run_chunk(lo):
        hi = min(lo + CHUNK, B)
        shared = source(lo, hi, n, None) if mode == "shared" else None
        for u in range(T):
            e = shared if shared is not None else source(lo, hi, n, u)
            nums[lo:hi, u], variances[lo:hi, u] = _replicate_kernel(
                weights[u], squares[u], e, scale, num_norm, var_norm)

    starts = range(0, B, CHUNK)
    if workers and workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run_chunk, starts))
    else:
        for lo in starts:
            run_chunk(lo)

    bad = np.argwhere(~(variances > 0))
    if bad.size:
        b, u = (int(v) for v in bad[0])
        raise DegenerateDataError(
            f"bootstrap variance is zero in replicate {b} at instant {u}; "
            "the input is degenerate", instant=u, replicate=b)
    return nums, variances


def run_algorithm1(dataset, u: int, subset=None, B: int = 1000, master_seed: int = 1,
                   stream: int = 0, workers: int = 1, multiplier_source=None) -> BootstrapOutcome:
    """Wild bootstrap test at a single instant ``u``.

    The replicate statistic is the bootstrap numerator over the square
    root of the bootstrap variance. Multipliers come from the shared
    stream, the same one a shared-mode global test uses.
    """
    observed = pointwise_statistic(dataset, u, subset)
    subset = resolve_subset(dataset, subset)
    w = instant_weights(dataset.response[:, u], dataset.covariates[list(subset), :, u])
    nums, variances = _bootstrap_series([w], B, master_seed, "shared", stream, workers,
                                        multiplier_source)
    reps = nums[:, 0] / np.sqrt(variances[:, 0])
    return BootstrapOutcome.from_replicates(observed.statistic, reps, master_seed, "pointwise")


@dataclass(frozen=True, eq=False)
class GlobalBootstrap:
    """Both integrated statistics bootstrapped from one set of multipliers.

    ``td`` is the ratio of integrals and ``e`` the integral of ratios.
    ``decision`` is the outcome selected by ``statistic``.
    """

    subset: tuple
    td: BootstrapOutcome
    e: BootstrapOutcome
    statistic: str
    multiplier_mode: str

    @property
    def decision(self) -> BootstrapOutcome:
        return self.td if self.statistic == "td" else self.e


def global_bootstrap(dataset, subset=None, B: int = 1000, master_seed: int = 1,
                     multiplier_mode: str = "shared", statistic: str = "td",
                     stream: int = 0, workers: int = 1,
                     multiplier_source=None) -> GlobalBootstrap:
    """Global wild bootstrap over the whole grid for the covariates in ``subset``.

    Parameters
    ----------
    dataset : ConcurrentDataset
        Complete dataset with ``n >= 4``.
    subset : None, "all" or iterable of int/str
    B : int
        Bootstrap replicates.
    master_seed : int
        64-bit seed of the multiplier streams.
    multiplier_mode : {"shared", "per-instant"}
        ``shared`` reuses one multiplier vector per replicate at every
        instant. ``per-instant`` draws a fresh vector at each instant.
    statistic : {"td", "e"}
        Statistic used for the decision.
    stream : int
        Substream tag; distinct tags give independent multipliers.
    workers : int
        Threads used over replicate blocks. Results do not depend on it.
    multiplier_source : callable, optional
        ``f(start, stop, n, instant) -> (stop - start, n)`` array replacing
        the default generator; ``instant`` is ``None`` in shared mode.

    Raises
    ------
    DegenerateDataError
        An observed or bootstrap variance is zero.
    MissingDataError
        The dataset has missing cells.
    """
    if statistic not in STATISTICS:
        raise InputError(f"statistic must be one of {STATISTICS}, got {statistic!r}")
    if dataset.T < 2:
        raise InputError("global test needs at least 2 instants")
    series = instant_series(dataset, subset)
    subset = series.subset
    bad = np.flatnonzero(~(series.variances > 0))
    if bad.size:
        u = int(bad[0])
        raise DegenerateDataError(
            f"variance estimate is zero at instant {u} (t={dataset.grid[u]!r}); "
            "the response or the tested covariates are constant there", instant=u)
    grid = dataset.grid
    n = dataset.n
    observed_td = (math.sqrt(math.comb(n, 2)) * integrate_on_grid(series.mdd.sum(axis=1), grid)
                   / math.sqrt(integrate_on_grid(series.variances, grid)))
    observed_e = integrate_on_grid(series.numerators / np.sqrt(series.variances), grid)

    weights = [instant_weights(dataset.response[:, u], dataset.covariates[list(subset), :, u])
               for u in range(dataset.T)]
    nums, variances = _bootstrap_series(weights, B, master_seed, multiplier_mode, stream,
                                        workers, multiplier_source)
    reps_td = integrate_on_grid(nums, grid) / np.sqrt(integrate_on_grid(variances, grid))
    reps_e = integrate_on_grid(nums / np.sqrt(variances), grid)
    return GlobalBootstrap(
        subset=subset,
        td=BootstrapOutcome.from_replicates(observed_td, reps_td, master_seed, "td"),
        e=BootstrapOutcome.from_replicates(observed_e, reps_e, master_seed, "e"),
        statistic=statistic, multiplier_mode=multiplier_mode)


def run_algorithm2(dataset, subset=None, B: int = 1000, master_seed: int = 1,
                   multiplier_mode: str = "shared", statistic: str = "td",
                   stream: int = 0, workers: int = 1, multiplier_source=None) -> BootstrapOutcome:
    """Global bootstrap test; returns the outcome of the decision statistic."""
    return global_bootstrap(dataset, subset, B, master_seed, multiplier_mode, statistic,
                            stream, workers, multiplier_source).decision
