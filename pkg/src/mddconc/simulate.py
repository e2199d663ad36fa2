"""Simulated concurrent-model scenarios and the Monte Carlo size/power harness."""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .data import ConcurrentDataset, check_grid
from .errors import DegenerateDataError, InputError, MDDError
from .inference import CORRECTIONS, global_test, partial_tests
from .bootstrap import MULTIPLIER_MODES, STATISTICS

__all__ = [
    "DEFAULT_NOISE_SCALE",
    "GpConfig",
    "ScenarioConfig",
    "TestConfig",
    "McResult",
    "default_grid",
    "exponential_covariance",
    "gp_sample",
    "beta1",
    "beta2",
    "scenario_a",
    "scenario_b",
    "generate",
    "ci_bounds",
    "run_monte_carlo",
]

DEFAULT_NOISE_SCALE = {"A": 0.1, "B": 0.02}


def default_grid(points: int = 25) -> np.ndarray:
    """Equispaced grid on [0, 1]."""
    if points < 2:
        raise InputError(f"grid needs at least 2 points, got {points}")
    return np.linspace(0.0, 1.0, points)


@dataclass(frozen=True)
class GpConfig:
    """Zero-mean Gaussian process with covariance ``scale * exp(-24|s-t| / range_divisor)``."""

    scale: float
    range_divisor: float = 10.0
    grid: np.ndarray = field(default_factory=default_grid)


def exponential_covariance(grid, scale: float, range_divisor: float = 10.0) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    return scale * np.exp(-24.0 * np.abs(grid[:, None] - grid[None, :]) / range_divisor)


def gp_sample(config: GpConfig, rng, count: int) -> np.ndarray:
    """Draw ``count`` independent GP paths on the grid, shape ``(count, T)``.

    ``rng`` is a ``numpy.random.Generator`` or a seed. The covariance is
    factorized by Cholesky. If that fails, one retry adds diagonal jitter
    of 1e-10 * scale, and a second failure raises.
    """
    if config.scale < 0 or config.range_divisor <= 0:
        raise InputError(f"invalid GP config: scale={config.scale}, "
                         f"range_divisor={config.range_divisor}")
    grid = check_grid(config.grid)
    rng = np.random.default_rng(rng)
    z = rng.standard_normal((count, grid.size))
    if config.scale == 0:
        return np.zeros_like(z)
    cov = exponential_covariance(grid, config.scale, config.range_divisor)
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        try:
            chol = np.linalg.cholesky(cov + 1e-10 * config.scale * np.eye(grid.size))
        except np.linalg.LinAlgError as exc:
            raise MDDError("covariance matrix is not positive definite even with jitter") from exc
    return z @ chol.T


def beta1(t):
    t = np.asarray(t, dtype=float)
    return -((24 * t - 15) / 10) ** 2 - 0.8


def beta2(t):
    t = np.asarray(t, dtype=float)
    return 0.01 * ((24 * t - 12) ** 2 - 12 ** 2 + 100)


def _x1_mean(t):
    return 5 * np.sin(24 * np.pi * t / 12)


def _x2_mean(t):
    return -(24 * t - 20) ** 2 / 50 - 4


@dataclass(frozen=True)
class ScenarioConfig:
    """Recipe for one simulated dataset.

    ``effects`` switches the two covariate effects on or off. ``noise_scale``
    defaults to 0.1 for scenario A and 0.02 for scenario B.
    """

    scenario: str = "A"
    n: int = 40
    grid: np.ndarray = field(default_factory=default_grid)
    effects: tuple = (True, True)
    seed: int = 1
    noise_scale: float | None = None
    range_divisor: float = 10.0

    def __post_init__(self):
        if self.scenario not in ("A", "B"):
            raise InputError(f"scenario must be 'A' or 'B', got {self.scenario!r}")
        if isinstance(self.n, bool) or not isinstance(self.n, (int, np.integer)) or self.n < 4:
            raise InputError(f"n must be an integer >= 4, got {self.n!r}")
        object.__setattr__(self, "grid", check_grid(self.grid))
        if len(self.effects) != 2:
            raise InputError(f"effects must have two flags, got {self.effects!r}")
        object.__setattr__(self, "effects", tuple(bool(f) for f in self.effects))

    @property
    def scale(self) -> float:
        return DEFAULT_NOISE_SCALE[self.scenario] if self.noise_scale is None else self.noise_scale

    def with_seed(self, seed: int) -> "ScenarioConfig":
        return ScenarioConfig(self.scenario, self.n, self.grid, self.effects, seed,
                              self.noise_scale, self.range_divisor)

    def to_dict(self) -> dict:
        return {"scenario": self.scenario, "n": int(self.n), "grid": self.grid.tolist(),
                "effects": list(self.effects), "seed": int(self.seed),
                "noise_scale": self.scale, "range_divisor": self.range_divisor}


def _draws(config):
    gp = GpConfig(config.scale, config.range_divisor, config.grid)
    rng = np.random.default_rng(np.random.SeedSequence(int(config.seed)))
    eps1 = gp_sample(gp, rng, config.n)
    eps2 = gp_sample(gp, rng, config.n)
    eps = gp_sample(gp, rng, config.n)
    t = config.grid
    return t, _x1_mean(t) + eps1, _x2_mean(t) + eps2, eps


def _as_dataset(config, x1, x2, y):
    width = len(str(config.n))
    return ConcurrentDataset(
        grid=config.grid, response=y, covariates=np.stack([x1, x2]),
        covariate_names=("X1", "X2"),
        curve_ids=tuple(f"c{i + 1:0{width}d}" for i in range(config.n)),
        provenance={"generator": f"scenario_{config.scenario}", **config.to_dict()})


def scenario_a(config: ScenarioConfig) -> ConcurrentDataset:
    """Linear concurrent model ``Y = beta1 X1 + beta2 X2 + eps`` (effects switchable)."""
    if config.scenario != "A":
        raise InputError("scenario_a needs a scenario 'A' config")
    t, x1, x2, eps = _draws(config)
    y = eps.copy()
    if config.effects[0]:
        y += beta1(t) * x1
    if config.effects[1]:
        y += beta2(t) * x2
    return _as_dataset(config, x1, x2, y)


def scenario_b(config: ScenarioConfig) -> ConcurrentDataset:
    """Nonlinear additive model with ``F1 = exp((24t+1) X1 / 20) - 2`` and
    ``F2 = -1.2 log(X2^2) sin(2 pi t)``.

    Raises
    ------
    DegenerateDataError
        If some X2 cell is exactly zero, which makes F2 singular.
    """
    if config.scenario != "B":
        raise InputError("scenario_b needs a scenario 'B' config")
    t, x1, x2, eps = _draws(config)
    y = eps.copy()
    if config.effects[0]:
        y += np.exp((24 * t + 1) * x1 / 20) - 2
    if config.effects[1]:
        zero = np.argwhere(x2 == 0)
        if zero.size:
            i, u = zero[0]
            raise DegenerateDataError(
                f"X2 is exactly zero at curve {i}, instant {u}; log(X2^2) is singular "
                f"(seed {config.seed})", instant=int(u))
        y += -1.2 * np.log(x2 ** 2) * np.sin(2 * np.pi * t)
    return _as_dataset(config, x1, x2, y)


def generate(config: ScenarioConfig) -> ConcurrentDataset:
    return scenario_a(config) if config.scenario == "A" else scenario_b(config)


def ci_bounds(alpha: float, M: int) -> tuple:
    """95% Monte Carlo band ``alpha -/+ 1.96 sqrt(alpha (1 - alpha) / M)``."""
    if not 0 < alpha < 1:
        raise InputError(f"alpha must lie in (0, 1), got {alpha}")
    if M < 1:
        raise InputError(f"M must be positive, got {M}")
    half = 1.96 * math.sqrt(alpha * (1 - alpha) / M)
    return alpha - half, alpha + half


@dataclass(frozen=True)
class TestConfig:
    """Which test each Monte Carlo replicate runs."""

    __test__ = False

    kind: str = "global"
    subset: tuple | None = None
    B: int = 1000
    multiplier_mode: str = "shared"
    statistic: str = "td"
    correction: str = "bonferroni"

    def __post_init__(self):
        if self.kind not in ("global", "partial"):
            raise InputError(f"test kind must be 'global' or 'partial', got {self.kind!r}")
        if self.multiplier_mode not in MULTIPLIER_MODES:
            raise InputError(f"multiplier_mode must be one of {MULTIPLIER_MODES}")
        if self.statistic not in STATISTICS:
            raise InputError(f"statistic must be one of {STATISTICS}")
        if self.correction not in CORRECTIONS:
            raise InputError(f"correction must be one of {CORRECTIONS}")
        if self.B < 1:
            raise InputError(f"B must be positive, got {self.B}")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["subset"] = None if self.subset is None else list(self.subset)
        return out


@dataclass(frozen=True, eq=False)
class McResult:
    """Monte Carlo rejection rates.

    ``labels`` names the hypotheses: ``("global",)`` for a global test,
    one entry per covariate for partial tests. ``pvalues`` has shape
    ``(M, len(labels))`` and holds raw p-values; ``adjusted_pvalues`` is
    set for partial tests. ``rejection_rates`` and ``within_ci`` have
    shape ``(len(labels), len(alpha_levels))``.
    """

    M: int
    alpha_levels: tuple
    labels: tuple
    pvalues: np.ndarray
    adjusted_pvalues: np.ndarray | None
    rejection_rates: np.ndarray
    ci_bounds: tuple
    within_ci: np.ndarray
    seed: int
    runtime: float = 0.0

    def rate(self, alpha: float, label: str | None = None) -> float:
        k = 0 if label is None else self.labels.index(label)
        return float(self.rejection_rates[k, list(self.alpha_levels).index(alpha)])

    def family_rejection_rate(self, alpha: float) -> float:
        """Fraction of replicates where any adjusted p-value is at most ``alpha``."""
        p = self.adjusted_pvalues if self.adjusted_pvalues is not None else self.pvalues
        return float(np.mean((p <= alpha).any(axis=1)))

    def to_dict(self) -> dict:
        return {
            "M": self.M,
            "seed": self.seed,
            "alpha_levels": list(self.alpha_levels),
            "labels": list(self.labels),
            "rejection_rates": {lab: self.rejection_rates[k].tolist()
                                for k, lab in enumerate(self.labels)},
            "ci_bounds": [list(b) for b in self.ci_bounds],
            "within_ci": {lab: self.within_ci[k].tolist() for k, lab in enumerate(self.labels)},
            "pvalues": {lab: self.pvalues[:, k].tolist() for k, lab in enumerate(self.labels)},
        }


def replicate_seeds(master_seed: int, index: int) -> tuple:
    """(data seed, bootstrap seed) of Monte Carlo replicate ``index``."""
    data = np.random.SeedSequence(int(master_seed), spawn_key=(int(index), 0))
    boot = np.random.SeedSequence(int(master_seed), spawn_key=(int(index), 1))
    return (int(data.generate_state(1, dtype=np.uint64)[0]),
            int(boot.generate_state(1, dtype=np.uint64)[0]))


def _one_replicate(args):
    scenario, test, master_seed, index = args
    data_seed, boot_seed = replicate_seeds(master_seed, index)
    try:
        dataset = generate(scenario.with_seed(data_seed))
        if test.kind == "global":
            rep = global_test(dataset, test.subset, test.B, boot_seed, test.multiplier_mode,
                              test.statistic)
            return [rep.p_value], None
        rep = partial_tests(dataset, test.B, boot_seed, test.correction,
                            multiplier_mode=test.multiplier_mode, statistic=test.statistic)
        return ([c.p_value_raw for c in rep.per_covariate],
                [c.p_value_adjusted for c in rep.per_covariate])
    except MDDError as exc:
        raise type(exc)(f"Monte Carlo replicate {index}: {exc}") from exc


def run_monte_carlo(scenario: ScenarioConfig, test: TestConfig, M: int,
                    alpha_levels=(0.01, 0.05, 0.10), workers: int = 1,
                    progress=None) -> McResult:
    """Estimate rejection rates over ``M`` simulated datasets.

    Replicate ``m`` draws its dataset and its bootstrap multipliers from
    seeds derived from ``(scenario.seed, m)``. The result is therefore
    the same for any ``workers`` value and any execution order.
    ``progress(done, M)`` is called after each replicate.
    """
    if isinstance(M, bool) or not isinstance(M, (int, np.integer)) or M < 1:
        raise InputError(f"M must be a positive integer, got {M!r}")
    alpha_levels = tuple(float(a) for a in alpha_levels)
    bounds = tuple(ci_bounds(a, M) for a in alpha_levels)
    started = time.perf_counter()
    jobs = [(scenario, test, scenario.seed, m) for m in range(M)]
    raw, adjusted = [], []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for done, (r, a) in enumerate(pool.map(_one_replicate, jobs, chunksize=4), 1):
                raw.append(r)
                adjusted.append(a)
                if progress:
                    progress(done, M)
    else:
        for done, job in enumerate(jobs, 1):
            r, a = _one_replicate(job)
            raw.append(r)
            adjusted.append(a)
            if progress:
                progress(done, M)
    pvalues = np.array(raw)
    adj = None if test.kind == "global" else np.array(adjusted)
    labels = ("global",) if test.kind == "global" else tuple(f"H0{j + 1}" for j in range(pvalues.shape[1]))
    rates = np.array([[np.mean(pvalues[:, k] <= a) for a in alpha_levels]
                      for k in range(pvalues.shape[1])])
    within = np.array([[lo <= r <= hi for r, (lo, hi) in zip(row, bounds)] for row in rates])
    return McResult(M=int(M), alpha_levels=alpha_levels, labels=labels, pvalues=pvalues,
                    adjusted_pvalues=adj, rejection_rates=rates, ci_bounds=bounds,
                    within_ci=within, seed=int(scenario.seed),
                    runtime=time.perf_counter() - started)
