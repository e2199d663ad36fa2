"""Global and partial conditional mean independence tests."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

from scipy.stats import norm

from .bootstrap import global_bootstrap
from .data import resolve_subset
from .errors import InputError
from .integrated import statistic_td

__all__ = [
    "CORRECTIONS",
    "CovariateResult",
    "TestReport",
    "resolve_subset",
    "global_test",
    "partial_tests",
    "adjust_pvalues",
    "asymptotic_pvalue",
]

CORRECTIONS = ("bonferroni", "none")

ASYMPTOTIC_NOTE = "diagnostic only: normal approximation of T_D, convergence is slow"


def asymptotic_pvalue(statistic_td: float) -> float:
    """Upper-tail standard normal p-value of the integrated statistic."""
    return float(norm.sf(statistic_td))


def adjust_pvalues(raw, correction: str = "bonferroni") -> list:
    """Multiplicity-adjusted p-values. Bonferroni multiplies by the count, capped at 1."""
    if correction not in CORRECTIONS:
        raise InputError(f"correction must be one of {CORRECTIONS}, got {correction!r}")
    raw = [float(p) for p in raw]
    if correction == "none":
        return raw
    return [min(1.0, p * len(raw)) for p in raw]


@dataclass(frozen=True)
class CovariateResult:
    index: int
    name: str
    statistic_td: float
    statistic_e: float
    p_value_raw: float
    p_value_adjusted: float
    reject: bool


@dataclass(frozen=True)
class TestReport:
    """Outcome of a global or partial test.

    ``p_value`` belongs to ``decision_statistic``; the p-value of the other
    statistic, computed from the same multipliers, is kept in
    ``p_value_td`` / ``p_value_e``. For partial tests the top-level
    statistics are those of the full covariate set (no bootstrap) and
    ``p_value`` is the smallest adjusted per-covariate p-value.
    """

    __test__ = False

    kind: str
    subset: tuple
    subset_names: tuple
    statistic_td: float
    statistic_e: float | None
    p_value: float
    p_value_td: float | None
    p_value_e: float | None
    decision_statistic: str
    asymptotic_p_value: float
    B: int
    seed: int
    multiplier_mode: str
    n: int
    p: int
    T: int
    alpha: float | None = None
    correction: str | None = None
    per_covariate: tuple = field(default_factory=tuple)
    notes: tuple = (ASYMPTOTIC_NOTE,)

    def reject(self, alpha: float) -> bool:
        return self.p_value <= alpha

    def to_dict(self) -> dict:
        out = asdict(self)
        out["subset"] = list(self.subset)
        out["subset_names"] = list(self.subset_names)
        out["per_covariate"] = [asdict(c) for c in self.per_covariate]
        out["notes"] = list(self.notes)
        return out


def global_test(dataset, subset=None, B: int = 1000, seed: int = 1,
                multiplier_mode: str = "shared", statistic: str = "td",
                workers: int = 1, stream: int = 0) -> TestReport:
    """Test that no covariate in ``subset`` affects the conditional mean of Y(t).

    Parameters
    ----------
    dataset : ConcurrentDataset
        Complete dataset, ``n >= 4``.
    subset : None, "all" or iterable of int/str
        Covariates tested jointly; all of them by default.
    B : int
        Bootstrap replicates.
    seed : int
        Master seed of the multiplier streams.
    multiplier_mode : {"shared", "per-instant"}
    statistic : {"td", "e"}
        Decision statistic: ratio of integrals (``td``) or integral of
        ratios (``e``).
    workers : int
        Bootstrap threads; does not change results.
    stream : int
        Multiplier substream tag.

    Returns
    -------
    TestReport
    """
    subset = resolve_subset(dataset, subset)
    boot = global_bootstrap(dataset, subset, B, seed, multiplier_mode, statistic,
                            stream=stream, workers=workers)
    return TestReport(
        kind="global",
        subset=subset,
        subset_names=tuple(dataset.covariate_names[j] for j in subset),
        statistic_td=boot.td.observed,
        statistic_e=boot.e.observed,
        p_value=boot.decision.p_value,
        p_value_td=boot.td.p_value,
        p_value_e=boot.e.p_value,
        decision_statistic=statistic,
        asymptotic_p_value=asymptotic_pvalue(boot.td.observed),
        B=int(B), seed=int(seed), multiplier_mode=multiplier_mode,
        n=dataset.n, p=dataset.p, T=dataset.T)


def partial_tests(dataset, B: int = 1000, seed: int = 1, correction: str = "bonferroni",
                  alpha: float = 0.05, multiplier_mode: str = "shared",
                  statistic: str = "td", workers: int = 1, progress=None) -> TestReport:
    """One global test per covariate, with multiplicity correction.

    Covariate ``j`` uses multiplier substream ``j + 1`` of ``seed``, so the
    runs are independent of each other and of the global test. ``progress``,
    if given, is called with a dict holding ``index``, ``name`` and
    ``p_value_raw`` as soon as each covariate finishes.
    """
    if correction not in CORRECTIONS:
        raise InputError(f"correction must be one of {CORRECTIONS}, got {correction!r}")
    if not 0 < alpha < 1:
        raise InputError(f"alpha must lie in (0, 1), got {alpha}")
    full = statistic_td(dataset, None)
    reports = []
    for j in range(dataset.p):
        rep = global_test(dataset, [j], B, seed, multiplier_mode, statistic,
                          workers=workers, stream=j + 1)
        reports.append(rep)
        if progress is not None:
            progress({"index": j, "name": dataset.covariate_names[j],
                      "p_value_raw": rep.p_value})
    adjusted = adjust_pvalues([r.p_value for r in reports], correction)
    per = tuple(
        CovariateResult(index=j, name=dataset.covariate_names[j],
                        statistic_td=r.statistic_td, statistic_e=r.statistic_e,
                        p_value_raw=r.p_value, p_value_adjusted=adj, reject=adj <= alpha)
        for j, (r, adj) in enumerate(zip(reports, adjusted)))
    subset = tuple(range(dataset.p))
    return TestReport(
        kind="partial",
        subset=subset,
        subset_names=tuple(dataset.covariate_names),
        statistic_td=full.td_value,
        statistic_e=full.e_value,
        p_value=min(adjusted),
        p_value_td=None,
        p_value_e=None,
        decision_statistic=statistic,
        asymptotic_p_value=asymptotic_pvalue(full.td_value),
        B=int(B), seed=int(seed), multiplier_mode=multiplier_mode,
        n=dataset.n, p=dataset.p, T=dataset.T,
        alpha=alpha, correction=correction, per_covariate=per)
