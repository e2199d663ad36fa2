import numpy as np
import pytest
from scipy.stats import norm

from mddconc.bootstrap import global_bootstrap
from mddconc.errors import InputError, MissingDataError
from mddconc.inference import adjust_pvalues, asymptotic_pvalue, global_test, partial_tests

from conftest import make_dataset


def test_adjust_pvalues():
    assert adjust_pvalues([0.01, 0.3, 0.6]) == pytest.approx([0.03, 0.9, 1.0])
    assert adjust_pvalues([0.01, 0.3], "none") == [0.01, 0.3]
    with pytest.raises(InputError):
        adjust_pvalues([0.1], "holm")


def test_asymptotic_pvalue():
    assert asymptotic_pvalue(1.6448536269514722) == pytest.approx(0.05, rel=1e-12)
    assert asymptotic_pvalue(-3.0) == pytest.approx(norm.cdf(3.0))


def test_global_report_fields():
    ds = make_dataset(n=15, p=2, T=4, seed=1, effect=1.0)
    rep = global_test(ds, B=100, seed=9)
    boot = global_bootstrap(ds, B=100, master_seed=9)
    assert rep.kind == "global" and rep.subset == (0, 1) and rep.subset_names == ("X1", "X2")
    assert rep.statistic_td == boot.td.observed and rep.p_value == boot.td.p_value
    assert rep.p_value_e == boot.e.p_value
    assert rep.asymptotic_p_value == pytest.approx(norm.sf(rep.statistic_td))
    assert (rep.n, rep.p, rep.T, rep.B, rep.seed) == (15, 2, 4, 100, 9)
    d = rep.to_dict()
    assert d["subset"] == [0, 1] and d["per_covariate"] == [] and d["notes"]
    assert rep.reject(0.05) == (rep.p_value <= 0.05)


def test_global_decision_statistic_e():
    ds = make_dataset(n=12, p=2, T=4, seed=4)
    rep = global_test(ds, B=60, seed=2, statistic="e")
    assert rep.decision_statistic == "e" and rep.p_value == rep.p_value_e


def test_partial_streams_and_adjustment():
    ds = make_dataset(n=20, p=3, T=4, seed=2, effect=1.5)
    seen = []
    rep = partial_tests(ds, B=80, seed=4, progress=seen.append)
    assert [s["name"] for s in seen] == ["X1", "X2", "X3"]
    for j, c in enumerate(rep.per_covariate):
        single = global_test(ds, [j], B=80, seed=4, stream=j + 1)
        assert c.p_value_raw == single.p_value
        assert c.p_value_adjusted == min(1.0, 3 * single.p_value)
        assert c.reject == (c.p_value_adjusted <= 0.05)
    assert rep.p_value == min(c.p_value_adjusted for c in rep.per_covariate)
    assert rep.per_covariate[0].p_value_raw == 0.0
    none = partial_tests(ds, B=80, seed=4, correction="none")
    assert [c.p_value_adjusted for c in none.per_covariate] == \
        [c.p_value_raw for c in rep.per_covariate]


def test_partial_validation():
    ds = make_dataset()
    with pytest.raises(InputError):
        partial_tests(ds, B=10, correction="fdr")
    with pytest.raises(InputError):
        partial_tests(ds, B=10, alpha=1.5)


def test_missing_data_refused():
    ds = make_dataset(n=6, p=1, T=3)
    mask = np.zeros((2, 6, 3), dtype=bool)
    mask[0, 0, 0] = True
    holed = type(ds)(grid=ds.grid, response=ds.response, covariates=ds.covariates, missing=mask)
    with pytest.raises(MissingDataError):
        global_test(holed, B=10)


def test_same_seed_same_report_any_workers():
    ds = make_dataset(n=14, p=2, T=5, seed=3)
    a = global_test(ds, B=300, seed=11, workers=1).to_dict()
    b = global_test(ds, B=300, seed=11, workers=3).to_dict()
    assert a == b
    assert global_test(ds, B=300, seed=12).to_dict() != a
