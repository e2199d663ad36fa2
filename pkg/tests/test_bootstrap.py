import math

import numpy as np
import pytest
from scipy.special import ndtri

from mddconc.bootstrap import (CHUNK, bootstrap_mdd_star, bootstrap_pvalue,
                               bootstrap_variance_star, global_bootstrap, multiplier_block,
                               run_algorithm1, run_algorithm2, wild_multipliers)
from mddconc.errors import DegenerateDataError, InputError
from mddconc.integrated import integrate_on_grid
from mddconc.matrices import half_squared_distance, pairwise_abs_distance, u_center
from mddconc.pointwise import cn_factor, mdd_unbiased, pointwise_variance

from conftest import make_dataset


def _matrices(n=10, seed=0, p=2):
    rng = np.random.default_rng(seed)
    b = u_center(half_squared_distance(rng.standard_normal(n)))
    a = [u_center(pairwise_abs_distance(rng.standard_normal(n))) for _ in range(p)]
    return a, b


def test_unit_multipliers_identities():
    n = 10
    a, b = _matrices(n)
    e = np.ones(n)
    assert bootstrap_mdd_star(a[0], b, e) == pytest.approx(
        (n - 3) / (n - 1) * mdd_unbiased(a[0], b), rel=1e-12)
    assert bootstrap_variance_star(a, b, e) == pytest.approx(
        cn_factor(n) * pointwise_variance(a, b), rel=1e-12)


def test_bootstrap_mdd_star_double_sum():
    n = 7
    a, b = _matrices(n, seed=4, p=1)
    e = np.random.default_rng(9).standard_normal(n)
    expected = sum(a[0][l, q] * b[l, q] * e[l] * e[q]
                   for l in range(n) for q in range(n) if l != q) / (n * (n - 1))
    assert bootstrap_mdd_star(a[0], b, e) == pytest.approx(expected, rel=1e-12)


def test_multiplier_reference_words():
    # Replicate b is words [b*n, (b+1)*n) of a Philox stream keyed by SeedSequence.
    seed, n = 123, 5
    key = np.random.SeedSequence(seed, spawn_key=(0, 0)).generate_state(2, dtype=np.uint64)
    words = np.random.Philox(key=key).random_raw(4 * n)
    expected = ndtri(((words >> np.uint64(11)).astype(float) + 0.5) * 2.0 ** -53)
    np.testing.assert_array_equal(multiplier_block(seed, 0, 4, n), expected.reshape(4, n))
    np.testing.assert_array_equal(wild_multipliers(seed, 3, n), expected[3 * n:])


@pytest.mark.parametrize("n", [3, 4, 7])
def test_multiplier_block_equals_single_draws(n):
    block = multiplier_block(99, 5, 17, n, instant=2, stream=1)
    for k, b in enumerate(range(5, 17)):
        np.testing.assert_array_equal(block[k], wild_multipliers(99, b, n, instant=2, stream=1))


def test_multiplier_streams_differ():
    base = multiplier_block(1, 0, 2, 8)
    assert not np.array_equal(base, multiplier_block(1, 0, 2, 8, stream=1))
    assert not np.array_equal(base, multiplier_block(1, 0, 2, 8, instant=0))
    assert not np.array_equal(base, multiplier_block(2, 0, 2, 8))


def test_multiplier_moments():
    e = multiplier_block(2024, 0, 20000, 10).ravel()
    assert abs(e.mean()) < 4 / math.sqrt(e.size)
    assert e.var() == pytest.approx(1.0, abs=0.02)


def test_seed_validation():
    with pytest.raises(InputError):
        multiplier_block(-1, 0, 1, 4)
    with pytest.raises(InputError):
        multiplier_block(2 ** 64, 0, 1, 4)


def test_pvalue_counts_ties():
    assert bootstrap_pvalue(1.0, [0.5, 1.0, 2.0, 0.0]) == 0.5
    with pytest.raises(InputError):
        bootstrap_pvalue(1.0, [])


def test_global_replicates_match_reference():
    ds = make_dataset(n=8, p=2, T=4, seed=1, effect=0.5)
    B = 6
    res = global_bootstrap(ds, B=B, master_seed=5)
    c2 = math.comb(8, 2)
    nums = np.empty((B, 4))
    variances = np.empty((B, 4))
    for b in range(B):
        e = wild_multipliers(5, b, 8)
        for u in range(4):
            bm = u_center(half_squared_distance(ds.response[:, u]))
            am = [u_center(pairwise_abs_distance(ds.covariates[j, :, u])) for j in range(2)]
            nums[b, u] = math.sqrt(c2) * sum(bootstrap_mdd_star(a, bm, e) for a in am)
            variances[b, u] = bootstrap_variance_star(am, bm, e)
    td = integrate_on_grid(nums, ds.grid) / np.sqrt(integrate_on_grid(variances, ds.grid))
    ev = integrate_on_grid(nums / np.sqrt(variances), ds.grid)
    np.testing.assert_allclose(res.td.replicates, td, rtol=1e-10)
    np.testing.assert_allclose(res.e.replicates, ev, rtol=1e-10)
    assert res.decision is res.td


def test_per_instant_mode_uses_instant_keys():
    ds = make_dataset(n=8, p=1, T=3, seed=3)
    calls = []

    def source(lo, hi, n, instant):
        calls.append(instant)
        return multiplier_block(1, lo, hi, n, instant)

    global_bootstrap(ds, B=5, multiplier_mode="per-instant", multiplier_source=source)
    assert calls == [0, 1, 2]
    calls.clear()
    global_bootstrap(ds, B=5, multiplier_mode="shared", multiplier_source=source)
    assert calls == [None]


def test_results_independent_of_workers():
    ds = make_dataset(n=12, p=2, T=5, seed=8)
    B = 3 * CHUNK + 17
    one = global_bootstrap(ds, B=B, master_seed=77, workers=1)
    four = global_bootstrap(ds, B=B, master_seed=77, workers=4)
    np.testing.assert_array_equal(one.td.replicates, four.td.replicates)
    np.testing.assert_array_equal(one.e.replicates, four.e.replicates)
    a1 = run_algorithm1(ds, 2, B=B, master_seed=3)
    a4 = run_algorithm1(ds, 2, B=B, master_seed=3, workers=4)
    np.testing.assert_array_equal(a1.replicates, a4.replicates)


def test_algorithm1_alternative_rejects():
    ds = make_dataset(n=40, p=1, T=2, seed=0, effect=2.0)
    out = run_algorithm1(ds, 0, B=200, master_seed=1)
    assert out.p_value < 0.01
    assert out.B == 200


def test_algorithm2_statistic_choice():
    ds = make_dataset(n=10, p=2, T=4, seed=6)
    td = run_algorithm2(ds, B=50, master_seed=2, statistic="td")
    e = run_algorithm2(ds, B=50, master_seed=2, statistic="e")
    assert td.statistic == "td" and e.statistic == "e"
    with pytest.raises(InputError):
        run_algorithm2(ds, B=50, statistic="max")
    with pytest.raises(InputError):
        run_algorithm2(ds, B=0)
    with pytest.raises(InputError):
        run_algorithm2(ds, B=5, multiplier_mode="blocks")


def test_degenerate_observed_variance():
    ds = make_dataset(n=8, p=1, T=3)
    y = ds.response.copy()
    y[:, 1] = 0.0
    bad = type(ds)(grid=ds.grid, response=y, covariates=ds.covariates)
    with pytest.raises(DegenerateDataError, match="instant 1"):
        global_bootstrap(bad, B=10)
