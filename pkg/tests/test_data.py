import warnings

import numpy as np
import pytest

from mddconc.data import (ConcurrentDataset, center_variables, load_dataset, load_long_csv,
                          load_wide_csv, resolve_subset, save_long_csv, save_wide_csv,
                          spline_fill)
from mddconc.errors import ExtrapolationError, InputError, MissingDataError, ParseError

from conftest import make_dataset


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_long_two_curves_example(tmp_path):
    rows = ["curve_id,variable,time,value"]
    for c in ("a", "b"):
        for v in ("Y", "X1"):
            for t in (0.0, 0.5, 1.0):
                rows.append(f"{c},{v},{t},{len(rows)}")
    ds = load_long_csv(_write(tmp_path / "d.csv", "\n".join(rows) + "\n"), min_curves=2)
    assert ds.response.shape == (2, 3) and ds.covariates.shape == (1, 2, 3)
    assert ds.is_complete and ds.grid.tolist() == [0.0, 0.5, 1.0]
    assert ds.response[0].tolist() == [1, 2, 3]
    with pytest.raises(ParseError, match="at least 4 curves"):
        load_long_csv(tmp_path / "d.csv")


def test_long_missing_record_marks_mask(tmp_path):
    ds = make_dataset(n=4, p=1, T=3)
    save_long_csv(ds, tmp_path / "d.csv")
    lines = (tmp_path / "d.csv").read_text().splitlines()
    dropped = [l for l in lines if not (l.startswith("1,X1,0.5,"))]
    assert len(dropped) == len(lines) - 1
    back = load_long_csv(_write(tmp_path / "e.csv", "\n".join(dropped) + "\n"))
    assert back.missing[1, 0, 1] and back.missing.sum() == 1
    with pytest.raises(MissingDataError):
        back.require_complete()


def test_long_errors(tmp_path):
    head = "curve_id,variable,time,value\n"
    body = "".join(f"{c},{v},0,1\n" for c in "abcd" for v in ("Y", "X1"))
    with pytest.raises(ParseError, match=r"a\.csv:3: duplicate"):
        load_long_csv(_write(tmp_path / "a.csv", head + "a,Y,0,1\na,Y,0,2\n"))
    with pytest.raises(ParseError):
        load_long_csv(_write(tmp_path / "b.csv", "id,variable,time,value\n" + body))
    with pytest.raises(ParseError, match="value"):
        load_long_csv(_write(tmp_path / "c.csv", head + body + "e,Y,0,abc\n"))
    with pytest.raises(ParseError, match="Y"):
        load_long_csv(_write(tmp_path / "d.csv", head + body.replace(",Y,", ",Z,")))
    with pytest.raises(FileNotFoundError):
        load_dataset(tmp_path / "nothing.csv")


def test_long_round_trip_exact(tmp_path):
    ds = make_dataset(n=6, p=3, T=5, seed=4, grid=[0.0, 1 / 3, 0.5, 2 / 3, 1.0])
    save_long_csv(ds, tmp_path / "d.csv")
    back = load_long_csv(tmp_path / "d.csv")
    np.testing.assert_array_equal(back.values(), ds.values())
    np.testing.assert_array_equal(back.grid, ds.grid)
    assert back.covariate_names == ds.covariate_names
    raw = (tmp_path / "d.csv").read_bytes()
    assert b"\r" not in raw


def test_wide_round_trip_and_missing(tmp_path):
    ds = make_dataset(n=5, p=1, T=4, seed=2)
    save_wide_csv(ds, tmp_path)
    back = load_wide_csv(tmp_path)
    np.testing.assert_array_equal(back.values(), ds.values())
    text = (tmp_path / "X1.csv").read_text().splitlines()
    cells = text[2].split(",")
    cells[3] = ""
    text[2] = ",".join(cells)
    (tmp_path / "X1.csv").write_text("\n".join(text) + "\n")
    holed = load_dataset(tmp_path)
    assert holed.missing[1, 1, 2] and holed.missing.sum() == 1


def test_wide_mismatched_grid_lists_times(tmp_path):
    ds = make_dataset(n=4, p=1, T=3)
    save_wide_csv(ds, tmp_path)
    y = (tmp_path / "Y.csv").read_text().replace("curve_id,0,0.5,1", "curve_id,0,0.25,1")
    (tmp_path / "Y.csv").write_text(y)
    with pytest.raises(ParseError, match=r"0\.25.*0\.5|0\.5.*0\.25"):
        load_wide_csv(tmp_path)


def test_wide_mismatched_curves(tmp_path):
    ds = make_dataset(n=4, p=1, T=3)
    save_wide_csv(ds, tmp_path)
    x = (tmp_path / "X1.csv").read_text().replace("\n4,", "\n9,")
    (tmp_path / "X1.csv").write_text(x)
    with pytest.raises(ParseError, match="curve set"):
        load_wide_csv(tmp_path)


def _holed(values, holes):
    grid = np.linspace(0, 1, values.shape[-1])
    missing = np.zeros((2,) + values.shape, dtype=bool)
    missing[0][:, holes] = True
    stack = np.stack([values, np.ones_like(values) * np.arange(values.shape[0])[:, None]])
    stack[0][:, holes] = np.nan
    return ConcurrentDataset(grid=grid, response=stack[0], covariates=stack[1:2], missing=missing)


def test_spline_linear_exactness():
    grid = np.linspace(0, 1, 11)
    ds = _holed(np.vstack([2 * grid - 1, -grid]), [3, 7])
    out = spline_fill(ds)
    np.testing.assert_allclose(out.response, np.vstack([2 * grid - 1, -grid]), atol=1e-10)
    assert out.is_complete and out.provenance["spline_end_condition"] == "natural"
    assert out.provenance["filled_cells"] == 4


def test_spline_sin_accuracy_and_observed_untouched():
    grid = np.linspace(0, 1, 25)
    truth = np.sin(2 * np.pi * grid)
    holes = [3, 8, 12, 17, 21]
    ds = _holed(truth[None, :].copy(), holes)
    out = spline_fill(ds)
    assert np.max(np.abs(out.response[0, holes] - truth[holes])) < 5e-3
    keep = np.setdiff1d(np.arange(25), holes)
    np.testing.assert_array_equal(out.response[0, keep], truth[keep])


def test_spline_idempotent_on_complete():
    ds = make_dataset()
    assert spline_fill(ds) is ds


def test_spline_errors_and_extrapolation():
    grid = np.linspace(0, 1, 6)
    one_obs = _holed(grid[None, :].copy(), [0, 1, 2, 3, 4])
    with pytest.raises(InputError, match="curve '1' of variable 'Y'"):
        spline_fill(one_obs)
    edge = _holed(grid[None, :].copy(), [5])
    with pytest.raises(ExtrapolationError):
        spline_fill(edge)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        out = spline_fill(edge, extrapolate=True)
    assert caught and out.provenance["extrapolated_cells"] == 1
    assert out.response[0, 5] == pytest.approx(1.0, abs=1e-10)


def test_center_variables():
    ds = make_dataset(n=7, p=2, T=4, seed=3)
    c = center_variables(ds)
    np.testing.assert_allclose(c.values().mean(axis=1), 0, atol=1e-12)
    np.testing.assert_allclose(center_variables(c).values(), c.values(), atol=1e-12)
    shifted = type(ds)(grid=ds.grid, response=ds.response + 5, covariates=ds.covariates)
    np.testing.assert_allclose(center_variables(shifted).values(), c.values(), atol=1e-12)


def test_dataset_validation_and_immutability():
    y = np.zeros((4, 3))
    ds = ConcurrentDataset(grid=[0, 1, 2], response=y, covariates=np.zeros((1, 4, 3)))
    y[0, 0] = 1.0
    assert ds.response[0, 0] == 0.0
    with pytest.raises(ValueError):
        ds.response[0, 0] = 2.0
    with pytest.raises(InputError):
        ConcurrentDataset(grid=[0, 1], response=y, covariates=np.zeros((1, 4, 3)))
    with pytest.raises(InputError):
        ConcurrentDataset(grid=[0, 2, 1], response=y, covariates=np.zeros((1, 4, 3)))


def test_resolve_subset():
    ds = make_dataset(p=3)
    assert resolve_subset(ds) == (0, 1, 2) == resolve_subset(ds, "all")
    assert resolve_subset(ds, ["X3", 0]) == (0, 2)
    for bad in ([], [0, 0], [5], ["Z"]):
        with pytest.raises(InputError):
            resolve_subset(ds, bad)
