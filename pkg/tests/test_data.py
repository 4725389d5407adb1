from __future__ import annotations

import numpy as np
import pytest
import yaml
from hypothesis import given, settings, strategies as st

from gsfavar.data import (
    SyntheticConfig,
    apply_transform,
    generate_synthetic,
    load_panel,
    quarter_label,
    quarter_labels,
    write_panel_files,
)
from gsfavar.errors import (
    MissingValue,
    MissingVariable,
    NonNumericCell,
    NonPositiveForLog,
    UnknownCode,
    UnstableSpec,
    WindowTooShort,
)
from gsfavar.numeric import RngStream


def _write(tmp_path, columns: dict, variables: list, n: int = 60):
    dates = quarter_labels("1980Q1", n)
    csv = tmp_path / "raw.csv"
    with open(csv, "w") as fh:
        fh.write("date," + ",".join(columns) + "\n")
        for t in range(n):
            fh.write(dates[t] + "," + ",".join(str(columns[c][t]) for c in columns) + "\n")
    man = tmp_path / "manifest.yaml"
    man.write_text(yaml.safe_dump({"group_names": {1: "output"}, "variables": variables}))
    return csv, man


@pytest.mark.parametrize("code,lag", [(1, 0), (5, 1), (7, 2), (50, 4)])
def test_transform_lengths(code, lag):
    x = np.linspace(1.0, 3.0, 20)
    assert apply_transform(x, code).size == 20 - lag


def test_transform_values():
    x = np.array([1.0, 2.0, 4.0, 6.0, 9.0, 12.0])
    np.testing.assert_allclose(apply_transform(x, 5), np.diff(np.log(x)))
    growth = x[1:] / x[:-1] - 1
    np.testing.assert_allclose(apply_transform(x, 7), np.diff(growth))
    np.testing.assert_allclose(apply_transform(x, 50), np.log(x[4:]) - np.log(x[:-4]))


def test_transform_errors():
    with pytest.raises(NonPositiveForLog):
        apply_transform([1.0, 0.0, 2.0], 5)
    with pytest.raises(UnknownCode):
        apply_transform([1.0, 2.0], 3)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.1, 100.0), min_size=6, max_size=40))
def test_log_difference_telescopes(vals):
    x = np.array(vals)
    d = apply_transform(x, 5)
    assert d.sum() == pytest.approx(np.log(x[-1]) - np.log(x[0]), abs=1e-9)


def test_quarter_labels():
    assert quarter_labels("1999Q3", 4) == ["1999Q3", "1999Q4", "2000Q1", "2000Q2"]
    assert quarter_label("2001-08-01") == "2001Q3"
    assert quarter_label("2001Q2") == "2001Q2"


def test_load_panel_aligns_and_standardises(tmp_path):
    g = np.random.default_rng(0)
    cols = {"gdp": np.exp(np.cumsum(0.01 + 0.01 * g.standard_normal(60))),
            "ff": g.standard_normal(60)}
    variables = [{"name": "gdp", "group": 1, "tcode": 5},
                 {"name": "ff", "group": None, "tcode": 1, "speed": "fast", "role": "observable_y"}]
    csv, man = _write(tmp_path, cols, variables)
    panel = load_panel(csv, man)
    assert panel.n_obs == 59
    assert panel.dates[0] == "1980Q2"
    np.testing.assert_allclose(panel.values.mean(0), 0.0, atol=1e-12)
    np.testing.assert_allclose(panel.values.std(0), 1.0, atol=1e-12)
    np.testing.assert_allclose(panel.transformed()[:, 0], np.diff(np.log(cols["gdp"])), atol=1e-12)
    assert panel.y_names == ["ff"]
    assert panel.group_names == {1: "output"}


def test_load_panel_errors(tmp_path):
    g = np.random.default_rng(1)
    base = {"a": g.standard_normal(60)}
    csv, man = _write(tmp_path, base, [{"name": "a", "group": 1}, {"name": "b", "group": 1}])
    with pytest.raises(MissingVariable):
        load_panel(csv, man)

    holey = base["a"].copy().astype(object)
    holey[30] = "NA"
    csv, man = _write(tmp_path, {"a": holey}, [{"name": "a", "group": 1}])
    with pytest.raises(MissingValue):
        load_panel(csv, man)
    assert load_panel(csv, man, forward_fill=True).n_obs == 60

    bad = base["a"].copy().astype(object)
    bad[5] = "abc"
    csv, man = _write(tmp_path, {"a": bad}, [{"name": "a", "group": 1}])
    with pytest.raises(NonNumericCell):
        load_panel(csv, man)

    csv, man = _write(tmp_path, {"a": g.standard_normal(30)}, [{"name": "a", "group": 1}], n=30)
    with pytest.raises(WindowTooShort):
        load_panel(csv, man)


def test_window_restandardises():
    panel, _ = generate_synthetic(SyntheticConfig(n_obs=80, n_vars=12, n_groups=4, n_factors=2), RngStream(0))
    w = panel.window(0, 50)
    assert w.n_obs == 50
    np.testing.assert_allclose(w.values.mean(0), 0.0, atol=1e-12)
    np.testing.assert_allclose(w.transformed(), panel.transformed()[:50], atol=1e-12)


def test_panel_file_roundtrip(tmp_path):
    panel, _ = generate_synthetic(SyntheticConfig(n_obs=60, n_vars=12, n_groups=4, n_factors=2, n_observable=2),
                                  RngStream(2))
    write_panel_files(panel, tmp_path / "p.csv", tmp_path / "p.yaml")
    back = load_panel(tmp_path / "p.csv", tmp_path / "p.yaml")
    np.testing.assert_allclose(back.values, panel.values, atol=1e-12)
    assert back.specs == panel.specs
    assert back.group_names == panel.group_names


def test_synthetic_anchor_structure():
    panel, truth = generate_synthetic(SyntheticConfig(), RngStream(0))
    assert panel.x.shape == (400, 36)
    b = truth.true_B
    np.testing.assert_array_equal(b[:3], np.eye(3))
    assert np.all((b[3:] > 0).sum(axis=1) >= 1)
    with pytest.raises(UnstableSpec):
        generate_synthetic(SyntheticConfig(spectral_radius=1.0), RngStream(0))
