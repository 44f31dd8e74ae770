import xml.etree.ElementTree as ET

import numpy as np
import pytest
import scipy.stats

import oracles
from conftest import make_recording
from gaitdict.authbench import BaselineGrid, EvalReport
from gaitdict.dictattack import AttackReport, Dictionary, DictionaryEntry, FactorSetting
from gaitdict.eda import (
    CorrelationCell,
    LabeledMatrix,
    OverlapGrid,
    attack_rate_matrix,
    correlations_csv,
    cut_windows,
    factor_feature_correlations,
    factor_value,
    grids_by_factor,
    matrix_csv,
    matrix_from_grid,
    matrix_svg,
    overlap_heatmap,
    pearson_r,
    r_p_value,
    rate_matrix,
    render,
    value_color,
)
from gaitdict.errors import DataError
from gaitdict.features import FeatureMatrix
from gaitdict.signal import DEFAULT_SLIDE_S, DEFAULT_WINDOW_S, IMURecording, SignalChannel

from test_dictattack import _ThresholdModel, entry_with_far, mini_model, small_report

MINI_NAMES = tuple(f"la_x_f{i:02d}" for i in range(4))


def cached_entry(imitator, setting, values):
    entry = DictionaryEntry(imitator, setting, make_recording(imitator, "entry", n=400))
    entry._cache[(DEFAULT_WINDOW_S, DEFAULT_SLIDE_S)] = FeatureMatrix(
        np.asarray(values, dtype=float), MINI_NAMES
    )
    return entry


class TestPearson:
    def test_linear_is_one(self):
        x = np.array([1.0, 2.0, 3.0, 4.0])
        assert pearson_r(x, 3.0 * x + 2.0) == pytest.approx(1.0, abs=1e-12)
        assert pearson_r(x, -0.5 * x) == pytest.approx(-1.0, abs=1e-12)

    def test_constant_is_undefined(self):
        x = np.array([1.0, 2.0, 3.0])
        assert pearson_r(x, np.ones(3)) is None
        assert pearson_r(np.ones(3), x) is None

    def test_matches_covariance_oracle(self, rng):
        for _ in range(50):
            x = rng.normal(size=12)
            y = rng.normal(size=12)
            r = pearson_r(x, y)
            assert r == pytest.approx(oracles.pearson_r(list(x), list(y)), abs=1e-12)
            assert abs(r) <= 1 + 1e-12

    def test_shape_validation(self):
        with pytest.raises(ValueError):
            pearson_r(np.ones(3), np.ones(4))
        with pytest.raises(ValueError):
            pearson_r(np.ones(1), np.ones(1))


class TestPValue:
    def test_matches_scipy_pearsonr(self, rng):
        for _ in range(25):
            x = rng.normal(size=10)
            y = rng.normal(size=10)
            r = pearson_r(x, y)
            expected = scipy.stats.pearsonr(x, y).pvalue
            assert r_p_value(r, 10) == pytest.approx(expected, abs=1e-9)

    def test_extremes(self):
        assert r_p_value(1.0, 5) == 0.0
        assert r_p_value(-1.0, 5) == 0.0
        assert r_p_value(0.0, 10) == pytest.approx(1.0)
        with pytest.raises(ValueError):
            r_p_value(0.5, 2)

    def test_in_unit_interval(self, rng):
        for _ in range(50):
            r = float(rng.uniform(-1, 1))
            p = r_p_value(r, int(rng.integers(3, 30)))
            assert 0.0 <= p <= 1.0


class TestCorrelationCell:
    def test_validation(self):
        CorrelationCell("im01", "speed", "la_x_mean", 0.5, 0.01, True)
        CorrelationCell("im01", "speed", "la_x_mean", None, None, False)
        with pytest.raises(ValueError):
            CorrelationCell("im01", "speed", "f", None, None, True)
        with pytest.raises(ValueError):
            CorrelationCell("im01", "speed", "f", 1.5, 0.0, True)
        with pytest.raises(ValueError):
            CorrelationCell("im01", "speed", "f", 0.5, 1.5, False)
        with pytest.raises(ValueError):
            CorrelationCell("im01", "speed", "f", 0.5, None, False)

    def test_defined_property(self):
        assert CorrelationCell("i", "speed", "f", 0.1, 0.9, False).defined
        assert not CorrelationCell("i", "speed", "f", None, None, False).defined


class TestFactorValue:
    def test_codings(self):
        s = FactorSetting(1.8, step_length="short", step_width="wider", thigh_lift="front")
        assert factor_value(s, "speed") == 1.8
        assert factor_value(s, "step_length") == 1.0
        assert factor_value(s, "step_width") == 4.0
        assert factor_value(s, "thigh_lift") == 3.0
        with pytest.raises(ValueError):
            factor_value(s, "stride")


def speed_dictionary():
    """Five speeds; feature f00 linear in speed, f01 constant, f02 noise."""
    rng = np.random.default_rng(3)
    entries = []
    for speed in (1.4, 1.8, 2.2, 2.6, 3.0):
        values = np.zeros((6, len(MINI_NAMES)))
        values[:, 0] = 2.0 * speed + 1.0 + 0.0 * rng.normal(size=6)
        values[:, 1] = 7.0
        values[:, 2] = rng.normal(size=6)
        values[:, 3] = -speed
        entries.append(cached_entry("im01", FactorSetting(speed), values))
    return Dictionary(entries)


class TestCorrelations:
    def test_linear_feature_correlates_perfectly(self):
        cells = factor_feature_correlations(
            speed_dictionary(), "im01", ("la_x_f00", "la_x_f03")
        )
        by_key = {(c.factor, c.feature): c for c in cells}
        up = by_key[("speed", "la_x_f00")]
        assert up.r == pytest.approx(1.0, abs=1e-12)
        assert up.p == 0.0 and up.significant
        down = by_key[("speed", "la_x_f03")]
        assert down.r == pytest.approx(-1.0, abs=1e-12)
        assert down.significant

    def test_constant_feature_flagged(self):
        cells = factor_feature_correlations(speed_dictionary(), "im01", ("la_x_f01",))
        cell = next(c for c in cells if c.factor == "speed")
        assert not cell.defined and not cell.significant

    def test_single_level_factors_flagged(self):
        # every entry walks at normal step length, width, and lift
        cells = factor_feature_correlations(speed_dictionary(), "im01", ("la_x_f00",))
        for cell in cells:
            if cell.factor != "speed":
                assert not cell.defined

    def test_matches_mean_then_pearson_oracle(self):
        d = speed_dictionary()
        cells = factor_feature_correlations(d, "im01", ("la_x_f02",))
        cell = next(c for c in cells if c.factor == "speed")
        speeds = [e.setting.speed_mph for e in d]
        means = [float(e.features().values[:, 2].mean()) for e in d]
        assert cell.r == pytest.approx(oracles.pearson_r(speeds, means), abs=1e-12)

    def test_cell_ordering_factor_major(self):
        cells = factor_feature_correlations(
            speed_dictionary(), "im01", ("la_x_f00", "la_x_f01")
        )
        assert [(c.factor, c.feature) for c in cells[:4]] == [
            ("speed", "la_x_f00"),
            ("speed", "la_x_f01"),
            ("step_length", "la_x_f00"),
            ("step_length", "la_x_f01"),
        ]
        assert len(cells) == 8

    def test_input_validation(self):
        d = speed_dictionary()
        with pytest.raises(ValueError, match="im99"):
            factor_feature_correlations(d, "im99", ("la_x_f00",))
        with pytest.raises(ValueError, match="unknown feature"):
            factor_feature_correlations(d, "im01", ("la_x_f99",))
        with pytest.raises(ValueError, match="alpha"):
            factor_feature_correlations(d, "im01", ("la_x_f00",), alpha=1.5)


def tone_recording(freq, rate=20.0, seconds=32.0, amp=1.0, subject="im01", seed=None):
    n = int(seconds * rate)
    t = np.arange(n) / rate
    x = amp * np.sin(2 * np.pi * freq * t)
    if seed is not None:
        x = x + np.random.default_rng(seed).normal(0, 0.05, n)
    channels = {("la", a): SignalChannel(x, rate) for a in ("x", "y", "z")}
    return IMURecording(subject, "entry", channels)


class TestOverlapHeatmap:
    def test_identical_recordings_overlap_fully(self):
        # tiling one pattern makes every window bit-identical, so all
        # intersections are exactly 1
        pattern = np.random.default_rng(4).uniform(-1, 1, 160)
        samples = np.tile(pattern, 4)
        channels = {("la", "x"): SignalChannel(samples, 20.0)}
        rec = IMURecording("im01", "entry", channels)
        grid = overlap_heatmap({"a": [rec], "b": [rec]}, window_s=8.0, bins=20)
        assert grid.values[0, 1] == 1.0
        assert grid.values[1, 0] == 1.0
        # four windows per level make 6 unordered same-level pairs
        assert grid.pair_counts[0, 0] == 6
        assert grid.values[0, 0] == 1.0

    def test_same_signal_tone_overlaps_nearly_fully(self):
        # windows of one stationary tone differ only by float jitter
        rec = tone_recording(1.0)
        grid = overlap_heatmap({"a": [rec], "b": [rec]}, window_s=8.0, bins=20)
        assert grid.values[0, 1] > 0.95

    def test_distinct_signals_overlap_partially(self):
        low = tone_recording(1.0, amp=1.0)
        high = tone_recording(1.3, amp=3.0, seed=5)
        grid = overlap_heatmap({"lo": [low], "hi": [high]}, bins=40)
        assert 0.0 <= grid.values[0, 1] < 1.0
        assert grid.values[0, 0] > grid.values[0, 1]

    def test_row_level_fixes_edges(self):
        # a narrow reference bins the wide level mostly out of range, so
        # the matrix is asymmetric
        narrow = tone_recording(1.0, amp=0.3)
        wide = tone_recording(1.0, amp=3.0)
        grid = overlap_heatmap({"n": [narrow], "w": [wide]}, bins=40)
        assert grid.values[0, 1] != pytest.approx(grid.values[1, 0])

    def test_single_window_leaves_diagonal_missing(self):
        rec = tone_recording(1.0, seconds=8.0)
        grid = overlap_heatmap({"a": [rec], "b": [rec]}, window_s=8.0)
        assert np.isnan(grid.values[0, 0]) and np.isnan(grid.values[1, 1])
        assert grid.pair_counts[0, 0] == 0
        assert grid.values[0, 1] == pytest.approx(1.0)

    def test_pair_counts(self):
        a = tone_recording(1.0, seconds=24.0)
        b = tone_recording(1.5, seconds=16.0)
        grid = overlap_heatmap({"a": [a], "b": [b]}, window_s=8.0)
        assert grid.pair_counts[0, 0] == 3  # C(3, 2)
        assert grid.pair_counts[0, 1] == 6  # 3 x 2
        assert grid.pair_counts[1, 1] == 1

    def test_enumeration_order_invariance(self):
        a1 = tone_recording(1.0, seconds=16.0, seed=1)
        a2 = tone_recording(1.0, seconds=16.0, seed=2)
        b = tone_recording(1.5, seed=3)
        fwd = overlap_heatmap({"a": [a1, a2], "b": [b]})
        rev = overlap_heatmap({"a": [a2, a1], "b": [b]})
        np.testing.assert_allclose(fwd.values, rev.values, atol=1e-12)

    def test_values_within_unit_interval(self):
        rng = np.random.default_rng(0)
        groups = {
            lvl: [tone_recording(f, seed=int(rng.integers(1e6)))]
            for lvl, f in (("a", 1.0), ("b", 1.7), ("c", 2.4))
        }
        grid = overlap_heatmap(groups)
        filled = grid.values[grid.pair_counts > 0]
        assert np.all(filled >= 0) and np.all(filled <= 1)

    def test_missing_channel(self):
        rec = tone_recording(1.0)
        with pytest.raises(DataError, match="gy"):
            overlap_heatmap({"a": [rec]}, channel=("gy", "x"))

    def test_empty_groups_rejected(self):
        with pytest.raises(ValueError):
            overlap_heatmap({})

    def test_grid_validation(self):
        with pytest.raises(ValueError):
            OverlapGrid("f", ("a",), np.array([[2.0]]), np.array([[1]]), 8.0, 80)
        with pytest.raises(ValueError):
            OverlapGrid("f", ("a",), np.array([[0.5]]), np.array([[0]]), 8.0, 80)


class TestGridsByFactor:
    def test_grouping_and_omission(self):
        entries = []
        k = 0
        for speed in (1.4, 2.2, 3.0):
            for sl in ("short", "long"):
                entries.append(
                    DictionaryEntry(
                        "im01",
                        FactorSetting(speed, step_length=sl),
                        tone_recording(1.0 + 0.2 * k, seconds=16.0, seed=k),
                    )
                )
                k += 1
        grids = grids_by_factor(Dictionary(entries), "im01", bins=20)
        assert set(grids) == {"speed", "step_length"}
        assert grids["speed"].levels == (1.4, 2.2, 3.0)
        assert grids["step_length"].levels == ("short", "long")
        assert grids["speed"].factor == "speed"

    def test_unknown_imitator(self):
        with pytest.raises(ValueError):
            grids_by_factor(Dictionary([]), "im01")


def toy_baseline():
    reports = {
        ("u01", "a", "knn"): EvalReport.from_counts(8, 2, 2, 8),
        ("u02", "a", "knn"): EvalReport.from_counts(6, 4, 4, 6),
        ("u01", "a", "svm"): EvalReport.from_counts(10, 0, 0, 10),
        ("u02", "a", "svm"): EvalReport.from_counts(10, 0, 2, 8),
        ("u01", "ag", "knn"): EvalReport.from_counts(9, 1, 1, 9),
        ("u02", "ag", "knn"): EvalReport.from_counts(9, 1, 3, 7),
    }
    return BaselineGrid(
        cells={k: (None, r) for k, r in reports.items()},
        users=("u01", "u02"),
        combos=("a", "ag"),
        kinds=("knn", "svm"),
    )


class TestRateMatrix:
    def test_means_and_missing(self):
        m = rate_matrix(toy_baseline(), "hter", sort_rows=False)
        assert m.row_labels == ("a", "ag")
        assert m.col_labels == ("knn", "svm")
        assert m.values[0, 0] == pytest.approx(0.3)  # (0.2 + 0.4) / 2
        assert m.values[0, 1] == pytest.approx(0.05)
        assert np.isnan(m.values[1, 1])  # no ag/svm cells

    def test_sorted_by_row_mean_oracle(self):
        grid = toy_baseline()
        unsorted = rate_matrix(grid, "hter", sort_rows=False)
        m = rate_matrix(grid, "hter")
        keys = [np.nanmean(r) for r in unsorted.values]
        expected = [unsorted.row_labels[i] for i in np.argsort(keys, kind="stable")]
        assert list(m.row_labels) == expected
        assert m.values[0, 0] <= np.nanmean(m.values[-1])

    def test_attack_matrix_sorted(self):
        report, _ = small_report()
        m = attack_rate_matrix(report, "dict_far")
        assert m.row_labels == ("a",)
        assert m.col_labels == ("knn",)
        assert m.values[0, 0] == pytest.approx((0.8 + 0.0) / 2)
        with pytest.raises(ValueError):
            attack_rate_matrix(report, "zero_far")


class TestRendering:
    def test_two_by_two_csv(self):
        m = LabeledMatrix(("r1", "r2"), ("c1", "c2"), [[0.1, 0.2], [np.nan, 1.0]])
        assert matrix_csv(m) == ",c1,c2\nr1,0.1000,0.2000\nr2,,1.0000\n"

    def test_correlations_csv(self):
        cells = [
            CorrelationCell("im01", "speed", "la_x_mean", 0.9, 0.0012345, True),
            CorrelationCell("im01", "step_length", "la_x_mean", None, None, False),
        ]
        lines = correlations_csv(cells).strip().split("\n")
        assert lines[0] == "imitator,factor,feature,r,p,significant"
        assert lines[1] == "im01,speed,la_x_mean,0.900000,0.0012345,true"
        assert lines[2] == "im01,step_length,la_x_mean,,,false"

    def test_color_ramp_endpoints(self):
        assert value_color(0.0) == "#f7fbff"
        assert value_color(1.0) == "#08306b"
        assert value_color(float("nan")) == "#cccccc"
        assert value_color(2.0) == "#08306b"  # clipped

    def test_svg_is_valid_xml_with_expected_cells(self):
        m = LabeledMatrix(("r1", "r2"), ("c1", "c2"), [[0.1, 0.2], [np.nan, 1.0]])
        svg = matrix_svg(m)
        root = ET.fromstring(svg)
        rects = [e for e in root.iter() if e.tag.endswith("rect")]
        assert len(rects) == 4
        texts = [e for e in root.iter() if e.tag.endswith("text")]
        # 4 labels + 3 value annotations (the NaN cell has none)
        assert len(texts) == 7

    def test_deterministic_bytes(self, tmp_path):
        m = LabeledMatrix(("r",), ("c",), [[0.5]])
        for fmt in ("csv", "svg"):
            p1 = render(m, fmt, tmp_path / f"one.{fmt}")
            p2 = render(m, fmt, tmp_path / f"two.{fmt}")
            assert p1.read_bytes() == p2.read_bytes()

    def test_render_overlap_grid_and_correlations(self, tmp_path):
        rec = tone_recording(1.0)
        grid = overlap_heatmap({"a": [rec], "b": [rec]}, bins=10)
        out = render(grid, "csv", tmp_path / "grid.csv")
        first = out.read_text().split("\n")[0]
        assert first == ",a,b"
        cells = [CorrelationCell("im01", "speed", "f", 0.5, 0.1, False)]
        render(cells, "csv", tmp_path / "corr.csv")
        with pytest.raises(ValueError, match="CSV only"):
            render(cells, "svg", tmp_path / "corr.svg")

    def test_render_errors(self, tmp_path):
        m = LabeledMatrix(("r",), ("c",), [[0.5]])
        with pytest.raises(ValueError, match="format"):
            render(m, "png", tmp_path / "m.png")
        with pytest.raises(ValueError, match="cannot render"):
            render({"not": "a grid"}, "csv", tmp_path / "x.csv")
        target = tmp_path / "file.csv"
        target.write_text("occupied")
        with pytest.raises(DataError, match="cannot write"):
            render(m, "csv", target / "nested.csv")

    def test_matrix_from_grid_labels(self):
        grid = OverlapGrid(
            "speed",
            (1.4, 2.0),
            np.array([[np.nan, 0.5], [0.5, np.nan]]),
            np.array([[0, 1], [1, 0]]),
            8.0,
            80,
        )
        m = matrix_from_grid(grid)
        assert m.row_labels == ("1.4", "2")


class TestCutWindows:
    def test_window_arithmetic(self):
        rec = tone_recording(1.0, rate=10.0, seconds=25.0)
        wins = cut_windows([rec], ("la", "x"), 8.0)
        assert len(wins) == 3
        assert all(len(w) == 80 for w in wins)
        # remainder samples are dropped, not wrapped
        np.testing.assert_array_equal(wins[0], rec.channels[("la", "x")].samples[:80])
