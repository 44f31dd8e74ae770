import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from gaitdict.selection import (
    MutualInfoSelector,
    assign_bins,
    mi_scores,
    mutual_information,
    quantile_bin_edges,
    select_top_k,
    sensor_groups,
)


class TestBinning:
    def test_deciles_of_uniform_grid(self):
        values = np.arange(100.0)
        edges = quantile_bin_edges(values, 10)
        ids = assign_bins(values, edges)
        counts = np.bincount(ids, minlength=10)
        assert np.array_equal(counts, np.full(10, 10))

    def test_binary_feature_gets_two_bins(self):
        values = np.array([0.0] * 270 + [1.0] * 270)
        ids = assign_bins(values, quantile_bin_edges(values, 10))
        assert len(np.unique(ids)) == 2

    def test_edge_sample_falls_above(self):
        ids = assign_bins(np.array([1.0, 2.0, 3.0]), np.array([2.0]))
        assert list(ids) == [0, 1, 1]

    def test_rejects_single_bin(self):
        with pytest.raises(ValueError):
            quantile_bin_edges(np.arange(10.0), 1)


class TestMutualInformation:
    def test_feature_identical_to_label_hits_label_entropy(self):
        y = np.array(["gen"] * 270 + ["imp"] * 270)
        x = (y == "gen").astype(float)
        assert mutual_information(x, y) == pytest.approx(math.log(2), abs=1e-12)

    def test_unbalanced_identical_feature(self):
        y = np.array(["gen"] * 100 + ["imp"] * 440)
        x = (y == "imp").astype(float)
        assert mutual_information(x, y) == pytest.approx(oracles.entropy(list(y)), abs=1e-12)

    def test_constant_feature_is_zero(self):
        y = np.array(["gen", "imp"] * 50)
        assert mutual_information(np.full(100, 7.0), y) == 0.0

    def test_independent_feature_is_small(self):
        rng = np.random.default_rng(3)
        y = np.array(["gen", "imp"] * 1000)
        x = rng.normal(size=2000)
        mi = mutual_information(x, y)
        assert 0.0 <= mi < 0.05

    def test_matches_counting_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            y = rng.choice(["gen", "imp"], size=200)
            x = rng.normal(size=200) + (y == "gen") * rng.uniform(0, 2)
            ids = assign_bins(x, quantile_bin_edges(x, 10))
            expected = oracles.plugin_mutual_information(list(ids), list(y))
            assert mutual_information(x, y) == pytest.approx(expected, abs=1e-12)

    def test_invariant_under_increasing_affine_maps(self):
        rng = np.random.default_rng(5)
        y = rng.choice(["gen", "imp"], size=300)
        x = rng.normal(size=300) + (y == "imp") * 0.8
        base = mutual_information(x, y)
        for scale, shift in ((2.0, 1.0), (0.25, -3.0), (10.0, 0.0)):
            assert mutual_information(scale * x + shift, y) == pytest.approx(base, abs=1e-12)

    @given(st.lists(st.floats(min_value=-100, max_value=100), min_size=10, max_size=80))
    @settings(max_examples=150)
    def test_nonnegative(self, values):
        y = np.array((["gen", "imp"] * 40)[: len(values)])
        assert mutual_information(np.array(values), y) >= 0.0

    def test_bounded_by_label_entropy(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            y = rng.choice(["gen", "imp"], size=150, p=[0.3, 0.7])
            x = rng.normal(size=150) * (1 + (y == "gen"))
            assert mutual_information(x, y) <= oracles.entropy(list(y)) + 1e-12

    def test_rejects_misaligned(self):
        with pytest.raises(ValueError):
            mutual_information(np.zeros(5), np.array(["gen"] * 4))


class TestTopK:
    def test_tie_keeps_lower_index(self):
        assert list(select_top_k(np.array([3.0, 1.0, 3.0, 2.0]), 1)) == [0]
        assert list(select_top_k(np.array([3.0, 1.0, 3.0, 2.0]), 2)) == [0, 2]

    def test_all_ties(self):
        assert list(select_top_k(np.ones(5), 3)) == [0, 1, 2]

    def test_k_larger_than_width_keeps_all(self):
        assert list(select_top_k(np.array([1.0, 2.0]), 30)) == [0, 1]

    def test_result_is_sorted_ascending(self):
        scores = np.array([0.1, 0.9, 0.2, 0.8, 0.3])
        assert list(select_top_k(scores, 3)) == [1, 3, 4]

    def test_rejects_nonpositive_k(self):
        with pytest.raises(ValueError):
            select_top_k(np.ones(3), 0)

    @given(
        st.lists(st.floats(min_value=0, max_value=10), min_size=1, max_size=50),
        st.integers(min_value=1, max_value=60),
    )
    def test_selected_scores_dominate_rest(self, scores, k):
        scores = np.array(scores)
        chosen = select_top_k(scores, k)
        assert len(chosen) == min(k, scores.size)
        rest = np.setdiff1d(np.arange(scores.size), chosen)
        if rest.size and chosen.size:
            assert scores[chosen].min() >= scores[rest].max()


class TestSelector:
    @pytest.fixture
    def data(self):
        rng = np.random.default_rng(17)
        y = np.array(["gen"] * 120 + ["imp"] * 120)
        informative = rng.normal(size=(240, 4)) + (y == "gen")[:, None] * 2.0
        noise = rng.normal(size=(240, 8))
        return np.hstack([informative, noise]), y

    def test_single_group_selection(self, data):
        X, y = data
        sel = MutualInfoSelector(k=4).fit(X, y)
        assert set(sel.selected_indices_) == {0, 1, 2, 3}
        assert sel.transform(X).shape == (240, 4)

    def test_grouped_selection_takes_k_per_group(self, data):
        X, y = data
        groups = ["la"] * 6 + ["gy"] * 6
        sel = MutualInfoSelector(k=2, groups=groups).fit(X, y)
        assert len(sel.selected_indices_) == 4
        assert sum(i < 6 for i in sel.selected_indices_) == 2
        assert sum(i >= 6 for i in sel.selected_indices_) == 2

    def test_transform_preserves_column_order(self, data):
        X, y = data
        sel = MutualInfoSelector(k=3).fit(X, y)
        idx = sel.selected_indices_
        assert np.array_equal(sel.transform(X), X[:, idx])
        assert np.all(np.diff(idx) > 0)

    def test_deterministic(self, data):
        X, y = data
        a = MutualInfoSelector(k=5).fit(X, y).selected_indices_
        b = MutualInfoSelector(k=5).fit(X, y).selected_indices_
        assert np.array_equal(a, b)

    def test_transform_checks_width(self, data):
        X, y = data
        sel = MutualInfoSelector(k=3).fit(X, y)
        with pytest.raises(ValueError):
            sel.transform(X[:, :5])

    def test_get_params_round_trip(self):
        sel = MutualInfoSelector(k=7, bins=12)
        params = sel.get_params()
        assert params["k"] == 7 and params["bins"] == 12
        clone = MutualInfoSelector(**params)
        assert clone.k == 7

    def test_groups_length_checked(self, data):
        X, y = data
        with pytest.raises(ValueError):
            MutualInfoSelector(k=2, groups=["la"] * 5).fit(X, y)

    def test_sensor_groups_from_names(self):
        names = ("la_x_mean", "la_m_fstd", "gy_z_q2")
        assert sensor_groups(names) == ["la", "la", "gy"]
