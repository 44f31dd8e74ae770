"""Mutual-information feature scoring and top-k selection.

Scores are plug-in estimates in nats: each feature is discretized into
equal-frequency bins (quantile edges, samples assigned with a right-closed
rule) and MI is computed from the joint bin/label counts. Selection keeps
the k best-scoring features, ties broken by ascending column index, and is
applied per sensor group before fusing sensors.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

DEFAULT_TOP_K = 30
DEFAULT_MI_BINS = 10


def quantile_bin_edges(values: np.ndarray, bins: int = DEFAULT_MI_BINS) -> np.ndarray:
    """Inner edges of an equal-frequency binning (bins - 1 quantiles)."""
    if bins < 2:
        raise ValueError(f"need at least 2 bins, got {bins}")
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1 or values.size == 0:
        raise ValueError("values must be a non-empty 1-D array")
    return np.quantile(values, np.arange(1, bins) / bins)


def assign_bins(values: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """Bin ids in 0..len(edges); a sample equal to an edge falls above it."""
    return np.searchsorted(edges, np.asarray(values, dtype=np.float64), side="right")


def mutual_information(
    values: np.ndarray, labels: np.ndarray, bins: int = DEFAULT_MI_BINS
) -> float:
    """Plug-in MI between one binned feature and the labels, in nats."""
    values = np.asarray(values, dtype=np.float64)
    labels = np.asarray(labels)
    if values.ndim != 1 or values.shape != labels.shape:
        raise ValueError("values and labels must be aligned 1-D arrays")
    if values.size == 0:
        raise ValueError("cannot score an empty feature")
    ids = assign_bins(values, quantile_bin_edges(values, bins))
    return _discrete_mi(ids, labels)


def _discrete_mi(ids: np.ndarray, labels: np.ndarray) -> float:
    n = ids.size
    _, bi = np.unique(ids, return_inverse=True)
    _, li = np.unique(labels, return_inverse=True)
    joint = np.zeros((int(bi.max()) + 1, int(li.max()) + 1))
    np.add.at(joint, (bi, li), 1.0)
    pj = joint / n
    marginal = pj.sum(axis=1, keepdims=True) @ pj.sum(axis=0, keepdims=True)
    mask = pj > 0
    mi = float(np.sum(pj[mask] * np.log(pj[mask] / marginal[mask])))
    return max(0.0, mi)


def mi_scores(X: np.ndarray, y: np.ndarray, bins: int = DEFAULT_MI_BINS) -> np.ndarray:
    """Per-column MI against the labels."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("X must be 2-D")
    return np.array([mutual_information(X[:, j], y, bins) for j in range(X.shape[1])])


def select_top_k(scores: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k best scores, ascending; ties keep the lower index."""
    scores = np.asarray(scores, dtype=np.float64)
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    order = np.lexsort((np.arange(scores.size), -scores))
    return np.sort(order[: min(k, scores.size)])


def sensor_groups(names: Sequence[str]) -> list[str]:
    """Group key per column from ``<sensor>_<axis>_<stem>`` names."""
    return [name.split("_", 1)[0] for name in names]


class MutualInfoSelector(BaseEstimator, TransformerMixin):
    """Keep the top-k features by plug-in MI, within each group separately.

    ``groups`` assigns a group key to every column (e.g. the sensor the
    column came from); None treats all columns as one group. Fitting on
    enrollment data only, then transforming everything else, keeps the
    selection free of test-session leakage.
    """

    def __init__(self, k: int = DEFAULT_TOP_K, bins: int = DEFAULT_MI_BINS, groups=None):
        self.k = k
        self.bins = bins
        self.groups = groups

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.groups is not None and len(self.groups) != X.shape[1]:
            raise ValueError("groups must assign a key to every column")
        self.scores_ = mi_scores(X, y, self.bins)
        if self.groups is None:
            selected = select_top_k(self.scores_, self.k)
        else:
            keys = list(dict.fromkeys(self.groups))
            parts = []
            for key in keys:
                cols = np.flatnonzero([g == key for g in self.groups])
                parts.append(cols[select_top_k(self.scores_[cols], self.k)])
            selected = np.sort(np.concatenate(parts))
        self.selected_indices_ = selected
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "selected_indices_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, selector was fit on {self.n_features_in_}"
            )
        return X[:, self.selected_indices_]
