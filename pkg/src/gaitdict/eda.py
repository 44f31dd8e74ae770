"""Exploratory analyses over a gait dictionary, plus report rendering.

Two analyses: Pearson correlation between each walking factor and the
per-entry mean of chosen features, and heatmaps of mean histogram
intersection between windows recorded at different factor levels. Both
work directly on dictionary entries. Rendering covers the grids this
package produces (overlap grids, rate matrices from a baseline sweep or
an attack report) as CSV, with an optional SVG heatmap view.

Ordinal factor levels are rank-coded 1..4 for correlation; speed is used
numerically. Histogram edges always come from the reference (row) level,
and the intersection keeps its asymmetric sum(min)/sum(P) normalization.

SVG color ramp, stated for reproducibility: a value v in [0, 1] maps
linearly from rgb(247, 251, 255) at v = 0 to rgb(8, 48, 107) at v = 1,
each channel rounded to nearest with ties to even; missing cells are
drawn in #cccccc.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np
from scipy import stats

from .authbench import BaselineGrid
from .dictattack import (
    STEP_LENGTH_LEVELS,
    STEP_WIDTH_LEVELS,
    THIGH_LIFT_LEVELS,
    AttackReport,
    Dictionary,
)
from .errors import DataError
from .features import histogram, intersection
from .signal import DEFAULT_WINDOW_S, IMURecording

DEFAULT_ALPHA = 0.05
DEFAULT_OVERLAP_BINS = 80
DEFAULT_CHANNEL = ("la", "x")

FACTORS = ("speed", "step_length", "step_width", "thigh_lift")

_ORDINAL_LEVELS = {
    "step_length": STEP_LENGTH_LEVELS,
    "step_width": STEP_WIDTH_LEVELS,
    "thigh_lift": THIGH_LIFT_LEVELS,
}


def factor_value(setting, factor: str) -> float:
    """Numeric coding of one factor: speed as-is, ordinals ranked 1..4."""
    if factor == "speed":
        return setting.speed_mph
    try:
        levels = _ORDINAL_LEVELS[factor]
    except KeyError:
        raise ValueError(f"unknown factor {factor!r}") from None
    return float(levels.index(getattr(setting, factor)) + 1)


def pearson_r(x: np.ndarray, y: np.ndarray) -> float | None:
    """Plain Pearson coefficient; None when either side is constant."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or x.size < 2:
        raise ValueError("need two aligned 1-D samples")
    cx = x - x.mean()
    cy = y - y.mean()
    sx = float(np.sqrt(np.sum(cx**2)))
    sy = float(np.sqrt(np.sum(cy**2)))
    if sx == 0.0 or sy == 0.0:
        return None
    return float(np.sum(cx * cy) / (sx * sy))


def r_p_value(r: float, n: int) -> float:
    """Two-sided p for a Pearson r via the exact t-transform, n - 2 dof."""
    if n < 3:
        raise ValueError("p-value needs at least 3 points")
    denominator = max(0.0, 1.0 - r * r)
    if denominator == 0.0:
        return 0.0
    t = abs(r) * np.sqrt((n - 2) / denominator)
    return float(2.0 * stats.t.sf(t, df=n - 2))


@dataclass(frozen=True)
class CorrelationCell:
    """One (imitator, factor, feature) correlation; r is None when undefined."""

    imitator_id: str
    factor: str
    feature: str
    r: float | None
    p: float | None
    significant: bool

    def __post_init__(self):
        if (self.r is None) != (self.p is None):
            raise ValueError("r and p must be both present or both absent")
        if self.r is None:
            if self.significant:
                raise ValueError("an undefined correlation cannot be significant")
            return
        if abs(self.r) > 1 + 1e-12:
            raise ValueError(f"|r| must be <= 1, got {self.r}")
        if not 0 <= self.p <= 1:
            raise ValueError(f"p must be in [0, 1], got {self.p}")

    @property
    def defined(self) -> bool:
        return self.r is not None


def factor_feature_correlations(
    dictionary: Dictionary,
    imitator_id: str,
    features,
    alpha: float = DEFAULT_ALPHA,
    window: float | None = None,
    slide: float | None = None,
) -> list[CorrelationCell]:
    """Correlate every factor with per-entry mean feature values.

    A factor observed at fewer than 3 distinct levels across the
    imitator's entries, or a constant feature, yields flagged cells
    (r = p = None) rather than a fabricated number. Cells come out in
    factor-major order, features in the order given.
    """
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    entries = [e for e in dictionary if e.imitator_id == imitator_id]
    if not entries:
        raise ValueError(f"dictionary has no entries for imitator {imitator_id!r}")
    features = tuple(features)
    kwargs = {}
    if window is not None:
        kwargs["window"] = window
    if slide is not None:
        kwargs["slide"] = slide
    matrices = [e.features(**kwargs) for e in entries]
    names = matrices[0].names
    missing = [f for f in features if f not in names]
    if missing:
        raise ValueError(f"unknown feature names: {missing}")
    columns = [names.index(f) for f in features]
    means = np.array([[m.values[:, c].mean() for c in columns] for m in matrices])

    cells = []
    for factor in FACTORS:
        xs = np.array([factor_value(e.setting, factor) for e in entries])
        enough_levels = np.unique(xs).size >= 3
        for fi, feature in enumerate(features):
            r = pearson_r(xs, means[:, fi]) if enough_levels else None
            if r is None:
                cells.append(CorrelationCell(imitator_id, factor, feature, None, None, False))
            else:
                p = r_p_value(r, len(entries))
                cells.append(
                    CorrelationCell(imitator_id, factor, feature, r, p, p < alpha)
                )
    return cells


@dataclass(frozen=True)
class OverlapGrid:
    """Level-by-level mean window-histogram intersections for one factor.

    values[i, j] averages intersection(row window, column window) over all
    pairs, with bin edges fixed by level i's pooled span; diagonal cells
    pair time-disjoint windows of the same level. NaN marks a cell with no
    eligible pair.
    """

    factor: str
    levels: tuple
    values: np.ndarray
    pair_counts: np.ndarray
    window_s: float
    bins: int

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        counts = np.asarray(self.pair_counts, dtype=np.int64)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "pair_counts", counts)
        object.__setattr__(self, "levels", tuple(self.levels))
        k = len(self.levels)
        if values.shape != (k, k) or counts.shape != (k, k):
            raise ValueError("matrix shapes must match the level count")
        filled = values[counts > 0]
        if np.any(filled < -1e-12) or np.any(filled > 1 + 1e-12):
            raise ValueError("overlap values must lie in [0, 1]")
        if not np.all(np.isnan(values[counts == 0])):
            raise ValueError("cells without pairs must be NaN")


def cut_windows(recordings, channel, window_s: float) -> list[np.ndarray]:
    """Non-overlapping windows of one channel, pooled across recordings."""
    out = []
    for recording in recordings:
        ch = recording.channels.get(tuple(channel))
        if ch is None:
            raise DataError(f"recording has no {tuple(channel)} channel")
        w = max(1, round(window_s * ch.sampling_rate))
        for start in range(0, len(ch) - w + 1, w):
            out.append(ch.samples[start : start + w])
    return out


def overlap_heatmap(
    groups: dict,
    channel=DEFAULT_CHANNEL,
    window_s: float = DEFAULT_WINDOW_S,
    bins: int = DEFAULT_OVERLAP_BINS,
    factor: str = "",
) -> OverlapGrid:
    """Mean histogram intersection between windows grouped by factor level.

    groups maps a level label to that level's recordings; label order is
    kept. Cell (i, j) needs a window on each side, and the diagonal needs
    two same-level windows; anything short of that is NaN, not an error.
    """
    if bins < 1:
        raise ValueError(f"bin count must be >= 1, got {bins}")
    levels = tuple(groups)
    if not levels:
        raise ValueError("no factor levels given")
    windows = {level: cut_windows(groups[level], channel, window_s) for level in levels}
    k = len(levels)
    values = np.full((k, k), np.nan)
    counts = np.zeros((k, k), dtype=np.int64)
    for i, row_level in enumerate(levels):
        row = windows[row_level]
        if not row:
            continue
        pooled = np.concatenate(row)
        lo, hi = float(pooled.min()), float(pooled.max())
        row_hists = [histogram(w, bins, lo, hi) for w in row]
        for j, col_level in enumerate(levels):
            if i == j:
                pairs = [
                    intersection(a, b)
                    for a, b in itertools.combinations(row_hists, 2)
                ]
            else:
                col_hists = [histogram(w, bins, lo, hi) for w in windows[col_level]]
                pairs = [intersection(a, b) for a in row_hists for b in col_hists]
            if pairs:
                values[i, j] = float(np.mean(pairs))
                counts[i, j] = len(pairs)
    return OverlapGrid(factor, levels, values, counts, window_s, bins)


def grids_by_factor(
    dictionary: Dictionary,
    imitator_id: str,
    channel=DEFAULT_CHANNEL,
    window_s: float = DEFAULT_WINDOW_S,
    bins: int = DEFAULT_OVERLAP_BINS,
) -> dict[str, OverlapGrid]:
    """One overlap grid per factor for one imitator's dictionary entries.

    For each factor, entries are grouped by their level of that factor in
    canonical level order; factors observed at fewer than 2 levels are
    omitted.
    """
    entries = [e for e in dictionary if e.imitator_id == imitator_id]
    if not entries:
        raise ValueError(f"dictionary has no entries for imitator {imitator_id!r}")
    out = {}
    for factor in FACTORS:
        groups = {}
        if factor == "speed":
            for level in sorted({e.setting.speed_mph for e in entries}):
                groups[level] = [
                    e.recording for e in entries if e.setting.speed_mph == level
                ]
        else:
            for level in _ORDINAL_LEVELS[factor]:
                recs = [
                    e.recording
                    for e in entries
                    if getattr(e.setting, factor) == level
                ]
                if recs:
                    groups[level] = recs
        if len(groups) >= 2:
            out[factor] = overlap_heatmap(groups, channel, window_s, bins, factor)
    return out


@dataclass(frozen=True)
class LabeledMatrix:
    """A rectangular grid of rates with row and column labels."""

    row_labels: tuple
    col_labels: tuple
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "row_labels", tuple(str(l) for l in self.row_labels))
        object.__setattr__(self, "col_labels", tuple(str(l) for l in self.col_labels))
        if values.shape != (len(self.row_labels), len(self.col_labels)):
            raise ValueError("value shape must match the labels")


def matrix_from_grid(grid: OverlapGrid) -> LabeledMatrix:
    labels = tuple(f"{l:g}" if isinstance(l, float) else str(l) for l in grid.levels)
    return LabeledMatrix(labels, labels, grid.values)


def rate_matrix(grid: BaselineGrid, metric: str = "hter", sort_rows: bool = True) -> LabeledMatrix:
    """Combos-by-kinds matrix of a zero-effort metric, averaged over users.

    With sort_rows, combos are ordered by their row mean ascending (NaN
    rows last), the layout used for sweep summaries.
    """
    values = np.array(
        [
            [
                np.nan if (m := grid.mean_rate(combo, kind, metric)) is None else m
                for kind in grid.kinds
            ]
            for combo in grid.combos
        ]
    )
    rows = tuple(grid.combos)
    if sort_rows:
        with np.errstate(invalid="ignore"):
            keys = np.array(
                [np.nan if np.all(np.isnan(r)) else np.nanmean(r) for r in values]
            )
        order = np.argsort(np.where(np.isnan(keys), np.inf, keys), kind="stable")
        values = values[order]
        rows = tuple(rows[i] for i in order)
    return LabeledMatrix(rows, tuple(grid.kinds), values)


def attack_rate_matrix(
    report: AttackReport, metric: str = "dict_hter", sort_rows: bool = True
) -> LabeledMatrix:
    """Same layout as rate_matrix but over a dictionary-attack report."""
    if metric not in ("dict_far", "dict_hter"):
        raise ValueError(f"unknown attack metric {metric!r}")
    combos = tuple(sorted({c for _, c, _ in report.rows}, key=lambda c: (len(c), c)))
    kinds = tuple(sorted({k for _, _, k in report.rows}))
    values = np.full((len(combos), len(kinds)), np.nan)
    for i, combo in enumerate(combos):
        for j, kind in enumerate(kinds):
            cells = [
                getattr(cell, metric)
                for (u, c, k), cell in report.rows.items()
                if (c, k) == (combo, kind)
            ]
            if cells:
                values[i, j] = float(np.mean(cells))
    matrix = LabeledMatrix(combos, kinds, values)
    if sort_rows:
        with np.errstate(invalid="ignore"):
            keys = np.array(
                [np.nan if np.all(np.isnan(r)) else np.nanmean(r) for r in values]
            )
        order = np.argsort(np.where(np.isnan(keys), np.inf, keys), kind="stable")
        matrix = LabeledMatrix(
            tuple(combos[i] for i in order), kinds, values[order]
        )
    return matrix


def matrix_csv(matrix: LabeledMatrix) -> str:
    """Header row of column labels, then one row per row label; NaN is empty."""
    lines = ["," + ",".join(matrix.col_labels)]
    for label, row in zip(matrix.row_labels, matrix.values):
        cells = ["" if np.isnan(v) else f"{v:.4f}" for v in row]
        lines.append(",".join([label] + cells))
    return "\n".join(lines) + "\n"


def correlations_csv(cells) -> str:
    """One row per correlation cell; undefined cells have empty r and p."""
    lines = ["imitator,factor,feature,r,p,significant"]
    for cell in cells:
        r = "" if cell.r is None else f"{cell.r:.6f}"
        p = "" if cell.p is None else f"{cell.p:.6g}"
        lines.append(
            f"{cell.imitator_id},{cell.factor},{cell.feature},{r},{p},"
            f"{'true' if cell.significant else 'false'}"
        )
    return "\n".join(lines) + "\n"


_RAMP_LO = (247, 251, 255)
_RAMP_HI = (8, 48, 107)
_MISSING_COLOR = "#cccccc"

CELL_W, CELL_H = 64, 26
GUTTER_LEFT, GUTTER_TOP = 90, 30


def value_color(v: float) -> str:
    """The documented ramp: linear in v, clipped to [0, 1]."""
    if np.isnan(v):
        return _MISSING_COLOR
    v = min(1.0, max(0.0, float(v)))
    rgb = (round(lo + v * (hi - lo)) for lo, hi in zip(_RAMP_LO, _RAMP_HI))
    return "#" + "".join(f"{c:02x}" for c in rgb)


def matrix_svg(matrix: LabeledMatrix) -> str:
    """Self-contained heatmap SVG; identical input gives identical bytes."""
    rows, cols = matrix.values.shape
    width = GUTTER_LEFT + cols * CELL_W
    height = GUTTER_TOP + rows * CELL_H
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="monospace" font-size="11">'
    ]
    for j, label in enumerate(matrix.col_labels):
        x = GUTTER_LEFT + j * CELL_W + CELL_W // 2
        parts.append(
            f'<text x="{x}" y="{GUTTER_TOP - 10}" text-anchor="middle">{escape(label)}</text>'
        )
    for i, label in enumerate(matrix.row_labels):
        y = GUTTER_TOP + i * CELL_H + CELL_H // 2 + 4
        parts.append(
            f'<text x="{GUTTER_LEFT - 6}" y="{y}" text-anchor="end">{escape(label)}</text>'
        )
    for i in range(rows):
        for j in range(cols):
            v = matrix.values[i, j]
            x = GUTTER_LEFT + j * CELL_W
            y = GUTTER_TOP + i * CELL_H
            parts.append(
                f'<rect x="{x}" y="{y}" width="{CELL_W}" height="{CELL_H}" '
                f'fill="{value_color(v)}" stroke="#ffffff"/>'
            )
            if not np.isnan(v):
                shade = "#ffffff" if v > 0.6 else "#1a1a1a"
                parts.append(
                    f'<text x="{x + CELL_W // 2}" y="{y + CELL_H // 2 + 4}" '
                    f'text-anchor="middle" fill="{shade}">{v:.4f}</text>'
                )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render(obj, fmt: str, path) -> Path:
    """Write a grid, matrix, or correlation list as CSV or SVG.

    CSV is the authoritative format; correlation lists have no SVG view.
    """
    if fmt not in ("csv", "svg"):
        raise ValueError(f"format must be csv or svg, got {fmt!r}")
    if isinstance(obj, OverlapGrid):
        obj = matrix_from_grid(obj)
    if isinstance(obj, LabeledMatrix):
        content = matrix_csv(obj) if fmt == "csv" else matrix_svg(obj)
    elif isinstance(obj, (list, tuple)) and all(
        isinstance(c, CorrelationCell) for c in obj
    ):
        if fmt == "svg":
            raise ValueError("correlation lists render as CSV only")
        content = correlations_csv(obj)
    else:
        raise ValueError(f"cannot render object of type {type(obj).__name__}")
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(content)
    except OSError as exc:
        raise DataError(f"cannot write report to {path}: {exc}") from exc
    return path
