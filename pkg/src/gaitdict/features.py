"""Per-window feature extraction and histogram utilities.

Every channel window maps to 34 values: 30 time-domain features followed by
4 frequency-domain features. With the four axes (x, y, z, m) that is 136
values per sensor. Name schema is ``<sensor>_<axis>_<stem>`` in a fixed
order: sensor, then axis, then feature index.

Conventions for the degenerate cases:

* skewness is m3 / m2**1.5 and kurtosis is excess kurtosis m4 / m2**2 - 3,
  both defined as 0 when the second central moment is 0;
* mean crossings count strict sign changes of (x - mean), exact zeros
  treated as positive;
* peaks are strict interior local maxima;
* quantiles use linear interpolation;
* strikes are the longest runs strictly below / strictly above the mean;
* the 16 equal-width bins span the window's own [min, max], with every
  sample in bin 0 when min == max.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .signal import AXES, SENSORS, Frame

GEN = "gen"
IMP = "imp"

TIME_FEATURES = (
    "mean",
    "std",
    "mac",
    "mad",
    "skew",
    "kurt",
    "energy",
    "crossings",
    "peaks",
    "q1",
    "q2",
    "q3",
    "strike_below",
    "strike_above",
) + tuple(f"bin{i:02d}" for i in range(16))

FREQ_FEATURES = ("fq1", "fq2", "fq3", "fstd")

CHANNEL_FEATURES = TIME_FEATURES + FREQ_FEATURES

N_TIME_FEATURES = len(TIME_FEATURES)
N_FREQ_FEATURES = len(FREQ_FEATURES)
N_CHANNEL_FEATURES = len(CHANNEL_FEATURES)
N_SENSOR_FEATURES = N_CHANNEL_FEATURES * len(AXES)


class Provenance(NamedTuple):
    """Where a feature vector came from."""

    subject: str
    session: str
    window: int


def extract_time_features(window: np.ndarray) -> np.ndarray:
    """The 30 time-domain features of one channel window, in schema order."""
    x = np.asarray(window, dtype=np.float64)
    n = x.size
    if n < 2:
        raise ValueError(f"window too short for time features: {n} < 2")

    mean = float(np.mean(x))
    centered = x - mean
    m2 = float(np.mean(centered**2))
    std = float(np.sqrt(m2))
    mac = float(np.mean(np.abs(np.diff(x))))
    mad = float(np.mean(np.abs(centered)))
    if m2 == 0.0:
        skew = 0.0
        kurt = 0.0
    else:
        # standardized form m3/m2**1.5, m4/m2**2 - 3 without underflowing
        # the moment powers for tiny-variance windows
        z = centered / std
        skew = float(np.mean(z**3))
        kurt = float(np.mean(z**4)) - 3.0
    energy = float(np.mean(x**2))

    signs = np.where(centered >= 0, 1, -1)
    crossings = int(np.sum(signs[1:] != signs[:-1]))

    peaks = int(np.sum((x[1:-1] > x[:-2]) & (x[1:-1] > x[2:]))) if n >= 3 else 0

    q1, q2, q3 = np.percentile(x, [25.0, 50.0, 75.0])

    strike_below = _longest_run(centered < 0)
    strike_above = _longest_run(centered > 0)

    lo = float(np.min(x))
    hi = float(np.max(x))
    if lo == hi:
        bins = np.zeros(16)
        bins[0] = n
    else:
        bins = np.histogram(x, bins=16, range=(lo, hi))[0].astype(np.float64)

    head = [
        mean,
        std,
        mac,
        mad,
        skew,
        kurt,
        energy,
        float(crossings),
        float(peaks),
        float(q1),
        float(q2),
        float(q3),
        float(strike_below),
        float(strike_above),
    ]
    return np.concatenate([head, bins])


def extract_freq_features(window: np.ndarray) -> np.ndarray:
    """Quartiles and std of the one-sided DFT amplitude spectrum, DC excluded."""
    x = np.asarray(window, dtype=np.float64)
    if x.size < 4:
        raise ValueError(f"window too short for frequency features: {x.size} < 4")
    amps = np.abs(np.fft.rfft(x))[1:]
    q1, q2, q3 = np.percentile(amps, [25.0, 50.0, 75.0])
    return np.array([q1, q2, q3, float(np.std(amps))])


def extract_channel_features(window: np.ndarray) -> np.ndarray:
    """All 34 features of one channel window."""
    return np.concatenate([extract_time_features(window), extract_freq_features(window)])


def _longest_run(mask: np.ndarray) -> int:
    best = run = 0
    for hit in mask:
        run = run + 1 if hit else 0
        if run > best:
            best = run
    return best


def feature_names(sensors: Sequence[str]) -> tuple[str, ...]:
    """Full name schema for a sensor subset, in canonical order."""
    ordered = canonical_sensors(sensors)
    return tuple(
        f"{sensor}_{axis}_{stem}"
        for sensor in ordered
        for axis in AXES
        for stem in CHANNEL_FEATURES
    )


def canonical_sensors(sensors: Sequence[str]) -> tuple[str, ...]:
    chosen = set(sensors)
    if not chosen:
        raise ValueError("sensor set is empty")
    unknown = chosen - set(SENSORS)
    if unknown:
        raise ValueError(f"unknown sensors: {sorted(unknown)}")
    return tuple(s for s in SENSORS if s in chosen)


@dataclass(frozen=True)
class FeatureVector:
    """One window's features with aligned names, label, and provenance."""

    values: np.ndarray
    names: tuple[str, ...]
    label: str | None = None
    provenance: Provenance | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        if values.ndim != 1 or values.size != len(self.names):
            raise ValueError("values and names are not aligned")
        if len(set(self.names)) != len(self.names):
            raise ValueError("feature names are not unique")
        if self.label is not None and self.label not in (GEN, IMP):
            raise ValueError(f"label must be {GEN!r} or {IMP!r}, got {self.label!r}")


def featurize(frame: Frame, sensors: Sequence[str]) -> FeatureVector:
    """Extract the full per-frame vector for a sensor subset.

    136 values per sensor; a missing channel or an empty sensor set is an
    error rather than a silently shorter vector.
    """
    ordered = canonical_sensors(sensors)
    blocks = []
    for sensor in ordered:
        for axis in AXES:
            if (sensor, axis) not in frame.channels:
                raise ValueError(f"frame is missing channel ({sensor}, {axis})")
            blocks.append(extract_channel_features(frame.channels[(sensor, axis)]))
    return FeatureVector(np.concatenate(blocks), feature_names(ordered))


@dataclass
class FeatureMatrix:
    """Stacked feature vectors sharing one name schema."""

    values: np.ndarray
    names: tuple[str, ...]
    labels: np.ndarray | None = None
    provenance: list[Provenance] | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError("feature matrix must be 2-D")
        if self.values.shape[1] != len(self.names):
            raise ValueError("column count does not match name schema")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("feature matrix contains non-finite entries")
        if self.labels is not None:
            self.labels = np.asarray(self.labels)
            if self.labels.shape != (self.values.shape[0],):
                raise ValueError("labels are not aligned with rows")
        if self.provenance is not None and len(self.provenance) != self.values.shape[0]:
            raise ValueError("provenance is not aligned with rows")

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]

    def select_columns(self, indices: Sequence[int]) -> "FeatureMatrix":
        idx = list(indices)
        return FeatureMatrix(
            self.values[:, idx],
            tuple(self.names[i] for i in idx),
            labels=None if self.labels is None else self.labels.copy(),
            provenance=None if self.provenance is None else list(self.provenance),
        )

    @staticmethod
    def from_vectors(vectors: Sequence[FeatureVector]) -> "FeatureMatrix":
        if not vectors:
            raise ValueError("no vectors to stack")
        names = vectors[0].names
        for v in vectors:
            if v.names != names:
                raise ValueError("vectors disagree on the name schema")
        labels = [v.label for v in vectors]
        has_labels = any(lab is not None for lab in labels)
        if has_labels and any(lab is None for lab in labels):
            raise ValueError("cannot mix labeled and unlabeled vectors")
        return FeatureMatrix(
            np.vstack([v.values for v in vectors]),
            names,
            labels=np.array(labels) if has_labels else None,
            provenance=[v.provenance for v in vectors]
            if all(v.provenance is not None for v in vectors)
            else None,
        )

    @staticmethod
    def vstack(parts: Sequence["FeatureMatrix"]) -> "FeatureMatrix":
        if not parts:
            raise ValueError("no matrices to stack")
        names = parts[0].names
        for p in parts:
            if p.names != names:
                raise ValueError("matrices disagree on the name schema")
        labels = None
        if all(p.labels is not None for p in parts):
            labels = np.concatenate([p.labels for p in parts])
        provenance = None
        if all(p.provenance is not None for p in parts):
            provenance = [prov for p in parts for prov in p.provenance]
        return FeatureMatrix(
            np.vstack([p.values for p in parts]), names, labels=labels, provenance=provenance
        )


@dataclass(frozen=True)
class Histogram:
    """Counts over strictly increasing equal-width bin edges."""

    bin_edges: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        edges = np.asarray(self.bin_edges, dtype=np.float64)
        counts = np.asarray(self.counts, dtype=np.float64)
        object.__setattr__(self, "bin_edges", edges)
        object.__setattr__(self, "counts", counts)
        if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
            raise ValueError("bin edges must be strictly increasing")
        if counts.shape != (edges.size - 1,):
            raise ValueError("count length must be edge length - 1")
        if np.any(counts < 0):
            raise ValueError("counts must be nonnegative")


def histogram(
    samples: Sequence[float], bins: int, lo: float | None = None, hi: float | None = None
) -> Histogram:
    """Equal-width histogram; the span defaults to the samples' own [min, max].

    With an explicit span, out-of-range samples are dropped so two sample
    sets can be binned on a shared schema.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.size == 0:
        raise ValueError("no samples to bin")
    if bins < 1:
        raise ValueError(f"bin count must be >= 1, got {bins}")
    if lo is None:
        lo = float(np.min(x))
    if hi is None:
        hi = float(np.max(x))
    if lo == hi:
        counts = np.zeros(bins)
        counts[0] = np.sum(x == lo)
        edges = lo + np.arange(bins + 1, dtype=np.float64)
        return Histogram(edges, counts)
    counts, edges = np.histogram(x, bins=bins, range=(lo, hi))
    return Histogram(edges, counts.astype(np.float64))


def intersection(p: Histogram, q: Histogram) -> float:
    """Histogram overlap: sum(min(P_i, Q_i)) / sum(P_i), with P the reference."""
    if p.counts.size != q.counts.size or not np.array_equal(p.bin_edges, q.bin_edges):
        raise ValueError("histograms do not share a bin schema")
    total = float(np.sum(p.counts))
    if total <= 0:
        raise ValueError("reference histogram has no mass")
    return float(np.sum(np.minimum(p.counts, q.counts)) / total)
