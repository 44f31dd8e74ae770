"""Raw IMU time-series types and the segmentation pipeline.

A recording holds one subject-session's channels, keyed by
``(sensor, axis)`` with sensors ``la`` (linear acceleration), ``gy``
(gyroscope), ``ma`` (magnetic field), ``rv`` (rotation vector) and axes
``x``, ``y``, ``z`` plus the derived magnitude axis ``m``.

Pipeline order is fixed: derive magnitudes from the raw axes first, then
smooth every channel (moving average), then cut sliding-window frames from
the smoothed signal. Smoothing and the Euclidean norm do not commute, so
the order is part of the contract.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

SENSORS = ("la", "gy", "ma", "rv")
AXES = ("x", "y", "z", "m")
RAW_AXES = ("x", "y", "z")

# Short sensor letters used in fusion combo names such as "a+g+m+r".
SENSOR_LETTER = {"la": "a", "gy": "g", "ma": "m", "rv": "r"}
LETTER_SENSOR = {v: k for k, v in SENSOR_LETTER.items()}

DEFAULT_WINDOW_S = 8.0
DEFAULT_SLIDE_S = 4.0


@dataclass(frozen=True)
class SignalChannel:
    """One axis of one sensor: evenly sampled values at a fixed rate."""

    samples: np.ndarray
    sampling_rate: float

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "samples", samples)
        if samples.ndim != 1 or samples.size < 1:
            raise ValueError("channel needs at least one sample")
        if not np.all(np.isfinite(samples)):
            raise ValueError("channel contains non-finite samples")
        if not (self.sampling_rate > 0):
            raise ValueError(f"sampling rate must be positive, got {self.sampling_rate}")

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        """Length in seconds (sample count over rate)."""
        return self.samples.size / self.sampling_rate


@dataclass(frozen=True)
class IMURecording:
    """All channels of one subject-session (or one dictionary entry)."""

    subject_id: str
    session: int | str
    channels: dict[tuple[str, str], SignalChannel]

    def __post_init__(self):
        if not self.channels:
            raise ValueError("recording has no channels")
        rates = {ch.sampling_rate for ch in self.channels.values()}
        if len(rates) > 1:
            raise ValueError(f"channels disagree on sampling rate: {sorted(rates)}")
        for sensor, axis in self.channels:
            if sensor not in SENSORS or axis not in AXES:
                raise ValueError(f"unknown channel ({sensor}, {axis})")

    @property
    def sampling_rate(self) -> float:
        return next(iter(self.channels.values())).sampling_rate

    @property
    def sensors(self) -> tuple[str, ...]:
        present = {sensor for sensor, _ in self.channels}
        return tuple(s for s in SENSORS if s in present)

    @property
    def n_samples(self) -> int:
        return min(len(ch) for ch in self.channels.values())

    @property
    def duration(self) -> float:
        return self.n_samples / self.sampling_rate


@dataclass(frozen=True)
class Frame:
    """One fixed-length window cut from a recording."""

    start: float
    length: float
    sampling_rate: float
    channels: dict[tuple[str, str], np.ndarray] = field(repr=False)

    def channel(self, sensor: str, axis: str) -> np.ndarray:
        try:
            return self.channels[(sensor, axis)]
        except KeyError:
            raise ValueError(f"frame has no ({sensor}, {axis}) channel") from None


def smoothing_width(sampling_rate: float) -> int:
    """Moving-average width for a given rate: ceil(0.05 * rate), at least 1."""
    if not (sampling_rate > 0):
        raise ValueError(f"sampling rate must be positive, got {sampling_rate}")
    return max(1, math.ceil(0.05 * sampling_rate))


def smooth(channel: SignalChannel, s: int) -> SignalChannel:
    """Moving average with window s; output has n - s + 1 samples.

    Boundary samples past n - s + 1 are dropped, not padded, so every output
    value is an exact mean of s consecutive inputs. s = 1 is the identity.
    """
    n = len(channel)
    if s < 1:
        raise ValueError(f"smoothing width must be >= 1, got {s}")
    if s > n:
        raise ValueError(f"smoothing width {s} exceeds channel length {n}")
    if s == 1:
        return channel
    kernel = np.full(s, 1.0 / s)
    out = np.convolve(channel.samples, kernel, mode="valid")
    return SignalChannel(out, channel.sampling_rate)


def magnitude(x: SignalChannel, y: SignalChannel, z: SignalChannel) -> SignalChannel:
    """Samplewise Euclidean norm of three aligned axes."""
    if not (len(x) == len(y) == len(z)):
        raise ValueError(f"axis lengths differ: {len(x)}, {len(y)}, {len(z)}")
    out = np.sqrt(x.samples**2 + y.samples**2 + z.samples**2)
    return SignalChannel(out, x.sampling_rate)


def with_magnitudes(recording: IMURecording) -> IMURecording:
    """Add the m axis for every sensor that has all of x, y, z.

    Magnitudes are computed from the raw axes, before any smoothing.
    """
    channels = dict(recording.channels)
    for sensor in recording.sensors:
        if (sensor, "m") in channels:
            continue
        try:
            x, y, z = (channels[(sensor, a)] for a in RAW_AXES)
        except KeyError:
            continue
        channels[(sensor, "m")] = magnitude(x, y, z)
    return replace(recording, channels=channels)


def smooth_recording(recording: IMURecording, s: int | None = None) -> IMURecording:
    """Smooth every channel with the same width (default from the rate)."""
    if s is None:
        s = smoothing_width(recording.sampling_rate)
    channels = {key: smooth(ch, s) for key, ch in recording.channels.items()}
    return replace(recording, channels=channels)


def segment(
    recording: IMURecording,
    window: float = DEFAULT_WINDOW_S,
    slide: float = DEFAULT_SLIDE_S,
) -> list[Frame]:
    """Cut overlapping fixed-length frames, ordered by start time.

    Yields floor((duration - window) / slide) + 1 frames; a recording shorter
    than one window yields an empty list rather than an error. Window and
    slide are converted to sample counts by rounding to the nearest integer.
    """
    if not (window > 0):
        raise ValueError(f"window must be positive, got {window}")
    if not (slide > 0):
        raise ValueError(f"slide must be positive, got {slide}")
    rate = recording.sampling_rate
    w = max(1, round(window * rate))
    step = max(1, round(slide * rate))
    n = recording.n_samples
    if n < w:
        return []
    frames = []
    for start in range(0, n - w + 1, step):
        sliced = {
            key: ch.samples[start : start + w] for key, ch in recording.channels.items()
        }
        frames.append(
            Frame(start=start / rate, length=window, sampling_rate=rate, channels=sliced)
        )
    return frames


def resample_uniform(
    timestamps: np.ndarray, values: np.ndarray, grid: np.ndarray
) -> np.ndarray:
    """Linear interpolation of an irregular series onto a uniform grid."""
    timestamps = np.asarray(timestamps, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if timestamps.ndim != 1 or timestamps.size != values.size:
        raise ValueError("timestamps and values must be 1-D and aligned")
    if timestamps.size < 2:
        raise ValueError("need at least two samples to resample")
    if np.any(np.diff(timestamps) <= 0):
        raise ValueError("timestamps must be strictly increasing")
    return np.interp(grid, timestamps, values)
