"""On-disk formats and store layout.

Recordings live as one CSV per sensor with header ``t,x,y,z``; timestamps
are seconds and may be non-uniform, in which case loading resamples all
channels onto a shared uniform grid at the session's median rate. The
genuine-user store is laid out as::

    <root>/genuine/<subject>/session<k>/{la,gy,ma,rv}.csv

Feature matrices persist as CSV with provenance and label columns ahead
of the feature columns. Floats are written with repr() so a write/read
cycle is exact.
"""

from __future__ import annotations

import csv
import hashlib
import math
from pathlib import Path

import numpy as np

from .errors import DataError
from .features import GEN, IMP, FeatureMatrix, Provenance
from .signal import RAW_AXES, SENSORS, IMURecording, SignalChannel, resample_uniform

RECORDING_HEADER = ("t", "x", "y", "z")


def read_channel_file(path) -> tuple[np.ndarray, np.ndarray]:
    """One sensor CSV -> (timestamps, values[n, 3]) after validation."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    lines = text.splitlines()
    if not lines or tuple(h.strip() for h in lines[0].split(",")) != RECORDING_HEADER:
        raise DataError(f"{path}: expected header {','.join(RECORDING_HEADER)}")
    try:
        data = np.array(
            [[float(cell) for cell in line.split(",")] for line in lines[1:] if line.strip()]
        )
    except ValueError as exc:
        raise DataError(f"{path}: non-numeric cell: {exc}") from exc
    if data.ndim != 2 or data.shape[1] != 4:
        raise DataError(f"{path}: every row needs 4 columns")
    if data.shape[0] < 2:
        raise DataError(f"{path}: need at least 2 samples, got {data.shape[0]}")
    if not np.all(np.isfinite(data)):
        raise DataError(f"{path}: non-finite values")
    t = data[:, 0]
    if np.any(np.diff(t) <= 0):
        raise DataError(f"{path}: timestamps must be strictly increasing")
    return t, data[:, 1:]


def read_recording(files: dict[str, Path], subject: str, session) -> IMURecording:
    """Load one session from a sensor -> CSV path map onto a uniform grid.

    The grid rate is the reciprocal of the median timestamp step pooled
    over all sensors; the grid covers the time span common to them.
    """
    missing = [s for s in SENSORS if s not in files]
    if missing:
        raise DataError(f"session {subject}/{session} is missing sensors {missing}")
    raw = {sensor: read_channel_file(files[sensor]) for sensor in SENSORS}

    steps = np.concatenate([np.diff(t) for t, _ in raw.values()])
    rate = 1.0 / float(np.median(steps))
    t0 = max(float(t[0]) for t, _ in raw.values())
    t1 = min(float(t[-1]) for t, _ in raw.values())
    if t1 <= t0:
        raise DataError(f"session {subject}/{session}: sensors share no time span")
    n = math.floor((t1 - t0) * rate + 1e-9) + 1
    grid = t0 + np.arange(n) / rate

    channels = {}
    for sensor, (t, values) in raw.items():
        for i, axis in enumerate(RAW_AXES):
            samples = resample_uniform(t, values[:, i], grid)
            channels[(sensor, axis)] = SignalChannel(samples, rate)
    return IMURecording(subject, session, channels)


def write_recording(recording: IMURecording, session_dir) -> list[Path]:
    """Write the raw axes of every sensor as CSVs; derived channels are skipped."""
    session_dir = Path(session_dir)
    session_dir.mkdir(parents=True, exist_ok=True)
    rate = recording.sampling_rate
    written = []
    for sensor in recording.sensors:
        triple = [recording.channels.get((sensor, axis)) for axis in RAW_AXES]
        if any(ch is None for ch in triple):
            raise DataError(f"sensor {sensor} is missing a raw axis")
        n = min(len(ch) for ch in triple)
        lines = [",".join(RECORDING_HEADER)]
        for i in range(n):
            row = [repr(i / rate)] + [repr(float(ch.samples[i])) for ch in triple]
            lines.append(",".join(row))
        path = session_dir / f"{sensor}.csv"
        path.write_text("\n".join(lines) + "\n")
        written.append(path)
    return written


def session_files(session_dir) -> dict[str, Path]:
    return {sensor: Path(session_dir) / f"{sensor}.csv" for sensor in SENSORS}


def scan_store(root) -> dict[str, dict[int, dict[str, Path]]]:
    """Map subject -> session number -> sensor file paths, validated."""
    root = Path(root)
    genuine = root / "genuine"
    if not genuine.is_dir():
        raise DataError(f"store {root} has no genuine/ directory")
    store: dict[str, dict[int, dict[str, Path]]] = {}
    for subject_dir in sorted(p for p in genuine.iterdir() if p.is_dir()):
        sessions: dict[int, dict[str, Path]] = {}
        for session_dir in sorted(p for p in subject_dir.iterdir() if p.is_dir()):
            name = session_dir.name
            if not name.startswith("session"):
                raise DataError(f"unexpected directory {session_dir}")
            try:
                k = int(name[len("session") :])
            except ValueError as exc:
                raise DataError(f"unexpected directory {session_dir}") from exc
            files = session_files(session_dir)
            absent = [s for s, p in files.items() if not p.is_file()]
            if absent:
                raise DataError(f"{session_dir} is missing {absent}")
            sessions[k] = files
        if not sessions:
            raise DataError(f"{subject_dir} has no sessions")
        store[subject_dir.name] = sessions
    if not store:
        raise DataError(f"store {root} has no subjects")
    return store


def load_session(store, subject: str, session: int) -> IMURecording:
    try:
        files = store[subject][session]
    except KeyError as exc:
        raise DataError(f"store has no session {subject}/{session}") from exc
    return read_recording(files, subject, session)


FEATURE_META_COLUMNS = ("subject", "session", "window", "label")


def write_feature_csv(matrix: FeatureMatrix, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(FEATURE_META_COLUMNS + matrix.names)
        for i in range(matrix.n_rows):
            prov = matrix.provenance[i] if matrix.provenance is not None else None
            meta = [
                prov.subject if prov else "",
                prov.session if prov else "",
                str(prov.window) if prov else "",
                matrix.labels[i] if matrix.labels is not None else "",
            ]
            writer.writerow(meta + [repr(float(v)) for v in matrix.values[i]])


def read_feature_csv(path) -> FeatureMatrix:
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if not rows or tuple(rows[0][:4]) != FEATURE_META_COLUMNS:
        raise DataError(f"{path}: expected columns {FEATURE_META_COLUMNS} first")
    names = tuple(rows[0][4:])
    if not names:
        raise DataError(f"{path}: no feature columns")
    values, labels, provenance = [], [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 4 + len(names):
            raise DataError(f"{path}:{lineno}: expected {4 + len(names)} cells")
        subject, session, window, label = row[:4]
        if label and label not in (GEN, IMP):
            raise DataError(f"{path}:{lineno}: bad label {label!r}")
        labels.append(label or None)
        provenance.append(
            Provenance(subject, session, int(window)) if subject else None
        )
        try:
            values.append([float(cell) for cell in row[4:]])
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: non-numeric cell: {exc}") from exc
    if not values:
        raise DataError(f"{path}: no data rows")
    has_labels = all(lab is not None for lab in labels)
    has_prov = all(p is not None for p in provenance)
    try:
        return FeatureMatrix(
            np.array(values),
            names,
            labels=np.array(labels) if has_labels else None,
            provenance=provenance if has_prov else None,
        )
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from exc


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def tree_digest(root, paths) -> str:
    """Order-independent digest of files identified relative to root."""
    root = Path(root)
    lines = sorted(
        f"{Path(p).relative_to(root).as_posix()}:{file_digest(p)}" for p in paths
    )
    return hashlib.sha256("\n".join(lines).encode()).hexdigest()
