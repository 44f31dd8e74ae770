"""Gait-pattern dictionary and the exhaustive dictionary attack.

A dictionary entry is a recording of one imitator walking at one factor
setting (speed, step length, step width, thigh lift). Attacking a model
means featurizing each entry with the victim's frozen selection and
scaler, predicting every window, and reporting the fraction accepted as
genuine; the best entry is the argmax, ties broken by canonical key
order. The attack leaves FRR untouched, so the attacked HTER moves by
exactly half the FAR rise.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .authbench import (
    BaselineGrid,
    EvalReport,
    TrainedModel,
    extract_session_features,
)
from .dataio import read_recording
from .errors import DataError
from .signal import DEFAULT_SLIDE_S, DEFAULT_WINDOW_S, SENSORS, IMURecording

SPEED_GRID = tuple(round(1.4 + 0.2 * i, 1) for i in range(9))
STEP_LENGTH_LEVELS = ("short", "normal", "long", "longer")
STEP_WIDTH_LEVELS = ("close", "normal", "wide", "wider")
THIGH_LIFT_LEVELS = ("back", "normal", "front", "up")

# nominal floor for "at least 100 steps" at a typical cadence; shorter
# entries are flagged, never dropped
MIN_ENTRY_SECONDS = 50.0


@dataclass(frozen=True)
class FactorSetting:
    """One cell of the gait-factor space."""

    speed_mph: float
    step_length: str = "normal"
    step_width: str = "normal"
    thigh_lift: str = "normal"

    def __post_init__(self):
        if not (math.isfinite(self.speed_mph) and self.speed_mph > 0):
            raise ValueError(f"speed must be positive and finite, got {self.speed_mph}")
        for value, levels, name in (
            (self.step_length, STEP_LENGTH_LEVELS, "step_length"),
            (self.step_width, STEP_WIDTH_LEVELS, "step_width"),
            (self.thigh_lift, THIGH_LIFT_LEVELS, "thigh_lift"),
        ):
            if value not in levels:
                raise ValueError(f"{name} must be one of {levels}, got {value!r}")

    @property
    def grid_conformant(self) -> bool:
        """Whether the speed sits on the 9-point 1.4..3.0 grid."""
        return any(abs(self.speed_mph - g) < 1e-9 for g in SPEED_GRID)

    def sort_key(self):
        return (
            self.speed_mph,
            STEP_LENGTH_LEVELS.index(self.step_length),
            STEP_WIDTH_LEVELS.index(self.step_width),
            THIGH_LIFT_LEVELS.index(self.thigh_lift),
        )

    def __str__(self):
        return f"{self.speed_mph:g}|{self.step_length}|{self.step_width}|{self.thigh_lift}"


@dataclass
class DictionaryEntry:
    """One imitator recording at one setting, with a lazy feature cache."""

    imitator_id: str
    setting: FactorSetting
    recording: IMURecording
    flagged: bool = False
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def key(self):
        return (self.imitator_id, self.setting.sort_key())

    @property
    def key_str(self) -> str:
        return f"{self.imitator_id}|{self.setting}"

    def features(self, window: float = DEFAULT_WINDOW_S, slide: float = DEFAULT_SLIDE_S):
        """Full-schema window features, computed once per (window, slide)."""
        cache_key = (window, slide)
        if cache_key not in self._cache:
            self._cache[cache_key] = extract_session_features(
                self.recording, window, slide
            )
        return self._cache[cache_key]


@dataclass
class Dictionary:
    """Entries kept in canonical key order with uniqueness enforced."""

    entries: list[DictionaryEntry]

    def __post_init__(self):
        seen = {}
        duplicates = []
        for entry in self.entries:
            if entry.key in seen:
                duplicates.append(entry.key_str)
            seen[entry.key] = entry
        if duplicates:
            raise DataError(f"duplicate dictionary keys: {sorted(set(duplicates))}")
        self.entries = sorted(self.entries, key=lambda e: e.key)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


MANIFEST_FIELDS = ("imitator_id", "speed_mph", "step_length", "step_width", "thigh_lift")


def build_dictionary(manifest, base_dir=None, min_seconds: float = MIN_ENTRY_SECONDS) -> Dictionary:
    """Load and validate a dictionary from a manifest (path or parsed dict).

    All offending entries (bad fields, missing files, duplicate keys) are
    collected and reported together.
    """
    if not isinstance(manifest, dict):
        manifest_path = Path(manifest)
        if base_dir is None:
            base_dir = manifest_path.parent
        try:
            manifest = json.loads(manifest_path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot read manifest {manifest_path}: {exc}") from exc
    base_dir = Path(base_dir) if base_dir is not None else Path(".")
    if "entries" not in manifest or not isinstance(manifest["entries"], list):
        raise DataError("manifest must carry an 'entries' list")

    problems = []
    parsed = []
    seen_keys = set()
    for i, raw in enumerate(manifest["entries"]):
        label = f"entry {i}"
        missing = [f for f in MANIFEST_FIELDS if f not in raw]
        if missing or "files" not in raw:
            problems.append(f"{label}: missing fields {missing + (['files'] if 'files' not in raw else [])}")
            continue
        try:
            setting = FactorSetting(
                float(raw["speed_mph"]),
                raw["step_length"],
                raw["step_width"],
                raw["thigh_lift"],
            )
        except (TypeError, ValueError) as exc:
            problems.append(f"{label}: {exc}")
            continue
        key = (raw["imitator_id"], setting.sort_key())
        if key in seen_keys:
            problems.append(f"{label}: duplicate key {raw['imitator_id']}|{setting}")
            continue
        seen_keys.add(key)
        files = {}
        absent = []
        for sensor in SENSORS:
            if sensor not in raw["files"]:
                absent.append(sensor)
                continue
            path = base_dir / raw["files"][sensor]
            if not path.is_file():
                absent.append(str(path))
            files[sensor] = path
        if absent:
            problems.append(f"{label}: unresolved files {absent}")
            continue
        parsed.append((raw["imitator_id"], setting, files))

    if problems:
        raise DataError("invalid dictionary manifest:\n" + "\n".join(problems))

    entries = []
    for imitator_id, setting, files in parsed:
        recording = read_recording(files, imitator_id, str(setting))
        entries.append(
            DictionaryEntry(
                imitator_id,
                setting,
                recording,
                flagged=recording.duration < min_seconds,
            )
        )
    return Dictionary(entries)


def attack_entry(
    model: TrainedModel,
    entry: DictionaryEntry,
    window: float = DEFAULT_WINDOW_S,
    slide: float = DEFAULT_SLIDE_S,
) -> float:
    """Fraction of the entry's windows the model accepts as genuine."""
    try:
        matrix = entry.features(window, slide)
    except DataError as exc:
        raise ValueError(f"entry {entry.key_str} yields no windows: {exc}") from exc
    return model.genuine_fraction(matrix.values)


@dataclass(frozen=True)
class UserAttack:
    """Per-entry FARs against one model, plus the winning entry."""

    entry_fars: tuple
    best_key: str
    best_far: float


def attack_user(
    model: TrainedModel,
    dictionary: Dictionary,
    window: float = DEFAULT_WINDOW_S,
    slide: float = DEFAULT_SLIDE_S,
) -> UserAttack:
    if len(dictionary) == 0:
        raise ValueError("cannot attack with an empty dictionary")
    fars = tuple(
        (entry.key_str, attack_entry(model, entry, window, slide)) for entry in dictionary
    )
    best_key, best_far = max(fars, key=lambda kv: kv[1])
    # entries are in canonical key order, so the first max wins ties;
    # max() already keeps the earliest maximal element
    return UserAttack(entry_fars=fars, best_key=best_key, best_far=best_far)


@dataclass(frozen=True)
class CellAttack:
    """Zero-effort baseline and dictionary outcome for one grid cell."""

    zero: EvalReport
    attack: UserAttack

    @property
    def dict_far(self) -> float:
        return self.attack.best_far

    @property
    def dict_hter(self) -> float:
        return (self.attack.best_far + self.zero.frr) / 2


@dataclass
class AttackReport:
    rows: dict = field(default_factory=dict)
    skipped: list = field(default_factory=list)

    def cell(self, user: str, combo: str, kind: str) -> CellAttack:
        return self.rows[(user, combo, kind)]


def attack_matrix(
    grid: BaselineGrid,
    dictionary: Dictionary,
    window: float = DEFAULT_WINDOW_S,
    slide: float = DEFAULT_SLIDE_S,
) -> AttackReport:
    """Attack every successful cell of a baseline grid."""
    report = AttackReport()
    for key in grid.cell_keys():
        if key not in grid.cells:
            report.skipped.append(key)
            continue
        model, zero = grid.cells[key]
        report.rows[key] = CellAttack(zero=zero, attack=attack_user(model, dictionary, window, slide))
    return report


def classify_menagerie(
    report: AttackReport, combo: str, kind: str, severe_threshold: float = 0.5
) -> dict[str, str]:
    """Per-user susceptibility labels for one (combo, kind) slice.

    A user whose best entry does no better than zero-effort impostors is
    unaffected (checked first); best FAR at or above the threshold is
    severely_impacted; anything else is impacted.
    """
    if not 0 < severe_threshold <= 1:
        raise ValueError(f"severe_threshold must be in (0, 1], got {severe_threshold}")
    labels = {}
    for (user, c, k), cell in sorted(report.rows.items()):
        if (c, k) != (combo, kind):
            continue
        if cell.dict_far <= cell.zero.far:
            labels[user] = "unaffected"
        elif cell.dict_far >= severe_threshold:
            labels[user] = "severely_impacted"
        else:
            labels[user] = "impacted"
    if not labels:
        raise ValueError(f"report has no cells for combo {combo!r}, kind {kind!r}")
    return labels


def long_csv(report: AttackReport) -> str:
    """Every (cell, entry) FAR as long-format CSV."""
    lines = ["user,combo,kind,entry_key,entry_far"]
    for (user, combo, kind), cell in sorted(report.rows.items()):
        for key_str, far in cell.attack.entry_fars:
            lines.append(f"{user},{combo},{kind},{key_str},{far:.4f}")
    return "\n".join(lines) + "\n"


def summary_csv(report: AttackReport) -> str:
    """One row per cell: zero-effort rates next to the dictionary outcome."""
    lines = ["user,combo,kind,zero_far,zero_frr,zero_hter,dict_far,dict_hter,best_entry"]
    for (user, combo, kind), cell in sorted(report.rows.items()):
        lines.append(
            ",".join(
                [
                    user,
                    combo,
                    kind,
                    f"{cell.zero.far:.4f}",
                    f"{cell.zero.frr:.4f}",
                    f"{cell.zero.hter:.4f}",
                    f"{cell.dict_far:.4f}",
                    f"{cell.dict_hter:.4f}",
                    cell.attack.best_key,
                ]
            )
        )
    return "\n".join(lines) + "\n"


def far_distribution_csv(report: AttackReport, impostor_rates: dict) -> str:
    """Zero-effort per-impostor FARs next to per-entry dictionary FARs.

    impostor_rates maps (user, combo, kind) to the per-impostor acceptance
    fractions of that cell's model.
    """
    lines = ["user,combo,kind,source,key,far"]
    for (user, combo, kind), cell in sorted(report.rows.items()):
        zero = impostor_rates.get((user, combo, kind), {})
        for other, far in sorted(zero.items()):
            lines.append(f"{user},{combo},{kind},zero,{other},{far:.4f}")
        for key_str, far in cell.attack.entry_fars:
            lines.append(f"{user},{combo},{kind},dict,{key_str},{far:.4f}")
    return "\n".join(lines) + "\n"
