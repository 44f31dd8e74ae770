"""Deterministic synthetic IMU gait corpora.

Each subject is a bundle of idiosyncrasies: harmonic amplitudes and
phases per channel, a cadence coefficient, signed per-factor
sensitivities, and a noise level. A recording at a factor setting is a
sum of H harmonics of the fundamental

    f0 = cadence_k * speed / step_length_scale

with every channel's amplitudes scaled by prod(1 + s * delta * MOD_SCALE)
over the four factors, plus Gaussian noise. The constants below are
invented stand-ins (the signal model has no biomechanical authority) and
are frozen so that corpora are reproducible; they were chosen once so
that default corpora are separable but not trivially so.

Factor deltas are centered on natural walking: speed maps to
(speed - 2.2) / 1.6 and an ordinal level at index i maps to (i - 1) / 2,
so "normal" contributes nothing.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .dataio import write_recording
from .dictattack import (
    SPEED_GRID,
    STEP_LENGTH_LEVELS,
    STEP_WIDTH_LEVELS,
    THIGH_LIFT_LEVELS,
    FactorSetting,
)
from .errors import ConfigError
from .seeds import derive_seed
from .signal import RAW_AXES, SENSORS, IMURecording, SignalChannel

N_HARMONICS = 4
MOD_SCALE = 0.5
NEUTRAL_SPEED = 2.2
SPEED_DELTA_SPAN = 1.6

STEP_LENGTH_SCALE = {"short": 0.8, "normal": 1.0, "long": 1.2, "longer": 1.35}

CADENCE_K_RANGE = (0.8, 1.0)
NATURAL_SPEED_RANGE = (1.6, 2.8)
NOISE_FRAC_RANGE = (0.05, 0.15)
SENSITIVITY_RANGE = (0.35, 0.9)
SESSION_DRIFT = 0.03
CLONE_AMPLITUDE_STD = 0.05

AMPLITUDE_SCALE = {"la": (0.5, 3.0), "gy": (0.3, 2.0), "ma": (5.0, 30.0), "rv": (0.1, 0.8)}

FACTOR_NAMES = ("speed", "step_length", "step_width", "thigh_lift")

CHANNELS = tuple((sensor, axis) for sensor in SENSORS for axis in RAW_AXES)


@dataclass
class SubjectProfile:
    """Everything that makes one walker distinguishable from another."""

    subject_id: str
    cadence_k: float
    natural_speed: float
    noise_frac: float
    amplitudes: dict
    phases: dict
    sensitivities: dict
    session_drift: dict

    def __post_init__(self):
        if self.noise_frac < 0:
            raise ValueError("noise level must be >= 0")
        for ch in CHANNELS:
            if ch not in self.amplitudes or ch not in self.phases:
                raise ValueError(f"profile is missing channel {ch}")
            if not np.all(np.isfinite(self.amplitudes[ch])):
                raise ValueError(f"non-finite amplitude on channel {ch}")
            if np.any(np.abs(self.sensitivities[ch]) > 1):
                raise ValueError(f"sensitivities on {ch} leave [-1, 1]")


def make_subject_profile(seed: int, subject_id: str = "u00") -> SubjectProfile:
    """Sample a profile; equal seeds give identical profiles."""
    rng = np.random.default_rng(seed)
    cadence_k = float(rng.uniform(*CADENCE_K_RANGE))
    natural_speed = float(rng.uniform(*NATURAL_SPEED_RANGE))
    noise_frac = float(rng.uniform(*NOISE_FRAC_RANGE))
    amplitudes = {}
    phases = {}
    sensitivities = {}
    session_drift = {}
    harmonics = 1.0 + np.arange(N_HARMONICS)
    for ch in CHANNELS:
        base = rng.uniform(*AMPLITUDE_SCALE[ch[0]])
        amplitudes[ch] = base * rng.uniform(0.25, 1.0, N_HARMONICS) / harmonics
        phases[ch] = rng.uniform(0.0, 2.0 * np.pi, N_HARMONICS)
        magnitude = rng.uniform(*SENSITIVITY_RANGE, len(FACTOR_NAMES))
        signs = rng.choice((-1.0, 1.0), len(FACTOR_NAMES))
        sensitivities[ch] = magnitude * signs
        session_drift[ch] = float(rng.uniform(-SESSION_DRIFT, SESSION_DRIFT))
    return SubjectProfile(
        subject_id=subject_id,
        cadence_k=cadence_k,
        natural_speed=natural_speed,
        noise_frac=noise_frac,
        amplitudes=amplitudes,
        phases=phases,
        sensitivities=sensitivities,
        session_drift=session_drift,
    )


def clone_profile(target: SubjectProfile, seed: int, subject_id: str) -> SubjectProfile:
    """Near-copy of a target: amplitudes perturbed by ~5%, all else kept."""
    rng = np.random.default_rng(seed)
    amplitudes = {
        ch: target.amplitudes[ch] * (1.0 + rng.normal(0.0, CLONE_AMPLITUDE_STD, N_HARMONICS))
        for ch in CHANNELS
    }
    return replace(
        target,
        subject_id=subject_id,
        amplitudes=amplitudes,
        phases={ch: target.phases[ch].copy() for ch in CHANNELS},
        sensitivities={ch: target.sensitivities[ch].copy() for ch in CHANNELS},
        session_drift=dict(target.session_drift),
    )


def factor_deltas(setting: FactorSetting) -> np.ndarray:
    """Signed factor displacements from natural walking, in FACTOR_NAMES order."""
    return np.array(
        [
            (setting.speed_mph - NEUTRAL_SPEED) / SPEED_DELTA_SPAN,
            (STEP_LENGTH_LEVELS.index(setting.step_length) - 1) / 2,
            (STEP_WIDTH_LEVELS.index(setting.step_width) - 1) / 2,
            (THIGH_LIFT_LEVELS.index(setting.thigh_lift) - 1) / 2,
        ]
    )


def fundamental_hz(profile: SubjectProfile, setting: FactorSetting) -> float:
    return profile.cadence_k * setting.speed_mph / STEP_LENGTH_SCALE[setting.step_length]


def natural_setting(profile: SubjectProfile) -> FactorSetting:
    return FactorSetting(profile.natural_speed)


def generate_recording(
    profile: SubjectProfile,
    setting: FactorSetting,
    duration: float,
    rate: float,
    seed: int,
    session=1,
) -> IMURecording:
    """Synthesize all 12 raw channels for one walk; bit-stable under seed."""
    if duration <= 0 or rate <= 0:
        raise ValueError("duration and rate must be positive")
    n = round(duration * rate)
    t = np.arange(n) / rate
    f0 = fundamental_hz(profile, setting)
    deltas = factor_deltas(setting)
    rng = np.random.default_rng(seed)
    channels = {}
    for ch in CHANNELS:
        modifier = float(np.prod(1.0 + profile.sensitivities[ch] * deltas * MOD_SCALE))
        if session == 2:
            modifier *= 1.0 + profile.session_drift[ch]
        amps = profile.amplitudes[ch] * modifier
        signal = np.zeros(n)
        for h in range(N_HARMONICS):
            signal += amps[h] * np.sin(2.0 * np.pi * (h + 1) * f0 * t + profile.phases[ch][h])
        noise_std = profile.noise_frac * float(np.sqrt(np.sum(amps**2) / 2.0))
        if noise_std > 0:
            signal = signal + rng.normal(0.0, noise_std, n)
        channels[ch] = SignalChannel(signal, rate)
    return IMURecording(profile.subject_id, session, channels)


def canonical_settings(count: int) -> list[FactorSetting]:
    """First `count` rows of the canonical 27-setting dictionary grid.

    Order: 9 one-factor ordinal rows (each non-neutral level of each
    ordinal factor at neutral speed), 9 speed rows, then 9 two-factor rows
    pairing equal-rank non-neutral levels.
    """
    rows = []
    ordinal = (
        ("step_length", STEP_LENGTH_LEVELS),
        ("step_width", STEP_WIDTH_LEVELS),
        ("thigh_lift", THIGH_LIFT_LEVELS),
    )
    for name, levels in ordinal:
        for idx in (0, 2, 3):
            rows.append(FactorSetting(NEUTRAL_SPEED, **{name: levels[idx]}))
    for speed in SPEED_GRID:
        rows.append(FactorSetting(speed))
    for (name_a, levels_a), (name_b, levels_b) in (
        (ordinal[0], ordinal[1]),
        (ordinal[0], ordinal[2]),
        (ordinal[1], ordinal[2]),
    ):
        for idx in (0, 2, 3):
            rows.append(
                FactorSetting(NEUTRAL_SPEED, **{name_a: levels_a[idx], name_b: levels_b[idx]})
            )
    if not 1 <= count <= len(rows):
        raise ValueError(f"count must be in 1..{len(rows)}, got {count}")
    return rows[:count]


class SynthConfig:
    """Shape of a synthetic corpus; defaults give the desk-scale scenario.

    entries_per_imitator may be a single int applied to everyone or a
    sequence with one count per imitator. clone_pairs lists
    (imitator_index, subject_index) pairs whose imitator walks with a
    perturbed copy of the subject's profile; by default imitator i clones
    subject 3i while that subject exists.
    """

    def __init__(
        self,
        n_subjects: int = 10,
        sessions_per_subject: int = 2,
        session_seconds: float = 96.0,
        n_imitators: int = 5,
        entries_per_imitator=16,
        sampling_rate: float = 50.0,
        entry_seconds: float = 80.0,
        master_seed: int = 0,
        clone_pairs: tuple | None = None,
    ):
        if n_subjects < 1 or sessions_per_subject < 1:
            raise ConfigError("need at least one subject and one session")
        if n_imitators < 0:
            raise ConfigError("imitator count must be >= 0")
        if session_seconds <= 0 or entry_seconds <= 0 or sampling_rate <= 0:
            raise ConfigError("durations and rate must be positive")
        if isinstance(entries_per_imitator, int):
            counts = (entries_per_imitator,) * n_imitators
        else:
            counts = tuple(entries_per_imitator)
            if len(counts) != n_imitators:
                raise ConfigError("entries_per_imitator must give one count per imitator")
        for c in counts:
            canonical_settings(c)  # validates the range
        if clone_pairs is None:
            clone_pairs = tuple(
                (i, 3 * i) for i in range(n_imitators) if 3 * i < n_subjects
            )
        for imitator_idx, subject_idx in clone_pairs:
            if not (0 <= imitator_idx < n_imitators and 0 <= subject_idx < n_subjects):
                raise ConfigError(f"clone pair ({imitator_idx}, {subject_idx}) out of range")
        self.n_subjects = n_subjects
        self.sessions_per_subject = sessions_per_subject
        self.session_seconds = session_seconds
        self.n_imitators = n_imitators
        self.entries_per_imitator = counts
        self.sampling_rate = sampling_rate
        self.entry_seconds = entry_seconds
        self.master_seed = master_seed
        self.clone_pairs = tuple(clone_pairs)

    def subject_id(self, index: int) -> str:
        return f"u{index + 1:02d}"

    def imitator_id(self, index: int) -> str:
        return f"im{index + 1:02d}"


@dataclass
class CorpusPaths:
    root: Path
    corpus_manifest: Path
    dictionary_manifest: Path
    genuine_files: list = field(default_factory=list)
    entry_files: list = field(default_factory=list)


def subject_profiles(config: SynthConfig) -> list[SubjectProfile]:
    return [
        make_subject_profile(
            derive_seed(config.master_seed, "subject", i), config.subject_id(i)
        )
        for i in range(config.n_subjects)
    ]


def imitator_profiles(config: SynthConfig, subjects: list[SubjectProfile]) -> list[SubjectProfile]:
    clones = dict(config.clone_pairs)
    out = []
    for i in range(config.n_imitators):
        imitator_id = config.imitator_id(i)
        if i in clones:
            out.append(
                clone_profile(
                    subjects[clones[i]],
                    derive_seed(config.master_seed, "clone", i),
                    imitator_id,
                )
            )
        else:
            out.append(
                make_subject_profile(
                    derive_seed(config.master_seed, "imitator", i), imitator_id
                )
            )
    return out


def generate_corpus(config: SynthConfig, out_root) -> CorpusPaths:
    """Write a full corpus: genuine store, dictionary, and manifests."""
    root = Path(out_root)
    root.mkdir(parents=True, exist_ok=True)
    subjects = subject_profiles(config)
    imitators = imitator_profiles(config, subjects)
    paths = CorpusPaths(
        root=root,
        corpus_manifest=root / "corpus.json",
        dictionary_manifest=root / "dictionary" / "manifest.json",
    )

    subject_records = []
    for profile in subjects:
        sessions = {}
        for session in range(1, config.sessions_per_subject + 1):
            recording = generate_recording(
                profile,
                natural_setting(profile),
                config.session_seconds,
                config.sampling_rate,
                derive_seed(config.master_seed, "genuine", profile.subject_id, session),
                session=session,
            )
            session_dir = root / "genuine" / profile.subject_id / f"session{session}"
            paths.genuine_files.extend(write_recording(recording, session_dir))
            sessions[str(session)] = str(session_dir.relative_to(root))
        subject_records.append(
            {
                "subject_id": profile.subject_id,
                "natural_speed_mph": profile.natural_speed,
                "sessions": sessions,
            }
        )

    entries = []
    for i, profile in enumerate(imitators):
        settings = canonical_settings(config.entries_per_imitator[i])
        for j, setting in enumerate(settings):
            recording = generate_recording(
                profile,
                setting,
                config.entry_seconds,
                config.sampling_rate,
                derive_seed(config.master_seed, "entry", profile.subject_id, j),
                session="entry",
            )
            entry_dir = root / "dictionary" / profile.subject_id / f"e{j:03d}"
            files = write_recording(recording, entry_dir)
            paths.entry_files.extend(files)
            entries.append(
                {
                    "imitator_id": profile.subject_id,
                    "speed_mph": setting.speed_mph,
                    "step_length": setting.step_length,
                    "step_width": setting.step_width,
                    "thigh_lift": setting.thigh_lift,
                    "files": {
                        sensor: str(f.relative_to(root / "dictionary"))
                        for sensor, f in zip(SENSORS, files)
                    },
                }
            )

    paths.dictionary_manifest.parent.mkdir(parents=True, exist_ok=True)
    paths.dictionary_manifest.write_text(
        json.dumps({"entries": entries}, sort_keys=True, indent=2) + "\n"
    )
    corpus = {
        "master_seed": config.master_seed,
        "sampling_rate": config.sampling_rate,
        "session_seconds": config.session_seconds,
        "entry_seconds": config.entry_seconds,
        "sessions_per_subject": config.sessions_per_subject,
        "clone_pairs": [list(p) for p in config.clone_pairs],
        "subjects": subject_records,
        "imitators": [p.subject_id for p in imitators],
        "dictionary_manifest": str(paths.dictionary_manifest.relative_to(root)),
    }
    paths.corpus_manifest.write_text(json.dumps(corpus, sort_keys=True, indent=2) + "\n")
    return paths
