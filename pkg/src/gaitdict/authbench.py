"""Per-user baseline training and zero-effort evaluation.

The benchmark follows a strict session split: selection, impostor
sampling, oversampling, scaling, and classifier fitting all see session 1
only; session 2 exists purely as probe material. Each user gets one model
per (sensor combo, classifier kind) cell, 15 x 5 = 75 in a full sweep,
with a per-cell seed derived from the master seed and the cell identity
so any cell is reproducible in isolation.
"""

from __future__ import annotations

import base64
import json
import pickle
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path

import numpy as np

from .errors import DataError
from .features import GEN, IMP, FeatureMatrix, Provenance, featurize
from .learners import CLASSIFIER_KINDS, GaitAuthenticator, smote_oversample
from .seeds import derive_seed
from .selection import DEFAULT_TOP_K, mi_scores, select_top_k
from .signal import (
    DEFAULT_SLIDE_S,
    DEFAULT_WINDOW_S,
    LETTER_SENSOR,
    SENSOR_LETTER,
    SENSORS,
    IMURecording,
    segment,
    smooth_recording,
    with_magnitudes,
)

DEFAULT_PER_IMPOSTOR = 5

FULL_SCHEMA_WIDTH = 136 * len(SENSORS)


def all_combos() -> tuple[str, ...]:
    """The 15 sensor combinations as letter strings, ordered by size then lexicon."""
    letters = "".join(SENSOR_LETTER[s] for s in SENSORS)
    out = []
    for size in range(1, len(letters) + 1):
        out.extend("".join(c) for c in combinations(letters, size))
    return tuple(out)


def canonical_combo(combo: str) -> str:
    letters = list(combo.lower())
    if not letters:
        raise ValueError("combo must name at least one sensor")
    order = "".join(SENSOR_LETTER[s] for s in SENSORS)
    unknown = [c for c in letters if c not in order]
    if unknown:
        raise ValueError(f"unknown sensor letters {unknown}; expected from {order!r}")
    if len(set(letters)) != len(letters):
        raise ValueError(f"combo {combo!r} repeats a sensor")
    return "".join(sorted(letters, key=order.index))


def combo_sensors(combo: str) -> tuple[str, ...]:
    return tuple(LETTER_SENSOR[c] for c in canonical_combo(combo))


def extract_session_features(
    recording: IMURecording,
    window: float = DEFAULT_WINDOW_S,
    slide: float = DEFAULT_SLIDE_S,
) -> FeatureMatrix:
    """Recording -> full-schema feature matrix, one row per sliding window.

    Pipeline order is fixed: derive magnitude channels from the raw axes,
    smooth everything, then segment and featurize.
    """
    prepared = smooth_recording(with_magnitudes(recording))
    frames = segment(prepared, window, slide)
    if not frames:
        raise DataError(
            f"recording {recording.subject_id}/{recording.session} is shorter "
            f"than one {window} s window"
        )
    vectors = [featurize(frame, SENSORS) for frame in frames]
    matrix = FeatureMatrix.from_vectors(vectors)
    matrix.provenance = [
        Provenance(recording.subject_id, str(recording.session), i)
        for i in range(len(frames))
    ]
    return matrix


def combo_columns(names, combo: str) -> np.ndarray:
    wanted = set(combo_sensors(combo))
    return np.flatnonzero([name.split("_", 1)[0] in wanted for name in names])


@dataclass(frozen=True)
class EvalReport:
    """Zero-effort error rates with the raw accept/reject counts."""

    far: float
    frr: float
    hter: float
    counts: dict

    def __post_init__(self):
        ga = self.counts["genuine_accepted"]
        gr = self.counts["genuine_rejected"]
        ia = self.counts["impostor_accepted"]
        ir = self.counts["impostor_rejected"]
        if min(ga, gr, ia, ir) < 0 or ga + gr == 0 or ia + ir == 0:
            raise ValueError("counts must be nonnegative with nonempty probe sets")
        if self.far != ia / (ia + ir) or self.frr != gr / (ga + gr):
            raise ValueError("rates are inconsistent with counts")
        if self.hter != (self.far + self.frr) / 2:
            raise ValueError("hter must equal (far + frr) / 2")

    @staticmethod
    def from_counts(ga: int, gr: int, ia: int, ir: int) -> "EvalReport":
        if ga + gr == 0 or ia + ir == 0:
            raise ValueError("both probe classes must be nonempty")
        far = ia / (ia + ir)
        frr = gr / (ga + gr)
        return EvalReport(
            far,
            frr,
            (far + frr) / 2,
            {
                "genuine_accepted": ga,
                "genuine_rejected": gr,
                "impostor_accepted": ia,
                "impostor_rejected": ir,
            },
        )


@dataclass
class TrainedModel:
    """A fitted cell: frozen column selection plus the authenticator."""

    user: str
    combo: str
    kind: str
    seed: int
    selected_idx: np.ndarray
    selected_names: tuple[str, ...]
    authenticator: GaitAuthenticator
    schema_width: int

    def predict(self, values: np.ndarray) -> np.ndarray:
        """Predict labels for rows in the full feature schema."""
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 2 or values.shape[1] != self.schema_width:
            raise ValueError(f"expected full-schema rows of width {self.schema_width}")
        return self.authenticator.predict(values[:, self.selected_idx])

    def genuine_fraction(self, values: np.ndarray) -> float:
        return float(np.mean(self.predict(values) == GEN))


def _check_same_schema(matrices: dict) -> tuple[str, ...]:
    names = None
    for user, matrix in matrices.items():
        if names is None:
            names = matrix.names
        elif matrix.names != names:
            raise ValueError(f"user {user} has a different feature schema")
    if names is None:
        raise ValueError("no users in the feature store")
    return names


def assemble_training_set(
    user: str,
    session1: dict[str, FeatureMatrix],
    per_impostor: int = DEFAULT_PER_IMPOSTOR,
    seed: int = 0,
) -> FeatureMatrix:
    """Training rows for one user: genuine plus sampled impostor vectors.

    Every other user contributes per_impostor vectors sampled without
    replacement (all of them if a user has fewer). The genuine block is
    then SMOTE-oversampled up to the impostor count; if genuine rows
    already dominate, both blocks are kept as they are.
    """
    if per_impostor < 1:
        raise ValueError(f"per_impostor must be >= 1, got {per_impostor}")
    if user not in session1:
        raise ValueError(f"user {user!r} has no session-1 vectors")
    names = _check_same_schema(session1)
    others = sorted(u for u in session1 if u != user)
    if not others:
        raise ValueError("need at least one other user as impostor material")

    rng = np.random.default_rng(seed)
    impostor_blocks = []
    for other in others:
        values = session1[other].values
        take = min(per_impostor, values.shape[0])
        idx = np.sort(rng.choice(values.shape[0], size=take, replace=False))
        impostor_blocks.append(values[idx])
    impostors = np.vstack(impostor_blocks)

    genuine = session1[user].values
    target = max(genuine.shape[0], impostors.shape[0])
    genuine = smote_oversample(genuine, target, rng=rng)

    return FeatureMatrix(
        np.vstack([genuine, impostors]),
        names,
        labels=np.array([GEN] * genuine.shape[0] + [IMP] * impostors.shape[0]),
    )


def _selection_pool(user: str, session1: dict[str, FeatureMatrix]):
    genuine = session1[user].values
    others = sorted(u for u in session1 if u != user)
    impostors = np.vstack([session1[u].values for u in others])
    X = np.vstack([genuine, impostors])
    y = np.array([GEN] * genuine.shape[0] + [IMP] * impostors.shape[0])
    return X, y


def selection_scores(user: str, session1: dict[str, FeatureMatrix]) -> np.ndarray:
    """Per-column MI scores on the full session-1 pool (genuine vs rest)."""
    X, y = _selection_pool(user, session1)
    return mi_scores(X, y)


def select_for_combo(names, scores: np.ndarray, combo: str, top_k: int) -> np.ndarray:
    """Top-k columns per sensor of the combo, as ascending full-schema indices."""
    parts = []
    for sensor in combo_sensors(combo):
        block = np.flatnonzero([name.split("_", 1)[0] == sensor for name in names])
        parts.append(block[select_top_k(scores[block], top_k)])
    return np.sort(np.concatenate(parts))


def train_user_model(
    user: str,
    combo: str,
    kind: str,
    session1: dict[str, FeatureMatrix],
    per_impostor: int = DEFAULT_PER_IMPOSTOR,
    top_k: int = DEFAULT_TOP_K,
    seed: int = 0,
    _scores: np.ndarray | None = None,
) -> TrainedModel:
    """Selection, assembly, oversampling, and fitting, on session 1 only."""
    combo = canonical_combo(combo)
    if kind not in CLASSIFIER_KINDS:
        raise ValueError(f"unknown classifier kind {kind!r}")
    if user not in session1:
        raise ValueError(f"user {user!r} has no session-1 vectors")
    names = _check_same_schema(session1)
    try:
        scores = selection_scores(user, session1) if _scores is None else _scores
        selected = select_for_combo(names, scores, combo, top_k)
        reduced = {u: m.select_columns(selected) for u, m in session1.items()}
        assembled = assemble_training_set(user, reduced, per_impostor, seed)
        auth = GaitAuthenticator(kind=kind, seed=seed).fit(assembled.values, assembled.labels)
    except ValueError as exc:
        raise ValueError(f"cell ({user}, {combo}, {kind}): {exc}") from exc
    return TrainedModel(
        user=user,
        combo=combo,
        kind=kind,
        seed=seed,
        selected_idx=selected,
        selected_names=tuple(names[i] for i in selected),
        authenticator=auth,
        schema_width=len(names),
    )


def evaluate_zero_effort(model: TrainedModel, session2: dict[str, FeatureMatrix]) -> EvalReport:
    """FRR on the user's own session-2 windows, FAR on everyone else's."""
    if model.user not in session2 or session2[model.user].n_rows == 0:
        raise ValueError(f"user {model.user!r} has no session-2 probes")
    others = sorted(u for u in session2 if u != model.user)
    if not others:
        raise ValueError("no impostor probes in session 2")
    genuine_pred = model.predict(session2[model.user].values)
    ga = int(np.sum(genuine_pred == GEN))
    gr = genuine_pred.size - ga
    ia = ir = 0
    for other in others:
        pred = model.predict(session2[other].values)
        ia += int(np.sum(pred == GEN))
        ir += int(np.sum(pred == IMP))
    return EvalReport.from_counts(ga, gr, ia, ir)


def per_impostor_rates(model: TrainedModel, session2: dict[str, FeatureMatrix]) -> dict[str, float]:
    """Zero-effort acceptance fraction per impostor user."""
    return {
        other: model.genuine_fraction(session2[other].values)
        for other in sorted(session2)
        if other != model.user
    }


@dataclass
class BaselineGrid:
    """Sweep results keyed by (user, combo, kind), failures kept separately."""

    cells: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)
    users: tuple[str, ...] = ()
    combos: tuple[str, ...] = ()
    kinds: tuple[str, ...] = ()

    def mean_rate(self, combo: str, kind: str, metric: str) -> float | None:
        values = [
            getattr(self.cells[(u, combo, kind)][1], metric)
            for u in self.users
            if (u, combo, kind) in self.cells
        ]
        return float(np.mean(values)) if values else None

    def cell_keys(self):
        return [
            (u, c, k) for u in self.users for c in self.combos for k in self.kinds
        ]


def sweep(
    session1: dict[str, FeatureMatrix],
    session2: dict[str, FeatureMatrix],
    users=None,
    combos=None,
    kinds=None,
    master_seed: int = 0,
    per_impostor: int = DEFAULT_PER_IMPOSTOR,
    top_k: int = DEFAULT_TOP_K,
    jobs: int = 1,
) -> BaselineGrid:
    """Train and evaluate every requested cell.

    Per-cell failures are recorded rather than aborting the sweep, and
    results are reduced in canonical cell order so the worker count can
    never change the output.
    """
    users = tuple(sorted(session1)) if users is None else tuple(users)
    combos = all_combos() if combos is None else tuple(canonical_combo(c) for c in combos)
    kinds = CLASSIFIER_KINDS if kinds is None else tuple(kinds)
    for kind in kinds:
        if kind not in CLASSIFIER_KINDS:
            raise ValueError(f"unknown classifier kind {kind!r}")

    score_cache = {}
    for user in users:
        if user not in session1:
            continue
        try:
            score_cache[user] = selection_scores(user, session1)
        except ValueError:
            pass  # the per-cell path recomputes and records the failure

    def run_cell(key):
        user, combo, kind = key
        seed = derive_seed(master_seed, "cell", user, combo, kind)
        model = train_user_model(
            user,
            combo,
            kind,
            session1,
            per_impostor=per_impostor,
            top_k=top_k,
            seed=seed,
            _scores=score_cache.get(user),
        )
        return model, evaluate_zero_effort(model, session2)

    grid = BaselineGrid(users=users, combos=combos, kinds=kinds)
    keys = grid.cell_keys()
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        futures = [(key, pool.submit(run_cell, key)) for key in keys]
        for key, future in futures:
            try:
                grid.cells[key] = future.result()
            except (ValueError, DataError) as exc:
                grid.failures[key] = str(exc)
    return grid


def grid_csv(grid: BaselineGrid, metric: str, percent: bool = False) -> str:
    """Combos-by-kinds table of user-averaged rates, as CSV text.

    Values carry 4 decimals; the percent view rounds to whole percents the
    way the published tables do.
    """
    if metric not in ("far", "frr", "hter"):
        raise ValueError(f"unknown metric {metric!r}")
    lines = ["combo," + ",".join(grid.kinds)]
    for combo in grid.combos:
        row = [combo]
        for kind in grid.kinds:
            value = grid.mean_rate(combo, kind, metric)
            if value is None:
                row.append("")
            elif percent:
                row.append(str(round(100 * value)))
            else:
                row.append(f"{value:.4f}")
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


CELL_FORMAT = "gait-trained-cell"


def save_cell(model: TrainedModel, report: EvalReport, path) -> None:
    doc = {
        "format": CELL_FORMAT,
        "user": model.user,
        "combo": model.combo,
        "kind": model.kind,
        "seed": model.seed,
        "report": {
            "far": report.far,
            "frr": report.frr,
            "hter": report.hter,
            "counts": report.counts,
        },
        "payload": base64.b64encode(pickle.dumps(model)).decode("ascii"),
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")


def load_cell(path) -> tuple[TrainedModel, EvalReport]:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read cell file {path}: {exc}") from exc
    if doc.get("format") != CELL_FORMAT:
        raise DataError(f"{path} is not a {CELL_FORMAT} file")
    model = pickle.loads(base64.b64decode(doc["payload"]))
    rep = doc["report"]
    report = EvalReport(rep["far"], rep["frr"], rep["hter"], rep["counts"])
    return model, report
