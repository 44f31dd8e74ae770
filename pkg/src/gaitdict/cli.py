"""Command-line workflows: synth, ingest, train, attack, eda, report.

Configuration comes from an optional JSON file plus flags, with flags
winning. Every command writes a `<command>_manifest.json` into the
output root capturing the effective config, the master seed, sha256
digests of its inputs, and the relative path of every artifact it wrote,
so no output is orphaned. Manifests carry no timestamps, no absolute
paths, and no worker count; reruns with equal config and seed are
byte-identical regardless of --jobs.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 sweep
finished with per-cell failures (listing on stderr), 1 internal error.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass
from pathlib import Path

import click
import numpy as np

from .authbench import (
    BaselineGrid,
    EvalReport,
    canonical_combo,
    extract_session_features,
    load_cell,
    per_impostor_rates,
    save_cell,
    sweep,
)
from .dataio import (
    file_digest,
    load_session,
    read_feature_csv,
    scan_store,
    tree_digest,
    write_feature_csv,
)
from .dictattack import (
    AttackReport,
    attack_matrix,
    build_dictionary,
    classify_menagerie,
    far_distribution_csv,
    long_csv,
    summary_csv,
)
from .eda import (
    LabeledMatrix,
    correlations_csv,
    factor_feature_correlations,
    grids_by_factor,
    matrix_csv,
    matrix_from_grid,
    matrix_svg,
    rate_matrix,
)
from .errors import ConfigError, DataError
from .learners import CLASSIFIER_KINDS, model_filename
from .synthgait import SynthConfig, generate_corpus

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_PARTIAL = 4

DEFAULT_EDA_FEATURES = ("la_x_mean", "la_x_std", "la_m_std", "gy_x_std")

CONFIG_KEYS = {
    "data": None,
    "out": None,
    "seed": 0,
    "jobs": 1,
    "window": 8.0,
    "slide": 4.0,
    "top_k": 30,
    "per_impostor": 5,
    "severe_threshold": 0.5,
    "combos": None,
    "classifiers": None,
    "format": "csv",
    "synth": {},
    "eda_features": list(DEFAULT_EDA_FEATURES),
}

CELLS_FORMAT = "gait-baseline-cells"
ATTACK_CELLS_FORMAT = "gait-attack-cells"
MANIFEST_FORMAT = "gait-run-manifest"


class PartialSweepFailure(Exception):
    """Raised after artifacts are written when some cells failed."""

    def __init__(self, failures: dict):
        super().__init__(f"{len(failures)} cell(s) failed")
        self.failures = failures


@dataclass
class RunConfig:
    """Effective settings for one command after merging file and flags."""

    data: Path | None
    out: Path | None
    seed: int
    jobs: int
    window: float
    slide: float
    top_k: int
    per_impostor: int
    severe_threshold: float
    combos: tuple | None
    kinds: tuple | None
    fmt: str
    synth: dict
    eda_features: tuple

    def validate(self):
        if self.window <= 0 or self.slide <= 0:
            raise ConfigError("window and slide must be positive")
        if self.top_k < 1 or self.per_impostor < 1 or self.jobs < 1:
            raise ConfigError("top_k, per_impostor, and jobs must be >= 1")
        if not 0 < self.severe_threshold <= 1:
            raise ConfigError("severe_threshold must be in (0, 1]")
        if self.fmt not in ("csv", "svg"):
            raise ConfigError(f"format must be csv or svg, got {self.fmt!r}")
        if not isinstance(self.seed, int):
            raise ConfigError("seed must be an integer")
        if self.combos is not None:
            self.combos = tuple(canonical_combo(c) for c in self.combos)
        if self.kinds is not None:
            unknown = [k for k in self.kinds if k not in CLASSIFIER_KINDS]
            if unknown:
                raise ConfigError(
                    f"unknown classifiers {unknown}; expected {CLASSIFIER_KINDS}"
                )
        if not isinstance(self.synth, dict):
            raise ConfigError("the synth config section must be an object")
        if "master_seed" in self.synth:
            raise ConfigError("set the corpus seed with --seed, not synth.master_seed")

    def require(self, *names):
        for name in names:
            if getattr(self, name.replace("-", "_")) is None:
                raise ConfigError(f"--{name} is required for this command")

    def public_dict(self) -> dict:
        """Manifest view: no paths, no worker count."""
        return {
            "seed": self.seed,
            "window": self.window,
            "slide": self.slide,
            "top_k": self.top_k,
            "per_impostor": self.per_impostor,
            "severe_threshold": self.severe_threshold,
            "combos": list(self.combos) if self.combos else None,
            "classifiers": list(self.kinds) if self.kinds else None,
            "format": self.fmt,
            "synth": self.synth,
            "eda_features": list(self.eda_features),
        }


def load_config_file(path) -> dict:
    try:
        values = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(values, dict):
        raise ConfigError("config file must hold a JSON object")
    unknown = sorted(set(values) - set(CONFIG_KEYS))
    if unknown:
        raise ConfigError(f"unknown config keys: {unknown}")
    return values


def resolve_config(config_path=None, **flags) -> RunConfig:
    """Defaults, then file values, then any flags that were given."""
    merged = dict(CONFIG_KEYS)
    if config_path is not None:
        merged.update(load_config_file(config_path))
    for key, value in flags.items():
        if value is not None:
            merged[key] = value
    if isinstance(merged["combos"], str):
        merged["combos"] = [c for c in merged["combos"].split(",") if c]
    if isinstance(merged["classifiers"], str):
        merged["classifiers"] = [k for k in merged["classifiers"].split(",") if k]
    config = RunConfig(
        data=Path(merged["data"]) if merged["data"] is not None else None,
        out=Path(merged["out"]) if merged["out"] is not None else None,
        seed=merged["seed"],
        jobs=merged["jobs"],
        window=float(merged["window"]),
        slide=float(merged["slide"]),
        top_k=int(merged["top_k"]),
        per_impostor=int(merged["per_impostor"]),
        severe_threshold=float(merged["severe_threshold"]),
        combos=tuple(merged["combos"]) if merged["combos"] else None,
        kinds=tuple(merged["classifiers"]) if merged["classifiers"] else None,
        fmt=merged["format"],
        synth=merged["synth"],
        eda_features=tuple(merged["eda_features"]),
    )
    config.validate()
    return config


def write_manifest(config: RunConfig, command: str, inputs: dict, artifacts) -> Path:
    out = config.out
    doc = {
        "format": MANIFEST_FORMAT,
        "command": command,
        "config": config.public_dict(),
        "inputs": inputs,
        "artifacts": sorted(Path(p).relative_to(out).as_posix() for p in artifacts),
    }
    path = out / f"{command}_manifest.json"
    out.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
    return path


def _feature_path(out: Path, user: str, session: int) -> Path:
    return out / "features" / f"{user}_s{session}.csv"


def compute_features(config: RunConfig):
    """Featurize every subject's two sessions from the raw store."""
    store = scan_store(config.data)
    session1, session2 = {}, {}
    for user in sorted(store):
        for session in (1, 2):
            if session not in store[user]:
                raise DataError(f"subject {user} has no session {session} data")
        session1[user] = extract_session_features(
            load_session(store, user, 1), config.window, config.slide
        )
        session2[user] = extract_session_features(
            load_session(store, user, 2), config.window, config.slide
        )
    return session1, session2, store


def store_digest(config: RunConfig, store) -> str:
    paths = [p for sessions in store.values() for files in sessions.values() for p in files.values()]
    return tree_digest(config.data, paths)


def write_features(config: RunConfig, session1, session2) -> list[Path]:
    written = []
    for user in sorted(session1):
        for session, matrices in ((1, session1), (2, session2)):
            path = _feature_path(config.out, user, session)
            write_feature_csv(matrices[user], path)
            written.append(path)
    return written


def load_features(config: RunConfig):
    """Load featurized sessions written by an earlier ingest or train."""
    feature_dir = config.out / "features"
    ones = sorted(feature_dir.glob("*_s1.csv"))
    if not ones:
        raise DataError(f"{feature_dir} holds no featurized sessions")
    session1, session2 = {}, {}
    for path in ones:
        user = path.name[: -len("_s1.csv")]
        partner = _feature_path(config.out, user, 2)
        if not partner.is_file():
            raise DataError(f"subject {user} has no session 2 data")
        session1[user] = read_feature_csv(path)
        session2[user] = read_feature_csv(partner)
    return session1, session2


def ensure_features(config: RunConfig):
    """Reuse featurized sessions when present, else build and persist them.

    The CSV round-trip is exact, so both routes feed identical matrices
    downstream.
    """
    if (config.out / "features").is_dir():
        session1, session2 = load_features(config)
        return session1, session2, {}, []
    config.require("data")
    session1, session2, store = compute_features(config)
    written = write_features(config, session1, session2)
    return session1, session2, {"store": store_digest(config, store)}, written


def run_synth(config: RunConfig) -> list[str]:
    config.require("out")
    try:
        synth_config = SynthConfig(**config.synth, master_seed=config.seed)
    except TypeError as exc:
        raise ConfigError(f"invalid synth section: {exc}") from exc
    paths = generate_corpus(synth_config, config.out / "corpus")
    artifacts = (
        list(paths.genuine_files)
        + list(paths.entry_files)
        + [paths.corpus_manifest, paths.dictionary_manifest]
    )
    write_manifest(config, "synth", {}, artifacts)
    return [f"corpus with {len(paths.genuine_files)} genuine and "
            f"{len(paths.entry_files)} dictionary files under {paths.root}"]


def run_ingest(config: RunConfig) -> list[str]:
    config.require("data", "out")
    session1, session2, store = compute_features(config)
    written = write_features(config, session1, session2)
    write_manifest(config, "ingest", {"store": store_digest(config, store)}, written)
    windows = sum(m.n_rows for m in session1.values()) + sum(
        m.n_rows for m in session2.values()
    )
    return [f"featurized {len(session1)} subjects ({windows} windows)"]


def run_train(config: RunConfig) -> list[str]:
    config.require("out")
    session1, session2, inputs, artifacts = ensure_features(config)
    grid = sweep(
        session1,
        session2,
        combos=config.combos,
        kinds=config.kinds,
        master_seed=config.seed,
        per_impostor=config.per_impostor,
        top_k=config.top_k,
        jobs=config.jobs,
    )
    inputs = dict(inputs)
    inputs["features"] = tree_digest(
        config.out, (config.out / "features").glob("*.csv")
    )
    models_dir = config.out / "models"
    models_dir.mkdir(parents=True, exist_ok=True)
    cells = []
    for (user, combo, kind) in sorted(grid.cells):
        model, report = grid.cells[(user, combo, kind)]
        cell_path = models_dir / model_filename(user, combo, kind)
        save_cell(model, report, cell_path)
        artifacts.append(cell_path)
        cells.append(
            {
                "user": user,
                "combo": combo,
                "kind": kind,
                "far": report.far,
                "frr": report.frr,
                "hter": report.hter,
                "counts": report.counts,
                "model_file": f"models/{cell_path.name}",
            }
        )
    doc = {
        "format": CELLS_FORMAT,
        "master_seed": config.seed,
        "users": list(grid.users),
        "combos": list(grid.combos),
        "kinds": list(grid.kinds),
        "cells": cells,
        "failures": [
            {"user": u, "combo": c, "kind": k, "error": msg}
            for (u, c, k), msg in sorted(grid.failures.items())
        ],
    }
    cells_path = config.out / "train" / "cells.json"
    cells_path.parent.mkdir(parents=True, exist_ok=True)
    cells_path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
    artifacts.append(cells_path)
    write_manifest(config, "train", inputs, artifacts)
    messages = [f"trained {len(cells)} cells over {len(grid.users)} users"]
    if grid.failures:
        raise PartialSweepFailure(grid.failures)
    return messages


def _load_baseline(config: RunConfig):
    cells_path = config.out / "train" / "cells.json"
    try:
        doc = json.loads(cells_path.read_text())
    except OSError as exc:
        raise DataError(f"no trained cells at {cells_path}; run train first") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{cells_path} is not valid JSON: {exc}") from exc
    if doc.get("format") != CELLS_FORMAT:
        raise DataError(f"{cells_path} is not a {CELLS_FORMAT} file")
    return doc


def _grid_from_store(config: RunConfig, doc) -> BaselineGrid:
    cells = {}
    for row in doc["cells"]:
        path = config.out / row["model_file"]
        model, report = load_cell(path)
        cells[(row["user"], row["combo"], row["kind"])] = (model, report)
    return BaselineGrid(
        cells=cells,
        users=tuple(doc["users"]),
        combos=tuple(doc["combos"]),
        kinds=tuple(doc["kinds"]),
    )


def run_attack(config: RunConfig) -> list[str]:
    config.require("data", "out")
    manifest_path = config.data / "dictionary" / "manifest.json"
    dictionary = build_dictionary(manifest_path)
    if len(dictionary) == 0:
        raise DataError(f"{manifest_path} lists no dictionary entries")
    doc = _load_baseline(config)
    grid = _grid_from_store(config, doc)
    report = attack_matrix(grid, dictionary, config.window, config.slide)
    if not report.rows:
        raise DataError("no trained cells to attack")
    _, session2 = load_features(config)
    rates = {
        key: per_impostor_rates(grid.cells[key][0], session2) for key in report.rows
    }

    attack_dir = config.out / "attack"
    attack_dir.mkdir(parents=True, exist_ok=True)
    artifacts = []

    def emit(name, text):
        path = attack_dir / name
        path.write_text(text)
        artifacts.append(path)

    emit("long.csv", long_csv(report))
    emit("summary.csv", summary_csv(report))
    emit("far_distribution.csv", far_distribution_csv(report, rates))

    menagerie_lines = ["user,combo,kind,label"]
    for combo, kind in sorted({(c, k) for _, c, k in report.rows}):
        labels = classify_menagerie(report, combo, kind, config.severe_threshold)
        for user, label in sorted(labels.items()):
            menagerie_lines.append(f"{user},{combo},{kind},{label}")
    emit("menagerie.csv", "\n".join(menagerie_lines) + "\n")

    cells = [
        {
            "user": user,
            "combo": combo,
            "kind": kind,
            "zero_far": cell.zero.far,
            "zero_frr": cell.zero.frr,
            "zero_hter": cell.zero.hter,
            "dict_far": cell.dict_far,
            "dict_hter": cell.dict_hter,
            "best_entry": cell.attack.best_key,
        }
        for (user, combo, kind), cell in sorted(report.rows.items())
    ]
    emit(
        "cells.json",
        json.dumps(
            {
                "format": ATTACK_CELLS_FORMAT,
                "window": config.window,
                "slide": config.slide,
                "severe_threshold": config.severe_threshold,
                "cells": cells,
                "skipped": [list(k) for k in report.skipped],
            },
            sort_keys=True,
            indent=2,
        )
        + "\n",
    )

    inputs = {
        "dictionary": file_digest(manifest_path),
        "models": tree_digest(
            config.out, (config.out / "models").glob("*.json")
        ),
        "features": tree_digest(
            config.out, (config.out / "features").glob("*.csv")
        ),
    }
    write_manifest(config, "attack", inputs, artifacts)
    messages = [f"attacked {len(report.rows)} cells with {len(dictionary)} entries"]
    if report.skipped:
        messages.append(f"skipped {len(report.skipped)} untrained cells")
    return messages


def run_eda(config: RunConfig) -> list[str]:
    config.require("data", "out")
    manifest_path = config.data / "dictionary" / "manifest.json"
    dictionary = build_dictionary(manifest_path)
    if len(dictionary) == 0:
        raise DataError(f"{manifest_path} lists no dictionary entries")
    imitators = sorted({e.imitator_id for e in dictionary})
    eda_dir = config.out / "eda"
    eda_dir.mkdir(parents=True, exist_ok=True)
    artifacts = []

    cells = []
    for imitator in imitators:
        cells.extend(
            factor_feature_correlations(
                dictionary,
                imitator,
                config.eda_features,
                window=config.window,
                slide=config.slide,
            )
        )
    corr_path = eda_dir / "correlations.csv"
    corr_path.write_text(correlations_csv(cells))
    artifacts.append(corr_path)

    grid_count = 0
    for imitator in imitators:
        for factor, grid in grids_by_factor(
            dictionary, imitator, window_s=config.window
        ).items():
            stem = f"overlap_{imitator}_{factor}"
            matrix = matrix_from_grid(grid)
            path = eda_dir / f"{stem}.csv"
            path.write_text(matrix_csv(matrix))
            artifacts.append(path)
            if config.fmt == "svg":
                svg_path = eda_dir / f"{stem}.svg"
                svg_path.write_text(matrix_svg(matrix))
                artifacts.append(svg_path)
            grid_count += 1

    write_manifest(config, "eda", {"dictionary": file_digest(manifest_path)}, artifacts)
    return [f"{len(cells)} correlation cells and {grid_count} overlap grids "
            f"for {len(imitators)} imitators"]


def _mean_matrix(rows: dict, combos, kinds, sort_rows=True) -> LabeledMatrix:
    """Combos-by-kinds mean over users with the report's row ordering."""
    values = np.full((len(combos), len(kinds)), np.nan)
    for i, combo in enumerate(combos):
        for j, kind in enumerate(kinds):
            got = rows.get((combo, kind))
            if got:
                values[i, j] = float(np.mean(got))
    if sort_rows:
        keys = np.array(
            [np.inf if np.all(np.isnan(r)) else np.nanmean(r) for r in values]
        )
        order = np.argsort(keys, kind="stable")
        return LabeledMatrix(
            tuple(combos[i] for i in order), tuple(kinds), values[order]
        )
    return LabeledMatrix(tuple(combos), tuple(kinds), values)


def run_report(config: RunConfig) -> list[str]:
    config.require("out")
    doc = _load_baseline(config)
    report_dir = config.out / "report"
    report_dir.mkdir(parents=True, exist_ok=True)
    artifacts = []
    inputs = {"cells": file_digest(config.out / "train" / "cells.json")}

    grid = BaselineGrid(
        cells={
            (r["user"], r["combo"], r["kind"]): (
                None,
                EvalReport(r["far"], r["frr"], r["hter"], r["counts"]),
            )
            for r in doc["cells"]
        },
        users=tuple(doc["users"]),
        combos=tuple(doc["combos"]),
        kinds=tuple(doc["kinds"]),
    )

    def emit(name, matrix):
        path = report_dir / f"{name}.csv"
        path.write_text(matrix_csv(matrix))
        artifacts.append(path)
        if config.fmt == "svg":
            svg_path = report_dir / f"{name}.svg"
            svg_path.write_text(matrix_svg(matrix))
            artifacts.append(svg_path)

    emit("zero_far", rate_matrix(grid, "far"))
    emit("zero_hter", rate_matrix(grid, "hter"))
    rendered = ["zero_far", "zero_hter"]

    attack_path = config.out / "attack" / "cells.json"
    if attack_path.is_file():
        try:
            attack_doc = json.loads(attack_path.read_text())
        except json.JSONDecodeError as exc:
            raise DataError(f"{attack_path} is not valid JSON: {exc}") from exc
        if attack_doc.get("format") != ATTACK_CELLS_FORMAT:
            raise DataError(f"{attack_path} is not a {ATTACK_CELLS_FORMAT} file")
        inputs["attack_cells"] = file_digest(attack_path)
        combos = tuple(doc["combos"])
        kinds = tuple(doc["kinds"])
        for metric in ("dict_far", "dict_hter"):
            rows = {}
            for cell in attack_doc["cells"]:
                rows.setdefault((cell["combo"], cell["kind"]), []).append(cell[metric])
            emit(metric, _mean_matrix(rows, combos, kinds))
            rendered.append(metric)

    write_manifest(config, "report", inputs, artifacts)
    return [f"rendered {', '.join(rendered)} as {config.fmt}"]


def _execute(runner, config_path, **flags):
    try:
        config = resolve_config(config_path, **flags)
        for line in runner(config):
            click.echo(line)
    except PartialSweepFailure as exc:
        click.echo(f"error: {exc}", err=True)
        for (user, combo, kind), message in sorted(exc.failures.items()):
            click.echo(f"  {user}/{combo}/{kind}: {message}", err=True)
        sys.exit(EXIT_PARTIAL)
    except (ConfigError, ValueError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except DataError as exc:
        click.echo(f"data error: {exc}", err=True)
        sys.exit(EXIT_DATA)
    except Exception as exc:  # pragma: no cover - defensive
        click.echo(f"internal error: {type(exc).__name__}: {exc}", err=True)
        sys.exit(EXIT_INTERNAL)


def _common(fn):
    fn = click.option("--config", "config_path", type=click.Path(), default=None,
                      help="JSON config file; flags override its values.")(fn)
    fn = click.option("--seed", type=int, default=None, help="Master seed.")(fn)
    fn = click.option("--out", type=click.Path(), default=None,
                      help="Output root directory.")(fn)
    return fn


def _data_option(fn):
    return click.option("--data", type=click.Path(), default=None,
                        help="Data root (raw store or corpus).")(fn)


def _window_options(fn):
    fn = click.option("--window", type=float, default=None,
                      help="Window length in seconds.")(fn)
    fn = click.option("--slide", type=float, default=None,
                      help="Window slide in seconds.")(fn)
    return fn


@click.group()
def main():
    """Gait-authentication benchmark and dictionary-attack workflows."""


@main.command()
@_common
def synth(config_path, seed, out):
    """Generate a synthetic corpus (genuine store plus dictionary)."""
    _execute(run_synth, config_path, seed=seed, out=out)


@main.command()
@_common
@_data_option
@_window_options
def ingest(config_path, seed, out, data, window, slide):
    """Validate raw recordings and persist windowed features."""
    _execute(run_ingest, config_path, seed=seed, out=out, data=data,
             window=window, slide=slide)


@main.command()
@_common
@_data_option
@_window_options
@click.option("--jobs", type=int, default=None, help="Parallel workers.")
@click.option("--combos", type=str, default=None,
              help="Comma-separated sensor combos (default: all 15).")
@click.option("--classifiers", type=str, default=None,
              help="Comma-separated classifier kinds (default: all 5).")
@click.option("--top-k", type=int, default=None, help="Features kept per sensor.")
@click.option("--per-impostor", type=int, default=None,
              help="Training vectors sampled per impostor.")
def train(config_path, seed, out, data, window, slide, jobs, combos, classifiers,
          top_k, per_impostor):
    """Train and evaluate the per-user authentication grid."""
    _execute(run_train, config_path, seed=seed, out=out, data=data, window=window,
             slide=slide, jobs=jobs, combos=combos, classifiers=classifiers,
             top_k=top_k, per_impostor=per_impostor)


@main.command()
@_common
@_data_option
@_window_options
@click.option("--severe-threshold", type=float, default=None,
              help="Best-entry FAR at or above this is severely impacted.")
def attack(config_path, seed, out, data, window, slide, severe_threshold):
    """Run the dictionary attack against every trained cell."""
    _execute(run_attack, config_path, seed=seed, out=out, data=data, window=window,
             slide=slide, severe_threshold=severe_threshold)


@main.command()
@_common
@_data_option
@_window_options
@click.option("--format", "fmt", type=click.Choice(["csv", "svg"]), default=None,
              help="Also render SVG heatmaps when svg.")
def eda(config_path, seed, out, data, window, slide, fmt):
    """Factor-feature correlations and window-overlap heatmaps."""
    _execute(run_eda, config_path, seed=seed, out=out, data=data, window=window,
             slide=slide, format=fmt)


@main.command()
@_common
@click.option("--format", "fmt", type=click.Choice(["csv", "svg"]), default=None,
              help="Also render SVG heatmaps when svg.")
def report(config_path, seed, out, fmt):
    """Render rate matrices from stored train and attack results."""
    _execute(run_report, config_path, seed=seed, out=out, format=fmt)


if __name__ == "__main__":
    main()
