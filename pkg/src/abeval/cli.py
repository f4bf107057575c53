"""Command-line entry point.

Subcommands cover the full pipeline: ingest logs, annotate sessions,
build the feature matrix, train and evaluate the rating predictor, estimate
A/B effects, validate the estimators by simulation, and correlate effect
columns. Every randomized step takes --seed and reruns byte-identically;
timestamps live only in meta.json.

Exit codes: 0 success, 2 configuration problem, 3 data problem,
4 annotator failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .annotator import AnnotatorConfig, FixtureAnnotator, HttpAnnotator
from .errors import (
    AbevalError,
    AnnotatorError,
    ConfigError,
    DataError,
    InsufficientDataError,
)
from .events import ParsedLog, parse_event_log, sessions_to_jsonl, split_by_condition
from .features import (
    AnnotationStore,
    ENCODING_SCHEMA_HASH,
    FEATURE_NAMES,
    GIT_SUBCOMMANDS,
    ISSUE_NAMES,
    annotate_sessions,
    build_feature_rows,
    encoded_matrix,
    read_feature_csv,
    write_feature_csv,
)
from .inference import (
    ConditionData,
    augmented_effect,
    compare_features,
    correlate_deltas,
    naive_estimate,
)
from .predictor import (
    cross_validate,
    feature_importance,
    make_model,
    model_to_json,
    pearson,
)
from .reports import (
    abtest_markdown,
    canonical_json,
    config_hash,
    correlate_markdown,
    eval_markdown,
    simulate_markdown,
)
from .seeds import derive_seed, rng_for
from .simulate import MonteCarloReport, SimConfig, monte_carlo


class OutputDir:
    """Collects written files so a failed run leaves no partial outputs."""

    def __init__(self, path: str):
        self.path = path
        self.created: list[str] = []

    def write_text(self, name: str, text: str) -> str:
        os.makedirs(self.path, exist_ok=True)
        full = os.path.join(self.path, name)
        with open(full, "w", encoding="utf-8") as fh:
            fh.write(text)
        self.created.append(full)
        return full

    def discard(self) -> None:
        for full in self.created:
            try:
                os.unlink(full)
            except OSError:
                pass
        self.created.clear()


def _write_meta(out: OutputDir, args, inputs: list[str], extra: dict | None = None) -> None:
    meta = {
        "tool": "abeval",
        "version": __version__,
        "created_at": datetime.now(timezone.utc).isoformat(),
        "command": args.command,
        "inputs": inputs,
        "argv": sys.argv[1:] if sys.argv else [],
    }
    if extra:
        meta.update(extra)
    out.write_text("meta.json", canonical_json(meta))


# ── shared input handling ────────────────────────────────────────────


def _read_log_files(paths: list[str], *, lenient: bool, condition_field: str) -> ParsedLog:
    lines: list[str] = []
    spans: list[tuple[str, int]] = []  # (path, first line number in the stream)
    for path in paths:
        try:
            with open(path, encoding="utf-8") as fh:
                file_lines = fh.readlines()
        except OSError as exc:
            raise ConfigError(f"cannot read input {path}: {exc}") from exc
        spans.append((path, len(lines) + 1))
        lines.extend(file_lines)
    try:
        return parse_event_log(lines, lenient=lenient, condition_field=condition_field)
    except DataError as exc:
        line_no = getattr(exc, "line_no", None)
        if line_no is not None:
            for path, start in reversed(spans):
                if line_no >= start:
                    raise DataError(f"{path}:{line_no - start + 1}: {exc}") from exc
        raise


def _resolve_annotator(args):
    if getattr(args, "mock_annotator", None):
        return FixtureAnnotator(args.mock_annotator)
    if getattr(args, "annotator_config", None):
        return HttpAnnotator(AnnotatorConfig.from_file(args.annotator_config))
    return None


def _judged_features(args, sessions):
    store = None
    if getattr(args, "annotations", None):
        store = AnnotationStore(args.annotations)
    annotator = _resolve_annotator(args)
    if annotator is None:
        if store is None:
            raise ConfigError(
                "raw logs need an annotation source: --annotations, "
                "--mock-annotator, or --annotator-config"
            )
        missing = [s.id for s in sessions if s.id not in store]
        if missing:
            raise ConfigError(
                f"annotation cache lacks {len(missing)} sessions (e.g. {missing[:3]}) "
                "and no annotator was configured"
            )
        return {s.id: store.get(s.id) for s in sessions}
    return annotate_sessions(
        sessions, annotator, store=store, max_workers=getattr(args, "max_in_flight", 4)
    )


def _feature_rows_from_input(args):
    """Rows from a feature matrix CSV, or from logs plus an annotation source.
    Returns (rows, from_logs)."""
    paths = args.input
    if len(paths) == 1 and paths[0].endswith(".csv"):
        return read_feature_csv(paths[0]), False
    parsed = _read_log_files(paths, lenient=args.lenient, condition_field=args.condition_field)
    judged = _judged_features(args, parsed.sessions)
    return build_feature_rows(parsed.sessions, judged), True


def _comparable_values(rows) -> dict[str, np.ndarray]:
    values: dict[str, list[float]] = {name: [] for name in ISSUE_NAMES}
    values["user_message_count"] = []
    for sub in GIT_SUBCOMMANDS:
        values[f"git_{sub}"] = []
    for row in rows:
        readable = row.readable_values()
        for name in values:
            values[name].append(float(readable[name]))
    return {name: np.array(vals) for name, vals in values.items()}


# ── subcommands ──────────────────────────────────────────────────────


def cmd_ingest(args) -> int:
    parsed = _read_log_files(args.input, lenient=args.lenient, condition_field=args.condition_field)
    by_condition = split_by_condition(parsed.sessions)
    summary = {
        "sessions": len(parsed.sessions),
        "skipped_lines": parsed.skipped_lines,
        "warnings": parsed.warnings,
        "conditions": {
            cond: {
                "labeled": len(ds.labeled),
                "unlabeled": len(ds.unlabeled),
                "segments": sum(len(s.segments) for s in ds.sessions),
            }
            for cond, ds in by_condition.items()
        },
    }
    if args.out:
        out = OutputDir(args.out)
        try:
            out.write_text("sessions.jsonl", sessions_to_jsonl(parsed.sessions))
            out.write_text("ingest.json", canonical_json(summary))
            _write_meta(out, args, args.input)
        except BaseException:
            out.discard()
            raise
    print(f"parsed {summary['sessions']} sessions "
          f"({parsed.skipped_lines} lines skipped, {len(parsed.warnings)} warnings)")
    for cond, stats in summary["conditions"].items():
        print(f"  condition {cond}: {stats['labeled']} labeled + "
              f"{stats['unlabeled']} unlabeled, {stats['segments']} segments")
    return 0


def cmd_annotate(args) -> int:
    parsed = _read_log_files(args.input, lenient=args.lenient, condition_field=args.condition_field)
    annotator = _resolve_annotator(args)
    if annotator is None:
        raise ConfigError("annotate needs --mock-annotator or --annotator-config")
    cache_path = args.annotations or os.path.join(args.out, "annotations.jsonl")
    os.makedirs(os.path.dirname(cache_path) or ".", exist_ok=True)
    store = AnnotationStore(cache_path)
    cached_before = sum(1 for s in parsed.sessions if s.id in store)
    annotate_sessions(parsed.sessions, annotator, store=store,
                      max_workers=args.max_in_flight)
    out = OutputDir(args.out)
    try:
        _write_meta(out, args, args.input, {"annotations": cache_path})
    except BaseException:
        out.discard()
        raise
    print(f"annotated {len(parsed.sessions) - cached_before} sessions "
          f"({cached_before} already cached) -> {cache_path}")
    return 0


def cmd_features(args) -> int:
    parsed = _read_log_files(args.input, lenient=args.lenient, condition_field=args.condition_field)
    judged = _judged_features(args, parsed.sessions)
    rows = build_feature_rows(parsed.sessions, judged)
    out = OutputDir(args.out)
    try:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, "features.csv")
        out.created.append(path)
        write_feature_csv(rows, path)
        _write_meta(out, args, args.input, {"rows": len(rows)})
    except BaseException:
        out.discard()
        raise
    labeled = sum(1 for r in rows if r.rating is not None)
    print(f"wrote {len(rows)} feature rows ({labeled} labeled) -> {path}")
    return 0


def _model_hyper(args) -> dict:
    if args.model == "ridge":
        return {"penalty": args.ridge_penalty}
    return {
        "n_trees": args.trees,
        "max_depth": args.max_depth,
        "min_leaf": args.min_leaf,
    }


def _labeled_matrix(rows):
    labeled = [r for r in rows if r.rating is not None]
    if len(labeled) < 2:
        raise InsufficientDataError("need >= 2 labeled rows")
    X = encoded_matrix(labeled)
    y = np.array([r.rating for r in labeled])
    return labeled, X, y


def cmd_train(args) -> int:
    rows, _ = _feature_rows_from_input(args)
    labeled, X, y = _labeled_matrix(rows)
    model = make_model(args.model, **_model_hyper(args))
    model.fit(X, y, seed=args.seed)
    out = OutputDir(args.out)
    try:
        path = out.write_text("model.json", model_to_json(model))
        _write_meta(out, args, args.input, {"rows": len(labeled)})
    except BaseException:
        out.discard()
        raise
    print(f"fit {args.model} on {len(labeled)} labeled rows "
          f"(schema {ENCODING_SCHEMA_HASH}) -> {path}")
    return 0


def cmd_eval(args) -> int:
    rows, _ = _feature_rows_from_input(args)
    labeled, X, y = _labeled_matrix(rows)
    kinds = ("ridge", "forest") if args.model == "both" else (args.model,)
    models_report = {}
    for kind in kinds:
        hyper = {"penalty": args.ridge_penalty} if kind == "ridge" else {
            "n_trees": args.trees, "max_depth": args.max_depth, "min_leaf": args.min_leaf}
        cv = cross_validate(lambda: make_model(kind, **hyper), X, y,
                            k=args.folds, seed=args.seed)
        models_report[kind] = cv.to_dict()
    importance_kind = kinds[-1]
    hyper = {"penalty": args.ridge_penalty} if importance_kind == "ridge" else {
        "n_trees": args.trees, "max_depth": args.max_depth, "min_leaf": args.min_leaf}
    fitted = make_model(importance_kind, **hyper).fit(X, y, seed=args.seed)
    importance = feature_importance(fitted, X, y, seed=args.seed)
    report = {
        "n_rows": len(labeled),
        "folds": args.folds,
        "seed": args.seed,
        "schema_hash": ENCODING_SCHEMA_HASH,
        "models": models_report,
        "importance_model": importance_kind,
        "importance": [[name, value] for name, value in importance],
    }
    out = OutputDir(args.out)
    try:
        out.write_text("eval.json", canonical_json(report))
        out.write_text("eval.md", eval_markdown(report))
        _write_meta(out, args, args.input)
    except BaseException:
        out.discard()
        raise
    for kind, metrics in models_report.items():
        print(f"{kind}: mse {metrics['mse']:.4f} mae {metrics['mae']:.4f} "
              f"pearson {metrics['pearson']:.4f}")
    return 0


def _pick_conditions(rows, requested):
    present = sorted({r.condition for r in rows})
    if requested:
        missing = [c for c in requested if c not in present]
        if missing:
            raise DataError(f"conditions not in data: {missing} (present: {present})")
        return requested
    if len(present) != 2:
        raise ConfigError(
            f"data has conditions {present}; pass --conditions A B to pick two"
        )
    return present


def _train_predictor(args, rows_by_cond, conditions):
    """Fit the rating predictor and return per-condition ConditionData.

    Default trains one pooled model on all labeled rows across conditions
    and scores every session with it. --holdout reserves a seeded fraction
    of labeled rows per condition for training only, so the PPI correction
    uses labels the model never saw. --per-condition-model fits one model
    per condition instead of pooling.
    """
    train_rows = []
    infer_labeled = {c: [] for c in conditions}
    rng = rng_for(args.seed, 1000)
    for cond in conditions:
        labeled = [r for r in rows_by_cond[cond] if r.rating is not None]
        if len(labeled) < 2:
            raise InsufficientDataError(f"condition {cond!r} needs >= 2 labeled sessions")
        if args.holdout > 0.0:
            n_train = int(round(args.holdout * len(labeled)))
            if n_train < 1 or len(labeled) - n_train < 2:
                raise ConfigError(
                    f"--holdout {args.holdout} leaves too few rows in condition {cond!r}"
                )
            order = rng.permutation(len(labeled))
            chosen = set(order[:n_train].tolist())
            train_rows.extend(labeled[i] for i in sorted(chosen))
            infer_labeled[cond] = [labeled[i] for i in range(len(labeled)) if i not in chosen]
        else:
            train_rows.extend(labeled)
            infer_labeled[cond] = labeled

    def fit(rows_subset, seed):
        model = make_model(args.model, **_model_hyper(args))
        X = encoded_matrix(rows_subset)
        y = np.array([r.rating for r in rows_subset])
        return model.fit(X, y, seed=seed)

    models = {}
    if args.per_condition_model:
        for i, cond in enumerate(conditions):
            cond_train = [r for r in train_rows if r.condition == cond]
            models[cond] = fit(cond_train, derive_seed(args.seed, 2000 + i))
    else:
        pooled = fit(train_rows, derive_seed(args.seed, 2000))
        for cond in conditions:
            models[cond] = pooled

    data = {}
    predictor_info = {}
    for cond in conditions:
        labeled = infer_labeled[cond]
        unlabeled = [r for r in rows_by_cond[cond] if r.rating is None]
        labels = np.array([r.rating for r in labeled])
        f_lab = models[cond].predict(encoded_matrix(labeled))
        f_unl = (
            models[cond].predict(encoded_matrix(unlabeled))
            if unlabeled
            else np.array([])
        )
        data[cond] = ConditionData(
            condition=cond, labels=labels, f_labeled=f_lab, f_unlabeled=f_unl
        )
        predictor_info[cond] = {"pearson_labeled": pearson(f_lab, labels)}
    return data, predictor_info


def cmd_abtest(args) -> int:
    rows, from_logs = _feature_rows_from_input(args)
    conditions = _pick_conditions(rows, args.conditions)
    cond_a, cond_b = conditions
    rows_by_cond = {c: [r for r in rows if r.condition == c] for c in conditions}
    data, predictor_info = _train_predictor(args, rows_by_cond, conditions)

    naive = naive_estimate(
        data[cond_a], data[cond_b],
        alpha=args.alpha,
        permutation_draws=args.permutations,
        bootstrap_draws=args.bootstrap,
        seed=derive_seed(args.seed, 1),
    )
    augmented = augmented_effect(
        data[cond_a], data[cond_b], alpha=args.alpha, mode=args.lambda_mode
    )
    comparison = compare_features(
        _comparable_values(rows_by_cond[cond_a]),
        _comparable_values(rows_by_cond[cond_b]),
        draws=args.permutations,
        seed=derive_seed(args.seed, 2),
    )

    resolved = {
        "alpha": args.alpha,
        "bootstrap": args.bootstrap,
        "conditions": conditions,
        "holdout": args.holdout,
        "inputs": [os.path.basename(p) for p in args.input],
        "lambda_mode": args.lambda_mode,
        "model": {"kind": args.model, **_model_hyper(args)},
        "per_condition_model": args.per_condition_model,
        "permutations": args.permutations,
        "seed": args.seed,
    }
    report = {
        "tool": {"name": "abeval", "version": __version__},
        "seed": args.seed,
        "config_hash": config_hash(resolved),
        "alpha": args.alpha,
        "lambda_mode": args.lambda_mode,
        "schema_hash": ENCODING_SCHEMA_HASH,
        "conditions": conditions,
        "counts": {
            c: {"n": data[c].n, "n_unlabeled": data[c].n_unlabeled} for c in conditions
        },
        "predictor": {
            "kind": args.model,
            "hyperparameters": _model_hyper(args),
            "per_condition": predictor_info,
            "holdout": args.holdout,
        },
        "estimates": {"naive": naive.to_dict(), "augmented": augmented.to_dict()},
        "feature_comparison": [row.to_dict() for row in comparison],
    }
    out = OutputDir(args.out)
    try:
        out.write_text("report.json", canonical_json(report))
        out.write_text("report.md", abtest_markdown(report))
        if from_logs:
            path = os.path.join(args.out, "features.csv")
            out.created.append(path)
            write_feature_csv(rows, path)
        _write_meta(out, args, args.input)
    except BaseException:
        out.discard()
        raise
    print(f"effect {cond_a} - {cond_b} on mean rating")
    print(f"  naive:     {naive.delta:+.3f}  CI [{naive.ci_low:.3f}, {naive.ci_high:.3f}]"
          f"  p {naive.p_value:.4f}")
    print(f"  augmented: {augmented.delta:+.3f}  CI [{augmented.ci_low:.3f}, "
          f"{augmented.ci_high:.3f}]  p {augmented.p_value:.4f}")
    print(f"reports in {args.out}")
    return 0


def _load_sim_file(path: str) -> dict:
    try:
        if path.endswith(".toml"):
            try:
                import tomllib  # Python >= 3.11
            except ModuleNotFoundError:
                import tomli as tomllib
            with open(path, "rb") as fh:
                return tomllib.load(fh)
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read simulate config {path}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"simulate config {path} is invalid: {exc}") from exc


_SIM_KEYS = {
    "n_labeled", "n_unlabeled", "mean_a", "mean_b", "noise_sd",
    "predictor_corr", "discretize", "seed", "trials", "alpha", "lambda_mode",
    "permutations", "bootstrap",
}


def cmd_simulate(args) -> int:
    settings: dict = {}
    if args.config:
        settings = _load_sim_file(args.config)
        unknown = set(settings) - _SIM_KEYS
        if unknown:
            raise ConfigError(f"unknown simulate config keys: {sorted(unknown)}")
    for key in _SIM_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            settings[key] = flag
    trials = int(settings.pop("trials", 1000))
    alpha = float(settings.pop("alpha", 0.05))
    lambda_mode = settings.pop("lambda_mode", "ppi++")
    permutation_draws = int(settings.pop("permutations", 499))
    bootstrap_draws = int(settings.pop("bootstrap", 500))
    try:
        cfg = SimConfig(**settings)
    except TypeError as exc:
        raise ConfigError(f"bad simulate settings: {exc}") from exc
    report_obj: MonteCarloReport = monte_carlo(
        cfg,
        trials,
        alpha=alpha,
        lambda_mode=lambda_mode,
        permutation_draws=permutation_draws,
        bootstrap_draws=bootstrap_draws,
    )
    report = report_obj.to_dict()
    out = OutputDir(args.out)
    try:
        out.write_text("report.json", canonical_json(report))
        out.write_text("report.md", simulate_markdown(report))
        _write_meta(out, args, [args.config] if args.config else [])
    except BaseException:
        out.discard()
        raise
    print(f"{trials} trials: coverage naive {report['coverage_naive']:.3f} / "
          f"augmented {report['coverage_augmented']:.3f}, "
          f"width reduction {report['width_reduction']:.3f}")
    return 0


def cmd_correlate(args) -> int:
    try:
        with open(args.input[0], encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                raise DataError(f"{args.input[0]}: empty CSV")
            if len(header) not in (2, 3):
                raise DataError(
                    f"{args.input[0]}: expected 2 columns (x,y) or 3 (label,x,y)"
                )
            has_label = len(header) == 3
            rows = []
            for line_no, record in enumerate(reader, start=2):
                if not record:
                    continue
                if len(record) != len(header):
                    raise DataError(f"{args.input[0]}:{line_no}: ragged row")
                try:
                    x, y = float(record[-2]), float(record[-1])
                except ValueError as exc:
                    raise DataError(f"{args.input[0]}:{line_no}: {exc}") from exc
                label = record[0] if has_label else f"row {line_no - 1}"
                rows.append({"label": label, "x": x, "y": y})
    except OSError as exc:
        raise ConfigError(f"cannot read {args.input[0]}: {exc}") from exc

    rho = correlate_deltas([(r["x"], r["y"]) for r in rows])
    notes = []
    if args.reference_rho is not None:
        ref = args.reference_rho
        label = args.reference_label or "reference"
        notes.append(f"{label}: r = {ref:g} (computed r = {rho:.4f}, gap {abs(rho - ref):.4f})")
        if (rho < 0) != (ref < 0) and rho != 0 and ref != 0:
            notes.append(
                f"sign disagreement: computed r is {'negative' if rho < 0 else 'positive'} "
                f"but {label} is {'negative' if ref < 0 else 'positive'}"
            )
    report = {"pearson": rho, "n": len(rows), "rows": rows, "notes": notes}
    out = OutputDir(args.out)
    try:
        out.write_text("report.json", canonical_json(report))
        out.write_text("report.md", correlate_markdown(report))
        _write_meta(out, args, args.input)
    except BaseException:
        out.discard()
        raise
    print(f"pearson r = {rho:.4f} over {len(rows)} rows")
    for note in notes:
        print(f"note: {note}")
    return 0


# ── parser ───────────────────────────────────────────────────────────


def _add_io(p, *, multi_input=True, out_default="."):
    p.add_argument("--input", nargs="+" if multi_input else 1, required=True,
                   help="input file(s): JSONL event logs or a features.csv")
    p.add_argument("--out", default=out_default, help="output directory")
    p.add_argument("--seed", type=int, default=0, help="RNG seed (u64)")


def _add_log_opts(p):
    p.add_argument("--lenient", action="store_true",
                   help="skip bad lines and repair segments instead of failing")
    p.add_argument("--condition-field", default="condition",
                   help="JSONL field naming the experiment condition")


def _add_annotation_opts(p):
    p.add_argument("--annotations", help="annotation cache JSONL (read, and fill when judging)")
    p.add_argument("--mock-annotator", help="fixture JSONL with canned annotator responses")
    p.add_argument("--annotator-config", help="JSON config for a live annotator endpoint")
    p.add_argument("--max-in-flight", type=int, default=4,
                   help="max concurrent annotator requests")


def _add_model_opts(p, *, allow_both=False):
    choices = ["ridge", "forest"] + (["both"] if allow_both else [])
    p.add_argument("--model", choices=choices, default="forest" if not allow_both else "both",
                   help="predictor kind")
    p.add_argument("--ridge-penalty", type=float, default=1.0, help="ridge L2 strength")
    p.add_argument("--trees", type=int, default=400, help="forest size")
    p.add_argument("--max-depth", type=int, default=12, help="forest tree depth limit")
    p.add_argument("--min-leaf", type=int, default=5, help="forest minimum leaf size")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="abeval",
        description="Estimate A/B effects on user satisfaction from agent session logs.",
    )
    parser.add_argument("--version", action="version", version=f"abeval {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse event logs and summarize sessions")
    _add_io(p)
    _add_log_opts(p)
    p.set_defaults(func=cmd_ingest, out=None)
    p.add_argument("--write", dest="out", help="directory for normalized sessions.jsonl")

    p = sub.add_parser("annotate", help="judge sessions with the LLM annotator")
    _add_io(p)
    _add_log_opts(p)
    _add_annotation_opts(p)
    p.set_defaults(func=cmd_annotate)

    p = sub.add_parser("features", help="build the feature matrix CSV")
    _add_io(p)
    _add_log_opts(p)
    _add_annotation_opts(p)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("train", help="fit the rating predictor")
    _add_io(p)
    _add_log_opts(p)
    _add_annotation_opts(p)
    _add_model_opts(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="cross-validate predictor quality")
    _add_io(p)
    _add_log_opts(p)
    _add_annotation_opts(p)
    _add_model_opts(p, allow_both=True)
    p.add_argument("--folds", type=int, default=5)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("abtest", help="estimate the effect between two conditions")
    _add_io(p)
    _add_log_opts(p)
    _add_annotation_opts(p)
    _add_model_opts(p)
    p.add_argument("--conditions", nargs=2, metavar=("A", "B"),
                   help="conditions to compare (effect is A minus B)")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--permutations", type=int, default=10000,
                   help="permutation test draws")
    p.add_argument("--bootstrap", type=int, default=2000, help="bootstrap draws")
    p.add_argument("--lambda-mode", choices=["ppi++", "plain"], default="ppi++",
                   dest="lambda_mode")
    p.add_argument("--holdout", type=float, default=0.0,
                   help="fraction of labeled rows reserved for predictor training only")
    p.add_argument("--per-condition-model", action="store_true",
                   help="fit one predictor per condition instead of pooling")
    p.set_defaults(func=cmd_abtest)

    p = sub.add_parser("simulate", help="Monte Carlo validation of the estimators")
    p.add_argument("--config", help="SimConfig as TOML or JSON")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--n-labeled", type=int, default=None, dest="n_labeled")
    p.add_argument("--n-unlabeled", type=int, default=None, dest="n_unlabeled")
    p.add_argument("--mean-a", type=float, default=None, dest="mean_a")
    p.add_argument("--mean-b", type=float, default=None, dest="mean_b")
    p.add_argument("--noise-sd", type=float, default=None, dest="noise_sd")
    p.add_argument("--predictor-corr", type=float, default=None, dest="predictor_corr")
    p.add_argument("--discretize", action="store_const", const=True, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--lambda-mode", choices=["ppi++", "plain"], default=None,
                   dest="lambda_mode")
    p.add_argument("--permutations", type=int, default=None,
                   help="per-trial permutation draws")
    p.add_argument("--bootstrap", type=int, default=None, help="per-trial bootstrap draws")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("correlate", help="Pearson correlation between effect columns")
    _add_io(p)
    p.add_argument("--reference-rho", type=float, default=None,
                   help="externally reported r to compare against")
    p.add_argument("--reference-label", default=None,
                   help="name for the reference value in the report")
    p.set_defaults(func=cmd_correlate)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except AnnotatorError as exc:
        print(f"annotator error: {exc}", file=sys.stderr)
        return 4
    except AbevalError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
