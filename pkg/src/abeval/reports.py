"""Deterministic report rendering (canonical JSON and Markdown).

Reports embed the seed, config hash, sample sizes, and fitted lambdas, and
contain no timestamps, so a rerun with the same inputs and seed reproduces
them byte for byte. Run metadata with timestamps goes to meta.json only.
"""

from __future__ import annotations

import hashlib
import json
from typing import Sequence

from .inference import EffectEstimate, FeatureComparison

FEATURE_DISPLAY = {
    "misunderstood_intention": "Misunderstood intention",
    "did_not_follow_instruction": "Did not follow instruction",
    "insufficient_analysis": "Insufficient analysis",
    "insufficient_testing": "Insufficient testing",
    "insufficient_debugging": "Insufficient debugging",
    "incomplete_implementation": "Incomplete implementation",
    "scope_creep": "Scope creep",
    "user_message_count": "User message count",
    "git_commit": "Git commit",
    "git_push": "Git push",
    "git_pull": "Git pull",
    "git_reset": "Git reset",
    "git_rebase": "Git rebase",
    "sentiment": "Sentiment",
    "task_category": "Task category",
}


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def config_hash(config: dict) -> str:
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()[:12]


def fmt_fixed(value: float, places: int = 3) -> str:
    text = f"{value:.{places}f}"
    if float(text) == 0.0:  # normalize -0.000 to 0.000
        text = f"{0.0:.{places}f}"
    return text


def fmt_trim(value: float, places: int = 4) -> str:
    """Up to `places` decimals with trailing zeros trimmed: 19.17, 0.028, 3."""
    text = f"{value:.{places}f}".rstrip("0").rstrip(".")
    return "0" if text in ("-0", "") else text


def effect_table(estimates: Sequence[EffectEstimate]) -> str:
    """Markdown table of effect estimates; a star marks CIs excluding 0."""
    lines = [
        "| Method | Effect | CI lower | CI upper | Sig. |",
        "| --- | ---: | ---: | ---: | :---: |",
    ]
    label = {"naive": "Difference of labeled means", "augmented": "Prediction-augmented"}
    for est in estimates:
        star = "*" if est.significant else ""
        lines.append(
            f"| {label.get(est.method, est.method)} | {fmt_fixed(est.delta)} "
            f"| {fmt_fixed(est.ci_low)} | {fmt_fixed(est.ci_high)} | {star} |"
        )
    return "\n".join(lines)


def feature_table(rows: Sequence[FeatureComparison], cond_a: str, cond_b: str) -> str:
    lines = [
        f"| Feature | Mean {cond_a} | Mean {cond_b} | Diff ({cond_b} - {cond_a}) | p-value |",
        "| --- | ---: | ---: | ---: | ---: |",
    ]
    for row in rows:
        name = FEATURE_DISPLAY.get(row.feature, row.feature)
        lines.append(
            f"| {name} | {fmt_trim(row.mean_a)} | {fmt_trim(row.mean_b)} "
            f"| {fmt_trim(row.diff)} | {fmt_trim(row.p_value)} |"
        )
    return "\n".join(lines)


def abtest_markdown(report: dict) -> str:
    naive = EffectEstimate(**_estimate_args(report["estimates"]["naive"]))
    augmented = EffectEstimate(**_estimate_args(report["estimates"]["augmented"]))
    cond_a, cond_b = report["conditions"]
    counts = report["counts"]
    lines = [
        "# A/B effect on session ratings",
        "",
        f"Conditions: {cond_a} vs {cond_b} (effect is {cond_a} minus {cond_b})",
        f"Seed: {report['seed']}  |  Config: {report['config_hash']}  |  "
        f"alpha: {fmt_trim(report['alpha'])}  |  lambda mode: {report['lambda_mode']}",
        "",
        "| Condition | Labeled n | Unlabeled N | lambda |",
        "| --- | ---: | ---: | ---: |",
    ]
    for cond in (cond_a, cond_b):
        lam = augmented.per_condition[cond]["lambda"]
        lines.append(
            f"| {cond} | {counts[cond]['n']} | {counts[cond]['n_unlabeled']} "
            f"| {fmt_fixed(lam, 4)} |"
        )
    lines += ["", "## Effect estimates", "", effect_table([naive, augmented]), ""]
    lines += [
        f"Naive p-value (permutation): {fmt_trim(naive.p_value)}; "
        f"augmented p-value (normal): {fmt_trim(augmented.p_value)}.",
        "",
    ]
    if report.get("feature_comparison"):
        rows = [FeatureComparison(**r) for r in report["feature_comparison"]]
        lines += [
            "## Feature means by condition",
            "",
            feature_table(rows, cond_a, cond_b),
            "",
        ]
    return "\n".join(lines)


def _estimate_args(raw: dict) -> dict:
    allowed = {
        "method", "condition_a", "condition_b", "delta", "ci_low", "ci_high",
        "p_value", "alpha", "per_condition",
    }
    return {k: v for k, v in raw.items() if k in allowed}


def simulate_markdown(report: dict) -> str:
    cfg = report["config"]
    lines = [
        "# Monte Carlo validation",
        "",
        f"Trials: {report['trials']}  |  alpha: {fmt_trim(report['alpha'])}  |  "
        f"lambda mode: {report['lambda_mode']}  |  seed: {cfg['seed']}",
        f"Study: n={cfg['n_labeled']} labeled, N={cfg['n_unlabeled']} unlabeled per arm, "
        f"true effect {fmt_trim(report['true_delta'])}, noise sd {fmt_trim(cfg['noise_sd'])}, "
        f"predictor corr {fmt_trim(cfg['predictor_corr'])}, "
        f"{'discrete' if cfg['discretize'] else 'continuous'} labels",
        "",
        "| Metric | Naive | Augmented |",
        "| --- | ---: | ---: |",
        f"| CI coverage | {fmt_fixed(report['coverage_naive'])} "
        f"| {fmt_fixed(report['coverage_augmented'])} |",
        f"| Mean CI width | {fmt_fixed(report['mean_width_naive'], 4)} "
        f"| {fmt_fixed(report['mean_width_augmented'], 4)} |",
        f"| Rejection rate | {fmt_fixed(report['rejection_rate_naive'])} "
        f"| {fmt_fixed(report['rejection_rate_augmented'])} |",
        "",
        f"CI width reduction: {fmt_fixed(report['width_reduction'])} "
        f"(1 - augmented/naive mean width)",
        f"Mean lambda: A {fmt_fixed(report['mean_lambda_a'], 4)}, "
        f"B {fmt_fixed(report['mean_lambda_b'], 4)}",
        "",
    ]
    return "\n".join(lines)


def correlate_markdown(report: dict) -> str:
    lines = [
        "# Delta correlation",
        "",
        "| Row | x | y |",
        "| --- | ---: | ---: |",
    ]
    for row in report["rows"]:
        lines.append(f"| {row['label']} | {fmt_trim(row['x'])} | {fmt_trim(row['y'])} |")
    lines += ["", f"Pearson r = {fmt_fixed(report['pearson'], 4)} over {len(report['rows'])} rows.", ""]
    for note in report.get("notes", []):
        lines.append(f"- {note}")
    if report.get("notes"):
        lines.append("")
    return "\n".join(lines)


def eval_markdown(report: dict) -> str:
    lines = [
        "# Predictor quality (cross-validated)",
        "",
        f"Rows: {report['n_rows']} labeled sessions  |  folds: {report['folds']}  |  "
        f"seed: {report['seed']}",
        "",
        "| Model | MSE | MAE | Pearson |",
        "| --- | ---: | ---: | ---: |",
    ]
    for kind, metrics in report["models"].items():
        lines.append(
            f"| {kind} | {fmt_fixed(metrics['mse'], 4)} | {fmt_fixed(metrics['mae'], 4)} "
            f"| {fmt_fixed(metrics['pearson'], 4)} |"
        )
    lines.append("")
    if report.get("importance"):
        lines += [
            f"## Permutation importance ({report['importance_model']}, in-sample)",
            "",
            "| Feature | MSE increase |",
            "| --- | ---: |",
        ]
        for name, value in report["importance"]:
            lines.append(f"| {FEATURE_DISPLAY.get(name, name)} | {fmt_fixed(value, 4)} |")
        lines.append("")
    return "\n".join(lines)
