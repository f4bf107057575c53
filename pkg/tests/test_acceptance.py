"""Acceptance suite: ten criteria, one test per criterion.

Each test is self-contained, pins its tolerances, and uses independent
oracles where one exists. `pytest -v tests/test_acceptance.py` prints one
pass/fail line per criterion.
"""

import itertools
import json
import math
import time

import numpy as np
import pytest

from abeval.cli import main as cli_main
from abeval.events import parse_event_log
from abeval.features import AnnotationStore, annotate_sessions, build_feature_rows
from abeval.annotator import FixtureAnnotator
from abeval.inference import (
    ConditionData,
    augmented_effect,
    correlate_deltas,
    lambda_hat,
    naive_effect,
    permutation_test,
    ppi_mean,
)
from abeval.predictor import RidgeModel, cross_validate
from abeval.simulate import SimConfig, monte_carlo
from helpers import SessionBuilder, fixture_line, write_lines


def run_cli(args):
    return cli_main([str(a) for a in args])


# ── criterion 1: reduction identity ──────────────────────────────────


def test_criterion_01_lambda_zero_reduces_to_naive():
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    for _ in range(100):
        n_a, n_b = int(rng.integers(2, 40)), int(rng.integers(2, 40))
        a = ConditionData(
            "a",
            rng.uniform(1, 5, n_a),
            rng.uniform(1, 5, n_a),
            rng.uniform(1, 5, int(rng.integers(0, 60))),
        )
        b = ConditionData(
            "b",
            rng.uniform(1, 5, n_b),
            rng.uniform(1, 5, n_b),
            rng.uniform(1, 5, int(rng.integers(0, 60))),
        )
        est = augmented_effect(a, b, lambda_override=(0.0, 0.0))
        assert abs(est.delta - naive_effect(a.labels, b.labels)) <= 1e-12
    elapsed = time.perf_counter() - start
    assert elapsed < 1.0


# ── criterion 2: hand-oracle plug-in arithmetic ──────────────────────


def test_criterion_02_plug_in_hand_oracle():
    c = ConditionData(
        "c",
        np.array([4.0, 5.0, 3.0]),
        np.array([3.5, 4.5, 3.5]),
        np.array([4.0, 4.0]),
    )
    lam = lambda_hat(c)
    assert abs(lam - 0.6) <= 1e-12
    mu, sigma2 = ppi_mean(c, lam)
    assert abs(mu - 4.1) <= 1e-12
    assert abs(sigma2 - 0.70) <= 1e-12


# ── criteria 3-5 share one Monte Carlo grid ──────────────────────────

RHOS = (0.0, 0.3, 0.6, 0.9)
DELTAS = (0.0, 0.05)


@pytest.fixture(scope="module")
def mc_grid():
    start = time.perf_counter()
    cells = {}
    for i, rho in enumerate(RHOS):
        for j, delta in enumerate(DELTAS):
            cfg = SimConfig(
                n_labeled=150,
                n_unlabeled=3000,
                mean_a=3.0 + delta,
                mean_b=3.0,
                noise_sd=1.0,
                predictor_corr=rho,
                discretize=False,
                seed=1000 + 10 * i + j,
            )
            cells[(rho, delta)] = monte_carlo(cfg, trials=1000)
    return cells, time.perf_counter() - start


def test_criterion_03_augmented_coverage_across_grid(mc_grid):
    cells, elapsed = mc_grid
    for (rho, delta), report in cells.items():
        assert 0.93 <= report.coverage_augmented <= 0.97, (
            f"coverage {report.coverage_augmented} at rho={rho} delta={delta}"
        )
    assert elapsed < 120.0, f"grid took {elapsed:.1f}s"


def test_criterion_04_width_reduction_thresholds(mc_grid):
    cells, _ = mc_grid
    for delta in DELTAS:
        assert cells[(0.9, delta)].width_reduction >= 0.40
        assert cells[(0.3, delta)].width_reduction >= 0.02
        # monotone in predictor quality at the strong end
        assert (
            cells[(0.9, delta)].width_reduction
            > cells[(0.3, delta)].width_reduction
        )


def test_criterion_05_null_calibration(mc_grid):
    cells, _ = mc_grid
    null_cells = [cells[(rho, 0.0)] for rho in RHOS]  # 4000 null trials
    perm = float(np.mean([c.rejection_rate_naive for c in null_cells]))
    boot = float(np.mean([c.rejection_rate_naive_ci for c in null_cells]))
    wald = float(np.mean([c.rejection_rate_augmented for c in null_cells]))
    for name, rate in (("permutation", perm), ("bootstrap CI", boot), ("Wald CI", wald)):
        assert 0.03 <= rate <= 0.07, f"{name} null rejection rate {rate}"


# ── criterion 6: correlation fixture with reference notes ────────────

# Benchmark-vs-rating delta pairs used as a frozen correlation fixture;
# the first set's externally reported r is 0.66, the second set's is -0.18.
PAIRS_1 = [
    (24.22, 22.8),
    (20.04, -4.35),
    (15.68, 12.4),
    (14.13, 9.74),
    (11.62, 0.00),
    (4.05, 2.28),
    (0.64, -5.50),
]
PAIRS_2 = [
    (4.01, 21.8),
    (24.05, 28.87),
    (7.54, 1.80),
    (-6.07, 15.81),
    (-7.84, 14.62),
    (-4.62, -0.75),
    (-17.9, 19.0),
]


def test_criterion_06_correlation_fixture_and_notes(tmp_path):
    start = time.perf_counter()
    rho_1 = correlate_deltas(PAIRS_1)
    elapsed = time.perf_counter() - start
    assert abs(rho_1 - 0.627) <= 0.005
    assert elapsed < 1.0

    # the report must surface the externally reported value next to ours
    csv_1 = tmp_path / "pairs1.csv"
    csv_1.write_text("x,y\n" + "\n".join(f"{x},{y}" for x, y in PAIRS_1) + "\n")
    out_1 = tmp_path / "corr1"
    assert run_cli(
        ["correlate", "--input", csv_1, "--out", out_1,
         "--reference-rho", 0.66, "--reference-label", "reported value"]
    ) == 0
    report_1 = json.loads((out_1 / "report.json").read_text())
    notes_1 = " ".join(report_1["notes"])
    assert "0.66" in notes_1 and "reported value" in notes_1

    # second comparison: our computed r is positive while the reported
    # value is negative — the report must flag the sign disagreement
    rho_2 = correlate_deltas(PAIRS_2)
    assert rho_2 > 0
    csv_2 = tmp_path / "pairs2.csv"
    csv_2.write_text("x,y\n" + "\n".join(f"{x},{y}" for x, y in PAIRS_2) + "\n")
    out_2 = tmp_path / "corr2"
    assert run_cli(
        ["correlate", "--input", csv_2, "--out", out_2,
         "--reference-rho", -0.18, "--reference-label", "reported value"]
    ) == 0
    report_2 = json.loads((out_2 / "report.json").read_text())
    assert any("sign disagreement" in note for note in report_2["notes"])


# ── criterion 7: exhaustive permutation oracle ───────────────────────


def test_criterion_07_extreme_fixture_permutation_p():
    a, b = [1, 1, 1, 1], [5, 5, 5, 5]
    p = permutation_test(a, b, draws=100000, seed=0)
    assert abs(p - 0.0423) <= 0.01

    # independent oracle: enumerate all C(8,4)=70 splits by hand
    pooled = a + b
    observed = abs(np.mean(a) - np.mean(b))
    exceed = sum(
        1
        for idx in itertools.combinations(range(8), 4)
        if abs(
            np.mean([pooled[i] for i in idx])
            - np.mean([pooled[i] for i in range(8) if i not in idx])
        )
        >= observed - 1e-12
    )
    assert exceed == 2  # only the two fully separated splits
    assert p == pytest.approx((1 + exceed) / (70 + 1), abs=1e-15)


# ── criterion 8: predictor sanity ────────────────────────────────────


def test_criterion_08_cv_linear_and_shuffled():
    rng = np.random.default_rng(88)
    n = 500
    X = rng.uniform(-1, 1, size=(n, 6))
    w = np.array([0.5, -0.4, 0.3, 0.2, -0.1, 0.25])
    y = 3.0 + X @ w  # stays inside [1, 5]: |X @ w| <= 1.75
    report = cross_validate(lambda: RidgeModel(penalty=0.0), X, y, k=5, seed=0)
    assert report.mse < 1e-6
    assert report.pearson > 0.999

    shuffled = rng.permutation(y)
    noise_report = cross_validate(lambda: RidgeModel(penalty=0.0), X, shuffled, k=5, seed=0)
    assert abs(noise_report.pearson) < 0.15


# ── criterion 9: feature extraction fixtures ─────────────────────────

SENTIMENTS = ("positive", "negative", "neutral")
TASKS = (
    "fix_bugs", "implement_features", "create_from_scratch", "fix_ci",
    "fix_merge_conflicts", "write_docs", "perform_deployments",
    "perform_data_analysis",
)
ISSUES = (
    "misunderstood_intention", "did_not_follow_instruction",
    "insufficient_analysis", "insufficient_testing", "insufficient_debugging",
    "incomplete_implementation", "scope_creep",
)
GITS = ("commit", "push", "pull", "reset", "rebase")


def oracle_encode(sentiment, task, issues_yes, gits_on, count):
    """Hand-frozen encoding layout: 3 sentiment + 8 task + 7 issues +
    5 git + count + log1p(count) = 25 columns."""
    vec = np.zeros(25)
    vec[SENTIMENTS.index(sentiment.lower())] = 1.0
    vec[3 + TASKS.index(task)] = 1.0
    for name in issues_yes:
        vec[11 + ISSUES.index(name)] = 1.0
    for sub in gits_on:
        vec[18 + GITS.index(sub)] = 1.0
    vec[23] = float(count)
    vec[24] = math.log1p(count)
    return vec


def corpus_12(tmp_path):
    """12 sessions with hand-known features: compound git commands, decoy
    git text in observations and user messages, double-spaced and
    case-mismatched commands, multi-segment ratings."""
    specs = []  # (sid, cond, expected dict)
    lines = []
    fixtures = []

    def add(sid, cond, build, sentiment, task, yes, expect):
        b = SessionBuilder(sid, cond)
        build(b)
        lines.extend(b.lines)
        fixtures.append(fixture_line(sid, sentiment, task, yes=yes))
        expect.update(sentiment=sentiment, task=task, issues_yes=tuple(yes))
        specs.append((sid, cond, expect))

    add(
        "c01", "control",
        lambda b: b.message("fix the bug").running()
        .action('git add -A && git commit -m "fix" && git push').stopped().rating(5),
        "Positive", "fix_bugs", [],
        dict(count=1, gits=("commit", "push"), rating=5.0),
    )
    add(
        "c02", "control",
        lambda b: b.message("add the feature").running().action("git commit --amend")
        .observation("git push rejected: remote ahead").message("try again")
        .stopped().rating(2),
        "Negative", "implement_features", ["insufficient_testing"],
        dict(count=2, gits=("commit",), rating=2.0),
    )
    add(
        "c03", "control",
        lambda b: b.message("update the docs").running().action("ls -la")
        .action("git pull --rebase origin main").message("looks ok")
        .message("one more pass").stopped().rating(4),
        "Neutral", "write_docs", [],
        dict(count=3, gits=("pull",), rating=4.0),  # "--rebase" is not "git rebase"
    )
    add(
        "c04", "control",
        lambda b: b.message("please run git reset --hard for me").running()
        .action("make test").stopped(),
        "Positive", "fix_ci", [],
        dict(count=1, gits=(), rating=None),  # decoy lives in the user message
    )
    add(
        "c05", "control",
        lambda b: b.message("merge failed").running().action("git reset --hard HEAD~1")
        .message("careful").message("still broken").message("revert it")
        .stopped().rating(1),
        "Negative", "fix_merge_conflicts",
        ["misunderstood_intention", "incomplete_implementation"],
        dict(count=4, gits=("reset",), rating=1.0),
    )
    add(
        "c06", "control",
        lambda b: b.message("start the project").running().action("git rebase -i main")
        .action("git push --force-with-lease").message("thanks").stopped().rating(3),
        "Neutral", "create_from_scratch", ["scope_creep"],
        dict(count=2, gits=("rebase", "push"), rating=3.0),
    )
    add(
        "v01", "variant",
        lambda b: b.message("ship it").running()
        .action("./deploy.sh && git push origin prod").stopped().rating(5),
        "Positive", "perform_deployments", [],
        dict(count=1, gits=("push",), rating=5.0),
    )
    add(
        "v02", "variant",
        lambda b: b.message("crunch the numbers").running().action("python3 analyze.py")
        .observation("tip: git commit && git push when done")
        .message("m2").message("m3").message("m4").message("m5").stopped().rating(2),
        "Negative", "perform_data_analysis",
        ["insufficient_analysis", "insufficient_debugging"],
        dict(count=5, gits=(), rating=2.0),  # decoys live in the observation
    )
    add(
        "v03", "variant",
        lambda b: b.message("first round").running().action('git commit -m "a"')
        .stopped().rating(4).message("second round").running()
        .action('git commit -m "b"').stopped().rating(2),
        "Neutral", "fix_bugs", [],
        dict(count=2, gits=("commit",), rating=3.0),  # mean of segment ratings 4, 2
    )
    add(
        "v04", "variant",
        lambda b: b.message("push my branch").running().action("git push")
        .message("m2").message("m3").stopped(),
        "Positive", "implement_features", [],
        dict(count=3, gits=("push",), rating=None),
    )
    add(
        "v05", "variant",
        lambda b: b.message("write the README").running()
        .action('git  commit -m "spaced"').stopped().rating(1),
        "Negative", "write_docs", ["did_not_follow_instruction"],
        dict(count=1, gits=("commit",), rating=1.0),  # extra spaces still match
    )
    add(
        "v06", "variant",
        lambda b: b.message("quick fix").running().action("GIT PUSH").action("echo done")
        .message("done?").stopped().rating(3),
        "Neutral", "fix_bugs", [],
        dict(count=2, gits=(), rating=3.0),  # matching is case-sensitive
    )

    logs = write_lines(tmp_path / "corpus12.jsonl", lines)
    fixture = write_lines(tmp_path / "corpus12_annotations.jsonl", fixtures)
    return logs, fixture, specs


def test_criterion_09_feature_fixtures(tmp_path):
    logs, fixture, specs = corpus_12(tmp_path)
    with open(logs, encoding="utf-8") as fh:
        parsed = parse_event_log(fh.readlines())
    assert len(parsed.sessions) == 12

    annotator = FixtureAnnotator(fixture)
    judged = annotate_sessions(parsed.sessions, annotator)
    rows = {r.session_id: r for r in build_feature_rows(parsed.sessions, judged)}
    assert len(rows) == 12

    for sid, cond, expect in specs:
        row = rows[sid]
        assert row.condition == cond, sid
        assert row.rating == expect["rating"], sid
        readable = row.readable_values()
        assert readable["sentiment"] == expect["sentiment"], sid
        assert readable["task_category"] == expect["task"], sid
        assert readable["user_message_count"] == expect["count"], sid
        for sub in GITS:
            assert readable[f"git_{sub}"] == (sub in expect["gits"]), (sid, sub)
        for name in ISSUES:
            assert readable[name] == (name in expect["issues_yes"]), (sid, name)
        oracle = oracle_encode(
            expect["sentiment"], expect["task"], expect["issues_yes"],
            expect["gits"], expect["count"],
        )
        assert np.array_equal(row.encoded, oracle), sid

    # mock-annotator fixtures round-trip into JudgedFeatures through the
    # cache: write, re-read, compare
    store = AnnotationStore(str(tmp_path / "cache.jsonl"))
    for sid, jf in judged.items():
        store.put(sid, jf)
    reread = AnnotationStore(str(tmp_path / "cache.jsonl"))
    for sid, jf in judged.items():
        assert reread.get(sid).to_dict() == jf.to_dict()


# ── criterion 10: byte-identical seeded runs ─────────────────────────


def test_criterion_10_deterministic_reports(tmp_path):
    from helpers import synth_study

    logs, fixture = synth_study(tmp_path, seed=19, n_labeled=15, n_unlabeled=8)
    ab_reports = []
    for run_dir in ("ab1", "ab2"):
        out = tmp_path / run_dir
        assert run_cli(
            ["abtest", "--input", logs, "--mock-annotator", fixture,
             "--out", out, "--seed", 77, "--model", "forest", "--trees", 50]
        ) == 0
        ab_reports.append((out / "report.json").read_bytes())
    assert ab_reports[0] == ab_reports[1]

    sim_reports = []
    for run_dir in ("sim1", "sim2"):
        out = tmp_path / run_dir
        assert run_cli(
            ["simulate", "--out", out, "--trials", 60, "--seed", 13,
             "--n-labeled", 60, "--n-unlabeled", 600,
             "--predictor-corr", 0.6, "--permutations", 199, "--bootstrap", 200]
        ) == 0
        sim_reports.append((out / "report.json").read_bytes())
    assert sim_reports[0] == sim_reports[1]
