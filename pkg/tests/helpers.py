"""Shared builders for test corpora: event lines, annotator fixtures, and
a synthetic two-condition study with a planted effect."""

from __future__ import annotations

import json

import numpy as np

from abeval.features import ISSUE_NAMES

TASK_DISPLAY = {
    "fix_bugs": "Fix Bugs",
    "implement_features": "Implement Features",
    "create_from_scratch": "Create Programs from Scratch",
    "fix_ci": "Fix Failing Continuous Integration",
    "fix_merge_conflicts": "Fix Merge Conflicts",
    "write_docs": "Write Documentation",
    "perform_deployments": "Perform Deployments",
    "perform_data_analysis": "Perform Data Analysis",
}


def ts(i: int) -> str:
    """Monotone RFC3339 timestamps, one second apart."""
    return f"2026-01-01T{i // 3600:02d}:{(i // 60) % 60:02d}:{i % 60:02d}Z"


def event_line(sid: str, i: int, kind: str, condition: str = "A", **payload) -> str:
    return json.dumps(
        {
            "session_id": sid,
            "timestamp": ts(i),
            "condition": condition,
            "kind": kind,
            "payload": payload,
        }
    )


class SessionBuilder:
    """Accumulates event lines for one session with increasing timestamps."""

    def __init__(self, sid: str, condition: str = "A", start: int = 0):
        self.sid = sid
        self.condition = condition
        self.i = start
        self.lines: list[str] = []

    def _add(self, kind: str, **payload) -> "SessionBuilder":
        self.lines.append(event_line(self.sid, self.i, kind, self.condition, **payload))
        self.i += 1
        return self

    def message(self, text: str = "hello") -> "SessionBuilder":
        return self._add("user_message", text=text)

    def running(self) -> "SessionBuilder":
        return self._add("state_change", state="running")

    def stopped(self) -> "SessionBuilder":
        return self._add("state_change", state="stopped")

    def action(self, command: str, tool: str = "bash") -> "SessionBuilder":
        return self._add("agent_action", command=command, tool=tool)

    def observation(self, text: str) -> "SessionBuilder":
        return self._add("agent_observation", text=text)

    def rating(self, stars: int) -> "SessionBuilder":
        return self._add("rating", stars=stars)


def classification_text(sentiment: str, task_slug: str, clusters=None) -> str:
    return json.dumps(
        {
            "task_description": "scripted summary",
            "sentiment": {
                "classification": sentiment,
                "explanation": "scripted",
                "example_messages": [],
            },
            "task_type": TASK_DISPLAY[task_slug],
            "development_cluster": clusters if clusters is not None else ["Other"],
        }
    )


def issue_text(yes=()) -> str:
    yes = set(yes)
    return json.dumps(
        {
            name: {
                "answer": "YES" if name in yes else "NO",
                "explanation": "scripted",
            }
            for name in ISSUE_NAMES
        }
    )


def fixture_line(sid: str, sentiment: str, task_slug: str, yes=(), clusters=None) -> str:
    return json.dumps(
        {
            "session_id": sid,
            "classification": json.loads(classification_text(sentiment, task_slug, clusters)),
            "issues": json.loads(issue_text(yes)),
        }
    )


def write_lines(path, lines) -> str:
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return str(path)


def synth_study(
    tmp_path,
    *,
    seed: int = 7,
    n_labeled: int = 20,
    n_unlabeled: int = 10,
    base_a: float = 3.8,
    base_b: float = 3.2,
    conditions: tuple[str, str] = ("alpha", "beta"),
):
    """Two-condition log corpus whose ratings track sentiment and message
    count, with matching annotator fixture lines. Returns (logs_path,
    fixture_path)."""
    rng = np.random.default_rng(seed)
    sentiments = ["Positive", "Negative", "Neutral"]
    tasks = ["fix_bugs", "implement_features", "write_docs"]
    log_lines: list[str] = []
    fixture_lines: list[str] = []
    clock = 0
    for cond, base in zip(conditions, (base_a, base_b)):
        for i in range(n_labeled + n_unlabeled):
            sid = f"{cond}-{i:03d}"
            b = SessionBuilder(sid, cond, start=clock)
            n_msgs = int(rng.integers(1, 8))
            b.message(f"please fix my program ({sid})")
            b.running()
            b.action("ls -la")
            if rng.random() < 0.5:
                b.action('git add -A && git commit -m "wip"')
            if rng.random() < 0.3:
                b.action("git push origin main")
            b.observation("On branch main\nnothing to commit")
            for m in range(1, n_msgs):
                b.message(f"follow-up {m}")
            b.stopped()
            sentiment = sentiments[int(rng.integers(0, 3))]
            bump = {"Positive": 1.0, "Negative": -1.0, "Neutral": 0.0}[sentiment]
            score = base + bump - 0.08 * n_msgs + float(rng.normal(0, 0.3))
            if i < n_labeled:
                b.rating(int(np.clip(round(score), 1, 5)))
            log_lines.extend(b.lines)
            clock = b.i + 10
            yes = [name for name in ISSUE_NAMES if rng.random() < 0.2]
            fixture_lines.append(
                fixture_line(sid, sentiment, tasks[int(rng.integers(0, 3))], yes)
            )
    logs = write_lines(tmp_path / "logs.jsonl", log_lines)
    fixture = write_lines(tmp_path / "fixture.jsonl", fixture_lines)
    return logs, fixture
