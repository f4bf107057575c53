"""Satisfaction-predictive features for sessions.

Fifteen readable features per session: judged sentiment, judged task
category, seven judged issue flags, the user message count, and five git
subcommand flags detected from agent action commands. The numeric encoding
is 25 columns: sentiment one-hot (3), task category one-hot (8), issue
flags (7), git flags (5), then the raw message count and log1p(count).
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .annotator import (
    ISSUE_FLAGS,
    SENTIMENT_CLASSES,
    TASK_TYPES,
    classification_prompt,
    extract_json,
    issue_prompt,
)
from .errors import DataError, EmptySessionError, ResponseParseError
from .events import EventKind, Session

ISSUE_NAMES = tuple(name for name, _ in ISSUE_FLAGS)
GIT_SUBCOMMANDS = ("commit", "push", "pull", "reset", "rebase")
TASK_SLUGS = tuple(slug for slug, _ in TASK_TYPES)
_TASK_BY_DISPLAY = {display: slug for slug, display in TASK_TYPES}
_TASK_BY_SLUG = {slug: slug for slug, _ in TASK_TYPES}

# Readable feature names, fixed order.
FEATURE_NAMES = (
    "sentiment",
    "task_category",
    "user_message_count",
    *ISSUE_NAMES,
    *(f"git_{sub}" for sub in GIT_SUBCOMMANDS),
)

# Encoded column names, fixed order. This tuple is the encoding schema; its
# hash is stamped into serialized models so stale models refuse to predict.
ENCODED_COLUMNS = (
    *(f"x_sentiment_{s.lower()}" for s in SENTIMENT_CLASSES),
    *(f"x_task_{slug}" for slug in TASK_SLUGS),
    *(f"x_issue_{name}" for name in ISSUE_NAMES),
    *(f"x_git_{sub}" for sub in GIT_SUBCOMMANDS),
    "x_user_message_count",
    "x_user_message_count_log1p",
)
ENCODED_LENGTH = len(ENCODED_COLUMNS)

# Readable feature -> encoded column indices, for grouped permutation
# importance and for reporting. One-hot groups move together.
FEATURE_GROUPS: dict[str, tuple[int, ...]] = {}
FEATURE_GROUPS["sentiment"] = tuple(range(0, 3))
FEATURE_GROUPS["task_category"] = tuple(range(3, 11))
for _i, _name in enumerate(ISSUE_NAMES):
    FEATURE_GROUPS[_name] = (11 + _i,)
for _i, _sub in enumerate(GIT_SUBCOMMANDS):
    FEATURE_GROUPS[f"git_{_sub}"] = (18 + _i,)
FEATURE_GROUPS["user_message_count"] = (23, 24)

ENCODING_SCHEMA_HASH = hashlib.sha256(",".join(ENCODED_COLUMNS).encode()).hexdigest()[:16]

_GIT_RE = re.compile(r"\bgit\s+(commit|push|pull|reset|rebase)\b")


@dataclass
class JudgedFeatures:
    """LLM-judged properties of one session. development_cluster is kept as
    metadata only; it is not part of the feature encoding."""

    sentiment: str
    task_category: str
    issues: dict[str, bool]
    task_description: str = ""
    development_cluster: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "sentiment": self.sentiment,
            "task_category": self.task_category,
            "issues": dict(self.issues),
            "task_description": self.task_description,
            "development_cluster": list(self.development_cluster),
        }

    @classmethod
    def from_dict(cls, raw: Mapping) -> "JudgedFeatures":
        jf = cls(
            sentiment=raw["sentiment"],
            task_category=raw["task_category"],
            issues={k: bool(v) for k, v in raw["issues"].items()},
            task_description=raw.get("task_description", ""),
            development_cluster=list(raw.get("development_cluster", [])),
        )
        _validate_judged(jf)
        return jf


@dataclass
class DeterministicFeatures:
    """Features computed from the event log alone."""

    user_message_count: int
    git_flags: dict[str, bool]


@dataclass
class FeatureVector:
    """One session's feature row: readable fields plus the numeric encoding."""

    session_id: str
    condition: str
    rating: float | None
    judged: JudgedFeatures
    deterministic: DeterministicFeatures
    encoded: np.ndarray

    def readable_values(self) -> dict:
        out = {
            "sentiment": self.judged.sentiment,
            "task_category": self.judged.task_category,
            "user_message_count": self.deterministic.user_message_count,
        }
        for name in ISSUE_NAMES:
            out[name] = self.judged.issues[name]
        for sub in GIT_SUBCOMMANDS:
            out[f"git_{sub}"] = self.deterministic.git_flags[sub]
        return out


def _validate_judged(jf: JudgedFeatures) -> None:
    if jf.sentiment not in SENTIMENT_CLASSES:
        raise ResponseParseError(f"unknown sentiment {jf.sentiment!r}")
    if jf.task_category not in _TASK_BY_SLUG:
        raise ResponseParseError(f"unknown task category {jf.task_category!r}")
    missing = [name for name in ISSUE_NAMES if name not in jf.issues]
    if missing:
        raise ResponseParseError(f"missing issue flags: {missing}")


def extract_deterministic(session: Session) -> DeterministicFeatures:
    """Count user messages and scan agent action commands for git usage.

    Only action command strings are scanned, never observation text, so git
    output quoted back at the user cannot set a flag. A compound command
    such as "git add -A && git commit -m x && git push" sets every
    subcommand it names.
    """
    count = 0
    flags = {sub: False for sub in GIT_SUBCOMMANDS}
    for event in session.events:
        if event.kind is EventKind.USER_MESSAGE:
            count += 1
        elif event.kind is EventKind.AGENT_ACTION:
            for sub in _GIT_RE.findall(event.payload["command"]):
                flags[sub] = True
    return DeterministicFeatures(user_message_count=count, git_flags=flags)


def combined_user_messages(session: Session) -> str:
    messages = session.user_messages()
    if not messages:
        raise EmptySessionError(session.id)
    return "\n\n".join(messages)


def _parse_sentiment(obj) -> str:
    if isinstance(obj, Mapping):
        obj = obj.get("classification")
    if not isinstance(obj, str):
        raise ResponseParseError("sentiment.classification missing")
    value = obj.strip().capitalize()
    if value not in SENTIMENT_CLASSES:
        raise ResponseParseError(f"unknown sentiment {obj!r}")
    return value


def _parse_task_type(obj) -> str:
    if not isinstance(obj, str):
        raise ResponseParseError("task_type missing")
    name = obj.strip()
    slug = _TASK_BY_DISPLAY.get(name) or _TASK_BY_SLUG.get(name)
    if slug is None:
        raise ResponseParseError(f"unknown task_type {obj!r}")
    return slug


def _parse_clusters(obj) -> list[str]:
    if obj is None:
        return []
    if isinstance(obj, str):
        obj = [obj]
    if not isinstance(obj, list) or not all(isinstance(c, str) for c in obj):
        raise ResponseParseError("development_cluster must be a string or list of strings")
    return list(obj)


def _parse_yes_no(name: str, obj) -> bool:
    if isinstance(obj, Mapping):
        obj = obj.get("answer")
    if isinstance(obj, bool):
        return obj
    if isinstance(obj, str):
        token = obj.strip().upper()
        if token in ("YES", "NO"):
            return token == "YES"
    raise ResponseParseError(f"issue {name!r}: expected YES or NO, got {obj!r}")


def parse_classification_response(text: str) -> tuple[str, str, str, list[str]]:
    obj = extract_json(text)
    sentiment = _parse_sentiment(obj.get("sentiment"))
    task = _parse_task_type(obj.get("task_type"))
    description = obj.get("task_description")
    description = description if isinstance(description, str) else ""
    clusters = _parse_clusters(obj.get("development_cluster"))
    return sentiment, task, description, clusters


def parse_issue_response(text: str) -> dict[str, bool]:
    obj = extract_json(text)
    issues = {}
    for name in ISSUE_NAMES:
        if name not in obj:
            raise ResponseParseError(f"issue {name!r} missing from response")
        issues[name] = _parse_yes_no(name, obj[name])
    return issues


def annotate(session: Session, annotator) -> JudgedFeatures:
    """Judge one session: two annotator calls over its combined user messages."""
    combined = combined_user_messages(session)
    class_text, issue_text = annotator.judge_session(
        session.id, classification_prompt(combined), issue_prompt(combined)
    )
    sentiment, task, description, clusters = parse_classification_response(class_text)
    issues = parse_issue_response(issue_text)
    return JudgedFeatures(
        sentiment=sentiment,
        task_category=task,
        issues=issues,
        task_description=description,
        development_cluster=clusters,
    )


class AnnotationStore:
    """JSONL cache of judged features keyed by session_id, so reruns skip
    the annotator for sessions already judged."""

    def __init__(self, path: str):
        self.path = path
        self._cache: dict[str, JudgedFeatures] = {}
        if os.path.exists(path):
            with open(path, encoding="utf-8") as fh:
                for line_no, line in enumerate(fh, start=1):
                    if not line.strip():
                        continue
                    try:
                        row = json.loads(line)
                        self._cache[row["session_id"]] = JudgedFeatures.from_dict(row["judged"])
                    except (json.JSONDecodeError, KeyError, TypeError) as exc:
                        raise DataError(f"{path}:{line_no}: bad annotation cache row: {exc}") from exc

    def __contains__(self, session_id: str) -> bool:
        return session_id in self._cache

    def get(self, session_id: str) -> JudgedFeatures | None:
        return self._cache.get(session_id)

    def put(self, session_id: str, judged: JudgedFeatures) -> None:
        self._cache[session_id] = judged
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(
                json.dumps({"session_id": session_id, "judged": judged.to_dict()}, sort_keys=True)
                + "\n"
            )


def annotate_sessions(
    sessions: Sequence[Session],
    annotator,
    *,
    store: AnnotationStore | None = None,
    max_workers: int = 4,
) -> dict[str, JudgedFeatures]:
    """Judge every session, reading and filling the cache when given.

    Sessions are judged concurrently; results are keyed by session id so the
    outcome does not depend on completion order. New cache entries are
    appended in sorted session-id order.
    """
    out: dict[str, JudgedFeatures] = {}
    todo: list[Session] = []
    for session in sessions:
        cached = store.get(session.id) if store is not None else None
        if cached is not None:
            out[session.id] = cached
        else:
            todo.append(session)
    if todo:
        if max_workers > 1 and len(todo) > 1:
            with ThreadPoolExecutor(max_workers=max_workers) as pool:
                judged = list(pool.map(lambda s: annotate(s, annotator), todo))
        else:
            judged = [annotate(s, annotator) for s in todo]
        fresh = {s.id: jf for s, jf in zip(todo, judged)}
        if store is not None:
            for sid in sorted(fresh):
                store.put(sid, fresh[sid])
        out.update(fresh)
    return out


def assemble(judged: JudgedFeatures, deterministic: DeterministicFeatures) -> np.ndarray:
    """Encode readable features as the fixed 25-column numeric vector."""
    _validate_judged(judged)
    vec = np.zeros(ENCODED_LENGTH)
    vec[SENTIMENT_CLASSES.index(judged.sentiment)] = 1.0
    vec[3 + TASK_SLUGS.index(judged.task_category)] = 1.0
    for i, name in enumerate(ISSUE_NAMES):
        vec[11 + i] = 1.0 if judged.issues[name] else 0.0
    for i, sub in enumerate(GIT_SUBCOMMANDS):
        vec[18 + i] = 1.0 if deterministic.git_flags[sub] else 0.0
    count = deterministic.user_message_count
    vec[23] = float(count)
    vec[24] = math.log1p(count)
    return vec


def build_feature_vector(session: Session, judged: JudgedFeatures) -> FeatureVector:
    det = extract_deterministic(session)
    return FeatureVector(
        session_id=session.id,
        condition=session.condition,
        rating=session.mean_rating,
        judged=judged,
        deterministic=det,
        encoded=assemble(judged, det),
    )


def build_feature_rows(
    sessions: Sequence[Session], judged_by_id: Mapping[str, JudgedFeatures]
) -> list[FeatureVector]:
    missing = [s.id for s in sessions if s.id not in judged_by_id]
    if missing:
        raise DataError(f"missing annotations for sessions: {missing[:5]}")
    return [build_feature_vector(s, judged_by_id[s.id]) for s in sessions]


# ── feature matrix CSV ───────────────────────────────────────────────

CSV_HEADER = ("session_id", "condition", "rating", *ENCODED_COLUMNS, *FEATURE_NAMES)


def _fmt(value: float) -> str:
    if float(value).is_integer():
        return str(int(value))
    return repr(float(value))


def write_feature_csv(rows: Sequence[FeatureVector], path: str) -> None:
    """Write the feature matrix. Unlabeled sessions get an empty rating."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for row in rows:
            readable = row.readable_values()
            record = [
                row.session_id,
                row.condition,
                "" if row.rating is None else _fmt(row.rating),
                *(_fmt(v) for v in row.encoded),
            ]
            for name in FEATURE_NAMES:
                value = readable[name]
                if isinstance(value, bool):
                    record.append("1" if value else "0")
                elif isinstance(value, (int, float)):
                    record.append(_fmt(value))
                else:
                    record.append(str(value))
            writer.writerow(record)


def read_feature_csv(path: str) -> list[FeatureVector]:
    """Read a feature matrix written by write_feature_csv."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = tuple(next(reader))
        except StopIteration:
            raise DataError(f"{path}: empty feature matrix") from None
        if header != CSV_HEADER:
            raise DataError(
                f"{path}: unexpected feature matrix header; expected {len(CSV_HEADER)} "
                f"columns starting with {CSV_HEADER[:3]}"
            )
        rows = []
        for line_no, record in enumerate(reader, start=2):
            if len(record) != len(CSV_HEADER):
                raise DataError(f"{path}:{line_no}: expected {len(CSV_HEADER)} columns")
            values = dict(zip(CSV_HEADER, record))
            try:
                encoded = np.array([float(values[c]) for c in ENCODED_COLUMNS])
                rating = None if values["rating"] == "" else float(values["rating"])
                judged = JudgedFeatures(
                    sentiment=values["sentiment"],
                    task_category=values["task_category"],
                    issues={name: values[name] == "1" for name in ISSUE_NAMES},
                )
                det = DeterministicFeatures(
                    user_message_count=int(float(values["user_message_count"])),
                    git_flags={sub: values[f"git_{sub}"] == "1" for sub in GIT_SUBCOMMANDS},
                )
                _validate_judged(judged)
            except (ValueError, ResponseParseError) as exc:
                raise DataError(f"{path}:{line_no}: {exc}") from exc
            rows.append(
                FeatureVector(
                    session_id=values["session_id"],
                    condition=values["condition"],
                    rating=rating,
                    judged=judged,
                    deterministic=det,
                    encoded=encoded,
                )
            )
    return rows


def encoded_matrix(rows: Sequence[FeatureVector]) -> np.ndarray:
    if not rows:
        return np.zeros((0, ENCODED_LENGTH))
    return np.stack([row.encoded for row in rows])
