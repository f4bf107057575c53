"""Session event logs: wire format, parsing, and work-segment assembly.

A log is JSONL, one event per line:

    {"session_id": "s1", "timestamp": "2025-01-01T00:00:00Z",
     "condition": "A", "kind": "user_message", "payload": {"text": "..."}}

Event kinds and payloads:

    user_message        {"text": str}
    agent_action        {"command": str, "tool": str}   (tool optional)
    agent_observation   {"text": str}
    state_change        {"state": "running" | "stopped"}
    rating              {"stars": int in 1..5}

A work segment is one running -> stopped cycle of the agent. User messages
sent between the previous stop (or session start) and a cycle's stop belong
to that segment, including messages sent while the agent is running. A
rating given after a stop attaches to the segment that just finished, until
the next user message or run begins; several ratings on one segment are
averaged. The session-level label is the mean over rated segments.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from typing import Iterable

from .errors import (
    InvalidRatingError,
    MalformedLineError,
    OrphanRatingError,
    SchemaError,
    UnbalancedStatesError,
)


class EventKind(str, Enum):
    USER_MESSAGE = "user_message"
    AGENT_ACTION = "agent_action"
    AGENT_OBSERVATION = "agent_observation"
    STATE_CHANGE = "state_change"
    RATING = "rating"


STATE_RUNNING = "running"
STATE_STOPPED = "stopped"


@dataclass(frozen=True)
class Event:
    """One log event. seq is the event's position within its session after
    ordering by (timestamp, input order), so it is stable under re-serialization
    and under interleaving of sessions in the input file."""

    session_id: str
    seq: int
    timestamp: str
    kind: EventKind
    payload: dict

    def sort_key(self) -> datetime:
        return _parse_timestamp(self.timestamp)


@dataclass
class WorkSegment:
    """One running -> stopped cycle: the user messages that set it up, the
    agent's trajectory inside it, and the rating it earned (mean of the stars
    attached to it, None when unrated)."""

    user_messages: list[str] = field(default_factory=list)
    trajectory: list[Event] = field(default_factory=list)
    rating: float | None = None
    flags: tuple[str, ...] = ()


@dataclass
class Session:
    """All events for one session_id plus derived segments and label."""

    id: str
    condition: str
    events: list[Event]
    segments: list[WorkSegment]
    mean_rating: float | None

    @property
    def labeled(self) -> bool:
        return self.mean_rating is not None

    def user_messages(self) -> list[str]:
        return [e.payload["text"] for e in self.events if e.kind is EventKind.USER_MESSAGE]


@dataclass
class Dataset:
    """Sessions split into labeled (>=1 rated segment) and unlabeled."""

    labeled: list[Session]
    unlabeled: list[Session]

    @classmethod
    def from_sessions(cls, sessions: Iterable[Session]) -> "Dataset":
        labeled, unlabeled = [], []
        for s in sessions:
            (labeled if s.labeled else unlabeled).append(s)
        return cls(labeled=labeled, unlabeled=unlabeled)

    @property
    def sessions(self) -> list[Session]:
        return self.labeled + self.unlabeled


@dataclass
class ParsedLog:
    """parse_event_log result: sessions sorted by id, plus lenient-mode
    bookkeeping (skipped line count and human-readable warnings)."""

    sessions: list[Session]
    skipped_lines: int = 0
    warnings: list[str] = field(default_factory=list)


def _parse_timestamp(value: str) -> datetime:
    # RFC 3339; Python 3.10's fromisoformat does not accept a trailing Z.
    text = value[:-1] + "+00:00" if value.endswith("Z") else value
    return datetime.fromisoformat(text)


def _validate_payload(line_no: int, kind: EventKind, payload) -> dict:
    if not isinstance(payload, dict):
        raise SchemaError(line_no, "payload", "must be an object")
    if kind is EventKind.USER_MESSAGE or kind is EventKind.AGENT_OBSERVATION:
        if not isinstance(payload.get("text"), str):
            raise SchemaError(line_no, "payload.text", "must be a string")
    elif kind is EventKind.AGENT_ACTION:
        if not isinstance(payload.get("command"), str):
            raise SchemaError(line_no, "payload.command", "must be a string")
        if "tool" in payload and not isinstance(payload["tool"], str):
            raise SchemaError(line_no, "payload.tool", "must be a string")
    elif kind is EventKind.STATE_CHANGE:
        if payload.get("state") not in (STATE_RUNNING, STATE_STOPPED):
            raise SchemaError(line_no, "payload.state", "must be 'running' or 'stopped'")
    elif kind is EventKind.RATING:
        stars = payload.get("stars")
        if isinstance(stars, bool) or not isinstance(stars, int) or not 1 <= stars <= 5:
            raise InvalidRatingError(line_no, stars)
    return payload


def _parse_line(line_no: int, line: str, condition_field: str):
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedLineError(line_no, f"invalid JSON ({exc.msg})") from exc
    if not isinstance(obj, dict):
        raise MalformedLineError(line_no, "event must be a JSON object")

    session_id = obj.get("session_id")
    if not isinstance(session_id, str) or not session_id:
        raise SchemaError(line_no, "session_id", "must be a non-empty string")
    condition = obj.get(condition_field)
    if not isinstance(condition, str) or not condition:
        raise SchemaError(line_no, condition_field, "must be a non-empty string")
    timestamp = obj.get("timestamp")
    if not isinstance(timestamp, str):
        raise SchemaError(line_no, "timestamp", "must be an RFC 3339 string")
    try:
        _parse_timestamp(timestamp)
    except ValueError:
        raise SchemaError(line_no, "timestamp", f"not RFC 3339: {timestamp!r}") from None
    kind_raw = obj.get("kind")
    try:
        kind = EventKind(kind_raw)
    except ValueError:
        raise SchemaError(line_no, "kind", f"unknown kind {kind_raw!r}") from None
    payload = _validate_payload(line_no, kind, obj.get("payload"))
    return session_id, condition, timestamp, kind, payload


def parse_event_log(
    lines: Iterable[str],
    *,
    lenient: bool = False,
    condition_field: str = "condition",
) -> ParsedLog:
    """Parse JSONL event lines into Sessions with segments and labels.

    Strict mode (default) raises on the first malformed line, schema
    violation, invalid rating, unbalanced state change, or unattributable
    rating. Lenient mode skips bad lines, repairs what it can, and reports
    counts and warnings instead.

    Events are ordered by (timestamp, input order); ties keep input order.
    Sessions come back sorted by session id, so the result does not depend
    on how sessions were interleaved in the file.
    """
    raw: dict[str, list] = {}
    conditions: dict[str, str] = {}
    first_condition_line: dict[str, int] = {}
    skipped = 0
    warnings: list[str] = []

    for idx, line in enumerate(lines):
        line_no = idx + 1
        if not line.strip():
            continue
        try:
            session_id, condition, timestamp, kind, payload = _parse_line(
                line_no, line, condition_field
            )
        except (MalformedLineError, SchemaError, InvalidRatingError) as exc:
            if not lenient:
                raise
            skipped += 1
            warnings.append(f"skipped {exc}")
            continue
        if session_id in conditions and conditions[session_id] != condition:
            exc = SchemaError(
                line_no,
                condition_field,
                f"session {session_id!r} has conflicting conditions "
                f"{conditions[session_id]!r} (line {first_condition_line[session_id]}) "
                f"and {condition!r}",
            )
            if not lenient:
                raise exc
            skipped += 1
            warnings.append(f"skipped {exc}")
            continue
        conditions.setdefault(session_id, condition)
        first_condition_line.setdefault(session_id, line_no)
        raw.setdefault(session_id, []).append((timestamp, idx, kind, payload))

    sessions: list[Session] = []
    for session_id in sorted(raw):
        rows = sorted(raw[session_id], key=lambda r: (_parse_timestamp(r[0]), r[1]))
        events = [
            Event(session_id=session_id, seq=seq, timestamp=ts, kind=kind, payload=payload)
            for seq, (ts, _idx, kind, payload) in enumerate(rows)
        ]
        segments, seg_warnings = segment_session(events, lenient=lenient)
        warnings.extend(seg_warnings)
        sessions.append(
            Session(
                id=session_id,
                condition=conditions[session_id],
                events=events,
                segments=segments,
                mean_rating=session_rating(segments),
            )
        )
    return ParsedLog(sessions=sessions, skipped_lines=skipped, warnings=warnings)


def segment_session(
    events: list[Event], *, lenient: bool = False
) -> tuple[list[WorkSegment], list[str]]:
    """Group one session's ordered events into work segments.

    Strict mode raises UnbalancedStates when running/stopped do not pair up
    (including a session with no cycle at all) and OrphanRating when a rating
    precedes any finished segment or arrives after the next user activity.
    Lenient mode closes a dangling cycle at end of log, synthesizes one
    whole-log segment for sessions without any state change, and drops
    unattributable ratings, flagging everything it repaired.
    """
    if not events:
        return [], []
    session_id = events[0].session_id
    warnings: list[str] = []

    if lenient and not any(e.kind is EventKind.STATE_CHANGE for e in events):
        # No cycle at all: treat the whole log as one unclosed segment.
        seg = WorkSegment(flags=("synthetic_whole_log",))
        stars = []
        for e in events:
            if e.kind is EventKind.USER_MESSAGE:
                seg.user_messages.append(e.payload["text"])
            elif e.kind in (EventKind.AGENT_ACTION, EventKind.AGENT_OBSERVATION):
                seg.trajectory.append(e)
            elif e.kind is EventKind.RATING:
                stars.append(e.payload["stars"])
        if stars:
            seg.rating = sum(stars) / len(stars)
        warnings.append(f"session {session_id!r}: no state changes, synthesized one segment")
        return [seg], warnings

    segments: list[WorkSegment] = []
    seg_stars: list[list[int]] = []
    pending_msgs: list[str] = []
    pending_traj: list[Event] = []
    running = False
    attach_open = False  # ratings may attach to segments[-1]

    def close(flags: tuple[str, ...] = ()) -> None:
        segments.append(
            WorkSegment(user_messages=pending_msgs[:], trajectory=pending_traj[:], flags=flags)
        )
        seg_stars.append([])
        pending_msgs.clear()
        pending_traj.clear()

    for e in events:
        if e.kind is EventKind.STATE_CHANGE:
            state = e.payload["state"]
            if state == STATE_RUNNING:
                if running:
                    if not lenient:
                        raise UnbalancedStatesError(session_id, "running while already running")
                    warnings.append(f"session {session_id!r}: duplicate running ignored")
                running = True
                attach_open = False
            else:
                if not running:
                    if not lenient:
                        raise UnbalancedStatesError(session_id, "stopped without a running")
                    warnings.append(
                        f"session {session_id!r}: stopped without running, segment closed anyway"
                    )
                    close(flags=("unmatched_stop",))
                else:
                    close()
                running = False
                attach_open = True
        elif e.kind is EventKind.USER_MESSAGE:
            attach_open = False
            pending_msgs.append(e.payload["text"])
        elif e.kind in (EventKind.AGENT_ACTION, EventKind.AGENT_OBSERVATION):
            pending_traj.append(e)
        elif e.kind is EventKind.RATING:
            if attach_open and segments:
                seg_stars[-1].append(e.payload["stars"])
            else:
                reason = (
                    "rating before any finished segment"
                    if not segments
                    else "rating after later user activity"
                )
                if not lenient:
                    raise OrphanRatingError(session_id, reason)
                warnings.append(f"session {session_id!r}: dropped rating ({reason})")

    if running:
        if not lenient:
            raise UnbalancedStatesError(session_id, "running without a matching stopped")
        close(flags=("unclosed_at_end",))
        warnings.append(f"session {session_id!r}: unclosed segment at end of log")
    if not segments:
        if not lenient:
            raise UnbalancedStatesError(session_id, "session has no running/stopped cycle")
        # Lenient with state changes but zero closes cannot happen: every
        # stopped closes and a dangling running closed above.

    for seg, stars in zip(segments, seg_stars):
        if stars:
            seg.rating = sum(stars) / len(stars)
    return segments, warnings


def session_rating(segments: list[WorkSegment]) -> float | None:
    """Mean rating over rated segments; None when no segment is rated."""
    rated = [s.rating for s in segments if s.rating is not None]
    if not rated:
        return None
    return sum(rated) / len(rated)


# ── serialization ────────────────────────────────────────────────────


def event_to_line(event: Event, condition: str) -> str:
    return json.dumps(
        {
            "session_id": event.session_id,
            "timestamp": event.timestamp,
            "condition": condition,
            "kind": event.kind.value,
            "payload": event.payload,
        },
        ensure_ascii=False,
        sort_keys=True,
    )


def sessions_to_jsonl(sessions: Iterable[Session]) -> str:
    """Serialize sessions back to the JSONL wire format (one event per line).
    Re-parsing the output reproduces the same Session values."""
    lines = []
    for session in sessions:
        for event in session.events:
            lines.append(event_to_line(event, session.condition))
    return "\n".join(lines) + ("\n" if lines else "")


def split_by_condition(sessions: Iterable[Session]) -> dict[str, Dataset]:
    """Partition sessions by condition into labeled/unlabeled Datasets."""
    grouped: dict[str, list[Session]] = {}
    for s in sessions:
        grouped.setdefault(s.condition, []).append(s)
    return {c: Dataset.from_sessions(grouped[c]) for c in sorted(grouped)}
