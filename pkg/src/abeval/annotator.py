"""LLM annotator client for judged session features.

Talks to any OpenAI-compatible chat-completions endpoint. Two prompts are
sent per session: one classifies the task and the user's sentiment, one
answers seven YES/NO questions about agent behavior issues. Both demand a
JSON response; extract_json() digs the object out of whatever prose or code
fences the model wraps around it.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, fields
from threading import BoundedSemaphore

import httpx

from .errors import (
    AnnotatorUnavailableError,
    AuthError,
    ConfigError,
    ResponseParseError,
)

SENTIMENT_CLASSES = ("Positive", "Negative", "Neutral")

# Task type display names, in prompt order. The slugs are the stable ids used
# in feature vectors and CSV files.
TASK_TYPES = (
    ("fix_bugs", "Fix Bugs"),
    ("implement_features", "Implement Features"),
    ("create_from_scratch", "Create Programs from Scratch"),
    ("fix_ci", "Fix Failing Continuous Integration"),
    ("fix_merge_conflicts", "Fix Merge Conflicts"),
    ("write_docs", "Write Documentation"),
    ("perform_deployments", "Perform Deployments"),
    ("perform_data_analysis", "Perform Data Analysis"),
)

DEVELOPMENT_CLUSTERS = (
    "Write code from scratch",
    "Fix python issues",
    "Fix underspecified issues",
    "Fix Java issues",
    "Testing code",
    "Web browsing and research",
    "Administrative tasks",
    "Fix continuous integration issues",
    "None of the above",
)

# Issue flags in fixed order, with the one-line definition the judge sees.
ISSUE_FLAGS = (
    ("misunderstood_intention", "the agent misread what the user actually wanted and worked on the wrong problem"),
    ("did_not_follow_instruction", "the user gave an explicit instruction that the agent ignored or contradicted"),
    ("insufficient_analysis", "the agent started changing things before understanding the code or the problem well enough"),
    ("insufficient_testing", "the agent did not test its changes, or tested far less than the task called for"),
    ("insufficient_debugging", "the agent gave up on or papered over errors instead of diagnosing their cause"),
    ("incomplete_implementation", "the agent delivered work that only partially covers what was asked (stubs, TODOs, missing cases)"),
    ("scope_creep", "the agent made changes beyond what the user asked for"),
)

CLASSIFICATION_PROMPT = """You are reviewing one session between a software engineer and a coding agent. Below are all messages the engineer sent during the session.

Read the messages and answer:
1. Briefly describe the task the engineer wanted done.
2. Classify the engineer's sentiment toward the agent's work as one of [Positive, Negative, Neutral]. Explain your choice and quote the messages that support it.
3. Pick the single task type that fits best, exactly one of: [Fix Bugs, Implement Features, Create Programs from Scratch, Fix Failing Continuous Integration, Fix Merge Conflicts, Write Documentation, Perform Deployments, Perform Data Analysis].
4. Pick every development cluster that applies, from: [Write code from scratch, Fix python issues, Fix underspecified issues, Fix Java issues, Testing code, Web browsing and research, Administrative tasks, Fix continuous integration issues, None of the above].

Respond with a single JSON object shaped exactly like this:
{
  "task_description": "<short summary>",
  "sentiment": {
    "classification": "<Positive|Negative|Neutral>",
    "explanation": "<why>",
    "example_messages": ["<quoted message>", "..."]
  },
  "task_type": "<one task type from the list>",
  "development_cluster": ["<zero or more clusters from the list>"]
}

Engineer messages:
{messages}
"""


def _issue_prompt_template() -> str:
    numbered = "\n".join(
        f"{i + 1}. {name}: {definition}" for i, (name, definition) in enumerate(ISSUE_FLAGS)
    )
    issue_fields = ",\n".join(
        f'  "{name}": {{"answer": "<YES|NO>", "explanation": "<one sentence>"}}'
        for name, _ in ISSUE_FLAGS
    )
    return (
        "You are reviewing one session between a software engineer and a coding agent. "
        "Below are all messages the engineer sent during the session.\n\n"
        "For each numbered issue, answer YES if the messages give concrete evidence the "
        "issue occurred, otherwise NO, and add a one-sentence explanation.\n\n"
        + numbered
        + "\n\nRespond with a single JSON object keyed by issue name:\n{\n"
        + issue_fields
        + "\n}\n\nEngineer messages:\n{messages}\n"
    )


ISSUE_PROMPT = _issue_prompt_template()


def classification_prompt(combined_messages: str) -> str:
    # .replace, not .format: the templates contain literal JSON braces.
    return CLASSIFICATION_PROMPT.replace("{messages}", combined_messages)


def issue_prompt(combined_messages: str) -> str:
    return ISSUE_PROMPT.replace("{messages}", combined_messages)


@dataclass
class AnnotatorConfig:
    base_url: str
    model: str
    api_key_env: str = "ANNOTATOR_API_KEY"
    temperature: float = 0.0
    timeout: float = 60.0
    max_retries: int = 3
    max_in_flight: int = 4
    backoff_base: float = 0.5

    def __post_init__(self):
        if not self.base_url:
            raise ConfigError("annotator base_url must be set")
        if not self.model:
            raise ConfigError("annotator model must be set")
        if self.temperature < 0:
            raise ConfigError("temperature must be >= 0")
        if self.max_retries < 0:
            raise ConfigError("max_retries must be >= 0")
        if self.backoff_base < 0:
            raise ConfigError("backoff_base must be >= 0")
        if self.max_in_flight < 1:
            raise ConfigError("max_in_flight must be >= 1")
        if self.timeout <= 0:
            raise ConfigError("timeout must be positive")

    @classmethod
    def from_file(cls, path: str) -> "AnnotatorConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read annotator config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"annotator config {path} is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"annotator config {path} must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown annotator config keys: {sorted(unknown)}")
        if "base_url" not in raw or "model" not in raw:
            raise ConfigError("annotator config needs base_url and model")
        return cls(**raw)


def extract_json(text: str) -> dict:
    """Return the first top-level JSON object found in text.

    Tolerates code fences, leading prose, and trailing junk: every '{' is
    tried as a start until one parses as a complete object.
    """
    decoder = json.JSONDecoder()
    start = text.find("{")
    while start != -1:
        try:
            value, _end = decoder.raw_decode(text, start)
        except json.JSONDecodeError:
            start = text.find("{", start + 1)
            continue
        if isinstance(value, dict):
            return value
        start = text.find("{", start + 1)
    raise ResponseParseError("no JSON object found in annotator response")


class HttpAnnotator:
    """Client for an OpenAI-compatible /chat/completions endpoint.

    Retries transport failures and 5xx responses with exponential backoff,
    never retries 4xx. A semaphore bounds in-flight requests so a pool of
    worker threads cannot exceed config.max_in_flight concurrent calls.
    """

    def __init__(self, config: AnnotatorConfig, transport: httpx.BaseTransport | None = None):
        self.config = config
        self._limiter = BoundedSemaphore(config.max_in_flight)
        headers = {}
        if config.api_key_env:
            key = os.environ.get(config.api_key_env)
            if key is None:
                raise AuthError(
                    f"environment variable {config.api_key_env!r} is not set; "
                    "set it or configure api_key_env to an empty string for keyless endpoints"
                )
            headers["Authorization"] = f"Bearer {key}"
        self._client = httpx.Client(
            timeout=config.timeout, headers=headers, transport=transport
        )

    def close(self) -> None:
        self._client.close()

    def complete(self, prompt: str) -> str:
        """Send one chat completion and return the message text."""
        url = self.config.base_url.rstrip("/") + "/chat/completions"
        body = {
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.config.temperature,
        }
        last_error = "no attempt made"
        for attempt in range(self.config.max_retries + 1):
            if attempt:
                time.sleep(self.config.backoff_base * 2 ** (attempt - 1))
            try:
                with self._limiter:
                    response = self._client.post(url, json=body)
            except httpx.HTTPError as exc:
                last_error = f"transport error: {exc}"
                continue
            if response.status_code in (401, 403):
                raise AuthError(f"annotator rejected credentials (HTTP {response.status_code})")
            if 400 <= response.status_code < 500:
                raise AnnotatorUnavailableError(
                    f"annotator request invalid (HTTP {response.status_code}): "
                    f"{response.text[:200]}"
                )
            if response.status_code >= 500:
                last_error = f"HTTP {response.status_code}"
                continue
            return _completion_text(response)
        raise AnnotatorUnavailableError(
            f"annotator unreachable after {self.config.max_retries + 1} attempts ({last_error})"
        )

    def judge_session(self, session_id: str, class_prompt: str, iss_prompt: str) -> tuple[str, str]:
        return self.complete(class_prompt), self.complete(iss_prompt)


def _completion_text(response: httpx.Response) -> str:
    try:
        data = response.json()
        return data["choices"][0]["message"]["content"]
    except (ValueError, KeyError, IndexError, TypeError) as exc:
        raise ResponseParseError(f"malformed completion response: {exc}") from exc


class MockAnnotator:
    """Deterministic scripted annotator for tests.

    Takes either a flat list of response texts consumed in order, or a dict
    mapping session_id -> (classification_text, issue_text).
    """

    def __init__(self, responses):
        if isinstance(responses, dict):
            self._by_session = {
                sid: tuple(_as_text(part) for part in pair) for sid, pair in responses.items()
            }
            self._queue = None
        else:
            self._by_session = None
            self._queue = [_as_text(r) for r in responses]
        self.calls = 0

    def complete(self, prompt: str) -> str:
        self.calls += 1
        if self._queue is None:
            raise AnnotatorUnavailableError("session-keyed mock requires judge_session")
        if not self._queue:
            raise AnnotatorUnavailableError("mock annotator ran out of scripted responses")
        return self._queue.pop(0)

    def judge_session(self, session_id: str, class_prompt: str, iss_prompt: str) -> tuple[str, str]:
        if self._by_session is not None:
            self.calls += 2
            try:
                return self._by_session[session_id]
            except KeyError:
                raise AnnotatorUnavailableError(
                    f"mock annotator has no entry for session {session_id!r}"
                ) from None
        return self.complete(class_prompt), self.complete(iss_prompt)


class FixtureAnnotator:
    """Annotator backed by a JSONL fixture file, keyed by session_id.

    Each line: {"session_id": ..., "classification": <obj or str>,
    "issues": <obj or str>}. Objects are serialized back to text so the
    responses flow through the same parsing path as live completions.
    """

    def __init__(self, path: str):
        self._responses: dict[str, tuple[str, str]] = {}
        try:
            with open(path, encoding="utf-8") as fh:
                for line_no, line in enumerate(fh, start=1):
                    if not line.strip():
                        continue
                    try:
                        row = json.loads(line)
                    except json.JSONDecodeError as exc:
                        raise ConfigError(
                            f"{path}:{line_no}: fixture line is not valid JSON: {exc}"
                        ) from exc
                    if not isinstance(row, dict) or "session_id" not in row:
                        raise ConfigError(f"{path}:{line_no}: fixture line needs a session_id")
                    if "classification" not in row or "issues" not in row:
                        raise ConfigError(
                            f"{path}:{line_no}: fixture line needs classification and issues"
                        )
                    self._responses[row["session_id"]] = (
                        _as_text(row["classification"]),
                        _as_text(row["issues"]),
                    )
        except OSError as exc:
            raise ConfigError(f"cannot read annotator fixture {path}: {exc}") from exc

    def judge_session(self, session_id: str, class_prompt: str, iss_prompt: str) -> tuple[str, str]:
        try:
            return self._responses[session_id]
        except KeyError:
            raise AnnotatorUnavailableError(
                f"annotator fixture has no entry for session {session_id!r}"
            ) from None


def _as_text(value) -> str:
    return value if isinstance(value, str) else json.dumps(value)
