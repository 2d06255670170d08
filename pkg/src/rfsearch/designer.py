"""Designer gateway: turns prompts into candidate programs.

A backend only needs a ``complete(prompt, rng) -> str`` method; the gateway
parses the raw text into (design thought, code), drives the repair loop for
broken candidates, and runs the thought-alignment and self-verify
exchanges. Backends here: an HTTP chat-completion client and a scripted
replay backend; the deterministic offline designer lives in
``mock_designer``.
"""

from __future__ import annotations

import json
import re
import threading
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import TYPE_CHECKING, Protocol

import numpy as np

from .errors import NoScore, ParseError, RetryExhausted, TransportError

if TYPE_CHECKING:
    from .actions import PromptBundle


@dataclass(frozen=True)
class CandidateProgram:
    """One generated reward program plus the thought and lineage behind it."""

    source_text: str
    design_thought: str
    lineage_kind: str
    parent_id: int | None = None
    revision: int = 0

    def to_dict(self) -> dict:
        return {
            "source_text": self.source_text,
            "design_thought": self.design_thought,
            "lineage_kind": self.lineage_kind,
            "parent_id": self.parent_id,
            "revision": self.revision,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CandidateProgram":
        return cls(**data)


@dataclass(frozen=True)
class DesignerResponse:
    raw_text: str
    parsed_thought: str | None
    parsed_code: str | None


class DesignerBackend(Protocol):
    def complete(self, prompt: "PromptBundle", rng: np.random.Generator) -> str: ...


# --- response parsing --------------------------------------------------------

_CODE_BLOCK = re.compile(r"```[A-Za-z0-9_+-]*\n?(.*?)```", re.DOTALL)
_BRACE_SPAN = re.compile(r"\{(.*?)\}", re.DOTALL)
_VERIFY_VALUE = re.compile(r"\[\s*([+-]?\d+(?:\.\d+)?)\s*\]")


def parse_response(raw: str) -> DesignerResponse:
    """First fenced block is the code; first brace span outside it is the thought."""
    code_match = _CODE_BLOCK.search(raw)
    code = code_match.group(1).strip("\n") if code_match else None
    outside = _CODE_BLOCK.sub("", raw)
    thought_match = _BRACE_SPAN.search(outside)
    thought = thought_match.group(1).strip() if thought_match else None
    return DesignerResponse(raw_text=raw, parsed_thought=thought, parsed_code=code)


def generate(prompt: "PromptBundle", backend: DesignerBackend, rng: np.random.Generator) -> DesignerResponse:
    response = parse_response(backend.complete(prompt, rng))
    if response.parsed_code is None:
        raise ParseError("designer response contains no fenced code block")
    return response


def parse_self_verify(raw: str) -> float:
    """Last bracketed decimal in the text, clamped to [-1, 1]."""
    matches = _VERIFY_VALUE.findall(raw)
    if not matches:
        raise NoScore("no bracketed decimal in self-verify response")
    return max(-1.0, min(1.0, float(matches[-1])))


# --- designer-level exchanges --------------------------------------------------


def repair(
    candidate: CandidateProgram,
    traceback: str,
    backend: DesignerBackend,
    rng: np.random.Generator,
    limit: int = 3,
) -> CandidateProgram:
    """One repair round: ask for a fixed program, bump the revision.

    The previous design thought is carried over; alignment replaces it once
    the candidate finally executes.
    """
    from .actions import assemble_repair_prompt

    if candidate.revision >= limit:
        raise RetryExhausted(f"repair limit of {limit} reached")
    prompt = assemble_repair_prompt(candidate, traceback)
    response = generate(prompt, backend, rng)
    return replace(
        candidate,
        source_text=response.parsed_code,
        lineage_kind="repair",
        revision=candidate.revision + 1,
    )


def align_thought(
    candidate: CandidateProgram,
    backend: DesignerBackend,
    rng: np.random.Generator,
) -> str:
    """Re-describe the executed program; falls back to the original thought."""
    from .actions import assemble_align_prompt

    prompt = assemble_align_prompt(candidate)
    try:
        raw = backend.complete(prompt, rng)
    except TransportError:
        return candidate.design_thought
    match = _BRACE_SPAN.search(raw)
    text = match.group(1).strip() if match else raw.strip()
    return text or candidate.design_thought


def self_verify_score(
    candidate: CandidateProgram,
    task_text: str,
    env_text: str,
    backend: DesignerBackend,
    rng: np.random.Generator,
) -> float:
    """Expert-likeness prior in [-1, 1]; neutral 0 when the exchange fails."""
    from .actions import assemble_verify_prompt

    prompt = assemble_verify_prompt(candidate, task_text, env_text)
    try:
        raw = backend.complete(prompt, rng)
        return parse_self_verify(raw)
    except (TransportError, NoScore):
        return 0.0


# --- backends -------------------------------------------------------------------


class HttpChatDesigner:
    """Chat-completion client: messages=[system, user], configured model and
    temperature, bearer auth from the environment."""

    def __init__(
        self,
        endpoint: str,
        model: str,
        temperature: float = 1.0,
        timeout_s: float = 120.0,
        transport_retries: int = 2,
        api_key: str | None = None,
    ):
        self.endpoint = endpoint
        self.model = model
        self.temperature = temperature
        self.timeout_s = timeout_s
        self.transport_retries = transport_retries
        self.api_key = api_key

    def complete(self, prompt, rng) -> str:
        import requests

        payload = {
            "model": self.model,
            "temperature": self.temperature,
            "messages": [
                {"role": "system", "content": prompt.system_text},
                {"role": "user", "content": prompt.user_text},
            ],
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"

        last_error: Exception | None = None
        for attempt in range(self.transport_retries + 1):
            try:
                resp = requests.post(
                    self.endpoint, json=payload, headers=headers, timeout=self.timeout_s
                )
                if resp.status_code >= 500:
                    raise TransportError(f"server error {resp.status_code}")
                resp.raise_for_status()
                body = resp.json()
                return body["choices"][0]["message"]["content"]
            except (requests.RequestException, TransportError, KeyError, ValueError) as exc:
                last_error = exc
                if attempt < self.transport_retries:
                    time.sleep(min(0.2 * (attempt + 1), 1.0))
        raise TransportError(f"designer call failed after retries: {last_error}")


class ScriptedDesigner:
    """Replays canned responses keyed by action kind, in call order.

    Script shape: {kind: [response, ...], "default": [...]}; the last entry
    of a list repeats once exhausted.
    """

    def __init__(self, script: dict[str, list[str]]):
        self.script = script
        self._counters: dict[str, int] = {}
        self._lock = threading.Lock()

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedDesigner":
        return cls(json.loads(Path(path).read_text()))

    def complete(self, prompt, rng) -> str:
        kind = prompt.placeholders_resolved.get("action_kind", "default")
        with self._lock:
            entries = self.script.get(kind) or self.script.get("default")
            if not entries:
                raise TransportError(f"scripted designer has no entries for kind {kind!r}")
            step = self._counters.get(kind, 0)
            self._counters[kind] = step + 1
        return entries[min(step, len(entries) - 1)]
