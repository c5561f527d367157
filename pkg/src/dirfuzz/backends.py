"""Guidance backends: ground-truth oracle, transcript replay, and HTTP chat completion."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
from collections.abc import Iterable
from dataclasses import dataclass
from pathlib import Path

import httpx

from dirfuzz.analysis import AnalysisConfig, syscall_paths
from dirfuzz.callgraph import CallGraph
from dirfuzz.choice import Guidance, Origin
from dirfuzz.errors import BudgetExceeded, TranscriptExhausted, TransportError
from dirfuzz.prompts import PromptEnvelope, PromptKind, parse_response, render_syscall_list

log = logging.getLogger(__name__)

API_KEY_ENV = "DIRFUZZ_LLM_KEY"


@dataclass(frozen=True)
class LlmResponse:
    raw: str
    parsed: Guidance
    unknown: tuple[str, ...] = ()


def prompt_digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


class Backend:
    """Base class: subclasses implement :meth:`complete` returning raw text.

    ``ask`` serializes requests, so one backend instance tolerates a single
    in-flight request per campaign even when called from a worker thread.
    """

    name = "backend"

    def __init__(self, known: Iterable[str]) -> None:
        self.known = frozenset(known)
        self.calls = 0
        self._lock = threading.Lock()
        self._round = 0

    def complete(self, envelope: PromptEnvelope) -> str:
        raise NotImplementedError

    def ask(self, envelope: PromptEnvelope) -> LlmResponse:
        with self._lock:
            self.calls += 1
            raw = self.complete(envelope)
            origin = Origin.INITIAL if envelope.kind is PromptKind.INITIAL else Origin.FEEDBACK
            result = parse_response(raw, self.known, self._round, origin)
            self._round += 1
            if result.unknown:
                log.debug("dropped %d unknown name(s): %s", len(result.unknown), result.unknown)
            return LlmResponse(raw, result.guidance, result.unknown)


class OracleBackend(Backend):
    """Answers from the call graph itself.

    Initial prompts get the entry syscalls of every syscall-to-target path;
    feedback prompts additionally get the prerequisites of gated edges on
    those paths.  On benchmark kernels that is exactly the golden path.
    """

    name = "oracle"

    def __init__(self, graph: CallGraph, target: str, cfg: AnalysisConfig = AnalysisConfig()) -> None:
        super().__init__(graph.syscalls)
        paths = syscall_paths(graph, target, cfg)
        self.entries = frozenset(p[0] for p in paths)
        self.prerequisites = frozenset(
            graph.gates[e] for p in paths for e in zip(p, p[1:]) if e in graph.gates
        )

    def complete(self, envelope: PromptEnvelope) -> str:
        names = set(self.entries)
        if envelope.kind is PromptKind.FEEDBACK:
            names |= self.prerequisites
        return render_syscall_list(names) if names else "No system call reaches this function."


class ReplayBackend(Backend):
    """Replays scripted responses from a JSONL transcript, in order."""

    name = "replay"

    def __init__(self, path: str | Path, known: Iterable[str]) -> None:
        super().__init__(known)
        self.path = Path(path)
        self.entries = []
        with open(self.path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    self.entries.append(json.loads(line))
        self._cursor = 0

    def complete(self, envelope: PromptEnvelope) -> str:
        if self._cursor >= len(self.entries):
            raise TranscriptExhausted(f"{self.path} has only {len(self.entries)} response(s)")
        entry = self.entries[self._cursor]
        self._cursor += 1
        digest = entry.get("prompt_digest")
        if digest and digest != prompt_digest(envelope.text):
            log.warning("transcript entry %d was recorded for a different prompt", self._cursor - 1)
        return entry["response_text"]


class HttpBackend(Backend):
    """Generic chat-completion client.

    Posts ``{model, messages: [{role: "user", content}]}`` and reads the
    first choice's message content.  The bearer token comes from
    ``DIRFUZZ_LLM_KEY`` when set.
    """

    name = "http"

    def __init__(
        self,
        url: str,
        known: Iterable[str],
        model: str = "gpt-4o",
        timeout: float = 120.0,
        transcript: str | Path | None = None,
        client: httpx.Client | None = None,
    ) -> None:
        super().__init__(known)
        self.url = url
        self.model = model
        self.timeout = timeout
        self.transcript = Path(transcript) if transcript else None
        self._client = client

    def complete(self, envelope: PromptEnvelope) -> str:
        if envelope.token_estimate > envelope.budget:
            raise BudgetExceeded(f"prompt estimate {envelope.token_estimate} exceeds {envelope.budget}")
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(API_KEY_ENV)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        body = {"model": self.model, "messages": [{"role": "user", "content": envelope.text}]}
        try:
            if self._client is not None:
                resp = self._client.post(self.url, json=body, headers=headers, timeout=self.timeout)
            else:
                resp = httpx.post(self.url, json=body, headers=headers, timeout=self.timeout)
            resp.raise_for_status()
            text = resp.json()["choices"][0]["message"]["content"]
        except (httpx.HTTPError, ValueError, KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"chat completion request failed: {exc}") from exc
        if not isinstance(text, str):
            raise TransportError("chat completion content is not a string")
        if self.transcript is not None:
            with open(self.transcript, "a", encoding="utf-8") as fh:
                fh.write(json.dumps({"prompt_digest": prompt_digest(envelope.text), "response_text": text}) + "\n")
        return text
