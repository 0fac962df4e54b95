"""Chat-completion client: HTTP backend with bounded retries, plus a
record/replay transcript backend so every pipeline stage runs offline.

Requests are keyed by a canonical digest over (model, messages, temperature,
max_tokens); the provenance tag is deliberately excluded so re-tagged runs
replay the same transcript.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol

import httpx

from .errors import BackendError


class BackendUnavailable(BackendError):
    pass


class BadRequest(BackendError):
    pass


class ReplayMiss(BackendError):
    def __init__(self, digest: str):
        super().__init__(f"no transcript entry for digest {digest}")
        self.digest = digest


ROLES = ("system", "user", "assistant")


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str


@dataclass(frozen=True)
class CompletionRequest:
    model: str
    messages: tuple[ChatMessage, ...]
    temperature: float = 0.0
    max_tokens: int = 512
    request_tag: str = ""  # provenance only, excluded from the digest


@dataclass(frozen=True)
class CompletionResponse:
    text: str
    finish_reason: str  # stop | length | error
    latency_ms: int
    backend_id: str


def validate_request(req: CompletionRequest) -> None:
    if not req.messages:
        raise BadRequest("request has no messages")
    if req.messages[-1].role != "user":
        raise BadRequest("last message must have role 'user'")
    for msg in req.messages:
        if msg.role not in ROLES:
            raise BadRequest(f"unknown role {msg.role!r}")
        if msg.role in ("system", "user") and not msg.content:
            raise BadRequest(f"empty content for role {msg.role!r}")
    if req.temperature < 0:
        raise BadRequest("temperature must be >= 0")
    if req.max_tokens < 1:
        raise BadRequest("max_tokens must be >= 1")


def canonical_digest(req: CompletionRequest) -> str:
    """Stable across processes and platforms; insensitive to field order."""
    payload = {
        "model": req.model,
        "messages": [{"role": m.role, "content": m.content} for m in req.messages],
        "temperature": float(req.temperature),
        "max_tokens": int(req.max_tokens),
    }
    canon = json.dumps(payload, sort_keys=True, ensure_ascii=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


class ChatBackend(Protocol):
    backend_id: str

    def send(self, req: CompletionRequest) -> CompletionResponse: ...


class HttpChatBackend:
    """POSTs the de-facto chat-completions body and reads
    choices[0].message.content. Retries transport errors and 5xx with
    exponential backoff, at most ``max_attempts`` network attempts total;
    4xx is a caller bug and is never retried. The auth token is only ever
    placed in the request header, never logged or recorded."""

    def __init__(
        self,
        url: str,
        token: str = "",
        timeout: float = 60.0,
        max_attempts: int = 3,
        backoff: float = 0.25,
        max_in_flight: int = 4,
        client: httpx.Client | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.url = url
        self.backend_id = f"http:{httpx.URL(url).host or url}"
        self._token = token
        self._client = client or httpx.Client(timeout=timeout)
        self._max_attempts = max_attempts
        self._backoff = backoff
        self._sleep = sleep
        self._gate = threading.BoundedSemaphore(max_in_flight)

    def __repr__(self) -> str:  # keep the token out of logs
        return f"HttpChatBackend(url={self.url!r})"

    def send(self, req: CompletionRequest) -> CompletionResponse:
        body = {
            "model": req.model,
            "messages": [{"role": m.role, "content": m.content} for m in req.messages],
            "temperature": float(req.temperature),
            "max_tokens": int(req.max_tokens),
        }
        headers = {"Authorization": f"Bearer {self._token}"} if self._token else {}
        last_error: Exception | None = None
        with self._gate:
            for attempt in range(1, self._max_attempts + 1):
                start = time.monotonic()
                try:
                    resp = self._client.post(self.url, json=body, headers=headers)
                except httpx.HTTPError as exc:
                    last_error = exc
                    if attempt < self._max_attempts:
                        self._sleep(self._backoff * 2 ** (attempt - 1))
                    continue
                latency_ms = int((time.monotonic() - start) * 1000)
                if 400 <= resp.status_code < 500:
                    raise BadRequest(f"backend returned {resp.status_code}: {resp.text[:200]}")
                if resp.status_code >= 500:
                    last_error = BackendUnavailable(f"backend returned {resp.status_code}")
                    if attempt < self._max_attempts:
                        self._sleep(self._backoff * 2 ** (attempt - 1))
                    continue
                data = resp.json()
                choice = data["choices"][0]
                return CompletionResponse(
                    text=choice["message"]["content"],
                    finish_reason=choice.get("finish_reason", "stop"),
                    latency_ms=latency_ms,
                    backend_id=self.backend_id,
                )
        raise BackendUnavailable(
            f"backend unreachable after {self._max_attempts} attempts: {last_error}"
        )


class CallableBackend:
    """Scripted backend for tests and fixture generation: a function maps the
    request to the completion text."""

    def __init__(self, fn: Callable[[CompletionRequest], str], backend_id: str = "scripted"):
        self._fn = fn
        self.backend_id = backend_id

    def send(self, req: CompletionRequest) -> CompletionResponse:
        return CompletionResponse(
            text=self._fn(req), finish_reason="stop", latency_ms=0, backend_id=self.backend_id
        )


MODES = ("record", "replay", "passthrough")


@dataclass
class Transcript:
    """Digest-keyed store of completion responses; the file form is one
    JSON record per line, append-only in record mode."""

    mode: str
    path: Path | None = None
    entries: dict[str, CompletionResponse] = field(default_factory=dict)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"unknown transcript mode {self.mode!r}")

    @classmethod
    def load(cls, path: str | Path, mode: str = "replay") -> "Transcript":
        entries = {}
        p = Path(path)
        if p.exists():
            for line in p.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                data = json.loads(line)
                r = data["response"]
                entries[data["digest"]] = CompletionResponse(
                    text=r["text"],
                    finish_reason=r["finish_reason"],
                    latency_ms=int(r["latency_ms"]),
                    backend_id=r["backend_id"],
                )
        return cls(mode=mode, path=p, entries=entries)

    def record(self, digest: str, response: CompletionResponse) -> None:
        with self._lock:
            self.entries[digest] = response
            if self.path is not None:
                line = json.dumps(
                    {
                        "digest": digest,
                        "response": {
                            "text": response.text,
                            "finish_reason": response.finish_reason,
                            "latency_ms": response.latency_ms,
                            "backend_id": response.backend_id,
                        },
                    },
                    sort_keys=True,
                    ensure_ascii=False,
                )
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(line + "\n")

    def lookup(self, digest: str) -> CompletionResponse | None:
        return self.entries.get(digest)


class TranscriptBackend:
    """Record/replay wrapper. Replay mode never touches the inner backend, so
    pipeline output is a pure function of (inputs, transcript)."""

    def __init__(self, transcript: Transcript, inner: ChatBackend | None = None):
        self.transcript = transcript
        self.inner = inner
        self.inner_calls = 0
        self.backend_id = f"transcript:{transcript.mode}"
        if transcript.mode in ("record", "passthrough") and inner is None:
            raise ValueError(f"{transcript.mode} mode requires an inner backend")

    def send(self, req: CompletionRequest) -> CompletionResponse:
        digest = canonical_digest(req)
        if self.transcript.mode == "replay":
            response = self.transcript.lookup(digest)
            if response is None:
                raise ReplayMiss(digest)
            return response
        self.inner_calls += 1
        response = self.inner.send(req)
        if self.transcript.mode == "record":
            self.transcript.record(digest, response)
        return response


def complete(req: CompletionRequest, backend: ChatBackend) -> CompletionResponse:
    """Validate and dispatch one completion request."""
    validate_request(req)
    return backend.send(req)
