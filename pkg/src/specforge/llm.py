"""Chat-completion client with a record/replay cache.

The cache is keyed by the prompt digest and the sample index, so a batch run
against a seeded cache in ``replay_strict`` mode never touches the network.
"""

from __future__ import annotations

import enum
import json
import logging
import os
import tempfile
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable

import httpx

from .errors import SpecforgeError
from .prompt import digest

log = logging.getLogger(__name__)

API_KEY_ENV = "SPECFORGE_API_KEY"


class LlmError(SpecforgeError):
    pass


class AuthMissing(LlmError):
    pass


class HttpError(LlmError):
    def __init__(self, status: int, message: str = ""):
        super().__init__(f"HTTP {status}: {message}" if message else f"HTTP {status}")
        self.status = status


class RateLimited(HttpError):
    def __init__(self, message: str = ""):
        super().__init__(429, message)


class CacheMiss(LlmError):
    pass


class CacheConflict(LlmError):
    pass


class MalformedProviderPayload(LlmError):
    pass


class ClientMode(str, enum.Enum):
    LIVE = "live"
    RECORD = "record"
    REPLAY_STRICT = "replay_strict"
    REPLAY_FALLBACK = "replay_fallback"

    @classmethod
    def parse(cls, value: "ClientMode | str") -> "ClientMode":
        return cls(value.replace("-", "_")) if isinstance(value, str) else value


@dataclass(frozen=True)
class ChatRequest:
    prompt: str
    model: str
    temperature: float = 0.7
    sample_index: int = 0

    def __post_init__(self) -> None:
        if not 0 <= self.temperature <= 2:
            raise ValueError("temperature must lie in [0, 2]")
        if self.sample_index < 0:
            raise ValueError("sample_index must be non-negative")

    @property
    def digest(self) -> str:
        return digest(self.prompt, self.model, self.temperature)


@dataclass(frozen=True)
class ChatResponse:
    reasoning: str
    answer: str
    usage: dict[str, int] = field(default_factory=dict)
    latency_ms: int = 0
    recorded_at: str = ""


@dataclass
class RetryPolicy:
    max_attempts: int = 5
    base_delay_ms: int = 1000


@dataclass
class ClientConfig:
    base_url: str = "https://api.deepseek.com"
    model: str = "deepseek-reasoner"
    temperature: float = 0.7
    samples: int = 3
    max_in_flight: int = 4
    timeout_s: float = 600.0
    retry: RetryPolicy = field(default_factory=RetryPolicy)


def cache_key(req: ChatRequest, cache_root: str | Path) -> Path:
    return Path(cache_root) / req.digest / f"{req.sample_index}.json"


def _entry(req: ChatRequest, resp: ChatResponse) -> dict[str, Any]:
    return {
        "request_digest": req.digest,
        "sample_index": req.sample_index,
        "model": req.model,
        "temperature": req.temperature,
        "reasoning": resp.reasoning,
        "answer": resp.answer,
        "usage": resp.usage,
        "latency_ms": resp.latency_ms,
        "recorded_at": resp.recorded_at,
    }


def read_cache_entry(path: Path) -> ChatResponse:
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
        return ChatResponse(
            data["reasoning"], data["answer"], dict(data.get("usage", {})),
            int(data.get("latency_ms", 0)), data.get("recorded_at", ""),
        )
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise MalformedProviderPayload(f"corrupt cache entry {path}: {exc}") from exc


def write_cache_entry(path: Path, req: ChatRequest, resp: ChatResponse) -> None:
    """Atomically write a cache entry; an existing entry must be identical."""
    payload = (json.dumps(_entry(req, resp), indent=2, ensure_ascii=False) + "\n").encode("utf-8")
    if path.exists():
        if path.read_bytes() != payload:
            raise CacheConflict(f"cache entry {path} already holds a different response")
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=".json")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def parse_provider_payload(data: Any) -> tuple[str, str, dict[str, int]]:
    """Pull (reasoning, answer, usage) out of a chat-completion response body."""
    try:
        message = data["choices"][0]["message"]
    except (KeyError, IndexError, TypeError) as exc:
        raise MalformedProviderPayload(f"no choices[0].message in response: {exc}") from exc
    answer = message.get("content")
    if not isinstance(answer, str) or not answer:
        raise MalformedProviderPayload("empty answer content")
    reasoning = message.get("reasoning_content") or message.get("reasoning") or ""
    if not isinstance(reasoning, str):
        raise MalformedProviderPayload("reasoning field is not text")
    usage = data.get("usage") or {}
    return reasoning, answer, {
        "prompt_tokens": int(usage.get("prompt_tokens", 0)),
        "completion_tokens": int(usage.get("completion_tokens", 0)),
    }


class ChatClient:
    """Thread-safe client; ``max_in_flight`` bounds concurrent HTTP calls."""

    def __init__(
        self,
        config: ClientConfig | None = None,
        mode: ClientMode | str = ClientMode.LIVE,
        cache_dir: str | Path | None = None,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.config = config or ClientConfig()
        self.mode = ClientMode.parse(mode)
        self.cache_dir = Path(cache_dir) if cache_dir is not None else None
        if self.mode is not ClientMode.LIVE and self.cache_dir is None:
            raise ValueError(f"{self.mode.value} mode needs a cache directory")
        self._transport = transport
        self._sleep = sleep
        self._http: httpx.Client | None = None
        self._http_lock = threading.Lock()
        self._slots = threading.BoundedSemaphore(max(1, self.config.max_in_flight))
        self._write_lock = threading.Lock()

    def request(self, prompt: str, sample_index: int = 0) -> ChatRequest:
        return ChatRequest(prompt, self.config.model, self.config.temperature, sample_index)

    def cache_key(self, req: ChatRequest) -> Path:
        if self.cache_dir is None:
            raise ValueError("client has no cache directory")
        return cache_key(req, self.cache_dir)

    def complete(self, req: ChatRequest) -> ChatResponse:
        if self.mode is ClientMode.LIVE:
            return self._call(req)
        path = self.cache_key(req)
        if self.mode in (ClientMode.REPLAY_STRICT, ClientMode.REPLAY_FALLBACK) and path.exists():
            return read_cache_entry(path)
        if self.mode is ClientMode.REPLAY_STRICT:
            raise CacheMiss(f"no cached response at {path}")
        resp = self._call(req)
        with self._write_lock:
            write_cache_entry(path, req, resp)
        return resp

    def close(self) -> None:
        if self._http is not None:
            self._http.close()
            self._http = None

    # -- network ---------------------------------------------------------

    def _client(self) -> httpx.Client:
        with self._http_lock:
            if self._http is None:
                key = os.environ.get(API_KEY_ENV, "").strip()
                if not key:
                    raise AuthMissing(f"set {API_KEY_ENV} to call the provider")
                self._http = httpx.Client(
                    base_url=self.config.base_url,
                    headers={"Authorization": f"Bearer {key}"},
                    timeout=self.config.timeout_s,
                    transport=self._transport,
                )
            return self._http

    def _call(self, req: ChatRequest) -> ChatResponse:
        client = self._client()
        body = {
            "model": req.model,
            "temperature": req.temperature,
            "messages": [{"role": "user", "content": req.prompt}],
        }
        attempts = max(1, self.config.retry.max_attempts)
        for attempt in range(attempts):
            last = attempt == attempts - 1
            started = time.monotonic()
            with self._slots:
                try:
                    resp = client.post("/chat/completions", json=body)
                except httpx.TransportError as exc:
                    if last:
                        raise HttpError(0, f"transport error: {exc}") from exc
                    self._backoff(attempt, f"transport error {exc!r}")
                    continue
            latency = int((time.monotonic() - started) * 1000)
            if resp.status_code == 429 or resp.status_code >= 500:
                if last:
                    if resp.status_code == 429:
                        raise RateLimited(resp.text[:200])
                    raise HttpError(resp.status_code, resp.text[:200])
                self._backoff(attempt, f"HTTP {resp.status_code}")
                continue
            if resp.status_code >= 400:
                raise HttpError(resp.status_code, resp.text[:200])
            try:
                data = resp.json()
            except ValueError as exc:
                raise MalformedProviderPayload("response body is not JSON") from exc
            reasoning, answer, usage = parse_provider_payload(data)
            recorded_at = datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
            return ChatResponse(reasoning, answer, usage, latency, recorded_at)
        raise AssertionError("unreachable")

    def _backoff(self, attempt: int, why: str) -> None:
        delay = self.config.retry.base_delay_ms * (2**attempt) / 1000.0
        log.warning("%s; retrying in %.1fs (attempt %d)", why, delay, attempt + 1)
        self._sleep(delay)
