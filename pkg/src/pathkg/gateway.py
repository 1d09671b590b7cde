"""Generation endpoints and structured-output parsing.

Backends expose ``complete(request) -> str``. :func:`generate` adds retries
with exponential backoff; :class:`RequestPool` fans requests out under a
max-in-flight bound and a per-minute rate limit, returning results in
request order.
"""

from __future__ import annotations

import enum
import hashlib
import json
import logging
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Protocol, Sequence

import httpx

from .corpus import Lexicon, PhysicianAction
from .errors import (
    CassetteMiss,
    ConfigError,
    EndpointTimeout,
    GatewayError,
    RateLimited,
    TransportError,
    UnknownAction,
)
from .pathway import parse_encoded
from .prompts import CURRENT_HEADER, ITEM_SEP, NONE_MARK, render_target, split_target

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GenerationRequest:
    input_text: str
    max_new_tokens: int = 256
    temperature: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.max_new_tokens <= 0:
            raise ValueError("max_new_tokens must be positive")


class Backend(Protocol):
    def complete(self, req: GenerationRequest) -> str: ...


def _digest(*parts: str) -> bytes:
    h = hashlib.sha256()
    for p in parts:
        h.update(p.encode("utf-8"))
        h.update(b"\x00")
    return h.digest()


_MOCK_REPLIES = (
    "请问{ent}持续多久了？",
    "{ent}的情况建议先观察，注意饮食清淡。",
    "考虑和{ent}有关，可以做个检查看看。",
    "{ent}最近有加重吗？还有别的不舒服吗？",
    "根据描述，{ent}可以先对症处理。",
    "您好，{ent}需要结合具体情况判断。",
)
_MOCK_ACTIONS = (
    PhysicianAction.INQUIRE,
    PhysicianAction.MAKE_DIAGNOSIS,
    PhysicianAction.PROVIDE_DAILY_PRECAUTION,
    PhysicianAction.STATE_REQUIRED_MEDICAL_TEST,
    PhysicianAction.PRESCRIBE_MEDICATIONS,
    PhysicianAction.INFORM,
)


class MockBackend:
    """Deterministic stand-in: output is a pure function of (input_text, seed).

    Echoes the current patient turn's entities and picks an action and a
    reply template from a hash, so the output is structured and scoreable.
    """

    def complete(self, req: GenerationRequest) -> str:
        d = _digest(str(req.seed), req.input_text)
        entities: list[str] = []
        if CURRENT_HEADER in req.input_text:
            current = req.input_text.rsplit(CURRENT_HEADER, 1)[1].strip()
            try:
                entities = parse_encoded(current)[0]
            except (ValueError, UnknownAction):
                entities = []
        if entities:
            action = _MOCK_ACTIONS[d[0] % len(_MOCK_ACTIONS)]
            reply = _MOCK_REPLIES[d[1] % len(_MOCK_REPLIES)].format(ent=entities[0])
        else:
            action = PhysicianAction.CHITCHAT
            reply = "您好，请详细说说您的情况。"
        return render_target(entities, [action], reply)


class MockJudgeBackend:
    """Deterministic judge stand-in returning hash-derived scores as strict JSON."""

    def complete(self, req: GenerationRequest) -> str:
        d = _digest(str(req.seed), req.input_text)
        return json.dumps(
            {"hallucination": d[0] % 4, "consistency": 3 + d[1] % 6, "reasoning": "mock verdict"},
            ensure_ascii=False,
        )


class CallableBackend:
    """Wrap a plain function ``str -> str`` (handy for scripted tests)."""

    def __init__(self, fn: Callable[[str], str]):
        self.fn = fn

    def complete(self, req: GenerationRequest) -> str:
        return self.fn(req.input_text)


class OpenAICompatibleBackend:
    """Chat-completions client; the request body is one user message holding the prompt."""

    def __init__(
        self,
        base_url: str,
        model: str,
        api_key_env: str = "OPENAI_API_KEY",
        timeout: float = 60.0,
        client: httpx.Client | None = None,
    ):
        self.url = base_url.rstrip("/") + "/chat/completions"
        self.model = model
        self.api_key_env = api_key_env
        self.client = client or httpx.Client(timeout=timeout)

    def complete(self, req: GenerationRequest) -> str:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        body = {
            "model": self.model,
            "messages": [{"role": "user", "content": req.input_text}],
            "max_tokens": req.max_new_tokens,
            "temperature": req.temperature,
        }
        try:
            resp = self.client.post(self.url, json=body, headers=headers)
        except httpx.TimeoutException:
            raise EndpointTimeout() from None
        except httpx.TransportError as exc:
            raise TransportError(None, detail=str(exc)) from None
        if resp.status_code == 429:
            raise RateLimited()
        if resp.status_code >= 400:
            raise TransportError(resp.status_code, detail=resp.text[:200])
        try:
            return resp.json()["choices"][0]["message"]["content"] or ""
        except (ValueError, KeyError, IndexError, TypeError):
            raise TransportError(resp.status_code, detail="malformed completion payload") from None


def request_hash(req: GenerationRequest) -> str:
    payload = json.dumps(
        {"input_text": req.input_text, "max_new_tokens": req.max_new_tokens, "temperature": req.temperature},
        ensure_ascii=False,
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class CassetteBackend:
    """Replays ``{"request_hash", "response"}`` JSONL; with ``record`` it fills misses from ``inner``."""

    def __init__(self, path: str | Path, inner: Backend | None = None, record: bool = False):
        self.path = Path(path)
        self.inner = inner
        self.record = record
        self._lock = threading.Lock()
        self.entries: dict[str, str] = {}
        if self.path.exists():
            with open(self.path, encoding="utf-8") as f:
                for line in f:
                    if line.strip():
                        rec = json.loads(line)
                        self.entries[rec["request_hash"]] = rec["response"]

    def complete(self, req: GenerationRequest) -> str:
        key = request_hash(req)
        with self._lock:
            if key in self.entries:
                return self.entries[key]
        if not (self.record and self.inner is not None):
            raise CassetteMiss(key)
        response = self.inner.complete(req)
        with self._lock:
            self.entries[key] = response
            with open(self.path, "a", encoding="utf-8") as f:
                f.write(json.dumps({"request_hash": key, "response": response}, ensure_ascii=False) + "\n")
        return response


def _transient(exc: GatewayError) -> bool:
    if isinstance(exc, (EndpointTimeout, RateLimited)):
        return True
    if isinstance(exc, TransportError):
        return exc.status is None or exc.status >= 500
    return False


def _with_attempts(exc: GatewayError, attempts: int) -> GatewayError:
    if isinstance(exc, TransportError):
        new = TransportError(exc.status, attempts, exc.detail)
    elif isinstance(exc, EndpointTimeout):
        new = EndpointTimeout(attempts)
    elif isinstance(exc, RateLimited):
        new = RateLimited(attempts)
    else:
        exc.attempts = attempts
        return exc
    return new


def generate(
    req: GenerationRequest,
    backend: Backend,
    max_attempts: int = 3,
    base_delay: float = 0.5,
    max_delay: float = 8.0,
    sleep: Callable[[float], None] = time.sleep,
) -> str:
    """Call ``backend`` with retries on transient transport failures."""
    attempt = 0
    while True:
        attempt += 1
        try:
            return backend.complete(req)
        except GatewayError as exc:
            if not _transient(exc) or attempt >= max_attempts:
                raise _with_attempts(exc, attempt) from exc
            delay = min(max_delay, base_delay * 2 ** (attempt - 1))
            log.warning("transient endpoint failure (%s); retry %d in %.2fs", exc, attempt, delay)
            sleep(delay)


class RateLimiter:
    """Spaces calls at least ``60 / per_minute`` seconds apart across threads."""

    def __init__(self, per_minute: float | None, clock=time.monotonic, sleep=time.sleep):
        self.interval = 60.0 / per_minute if per_minute else 0.0
        self.clock = clock
        self.sleep = sleep
        self._next = 0.0
        self._lock = threading.Lock()

    def acquire(self) -> None:
        if not self.interval:
            return
        with self._lock:
            now = self.clock()
            slot = max(now, self._next)
            self._next = slot + self.interval
        if slot > now:
            self.sleep(slot - now)


@dataclass(frozen=True)
class EndpointConfig:
    kind: str = "mock"  # mock | mock-judge | openai | cassette
    base_url: str = ""
    model: str = ""
    api_key_env: str = "OPENAI_API_KEY"
    timeout: float = 60.0
    temperature: float = 0.0
    max_attempts: int = 3
    base_delay: float = 0.5
    max_in_flight: int = 4
    requests_per_minute: float | None = None
    cassette: str | None = None
    record: bool = False

    def to_dict(self) -> dict:
        return {
            "kind": self.kind, "base_url": self.base_url, "model": self.model,
            "temperature": self.temperature, "max_attempts": self.max_attempts,
            "max_in_flight": self.max_in_flight, "requests_per_minute": self.requests_per_minute,
            "cassette": self.cassette,
        }


def make_backend(cfg: EndpointConfig) -> Backend:
    if cfg.kind == "mock":
        return MockBackend()
    if cfg.kind == "mock-judge":
        return MockJudgeBackend()
    if cfg.kind in ("openai", "cassette"):
        live = None
        if cfg.base_url:
            if not cfg.model:
                raise ConfigError("endpoint model name is required")
            live = OpenAICompatibleBackend(cfg.base_url, cfg.model, cfg.api_key_env, cfg.timeout)
        if cfg.kind == "openai":
            if live is None:
                raise ConfigError("openai endpoint needs base_url")
            return live
        if not cfg.cassette:
            raise ConfigError("cassette endpoint needs a cassette path")
        return CassetteBackend(cfg.cassette, inner=live, record=cfg.record)
    raise ConfigError(f"unknown endpoint kind {cfg.kind!r}")


class RequestPool:
    def __init__(
        self,
        backend: Backend,
        max_in_flight: int = 4,
        requests_per_minute: float | None = None,
        max_attempts: int = 3,
        base_delay: float = 0.5,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.backend = backend
        self.max_in_flight = max(1, max_in_flight)
        self.limiter = RateLimiter(requests_per_minute, sleep=sleep)
        self.max_attempts = max_attempts
        self.base_delay = base_delay
        self.sleep = sleep

    @classmethod
    def from_config(cls, cfg: EndpointConfig, backend: Backend | None = None) -> "RequestPool":
        return cls(
            backend or make_backend(cfg), cfg.max_in_flight, cfg.requests_per_minute,
            cfg.max_attempts, cfg.base_delay,
        )

    def call(self, req: GenerationRequest) -> str:
        self.limiter.acquire()
        return generate(req, self.backend, self.max_attempts, self.base_delay, sleep=self.sleep)

    def run(self, requests: Sequence[GenerationRequest]) -> list[str]:
        """Results aligned with ``requests``; the first failure propagates."""
        if self.max_in_flight == 1:
            return [self.call(r) for r in requests]
        with ThreadPoolExecutor(max_workers=self.max_in_flight) as pool:
            return list(pool.map(self.call, requests))


class ParseMode(enum.Enum):
    STRICT = "strict"
    FALLBACK = "fallback"


@dataclass(frozen=True)
class StructuredResponse:
    predicted_entities: tuple[str, ...]
    predicted_actions: tuple[PhysicianAction, ...]
    response_text: str
    raw: str
    parse_mode: ParseMode


def _items(segment: str) -> list[str]:
    if segment == NONE_MARK:
        return []
    for sep in ("，", ","):
        segment = segment.replace(sep, ITEM_SEP)
    return [s.strip() for s in segment.split(ITEM_SEP) if s.strip() and s.strip() != NONE_MARK]


def parse_structured(raw: str, lex: Lexicon | None = None) -> StructuredResponse:
    """Split a ``[ENTITIES] .. [ACTIONS] .. [RESPONSE] ..`` output; Fallback if markers are missing."""
    parts = split_target(raw)
    if parts is None:
        return StructuredResponse((), (), raw, raw, ParseMode.FALLBACK)
    ent_seg, act_seg, response = parts
    entities: list[str] = []
    for name in _items(ent_seg):
        canonical = lex.lookup(name) if lex is not None else name
        if canonical and canonical not in entities:
            entities.append(canonical)
    actions: list[PhysicianAction] = []
    for label in _items(act_seg):
        try:
            a = PhysicianAction.parse(label)
        except UnknownAction:
            continue
        if a not in actions:
            actions.append(a)
    return StructuredResponse(tuple(entities), tuple(actions), response, raw, ParseMode.STRICT)
