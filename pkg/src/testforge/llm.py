"""Chat-completion gateway: live HTTP provider, record/replay fixtures, token ledger."""
from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

from .errors import AuthMissing, FixtureMiss, ProviderError, RateLimited, TransientProviderError
from .model import TokenUsage

log = logging.getLogger(__name__)

API_KEY_ENV = "TESTFORGE_API_KEY"
DEFAULT_MODEL = "gpt-4-0125-preview"
DEFAULT_TEMPERATURE = 0.2
TEXT = "text"
JSON_OBJECT = "json_object"
ROLES = ("system", "user")


@dataclass(frozen=True)
class ChatRequest:
    messages: tuple[tuple[str, str], ...]
    model_id: str = DEFAULT_MODEL
    temperature: float = DEFAULT_TEMPERATURE
    response_format: str = TEXT

    def __post_init__(self):
        object.__setattr__(self, "messages", tuple((r, c) for r, c in self.messages))
        if not 0 <= self.temperature <= 2:
            raise ValueError(f"temperature {self.temperature} outside [0, 2]")
        if self.response_format not in (TEXT, JSON_OBJECT):
            raise ValueError(f"unknown response format {self.response_format!r}")
        for role, _ in self.messages:
            if role not in ROLES:
                raise ValueError(f"unsupported role {role!r}")
        if not any(role == "user" for role, _ in self.messages):
            raise ValueError("a chat request needs at least one user message")

    def to_dict(self):
        return {
            "model_id": self.model_id,
            "temperature": self.temperature,
            "response_format": self.response_format,
            "messages": [{"role": r, "content": c} for r, c in self.messages],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            messages=tuple((m["role"], m["content"]) for m in d["messages"]),
            model_id=d["model_id"],
            temperature=d["temperature"],
            response_format=d["response_format"],
        )

    def with_message(self, role, content):
        return ChatRequest(self.messages + ((role, content),), self.model_id, self.temperature,
                           self.response_format)

    @property
    def digest(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False,
                               separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass
class ChatResponse:
    text: str
    usage: TokenUsage = field(default_factory=TokenUsage)
    latency: float = 0.0

    def to_dict(self):
        return {"text": self.text, "usage": self.usage.to_dict(), "latency": self.latency}

    @classmethod
    def from_dict(cls, d):
        return cls(text=d["text"], usage=TokenUsage.from_dict(d.get("usage", {})),
                   latency=d.get("latency", 0.0))


class TokenLedger:
    """Thread-safe running record of token usage, tagged by call label."""

    def __init__(self):
        self._lock = threading.Lock()
        self._entries: list[tuple[str, TokenUsage]] = []

    def record(self, label: str, usage: TokenUsage):
        with self._lock:
            self._entries.append((label, usage))

    @property
    def entries(self):
        with self._lock:
            return list(self._entries)

    def total(self, label: Optional[str] = None) -> TokenUsage:
        acc = TokenUsage()
        for lab, usage in self.entries:
            if label is None or lab == label:
                acc = acc + usage
        return acc

    def mean_total(self, label: str) -> float:
        totals = [u.total for lab, u in self.entries if lab == label]
        return sum(totals) / len(totals) if totals else 0.0


class FixtureStore:
    """Recordings addressed by request digest, one JSON file per request."""

    def __init__(self, root):
        self.root = Path(root)

    def path_for(self, digest: str) -> Path:
        return self.root / f"{digest}.json"

    def get(self, request: ChatRequest) -> ChatResponse:
        path = self.path_for(request.digest)
        if not path.is_file():
            raise FixtureMiss(request.digest)
        data = json.loads(path.read_text(encoding="utf-8"))
        if ChatRequest.from_dict(data["request"]) != request:
            raise FixtureMiss(request.digest)
        return ChatResponse.from_dict(data["response"])

    def put(self, request: ChatRequest, response: ChatResponse) -> Path:
        self.root.mkdir(parents=True, exist_ok=True)
        path = self.path_for(request.digest)
        doc = {"request": request.to_dict(), "response": response.to_dict()}
        path.write_text(json.dumps(doc, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
        return path

    def __len__(self):
        return len(list(self.root.glob("*.json"))) if self.root.is_dir() else 0


def record_fixture(store: FixtureStore, request: ChatRequest, response: ChatResponse) -> Path:
    return store.put(request, response)


class ReplayProvider:
    """Serves recorded responses only; never touches the network."""

    def __init__(self, store):
        self.store = store if isinstance(store, FixtureStore) else FixtureStore(store)

    def send(self, request: ChatRequest) -> ChatResponse:
        return self.store.get(request)


class RecordingProvider:
    def __init__(self, inner, store):
        self.inner = inner
        self.store = store if isinstance(store, FixtureStore) else FixtureStore(store)

    def send(self, request: ChatRequest) -> ChatResponse:
        response = self.inner.send(request)
        self.store.put(request, response)
        return response


class ScriptedProvider:
    """Returns canned responses in order; for tests and fixture authoring."""

    def __init__(self, responses: Iterable):
        self._queue = deque(r if isinstance(r, ChatResponse) else ChatResponse(r) for r in responses)
        self.requests: list[ChatRequest] = []
        self._lock = threading.Lock()

    def send(self, request: ChatRequest) -> ChatResponse:
        with self._lock:
            self.requests.append(request)
            if not self._queue:
                raise FixtureMiss(request.digest)
            return self._queue.popleft()


class LiveProvider:
    """OpenAI-compatible chat completions over HTTPS."""

    def __init__(self, api_key: Optional[str] = None, base_url: str = "https://api.openai.com/v1",
                 timeout: float = 600.0, client=None):
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        if not self.api_key:
            raise AuthMissing(f"set {API_KEY_ENV} to use the live provider")
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self._client = client

    def _http(self):
        if self._client is None:
            import httpx

            self._client = httpx.Client(timeout=self.timeout)
        return self._client

    def send(self, request: ChatRequest) -> ChatResponse:
        import httpx

        body = {
            "model": request.model_id,
            "temperature": request.temperature,
            "messages": [{"role": r, "content": c} for r, c in request.messages],
        }
        if request.response_format == JSON_OBJECT:
            body["response_format"] = {"type": "json_object"}
        start = time.monotonic()
        try:
            resp = self._http().post(
                f"{self.base_url}/chat/completions", json=body,
                headers={"Authorization": f"Bearer {self.api_key}"},
            )
        except httpx.TransportError as exc:
            raise TransientProviderError(str(exc)) from exc
        latency = time.monotonic() - start
        if resp.status_code == 429:
            raise RateLimited(resp.text[:500])
        if resp.status_code in (401, 403):
            raise AuthMissing(f"provider rejected the API key ({resp.status_code})")
        if resp.status_code >= 500:
            raise TransientProviderError(f"HTTP {resp.status_code}: {resp.text[:500]}")
        if resp.status_code >= 400:
            raise ProviderError(f"HTTP {resp.status_code}: {resp.text[:500]}")
        try:
            data = resp.json()
            text = data["choices"][0]["message"]["content"] or ""
            usage = data.get("usage") or {}
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ProviderError(f"unexpected response body: {exc}") from None
        return ChatResponse(
            text=text,
            usage=TokenUsage(usage.get("prompt_tokens", 0), usage.get("completion_tokens", 0)),
            latency=latency,
        )


def complete_chat(request: ChatRequest, provider, ledger: Optional[TokenLedger] = None,
                  label: str = "chat", attempts: int = 3, backoff: float = 1.0,
                  sleep=time.sleep) -> ChatResponse:
    """Send ``request``, retrying transport failures with exponential backoff."""
    for attempt in range(1, attempts + 1):
        try:
            response = provider.send(request)
            break
        except (RateLimited, TransientProviderError) as exc:
            if attempt == attempts:
                raise
            delay = backoff * 2 ** (attempt - 1)
            log.warning("attempt %d failed (%s); retrying in %.1fs", attempt, exc, delay)
            sleep(delay)
    if ledger is not None:
        ledger.record(label, response.usage)
    return response
