"""Stateless chat-completion clients.

Every request is a single user message against an OpenAI-compatible
endpoint; no system prompt and no conversation history, ever. A
deterministic mock provider replays fixture responses for offline runs.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import random
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Protocol

import httpx

from .errors import ConfigurationError, LoadError, ProviderError

logger = logging.getLogger(__name__)

RETRYABLE_STATUS = frozenset({408, 429, 500, 502, 503, 504})
BACKOFF_CAP_SECONDS = 30.0


@dataclass(frozen=True)
class LlmConfig:
    """Decoding contract for one model. There is no system-prompt field."""

    model_id: str
    endpoint_url: str
    temperature: float = 0.2
    top_p: float = 1.0
    max_output_tokens: int = 2048
    timeout_seconds: int = 120
    max_retries: int = 3
    api_key_env: str | None = None
    display_name: str | None = None

    def __post_init__(self) -> None:
        if not self.model_id:
            raise ConfigurationError("model_id must be non-empty")
        if not 0 <= self.temperature <= 2:
            raise ConfigurationError(f"temperature out of range: {self.temperature}")
        if not 0 < self.top_p <= 1:
            raise ConfigurationError(f"top_p out of range: {self.top_p}")
        if self.max_output_tokens <= 0:
            raise ConfigurationError("max_output_tokens must be positive")
        if self.timeout_seconds <= 0:
            raise ConfigurationError("timeout_seconds must be positive")
        if self.max_retries < 0:
            raise ConfigurationError("max_retries must be non-negative")


@dataclass(frozen=True)
class ChatExchange:
    """One request/response pair with provenance."""

    request_messages: tuple[dict, ...]
    response_text: str
    model_id: str
    latency_ms: int
    retry_count: int
    timestamp: str
    prompt_tokens: int | None = None
    completion_tokens: int | None = None

    def __post_init__(self) -> None:
        if len(self.request_messages) != 1:
            raise ProviderError(
                f"exchange must hold exactly one message, got {len(self.request_messages)}"
            )
        if self.request_messages[0].get("role") != "user":
            raise ProviderError("the single request message must have the user role")

    @property
    def request_prompt(self) -> str:
        return self.request_messages[0]["content"]


class Provider(Protocol):
    def complete(self, config: LlmConfig, prompt: str) -> ChatExchange: ...


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _make_messages(prompt: str) -> tuple[dict, ...]:
    return ({"role": "user", "content": prompt},)


def backoff_delay(attempt: int, rng: random.Random) -> float:
    """Delay before retry ``attempt`` (0-based): min(cap, 2^attempt + U(0,1)).

    Additive jitter keeps the sequence nondecreasing: 2^n + 1 <= 2^(n+1).
    """
    return min(BACKOFF_CAP_SECONDS, float(2**attempt) + rng.random())


class HttpProvider:
    """OpenAI-compatible chat-completions client with bounded retries."""

    def __init__(
        self,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
        rng: random.Random | None = None,
    ) -> None:
        self._client = httpx.Client(transport=transport)
        self._sleep = sleep
        self._rng = rng if rng is not None else random.Random()

    def close(self) -> None:
        self._client.close()

    def complete(self, config: LlmConfig, prompt: str) -> ChatExchange:
        if not prompt:
            raise ProviderError("prompt must be non-empty")
        url = config.endpoint_url.rstrip("/") + "/chat/completions"
        body = {
            "model": config.model_id,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": config.temperature,
            "top_p": config.top_p,
            "max_tokens": config.max_output_tokens,
        }
        headers = {"Content-Type": "application/json"}
        if config.api_key_env:
            key = os.environ.get(config.api_key_env)
            if not key:
                raise ConfigurationError(
                    f"environment variable {config.api_key_env} is not set for {config.model_id}"
                )
            headers["Authorization"] = f"Bearer {key}"

        retries = 0
        started = time.monotonic()
        while True:
            try:
                resp = self._client.post(
                    url, json=body, headers=headers, timeout=config.timeout_seconds
                )
            except httpx.TransportError as exc:
                if retries >= config.max_retries:
                    raise ProviderError(
                        f"transport failure after {retries} retries: {exc}"
                    ) from exc
                self._sleep(backoff_delay(retries, self._rng))
                retries += 1
                continue

            if resp.status_code in RETRYABLE_STATUS:
                if retries >= config.max_retries:
                    raise ProviderError(
                        f"HTTP {resp.status_code} after {retries} retries"
                    )
                self._sleep(backoff_delay(retries, self._rng))
                retries += 1
                continue
            if resp.status_code >= 400:
                # Non-retryable 4xx means the run itself is misconfigured.
                raise ConfigurationError(
                    f"HTTP {resp.status_code} from {url}: {resp.text[:200]}"
                )

            latency_ms = int((time.monotonic() - started) * 1000)
            return self._parse_success(config, prompt, resp, latency_ms, retries)

    def _parse_success(
        self,
        config: LlmConfig,
        prompt: str,
        resp: httpx.Response,
        latency_ms: int,
        retries: int,
    ) -> ChatExchange:
        try:
            data = resp.json()
            content = data["choices"][0]["message"]["content"]
        except (ValueError, LookupError, TypeError) as exc:
            raise ProviderError(f"malformed completion payload: {exc}") from exc
        if not content:
            raise ProviderError("empty response body")
        usage = data.get("usage") or {}
        return ChatExchange(
            request_messages=_make_messages(prompt),
            response_text=content,
            model_id=config.model_id,
            latency_ms=latency_ms,
            retry_count=retries,
            timestamp=utc_now(),
            prompt_tokens=usage.get("prompt_tokens"),
            completion_tokens=usage.get("completion_tokens"),
        )


@dataclass(frozen=True)
class MockFixture:
    prompt_contains: str | None
    prompt_hash: str | None
    response: str

    def matches(self, prompt: str) -> bool:
        if self.prompt_contains is not None:
            return self.prompt_contains in prompt
        if self.prompt_hash is not None:
            return hashlib.sha256(prompt.encode("utf-8")).hexdigest() == self.prompt_hash
        return False


@dataclass
class MockProvider:
    """Replays scripted responses keyed by prompt content or hash."""

    fixtures: list[MockFixture] = field(default_factory=list)
    default: str = "echo"  # "echo" or "error"

    def __post_init__(self) -> None:
        if self.default not in ("echo", "error"):
            raise ConfigurationError(f"unknown mock default: {self.default!r}")

    @classmethod
    def from_file(cls, path: Path, default: str = "echo") -> "MockProvider":
        fixtures = []
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise LoadError(f"cannot read mock fixtures {path}: {exc}") from exc
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                match = obj["match"]
                fixtures.append(
                    MockFixture(
                        prompt_contains=match.get("prompt_contains"),
                        prompt_hash=match.get("prompt_hash"),
                        response=obj["response"],
                    )
                )
            except (ValueError, KeyError, TypeError, AttributeError) as exc:
                raise LoadError(f"bad fixture at {path}:{lineno}: {exc}") from exc
        return cls(fixtures=fixtures, default=default)

    def complete(self, config: LlmConfig, prompt: str) -> ChatExchange:
        if not prompt:
            raise ProviderError("prompt must be non-empty")
        hits = [f for f in self.fixtures if f.matches(prompt)]
        if len(hits) > 1:
            logger.warning(
                "%d mock fixtures match one prompt; first wins (prompt starts: %.60s)",
                len(hits),
                prompt,
            )
        if hits:
            response = hits[0].response
        elif self.default == "echo":
            response = prompt
        else:
            raise ProviderError(f"no mock fixture matches prompt (starts: {prompt[:80]!r})")
        return ChatExchange(
            request_messages=_make_messages(prompt),
            response_text=response,
            model_id=config.model_id,
            latency_ms=0,
            retry_count=0,
            timestamp=utc_now(),
        )
