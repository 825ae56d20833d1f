"""Role-based LLM access with retries, QA logging, and cost accounting.

Two roles: the Reasoner handles extraction, initial generation, and
general-error analysis; the Editor handles patterned fixes (dimension
rewrites, persistent-error rewrites, step-by-step correction application).
Transport speaks the OpenAI-compatible chat-completion schema; a scripted
mock provider keeps the whole pipeline testable offline.
"""

from __future__ import annotations

import enum
import json
import os
import re
import threading
import time
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Protocol, Sequence, Tuple

import httpx

THOUGHT_MARKER = "Here is my thought process:"
RESPONSE_MARKER = "Here is my response:"

DEFAULT_MAX_ATTEMPTS = 3
DEFAULT_BACKOFF_SECONDS = 1.0
DEFAULT_TIMEOUT_SECONDS = 300.0


class LlmRole(enum.Enum):
    REASONER = "reasoner"
    EDITOR = "editor"


class TransportError(Exception):
    """Transient transport failure that survived every retry."""


class ProviderError(Exception):
    """Non-retryable provider response (bad request, auth, quota)."""


class TransportFailure(Exception):
    """Single retryable attempt failure; internal to the retry loop."""


class MockScriptError(AssertionError):
    """A mock exchange did not match the script; fails tests loudly."""


@dataclass(frozen=True)
class TokenUsage:
    input_tokens: int = 0
    output_tokens: int = 0

    def __post_init__(self) -> None:
        if self.input_tokens < 0 or self.output_tokens < 0:
            raise ValueError("token counts must be non-negative")

    def __add__(self, other: "TokenUsage") -> "TokenUsage":
        return TokenUsage(
            self.input_tokens + other.input_tokens, self.output_tokens + other.output_tokens
        )


@dataclass(frozen=True)
class RoleRates:
    input_usd_per_1k: Decimal
    output_usd_per_1k: Decimal

    def __post_init__(self) -> None:
        if self.input_usd_per_1k <= 0 or self.output_usd_per_1k <= 0:
            raise ValueError("price rates must be positive")


@dataclass(frozen=True)
class PriceTable:
    rates: Dict[LlmRole, RoleRates]

    @classmethod
    def default(cls) -> "PriceTable":
        return cls(
            rates={
                LlmRole.REASONER: RoleRates(Decimal("0.00055"), Decimal("0.0022")),
                LlmRole.EDITOR: RoleRates(Decimal("0.00021"), Decimal("0.00082")),
            }
        )


def compute_cost(
    usages: Iterable[Tuple[LlmRole, TokenUsage]], prices: Optional[PriceTable] = None
) -> Decimal:
    """Exact decimal sum of role-rate * tokens / 1000 over all usages."""
    prices = prices or PriceTable.default()
    total = Decimal(0)
    for role, usage in usages:
        rates = prices.rates[role]
        total += rates.input_usd_per_1k * usage.input_tokens / 1000
        total += rates.output_usd_per_1k * usage.output_tokens / 1000
    return total


@dataclass(frozen=True)
class ChatExchange:
    role: LlmRole
    prompt_messages: Tuple[dict, ...]
    response_text: str
    usage: TokenUsage
    timestamp: float
    purpose_tag: str

    def to_json(self) -> dict:
        return {
            "role": self.role.value,
            "purpose": self.purpose_tag,
            "prompt_messages": list(self.prompt_messages),
            "response_text": self.response_text,
            "usage": {
                "input_tokens": self.usage.input_tokens,
                "output_tokens": self.usage.output_tokens,
            },
            "timestamp": self.timestamp,
        }


# --- thought prompting ------------------------------------------------------


def wrap_thought(prompt: str) -> str:
    """Wrap an Editor prompt so the model separates reasoning from payload."""
    if THOUGHT_MARKER in prompt or RESPONSE_MARKER in prompt:
        raise ValueError("prompt already carries thought markers; refusing to double-wrap")
    return (
        "Respond comprehensively and in detail. First write down your thought "
        f'process after the line "{THOUGHT_MARKER}", then give your actual '
        f'answer after the line "{RESPONSE_MARKER}".\n\n' + prompt
    )


_FENCE = re.compile(r"\A```[^\n]*\n(.*?)\n?```\s*\Z", re.DOTALL)


def strip_code_fences(text: str) -> str:
    stripped = text.strip()
    match = _FENCE.match(stripped)
    return match.group(1) if match else stripped


def extract_answer(response_text: str) -> str:
    """Payload after the last response marker; the whole text when absent."""
    marker_at = response_text.rfind(RESPONSE_MARKER)
    payload = response_text[marker_at + len(RESPONSE_MARKER):] if marker_at >= 0 else response_text
    return strip_code_fences(payload.strip())


# --- providers --------------------------------------------------------------


class Provider(Protocol):
    def complete(
        self, role: LlmRole, messages: Sequence[dict], timeout: float
    ) -> Tuple[str, TokenUsage]: ...


@dataclass(frozen=True)
class EndpointConfig:
    url: str
    model: str
    api_key: str = ""
    temperature: Optional[float] = None


def endpoints_from_env(env: Optional[Dict[str, str]] = None) -> Dict[LlmRole, EndpointConfig]:
    env = dict(os.environ if env is None else env)
    endpoints = {}
    for role, prefix, default_temp in (
        (LlmRole.REASONER, "FOAMWRIGHT_REASONER", None),
        (LlmRole.EDITOR, "FOAMWRIGHT_EDITOR", 0.0),
    ):
        url = env.get(f"{prefix}_URL", "")
        if not url:
            continue
        temp = env.get(f"{prefix}_TEMPERATURE")
        endpoints[role] = EndpointConfig(
            url=url,
            model=env.get(f"{prefix}_MODEL", ""),
            api_key=env.get(f"{prefix}_API_KEY", ""),
            temperature=float(temp) if temp is not None else default_temp,
        )
    return endpoints


class HttpChatProvider:
    """OpenAI-compatible chat-completions transport, one endpoint per role."""

    def __init__(
        self,
        endpoints: Dict[LlmRole, EndpointConfig],
        client: Optional[httpx.Client] = None,
    ) -> None:
        self._endpoints = endpoints
        self._client = client or httpx.Client()

    def complete(
        self, role: LlmRole, messages: Sequence[dict], timeout: float
    ) -> Tuple[str, TokenUsage]:
        endpoint = self._endpoints.get(role)
        if endpoint is None:
            raise ProviderError(f"no endpoint configured for role {role.value!r}")
        payload: dict = {"model": endpoint.model, "messages": list(messages)}
        if endpoint.temperature is not None:
            payload["temperature"] = endpoint.temperature
        headers = {"Content-Type": "application/json"}
        if endpoint.api_key:
            headers["Authorization"] = f"Bearer {endpoint.api_key}"
        url = endpoint.url.rstrip("/") + "/chat/completions"
        try:
            response = self._client.post(url, json=payload, headers=headers, timeout=timeout)
        except httpx.HTTPError as exc:
            raise TransportFailure(str(exc)) from exc
        if response.status_code == 429 or response.status_code >= 500:
            raise TransportFailure(f"status {response.status_code}: {response.text[:200]}")
        if response.status_code >= 400:
            raise ProviderError(f"status {response.status_code}: {response.text[:500]}")
        try:
            body = response.json()
            text = body["choices"][0]["message"]["content"]
            usage = body.get("usage", {})
            tokens = TokenUsage(
                int(usage.get("prompt_tokens", 0)), int(usage.get("completion_tokens", 0))
            )
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise ProviderError(f"malformed provider response: {exc}") from exc
        return text, tokens


@dataclass
class ScriptEntry:
    role: LlmRole
    match: str
    response: str = ""
    usage: TokenUsage = field(default_factory=lambda: TokenUsage(100, 100))
    fail: Optional[str] = None  # "transport" | "provider"

    @classmethod
    def from_json(cls, obj: dict) -> "ScriptEntry":
        usage = obj.get("usage", {})
        return cls(
            role=LlmRole(obj["role"]),
            match=obj.get("match", ""),
            response=obj.get("response", ""),
            usage=TokenUsage(
                int(usage.get("input_tokens", 100)), int(usage.get("output_tokens", 100))
            ),
            fail=obj.get("fail"),
        )


class MockProvider:
    """Replays a script of (role, matcher, response, usage) in strict order."""

    def __init__(self, script: Sequence[ScriptEntry]) -> None:
        self._script = list(script)
        self._cursor = 0
        self._lock = threading.Lock()

    @classmethod
    def from_file(cls, path) -> "MockProvider":
        entries = json.loads(Path(path).read_text())
        return cls([ScriptEntry.from_json(e) for e in entries])

    @property
    def remaining(self) -> int:
        return len(self._script) - self._cursor

    def complete(
        self, role: LlmRole, messages: Sequence[dict], timeout: float
    ) -> Tuple[str, TokenUsage]:
        with self._lock:
            if self._cursor >= len(self._script):
                raise MockScriptError(f"script exhausted; unexpected {role.value} call")
            entry = self._script[self._cursor]
            self._cursor += 1
        prompt_text = "\n".join(str(m.get("content", "")) for m in messages)
        if entry.role is not role:
            raise MockScriptError(
                f"script expected a {entry.role.value} call, got {role.value}"
            )
        if entry.match and not re.search(entry.match, prompt_text, re.DOTALL):
            raise MockScriptError(
                f"prompt did not match script pattern {entry.match!r}:\n{prompt_text[:800]}"
            )
        if entry.fail == "transport":
            raise TransportFailure("scripted transport failure")
        if entry.fail == "provider":
            raise ProviderError("scripted provider failure")
        return entry.response, entry.usage


# --- gateway ----------------------------------------------------------------


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = DEFAULT_MAX_ATTEMPTS
    backoff_seconds: float = DEFAULT_BACKOFF_SECONDS
    timeout_seconds: float = DEFAULT_TIMEOUT_SECONDS


class Gateway:
    """Shared access point; per-session QA logs come from session()."""

    def __init__(
        self,
        provider: Provider,
        prices: Optional[PriceTable] = None,
        retry: Optional[RetryPolicy] = None,
        sleep: Callable[[float], None] = time.sleep,
        clock: Callable[[], float] = time.time,
    ) -> None:
        self.provider = provider
        self.prices = prices or PriceTable.default()
        self.retry = retry or RetryPolicy()
        self._sleep = sleep
        self._clock = clock

    def session(self) -> "GatewaySession":
        return GatewaySession(self)


class GatewaySession:
    """Serialized per-session QA log and usage meter."""

    def __init__(self, gateway: Gateway) -> None:
        self._gateway = gateway
        self._lock = threading.Lock()
        self.qa_log: List[ChatExchange] = []
        self.transport_attempts: List[dict] = []

    def complete(
        self, role: LlmRole, messages: Sequence[dict], purpose: str = ""
    ) -> Tuple[str, TokenUsage]:
        gw = self._gateway
        last_failure: Optional[Exception] = None
        for attempt in range(1, gw.retry.max_attempts + 1):
            try:
                text, usage = gw.provider.complete(role, messages, gw.retry.timeout_seconds)
            except TransportFailure as failure:
                last_failure = failure
                with self._lock:
                    self.transport_attempts.append(
                        {"role": role.value, "attempt": attempt, "error": str(failure)}
                    )
                if attempt < gw.retry.max_attempts:
                    gw._sleep(gw.retry.backoff_seconds * (2 ** (attempt - 1)))
                continue
            with self._lock:
                self.transport_attempts.append({"role": role.value, "attempt": attempt, "error": None})
                self.qa_log.append(
                    ChatExchange(
                        role=role,
                        prompt_messages=tuple(dict(m) for m in messages),
                        response_text=text,
                        usage=usage,
                        timestamp=gw._clock(),
                        purpose_tag=purpose,
                    )
                )
            return text, usage
        raise TransportError(
            f"{role.value} call failed after {gw.retry.max_attempts} attempts: {last_failure}"
        )

    def usages(self) -> List[Tuple[LlmRole, TokenUsage]]:
        with self._lock:
            return [(x.role, x.usage) for x in self.qa_log]

    def usage_by_role(self) -> Dict[LlmRole, TokenUsage]:
        totals = {role: TokenUsage() for role in LlmRole}
        for role, usage in self.usages():
            totals[role] = totals[role] + usage
        return totals

    def cost(self) -> Decimal:
        return compute_cost(self.usages(), self._gateway.prices)

    def save_qa_log(self, path) -> None:
        lines = [json.dumps(x.to_json(), sort_keys=True) for x in self.qa_log]
        Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))
