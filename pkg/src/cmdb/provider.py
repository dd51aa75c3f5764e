"""Provider-agnostic chat-completion access with a scripted mock.

Two tiers exist on purpose: a cheap gate model screens document heads and
an expensive analyst model sees full text only for documents that pass.
The live client speaks the common chat-completion wire shape; the mock
replays a JSON script keyed by (stage, doc_id, attempt) so whole pipeline
runs are bit-reproducible and test suites never touch the network.

Environment:
    CM_PROVIDER           ``mock:path/to/script.json`` or ``http``
    CM_PROVIDER_URL       chat-completions endpoint for the live client
    CM_API_KEY            bearer token
    CM_GATEKEEPER_MODEL   model name for the gate tier
    CM_ANALYST_MODEL      model name for the analyst tier
"""

from __future__ import annotations

import json
import math
import os
import threading
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Any

GATEKEEPER_TIER = "gatekeeper_tier"
ANALYST_TIER = "analyst_tier"

CHARS_PER_TOKEN = 4  # coarse accounting estimate, used consistently


class ProviderUnavailable(RuntimeError):
    """Transport kept failing after the configured retries."""


class ContextOverflow(ValueError):
    """Input exceeds the tier's context window; checked before any call."""


@dataclass
class ProviderRequest:
    model_tier: str  # GATEKEEPER_TIER | ANALYST_TIER
    system_prompt: str
    user_content: str
    max_output_tokens: int = 4096
    temperature: float = 0.0
    # routing metadata: stage/doc_id/attempt; consumed by the mock script
    # and the call log, never sent to a live endpoint
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.user_content:
            raise ValueError("user_content must be non-empty")

    def estimated_prompt_tokens(self) -> int:
        chars = len(self.system_prompt) + len(self.user_content)
        return math.ceil(chars / CHARS_PER_TOKEN)


@dataclass
class ProviderResponse:
    text: str
    prompt_tokens: int
    completion_tokens: int
    latency_ms: int


@dataclass
class CallRecord:
    tier: str
    stage: str
    doc_id: str
    attempt: int
    prompt_tokens: int
    completion_tokens: int
    transport_attempts: int
    ok: bool

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


class CallLog:
    """Thread-safe provider call log; the basis for cost accounting and
    the tier-separation check."""

    def __init__(self) -> None:
        self._records: list[CallRecord] = []
        self._lock = threading.Lock()

    def add(self, record: CallRecord) -> None:
        with self._lock:
            self._records.append(record)

    def records(self) -> list[CallRecord]:
        with self._lock:
            return list(self._records)

    def __len__(self) -> int:
        with self._lock:
            return len(self._records)


@dataclass
class ProviderLimits:
    gatekeeper_window_tokens: int = 128_000
    analyst_window_tokens: int = 200_000
    transport_retries: int = 3
    backoff_s: float = 0.5

    def window_for(self, tier: str) -> int:
        return (self.gatekeeper_window_tokens if tier == GATEKEEPER_TIER
                else self.analyst_window_tokens)


class Provider:
    """Base class: shared overflow check, retry loop and call logging."""

    def __init__(self, limits: ProviderLimits | None = None,
                 call_log: CallLog | None = None):
        self.limits = limits if limits is not None else ProviderLimits()
        # CallLog has __len__, so an empty log is falsy: test identity
        self.call_log = call_log if call_log is not None else CallLog()

    def complete(self, req: ProviderRequest) -> ProviderResponse:
        window = self.limits.window_for(req.model_tier)
        if req.estimated_prompt_tokens() > window:
            raise ContextOverflow(
                f"{req.estimated_prompt_tokens()} tokens exceed the "
                f"{req.model_tier} window of {window}")
        attempts = 0
        last_error: Exception | None = None
        while attempts <= self.limits.transport_retries:
            attempts += 1
            try:
                resp = self._send(req)
            except TransientTransportError as exc:
                last_error = exc
                if attempts <= self.limits.transport_retries:
                    self._sleep(self.limits.backoff_s * 2 ** (attempts - 1))
                continue
            self._log(req, resp, attempts, ok=True)
            return resp
        self._log(req, None, attempts, ok=False)
        raise ProviderUnavailable(
            f"transport failed {attempts} times: {last_error}")

    def _log(self, req: ProviderRequest, resp: ProviderResponse | None,
             transport_attempts: int, ok: bool) -> None:
        self.call_log.add(CallRecord(
            tier=req.model_tier,
            stage=str(req.meta.get("stage", "")),
            doc_id=str(req.meta.get("doc_id", "")),
            attempt=int(req.meta.get("attempt", 1)),
            prompt_tokens=resp.prompt_tokens if resp else 0,
            completion_tokens=resp.completion_tokens if resp else 0,
            transport_attempts=transport_attempts,
            ok=ok,
        ))

    def _sleep(self, seconds: float) -> None:
        time.sleep(seconds)

    def _send(self, req: ProviderRequest) -> ProviderResponse:
        raise NotImplementedError


class TransientTransportError(RuntimeError):
    """Internal marker for retryable failures."""


class MockProvider(Provider):
    """Replays a script file.

    Script shape (JSON)::

        {
          "gatekeeper": {
            "<doc_id>": [entry, ...],
            "__default__": [entry]
          },
          "analyst": {"<doc_id>": [entry, ...]}
        }

    where ``entry`` is either the response text or an object
    ``{"text": ..., "transport_failures": N}`` that fails N times at the
    transport level before succeeding. Attempts beyond the list reuse the
    last entry. Mock runs never sleep, so backoff costs nothing.
    """

    def __init__(self, script: dict[str, Any],
                 limits: ProviderLimits | None = None,
                 call_log: CallLog | None = None):
        super().__init__(limits, call_log)
        self.script = script
        self._fail_budget: dict[tuple[str, str, int], int] = {}
        self._lock = threading.Lock()

    @classmethod
    def from_file(cls, path: str | Path, **kwargs) -> "MockProvider":
        with open(path, "r", encoding="utf-8") as fh:
            return cls(json.load(fh), **kwargs)

    def _sleep(self, seconds: float) -> None:  # deterministic, instant
        pass

    def _entry(self, stage: str, doc_id: str, attempt: int):
        stage_map = self.script.get(stage, {})
        entries = stage_map.get(doc_id, stage_map.get("__default__"))
        if not entries:
            raise TransientTransportError(
                f"mock script has no entry for stage={stage!r} doc={doc_id!r}")
        idx = min(max(attempt, 1), len(entries)) - 1
        return entries[idx]

    def _send(self, req: ProviderRequest) -> ProviderResponse:
        stage = str(req.meta.get("stage", ""))
        doc_id = str(req.meta.get("doc_id", ""))
        attempt = int(req.meta.get("attempt", 1))
        entry = self._entry(stage, doc_id, attempt)
        if isinstance(entry, dict):
            failures = int(entry.get("transport_failures", 0))
            key = (stage, doc_id, attempt)
            with self._lock:
                used = self._fail_budget.get(key, 0)
                if used < failures:
                    self._fail_budget[key] = used + 1
                    raise TransientTransportError("scripted transport failure")
            if entry.get("transport_error"):
                raise TransientTransportError("scripted permanent transport failure")
            text = str(entry.get("text", ""))
        else:
            text = str(entry)
        return ProviderResponse(
            text=text,
            prompt_tokens=req.estimated_prompt_tokens(),
            completion_tokens=math.ceil(len(text) / CHARS_PER_TOKEN),
            latency_ms=0,
        )


class HttpProvider(Provider):
    """Chat-completion client over HTTP JSON.

    Request body: ``{model, messages[], temperature, max_tokens}``;
    response: ``choices[0].message.content`` plus ``usage`` token counts.
    """

    def __init__(self, base_url: str, api_key: str = "",
                 gatekeeper_model: str = "", analyst_model: str = "",
                 timeout_s: float = 120.0,
                 limits: ProviderLimits | None = None,
                 call_log: CallLog | None = None):
        super().__init__(limits, call_log)
        self.base_url = base_url
        self.api_key = api_key
        self.models = {GATEKEEPER_TIER: gatekeeper_model, ANALYST_TIER: analyst_model}
        self.timeout_s = timeout_s

    def _send(self, req: ProviderRequest) -> ProviderResponse:
        import httpx

        payload = {
            "model": self.models.get(req.model_tier, ""),
            "messages": [
                {"role": "system", "content": req.system_prompt},
                {"role": "user", "content": req.user_content},
            ],
            "temperature": req.temperature,
            "max_tokens": req.max_output_tokens,
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        start = time.monotonic()
        try:
            resp = httpx.post(self.base_url, json=payload, headers=headers,
                              timeout=self.timeout_s)
        except httpx.HTTPError as exc:
            raise TransientTransportError(str(exc)) from exc
        latency_ms = int((time.monotonic() - start) * 1000)
        if resp.status_code in (429,) or resp.status_code >= 500:
            raise TransientTransportError(f"HTTP {resp.status_code}")
        if resp.status_code != 200:
            raise ProviderUnavailable(f"HTTP {resp.status_code}: {resp.text[:200]}")
        body = resp.json()
        text = body["choices"][0]["message"]["content"]
        usage = body.get("usage", {})
        return ProviderResponse(
            text=text,
            prompt_tokens=int(usage.get("prompt_tokens",
                                        req.estimated_prompt_tokens())),
            completion_tokens=int(usage.get(
                "completion_tokens", math.ceil(len(text) / CHARS_PER_TOKEN))),
            latency_ms=latency_ms,
        )


def provider_from_env(env: dict[str, str] | None = None,
                      call_log: CallLog | None = None) -> Provider:
    """Build a provider from CM_* environment variables."""
    env = dict(os.environ) if env is None else env
    spec = env.get("CM_PROVIDER", "")
    if spec.startswith("mock:"):
        return MockProvider.from_file(spec[len("mock:"):], call_log=call_log)
    url = env.get("CM_PROVIDER_URL", "")
    if not url:
        raise ProviderUnavailable(
            "no provider configured: set CM_PROVIDER=mock:<script.json> "
            "or CM_PROVIDER_URL")
    return HttpProvider(
        base_url=url,
        api_key=env.get("CM_API_KEY", ""),
        gatekeeper_model=env.get("CM_GATEKEEPER_MODEL", ""),
        analyst_model=env.get("CM_ANALYST_MODEL", ""),
        call_log=call_log,
    )
