"""Provider contract: mock scripting, retries, overflow, env wiring."""

import json

import pytest

from cmdb.provider import (
    ANALYST_TIER, GATEKEEPER_TIER, CallLog, ContextOverflow, HttpProvider,
    MockProvider, ProviderLimits, ProviderRequest, ProviderUnavailable,
    provider_from_env,
)


def req(text="hello", tier=GATEKEEPER_TIER, stage="gatekeeper", doc="d1",
        attempt=1):
    return ProviderRequest(
        model_tier=tier, system_prompt="sys", user_content=text,
        meta={"stage": stage, "doc_id": doc, "attempt": attempt})


class TestMockProvider:
    def test_echo_contract_is_deterministic(self):
        p = MockProvider({"gatekeeper": {"d1": ["OK"]}})
        first = p.complete(req())
        second = p.complete(req())
        assert first.text == "OK"
        assert (first.prompt_tokens, first.completion_tokens) == \
            (second.prompt_tokens, second.completion_tokens)
        assert first.latency_ms == 0

    def test_fail_twice_then_succeed_logs_three_transport_attempts(self):
        p = MockProvider({"gatekeeper": {"d1": [
            {"text": "recovered", "transport_failures": 2}]}})
        resp = p.complete(req())
        assert resp.text == "recovered"
        record = p.call_log.records()[-1]
        assert record.transport_attempts == 3
        assert record.ok

    def test_permanent_transport_failure_exhausts_retries(self):
        p = MockProvider({"gatekeeper": {"d1": [{"transport_error": True}]}},
                         limits=ProviderLimits(transport_retries=2))
        with pytest.raises(ProviderUnavailable):
            p.complete(req())
        record = p.call_log.records()[-1]
        assert record.transport_attempts == 3 and not record.ok

    def test_context_overflow_checked_before_any_call(self):
        p = MockProvider({"gatekeeper": {"d1": ["OK"]}},
                         limits=ProviderLimits(gatekeeper_window_tokens=10))
        with pytest.raises(ContextOverflow):
            p.complete(req(text="x" * 1000))
        assert len(p.call_log) == 0

    def test_attempts_beyond_script_reuse_last_entry(self):
        p = MockProvider({"analyst": {"d1": ["first", "second"]}})
        assert p.complete(req(tier=ANALYST_TIER, stage="analyst",
                              attempt=5)).text == "second"

    def test_default_entry(self):
        p = MockProvider({"gatekeeper": {"__default__": ["fallback"]}})
        assert p.complete(req(doc="unknown")).text == "fallback"

    def test_missing_entry_fails(self):
        p = MockProvider({"gatekeeper": {}},
                         limits=ProviderLimits(transport_retries=0))
        with pytest.raises(ProviderUnavailable):
            p.complete(req())

    def test_empty_user_content_rejected(self):
        with pytest.raises(ValueError):
            ProviderRequest(model_tier=GATEKEEPER_TIER, system_prompt="s",
                            user_content="")


class TestCallLog:
    def test_records_tier_and_stage(self):
        log = CallLog()
        p = MockProvider({"gatekeeper": {"d1": ["a"]},
                          "analyst": {"d1": ["b"]}}, call_log=log)
        p.complete(req())
        p.complete(req(tier=ANALYST_TIER, stage="analyst"))
        tiers = [(r.tier, r.stage) for r in log.records()]
        assert tiers == [(GATEKEEPER_TIER, "gatekeeper"),
                         (ANALYST_TIER, "analyst")]


class TestProviderFromEnv:
    def test_mock_spec(self, tmp_path):
        script = tmp_path / "script.json"
        script.write_text(json.dumps({"gatekeeper": {"d1": ["yo"]}}))
        p = provider_from_env({"CM_PROVIDER": f"mock:{script}"})
        assert isinstance(p, MockProvider)
        assert p.complete(req()).text == "yo"

    def test_http_spec(self):
        p = provider_from_env({
            "CM_PROVIDER_URL": "http://example.invalid/v1/chat",
            "CM_API_KEY": "k",
            "CM_GATEKEEPER_MODEL": "small",
            "CM_ANALYST_MODEL": "big",
        })
        assert isinstance(p, HttpProvider)
        assert p.models == {GATEKEEPER_TIER: "small", ANALYST_TIER: "big"}

    def test_unconfigured_rejected(self):
        with pytest.raises(ProviderUnavailable):
            provider_from_env({})
