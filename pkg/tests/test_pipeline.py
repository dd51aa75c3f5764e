"""Orchestration: end-to-end fixture run, resume, isolation, cost."""

import json
import random

import pytest

from corpus_fixture import EXPECTED_RECORDS_STORED, RELEVANT_KEYS
from cmdb.config import PipelineConfig
from cmdb.pipeline import (
    EmptyCorpus, account_cost, extract_stage, ingest_stage, list_corpus,
    run_pipeline, screen_stage,
)
from cmdb.provider import ANALYST_TIER, GATEKEEPER_TIER, CallRecord, MockProvider
from cmdb.store import (
    ExtractionJob, KnowledgeStore, LEGAL_TRANSITIONS, TERMINAL_STATES,
)


def fresh_env(tmp_path, fixture_corpus, name="run"):
    cfg = PipelineConfig(db_path=str(tmp_path / f"{name}.sqlite"),
                         workdir=str(tmp_path / f"{name}_work"))
    store = KnowledgeStore(cfg.db_path)
    provider = MockProvider.from_file(fixture_corpus.script_path)
    return cfg, store, provider


class TestRunPipeline:
    def test_fixture_corpus_counts(self, tmp_path, fixture_corpus):
        cfg, store, provider = fresh_env(tmp_path, fixture_corpus)
        report = run_pipeline(fixture_corpus.corpus_dir, cfg,
                              provider=provider, store=store)
        assert report.docs_total == 20
        assert report.state_counts == {"needs_review": 6, "rejected": 14}
        assert report.records_stored == EXPECTED_RECORDS_STORED
        assert report.cost.docs_screened == 20
        assert report.cost.docs_extracted == 6
        assert report.failures == []
        store.close()

    def test_every_document_reaches_terminal_or_review(self, tmp_path,
                                                       fixture_corpus):
        cfg, store, provider = fresh_env(tmp_path, fixture_corpus)
        run_pipeline(fixture_corpus.corpus_dir, cfg, provider=provider,
                     store=store)
        for job in store.list_jobs():
            assert job.state in TERMINAL_STATES | {"needs_review"}
        # conservation: docs in == sum of terminal + review states
        counts = store.job_state_counts()
        assert sum(counts.values()) == 20
        store.close()

    def test_analyst_calls_only_for_gate_passing_docs(self, tmp_path,
                                                      fixture_corpus):
        cfg, store, provider = fresh_env(tmp_path, fixture_corpus)
        run_pipeline(fixture_corpus.corpus_dir, cfg, provider=provider,
                     store=store)
        relevant = {fixture_corpus.doc_ids[k] for k in RELEVANT_KEYS}
        analyst_docs = {r.doc_id for r in provider.call_log.records()
                        if r.tier == ANALYST_TIER}
        assert analyst_docs <= relevant
        assert analyst_docs == relevant
        store.close()

    def test_rerun_resumes_with_zero_provider_calls(self, tmp_path,
                                                    fixture_corpus):
        cfg, store, provider = fresh_env(tmp_path, fixture_corpus)
        run_pipeline(fixture_corpus.corpus_dir, cfg, provider=provider,
                     store=store)
        before = len(provider.call_log)
        report = run_pipeline(fixture_corpus.corpus_dir, cfg,
                              provider=provider, store=store)
        assert report.resumed == 20
        assert len(provider.call_log) == before
        assert report.records_stored == EXPECTED_RECORDS_STORED
        store.close()

    def test_empty_corpus_is_fatal(self, tmp_path, fixture_corpus):
        cfg, store, provider = fresh_env(tmp_path, fixture_corpus)
        empty = tmp_path / "empty_dir"
        empty.mkdir()
        with pytest.raises(EmptyCorpus):
            run_pipeline(empty, cfg, provider=provider, store=store)
        with pytest.raises(EmptyCorpus):
            list_corpus(tmp_path / "missing")
        store.close()

    def test_staged_equals_single_shot(self, tmp_path, fixture_corpus):
        cfg1, store1, provider1 = fresh_env(tmp_path, fixture_corpus, "single")
        run_pipeline(fixture_corpus.corpus_dir, cfg1, provider=provider1,
                     store=store1)

        cfg2, store2, provider2 = fresh_env(tmp_path, fixture_corpus, "staged")
        ingest_stage(fixture_corpus.corpus_dir, store2, cfg2)
        screen_stage(store2, provider2, cfg2)
        extract_stage(store2, provider2, cfg2)

        # identical stores: same records, same job states
        recs1 = {r["record_id"]: r for r in store1.all_records()}
        recs2 = {r["record_id"]: r for r in store2.all_records()}
        assert recs1 == recs2
        states1 = {j.doc_id: j.state for j in store1.list_jobs()}
        states2 = {j.doc_id: j.state for j in store2.list_jobs()}
        assert states1 == states2
        store1.close()
        store2.close()

    def test_isolation_fault_on_one_doc_leaves_others_identical(
            self, tmp_path, fixture_corpus):
        cfg1, store1, provider1 = fresh_env(tmp_path, fixture_corpus, "base")
        run_pipeline(fixture_corpus.corpus_dir, cfg1, provider=provider1,
                     store=store1)

        # inject a permanent transport fault for doc C's analyst calls
        script = json.loads(fixture_corpus.script_path.read_text())
        doc_c = fixture_corpus.doc_ids["C"]
        script["analyst"][doc_c] = [{"transport_error": True}]
        cfg2 = PipelineConfig(db_path=str(tmp_path / "faulty.sqlite"),
                              workdir=str(tmp_path / "faulty_work"))
        store2 = KnowledgeStore(cfg2.db_path)
        provider2 = MockProvider(script)
        report2 = run_pipeline(fixture_corpus.corpus_dir, cfg2,
                               provider=provider2, store=store2)

        assert store2.get_job(doc_c).state == "failed"
        assert any(f["doc_id"] == doc_c for f in report2.failures)
        # every other document's outcome is bit-identical
        for job1 in store1.list_jobs():
            if job1.doc_id == doc_c:
                continue
            job2 = store2.get_job(job1.doc_id)
            assert (job1.state, job1.verdict, job1.error) == \
                (job2.state, job2.verdict, job2.error)
        recs1 = {r["record_id"]: r for r in store1.all_records()
                 if r["doc_id"] != doc_c}
        recs2 = {r["record_id"]: r for r in store2.all_records()}
        assert recs1 == recs2
        store1.close()
        store2.close()

    def test_version_bump_forces_reextraction(self, tmp_path, fixture_corpus,
                                              monkeypatch):
        cfg, store, provider = fresh_env(tmp_path, fixture_corpus)
        run_pipeline(fixture_corpus.corpus_dir, cfg, provider=provider,
                     store=store)
        before = len(provider.call_log)

        import cmdb.records
        monkeypatch.setattr(cmdb.records, "SCHEMA_VERSION", "2-test")
        report = run_pipeline(fixture_corpus.corpus_dir, cfg,
                              provider=provider, store=store)
        assert report.resumed == 0
        assert len(provider.call_log) > before
        store.close()


class TestWorkerParallelism:
    def test_results_independent_of_worker_count(self, tmp_path,
                                                 fixture_corpus):
        outcomes = []
        for workers in (1, 4):
            cfg, store, provider = fresh_env(tmp_path, fixture_corpus,
                                             f"w{workers}")
            cfg.workers = workers
            run_pipeline(fixture_corpus.corpus_dir, cfg, provider=provider,
                         store=store)
            outcomes.append((
                {j.doc_id: j.state for j in store.list_jobs()},
                {r["record_id"]: r for r in store.all_records()},
            ))
            store.close()
        assert outcomes[0] == outcomes[1]


class TestCostAccounting:
    def test_fixture_run_counts(self, tmp_path, fixture_corpus):
        cfg, store, provider = fresh_env(tmp_path, fixture_corpus)
        run_pipeline(fixture_corpus.corpus_dir, cfg, provider=provider,
                     store=store)
        cost = account_cost(provider.call_log.records(), store)
        assert cost.docs_extracted <= cost.docs_screened
        assert cost.tier_tokens[ANALYST_TIER]["prompt_tokens"] > 0
        assert cost.actual_total_tokens == sum(
            b["prompt_tokens"] + b["completion_tokens"]
            for b in cost.tier_tokens.values())
        assert cost.savings_ratio == pytest.approx(
            1 - cost.actual_total_tokens / cost.hypothetical_single_stage_tokens)
        store.close()

    def test_realistic_sizes_show_positive_savings(self):
        # hand-built log: 20 screened heads, 6 full-document extractions,
        # documents big enough that the gate actually saves tokens
        store = KnowledgeStore(":memory:")
        for i in range(20):
            job = ExtractionJob(doc_id=f"d{i}", sha256=str(i),
                                char_count=100_000)
            job.verdict = {"relevant": i < 6, "score": 1.0 if i < 6 else 0.0}
            job.state = "needs_review" if i < 6 else "rejected"
            store.put_job(job)
        log = []
        for i in range(20):
            log.append(CallRecord(tier=GATEKEEPER_TIER, stage="gatekeeper",
                                  doc_id=f"d{i}", attempt=1,
                                  prompt_tokens=2_300, completion_tokens=60,
                                  transport_attempts=1, ok=True))
        for i in range(6):
            log.append(CallRecord(tier=ANALYST_TIER, stage="analyst",
                                  doc_id=f"d{i}", attempt=1,
                                  prompt_tokens=26_000, completion_tokens=900,
                                  transport_attempts=1, ok=True))
        cost = account_cost(log, store)
        assert cost.docs_screened == 20
        assert cost.docs_extracted == 6
        assert cost.hypothetical_single_stage_tokens == 20 * 25_000
        assert cost.savings_ratio > 0.5
        store.close()

    def test_all_rejected_maximal_savings(self):
        store = KnowledgeStore(":memory:")
        for i in range(5):
            job = ExtractionJob(doc_id=f"d{i}", sha256=str(i), char_count=40_000)
            job.verdict = {"relevant": False, "score": 0.0}
            job.state = "rejected"
            store.put_job(job)
        log = [CallRecord(tier=GATEKEEPER_TIER, stage="gatekeeper",
                          doc_id=f"d{i}", attempt=1, prompt_tokens=2_000,
                          completion_tokens=50, transport_attempts=1, ok=True)
               for i in range(5)]
        cost = account_cost(log, store)
        assert cost.tier_tokens[ANALYST_TIER] == {"prompt_tokens": 0,
                                                  "completion_tokens": 0}
        assert cost.docs_extracted == 0
        assert cost.savings_ratio == pytest.approx(
            1 - (5 * 2_050) / (5 * 10_000))
        store.close()

    def test_all_pass_can_show_negative_savings_honestly(self, tmp_path,
                                                         fixture_corpus):
        # tiny documents + prompt overhead: the report must not hide it
        script = json.loads(fixture_corpus.script_path.read_text())
        for doc_id in list(script["gatekeeper"]):
            script["gatekeeper"][doc_id] = [json.dumps({
                "domain_relevance": True, "theoretical_content": True,
                "experimental_validation": True, "rationale": "pass all"})]
        script["analyst"]["__default__"] = ["[]"]
        cfg = PipelineConfig(db_path=str(tmp_path / "allpass.sqlite"),
                             workdir=str(tmp_path / "allpass_work"))
        store = KnowledgeStore(cfg.db_path)
        report = run_pipeline(fixture_corpus.corpus_dir, cfg,
                              provider=MockProvider(script), store=store)
        assert report.cost.docs_extracted == 20
        assert report.cost.savings_ratio <= 0
        store.close()


class TestStateMachineSafety:
    def test_random_fault_injection_never_records_illegal_transition(
            self, tmp_path, fixture_corpus):
        # property test: across randomized fault patterns the state
        # machine only ever takes legal arcs
        rng = random.Random(1234)
        base = json.loads(fixture_corpus.script_path.read_text())
        for trial in range(6):
            script = json.loads(json.dumps(base))
            for doc_id in list(script["gatekeeper"]):
                roll = rng.random()
                if roll < 0.15:
                    script["gatekeeper"][doc_id] = ["garbage", "more garbage"]
                elif roll < 0.3:
                    script["gatekeeper"][doc_id] = [
                        {"transport_error": True}]
            for doc_id in list(script["analyst"]):
                roll = rng.random()
                if roll < 0.2:
                    script["analyst"][doc_id] = ['{"not": "a list"}']
            cfg = PipelineConfig(db_path=str(tmp_path / f"fuzz{trial}.sqlite"),
                                 workdir=str(tmp_path / f"fuzz{trial}_work"))
            store = KnowledgeStore(cfg.db_path)
            run_pipeline(fixture_corpus.corpus_dir, cfg,
                         provider=MockProvider(script), store=store)
            for job in store.list_jobs():
                assert job.state in TERMINAL_STATES | {"needs_review"}
                # replay recorded timestamps: each consecutive pair is legal
                order = sorted(job.timestamps.items(), key=lambda kv: kv[1])
                chain = [state for state, _ in order]
                for a, b in zip(chain, chain[1:]):
                    assert b in LEGAL_TRANSITIONS[a], (job.doc_id, chain)
            store.close()
