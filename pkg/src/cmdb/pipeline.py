"""Corpus-scale orchestration: ingest, gate, extract, store.

Runs stage-wise with bounded worker parallelism inside each stage, which
makes the single-shot ``run`` and the staged ``ingest``/``screen``/
``extract`` commands trivially equivalent. One document's failure never
touches another document: every per-document exception is caught, recorded
on the job and surfaced in the report.

Resume: a document is skipped when a job with the same content hash,
prompt version and schema version has already progressed past the
requested stage; re-running an unchanged corpus issues zero provider
calls. Bumping either version forces re-extraction because outputs are
prompt-dependent.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from concurrent.futures import TimeoutError as FutureTimeoutError
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import Any, Callable

from . import agents, ingest
from . import records as rec
from .config import PipelineConfig
from .provider import (
    ANALYST_TIER, CHARS_PER_TOKEN, GATEKEEPER_TIER,
    CallLog, CallRecord, Provider, provider_from_env,
)
from .store import ExtractionJob, KnowledgeStore, NotFound, TERMINAL_STATES
from .units import PlausibilityTable


class EmptyCorpus(ValueError):
    """Fatal: corpus directory contains no PDFs."""


@dataclass
class CostReport:
    tier_tokens: dict[str, dict[str, int]]
    docs_screened: int
    docs_extracted: int
    actual_total_tokens: int
    hypothetical_single_stage_tokens: int
    savings_ratio: float

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass
class PipelineReport:
    docs_total: int
    state_counts: dict[str, int]
    records_stored: int
    resumed: int
    failures: list[dict[str, str]]
    cost: CostReport
    duration_s: float

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False)

    def to_text(self) -> str:
        lines = [
            f"documents: {self.docs_total} ({self.resumed} resumed)",
            "states: " + ", ".join(f"{k}={v}" for k, v in sorted(self.state_counts.items())),
            f"records stored: {self.records_stored}",
            f"tokens: {self.cost.actual_total_tokens} actual vs "
            f"{self.cost.hypothetical_single_stage_tokens} single-stage "
            f"(savings {self.cost.savings_ratio:.1%})",
        ]
        if self.failures:
            lines.append("failures:")
            lines += [f"  {f['doc_id']} [{f['stage']}]: {f['reason']}"
                      for f in self.failures]
        return "\n".join(lines)


def account_cost(call_records: list[CallRecord], store: KnowledgeStore) -> CostReport:
    """Cost summary for a run: actual per-tier tokens from the call log,
    against a hypothetical single-stage baseline that sends every full
    document to the analyst tier (4 chars/token estimate)."""
    tier_tokens: dict[str, dict[str, int]] = {
        GATEKEEPER_TIER: {"prompt_tokens": 0, "completion_tokens": 0},
        ANALYST_TIER: {"prompt_tokens": 0, "completion_tokens": 0},
    }
    for record in call_records:
        bucket = tier_tokens.setdefault(
            record.tier, {"prompt_tokens": 0, "completion_tokens": 0})
        bucket["prompt_tokens"] += record.prompt_tokens
        bucket["completion_tokens"] += record.completion_tokens
    actual = sum(b["prompt_tokens"] + b["completion_tokens"]
                 for b in tier_tokens.values())

    jobs = store.list_jobs()
    docs_screened = sum(1 for j in jobs if j.verdict is not None)
    extract_states = {"needs_review", "verified"}
    docs_extracted = sum(
        1 for j in jobs
        if j.state in extract_states
        or (j.state == "failed" and (j.error or "").startswith("extract:")))
    hypothetical = sum(math.ceil(j.char_count / CHARS_PER_TOKEN) for j in jobs)
    savings = 1.0 - actual / hypothetical if hypothetical else 0.0
    return CostReport(
        tier_tokens=tier_tokens,
        docs_screened=docs_screened,
        docs_extracted=docs_extracted,
        actual_total_tokens=actual,
        hypothetical_single_stage_tokens=hypothetical,
        savings_ratio=savings,
    )


def _force_failed(store: KnowledgeStore, doc_id: str, stage: str,
                  timeout_s: float) -> None:
    """Settle a timed-out document; the lingering worker may still win
    the race, in which case its transition stands."""
    from .store import IllegalTransition
    try:
        job = store.get_job(doc_id)
        if job.state not in TERMINAL_STATES:
            store.transition_job(job, "failed",
                                 error=f"{stage}: timed out after {timeout_s}s")
    except (NotFound, IllegalTransition):
        pass


def _run_stage(
    items: list[Any],
    worker: Callable[[Any], None],
    config: PipelineConfig,
    failures: list[dict[str, str]],
    stage: str,
    store: KnowledgeStore,
) -> None:
    """Run one stage over its work items with bounded parallelism and
    per-document isolation."""
    if not items:
        return
    with ThreadPoolExecutor(max_workers=max(1, config.workers)) as pool:
        futures = {pool.submit(worker, item): item for item in items}
        for future, item in futures.items():
            doc_id = getattr(item, "doc_id", str(item))
            try:
                future.result(timeout=config.doc_timeout_s)
            except (TimeoutError, FutureTimeoutError):
                failures.append({"doc_id": doc_id, "stage": stage,
                                 "reason": f"timed out after {config.doc_timeout_s}s"})
                _force_failed(store, doc_id, stage, config.doc_timeout_s)
            except Exception as exc:  # per-document isolation
                failures.append({"doc_id": doc_id, "stage": stage,
                                 "reason": f"{type(exc).__name__}: {exc}"})


# --------------------------------------------------------------------------
# Stages
# --------------------------------------------------------------------------

def list_corpus(corpus_dir: str | Path) -> list[Path]:
    corpus_dir = Path(corpus_dir)
    if not corpus_dir.is_dir():
        raise EmptyCorpus(f"{corpus_dir} is not a readable directory")
    pdfs = sorted(p for p in corpus_dir.iterdir() if p.suffix.lower() == ".pdf")
    if not pdfs:
        raise EmptyCorpus(f"{corpus_dir} contains no PDF files")
    return pdfs


def enqueue_document(store: KnowledgeStore, raw: ingest.RawDocument) -> ExtractionJob:
    """Register a fresh job for a raw document (state ``queued``)."""
    job = ExtractionJob(doc_id=raw.doc_id, sha256=raw.sha256,
                        source_path=raw.source_path)
    job.timestamps["queued"] = _now_iso()
    store.put_job(job)
    return job


def parse_document(
    store: KnowledgeStore,
    config: PipelineConfig,
    raw: ingest.RawDocument,
    failures: list[dict[str, str]] | None = None,
) -> ExtractionJob:
    """queued -> parsed (serialized JSON on disk) or failed."""
    failures = failures if failures is not None else []
    job = store.get_job(raw.doc_id)
    try:
        doc = ingest.parse_pdf(raw)
    except ingest.PdfError as exc:
        store.transition_job(job, "failed", error=f"parse: {exc}")
        failures.append({"doc_id": raw.doc_id, "stage": "parse",
                         "reason": str(exc)})
        return job
    path = doc.save(config.serialized_dir())
    job.serialized_path = str(path)
    job.char_count = doc.char_count
    return store.transition_job(job, "parsed")


def ingest_stage(
    corpus_dir: str | Path,
    store: KnowledgeStore,
    config: PipelineConfig,
    failures: list[dict[str, str]] | None = None,
) -> tuple[int, int]:
    """Parse new/changed PDFs into serialized docs; returns
    (processed, resumed)."""
    failures = failures if failures is not None else []
    pdfs = list_corpus(corpus_dir)
    todo: list[ingest.RawDocument] = []
    resumed = 0
    for path in pdfs:
        raw = ingest.load_raw_document(path)
        try:
            existing = store.get_job(raw.doc_id)
        except NotFound:
            existing = None
        if (
            existing is not None
            and existing.sha256 == raw.sha256
            and existing.prompt_version == agents.PROMPT_VERSION
            and existing.schema_version == rec.SCHEMA_VERSION
            and existing.state != "queued"
        ):
            resumed += 1
            continue
        enqueue_document(store, raw)
        todo.append(raw)

    def parse_one(raw: ingest.RawDocument) -> None:
        parse_document(store, config, raw, failures)

    _run_stage(todo, parse_one, config, failures, "parse", store)
    return len(todo), resumed


def screen_document(
    store: KnowledgeStore,
    provider: Provider,
    config: PipelineConfig,
    job: ExtractionJob,
    failures: list[dict[str, str]] | None = None,
) -> ExtractionJob:
    """parsed -> screening -> rejected | extracting (failed on an
    unusable verdict, which is the manual queue, never a silent drop)."""
    failures = failures if failures is not None else []
    store.transition_job(job, "screening")
    try:
        doc = ingest.SerializedDoc.load(job.serialized_path)
        head = ingest.truncate_head(doc, config.limit_chars)
        if not head.text.strip():
            return store.transition_job(job, "rejected",
                                        error="screen: empty document head")
        verdict = agents.gatekeeper_screen(provider, head)
    except agents.UnparseableVerdict as exc:
        failures.append({"doc_id": job.doc_id, "stage": "screen",
                         "reason": str(exc)})
        return store.transition_job(job, "failed", error=f"screen: {exc}")
    except Exception as exc:
        failures.append({"doc_id": job.doc_id, "stage": "screen",
                         "reason": f"{type(exc).__name__}: {exc}"})
        return store.transition_job(job, "failed", error=f"screen: {exc}")
    job.verdict = verdict.to_dict()
    return store.transition_job(
        job, "extracting" if verdict.relevant else "rejected")


def screen_stage(
    store: KnowledgeStore,
    provider: Provider,
    config: PipelineConfig,
    failures: list[dict[str, str]] | None = None,
) -> int:
    """Gate every parsed job; relevant docs move to ``extracting``."""
    failures = failures if failures is not None else []
    jobs = store.list_jobs(state="parsed")

    def screen_one(job: ExtractionJob) -> None:
        screen_document(store, provider, config, job, failures)

    _run_stage(jobs, screen_one, config, failures, "screen", store)
    return len(jobs)


def extract_document(
    store: KnowledgeStore,
    provider: Provider,
    config: PipelineConfig,
    job: ExtractionJob,
    failures: list[dict[str, str]] | None = None,
    bands: PlausibilityTable | None = None,
) -> ExtractionJob:
    """extracting -> needs_review (records upserted) or failed."""
    failures = failures if failures is not None else []
    bands = bands or PlausibilityTable.default()
    try:
        doc = ingest.SerializedDoc.load(job.serialized_path)
        result = agents.analyst_extract(
            provider, doc, budget=config.correction_budget, bands=bands)
    except Exception as exc:
        failures.append({"doc_id": job.doc_id, "stage": "extract",
                         "reason": f"{type(exc).__name__}: {exc}"})
        return store.transition_job(job, "failed", error=f"extract: {exc}")
    if result.status != "ok":
        reason = (f"{result.status} after {result.attempts} attempts"
                  if result.status == "failed_schema" else result.status)
        failures.append({"doc_id": job.doc_id, "stage": "extract",
                         "reason": reason})
        return store.transition_job(job, "failed", error=f"extract: {reason}")
    for record in result.records:
        store.upsert_record(record)
    return store.transition_job(job, "needs_review")


def extract_stage(
    store: KnowledgeStore,
    provider: Provider,
    config: PipelineConfig,
    failures: list[dict[str, str]] | None = None,
    bands: PlausibilityTable | None = None,
) -> int:
    """Run the analyst over every gate-passing job; valid records are
    upserted and the job waits for human review."""
    failures = failures if failures is not None else []
    jobs = store.list_jobs(state="extracting")
    bands = bands or PlausibilityTable.default()

    def extract_one(job: ExtractionJob) -> None:
        extract_document(store, provider, config, job, failures, bands)

    _run_stage(jobs, extract_one, config, failures, "extract", store)
    return len(jobs)


def process_document(
    store: KnowledgeStore,
    provider: Provider,
    config: PipelineConfig,
    raw: ingest.RawDocument,
    bands: PlausibilityTable | None = None,
) -> ExtractionJob:
    """Drive one already-enqueued document through parse, gate and
    extraction (the upload path of the API service)."""
    job = parse_document(store, config, raw)
    if job.state != "parsed":
        return job
    job = screen_document(store, provider, config, job)
    if job.state != "extracting":
        return job
    return extract_document(store, provider, config, job, bands=bands)


def run_pipeline(
    corpus_dir: str | Path,
    config: PipelineConfig,
    provider: Provider | None = None,
    store: KnowledgeStore | None = None,
) -> PipelineReport:
    """Full coarse-to-fine run; every document ends in a terminal or
    review state and all valid extractions are persisted."""
    start = time.monotonic()
    own_store = store is None
    store = store or KnowledgeStore(config.db_path)
    call_log = CallLog()
    if provider is None:
        env = dict(__import__("os").environ)
        env.update(config.provider_env())
        provider = provider_from_env(env, call_log=call_log)
    else:
        call_log = provider.call_log

    failures: list[dict[str, str]] = []
    try:
        _, resumed = ingest_stage(corpus_dir, store, config, failures)
        screen_stage(store, provider, config, failures)
        extract_stage(store, provider, config, failures)
        report = PipelineReport(
            docs_total=len(store.list_jobs()),
            state_counts=store.job_state_counts(),
            records_stored=store.count_records(),
            resumed=resumed,
            failures=failures,
            cost=account_cost(provider.call_log.records(), store),
            duration_s=time.monotonic() - start,
        )
    finally:
        if own_store:
            store.close()
    return report


def _now_iso() -> str:
    import datetime as _dt
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="milliseconds")
