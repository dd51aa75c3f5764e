"""Operator command line.

Sub-commands map one-to-one onto pipeline stages and services:

    ingest DIR      parse PDFs into serialized docs
    screen DIR      run the relevance gate over parsed docs
    extract DIR     run the analyst over gate-passing docs
    run DIR         full pipeline (ingest + screen + extract)
    eval            score a store or export against ground truth
    query           search stored records
    export          dump the store as JSON Lines
    serve           start the HTTP API

Exit codes: 0 success, 1 partial per-document failures, 2 fatal or usage
errors. ``--json`` makes output machine-readable on every sub-command.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import __version__
from . import evaluation as ev
from . import records as rc
from .config import PipelineConfig, load_config
from .pipeline import (
    EmptyCorpus, PipelineReport, extract_stage, ingest_stage,
    run_pipeline, screen_stage,
)
from .provider import CallLog, provider_from_env
from .store import BadFilter, KnowledgeStore, QueryFilter, StoreUnavailable

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_FATAL = 2


class Ctx:
    def __init__(self, config: PipelineConfig, as_json: bool):
        self.config = config
        self.as_json = as_json


def _build_config(config_path: str | None, db: str | None,
                  workdir: str | None, provider: str | None) -> PipelineConfig:
    overrides = {"db_path": db, "workdir": workdir, "provider": provider}
    return load_config(config_path, overrides=overrides)


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(__version__)
@click.option("--config", "config_path", type=click.Path(exists=True),
              default=None, help="TOML config file.")
@click.option("--db", default=None, help="Store path (or CM_DB_PATH).")
@click.option("--workdir", default=None, help="Working directory for artifacts.")
@click.option("--provider", default=None,
              help="Provider spec, e.g. mock:script.json (or CM_PROVIDER).")
@click.option("--json", "as_json", is_flag=True, help="Machine-readable output.")
@click.pass_context
def main(ctx: click.Context, config_path: str | None, db: str | None,
         workdir: str | None, provider: str | None, as_json: bool) -> None:
    """Constitutive-model literature mining pipeline."""
    try:
        config = _build_config(config_path, db, workdir, provider)
    except (ValueError, OSError) as exc:
        raise click.ClickException(str(exc))
    ctx.obj = Ctx(config, as_json)


def _open_store(config: PipelineConfig) -> KnowledgeStore:
    try:
        return KnowledgeStore(config.db_path)
    except StoreUnavailable as exc:
        click.echo(f"fatal: {exc}", err=True)
        sys.exit(EXIT_FATAL)


def _provider(config: PipelineConfig, call_log: CallLog):
    import os
    env = dict(os.environ)
    env.update(config.provider_env())
    return provider_from_env(env, call_log=call_log)


def _emit_stage_report(ctx: Ctx, stage: str, processed: int,
                       failures: list[dict], store: KnowledgeStore) -> None:
    payload = {
        "stage": stage,
        "processed": processed,
        "failures": failures,
        "state_counts": store.job_state_counts(),
        "records_stored": store.count_records(),
    }
    if ctx.as_json:
        click.echo(json.dumps(payload, indent=2))
    else:
        click.echo(f"{stage}: processed={processed} "
                   + " ".join(f"{k}={v}" for k, v in sorted(payload["state_counts"].items())))
        for f in failures:
            click.echo(f"  failed {f['doc_id']}: {f['reason']}", err=True)
    sys.exit(EXIT_PARTIAL if failures else EXIT_OK)


@main.command()
@click.argument("corpus_dir", type=click.Path(exists=True, file_okay=False))
@click.pass_obj
def ingest(ctx: Ctx, corpus_dir: str) -> None:
    """Parse every PDF in CORPUS_DIR into a serialized document."""
    store = _open_store(ctx.config)
    failures: list[dict] = []
    try:
        processed, resumed = ingest_stage(corpus_dir, store, ctx.config, failures)
    except EmptyCorpus as exc:
        click.echo(f"fatal: {exc}", err=True)
        sys.exit(EXIT_FATAL)
    _emit_stage_report(ctx, "ingest", processed, failures, store)


@main.command()
@click.argument("corpus_dir", type=click.Path(exists=True, file_okay=False))
@click.pass_obj
def screen(ctx: Ctx, corpus_dir: str) -> None:
    """Gate parsed documents from CORPUS_DIR for relevance."""
    store = _open_store(ctx.config)
    failures: list[dict] = []
    provider = _provider(ctx.config, CallLog())
    processed = screen_stage(store, provider, ctx.config, failures)
    if processed == 0:
        click.echo("nothing to screen (run `ingest` first?)", err=True)
    _emit_stage_report(ctx, "screen", processed, failures, store)


@main.command()
@click.argument("corpus_dir", type=click.Path(exists=True, file_okay=False))
@click.pass_obj
def extract(ctx: Ctx, corpus_dir: str) -> None:
    """Run the analyst over gate-passing documents from CORPUS_DIR."""
    store = _open_store(ctx.config)
    failures: list[dict] = []
    provider = _provider(ctx.config, CallLog())
    processed = extract_stage(store, provider, ctx.config, failures)
    if processed == 0:
        click.echo("nothing to extract (run `screen` first?)", err=True)
    _emit_stage_report(ctx, "extract", processed, failures, store)


@main.command()
@click.argument("corpus_dir", type=click.Path(exists=True, file_okay=False))
@click.pass_obj
def run(ctx: Ctx, corpus_dir: str) -> None:
    """Full pipeline: ingest, screen, extract, store."""
    store = _open_store(ctx.config)
    call_log = CallLog()
    try:
        provider = _provider(ctx.config, call_log)
        report: PipelineReport = run_pipeline(
            corpus_dir, ctx.config, provider=provider, store=store)
    except EmptyCorpus as exc:
        click.echo(f"fatal: {exc}", err=True)
        sys.exit(EXIT_FATAL)
    finally:
        store.close()
    click.echo(report.to_json() if ctx.as_json else report.to_text())
    sys.exit(EXIT_PARTIAL if report.failures else EXIT_OK)


@main.command("eval")
@click.option("--gt", "gt_path", required=True, type=click.Path(exists=True),
              help="Ground truth JSON Lines file.")
@click.option("--db", "db_path", required=True, type=click.Path(exists=True),
              help="Store database or .cmdb.jsonl export.")
@click.option("--out", "out_dir", default="eval_out",
              help="Directory for metrics.json / confusion.json / roc.csv.")
@click.option("--operating-threshold", default=1.0, show_default=True,
              help="Gate score treated as the deployed operating point.")
@click.pass_obj
def eval_cmd(ctx: Ctx, gt_path: str, db_path: str, out_dir: str,
             operating_threshold: float) -> None:
    """Score extractions against expert ground truth."""
    gts = ev.load_ground_truth(gt_path)
    records, verdict_scores = _load_eval_inputs(db_path)
    by_doc: dict[str, list] = {g.doc_id: [] for g in gts}
    ignored = 0
    for record in records:
        if record.doc_id in by_doc:
            by_doc[record.doc_id].append(record)
        else:
            ignored += 1
    outcomes = [ev.match_extractions(by_doc[g.doc_id], g) for g in gts]
    conf = ev.confusion(outcomes, gts)
    report = ev.metrics(conf)

    roc_curve = None
    if verdict_scores:
        positives = {g.doc_id for g in gts if g.gt_models}
        scored = [(score, doc_id in positives)
                  for doc_id, score in verdict_scores.items()]
        try:
            roc_curve = ev.roc(scored, operating_threshold=operating_threshold)
        except ev.DegenerateClasses:
            roc_curve = None

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.json").write_text(
        json.dumps(report.to_dict(), indent=2), encoding="utf-8")
    (out / "confusion.json").write_text(
        json.dumps(conf.to_dict(), indent=2), encoding="utf-8")
    if roc_curve is not None:
        (out / "roc.csv").write_text(ev.roc_points_csv(roc_curve), encoding="utf-8",
                                     newline="\n")

    payload = {
        "confusion": conf.to_dict(),
        "metrics": report.to_dict(),
        "metrics_percent": report.percent_summary(),
        "auc": roc_curve.auc if roc_curve else None,
        "operating_point": roc_curve.operating_point.to_dict() if roc_curve else None,
        "ignored_extractions": ignored,
        "output_dir": str(out),
    }
    if ctx.as_json:
        click.echo(json.dumps(payload, indent=2))
    else:
        click.echo(f"confusion: {conf.to_dict()}")
        click.echo("metrics: " + " ".join(
            f"{k}={v}" for k, v in report.percent_summary().items()))
        if roc_curve is not None:
            click.echo(f"auc: {roc_curve.auc:.4f} operating fpr="
                       f"{roc_curve.operating_point.fpr:.3f} tpr="
                       f"{roc_curve.operating_point.tpr:.3f}")
        if ignored:
            click.echo(f"note: {ignored} extractions for documents outside "
                       "the ground truth were ignored", err=True)
    sys.exit(EXIT_OK)


def _load_eval_inputs(db_path: str):
    """Records + gate scores from a SQLite store or a JSONL export."""
    from .store import load_records_jsonl

    if db_path.endswith(".jsonl"):
        return load_records_jsonl(db_path), {}
    store = KnowledgeStore(db_path)
    try:
        records = [rc.ConstitutiveModelRecord.from_dict(p, p.get("doc_id", ""))
                   for p in store.all_records()]
        scores = {job.doc_id: float(job.verdict["score"])
                  for job in store.list_jobs()
                  if job.verdict is not None and "score" in job.verdict}
        return records, scores
    finally:
        store.close()


@main.command()
@click.option("--material-class", default=None)
@click.option("--mechanism", default=None)
@click.option("--q", default=None, help="Material name substring.")
@click.option("--param", default=None, help="Parameter symbol for range filters.")
@click.option("--min", "param_min", type=float, default=None)
@click.option("--max", "param_max", type=float, default=None)
@click.option("--review-status", default=None)
@click.option("--page", type=int, default=1)
@click.option("--page-size", type=int, default=50)
@click.pass_obj
def query(ctx: Ctx, material_class, mechanism, q, param, param_min, param_max,
          review_status, page, page_size) -> None:
    """Search the store with conjunctive filters."""
    store = _open_store(ctx.config)
    f = QueryFilter(
        material_class=material_class, material_name_substring=q,
        mechanism=mechanism, parameter_symbol=param,
        param_min_si=param_min, param_max_si=param_max,
        review_status=review_status, page=page, page_size=page_size)
    try:
        result = store.query_models(f)
    except BadFilter as exc:
        click.echo(f"bad filter: {exc}", err=True)
        sys.exit(EXIT_FATAL)
    finally:
        store.close()
    if ctx.as_json:
        click.echo(json.dumps(result.records, indent=2, ensure_ascii=False))
    else:
        click.echo(f"{result.total} records (page {result.page})")
        for r in result.records:
            click.echo(f"  [{r['record_id']}] {r['material']['material_name']} "
                       f"{r['mechanism']} {r['review_status']}: {r['equation_latex']}")
    sys.exit(EXIT_OK)


@main.command()
@click.option("--out", "out_path", required=True, type=click.Path(),
              help="Output .cmdb.jsonl file.")
@click.pass_obj
def export(ctx: Ctx, out_path: str) -> None:
    """Export all records as JSON Lines."""
    store = _open_store(ctx.config)
    try:
        count = store.export_jsonl(out_path)
    finally:
        store.close()
    if ctx.as_json:
        click.echo(json.dumps({"exported": count, "path": out_path}))
    else:
        click.echo(f"exported {count} records to {out_path}")
    sys.exit(EXIT_OK)


@main.command()
@click.option("--host", default=None, help="Bind host (overrides CM_LISTEN_ADDR).")
@click.option("--port", type=int, default=None)
@click.pass_obj
def serve(ctx: Ctx, host: str | None, port: int | None) -> None:
    """Serve the HTTP API (and the web app when built)."""
    import uvicorn

    from .api import create_app

    config = ctx.config
    addr_host, _, addr_port = config.listen_addr.partition(":")
    host = host or addr_host or "127.0.0.1"
    port = port or int(addr_port or 8080)
    store = _open_store(config)
    provider = None
    try:
        provider = _provider(config, CallLog())
    except Exception as exc:
        click.echo(f"warning: no provider available ({exc}); uploads will "
                   "queue without processing", err=True)
    app = create_app(store, config, provider=provider)
    uvicorn.run(app, host=host, port=port, log_level="info")


if __name__ == "__main__":
    main()
