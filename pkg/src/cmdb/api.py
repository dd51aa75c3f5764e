"""HTTP backend for the review and retrieval platform.

Endpoints:

    POST /documents                     upload a PDF, queue extraction
    GET  /documents/{doc_id}            job state, timestamps, records
    GET  /models                        faceted record search
    POST /extractions/{record_id}/review   verify / reject / edit
    GET  /stats/mechanisms              mechanism histogram
    GET  /health                        liveness + store reachability

Errors use one body shape: ``{"code", "message", "detail?"}`` with a
closed set of codes. Mutating endpoints require a bearer token when
``CM_API_TOKEN`` is configured; reads stay open (single-lab deployment).
Uploaded documents are processed asynchronously; clients poll the job.
If a built web app exists (``web/dist``), it is served at ``/``.
"""

from __future__ import annotations

import threading
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from . import __version__
from . import ingest
from . import records as rec
from .config import PipelineConfig
from .pipeline import enqueue_document, process_document
from .provider import Provider
from .store import (
    BadFilter, InvalidEdit, KnowledgeStore, NotFound, QueryFilter,
    StoreUnavailable, VersionConflict,
)
from .units import PlausibilityTable


class ApiError(Exception):
    """Application error with a stable machine code."""

    CODES = {
        "too_large": 413,
        "not_a_pdf": 422,
        "not_found": 404,
        "bad_filter": 400,
        "invalid_edit": 422,
        "version_conflict": 409,
        "unauthorized": 401,
        "store_unavailable": 503,
        "bad_request": 400,
    }

    def __init__(self, code: str, message: str, detail: Any = None):
        assert code in self.CODES, f"undocumented error code {code}"
        self.code = code
        self.message = message
        self.detail = detail
        super().__init__(message)

    @property
    def http_status(self) -> int:
        return self.CODES[self.code]

    def body(self) -> dict[str, Any]:
        out = {"code": self.code, "message": self.message}
        if self.detail is not None:
            out["detail"] = self.detail
        return out


def _job_view(store: KnowledgeStore, doc_id: str) -> dict[str, Any]:
    job = store.get_job(doc_id)
    records = []
    if job.state in ("needs_review", "verified", "rejected"):
        for payload in store.records_for_doc(doc_id):
            grounding = rec.check_grounding(
                payload["equation_latex"], payload["symbol_map"])
            records.append({**payload, "grounding": grounding.to_dict()})
    return {
        "doc_id": job.doc_id,
        "state": job.state,
        "timestamps": job.timestamps,
        "error": job.error,
        "verdict": job.verdict,
        "records": records,
    }


def create_app(
    store: KnowledgeStore,
    config: PipelineConfig,
    provider: Provider | None = None,
    web_dist: str | Path | None = None,
) -> FastAPI:
    """Build the application around an open store.

    ``provider`` powers background extraction of uploads; without one,
    uploads queue but stay in state ``queued`` until a pipeline run picks
    them up.
    """
    app = FastAPI(title="constitutive model database", version=__version__)
    bands = PlausibilityTable.default()
    executor = ThreadPoolExecutor(max_workers=max(1, config.workers))
    upload_lock = threading.Lock()

    @app.exception_handler(ApiError)
    async def _api_error(_req: Request, exc: ApiError) -> JSONResponse:
        return JSONResponse(status_code=exc.http_status, content=exc.body())

    def _require_token(request: Request) -> None:
        if not config.api_token:
            return
        header = request.headers.get("authorization", "")
        if header != f"Bearer {config.api_token}":
            raise ApiError("unauthorized", "missing or invalid bearer token")

    @app.get("/health")
    def health() -> dict[str, str]:
        try:
            store.count_records()
        except StoreUnavailable as exc:
            raise ApiError("store_unavailable", str(exc))
        return {"status": "ok", "version": __version__}

    @app.post("/documents")
    async def upload_document(request: Request) -> Response:
        _require_token(request)
        form = await request.form()
        upload = form.get("file")
        if upload is None or isinstance(upload, str):
            raise ApiError("bad_request", "multipart field 'file' is required")
        data = await upload.read()
        if len(data) > config.upload_limit_mb * 1024 * 1024:
            raise ApiError(
                "too_large",
                f"upload exceeds {config.upload_limit_mb} MB limit")
        if b"%PDF-" not in data[:1024]:
            raise ApiError("not_a_pdf", "payload does not look like a PDF")
        raw = ingest.RawDocument.from_bytes(
            data, source_path=getattr(upload, "filename", "") or "upload.pdf")
        with upload_lock:
            existing = store.find_job_by_sha(raw.sha256)
            if existing is not None:
                return JSONResponse(
                    status_code=200,
                    content={"doc_id": existing.doc_id,
                             "job_state": existing.state})
            uploads = config.uploads_dir()
            uploads.mkdir(parents=True, exist_ok=True)
            pdf_path = uploads / f"{raw.doc_id}.pdf"
            pdf_path.write_bytes(data)
            raw.source_path = str(pdf_path)
            job = enqueue_document(store, raw)
        if provider is not None:
            executor.submit(process_document, store, provider, config, raw, bands)
        return JSONResponse(status_code=202,
                            content={"doc_id": job.doc_id,
                                     "job_state": job.state})

    @app.get("/documents/{doc_id}")
    def get_document(doc_id: str) -> dict[str, Any]:
        try:
            return _job_view(store, doc_id)
        except NotFound as exc:
            raise ApiError("not_found", str(exc))

    @app.get("/models")
    def get_models(
        material_class: str | None = None,
        mechanism: str | None = None,
        q: str | None = None,
        param: str | None = None,
        min: float | None = None,  # noqa: A002 - query param name is the contract
        max: float | None = None,  # noqa: A002
        review_status: str | None = None,
        page: int = 1,
        page_size: int = 50,
    ) -> dict[str, Any]:
        f = QueryFilter(
            material_class=material_class,
            material_name_substring=q,
            mechanism=mechanism,
            parameter_symbol=param,
            param_min_si=min,
            param_max_si=max,
            review_status=review_status,
            page=page,
            page_size=page_size,
        )
        try:
            return store.query_models(f).to_dict()
        except BadFilter as exc:
            raise ApiError("bad_filter", str(exc))

    @app.post("/extractions/{record_id}/review")
    async def review_record(record_id: str, request: Request) -> dict[str, Any]:
        _require_token(request)
        try:
            body = await request.json()
        except Exception:
            raise ApiError("bad_request", "body must be JSON")
        action = body.get("action")
        if action not in ("verify", "reject", "edit"):
            raise ApiError("bad_request",
                           "action must be one of verify, reject, edit")
        try:
            updated = store.set_review_status(
                record_id,
                action,
                payload=body.get("payload"),
                note=str(body.get("note", "")),
                expected_version=body.get("base_version"),
            )
        except NotFound as exc:
            raise ApiError("not_found", str(exc))
        except VersionConflict as exc:
            raise ApiError("version_conflict", str(exc))
        except InvalidEdit as exc:
            raise ApiError("invalid_edit", str(exc))
        _sync_job_state(store, updated["doc_id"])
        return updated

    @app.get("/stats/mechanisms")
    def stats_mechanisms() -> dict[str, Any]:
        try:
            return store.mechanism_distribution().to_dict()
        except StoreUnavailable as exc:
            raise ApiError("store_unavailable", str(exc))

    dist = Path(web_dist) if web_dist else Path("web/dist")
    if dist.is_dir():
        app.mount("/", StaticFiles(directory=str(dist), html=True), name="webapp")

    app.state.store = store
    app.state.config = config
    return app


def _sync_job_state(store: KnowledgeStore, doc_id: str) -> None:
    """Reviewing records can settle the whole document: all verified ->
    job verified, all rejected -> job rejected."""
    try:
        job = store.get_job(doc_id)
    except NotFound:
        return
    if job.state != "needs_review":
        return
    statuses = {r["review_status"] for r in store.records_for_doc(doc_id)}
    if statuses and statuses <= {"verified"}:
        store.transition_job(job, "verified")
    elif statuses and statuses <= {"rejected"}:
        store.transition_job(job, "rejected")
