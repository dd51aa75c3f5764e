"""Persistent store for constitutive-model records and extraction jobs.

Backed by an embedded SQLite database (single-node deployment); the
canonical interchange format is JSON Lines of record payloads
(``*.cmdb.jsonl``). Writes are serialized through one lock, reads can come
from any thread. Every mutation of a record bumps its version and keeps
the previous payload in an audit trail, so the current record is always
reconstructable and review actions are safe compare-and-set operations.

Upserts are idempotent on the natural key (doc_id, canonical equation,
material name): re-extracting an unchanged document never duplicates rows.
"""

from __future__ import annotations

import datetime as _dt
import json
import sqlite3
import threading
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Any

from . import records as rec
from .agents import PROMPT_VERSION


class StoreError(RuntimeError):
    pass


class StoreUnavailable(StoreError):
    pass


class NotFound(StoreError):
    pass


class VersionConflict(StoreError):
    pass


class InvalidEdit(StoreError):
    pass


class BadFilter(ValueError):
    pass


class IllegalTransition(StoreError):
    pass


JOB_STATES = (
    "queued", "parsed", "screening", "rejected", "extracting",
    "needs_review", "verified", "failed",
)

# queued->parsed->screening->{rejected|extracting};
# extracting->{needs_review|failed}; needs_review->{verified|rejected}.
# Failure arcs from queued (unparseable PDF) and screening (unusable gate
# verdict) exist so no document is ever silently dropped.
LEGAL_TRANSITIONS: dict[str, set[str]] = {
    "queued": {"parsed", "failed"},
    "parsed": {"screening"},
    "screening": {"rejected", "extracting", "failed"},
    "extracting": {"needs_review", "failed"},
    "needs_review": {"verified", "rejected"},
    "verified": set(),
    "rejected": set(),
    "failed": set(),
}

TERMINAL_STATES = {"rejected", "verified", "failed"}


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="milliseconds")


@dataclass
class ExtractionJob:
    doc_id: str
    sha256: str
    state: str = "queued"
    timestamps: dict[str, str] = field(default_factory=dict)
    error: str | None = None
    source_path: str = ""
    serialized_path: str = ""
    char_count: int = 0
    verdict: dict[str, Any] | None = None
    prompt_version: str = PROMPT_VERSION
    schema_version: str = rec.SCHEMA_VERSION

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass
class QueryFilter:
    material_class: str | None = None
    material_name_substring: str | None = None
    mechanism: str | None = None
    parameter_symbol: str | None = None
    param_min_si: float | None = None
    param_max_si: float | None = None
    review_status: str | None = None
    page: int = 1
    page_size: int = 50

    def validate(self) -> None:
        if (self.param_min_si is not None or self.param_max_si is not None) \
                and not self.parameter_symbol:
            raise BadFilter("parameter bounds require parameter_symbol")
        if not 1 <= self.page_size <= 500:
            raise BadFilter(f"page_size must be in [1, 500], got {self.page_size}")
        if self.page < 1:
            raise BadFilter(f"page must be >= 1, got {self.page}")
        if self.material_class is not None \
                and self.material_class not in rec.MATERIAL_CLASSES:
            raise BadFilter(f"unknown material_class {self.material_class!r}")
        if self.mechanism is not None and self.mechanism not in rec.MECHANISM_CLASSES:
            raise BadFilter(f"unknown mechanism {self.mechanism!r}")
        if self.review_status is not None \
                and self.review_status not in rec.REVIEW_STATUSES:
            raise BadFilter(f"unknown review_status {self.review_status!r}")


@dataclass
class QueryPage:
    records: list[dict[str, Any]]
    total: int
    page: int
    page_size: int

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass
class MechanismHistogram:
    buckets: list[dict[str, Any]]  # {mechanism, count, percentage}
    total: int

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


_SCHEMA_SQL = """
CREATE TABLE IF NOT EXISTS records (
    record_id TEXT PRIMARY KEY,
    doc_id TEXT NOT NULL,
    equation_canonical TEXT NOT NULL,
    material_name TEXT NOT NULL,
    material_name_cf TEXT NOT NULL,
    material_class TEXT NOT NULL,
    mechanism TEXT NOT NULL,
    review_status TEXT NOT NULL,
    version INTEGER NOT NULL,
    payload TEXT NOT NULL,
    created_at TEXT NOT NULL,
    updated_at TEXT NOT NULL
);
CREATE INDEX IF NOT EXISTS idx_records_material ON records(material_class);
CREATE INDEX IF NOT EXISTS idx_records_mechanism ON records(mechanism);
CREATE INDEX IF NOT EXISTS idx_records_order ON records(material_name, record_id);
CREATE TABLE IF NOT EXISTS parameters (
    record_id TEXT NOT NULL,
    symbol TEXT NOT NULL,
    value_si REAL NOT NULL
);
CREATE INDEX IF NOT EXISTS idx_parameters ON parameters(symbol, value_si);
CREATE INDEX IF NOT EXISTS idx_parameters_record ON parameters(record_id, symbol, value_si);
CREATE INDEX IF NOT EXISTS idx_records_doc ON records(doc_id);
CREATE TABLE IF NOT EXISTS record_history (
    record_id TEXT NOT NULL,
    version INTEGER NOT NULL,
    payload TEXT NOT NULL,
    review_status TEXT NOT NULL,
    note TEXT NOT NULL DEFAULT '',
    changed_at TEXT NOT NULL,
    PRIMARY KEY (record_id, version)
);
CREATE TABLE IF NOT EXISTS jobs (
    doc_id TEXT PRIMARY KEY,
    sha256 TEXT NOT NULL,
    state TEXT NOT NULL,
    timestamps TEXT NOT NULL,
    error TEXT,
    source_path TEXT NOT NULL DEFAULT '',
    serialized_path TEXT NOT NULL DEFAULT '',
    char_count INTEGER NOT NULL DEFAULT 0,
    verdict TEXT,
    prompt_version TEXT NOT NULL,
    schema_version TEXT NOT NULL,
    updated_at TEXT NOT NULL
);
"""


class KnowledgeStore:
    """Record + job persistence. Single serialized writer, many readers."""

    def __init__(self, path: str | Path = ":memory:"):
        self.path = str(path)
        try:
            self._conn = sqlite3.connect(self.path, check_same_thread=False)
            self._conn.execute("PRAGMA journal_mode=WAL")
            self._conn.executescript(_SCHEMA_SQL)
            self._conn.commit()
        except sqlite3.Error as exc:
            raise StoreUnavailable(f"cannot open store at {self.path}: {exc}") from exc
        self._lock = threading.RLock()
        self.closed = False

    def close(self) -> None:
        with self._lock:
            self._conn.close()
            self.closed = True

    def _guard(self) -> None:
        if self.closed:
            raise StoreUnavailable("store is closed")

    # -- records ------------------------------------------------------------

    def upsert_record(self, record: rec.ConstitutiveModelRecord | dict[str, Any],
                      note: str = "") -> str:
        """Insert or update by natural key; returns the record_id.

        Identical payloads are a no-op; changed payloads bump the version
        and keep the previous payload in the audit trail.
        """
        self._guard()
        with self._lock:
            try:
                record_id = self._upsert_locked(record, note)
                self._conn.commit()
            except sqlite3.Error as exc:
                raise StoreUnavailable(str(exc)) from exc
        return record_id

    def upsert_many(self, records, note: str = "") -> list[str]:
        """Bulk upsert in one transaction; same semantics as
        :meth:`upsert_record` per element, far fewer commits."""
        self._guard()
        ids = []
        with self._lock:
            try:
                self._conn.execute("BEGIN")
                for record in records:
                    ids.append(self._upsert_locked(record, note))
                self._conn.commit()
            except sqlite3.Error as exc:
                self._conn.rollback()
                raise StoreUnavailable(str(exc)) from exc
            except Exception:
                self._conn.rollback()
                raise
        return ids

    def _upsert_locked(self, record, note: str) -> str:
        if isinstance(record, dict):
            record = rec.ConstitutiveModelRecord.from_dict(
                record, record.get("doc_id", ""))
        else:
            report = rec.validate_record(record.to_dict())
            if not report.valid:
                raise rec.InvalidRecord(report)
        record_id = rec.natural_record_id(
            record.doc_id, record.equation_latex, record.material.material_name)
        record.record_id = record_id
        now = _now()
        row = self._conn.execute(
            "SELECT payload, version, review_status FROM records WHERE record_id=?",
            (record_id,)).fetchone()
        if row is not None:
            old_payload, old_version, old_status = row
            record.version = old_version
            record.review_status = old_status
            if record.to_json() == old_payload:
                return record_id
            record.version = old_version + 1
            self._conn.execute(
                "INSERT OR REPLACE INTO record_history "
                "(record_id, version, payload, review_status, note, changed_at) "
                "VALUES (?,?,?,?,?,?)",
                (record_id, old_version, old_payload, old_status,
                 note or "upsert update", now))
        self._write_record_row(record, now, created=row is None)
        return record_id

    def _write_record_row(self, record: rec.ConstitutiveModelRecord,
                          now: str, created: bool) -> None:
        canonical = _canonical_or_raw(record.equation_latex)
        self._conn.execute(
            "INSERT INTO records (record_id, doc_id, equation_canonical, material_name,"
            " material_name_cf, material_class, mechanism, review_status, version,"
            " payload, created_at, updated_at)"
            " VALUES (?,?,?,?,?,?,?,?,?,?,?,?)"
            " ON CONFLICT(record_id) DO UPDATE SET"
            " doc_id=excluded.doc_id, equation_canonical=excluded.equation_canonical,"
            " material_name=excluded.material_name,"
            " material_name_cf=excluded.material_name_cf,"
            " material_class=excluded.material_class, mechanism=excluded.mechanism,"
            " review_status=excluded.review_status, version=excluded.version,"
            " payload=excluded.payload, updated_at=excluded.updated_at",
            (record.record_id, record.doc_id, canonical,
             record.material.material_name,
             record.material.material_name.casefold(),
             record.material.material_class, record.mechanism,
             record.review_status, record.version, record.to_json(), now, now))
        self._conn.execute("DELETE FROM parameters WHERE record_id=?",
                           (record.record_id,))
        self._conn.executemany(
            "INSERT INTO parameters (record_id, symbol, value_si) VALUES (?,?,?)",
            [(record.record_id, p.symbol, p.value_si) for p in record.parameters])

    def get_record(self, record_id: str) -> dict[str, Any]:
        self._guard()
        row = self._conn.execute(
            "SELECT payload FROM records WHERE record_id=?", (record_id,)).fetchone()
        if row is None:
            raise NotFound(f"record {record_id!r} not found")
        return json.loads(row[0])

    def record_history(self, record_id: str) -> list[dict[str, Any]]:
        """Audit trail, oldest first; entries are full payload snapshots."""
        self._guard()
        rows = self._conn.execute(
            "SELECT version, payload, review_status, note, changed_at"
            " FROM record_history WHERE record_id=? ORDER BY version",
            (record_id,)).fetchall()
        return [{"version": v, "payload": json.loads(p), "review_status": s,
                 "note": n, "changed_at": c} for v, p, s, n, c in rows]

    def records_for_doc(self, doc_id: str) -> list[dict[str, Any]]:
        self._guard()
        rows = self._conn.execute(
            "SELECT payload FROM records WHERE doc_id=?"
            " ORDER BY material_name, record_id", (doc_id,)).fetchall()
        return [json.loads(r[0]) for r in rows]

    def all_records(self) -> list[dict[str, Any]]:
        self._guard()
        rows = self._conn.execute(
            "SELECT payload FROM records ORDER BY material_name, record_id").fetchall()
        return [json.loads(r[0]) for r in rows]

    def count_records(self) -> int:
        self._guard()
        return self._conn.execute("SELECT COUNT(*) FROM records").fetchone()[0]

    # -- queries ------------------------------------------------------------

    def query_models(self, f: QueryFilter) -> QueryPage:
        """Conjunctive filtering with stable (material_name, record_id)
        ordering; parameter ranges evaluate against SI values."""
        self._guard()
        f.validate()
        clauses: list[str] = []
        args: list[Any] = []
        if f.material_class:
            clauses.append("r.material_class = ?")
            args.append(f.material_class)
        if f.material_name_substring:
            clauses.append("r.material_name_cf LIKE ?")
            args.append(f"%{f.material_name_substring.casefold()}%")
        if f.mechanism:
            clauses.append("r.mechanism = ?")
            args.append(f.mechanism)
        if f.review_status:
            clauses.append("r.review_status = ?")
            args.append(f.review_status)
        if f.parameter_symbol:
            sub = "SELECT 1 FROM parameters p WHERE p.record_id = r.record_id AND p.symbol = ?"
            sub_args: list[Any] = [f.parameter_symbol]
            if f.param_min_si is not None:
                sub += " AND p.value_si >= ?"
                sub_args.append(f.param_min_si)
            if f.param_max_si is not None:
                sub += " AND p.value_si <= ?"
                sub_args.append(f.param_max_si)
            clauses.append(f"EXISTS ({sub})")
            args.extend(sub_args)
        where = (" WHERE " + " AND ".join(clauses)) if clauses else ""
        total = self._conn.execute(
            f"SELECT COUNT(*) FROM records r{where}", args).fetchone()[0]
        offset = (f.page - 1) * f.page_size
        rows = self._conn.execute(
            f"SELECT r.payload FROM records r{where}"
            " ORDER BY r.material_name, r.record_id LIMIT ? OFFSET ?",
            args + [f.page_size, offset]).fetchall()
        return QueryPage(records=[json.loads(r[0]) for r in rows],
                         total=total, page=f.page, page_size=f.page_size)

    def mechanism_distribution(self) -> MechanismHistogram:
        """Counts over all non-rejected records; percentages to one
        decimal. Buckets are ordered by count descending, then name."""
        self._guard()
        rows = self._conn.execute(
            "SELECT mechanism, COUNT(*) FROM records"
            " WHERE review_status != 'rejected' GROUP BY mechanism").fetchall()
        total = sum(count for _, count in rows)
        buckets = [
            {"mechanism": mech, "count": count,
             "percentage": round(100.0 * count / total, 1) if total else 0.0}
            for mech, count in sorted(rows, key=lambda r: (-r[1], r[0]))
        ]
        return MechanismHistogram(buckets=buckets, total=total)

    # -- review -------------------------------------------------------------

    def set_review_status(self, record_id: str, action: str,
                          payload: dict[str, Any] | None = None,
                          note: str = "",
                          expected_version: int | None = None) -> dict[str, Any]:
        """verify / reject / edit with optimistic concurrency.

        Edits validate the replacement payload and version the record; the
        previous payload stays in the audit trail.
        """
        self._guard()
        if action not in ("verify", "reject", "edit"):
            raise InvalidEdit(f"unknown review action {action!r}")
        with self._lock:
            row = self._conn.execute(
                "SELECT payload, version, review_status FROM records WHERE record_id=?",
                (record_id,)).fetchone()
            if row is None:
                raise NotFound(f"record {record_id!r} not found")
            old_payload, version, old_status = row
            if expected_version is not None and expected_version != version:
                raise VersionConflict(
                    f"record {record_id} is at version {version}, "
                    f"request expected {expected_version}")
            now = _now()
            if action == "edit":
                if payload is None:
                    raise InvalidEdit("edit requires a payload")
                candidate = dict(payload)
                candidate["record_id"] = record_id
                candidate["version"] = version + 1
                candidate["review_status"] = "edited"
                report = rec.validate_record(candidate)
                if not report.valid:
                    raise InvalidEdit(
                        "edited payload fails validation: "
                        + "; ".join(f"{e.json_path}: {e.message}"
                                    for e in report.errors[:5]))
                old = json.loads(old_payload)
                candidate["doc_id"] = old["doc_id"]
                updated = rec.ConstitutiveModelRecord._from_valid_dict(
                    candidate, old["doc_id"])
                updated.record_id = record_id
                updated.version = version + 1
                updated.review_status = "edited"
            else:
                updated = rec.ConstitutiveModelRecord._from_valid_dict(
                    json.loads(old_payload), "")
                updated.record_id = record_id
                updated.version = version + 1
                updated.review_status = "verified" if action == "verify" else "rejected"
            try:
                self._conn.execute(
                    "INSERT OR REPLACE INTO record_history"
                    " (record_id, version, payload, review_status, note, changed_at)"
                    " VALUES (?,?,?,?,?,?)",
                    (record_id, version, old_payload, old_status, note, now))
                self._write_record_row(updated, now, created=False)
                self._conn.commit()
            except sqlite3.Error as exc:
                raise StoreUnavailable(str(exc)) from exc
            return updated.to_dict()

    # -- jobs ---------------------------------------------------------------

    def put_job(self, job: ExtractionJob) -> None:
        self._guard()
        with self._lock:
            self._conn.execute(
                "INSERT INTO jobs (doc_id, sha256, state, timestamps, error,"
                " source_path, serialized_path, char_count, verdict,"
                " prompt_version, schema_version, updated_at)"
                " VALUES (?,?,?,?,?,?,?,?,?,?,?,?)"
                " ON CONFLICT(doc_id) DO UPDATE SET sha256=excluded.sha256,"
                " state=excluded.state, timestamps=excluded.timestamps,"
                " error=excluded.error, source_path=excluded.source_path,"
                " serialized_path=excluded.serialized_path,"
                " char_count=excluded.char_count, verdict=excluded.verdict,"
                " prompt_version=excluded.prompt_version,"
                " schema_version=excluded.schema_version,"
                " updated_at=excluded.updated_at",
                (job.doc_id, job.sha256, job.state, json.dumps(job.timestamps),
                 job.error, job.source_path, job.serialized_path, job.char_count,
                 json.dumps(job.verdict) if job.verdict is not None else None,
                 job.prompt_version, job.schema_version, _now()))
            self._conn.commit()

    def get_job(self, doc_id: str) -> ExtractionJob:
        self._guard()
        row = self._conn.execute(
            "SELECT doc_id, sha256, state, timestamps, error, source_path,"
            " serialized_path, char_count, verdict, prompt_version, schema_version"
            " FROM jobs WHERE doc_id=?", (doc_id,)).fetchone()
        if row is None:
            raise NotFound(f"job {doc_id!r} not found")
        return ExtractionJob(
            doc_id=row[0], sha256=row[1], state=row[2],
            timestamps=json.loads(row[3]), error=row[4], source_path=row[5],
            serialized_path=row[6], char_count=row[7],
            verdict=json.loads(row[8]) if row[8] else None,
            prompt_version=row[9], schema_version=row[10])

    def transition_job(self, job: ExtractionJob, new_state: str,
                       error: str | None = None) -> ExtractionJob:
        """Atomic, legality-checked state transition."""
        self._guard()
        allowed = LEGAL_TRANSITIONS.get(job.state, set())
        if new_state not in allowed:
            raise IllegalTransition(
                f"{job.doc_id}: cannot go {job.state} -> {new_state}")
        job.state = new_state
        job.timestamps[new_state] = _now()
        if error is not None:
            job.error = error
        self.put_job(job)
        return job

    def list_jobs(self, state: str | None = None) -> list[ExtractionJob]:
        self._guard()
        if state is None:
            rows = self._conn.execute("SELECT doc_id FROM jobs ORDER BY doc_id").fetchall()
        else:
            rows = self._conn.execute(
                "SELECT doc_id FROM jobs WHERE state=? ORDER BY doc_id",
                (state,)).fetchall()
        return [self.get_job(r[0]) for r in rows]

    def find_job_by_sha(self, sha256: str) -> ExtractionJob | None:
        self._guard()
        row = self._conn.execute(
            "SELECT doc_id FROM jobs WHERE sha256=?", (sha256,)).fetchone()
        return self.get_job(row[0]) if row else None

    def job_state_counts(self) -> dict[str, int]:
        self._guard()
        rows = self._conn.execute(
            "SELECT state, COUNT(*) FROM jobs GROUP BY state").fetchall()
        return {state: count for state, count in rows}

    # -- interchange ----------------------------------------------------------

    def export_jsonl(self, path: str | Path) -> int:
        """Write all records as JSON Lines (.cmdb.jsonl); returns count."""
        self._guard()
        payloads = self.all_records()
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for payload in payloads:
                fh.write(json.dumps(payload, ensure_ascii=False, sort_keys=True) + "\n")
        return len(payloads)

    def import_jsonl(self, path: str | Path) -> int:
        """Upsert records from a JSON Lines export; returns count."""
        self._guard()
        records = []
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    payload = json.loads(line)
                    records.append(rec.ConstitutiveModelRecord.from_dict(
                        payload, payload.get("doc_id", "")))
        ids = self.upsert_many(records)
        # keep exported review status/version intact for fresh imports
        with self._lock:
            for record, record_id in zip(records, ids):
                if record.review_status != "unverified":
                    self._conn.execute(
                        "UPDATE records SET review_status=?, version=? WHERE record_id=?",
                        (record.review_status, record.version, record_id))
            self._conn.commit()
        return len(records)


def _canonical_or_raw(equation_latex: str) -> str:
    from . import latex
    try:
        return latex.normalize_equation(equation_latex)
    except latex.LatexError:
        return equation_latex


def load_records_jsonl(path: str | Path) -> list[rec.ConstitutiveModelRecord]:
    """Read a .cmdb.jsonl export into typed records."""
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                payload = json.loads(line)
                out.append(rec.ConstitutiveModelRecord.from_dict(
                    payload, payload.get("doc_id", "")))
    return out
