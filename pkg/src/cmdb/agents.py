"""The two pipeline agents: relevance gate and structured extractor.

The gatekeeper sees only the head segment of a document (the cost model is
a hard contract, enforced by the type it accepts) and must satisfy three
criteria at once; the conjunction is always recomputed locally rather than
trusted from the model. The analyst turns a full serialized document into
schema-valid, symbol-grounded records, with validation errors fed back as
negative constraints for a bounded number of repair rounds.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from typing import Any

from . import records as rec
from . import units
from .ingest import HeadSegment, SerializedDoc
from .provider import (
    ANALYST_TIER,
    GATEKEEPER_TIER,
    Provider,
    ProviderRequest,
)

PROMPT_VERSION = "v1"

# context characters carried around each equation span in the prompt
LOCAL_CONTEXT_CHARS = 1200
MAX_CONTEXT_WINDOWS = 12
DEFAULT_CORRECTION_BUDGET = 3


class UnparseableVerdict(RuntimeError):
    """Gate output stayed unparseable after one repair attempt; the
    document goes to the manual queue instead of being dropped."""


def load_prompt(name: str) -> str:
    path = resources.files("cmdb").joinpath(f"prompts/{name}_{PROMPT_VERSION}.txt")
    return path.read_text("utf-8")


_FENCE_RE = re.compile(r"```(?:json)?\s*(.*?)```", re.S)


def strip_code_fences(text: str) -> str:
    """Models are asked for fenced JSON; tolerate bare JSON too."""
    m = _FENCE_RE.search(text)
    return (m.group(1) if m else text).strip()


@dataclass
class GateVerdict:
    domain_relevance: bool
    theoretical_content: bool
    experimental_validation: bool
    relevant: bool
    rationale: str
    score: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "domain_relevance": self.domain_relevance,
            "theoretical_content": self.theoretical_content,
            "experimental_validation": self.experimental_validation,
            "relevant": self.relevant,
            "rationale": self.rationale,
            "score": self.score,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "GateVerdict":
        return cls(
            domain_relevance=bool(d["domain_relevance"]),
            theoretical_content=bool(d["theoretical_content"]),
            experimental_validation=bool(d["experimental_validation"]),
            relevant=bool(d["relevant"]),
            rationale=str(d.get("rationale", "")),
            score=float(d.get("score", 0.0)),
        )


def _verdict_from_payload(payload: dict[str, Any]) -> GateVerdict:
    criteria = {}
    for key in ("domain_relevance", "theoretical_content", "experimental_validation"):
        value = payload.get(key)
        if not isinstance(value, bool):
            raise ValueError(f"criterion {key!r} missing or not a boolean")
        criteria[key] = value
    relevant = all(criteria.values())  # conjunction computed here, always
    score = payload.get("score")
    if isinstance(score, (int, float)) and 0.0 <= float(score) <= 1.0 \
            and not isinstance(score, bool):
        score = float(score)
    else:
        # criterion fraction: granular enough to sweep a ROC over
        score = sum(criteria.values()) / 3.0
    return GateVerdict(
        domain_relevance=criteria["domain_relevance"],
        theoretical_content=criteria["theoretical_content"],
        experimental_validation=criteria["experimental_validation"],
        relevant=relevant,
        rationale=str(payload.get("rationale", "")),
        score=score,
    )


def gatekeeper_screen(provider: Provider, head: HeadSegment) -> GateVerdict:
    """Screen a head segment against the three inclusion criteria.

    One malformed response earns one repair round; a second failure raises
    :class:`UnparseableVerdict` so the caller can route the document to
    manual review.
    """
    if not head.text.strip():
        raise ValueError("head segment is empty")
    prompt = load_prompt("gatekeeper").replace("{head_text}", head.text)
    last_error = ""
    output: str | None = None
    for attempt in (1, 2):
        if attempt == 1:
            content = prompt
        else:
            content = (
                load_prompt("repair")
                .replace("{previous_output}", output or "")
                .replace("{error_list}", f"$: {last_error}")
            )
        resp = provider.complete(ProviderRequest(
            model_tier=GATEKEEPER_TIER,
            system_prompt="You classify research papers. Answer only with JSON.",
            user_content=content,
            max_output_tokens=512,
            meta={"stage": "gatekeeper", "doc_id": head.doc_id, "attempt": attempt},
        ))
        output = resp.text
        try:
            payload = json.loads(strip_code_fences(output))
            if not isinstance(payload, dict):
                raise ValueError("verdict must be a JSON object")
            return _verdict_from_payload(payload)
        except (json.JSONDecodeError, ValueError) as exc:
            last_error = str(exc)
    raise UnparseableVerdict(
        f"gate verdict unparseable after repair: {last_error}")


# --------------------------------------------------------------------------
# Analyst extraction
# --------------------------------------------------------------------------

@dataclass
class ExtractionResult:
    doc_id: str
    records: list[rec.ConstitutiveModelRecord]
    attempts: int
    correction_trace: list[dict[str, Any]] = field(default_factory=list)
    status: str = "ok"  # ok | failed_schema | provider_error

    def to_dict(self) -> dict[str, Any]:
        return {
            "doc_id": self.doc_id,
            "records": [r.to_dict() for r in self.records],
            "attempts": self.attempts,
            "correction_trace": self.correction_trace,
            "status": self.status,
        }


def record_schema_description() -> str:
    """Literal JSON shape of one record, shown to the analyst model."""
    shape = {
        "equation_latex": "string, LaTeX math",
        "symbol_map": [{"symbol": "string, single LaTeX identifier",
                        "definition": "string, specific physical meaning",
                        "unit": "string or 'dimensionless'"}],
        "material": {"material_name": "string",
                     "material_class": f"one of {list(rec.MATERIAL_CLASSES)}",
                     "provenance_note": "string",
                     "test_conditions": "string"},
        "parameters": [{"symbol": "string, must appear in symbol_map",
                        "value_raw": "number as printed",
                        "scale_notation": "string like 'x10^3' or null",
                        "unit_raw": "string as printed",
                        "value_si": "number (copy value_raw)",
                        "unit_si": "string (copy unit_raw)",
                        "provenance": "string, table/section locator",
                        "resolution_flag": "'as_printed'"}],
        "validation": {"method": "string", "present": "boolean"},
        "mechanism": f"one of {list(rec.MECHANISM_CLASSES)}",
        "confidence": "number in [0,1]",
    }
    return json.dumps(shape, indent=2, ensure_ascii=False)


def _context_windows(doc: SerializedDoc) -> str:
    spans = [c for c in doc.equation_candidates if c.kind == "display_math"]
    if not spans:
        spans = doc.equation_candidates
    windows = []
    half = LOCAL_CONTEXT_CHARS // 2
    for cand in spans[:MAX_CONTEXT_WINDOWS]:
        start, end = cand.span
        lo = max(0, start - half)
        hi = min(doc.char_count, end + half)
        windows.append(f"[{cand.block_id}] ...{doc.full_text[lo:hi]}...")
    return "\n\n".join(windows) if windows else "(no equation candidates found)"


def build_analyst_prompt(doc: SerializedDoc) -> str:
    return (
        load_prompt("analyst")
        .replace("{mechanisms}", ", ".join(rec.MECHANISM_CLASSES))
        .replace("{schema_json}", record_schema_description())
        .replace("{context_windows}", _context_windows(doc))
        .replace("{full_text}", doc.full_text)
    )


def _enrich_parameters(item: dict[str, Any],
                       bands: units.PlausibilityTable) -> None:
    """Deterministic post-processing: SI conversion and scale resolution.

    The model copies printed values; this code owns value_si, unit_si and
    resolution_flag. Unsupported units pass through flagged for review.
    """
    definitions = {}
    if isinstance(item.get("symbol_map"), list):
        for b in item["symbol_map"]:
            if isinstance(b, dict) and isinstance(b.get("symbol"), str):
                definitions[b["symbol"]] = str(b.get("definition", ""))
    if not isinstance(item.get("parameters"), list):
        return
    for p in item["parameters"]:
        if not isinstance(p, dict) or not isinstance(p.get("value_raw"), (int, float)) \
                or isinstance(p.get("value_raw"), bool):
            continue
        value_raw = float(p["value_raw"])
        unit_raw = p.get("unit_raw") if isinstance(p.get("unit_raw"), str) else ""
        scale = p.get("scale_notation")
        if not isinstance(scale, str) or not scale.strip():
            scale = None
            p["scale_notation"] = None
        try:
            base_si, unit_si = units.normalize_unit(value_raw, unit_raw)
        except units.UnsupportedUnit:
            p["value_si"] = value_raw
            p["unit_si"] = unit_raw
            p["resolution_flag"] = "ambiguous"
            continue
        if scale is None:
            p["value_si"] = base_si
            p["unit_si"] = unit_si
            p["resolution_flag"] = "as_printed"
            continue
        definition = definitions.get(p.get("symbol", ""), "")
        kind = bands.match_definition(definition)
        try:
            if kind is None:
                resolved = units.ResolvedValue(
                    base_si * 10.0 ** units.parse_scale_notation(scale),
                    "ambiguous")
            else:
                resolved = bands.resolve(base_si, scale, kind)
        except units.BadScaleNotation:
            p["value_si"] = base_si
            p["unit_si"] = unit_si
            p["resolution_flag"] = "ambiguous"
            continue
        p["value_si"] = resolved.value_si
        p["unit_si"] = unit_si
        p["resolution_flag"] = resolved.resolution_flag


def _parse_and_validate(output: str, doc_id: str,
                        bands: units.PlausibilityTable,
                        ) -> tuple[list[rec.ConstitutiveModelRecord], list[dict[str, str]]]:
    """One verification pass: parse, enrich, schema-validate, ground."""
    errors: list[dict[str, str]] = []
    try:
        payload = json.loads(strip_code_fences(output))
    except json.JSONDecodeError as exc:
        return [], [{"json_path": "$", "message": f"invalid JSON: {exc}"}]
    if isinstance(payload, dict) and isinstance(payload.get("records"), list):
        payload = payload["records"]
    if not isinstance(payload, list):
        return [], [{"json_path": "$",
                     "message": "output must be a JSON array of records"}]
    built: list[rec.ConstitutiveModelRecord] = []
    for i, item in enumerate(payload):
        prefix = f"$[{i}]"
        if not isinstance(item, dict):
            errors.append({"json_path": prefix, "message": "record must be an object"})
            continue
        _enrich_parameters(item, bands)
        report = rec.validate_record(item)
        if not report.valid:
            for issue in report.errors:
                errors.append({"json_path": prefix + issue.json_path[1:],
                               "message": issue.message})
            continue
        grounding = rec.check_grounding(item["equation_latex"], item["symbol_map"])
        if not grounding.grounded:
            for issue in rec.grounding_errors(grounding, prefix):
                errors.append({"json_path": issue.json_path,
                               "message": issue.message})
            continue
        built.append(rec.ConstitutiveModelRecord._from_valid_dict(item, doc_id))
    return built, errors


def self_correct_loop(
    provider: Provider,
    doc: SerializedDoc,
    first_output: str,
    budget: int = DEFAULT_CORRECTION_BUDGET,
    bands: units.PlausibilityTable | None = None,
) -> ExtractionResult:
    """Closed-loop verification: validate, feed violations back, retry.

    Terminates on the first fully valid output or when the attempt budget
    is exhausted (``attempts <= budget`` always; on success the trace has
    ``attempts - 1`` entries, on failure ``budget`` entries).
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    bands = bands or units.PlausibilityTable.default()
    output = first_output
    trace: list[dict[str, Any]] = []
    attempts = 1
    while True:
        built, errors = _parse_and_validate(output, doc.doc_id, bands)
        if not errors:
            return ExtractionResult(doc_id=doc.doc_id, records=built,
                                    attempts=attempts,
                                    correction_trace=trace, status="ok")
        trace.append({"attempt": attempts, "errors": errors})
        if attempts >= budget:
            return ExtractionResult(doc_id=doc.doc_id, records=[],
                                    attempts=attempts,
                                    correction_trace=trace,
                                    status="failed_schema")
        error_list = "\n".join(f"{e['json_path']}: {e['message']}" for e in errors)
        repair = (
            load_prompt("repair")
            .replace("{previous_output}", output)
            .replace("{error_list}", error_list)
        )
        attempts += 1
        resp = provider.complete(ProviderRequest(
            model_tier=ANALYST_TIER,
            system_prompt="You extract structured data. Answer only with JSON.",
            user_content=repair,
            meta={"stage": "analyst", "doc_id": doc.doc_id, "attempt": attempts},
        ))
        output = resp.text


def analyst_extract(
    provider: Provider,
    doc: SerializedDoc,
    budget: int = DEFAULT_CORRECTION_BUDGET,
    bands: units.PlausibilityTable | None = None,
) -> ExtractionResult:
    """Full-document structured extraction with self-correction.

    On ``status == "ok"`` every returned record is schema-valid and
    grounded; an empty record list is a valid outcome for documents the
    gate let through by mistake.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    from .provider import ContextOverflow, ProviderUnavailable

    try:
        resp = provider.complete(ProviderRequest(
            model_tier=ANALYST_TIER,
            system_prompt="You extract structured data. Answer only with JSON.",
            user_content=build_analyst_prompt(doc),
            max_output_tokens=8192,
            meta={"stage": "analyst", "doc_id": doc.doc_id, "attempt": 1},
        ))
        return self_correct_loop(provider, doc, resp.text, budget, bands)
    except (ProviderUnavailable, ContextOverflow) as exc:
        return ExtractionResult(
            doc_id=doc.doc_id, records=[], attempts=1,
            correction_trace=[{"attempt": 1, "errors": [
                {"json_path": "$", "message": f"provider error: {exc}"}]}],
            status="provider_error")
