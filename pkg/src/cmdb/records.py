"""Canonical constitutive-model record: schema, validation, grounding.

The record is a five-part structure per extracted model: the equation in
LaTeX, a symbol-to-meaning map, material metadata, calibrated parameters,
and the experimental validation method. Candidate JSON coming back from a
language model is checked by :func:`validate_record`, which reports every
violation with a JSON path usable in repair prompts, and by
:func:`check_grounding`, which verifies the symbol map covers the
equation's symbol set exactly and injectively.
"""

from __future__ import annotations

import hashlib
import json
import math
import uuid
from dataclasses import dataclass, asdict
from typing import Any

from . import latex
from . import units

SCHEMA_VERSION = "1"

MECHANISM_CLASSES = (
    "elasto_plasticity",
    "failure_damage",
    "rheology_time_dependent",
    "elasticity",
    "viscoelasticity",
    "hyperelasticity",
    "coupled_environmental",
    "other",
)

MATERIAL_CLASSES = (
    "stone",
    "brick",
    "mortar",
    "timber",
    "earthen",
    "clay_suspension",
    "composite_masonry",
    "other",
)

REVIEW_STATUSES = ("unverified", "verified", "rejected", "edited")

RESOLUTION_FLAGS = ("as_printed", "scale_resolved", "ambiguous")


class InvalidRecord(ValueError):
    """Raised when a record fails schema validation."""

    def __init__(self, report: "ValidationReport"):
        self.report = report
        msgs = "; ".join(f"{e.json_path}: {e.message}" for e in report.errors[:5])
        super().__init__(f"invalid record: {msgs}")


@dataclass(frozen=True)
class ValidationIssue:
    json_path: str
    message: str

    def to_dict(self) -> dict[str, str]:
        return {"json_path": self.json_path, "message": self.message}


@dataclass
class ValidationReport:
    valid: bool
    errors: list[ValidationIssue]

    def to_dict(self) -> dict[str, Any]:
        return {"valid": self.valid, "errors": [e.to_dict() for e in self.errors]}


@dataclass
class GroundingReport:
    grounded: bool
    ungrounded_symbols: list[str]
    orphan_bindings: list[str]
    duplicate_definitions: list[str]

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass
class SymbolBinding:
    symbol: str
    definition: str
    unit: str = "dimensionless"


@dataclass
class ParameterEntry:
    symbol: str
    value_raw: float
    unit_raw: str
    value_si: float
    unit_si: str
    scale_notation: str | None = None
    provenance: str = ""
    resolution_flag: str = "as_printed"


@dataclass
class MaterialMeta:
    material_name: str
    material_class: str = "other"
    provenance_note: str = ""
    test_conditions: str = ""


@dataclass
class ValidationInfo:
    method: str = ""
    present: bool = False

    @classmethod
    def from_method(cls, method: str) -> "ValidationInfo":
        return cls(method=method, present=bool(method.strip()))


@dataclass
class ConstitutiveModelRecord:
    doc_id: str
    equation_latex: str
    symbol_map: list[SymbolBinding]
    material: MaterialMeta
    parameters: list[ParameterEntry]
    validation: ValidationInfo
    mechanism: str
    confidence: float
    review_status: str = "unverified"
    record_id: str = ""
    version: int = 1

    def __post_init__(self) -> None:
        if not self.record_id:
            self.record_id = natural_record_id(
                self.doc_id, self.equation_latex, self.material.material_name
            )

    def to_dict(self) -> dict[str, Any]:
        return {
            "record_id": self.record_id,
            "doc_id": self.doc_id,
            "equation_latex": self.equation_latex,
            "symbol_map": [asdict(b) for b in self.symbol_map],
            "material": asdict(self.material),
            "parameters": [asdict(p) for p in self.parameters],
            "validation": asdict(self.validation),
            "mechanism": self.mechanism,
            "confidence": self.confidence,
            "review_status": self.review_status,
            "version": self.version,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict[str, Any], doc_id: str = "") -> "ConstitutiveModelRecord":
        """Build a typed record from candidate JSON, validating first."""
        report = validate_record(d)
        if not report.valid:
            raise InvalidRecord(report)
        return cls._from_valid_dict(d, doc_id)

    @classmethod
    def _from_valid_dict(cls, d: dict[str, Any], doc_id: str = "") -> "ConstitutiveModelRecord":
        return cls(
            doc_id=d.get("doc_id") or doc_id,
            equation_latex=d["equation_latex"],
            symbol_map=[SymbolBinding(**b) for b in d["symbol_map"]],
            material=MaterialMeta(**{
                "material_name": d["material"]["material_name"],
                "material_class": d["material"].get("material_class", "other"),
                "provenance_note": d["material"].get("provenance_note", ""),
                "test_conditions": d["material"].get("test_conditions", ""),
            }),
            parameters=[ParameterEntry(
                symbol=p["symbol"],
                value_raw=float(p["value_raw"]),
                unit_raw=p["unit_raw"],
                value_si=float(p["value_si"]),
                unit_si=p["unit_si"],
                scale_notation=p.get("scale_notation"),
                provenance=p.get("provenance", ""),
                resolution_flag=p.get("resolution_flag", "as_printed"),
            ) for p in d["parameters"]],
            validation=ValidationInfo(
                method=d["validation"].get("method", ""),
                present=bool(d["validation"].get("present", False)),
            ),
            mechanism=d["mechanism"],
            confidence=float(d["confidence"]),
            review_status=d.get("review_status", "unverified"),
            record_id=d.get("record_id", ""),
            version=int(d.get("version", 1)),
        )


def natural_record_id(doc_id: str, equation_latex: str, material_name: str) -> str:
    """Deterministic id over the upsert natural key (doc, canonical
    equation, material); falls back to a random id when the equation
    cannot be canonicalized."""
    try:
        canon = latex.normalize_equation(equation_latex)
    except latex.LatexError:
        return uuid.uuid4().hex[:16]
    key = "\x1f".join([doc_id, canon, material_name.casefold()])
    return hashlib.sha256(key.encode("utf-8")).hexdigest()[:16]


# --------------------------------------------------------------------------
# Schema validation
# --------------------------------------------------------------------------

_TOP_FIELDS = {
    "record_id", "doc_id", "equation_latex", "symbol_map", "material",
    "parameters", "validation", "mechanism", "confidence", "review_status",
    "version",
}
_REQUIRED_FIELDS = (
    "equation_latex", "symbol_map", "material", "parameters", "validation",
    "mechanism", "confidence",
)

_BINDING_FIELDS = {"symbol", "definition", "unit"}
_PARAM_FIELDS = {
    "symbol", "value_raw", "scale_notation", "unit_raw", "value_si",
    "unit_si", "provenance", "resolution_flag",
}
_MATERIAL_FIELDS = {"material_name", "material_class", "provenance_note", "test_conditions"}


def _is_number(v: Any) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _is_str(v: Any) -> bool:
    return isinstance(v, str)


def validate_record(candidate: Any) -> ValidationReport:
    """Validate candidate JSON against the record schema.

    Total: never raises; all failures are reported as
    ``{json_path, message}`` entries. Checks field presence, types, enum
    membership and the cross-field invariants (parameter symbols must
    appear in the symbol map, ambiguous scale resolutions force
    ``review_status == "unverified"``, ...).
    """
    errors: list[ValidationIssue] = []

    def err(path: str, message: str) -> None:
        errors.append(ValidationIssue(path, message))

    if not isinstance(candidate, dict):
        err("$", f"expected a JSON object, got {type(candidate).__name__}")
        return ValidationReport(False, errors)

    for name in _REQUIRED_FIELDS:
        if name not in candidate:
            err(f"$.{name}", "missing required field")
    for name in candidate:
        if name not in _TOP_FIELDS:
            err(f"$.{name}", "unexpected field, not in schema")

    eq = candidate.get("equation_latex")
    if eq is not None:
        if not _is_str(eq) or not eq.strip():
            err("$.equation_latex", "must be a non-empty LaTeX string")
        else:
            try:
                latex.tokenize_equation(eq)
            except latex.UnbalancedBraces as exc:
                err("$.equation_latex", f"unbalanced braces: {exc}")
            except latex.LatexError as exc:
                err("$.equation_latex", f"cannot tokenize: {exc}")

    symbols_in_map: set[str] = set()
    sm = candidate.get("symbol_map")
    if sm is not None:
        if not isinstance(sm, list):
            err("$.symbol_map", "must be an array of symbol bindings")
        else:
            for i, b in enumerate(sm):
                p = f"$.symbol_map[{i}]"
                if not isinstance(b, dict):
                    err(p, "binding must be an object")
                    continue
                for fld in ("symbol", "definition", "unit"):
                    if fld not in b:
                        err(f"{p}.{fld}", "missing required field")
                    elif not _is_str(b[fld]):
                        err(f"{p}.{fld}", "must be a string")
                for fld in b:
                    if fld not in _BINDING_FIELDS:
                        err(f"{p}.{fld}", "unexpected field, not in schema")
                sym = b.get("symbol")
                if _is_str(sym) and sym:
                    if sym in symbols_in_map:
                        err(f"{p}.symbol", f"duplicate symbol {sym!r} in symbol_map")
                    symbols_in_map.add(sym)
                    try:
                        toks = latex.tokenize_equation(sym)
                        if len(toks) != 1 or toks[0].kind != "id":
                            err(f"{p}.symbol",
                                f"{sym!r} is not a single identifier token")
                    except latex.LatexError:
                        err(f"{p}.symbol", f"{sym!r} is not tokenizable")
                elif _is_str(sym):
                    err(f"{p}.symbol", "symbol must be non-empty")
                definition = b.get("definition")
                if _is_str(definition) and not definition.strip():
                    err(f"{p}.definition", "definition must be non-empty")

    mat = candidate.get("material")
    if mat is not None:
        if not isinstance(mat, dict):
            err("$.material", "must be an object")
        else:
            name = mat.get("material_name")
            if name is None:
                err("$.material.material_name", "missing required field")
            elif not _is_str(name) or not name.strip():
                err("$.material.material_name", "must be a non-empty string")
            mclass = mat.get("material_class")
            if mclass is not None and mclass not in MATERIAL_CLASSES:
                err("$.material.material_class",
                    f"{mclass!r} not one of {list(MATERIAL_CLASSES)}")
            for fld in mat:
                if fld not in _MATERIAL_FIELDS:
                    err(f"$.material.{fld}", "unexpected field, not in schema")

    ambiguous_param = False
    params = candidate.get("parameters")
    if params is not None:
        if not isinstance(params, list):
            err("$.parameters", "must be an array of parameter entries")
        else:
            for i, pr in enumerate(params):
                p = f"$.parameters[{i}]"
                if not isinstance(pr, dict):
                    err(p, "parameter must be an object")
                    continue
                sym = pr.get("symbol")
                if sym is None:
                    err(f"{p}.symbol", "missing required field")
                elif not _is_str(sym):
                    err(f"{p}.symbol", "must be a string")
                elif sym not in symbols_in_map:
                    err(f"{p}.symbol",
                        f"parameter symbol {sym!r} not present in symbol_map")
                for fld in ("value_raw", "value_si"):
                    if fld not in pr:
                        err(f"{p}.{fld}", "missing required field")
                    elif not _is_number(pr[fld]):
                        err(f"{p}.{fld}", "must be a finite number")
                for fld in ("unit_raw", "unit_si"):
                    if fld not in pr:
                        err(f"{p}.{fld}", "missing required field")
                    elif not _is_str(pr[fld]):
                        err(f"{p}.{fld}", "must be a string")
                scale = pr.get("scale_notation")
                if scale is not None and not _is_str(scale):
                    err(f"{p}.scale_notation", "must be a string or null")
                flag = pr.get("resolution_flag", "as_printed")
                if flag not in RESOLUTION_FLAGS:
                    err(f"{p}.resolution_flag",
                        f"{flag!r} not one of {list(RESOLUTION_FLAGS)}")
                elif flag == "ambiguous":
                    ambiguous_param = True
                if (
                    scale in (None, "")
                    and _is_number(pr.get("value_raw"))
                    and _is_number(pr.get("value_si"))
                    and _is_str(pr.get("unit_raw"))
                ):
                    try:
                        expected, _ = units.normalize_unit(
                            float(pr["value_raw"]), pr["unit_raw"])
                    except units.UnsupportedUnit:
                        pass
                    else:
                        got = float(pr["value_si"])
                        tol = 1e-9 * max(abs(expected), abs(got), 1e-300)
                        if abs(expected - got) > tol:
                            err(f"{p}.value_si",
                                f"expected SI conversion {expected!r} of value_raw, got {got!r}")
                prov = pr.get("provenance")
                if prov is not None and not _is_str(prov):
                    err(f"{p}.provenance", "must be a string")
                for fld in pr:
                    if fld not in _PARAM_FIELDS:
                        err(f"{p}.{fld}", "unexpected field, not in schema")

    val = candidate.get("validation")
    if val is not None:
        if not isinstance(val, dict):
            err("$.validation", "must be an object")
        else:
            method = val.get("method")
            present = val.get("present")
            if method is None:
                err("$.validation.method", "missing required field")
            elif not _is_str(method):
                err("$.validation.method", "must be a string")
            if present is None:
                err("$.validation.present", "missing required field")
            elif not isinstance(present, bool):
                err("$.validation.present", "must be a boolean")
            if _is_str(method) and isinstance(present, bool):
                if present != bool(method.strip()):
                    err("$.validation.present",
                        "present must equal (method is non-empty)")
            for fld in val:
                if fld not in ("method", "present"):
                    err(f"$.validation.{fld}", "unexpected field, not in schema")

    mech = candidate.get("mechanism")
    if mech is not None and mech not in MECHANISM_CLASSES:
        err("$.mechanism", f"{mech!r} not one of {list(MECHANISM_CLASSES)}")

    conf = candidate.get("confidence")
    if conf is not None:
        if not _is_number(conf):
            err("$.confidence", "must be a number")
        elif not 0.0 <= float(conf) <= 1.0:
            err("$.confidence", f"{conf!r} outside [0, 1]")

    status = candidate.get("review_status", "unverified")
    if status not in REVIEW_STATUSES:
        err("$.review_status", f"{status!r} not one of {list(REVIEW_STATUSES)}")
    elif ambiguous_param and status != "unverified":
        err("$.review_status",
            "records with ambiguous parameters must stay unverified")

    for fld in ("record_id", "doc_id"):
        v = candidate.get(fld)
        if v is not None and not _is_str(v):
            err(f"$.{fld}", "must be a string")

    return ValidationReport(valid=not errors, errors=errors)


# --------------------------------------------------------------------------
# Symbolic grounding
# --------------------------------------------------------------------------

def check_grounding(
    equation_latex: str,
    symbol_map: list[SymbolBinding] | list[dict[str, Any]],
) -> GroundingReport:
    """Verify the symbol map is a total, injective assignment over the
    equation's symbol set.

    ``grounded`` is true iff the map keys equal
    :func:`latex.extract_equation_symbols` exactly and no two symbols
    share a definition (case-folded exact match). Tokenizer errors
    propagate.
    """
    bindings: list[tuple[str, str]] = []
    for b in symbol_map:
        if isinstance(b, SymbolBinding):
            bindings.append((b.symbol, b.definition))
        else:
            bindings.append((str(b.get("symbol", "")), str(b.get("definition", ""))))

    eq_symbols = latex.equation_symbols_ordered(equation_latex)
    eq_set = set(eq_symbols)

    map_symbols: list[str] = []
    for sym, _ in bindings:
        if sym not in map_symbols:
            map_symbols.append(sym)
    map_set = set(map_symbols)

    ungrounded = [s for s in eq_symbols if s not in map_set]
    orphans = [s for s in map_symbols if s not in eq_set]

    by_definition: dict[str, list[str]] = {}
    first_form: dict[str, str] = {}
    for sym, definition in bindings:
        key = definition.casefold().strip()
        first_form.setdefault(key, definition)
        syms = by_definition.setdefault(key, [])
        if sym not in syms:
            syms.append(sym)
    duplicates = [first_form[k] for k, syms in by_definition.items() if len(syms) > 1]

    return GroundingReport(
        grounded=not (ungrounded or orphans or duplicates),
        ungrounded_symbols=ungrounded,
        orphan_bindings=orphans,
        duplicate_definitions=duplicates,
    )


def grounding_errors(report: GroundingReport, base_path: str = "$") -> list[ValidationIssue]:
    """Express a failed grounding report as path-addressed issues for
    repair prompts."""
    issues: list[ValidationIssue] = []
    if report.ungrounded_symbols:
        issues.append(ValidationIssue(
            f"{base_path}.symbol_map",
            "equation symbols missing from symbol_map: "
            + ", ".join(report.ungrounded_symbols)))
    if report.orphan_bindings:
        issues.append(ValidationIssue(
            f"{base_path}.symbol_map",
            "symbol_map entries not present in the equation: "
            + ", ".join(report.orphan_bindings)))
    if report.duplicate_definitions:
        issues.append(ValidationIssue(
            f"{base_path}.symbol_map",
            "multiple symbols share the same definition: "
            + ", ".join(repr(d) for d in report.duplicate_definitions)))
    return issues
