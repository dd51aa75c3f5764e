"""Document ingestion: PDF to serialized text stream.

A parsed document becomes a normalized Unicode stream (horizontal
whitespace collapsed, page breaks marked with ``\\n\\f\\n``) plus an
ordered list of equation-candidate spans. Candidate spans are what the
evaluation layer later counts true negatives over, so segmentation must be
deterministic: the same bytes always produce the same block list.

Head truncation feeds the cheap relevance gate: only the first
``limit_chars`` characters (default 8000), cut back to a whitespace
boundary so LaTeX tokens never split.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from . import pdfreader
from .pdfreader import EncryptedPdf, MalformedPdf, NoTextLayer, PdfError

__all__ = [
    "RawDocument", "SerializedDoc", "CandidateBlock", "HeadSegment",
    "parse_pdf", "truncate_head", "segment_equation_candidates",
    "load_raw_document", "EncryptedPdf", "MalformedPdf", "NoTextLayer",
    "PdfError", "DEFAULT_HEAD_CHARS", "PAGE_BREAK",
]

DEFAULT_HEAD_CHARS = 8000
PAGE_BREAK = "\n\f\n"


@dataclass
class RawDocument:
    doc_id: str
    source_path: str
    bytes: bytes
    sha256: str

    @classmethod
    def from_bytes(cls, data: bytes, source_path: str = "") -> "RawDocument":
        digest = hashlib.sha256(data).hexdigest()
        return cls(doc_id=doc_id_for(digest), source_path=source_path,
                   bytes=data, sha256=digest)


def doc_id_for(sha256_hex: str) -> str:
    return "d" + sha256_hex[:15]


def load_raw_document(path: str | Path) -> RawDocument:
    path = Path(path)
    return RawDocument.from_bytes(path.read_bytes(), source_path=str(path))


@dataclass
class CandidateBlock:
    block_id: str
    span: tuple[int, int]  # [start, end)
    raw_text: str
    kind: str  # display_math | inline_math_cluster | table_region

    def to_dict(self) -> dict:
        return {"block_id": self.block_id, "span": list(self.span),
                "raw_text": self.raw_text, "kind": self.kind}


@dataclass
class SerializedDoc:
    doc_id: str
    full_text: str
    char_count: int
    equation_candidates: list[CandidateBlock] = field(default_factory=list)
    parse_warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "full_text": self.full_text,
            "char_count": self.char_count,
            "equation_candidates": [c.to_dict() for c in self.equation_candidates],
            "parse_warnings": list(self.parse_warnings),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False)

    @classmethod
    def from_dict(cls, d: dict) -> "SerializedDoc":
        return cls(
            doc_id=d["doc_id"],
            full_text=d["full_text"],
            char_count=int(d["char_count"]),
            equation_candidates=[
                CandidateBlock(
                    block_id=c["block_id"],
                    span=(int(c["span"][0]), int(c["span"][1])),
                    raw_text=c["raw_text"],
                    kind=c["kind"],
                ) for c in d["equation_candidates"]
            ],
            parse_warnings=list(d.get("parse_warnings", [])),
        )

    def save(self, directory: str | Path) -> Path:
        """Persist as ``<doc_id>.serialized.json`` under ``directory``."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        out = directory / f"{self.doc_id}.serialized.json"
        out.write_text(self.to_json(), encoding="utf-8")
        return out

    @classmethod
    def load(cls, path: str | Path) -> "SerializedDoc":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass
class HeadSegment:
    doc_id: str
    text: str
    limit_chars: int
    truncated: bool


_HWS_RE = re.compile(r"[ \t]+")


def _normalize_text(page_texts: list[str]) -> str:
    """Collapse horizontal whitespace runs, strip line edges, join pages
    with the page-break marker."""
    cleaned_pages = []
    for page in page_texts:
        lines = [_HWS_RE.sub(" ", ln).strip() for ln in page.split("\n")]
        cleaned_pages.append("\n".join(ln for ln in lines if ln))
    return PAGE_BREAK.join(cleaned_pages).strip("\n")


def parse_pdf(raw: RawDocument) -> SerializedDoc:
    """Serialize a PDF into a machine-readable text stream.

    Inline math survives as its raw character sequence; every recoverable
    problem lands in ``parse_warnings`` instead of being silently dropped.
    Raises :class:`EncryptedPdf`, :class:`NoTextLayer` or
    :class:`MalformedPdf` for unusable inputs.
    """
    extracted = pdfreader.extract_text(raw.bytes)
    full_text = _normalize_text([p.text for p in extracted.pages])
    doc = SerializedDoc(
        doc_id=raw.doc_id,
        full_text=full_text,
        char_count=len(full_text),
        parse_warnings=list(extracted.warnings),
    )
    doc.equation_candidates = segment_equation_candidates(doc)
    return doc


def truncate_head(doc: SerializedDoc, limit_chars: int = DEFAULT_HEAD_CHARS) -> HeadSegment:
    """Longest prefix within ``limit_chars`` ending at a whitespace
    boundary (whole text if it already fits).

    Characters are Unicode scalar values, not bytes.
    """
    if limit_chars <= 0:
        raise ValueError(f"limit_chars must be positive, got {limit_chars}")
    text = doc.full_text
    if len(text) <= limit_chars:
        return HeadSegment(doc_id=doc.doc_id, text=text,
                           limit_chars=limit_chars, truncated=False)
    cut = limit_chars
    while cut > 0 and not text[cut - 1].isspace():
        cut -= 1
    head = text[:cut].rstrip() if cut > 0 else text[:limit_chars]
    return HeadSegment(doc_id=doc.doc_id, text=head,
                       limit_chars=limit_chars, truncated=True)


# --------------------------------------------------------------------------
# Equation candidate segmentation
# --------------------------------------------------------------------------

_DISPLAY_ENVS = "equation|align|gather|multline|eqnarray|displaymath"

_DISPLAY_PATTERNS = [
    re.compile(r"\\\[(.+?)\\\]", re.S),
    re.compile(r"\$\$(.+?)\$\$", re.S),
    re.compile(
        r"\\begin\{(?:%s)\*?\}.*?\\end\{(?:%s)\*?\}" % (_DISPLAY_ENVS, _DISPLAY_ENVS),
        re.S),
]

_TABULAR_RE = re.compile(r"\\begin\{tabular\}.*?\\end\{tabular\}", re.S)

_INLINE_DOLLAR_RE = re.compile(r"(?<!\$)\$(?!\$)([^$\n]+)\$(?!\$)")

_GREEK_CHARS = "αβγδεζηθικλμνξοπρςστυφχψωΑΒΓΔΕΖΗΘΙΚΛΜΝΞΟΠΡΣΤΥΦΧΨΩ"
_GREEK_RE = re.compile("[%s]" % _GREEK_CHARS)
_MATH_MARK_RE = re.compile(r"[=<>≈∝%s]|\\[a-zA-Z]+|[_^]" % _GREEK_CHARS)
_PURE_OPERATOR_RE = re.compile(r"^[=+\-*/<>():,.^_{}\[\]|]+$")
_SUBSCRIPTED_RE = re.compile(r"^[A-Za-z][_^]\S*$")

_NUMERIC_TOKEN_RE = re.compile(r"^[+-]?\d+(?:\.\d+)?(?:[eE][+-]?\d+)?$")


def _math_compatible(tok: str) -> bool:
    """Can this whitespace-separated token be part of an inline math run?
    Plain prose words cannot; single letters, numbers, operators, Greek,
    LaTeX commands and subscripted identifiers can."""
    if len(tok) == 1 and (tok.isalpha() or not tok.isalnum()):
        return True
    return bool(
        _GREEK_RE.search(tok)
        or _NUMERIC_TOKEN_RE.match(tok)
        or tok.startswith("\\")
        or _SUBSCRIPTED_RE.match(tok)
        or _PURE_OPERATOR_RE.match(tok)
    )


def _overlaps(span: tuple[int, int], taken: list[tuple[int, int]]) -> bool:
    s, e = span
    return any(s < te and ts < e for ts, te in taken)


def _find_display_spans(text: str, warnings: list[str]) -> list[tuple[int, int]]:
    spans: list[tuple[int, int]] = []
    for rx in _DISPLAY_PATTERNS:
        for m in rx.finditer(text):
            if not _overlaps(m.span(), spans):
                spans.append(m.span())
    # unbalanced opening delimiters are recorded, never silently eaten
    claimed = sorted(spans)
    for opener, closer in ((r"\\\[", r"\\\]"), (r"\\begin\{(?:%s)\*?\}" % _DISPLAY_ENVS,
                                                r"\\end\{(?:%s)\*?\}" % _DISPLAY_ENVS)):
        for m in re.finditer(opener, text):
            if not _overlaps((m.start(), m.end()), claimed):
                warnings.append(
                    f"UnbalancedDelimiters: display-math opener at char {m.start()} "
                    "has no matching closer; block skipped")
    return spans


def _find_table_spans(text: str, taken: list[tuple[int, int]]) -> list[tuple[int, int]]:
    spans = []
    for m in _TABULAR_RE.finditer(text):
        if not _overlaps(m.span(), taken):
            spans.append(m.span())
    # aligned numeric columns: runs of >=2 lines that are mostly numbers
    line_start = 0
    run_start = None
    run_lines = 0
    for line in text.split("\n"):
        end = line_start + len(line)
        tokens = line.split()
        numeric = sum(1 for t in tokens if _NUMERIC_TOKEN_RE.match(t))
        is_tably = len(tokens) >= 3 and numeric >= 2 and numeric >= len(tokens) - 1
        if is_tably and not _overlaps((line_start, end), taken):
            if run_start is None:
                run_start = line_start
            run_lines += 1
        else:
            if run_start is not None and run_lines >= 2:
                spans.append((run_start, line_start - 1))
            run_start, run_lines = None, 0
        line_start = end + 1
    if run_start is not None and run_lines >= 2:
        spans.append((run_start, min(line_start - 1, len(text))))
    return spans


def _find_inline_spans(text: str, taken: list[tuple[int, int]],
                       warnings: list[str]) -> list[tuple[int, int]]:
    spans = []
    for m in _INLINE_DOLLAR_RE.finditer(text):
        if not _overlaps(m.span(), taken):
            spans.append(m.span())
    stray = [m.start() for m in re.finditer(r"(?<!\$)\$(?!\$)", text)
             if not _overlaps((m.start(), m.start() + 1), taken + spans)]
    if stray:
        warnings.append(
            f"UnbalancedDelimiters: {len(stray)} stray '$' without a pair; skipped")

    # bare math clusters: runs of math-compatible tokens containing a marker
    for line_m in re.finditer(r"[^\n]+", text):
        line, base = line_m.group(), line_m.start()
        tokens = [(m.start() + base, m.end() + base, m.group())
                  for m in re.finditer(r"\S+", line)]
        run: list[tuple[int, int, str]] = []

        def flush(run):
            if len(run) >= 2 and any(_MATH_MARK_RE.search(t) for _, _, t in run):
                span = (run[0][0], run[-1][1])
                if not _overlaps(span, taken + spans):
                    spans.append(span)

        for tok in tokens:
            if _math_compatible(tok[2]) and len(tok[2]) <= 40:
                run.append(tok)
            else:
                flush(run)
                run = []
        flush(run)
    return spans


def segment_equation_candidates(doc: SerializedDoc) -> list[CandidateBlock]:
    """Candidate blocks in document order: display-math first (one block
    per delimiter pair or environment), then table regions, then inline
    math clusters. Deterministic; spans never overlap."""
    text = doc.full_text
    warnings = doc.parse_warnings
    display = _find_display_spans(text, warnings)
    tables = _find_table_spans(text, sorted(display))
    taken = sorted(display + tables)
    inline = _find_inline_spans(text, taken, warnings)

    blocks = (
        [(s, "display_math") for s in display]
        + [(s, "table_region") for s in tables]
        + [(s, "inline_math_cluster") for s in inline]
    )
    blocks.sort(key=lambda b: b[0])
    return [
        CandidateBlock(
            block_id=f"{doc.doc_id}.b{i:03d}",
            span=span,
            raw_text=text[span[0]: span[1]],
            kind=kind,
        )
        for i, (span, kind) in enumerate(blocks)
    ]

