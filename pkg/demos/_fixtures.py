"""Shared fixture helpers for the demo scripts: tiny generated PDFs and a
mock provider script, so every demo runs offline."""

from __future__ import annotations

import json
from pathlib import Path

from reportlab.pdfgen import canvas

from cmdb import ingest


def write_pdf(path: Path, lines: list[str]) -> Path:
    c = canvas.Canvas(str(path), pageCompression=0, invariant=1)
    y = 740
    c.setFont("Helvetica", 10)
    for line in lines:
        if y < 60:
            c.showPage()
            c.setFont("Helvetica", 10)
            y = 740
        c.drawString(54, y, line)
        y -= 14
    c.showPage()
    c.save()
    return path


SANDSTONE_RECORD = {
    "equation_latex": r"\sigma = E \epsilon",
    "symbol_map": [
        {"symbol": r"\sigma", "definition": "axial stress", "unit": "Pa"},
        {"symbol": "E", "definition": "Young's modulus", "unit": "Pa"},
        {"symbol": r"\epsilon", "definition": "axial strain",
         "unit": "dimensionless"},
    ],
    "material": {"material_name": "Ancient Sandstone",
                 "material_class": "stone",
                 "provenance_note": "desert quarry", "test_conditions": ""},
    "parameters": [
        {"symbol": "E", "value_raw": 30.0, "scale_notation": None,
         "unit_raw": "GPa", "value_si": 30.0, "unit_si": "GPa",
         "provenance": "Table 1", "resolution_flag": "as_printed"},
    ],
    "validation": {"method": "uniaxial compression, triplicate",
                   "present": True},
    "mechanism": "elasticity",
    "confidence": 0.92,
}

SANDSTONE_LINES = [
    "Elastic response of ancient sandstone",
    "",
    "We test ancient sandstone cores in uniaxial compression and",
    "calibrate a linear elastic constitutive relation.",
    "",
    "The reference bulk form is",
    r"\[ \sigma = 3 K \epsilon_v \]",
    "while the calibrated model for this stone is",
    r"\[ \sigma = E \epsilon \]",
    "Table 1. E = 30 GPa.",
]

IRRELEVANT_LINES = [
    "Spectral classification of variable stars",
    "",
    "This survey paper has nothing to do with heritage mechanics.",
    r"\[ E = m c ^ 2 \]",
]


def gate_verdict(d: bool, t: bool, e: bool) -> str:
    return json.dumps({"domain_relevance": d, "theoretical_content": t,
                       "experimental_validation": e,
                       "rationale": "scripted demo verdict"})


def build_demo_corpus(root: Path) -> tuple[Path, Path]:
    """Two PDFs (one relevant, one noise) plus a matching mock script.
    Returns (corpus_dir, script_path)."""
    corpus = root / "corpus"
    corpus.mkdir(parents=True, exist_ok=True)
    sandstone = write_pdf(corpus / "sandstone.pdf", SANDSTONE_LINES)
    stars = write_pdf(corpus / "stars.pdf", IRRELEVANT_LINES)
    ids = {path: ingest.load_raw_document(path).doc_id
           for path in (sandstone, stars)}
    script = {
        "gatekeeper": {
            ids[sandstone]: [gate_verdict(True, True, True)],
            ids[stars]: [gate_verdict(False, False, False)],
        },
        "analyst": {
            ids[sandstone]: [json.dumps([SANDSTONE_RECORD])],
        },
    }
    script_path = root / "mock_script.json"
    script_path.write_text(json.dumps(script, indent=1), encoding="utf-8")
    return corpus, script_path
