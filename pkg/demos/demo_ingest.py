"""Walkthrough: PDF -> serialized text stream -> candidates -> head.

Generates a small PDF, parses it with the built-in reader, shows the
normalized stream with its equation-candidate spans, and truncates the
head segment the relevance gate consumes.
"""

import tempfile
from pathlib import Path

from _fixtures import SANDSTONE_LINES, write_pdf

from cmdb import ingest

root = Path(tempfile.mkdtemp(prefix="cmdb_demo_"))
pdf = write_pdf(root / "sandstone.pdf", SANDSTONE_LINES)
print(f"generated {pdf}")

raw = ingest.load_raw_document(pdf)
print(f"doc_id={raw.doc_id} sha256={raw.sha256[:16]}...")

doc = ingest.parse_pdf(raw)
print(f"\nserialized stream ({doc.char_count} chars):")
print("-" * 60)
print(doc.full_text)
print("-" * 60)

print("\nequation candidates (the unit true negatives are counted over):")
for cand in doc.equation_candidates:
    print(f"  {cand.block_id} {cand.kind:22s} span={cand.span} "
          f"{cand.raw_text[:40]!r}")

saved = doc.save(root)
print(f"\npersisted to {saved.name}")

head = ingest.truncate_head(doc, limit_chars=120)
print(f"\nhead segment for the gate (limit 120 chars, "
      f"truncated={head.truncated}):")
print(repr(head.text))

# edge cases fail fast with typed errors
try:
    ingest.parse_pdf(ingest.RawDocument.from_bytes(b"not a pdf"))
except ingest.MalformedPdf as exc:
    print(f"\nmalformed input rejected: {exc}")
