"""Walkthrough: the HTTP service end to end.

Starts the API in-process with a mock provider, uploads a PDF, polls the
job, reviews the extracted record, and searches the database — the same
request sequence the web UI issues.
"""

import tempfile
import time
from pathlib import Path

from fastapi.testclient import TestClient

from _fixtures import build_demo_corpus

from cmdb.api import create_app
from cmdb.config import PipelineConfig
from cmdb.provider import MockProvider
from cmdb.store import KnowledgeStore

root = Path(tempfile.mkdtemp(prefix="cmdb_demo_"))
corpus_dir, script_path = build_demo_corpus(root)

config = PipelineConfig(db_path=str(root / "api.sqlite"),
                        workdir=str(root / "api_work"))
store = KnowledgeStore(config.db_path)
app = create_app(store, config, provider=MockProvider.from_file(script_path))
client = TestClient(app)

print("health:", client.get("/health").json())

pdf_bytes = (corpus_dir / "sandstone.pdf").read_bytes()
upload = client.post("/documents", files={
    "file": ("sandstone.pdf", pdf_bytes, "application/pdf")})
doc_id = upload.json()["doc_id"]
print(f"\nupload -> {upload.status_code} {upload.json()}")

while True:
    view = client.get(f"/documents/{doc_id}").json()
    print(f"poll -> state={view['state']}")
    if view["state"] in ("needs_review", "rejected", "failed", "verified"):
        break
    time.sleep(0.05)

record = view["records"][0]
print(f"\nextracted record {record['record_id'][:10]}:")
print(f"  equation: {record['equation_latex']}")
print(f"  grounded: {record['grounding']['grounded']}")
for param in record["parameters"]:
    print(f"  {param['symbol']} = {param['value_si']} {param['unit_si']}")

review = client.post(f"/extractions/{record['record_id']}/review",
                     json={"action": "verify", "note": "demo reviewer",
                           "base_version": record["version"]})
print(f"\nverify -> {review.status_code} "
      f"review_status={review.json()['review_status']}")
print("document settles to:",
      client.get(f"/documents/{doc_id}").json()["state"])

models = client.get("/models", params={"material_class": "stone"}).json()
print(f"\nGET /models?material_class=stone -> total={models['total']}")

print("GET /stats/mechanisms ->", client.get("/stats/mechanisms").json())

dup = client.post("/documents", files={
    "file": ("again.pdf", pdf_bytes, "application/pdf")})
print(f"\nduplicate upload -> {dup.status_code} (same doc_id: "
      f"{dup.json()['doc_id'] == doc_id})")
store.close()
