"""Store persistence: upsert, queries vs brute-force scan, review audit,
round-trips, histogram, jobs."""

import random

import pytest

from cmdb import records as rec
from cmdb.store import (
    BadFilter, ExtractionJob, IllegalTransition, InvalidEdit, KnowledgeStore,
    NotFound, QueryFilter, VersionConflict,
)

MATERIALS = [
    ("Ancient Sandstone", "stone"), ("Weathered Limestone", "stone"),
    ("Historical Brick", "brick"), ("Roman Brick", "brick"),
    ("Lime Mortar", "mortar"), ("Pozzolanic Mortar", "mortar"),
    ("Oak Timber", "timber"), ("Rammed Earth", "earthen"),
    ("Kaolinite suspension", "clay_suspension"),
    ("Rubble Masonry", "composite_masonry"),
]
MECHANISMS = list(rec.MECHANISM_CLASSES)
PARAM_SYMBOLS = ["E", "c", r"\eta", r"\alpha", "K"]


def synth_record(i: int, rng: random.Random) -> rec.ConstitutiveModelRecord:
    name, mclass = rng.choice(MATERIALS)
    symbol = rng.choice(PARAM_SYMBOLS)
    value_si = 10.0 ** rng.uniform(3, 11)
    status = rng.choice(["unverified", "unverified", "verified", "rejected"])
    return rec.ConstitutiveModelRecord(
        doc_id=f"doc{i:05d}",
        equation_latex=rf"\sigma = {symbol} \epsilon + {i}",
        symbol_map=[
            rec.SymbolBinding(r"\sigma", "stress", "Pa"),
            rec.SymbolBinding(symbol, f"coefficient {symbol}", "Pa"),
            rec.SymbolBinding(r"\epsilon", "strain", "dimensionless"),
        ],
        material=rec.MaterialMeta(material_name=name, material_class=mclass),
        parameters=[rec.ParameterEntry(
            symbol=symbol, value_raw=value_si, unit_raw="Pa",
            value_si=value_si, unit_si="Pa", provenance="synthetic")],
        validation=rec.ValidationInfo.from_method("synthetic test"),
        mechanism=rng.choice(MECHANISMS),
        confidence=round(rng.random(), 3),
        review_status=status,
    )


def brute_force_filter(payloads: list[dict], f: QueryFilter) -> list[dict]:
    """Independent oracle: plain python scan with the documented
    predicate semantics."""
    out = []
    for p in payloads:
        if f.material_class and p["material"]["material_class"] != f.material_class:
            continue
        if f.material_name_substring and \
                f.material_name_substring.casefold() not in \
                p["material"]["material_name"].casefold():
            continue
        if f.mechanism and p["mechanism"] != f.mechanism:
            continue
        if f.review_status and p["review_status"] != f.review_status:
            continue
        if f.parameter_symbol:
            hits = [q for q in p["parameters"] if q["symbol"] == f.parameter_symbol]
            if f.param_min_si is not None:
                hits = [q for q in hits if q["value_si"] >= f.param_min_si]
            if f.param_max_si is not None:
                hits = [q for q in hits if q["value_si"] <= f.param_max_si]
            if not hits:
                continue
        out.append(p)
    out.sort(key=lambda p: (p["material"]["material_name"], p["record_id"]))
    return out


FILTER_MATRIX = [
    QueryFilter(),
    QueryFilter(material_class="stone"),
    QueryFilter(material_class="mortar", mechanism="elasto_plasticity"),
    QueryFilter(material_name_substring="brick"),
    QueryFilter(material_name_substring="MORTAR"),
    QueryFilter(mechanism="rheology_time_dependent"),
    QueryFilter(review_status="verified"),
    QueryFilter(parameter_symbol="E"),
    QueryFilter(parameter_symbol="E", param_min_si=1e9, param_max_si=1e11),
    QueryFilter(parameter_symbol=r"\eta", param_min_si=1e5),
    QueryFilter(parameter_symbol="c", param_max_si=1e6),
    QueryFilter(material_class="stone", parameter_symbol="E",
                param_min_si=1e4, review_status="unverified"),
]


@pytest.fixture(scope="module")
def seeded():
    store = KnowledgeStore(":memory:")
    rng = random.Random(42)
    store.upsert_many(synth_record(i, rng) for i in range(400))
    yield store
    store.close()


class TestUpsert:
    def test_fresh_record_gets_natural_id(self):
        store = KnowledgeStore(":memory:")
        rng = random.Random(0)
        rid = store.upsert_record(synth_record(1, rng))
        assert store.get_record(rid)["record_id"] == rid

    def test_duplicate_upsert_same_id_count_unchanged(self):
        store = KnowledgeStore(":memory:")
        record = synth_record(2, random.Random(0))
        a = store.upsert_record(record)
        b = store.upsert_record(synth_record(2, random.Random(0)))
        assert a == b
        assert store.count_records() == 1

    def test_invalid_record_rejected_store_untouched(self):
        store = KnowledgeStore(":memory:")
        with pytest.raises(rec.InvalidRecord):
            store.upsert_record({"equation_latex": ""})
        assert store.count_records() == 0

    def test_changed_payload_bumps_version_keeps_history(self):
        store = KnowledgeStore(":memory:")
        record = synth_record(3, random.Random(0))
        rid = store.upsert_record(record)
        record.confidence = 0.123
        store.upsert_record(record)
        assert store.get_record(rid)["version"] == 2
        assert len(store.record_history(rid)) == 1

    def test_upsert_never_clobbers_review_decision(self):
        store = KnowledgeStore(":memory:")
        record = synth_record(4, random.Random(0))
        record.review_status = "unverified"
        rid = store.upsert_record(record)
        store.set_review_status(rid, "verify")
        record.confidence = 0.5
        store.upsert_record(record)
        assert store.get_record(rid)["review_status"] == "verified"


class TestQueries:
    def test_query_equals_bruteforce_scan_on_filter_matrix(self, seeded):
        payloads = seeded.all_records()
        for f in FILTER_MATRIX:
            expected = brute_force_filter(payloads, f)
            got: list[dict] = []
            page = 1
            while True:
                chunk = seeded.query_models(QueryFilter(
                    **{**f.__dict__, "page": page, "page_size": 97}))
                got.extend(chunk.records)
                if page * 97 >= chunk.total:
                    break
                page += 1
            assert got == expected, f"filter {f}"

    def test_empty_filter_returns_all_paginated(self, seeded):
        page = seeded.query_models(QueryFilter(page_size=50))
        assert page.total == seeded.count_records()
        assert len(page.records) == 50

    def test_stable_ordering(self, seeded):
        a = seeded.query_models(QueryFilter(page_size=500)).records
        b = seeded.query_models(QueryFilter(page_size=500)).records
        assert a == b
        keys = [(r["material"]["material_name"], r["record_id"]) for r in a]
        assert keys == sorted(keys)

    def test_bad_filters_rejected(self, seeded):
        for bad in (QueryFilter(param_min_si=1.0),
                    QueryFilter(page_size=0),
                    QueryFilter(page_size=501),
                    QueryFilter(page=0),
                    QueryFilter(mechanism="nope"),
                    QueryFilter(material_class="vibranium"),
                    QueryFilter(review_status="meh")):
            with pytest.raises(BadFilter):
                seeded.query_models(bad)


class TestRoundTrip:
    def test_export_import_preserves_query_results(self, seeded, tmp_path):
        path = tmp_path / "dump.cmdb.jsonl"
        n = seeded.export_jsonl(path)
        assert n == seeded.count_records()
        restored = KnowledgeStore(":memory:")
        assert restored.import_jsonl(path) == n
        for f in FILTER_MATRIX:
            assert restored.query_models(f).to_dict() == \
                seeded.query_models(f).to_dict(), f"filter {f}"
        restored.close()


class TestReview:
    def make_store_with_record(self):
        store = KnowledgeStore(":memory:")
        rid = store.upsert_record(synth_record(7, random.Random(7)))
        return store, rid

    def test_verify(self):
        store, rid = self.make_store_with_record()
        updated = store.set_review_status(rid, "verify", note="checked")
        assert updated["review_status"] == "verified"

    def test_edit_versions_and_retains_old(self):
        store, rid = self.make_store_with_record()
        old = store.get_record(rid)
        edited = dict(old)
        edited["parameters"] = [dict(old["parameters"][0],
                                     value_raw=5e9, value_si=5e9)]
        updated = store.set_review_status(rid, "edit", payload=edited,
                                          note="corrected scale")
        assert updated["review_status"] == "edited"
        assert updated["version"] == old["version"] + 1
        trail = store.record_history(rid)
        assert trail[-1]["payload"]["parameters"][0]["value_si"] == \
            old["parameters"][0]["value_si"]

    def test_reject_after_verify_keeps_both_transitions(self):
        store, rid = self.make_store_with_record()
        store.set_review_status(rid, "verify")
        updated = store.set_review_status(rid, "reject", note="on reflection")
        assert updated["review_status"] == "rejected"
        statuses = [h["review_status"] for h in store.record_history(rid)]
        assert statuses == ["unverified", "verified"]

    def test_audit_trail_monotonic_and_reconstructable(self):
        store, rid = self.make_store_with_record()
        lengths = []
        for action in ("verify", "reject"):
            store.set_review_status(rid, action)
            lengths.append(len(store.record_history(rid)))
        assert lengths == sorted(lengths)
        current = store.get_record(rid)
        assert current["version"] == len(store.record_history(rid)) + 1

    def test_invalid_edit_rejected(self):
        store, rid = self.make_store_with_record()
        with pytest.raises(InvalidEdit):
            store.set_review_status(rid, "edit", payload={"equation_latex": ""})

    def test_version_conflict(self):
        store, rid = self.make_store_with_record()
        store.set_review_status(rid, "verify")
        with pytest.raises(VersionConflict):
            store.set_review_status(rid, "reject", expected_version=1)

    def test_not_found(self):
        store = KnowledgeStore(":memory:")
        with pytest.raises(NotFound):
            store.set_review_status("nope", "verify")


class TestHistogram:
    def seed_counts(self, store, counts):
        i = 0
        for mechanism, n in counts.items():
            for _ in range(n):
                record = synth_record(i, random.Random(i))
                record.mechanism = mechanism
                record.review_status = "unverified"
                store.upsert_record(record)
                i += 1

    def test_empty_store(self):
        store = KnowledgeStore(":memory:")
        hist = store.mechanism_distribution()
        assert hist.total == 0 and hist.buckets == []

    def test_single_record_is_100_percent(self):
        store = KnowledgeStore(":memory:")
        self.seed_counts(store, {"elasticity": 1})
        hist = store.mechanism_distribution()
        assert hist.buckets[0]["percentage"] == 100.0

    def test_rejected_records_excluded(self):
        store = KnowledgeStore(":memory:")
        self.seed_counts(store, {"elasticity": 3})
        rid = store.all_records()[0]["record_id"]
        store.set_review_status(rid, "reject")
        assert store.mechanism_distribution().total == 2

    def test_percentages_sum_near_100(self):
        store = KnowledgeStore(":memory:")
        self.seed_counts(store, {"elasticity": 3, "other": 3,
                                 "failure_damage": 1})
        hist = store.mechanism_distribution()
        assert sum(b["percentage"] for b in hist.buckets) == pytest.approx(100, abs=0.1)


class TestJobs:
    def test_legal_lifecycle(self):
        store = KnowledgeStore(":memory:")
        job = ExtractionJob(doc_id="d1", sha256="ff")
        store.put_job(job)
        for state in ("parsed", "screening", "extracting", "needs_review",
                      "verified"):
            job = store.transition_job(job, state)
        assert store.get_job("d1").state == "verified"
        assert set(job.timestamps) >= {"parsed", "screening", "extracting",
                                       "needs_review", "verified"}

    def test_illegal_transition_rejected(self):
        store = KnowledgeStore(":memory:")
        job = ExtractionJob(doc_id="d1", sha256="ff")
        store.put_job(job)
        with pytest.raises(IllegalTransition):
            store.transition_job(job, "extracting")

    def test_find_by_sha(self):
        store = KnowledgeStore(":memory:")
        store.put_job(ExtractionJob(doc_id="d1", sha256="abc"))
        assert store.find_job_by_sha("abc").doc_id == "d1"
        assert store.find_job_by_sha("nope") is None
