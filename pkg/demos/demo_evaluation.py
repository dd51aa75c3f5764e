"""Walkthrough: scoring extractions against expert ground truth.

Builds a tiny annotated corpus in memory, runs the matcher, aggregates the
candidate-level confusion matrix, derives the headline metrics and sweeps
a ROC over gate scores.
"""

from cmdb import evaluation as ev
from cmdb import latex
from cmdb import records as rec


def record(doc_id, eq, material, defs):
    return rec.ConstitutiveModelRecord(
        doc_id=doc_id, equation_latex=eq,
        symbol_map=[rec.SymbolBinding(s, d, "Pa") for s, d in defs.items()],
        material=rec.MaterialMeta(material_name=material, material_class="stone"),
        parameters=[],
        validation=rec.ValidationInfo.from_method("uniaxial compression"),
        mechanism="elasticity", confidence=0.9)


DEFS = {"\\sigma": "stress", "E": "modulus", "\\epsilon": "strain"}
DAMAGE_DEFS = {"D": "damage variable", "\\alpha": "growth rate",
               "\\epsilon": "strain"}

gt = [
    ev.GroundTruthDoc("doc1", [ev.GroundTruthModel(
        latex.normalize_equation(r"\sigma = E \epsilon"), DEFS, "Sandstone")],
        candidate_block_count=3),
    ev.GroundTruthDoc("doc2", [ev.GroundTruthModel(
        latex.normalize_equation(r"D = 1 - \exp ( - \alpha \epsilon )"),
        DAMAGE_DEFS, "Limestone")],
        candidate_block_count=4),
    ev.GroundTruthDoc("doc3", [], candidate_block_count=2),
]

extracted = {
    # doc1: exact match despite formatting differences -> TP
    "doc1": [record("doc1", r"\sigma=E\,\epsilon", "SANDSTONE", DEFS)],
    # doc2: extractor grabbed an intermediate form instead -> FP + FN
    "doc2": [record("doc2", r"D = \alpha \epsilon", "Limestone",
                    {"D": "damage variable", "\\alpha": "growth rate",
                     "\\epsilon": "strain"})],
    "doc3": [],
}

outcomes = [ev.match_extractions(extracted[g.doc_id], g) for g in gt]
for outcome in outcomes:
    print(f"{outcome.doc_id}: tp={outcome.tp} fp={outcome.fp} fn={outcome.fn}")

conf = ev.confusion(outcomes, gt)
print(f"\nconfusion over {sum(g.candidate_block_count for g in gt)} "
      f"candidates: {conf.to_dict()}")

report = ev.metrics(conf)
print("metrics:", report.percent_summary())

print("\npublished-scale sanity check:")
paper = ev.metrics(ev.ConfusionCounts(tp=185, fp=45, fn=37, tn=1311))
print("  (tp=185 fp=45 fn=37 tn=1311) ->", paper.percent_summary())

print("\nROC over gate scores (score = fraction of criteria satisfied):")
scored = [(1.0, True), (1.0, True), (2 / 3, False), (1 / 3, False),
          (0.0, False), (1.0, False), (2 / 3, True)]
curve = ev.roc(scored, operating_threshold=1.0)
for point in curve.points:
    print(f"  threshold={point.threshold:.3f} fpr={point.fpr:.3f} "
          f"tpr={point.tpr:.3f}")
print(f"auc={curve.auc:.3f}  operating point: fpr="
      f"{curve.operating_point.fpr:.3f} tpr={curve.operating_point.tpr:.3f}")
