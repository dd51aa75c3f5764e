"""Scoring extracted records against expert ground truth.

Matching is per document and deliberately strict: an extraction matches an
annotated model only when the canonical equation strings are equal, the
material names agree (case-folded), and the symbol definitions agree on
every shared symbol. Matching is greedy one-to-one in document order,
which keeps outcomes deterministic; ambiguity is rare because equations
rarely collide inside one document.

True negatives follow the candidate-block convention: every evaluable
candidate block that is neither a matched model nor an error counts as a
correctly rejected non-model, so ``tn = total candidates - tp - fp - fn``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from typing import Any, Iterable, Sequence

import numpy as np

from . import latex
from .records import ConstitutiveModelRecord


class MismatchedDocSets(ValueError):
    """Outcome and ground-truth document sets disagree."""


class DegenerateClasses(ValueError):
    """ROC needs at least one positive and one negative."""


@dataclass
class GroundTruthModel:
    equation_canonical: str
    symbol_map: dict[str, str]  # symbol -> definition
    material_name: str
    mechanism: str = "other"

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass
class GroundTruthDoc:
    doc_id: str
    gt_models: list[GroundTruthModel]
    candidate_block_count: int

    def __post_init__(self) -> None:
        if len(self.gt_models) > self.candidate_block_count:
            raise ValueError(
                f"{self.doc_id}: {len(self.gt_models)} annotated models exceed "
                f"{self.candidate_block_count} candidate blocks")

    def to_dict(self) -> dict[str, Any]:
        return {
            "doc_id": self.doc_id,
            "gt_models": [m.to_dict() for m in self.gt_models],
            "candidate_block_count": self.candidate_block_count,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "GroundTruthDoc":
        return cls(
            doc_id=d["doc_id"],
            gt_models=[GroundTruthModel(
                equation_canonical=m["equation_canonical"],
                symbol_map=dict(m["symbol_map"]),
                material_name=m["material_name"],
                mechanism=m.get("mechanism", "other"),
            ) for m in d["gt_models"]],
            candidate_block_count=int(d["candidate_block_count"]),
        )


def load_ground_truth(path) -> list[GroundTruthDoc]:
    """Read a JSON Lines ground-truth file (one document per line)."""
    docs = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                docs.append(GroundTruthDoc.from_dict(json.loads(line)))
    return docs


def save_ground_truth(docs: Iterable[GroundTruthDoc], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for doc in docs:
            fh.write(json.dumps(doc.to_dict(), ensure_ascii=False) + "\n")


@dataclass
class MatchOutcome:
    doc_id: str
    matched: list[tuple[str, int]] = field(default_factory=list)  # (record_id, gt index)
    false_positives: list[str] = field(default_factory=list)      # record_ids
    false_negatives: list[int] = field(default_factory=list)      # gt indices

    @property
    def tp(self) -> int:
        return len(self.matched)

    @property
    def fp(self) -> int:
        return len(self.false_positives)

    @property
    def fn(self) -> int:
        return len(self.false_negatives)


def _definitions_agree(
    extracted: dict[str, str], annotated: dict[str, str]
) -> bool:
    shared = set(extracted) & set(annotated)
    return all(
        extracted[s].casefold().strip() == annotated[s].casefold().strip()
        for s in shared
    )


def match_extractions(
    extracted: Sequence[ConstitutiveModelRecord], gt: GroundTruthDoc
) -> MatchOutcome:
    """Greedy one-to-one matching of extracted records to annotated models.

    A pair matches iff the extraction's canonical equation equals the
    annotation's, material names are equal case-folded, and symbol
    definitions agree on all shared symbols. Extractions whose equations
    fail to tokenize count as false positives.
    """
    outcome = MatchOutcome(doc_id=gt.doc_id)
    unmatched_gt = list(range(len(gt.gt_models)))
    for rec in extracted:
        try:
            canon = latex.normalize_equation(rec.equation_latex)
        except latex.LatexError:
            outcome.false_positives.append(rec.record_id)
            continue
        defs = {b.symbol: b.definition for b in rec.symbol_map}
        hit = None
        for gi in unmatched_gt:
            model = gt.gt_models[gi]
            if (
                canon == model.equation_canonical
                and rec.material.material_name.casefold().strip()
                == model.material_name.casefold().strip()
                and _definitions_agree(defs, model.symbol_map)
            ):
                hit = gi
                break
        if hit is None:
            outcome.false_positives.append(rec.record_id)
        else:
            unmatched_gt.remove(hit)
            outcome.matched.append((rec.record_id, hit))
    outcome.false_negatives = unmatched_gt
    return outcome


@dataclass
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self) -> None:
        for name in ("tp", "fp", "fn", "tn"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    def to_dict(self) -> dict[str, int]:
        return asdict(self)

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def confusion(
    outcomes: Sequence[MatchOutcome], gts: Sequence[GroundTruthDoc]
) -> ConfusionCounts:
    """Aggregate per-document outcomes into candidate-level counts.

    Requires exactly one outcome per ground-truth document. TN is the
    candidate total minus tp, fp and fn.
    """
    if {o.doc_id for o in outcomes} != {g.doc_id for g in gts} or len(outcomes) != len(gts):
        raise MismatchedDocSets(
            f"outcomes cover {sorted(o.doc_id for o in outcomes)}, "
            f"ground truth covers {sorted(g.doc_id for g in gts)}")
    tp = sum(o.tp for o in outcomes)
    fp = sum(o.fp for o in outcomes)
    fn = sum(o.fn for o in outcomes)
    candidates = sum(g.candidate_block_count for g in gts)
    tn = candidates - tp - fp - fn
    if tn < 0:
        raise ValueError(
            f"candidate total {candidates} smaller than tp+fp+fn={tp + fp + fn}")
    return ConfusionCounts(tp=tp, fp=fp, fn=fn, tn=tn)


@dataclass
class MetricsReport:
    precision: float
    recall: float
    f1: float
    fpr: float
    accuracy: float

    def to_dict(self) -> dict[str, float]:
        return asdict(self)

    def percent_summary(self) -> dict[str, str]:
        """Display values rounded to one decimal percent (the unrounded
        reals stay on the dataclass)."""
        return {k: f"{v * 100:.1f}%" for k, v in self.to_dict().items()}


def _ratio(num: float, den: float) -> float:
    return num / den if den else 0.0


def metrics(c: ConfusionCounts) -> MetricsReport:
    """Precision, recall, F1, FPR and accuracy with zero denominators
    defined as 0 so empty runs still produce valid reports."""
    precision = _ratio(c.tp, c.tp + c.fp)
    recall = _ratio(c.tp, c.tp + c.fn)
    f1 = _ratio(2 * precision * recall, precision + recall)
    fpr = _ratio(c.fp, c.fp + c.tn)
    accuracy = _ratio(c.tp + c.tn, c.total)
    return MetricsReport(precision=precision, recall=recall, f1=f1,
                         fpr=fpr, accuracy=accuracy)


@dataclass
class RocPoint:
    threshold: float
    fpr: float
    tpr: float

    def to_dict(self) -> dict[str, float]:
        return asdict(self)


@dataclass
class RocCurve:
    points: list[RocPoint]
    auc: float
    operating_point: RocPoint

    def to_dict(self) -> dict[str, Any]:
        return {
            "points": [p.to_dict() for p in self.points],
            "auc": self.auc,
            "operating_point": self.operating_point.to_dict(),
        }


def roc(
    scored: Sequence[tuple[float, bool]], operating_threshold: float = 1.0
) -> RocCurve:
    """ROC curve over (score, is_positive) pairs.

    Thresholds sweep the distinct scores descending, ties grouped into a
    single step; a prediction is positive when score >= threshold. AUC is
    the trapezoidal area with (0,0) and (1,1) anchors, which equals the
    pairwise-comparison statistic.
    """
    scores = np.asarray([s for s, _ in scored], dtype=float)
    labels = np.asarray([bool(p) for _, p in scored], dtype=bool)
    if scores.size == 0 or not np.all(np.isfinite(scores)):
        raise ValueError("scores must be a non-empty finite list")
    n_pos = int(labels.sum())
    n_neg = int(labels.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise DegenerateClasses(
            f"need both classes, got {n_pos} positives / {n_neg} negatives")

    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_labels = labels[order]
    cum_tp = np.cumsum(sorted_labels)
    cum_fp = np.cumsum(~sorted_labels)
    # last index of each tie group marks the sweep step for that threshold
    distinct_mask = np.r_[sorted_scores[1:] != sorted_scores[:-1], True]
    points = [
        RocPoint(
            threshold=float(sorted_scores[i]),
            fpr=float(cum_fp[i]) / n_neg,
            tpr=float(cum_tp[i]) / n_pos,
        )
        for i in np.flatnonzero(distinct_mask)
    ]

    xs = [0.0] + [p.fpr for p in points] + [1.0]
    ys = [0.0] + [p.tpr for p in points] + [1.0]
    auc = math.fsum(
        (xs[i + 1] - xs[i]) * (ys[i + 1] + ys[i]) / 2.0 for i in range(len(xs) - 1)
    )

    op_pred = scores >= operating_threshold
    op = RocPoint(
        threshold=float(operating_threshold),
        fpr=float(np.sum(op_pred & ~labels)) / n_neg,
        tpr=float(np.sum(op_pred & labels)) / n_pos,
    )
    return RocCurve(points=points, auc=float(auc), operating_point=op)


def roc_points_csv(curve: RocCurve) -> str:
    """ROC points as CSV text (threshold,fpr,tpr header, LF endings)."""
    lines = ["threshold,fpr,tpr"]
    lines += [f"{p.threshold!r},{p.fpr!r},{p.tpr!r}" for p in curve.points]
    return "\n".join(lines) + "\n"
