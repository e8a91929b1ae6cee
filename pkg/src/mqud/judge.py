"""Zero-shot seven-dimension judging and its validation against experts.

The judge answers in its own three-valued vocabulary; a total mapping
collapses that onto the binary annotation enums (positive class on answer
correctness is "anything but no"). Validation reports precision/recall/F1 on
answer correctness plus weighted per-annotator agreement.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

from .backends import ChatBackend, ChatCall
from .corpus import AnnotationRecord, QudRecord
from .errors import NoOverlap, UnknownLabel, UnparseableResponse
from .genpipe import _call_json
from .prompts import BackendRequest

logger = logging.getLogger(__name__)

JUDGE_ANNOTATOR_ID = "llm_judge"

RAW_KEYS = ("q-grammar", "salience", "answer_quality", "answer-correct",
            "figure-useful", "answered-by-figure", "figure-type")

# Total collapse from the judge's output vocabulary onto annotation enums.
RAW_TO_ENUM: dict[str, dict[str, str]] = {
    "q-grammar": {"perfect": "acceptable", "minor": "acceptable",
                  "major": "not_acceptable"},
    "salience": {"very": "salient", "somewhat": "salient", "not": "not_salient"},
    "answer_quality": {"4": "high", "3": "high", "2": "low", "1": "low"},
    "answer-correct": {"yes": "acceptable", "partial": "acceptable",
                       "no": "not_acceptable"},
    "figure-useful": {"essential": "useful", "helpful": "useful",
                      "not": "not_useful"},
    "answered-by-figure": {"yes": "yes", "no": "no"},
    "figure-type": {"result": "result", "data": "data", "method": "method",
                    "comparison": "comparison", "other": "other"},
}

RAW_TO_FIELD = {
    "q-grammar": "q_grammar",
    "salience": "salience",
    "answer_quality": "answer_quality",
    "answer-correct": "answer_correct",
    "figure-useful": "figure_useful",
    "answered-by-figure": "answered_by_figure",
    "figure-type": "figure_type",
}

# Per-annotator weighted agreement puts half the weight on answer correctness.
AGREEMENT_WEIGHTS = {"answer_correct": 0.5, "figure_useful": 0.3, "salience": 0.2}

MATCHING_POLICIES = ("latest", "all_pairs")


@dataclass
class JudgeVerdict:
    qud_id: str
    raw: dict[str, str]
    mapped: AnnotationRecord

    def to_json(self) -> dict:
        return {"qud_id": self.qud_id, "raw": self.raw,
                "mapped": self.mapped.to_json()}

    @classmethod
    def from_json(cls, obj: dict) -> "JudgeVerdict":
        return cls(qud_id=obj["qud_id"], raw=obj["raw"],
                   mapped=AnnotationRecord.from_json(obj["mapped"]))


@dataclass
class AgreementReport:
    annotator_id: str
    n_pairs: int
    agree_answer_correct: float
    agree_figure_useful: float
    agree_salience: float

    @property
    def weighted(self) -> float:
        return (AGREEMENT_WEIGHTS["answer_correct"] * self.agree_answer_correct
                + AGREEMENT_WEIGHTS["figure_useful"] * self.agree_figure_useful
                + AGREEMENT_WEIGHTS["salience"] * self.agree_salience)

    def to_json(self) -> dict:
        return {"annotator_id": self.annotator_id, "n_pairs": self.n_pairs,
                "agree_answer_correct": self.agree_answer_correct,
                "agree_figure_useful": self.agree_figure_useful,
                "agree_salience": self.agree_salience, "weighted": self.weighted}


@dataclass
class AgreementSummary:
    reports: list[AgreementReport]
    median_weighted: float


def map_raw_verdict(qud_id: str, raw: dict) -> AnnotationRecord:
    """Collapse a raw judge verdict onto the annotation enums.

    Raises UnknownLabel for any value outside the judge's vocabulary; the
    mapping itself is total over that vocabulary.
    """
    fields: dict[str, str] = {}
    for key in RAW_KEYS:
        if key not in raw:
            raise UnparseableResponse(f"judge verdict missing key {key!r}")
        value = str(raw[key]).strip().lower()
        table = RAW_TO_ENUM[key]
        if value not in table:
            raise UnknownLabel(f"judge value {value!r} for {key!r} is out of vocabulary")
        fields[RAW_TO_FIELD[key]] = table[value]
    record = AnnotationRecord(qud_id=qud_id, annotator_id=JUDGE_ANNOTATOR_ID,
                              source="llm_judge", notes=str(raw.get("notes", "")),
                              **fields)
    record.validate()
    return record


def judge_qud(record: QudRecord, backend: ChatBackend,
              image_b64: str | None = None) -> JudgeVerdict:
    """Run the zero-shot judge on one QUD; notes are preserved verbatim."""
    ctx = record.context
    request = BackendRequest(
        template_id="judge",
        text_slots={
            "title": ctx.title,
            "paper_id": ctx.paper_id,
            "figure_info": f"{ctx.figure_label}: {ctx.caption}",
            "source_content": record.anchor_text,
            "question": record.question,
            "answer": record.abstractive_answer,
        },
        image_refs=[ctx.image_ref] if ctx.image_ref else [],
    )
    call = ChatCall.from_request(request, [image_b64] if image_b64 else [])
    raw = _call_json(backend, call, retries=0)
    if not isinstance(raw, dict):
        raise UnparseableResponse("judge response is not a JSON object")
    raw = {k: str(v) for k, v in raw.items()}
    return JudgeVerdict(qud_id=record.qud_id, raw=raw,
                        mapped=map_raw_verdict(record.qud_id, raw))


# =============================================================================
# Validation against human annotations
# =============================================================================

def _match_pairs(
    human: list[AnnotationRecord],
    judged: list[JudgeVerdict],
    matching: str,
) -> list[tuple[AnnotationRecord, JudgeVerdict]]:
    if matching not in MATCHING_POLICIES:
        raise ValueError(f"matching must be one of {MATCHING_POLICIES}")
    verdicts = {v.qud_id: v for v in judged}
    humans = [a for a in human if a.source == "human_expert"]
    if matching == "latest":
        latest: dict[str, AnnotationRecord] = {}
        for a in humans:
            latest[a.qud_id] = a
        humans = list(latest.values())
    return [(a, verdicts[a.qud_id]) for a in humans if a.qud_id in verdicts]


def validate_judge(
    human: list[AnnotationRecord],
    judged: list[JudgeVerdict],
    matching: str = "latest",
) -> dict:
    """Precision/recall/F1 on answer correctness, human labels as truth.

    Positive class is "acceptable" on both sides (the judge's raw verdict maps
    yes/partial there). The pair-matching policy is explicit and n is reported
    because different policies change the denominator.
    """
    pairs = _match_pairs(human, judged, matching)
    if not pairs:
        raise NoOverlap("no (human, judge) pair shares a qud_id")
    tp = fp = fn = tn = 0
    for annotation, verdict in pairs:
        truth = annotation.answer_correct == "acceptable"
        predicted = verdict.mapped.answer_correct == "acceptable"
        if predicted and truth:
            tp += 1
        elif predicted and not truth:
            fp += 1
        elif not predicted and truth:
            fn += 1
        else:
            tn += 1
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return {"precision": precision, "recall": recall, "f1": f1,
            "n": len(pairs), "tp": tp, "fp": fp, "fn": fn, "tn": tn,
            "matching": matching}


def annotator_agreement(
    human: list[AnnotationRecord],
    judged: list[JudgeVerdict],
    matching: str = "all_pairs",
) -> AgreementSummary:
    """Exact-match agreement with the judge per annotator, plus corpus median.

    Weighted score = 0.5 answer_correct + 0.3 figure_useful + 0.2 salience.
    The median over annotators uses the lower middle element on even counts.
    The matching policy is accepted for symmetry with validate_judge; because
    the store holds at most one record per (qud, annotator), "latest" and
    "all_pairs" pair the same records here, and n is reported per annotator.
    """
    if matching not in MATCHING_POLICIES:
        raise ValueError(f"matching must be one of {MATCHING_POLICIES}")
    verdicts = {v.qud_id: v for v in judged}
    by_annotator: dict[str, list[AnnotationRecord]] = {}
    for a in human:
        if a.source == "human_expert" and a.qud_id in verdicts:
            by_annotator.setdefault(a.annotator_id, []).append(a)
    if not by_annotator:
        raise NoOverlap("no annotator shares a qud_id with the judge")

    reports: list[AgreementReport] = []
    for annotator_id in sorted(by_annotator):
        annotations = by_annotator[annotator_id]
        agree = {dim: 0 for dim in AGREEMENT_WEIGHTS}
        for annotation in annotations:
            mapped = verdicts[annotation.qud_id].mapped
            for dim in AGREEMENT_WEIGHTS:
                if getattr(annotation, dim) == getattr(mapped, dim):
                    agree[dim] += 1
        n = len(annotations)
        reports.append(AgreementReport(
            annotator_id=annotator_id, n_pairs=n,
            agree_answer_correct=agree["answer_correct"] / n,
            agree_figure_useful=agree["figure_useful"] / n,
            agree_salience=agree["salience"] / n,
        ))
    weights = sorted(r.weighted for r in reports)
    median = weights[(len(weights) - 1) // 2]
    return AgreementSummary(reports=reports, median_weighted=median)


def dual_annotator_exact_agreement(
    pairs: list[tuple[AnnotationRecord, AnnotationRecord]],
) -> dict[str, float]:
    """Per-dimension exact agreement over the doubly annotated subset."""
    if not pairs:
        raise NoOverlap("no doubly annotated pairs")
    from .corpus import DIMENSIONS

    counts = {dim: 0 for dim in DIMENSIONS}
    for first, second in pairs:
        if first.qud_id != second.qud_id:
            raise ValueError(f"pair mixes quds {first.qud_id} and {second.qud_id}")
        if first.annotator_id == second.annotator_id:
            raise ValueError(f"pair repeats annotator {first.annotator_id}")
        if first.source != "human_expert" or second.source != "human_expert":
            raise ValueError("dual agreement is defined over human annotations")
        for dim in DIMENSIONS:
            if getattr(first, dim) == getattr(second, dim):
                counts[dim] += 1
    return {dim: counts[dim] / len(pairs) for dim in DIMENSIONS}
