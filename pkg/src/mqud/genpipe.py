"""Candidate QUD generation, quality filtering, and rephrase augmentation.

Figures are independent work units; everything here is deterministic given
the backend's responses, so a replayed cache reproduces the corpus byte for
byte.
"""

from __future__ import annotations

import difflib
import json
import logging
import re
from dataclasses import dataclass

from .backends import ChatBackend, ChatCall
from .corpus import (
    DIFFICULTIES,
    QUD_TYPES,
    AnchorParagraph,
    EvidenceSpan,
    QudRecord,
    TriggerContext,
    make_qud_id,
)
from .errors import TypeOutOfVocabulary, UnparseableResponse
from .paperstore import FigureUnit
from .prompts import BackendRequest

logger = logging.getLogger(__name__)

MIN_ANSWER_WORDS = 20
MAX_ANSWER_WORDS = 120
DEDUP_JACCARD_THRESHOLD = 0.7
EVIDENCE_COVERAGE_FLOOR = 0.6

# A question "references the figure" when it shares a content word with the
# caption or names a generic visual element.
VISUAL_TERMS = frozenset({
    "figure", "panel", "axis", "curve", "line", "bar", "cluster", "region",
    "legend", "plot", "point", "shaded",
})

_STOPWORDS = frozenset(
    "a an and are as at be but by for from has have in is it its of on or "
    "that the their this to was we were which with the when what how why "
    "does do did not no yes can could should would into onto about".split())


def word_count(text: str) -> int:
    return len(text.split())


def question_tokens(text: str) -> set[str]:
    return set(re.findall(r"[a-z0-9]+", text.lower()))


def jaccard(a: set[str], b: set[str]) -> float:
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)


def caption_content_words(caption: str) -> set[str]:
    return {tok for tok in question_tokens(caption)
            if tok not in _STOPWORDS and len(tok) > 2}


@dataclass
class FilterReport:
    qud_id: str
    length_ok: bool
    grounded: bool
    references_figure: bool
    duplicate_of: str | None
    kept: bool

    def to_json(self) -> dict:
        return {"qud_id": self.qud_id, "length_ok": self.length_ok,
                "grounded": self.grounded,
                "references_figure": self.references_figure,
                "duplicate_of": self.duplicate_of, "kept": self.kept}

    @classmethod
    def from_json(cls, obj: dict) -> "FilterReport":
        return cls(qud_id=obj["qud_id"], length_ok=obj["length_ok"],
                   grounded=obj["grounded"],
                   references_figure=obj["references_figure"],
                   duplicate_of=obj.get("duplicate_of"), kept=obj["kept"])


def _parse_json_payload(text: str):
    cleaned = text.strip()
    fence = re.match(r"^```(?:json)?\s*(.*?)\s*```$", cleaned, re.DOTALL)
    if fence:
        cleaned = fence.group(1)
    return json.loads(cleaned)


def _call_json(backend: ChatBackend, call: ChatCall, retries: int = 1):
    """One re-ask on malformed JSON, then UnparseableResponse."""
    last_error: Exception | None = None
    for attempt in range(retries + 1):
        text = backend.complete(call)
        try:
            return _parse_json_payload(text)
        except (json.JSONDecodeError, ValueError) as exc:
            last_error = exc
            logger.warning("malformed %s response (attempt %d): %s",
                           call.template_id, attempt + 1, exc)
    raise UnparseableResponse(
        f"{call.template_id} response is not JSON after retry: {last_error}")


def map_evidence(answer_source: str,
                 anchors: list[AnchorParagraph]) -> tuple[list[EvidenceSpan], float]:
    """Locate the cited passage inside the anchor paragraphs.

    Longest common substring against each paragraph (case-insensitive);
    coverage is the matched fraction of the cited text. Below
    EVIDENCE_COVERAGE_FLOOR the caller flags the record for review.
    """
    needle = answer_source.lower()
    if not needle.strip() or not anchors:
        return [], 0.0
    best: tuple[float, AnchorParagraph, int, int] | None = None
    for para in anchors:
        haystack = para.text.lower()
        match = difflib.SequenceMatcher(None, haystack, needle, autojunk=False
                                        ).find_longest_match(0, len(haystack), 0, len(needle))
        if match.size == 0:
            continue
        coverage = match.size / len(needle)
        if best is None or coverage > best[0]:
            best = (coverage, para, match.a, match.a + match.size)
    if best is None:
        return [], 0.0
    coverage, para, start, end = best
    span = EvidenceSpan(section=para.section, paragraph=para.paragraph,
                        start=start, end=end)
    return [span], coverage


def generate_candidates(
    figure: FigureUnit,
    ctx: TriggerContext,
    anchors: list[AnchorParagraph],
    n: int,
    backend: ChatBackend,
    image_b64: str | None = None,
    other_figures: str = "none",
    figure_number: str | None = None,
) -> list[QudRecord]:
    """Ask the backend for n candidate QUDs for one eligible figure."""
    if not 5 <= n <= 7:
        raise ValueError("n must be in [5, 7]")
    anchor_text = "\n\n".join(p.text for p in anchors)
    request = BackendRequest(
        template_id="qud_generate",
        text_slots={
            "n_questions": str(n),
            "paper_name": ctx.title,
            "abstract": ctx.abstract,
            "figure_number": figure_number or figure.label,
            "caption": ctx.caption,
            "reference_count": str(figure.reference_count),
            "other_figures": other_figures,
            "paragraphs": anchor_text,
        },
        image_refs=[ctx.image_ref] if ctx.image_ref else [],
    )
    call = ChatCall.from_request(request, [image_b64] if image_b64 else [])
    items = _call_json(backend, call)
    if not isinstance(items, list):
        raise UnparseableResponse("qud_generate response is not a JSON array")

    records: list[QudRecord] = []
    for item in items:
        try:
            question = item["question"].strip()
            answer = item["answer"].strip()
            answer_source = item.get("answer_source", "").strip()
            qud_type = item["question_type"].strip().lower()
            difficulty = item["difficulty"].strip().lower()
        except (KeyError, AttributeError) as exc:
            raise UnparseableResponse(f"candidate missing field: {exc}") from exc
        if qud_type not in QUD_TYPES:
            raise TypeOutOfVocabulary(
                f"question_type {qud_type!r} outside the six-type vocabulary")
        if difficulty not in DIFFICULTIES:
            raise TypeOutOfVocabulary(f"difficulty {difficulty!r} not in {DIFFICULTIES}")
        spans, coverage = map_evidence(answer_source, anchors)
        if not spans:
            logger.warning("candidate %r has no locatable evidence; dropped",
                           question[:60])
            continue
        if coverage < EVIDENCE_COVERAGE_FLOOR:
            logger.warning("evidence coverage %.2f below %.2f for %r; flagged for review",
                           coverage, EVIDENCE_COVERAGE_FLOOR, question[:60])
        record = QudRecord(
            qud_id=make_qud_id(ctx.paper_id, ctx.figure_label, question),
            context=ctx,
            question=question,
            abstractive_answer=answer,
            extractive_evidence=spans,
            anchor_paragraphs=anchors,
            qud_type=qud_type,
            difficulty=difficulty,
            provenance="generated",
        )
        record.validate()
        records.append(record)
    return records


def _check_grounding(record_answer: str, question: str, caption: str,
                     source_text: str, backend: ChatBackend) -> bool:
    request = BackendRequest(
        template_id="grounding_check",
        text_slots={"caption": caption, "source_text": source_text,
                    "question": question, "answer": record_answer},
    )
    result = _call_json(backend, ChatCall.from_request(request, []))
    if not isinstance(result, dict) or "grounded" not in result:
        raise UnparseableResponse("grounding_check response missing 'grounded'")
    return bool(result["grounded"])


def filter_candidates(
    records: list[QudRecord],
    backend: ChatBackend,
) -> tuple[list[QudRecord], list[FilterReport]]:
    """Quality filter: answer length in [20, 120] words, grounding, figure
    reference, and within-figure dedup (first in generation order survives)."""
    kept: list[QudRecord] = []
    reports: list[FilterReport] = []
    survivors_by_figure: dict[tuple[str, str], list[QudRecord]] = {}

    for record in records:
        length_ok = MIN_ANSWER_WORDS <= word_count(record.abstractive_answer) <= MAX_ANSWER_WORDS
        grounded = _check_grounding(record.abstractive_answer, record.question,
                                    record.context.caption, record.anchor_text,
                                    backend)
        reference_vocab = caption_content_words(record.context.caption) | VISUAL_TERMS
        references_figure = bool(question_tokens(record.question) & reference_vocab)

        figure_key = (record.context.paper_id, record.context.figure_label)
        duplicate_of = None
        tokens = question_tokens(record.question)
        for survivor in survivors_by_figure.get(figure_key, []):
            if jaccard(tokens, question_tokens(survivor.question)) >= DEDUP_JACCARD_THRESHOLD:
                duplicate_of = survivor.qud_id
                break

        is_kept = length_ok and grounded and references_figure and duplicate_of is None
        reports.append(FilterReport(qud_id=record.qud_id, length_ok=length_ok,
                                    grounded=grounded,
                                    references_figure=references_figure,
                                    duplicate_of=duplicate_of, kept=is_kept))
        if is_kept:
            kept.append(record)
            survivors_by_figure.setdefault(figure_key, []).append(record)
    return kept, reports


def rephrase_augment(
    record: QudRecord,
    backend: ChatBackend,
    n_variants: int = 2,
) -> list[QudRecord]:
    """Structurally different rephrasings of a correct QUD.

    Variant answers target ~20-30 words then ~60-80 words; every variant must
    pass the grounding check before acceptance. Rejections are logged, never
    fatal. Callers apply this only to kept records whose answer a human rated
    correct.
    """
    if n_variants <= 0:
        return []
    source_excerpt = record.anchor_text[:1200]
    request = BackendRequest(
        template_id="rephrase",
        text_slots={
            "n_variants": str(n_variants),
            "question_type": record.qud_type,
            "caption": record.context.caption,
            "source_excerpt": source_excerpt,
            "question": record.question,
            "answer": record.abstractive_answer,
        },
    )
    items = _call_json(backend, ChatCall.from_request(request, []))
    if not isinstance(items, list):
        raise UnparseableResponse("rephrase response is not a JSON array")

    variants: list[QudRecord] = []
    for item in items[:n_variants]:
        try:
            question = item["question"].strip()
            answer = item["answer"].strip()
        except (KeyError, AttributeError) as exc:
            raise UnparseableResponse(f"variant missing field: {exc}") from exc
        if not _check_grounding(answer, question, record.context.caption,
                                record.anchor_text, backend):
            logger.warning("variant rejected (grounding) for parent %s: %r",
                           record.qud_id, question[:60])
            continue
        variant = QudRecord(
            qud_id=make_qud_id(record.context.paper_id, record.context.figure_label,
                               question),
            context=record.context,
            question=question,
            abstractive_answer=answer,
            extractive_evidence=list(record.extractive_evidence),
            anchor_paragraphs=record.anchor_paragraphs,
            qud_type=record.qud_type,
            difficulty=record.difficulty,
            provenance="rephrase_variant",
            parent_id=record.qud_id,
        )
        variant.validate()
        variants.append(variant)
    return variants
