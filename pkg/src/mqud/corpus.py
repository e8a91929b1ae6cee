"""Core data model: trigger contexts, QUD records, annotations, and splits.

Records serialize to JSONL with a ``schema: "mqud/1"`` field and round-trip
exactly. The store is append-only: corrections are new records, never edits.
"""

from __future__ import annotations

import logging
import random
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .errors import DuplicateKey, EmptyExport, InvariantViolation
from .jsonio import append_jsonl, canonical_dumps, content_id, iter_jsonl

logger = logging.getLogger(__name__)

SCHEMA = "mqud/1"

QUD_TYPES = ("cause", "comparison", "extent", "consequence", "procedural", "concept")
DIFFICULTIES = ("medium", "hard")
PROVENANCES = ("generated", "rephrase_variant")
ANNOTATION_SOURCES = ("human_expert", "llm_judge")

# The seven judgment dimensions and their closed vocabularies. The annotation
# service, the judge mapping, and the browser UI all derive their vocab from
# this table; nothing redefines it.
DIMENSION_VOCAB: dict[str, tuple[str, ...]] = {
    "salience": ("salient", "not_salient"),
    "figure_useful": ("useful", "not_useful"),
    "answered_by_figure": ("yes", "no"),
    "answer_correct": ("acceptable", "not_acceptable"),
    "answer_quality": ("high", "low"),
    "figure_type": ("result", "data", "method", "comparison", "other"),
    "q_grammar": ("acceptable", "not_acceptable"),
}
DIMENSIONS = tuple(DIMENSION_VOCAB)


def normalize_question(text: str) -> str:
    """Lowercase + collapse whitespace; the canonical form behind qud_id."""
    return " ".join(text.lower().split())


def make_qud_id(paper_id: str, figure_label: str, question: str) -> str:
    return content_id(paper_id, figure_label, normalize_question(question))


@dataclass
class TriggerContext:
    """Title + abstract + one figure (caption and image) that evokes a question."""

    paper_id: str
    figure_label: str
    title: str
    abstract: str
    caption: str
    image_ref: str | None = None  # asset hash; absent only in text-only conditions

    def validate(self) -> None:
        for name in ("paper_id", "figure_label", "title", "abstract", "caption"):
            if not getattr(self, name):
                raise InvariantViolation(f"TriggerContext.{name} must be non-empty")

    def to_json(self) -> dict:
        return {
            "paper_id": self.paper_id,
            "figure_label": self.figure_label,
            "title": self.title,
            "abstract": self.abstract,
            "caption": self.caption,
            "image_ref": self.image_ref,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "TriggerContext":
        return cls(
            paper_id=obj["paper_id"],
            figure_label=obj["figure_label"],
            title=obj["title"],
            abstract=obj["abstract"],
            caption=obj["caption"],
            image_ref=obj.get("image_ref"),
        )


@dataclass
class EvidenceSpan:
    """A char range inside one source paragraph: (section ordinal, paragraph index, range)."""

    section: int
    paragraph: int
    start: int
    end: int

    def to_json(self) -> dict:
        return {"section": self.section, "paragraph": self.paragraph,
                "start": self.start, "end": self.end}

    @classmethod
    def from_json(cls, obj: dict) -> "EvidenceSpan":
        return cls(obj["section"], obj["paragraph"], obj["start"], obj["end"])


@dataclass
class AnchorParagraph:
    """One anchor paragraph with its source identity, so evidence spans resolve."""

    section: int
    paragraph: int
    text: str

    def to_json(self) -> dict:
        return {"section": self.section, "paragraph": self.paragraph, "text": self.text}

    @classmethod
    def from_json(cls, obj: dict) -> "AnchorParagraph":
        return cls(obj["section"], obj["paragraph"], obj["text"])


@dataclass
class QudRecord:
    qud_id: str
    context: TriggerContext
    question: str
    abstractive_answer: str
    extractive_evidence: list[EvidenceSpan]
    anchor_paragraphs: list[AnchorParagraph]
    qud_type: str
    difficulty: str
    provenance: str = "generated"
    parent_id: str | None = None

    @property
    def anchor_text(self) -> str:
        """The P_F snapshot: anchor paragraphs joined in document order."""
        return "\n\n".join(p.text for p in self.anchor_paragraphs)

    def validate(self) -> None:
        if not self.qud_id:
            raise InvariantViolation("qud_id must be non-empty")
        self.context.validate()
        if self.qud_type not in QUD_TYPES:
            raise InvariantViolation(f"qud_type {self.qud_type!r} not in {QUD_TYPES}")
        if self.difficulty not in DIFFICULTIES:
            raise InvariantViolation(f"difficulty {self.difficulty!r} not in {DIFFICULTIES}")
        if self.provenance not in PROVENANCES:
            raise InvariantViolation(f"provenance {self.provenance!r} not in {PROVENANCES}")
        if (self.provenance == "rephrase_variant") != (self.parent_id is not None):
            raise InvariantViolation("parent_id present iff provenance is rephrase_variant")
        by_key = {(p.section, p.paragraph): p for p in self.anchor_paragraphs}
        for span in self.extractive_evidence:
            para = by_key.get((span.section, span.paragraph))
            if para is None:
                raise InvariantViolation(
                    f"evidence span {span} names a paragraph outside the anchor text")
            if not (0 <= span.start < span.end <= len(para.text)):
                raise InvariantViolation(
                    f"evidence span {span} char range does not fit its paragraph")

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA,
            "qud_id": self.qud_id,
            "context": self.context.to_json(),
            "question": self.question,
            "abstractive_answer": self.abstractive_answer,
            "extractive_evidence": [s.to_json() for s in self.extractive_evidence],
            "anchor_paragraphs": [p.to_json() for p in self.anchor_paragraphs],
            "qud_type": self.qud_type,
            "difficulty": self.difficulty,
            "provenance": self.provenance,
            "parent_id": self.parent_id,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "QudRecord":
        return cls(
            qud_id=obj["qud_id"],
            context=TriggerContext.from_json(obj["context"]),
            question=obj["question"],
            abstractive_answer=obj["abstractive_answer"],
            extractive_evidence=[EvidenceSpan.from_json(s) for s in obj["extractive_evidence"]],
            anchor_paragraphs=[AnchorParagraph.from_json(p) for p in obj["anchor_paragraphs"]],
            qud_type=obj["qud_type"],
            difficulty=obj["difficulty"],
            provenance=obj.get("provenance", "generated"),
            parent_id=obj.get("parent_id"),
        )


@dataclass
class AnnotationRecord:
    qud_id: str
    annotator_id: str
    source: str
    salience: str
    figure_useful: str
    answered_by_figure: str
    answer_correct: str
    answer_quality: str
    figure_type: str
    q_grammar: str
    notes: str = ""

    def validate(self) -> None:
        if not self.qud_id or not self.annotator_id:
            raise InvariantViolation("qud_id and annotator_id must be non-empty")
        if self.source not in ANNOTATION_SOURCES:
            raise InvariantViolation(f"source {self.source!r} not in {ANNOTATION_SOURCES}")
        for dim, vocab in DIMENSION_VOCAB.items():
            value = getattr(self, dim)
            if value not in vocab:
                raise InvariantViolation(f"{dim}={value!r} not in {vocab}")

    def dimension_values(self) -> dict[str, str]:
        return {dim: getattr(self, dim) for dim in DIMENSIONS}

    def to_json(self) -> dict:
        obj = {"schema": SCHEMA, "qud_id": self.qud_id,
               "annotator_id": self.annotator_id, "source": self.source,
               "notes": self.notes}
        obj.update(self.dimension_values())
        return obj

    @classmethod
    def from_json(cls, obj: dict) -> "AnnotationRecord":
        return cls(
            qud_id=obj["qud_id"],
            annotator_id=obj["annotator_id"],
            source=obj["source"],
            notes=obj.get("notes", ""),
            **{dim: obj[dim] for dim in DIMENSIONS},
        )


@dataclass
class SplitManifest:
    train: list[str] = field(default_factory=list)
    validation: list[str] = field(default_factory=list)
    eval_within: list[str] = field(default_factory=list)
    eval_disjoint: list[str] = field(default_factory=list)
    disjoint_paper_ids: list[str] = field(default_factory=list)

    def validate(self, quds_by_id: dict[str, QudRecord] | None = None) -> None:
        splits = {"train": self.train, "validation": self.validation,
                  "eval_within": self.eval_within, "eval_disjoint": self.eval_disjoint}
        seen: dict[str, str] = {}
        for name, ids in splits.items():
            for qud_id in ids:
                if qud_id in seen:
                    raise InvariantViolation(
                        f"qud {qud_id} in both {seen[qud_id]} and {name}")
                seen[qud_id] = name
        if quds_by_id is None:
            return
        disjoint = set(self.disjoint_paper_ids)
        for qud_id in self.eval_disjoint:
            paper = quds_by_id[qud_id].context.paper_id
            if paper not in disjoint:
                raise InvariantViolation(
                    f"eval_disjoint qud {qud_id} comes from non-disjoint paper {paper}")
        for qud_id in self.train:
            paper = quds_by_id[qud_id].context.paper_id
            if paper in disjoint:
                raise InvariantViolation(
                    f"train qud {qud_id} comes from disjoint paper {paper}")

    def to_json(self) -> dict:
        return {"schema": SCHEMA, "train": self.train, "validation": self.validation,
                "eval_within": self.eval_within, "eval_disjoint": self.eval_disjoint,
                "disjoint_paper_ids": self.disjoint_paper_ids}

    @classmethod
    def from_json(cls, obj: dict) -> "SplitManifest":
        return cls(train=obj["train"], validation=obj["validation"],
                   eval_within=obj["eval_within"], eval_disjoint=obj["eval_disjoint"],
                   disjoint_paper_ids=obj["disjoint_paper_ids"])


@dataclass
class Receipt:
    key: str
    offset: int


class CorpusStore:
    """Append-only JSONL store for QUDs and annotations.

    Single writer per file; rebuilding from disk yields identical state after
    any number of restarts. Duplicate keys are rejected, never overwritten.
    """

    QUDS_FILE = "quds.jsonl"
    ANNOTATIONS_FILE = "annotations.jsonl"

    def __init__(self, root: Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self.quds: dict[str, QudRecord] = {}
        self.annotations: dict[tuple[str, str], AnnotationRecord] = {}
        self._replay()

    @property
    def quds_path(self) -> Path:
        return self.root / self.QUDS_FILE

    @property
    def annotations_path(self) -> Path:
        return self.root / self.ANNOTATIONS_FILE

    def _replay(self) -> None:
        if self.quds_path.exists():
            for obj in iter_jsonl(self.quds_path):
                record = QudRecord.from_json(obj)
                self.quds[record.qud_id] = record
        if self.annotations_path.exists():
            for obj in iter_jsonl(self.annotations_path):
                record = AnnotationRecord.from_json(obj)
                self.annotations[(record.qud_id, record.annotator_id)] = record

    def store_append(self, record: QudRecord | AnnotationRecord) -> Receipt:
        record.validate()
        with self._lock:
            if isinstance(record, QudRecord):
                if record.qud_id in self.quds:
                    raise DuplicateKey(f"qud {record.qud_id} already stored")
                offset = append_jsonl(self.quds_path, record.to_json())
                self.quds[record.qud_id] = record
                return Receipt(key=record.qud_id, offset=offset)
            key = (record.qud_id, record.annotator_id)
            if key in self.annotations:
                raise DuplicateKey(
                    f"annotation by {record.annotator_id} on {record.qud_id} already stored")
            offset = append_jsonl(self.annotations_path, record.to_json())
            self.annotations[key] = record
            return Receipt(key=f"{record.qud_id}/{record.annotator_id}", offset=offset)

    def annotations_for(self, qud_id: str, source: str | None = None) -> list[AnnotationRecord]:
        """Annotations of one QUD in insertion order, optionally by source."""
        out = [a for (qid, _), a in self.annotations.items() if qid == qud_id]
        if source is not None:
            out = [a for a in out if a.source == source]
        return out

    def human_annotations(self) -> list[AnnotationRecord]:
        return [a for a in self.annotations.values() if a.source == "human_expert"]


# --- SFT export ---------------------------------------------------------------


@dataclass
class SftFilterPolicy:
    """Which annotated QUDs enter the training export.

    Defaults mirror the release policy: keep QUDs whose latest human
    annotation rated the answer correct and the figure useful; rephrase
    variants ride along with a surviving parent.
    """

    require_answer_correct: bool = True
    require_figure_useful: bool = True
    include_variants: bool = True
    validation_size: int = 51
    seed: int = 13


@dataclass
class SftExport:
    train: list[dict]
    validation: list[dict]
    retained_parents: list[str]

    @property
    def lines(self) -> list[dict]:
        return self.train + self.validation


def _latest_human_annotation(
    annotations: Iterable[AnnotationRecord], qud_id: str
) -> AnnotationRecord | None:
    latest = None
    for a in annotations:
        if a.qud_id == qud_id and a.source == "human_expert":
            latest = a
    return latest


def _export_line(record: QudRecord, split: str) -> dict:
    ctx = record.context
    return {
        "schema": SCHEMA,
        "qud_id": record.qud_id,
        "split": split,
        "input": {
            "title": ctx.title,
            "abstract": ctx.abstract,
            "caption": ctx.caption,
            "image_ref": ctx.image_ref,
            "figure_label": ctx.figure_label,
        },
        "target": record.question,
    }


def build_sft_export(
    quds: list[QudRecord],
    annotations: list[AnnotationRecord],
    policy: SftFilterPolicy | None = None,
) -> SftExport:
    """Select training examples from annotated QUDs.

    A parent QUD survives when its latest human annotation satisfies the
    policy; variants survive only via a surviving parent (their grounding was
    already checked at augmentation time, otherwise they never entered the
    store). The model sees only the trigger context, so the input carries
    context fields and the target is the question.
    """
    policy = policy or SftFilterPolicy()
    retained: list[QudRecord] = []
    parents_ok: set[str] = set()
    for record in quds:
        if record.provenance != "generated":
            continue
        latest = _latest_human_annotation(annotations, record.qud_id)
        if latest is None:
            continue
        if policy.require_answer_correct and latest.answer_correct != "acceptable":
            continue
        if policy.require_figure_useful and latest.figure_useful == "not_useful":
            continue
        retained.append(record)
        parents_ok.add(record.qud_id)
    if policy.include_variants:
        for record in quds:
            if record.provenance == "rephrase_variant" and record.parent_id in parents_ok:
                retained.append(record)
    if not retained:
        raise EmptyExport("no QUD passed the export policy")

    validation_ids = _pick_validation(retained, policy.validation_size, policy.seed)
    train, validation = [], []
    for record in retained:
        split = "validation" if record.qud_id in validation_ids else "train"
        line = _export_line(record, split)
        (validation if split == "validation" else train).append(line)
    logger.info("sft export: %d train, %d validation (from %d parents)",
                len(train), len(validation), len(parents_ok))
    return SftExport(train=train, validation=validation, retained_parents=sorted(parents_ok))


def stratified_sample(ids_by_group: dict[str, list[str]], size: int, seed: int) -> set[str]:
    """Seeded sample of `size` ids, proportional per group (largest remainders)."""
    total = sum(len(ids) for ids in ids_by_group.values())
    if size <= 0 or total == 0:
        return set()
    if size >= total:
        return {i for ids in ids_by_group.values() for i in ids}
    quotas = {g: size * len(ids) / total for g, ids in ids_by_group.items()}
    counts = {g: int(q) for g, q in quotas.items()}
    shortfall = size - sum(counts.values())
    for g in sorted(quotas, key=lambda g: (quotas[g] - counts[g], g), reverse=True):
        if shortfall <= 0:
            break
        if counts[g] < len(ids_by_group[g]):
            counts[g] += 1
            shortfall -= 1
    rng = random.Random(seed)
    picked: set[str] = set()
    for g in sorted(ids_by_group):
        ids = sorted(ids_by_group[g])
        take = min(counts.get(g, 0), len(ids))
        picked.update(rng.sample(ids, take))
    return picked


def _pick_validation(records: list[QudRecord], size: int, seed: int) -> set[str]:
    by_type: dict[str, list[str]] = {}
    for r in records:
        by_type.setdefault(r.qud_type, []).append(r.qud_id)
    return stratified_sample(by_type, size, seed)


def split_manifest_from_export(
    export: SftExport, quds_by_id: dict[str, QudRecord],
    eval_within: list[str] | None = None,
    eval_disjoint: list[str] | None = None,
    disjoint_paper_ids: list[str] | None = None,
) -> SplitManifest:
    manifest = SplitManifest(
        train=[line["qud_id"] for line in export.train],
        validation=[line["qud_id"] for line in export.validation],
        eval_within=eval_within or [],
        eval_disjoint=eval_disjoint or [],
        disjoint_paper_ids=disjoint_paper_ids or [],
    )
    manifest.validate(quds_by_id)
    return manifest


def dimension_schema() -> dict:
    """Published enum schema; the annotation UI renders controls from this."""
    return {
        "schema": SCHEMA,
        "dimensions": [
            {"name": dim, "values": list(vocab)} for dim, vocab in DIMENSION_VOCAB.items()
        ],
        "notes_field": "notes",
    }
