"""Dataset-level analytics: corpus statistics, figure-dependency clusters,
reference-count correlations, and question-depth binning.

Pure, read-only functions; every percentage is recomputed from counts at call
time, never stored.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources

import numpy as np
from scipy import stats as scipy_stats

from .corpus import DIMENSION_VOCAB, QUD_TYPES, AnnotationRecord, QudRecord
from .errors import ConstantInput, EmptyCorpus, EmptyInput
from .paperstore import PaperRecord

CLUSTER_THRESHOLD = 0.5

DEPTH_BINS = ("integration_q", "extraction_q", "other")


# =============================================================================
# Rank statistics
# =============================================================================

def rankdata_average(values: list[float]) -> list[float]:
    """1-based ranks, ties receive the average of the ranks they span."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg_rank = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = avg_rank
        i = j + 1
    return ranks


def spearman(x: list[float], y: list[float]) -> tuple[float, float]:
    """Spearman rho with average ranks; p via the large-sample t approximation.

    Equals Pearson correlation computed on the average ranks.
    """
    if len(x) != len(y):
        raise ValueError("x and y must have equal length")
    n = len(x)
    if n < 2:
        raise ConstantInput("need at least two points")
    if len(set(x)) == 1 or len(set(y)) == 1:
        raise ConstantInput("correlation undefined for constant input")
    rx = np.array(rankdata_average(list(x)))
    ry = np.array(rankdata_average(list(y)))
    rx -= rx.mean()
    ry -= ry.mean()
    rho = float(np.dot(rx, ry) / np.sqrt(np.dot(rx, rx) * np.dot(ry, ry)))
    if n < 3:
        return rho, float("nan")
    if abs(rho) >= 1.0:
        return rho, 0.0
    t = rho * np.sqrt((n - 2) / (1 - rho * rho))
    p = 2 * float(scipy_stats.t.sf(abs(t), df=n - 2))
    return rho, p


# =============================================================================
# Corpus statistics
# =============================================================================

def _latest_human_by_qud(annotations: list[AnnotationRecord]) -> dict[str, AnnotationRecord]:
    latest: dict[str, AnnotationRecord] = {}
    for a in annotations:
        if a.source == "human_expert":
            latest[a.qud_id] = a
    return latest


def corpus_stats(quds: list[QudRecord],
                 annotations: list[AnnotationRecord]) -> dict:
    """Totals, per-type distribution, per-figure averages, length means, and
    the human annotation distribution."""
    if not quds:
        raise EmptyCorpus("no QUDs")
    papers = {q.context.paper_id for q in quds}
    figures = {(q.context.paper_id, q.context.figure_label) for q in quds}
    answer_words = [len(q.abstractive_answer.split()) for q in quds]
    anchor_words = [len(q.anchor_text.split()) for q in quds]

    type_counts = {t: 0 for t in QUD_TYPES}
    for q in quds:
        type_counts[q.qud_type] += 1
    n = len(quds)
    per_type = {t: {"count": c, "pct": 100.0 * c / n} for t, c in type_counts.items()}

    report = {
        "totals": {
            "quds": n,
            "papers": len(papers),
            "figures": len(figures),
            "quds_per_figure_avg": n / len(figures),
            "answer_len_avg_words": float(np.mean(answer_words)),
            "anchor_len_avg_words": float(np.mean(anchor_words)),
        },
        "per_type": per_type,
    }

    latest = _latest_human_by_qud(annotations)
    if not latest:
        report["annotations"] = {"no_annotations": True}
        return report
    n_annotated = len(latest)
    distribution: dict[str, dict] = {}
    for dim, vocab in DIMENSION_VOCAB.items():
        counts = {value: 0 for value in vocab}
        for a in latest.values():
            counts[getattr(a, dim)] += 1
        distribution[dim] = {
            value: {"count": c, "pct": 100.0 * c / n_annotated}
            for value, c in counts.items()
        }
    report["annotations"] = {"n_annotated": n_annotated, "distribution": distribution}
    return report


# =============================================================================
# Figure-dependency clusters
# =============================================================================

@dataclass
class TypeDependencyPoint:
    qud_type: str
    n: int
    rate_useful: float
    rate_answerable: float
    cluster: str

    @property
    def gap(self) -> float:
        return self.rate_useful - self.rate_answerable

    def to_json(self) -> dict:
        return {"qud_type": self.qud_type, "n": self.n,
                "rate_useful": self.rate_useful,
                "rate_answerable": self.rate_answerable,
                "gap": self.gap, "cluster": self.cluster}


@dataclass
class ClusterReport:
    points: list[TypeDependencyPoint]
    max_gap_type: str
    max_gap: float

    def to_json(self) -> dict:
        return {"points": [p.to_json() for p in self.points],
                "max_gap_type": self.max_gap_type, "max_gap": self.max_gap}


def _assign_cluster(rate_useful: float, rate_answerable: float,
                    threshold: float) -> str:
    if rate_answerable >= threshold and rate_useful >= threshold:
        return "figure_driven"
    if rate_useful >= threshold:
        return "integration"
    return "other"


def dependency_clusters(quds: list[QudRecord],
                        annotations: list[AnnotationRecord],
                        threshold: float = CLUSTER_THRESHOLD) -> ClusterReport:
    """Per-type usefulness vs answerability rates over human annotations.

    Types where the figure is both useful and answers the question alone are
    figure-driven; useful-but-not-answerable types need text integration.
    """
    latest = _latest_human_by_qud(annotations)
    types_by_qud = {q.qud_id: q.qud_type for q in quds}
    grouped: dict[str, list[AnnotationRecord]] = {}
    for qud_id, annotation in latest.items():
        qud_type = types_by_qud.get(qud_id)
        if qud_type is not None:
            grouped.setdefault(qud_type, []).append(annotation)
    if not grouped:
        raise EmptyInput("no human annotations overlap the QUD set")

    points = []
    for qud_type in sorted(grouped):
        group = grouped[qud_type]
        useful = sum(1 for a in group if a.figure_useful == "useful") / len(group)
        answerable = sum(1 for a in group if a.answered_by_figure == "yes") / len(group)
        points.append(TypeDependencyPoint(
            qud_type=qud_type, n=len(group), rate_useful=useful,
            rate_answerable=answerable,
            cluster=_assign_cluster(useful, answerable, threshold)))
    best = max(points, key=lambda p: p.gap)
    return ClusterReport(points=points, max_gap_type=best.qud_type, max_gap=best.gap)


# =============================================================================
# Reference-count correlations
# =============================================================================

def refcount_correlations(papers: list[PaperRecord], quds: list[QudRecord],
                          annotations: list[AnnotationRecord],
                          granularity: str = "per_qud",
                          include_points: bool = False) -> dict:
    """Spearman correlation of a figure's distinct-section reference count
    against rated usefulness and answer quality (useful=1, high=1, missing
    dropped). Granularity: per_qud pairs every annotated QUD; per_figure
    first averages labels within each figure. With include_points the report
    carries the raw (refcount, label) pairs for plotting."""
    if granularity not in ("per_qud", "per_figure"):
        raise ValueError("granularity must be per_qud or per_figure")
    refcount = {(p.paper_id, f.label): f.reference_count
                for p in papers for f in p.figures}
    latest = _latest_human_by_qud(annotations)
    quds_by_id = {q.qud_id: q for q in quds}

    pairs_useful: list[tuple] = []
    pairs_quality: list[tuple] = []
    for qud_id, annotation in latest.items():
        record = quds_by_id.get(qud_id)
        if record is None:
            continue
        key = (record.context.paper_id, record.context.figure_label)
        if key not in refcount:
            continue
        x = float(refcount[key])
        pairs_useful.append((x, 1.0 if annotation.figure_useful == "useful" else 0.0, key))
        pairs_quality.append((x, 1.0 if annotation.answer_quality == "high" else 0.0, key))

    if granularity == "per_figure":
        pairs_useful = _average_by_figure(pairs_useful)
        pairs_quality = _average_by_figure(pairs_quality)
    else:
        pairs_useful = [(x, y) for x, y, _ in pairs_useful]
        pairs_quality = [(x, y) for x, y, _ in pairs_quality]

    if not pairs_useful:
        raise EmptyInput("no annotated QUD maps to a known figure")
    rho_u, p_u = spearman([x for x, _ in pairs_useful], [y for _, y in pairs_useful])
    rho_q, p_q = spearman([x for x, _ in pairs_quality], [y for _, y in pairs_quality])
    report = {"rho_useful": rho_u, "p_useful": p_u, "n_useful": len(pairs_useful),
              "rho_quality": rho_q, "p_quality": p_q, "n_quality": len(pairs_quality),
              "granularity": granularity}
    if include_points:
        report["points"] = {"useful": pairs_useful, "quality": pairs_quality}
    return report


def _average_by_figure(triples: list[tuple]) -> list[tuple[float, float]]:
    grouped: dict[tuple, list[tuple[float, float]]] = {}
    for x, y, key in triples:
        grouped.setdefault(key, []).append((x, y))
    out = []
    for key in sorted(grouped):
        xs = [x for x, _ in grouped[key]]
        ys = [y for _, y in grouped[key]]
        out.append((xs[0], float(np.mean(ys))))
    return out


# =============================================================================
# Question depth binning
# =============================================================================

@dataclass
class DepthBin:
    question: str
    bin: str

    def to_json(self) -> dict:
        return {"question": self.question, "bin": self.bin}


def _load_depth_rules() -> list[tuple[re.Pattern, str]]:
    payload = json.loads(
        resources.files("mqud").joinpath("data/depth_lexicon.json").read_text("utf-8"))
    return [(re.compile(rule["pattern"]), rule["bin"]) for rule in payload["rules"]]


_DEPTH_RULES: list[tuple[re.Pattern, str]] | None = None


def classify_depth(question: str) -> str:
    """Bin one question by its leading words; deterministic, lexicon-driven."""
    global _DEPTH_RULES
    if _DEPTH_RULES is None:
        _DEPTH_RULES = _load_depth_rules()
    normalized = " ".join(question.lower().split())
    for pattern, bin_name in _DEPTH_RULES:
        if pattern.search(normalized):
            return bin_name
    return "other"


def depth_bins(questions: list[str]) -> dict:
    """Distribution of questions over integration / extraction / other."""
    bins = [DepthBin(question=q, bin=classify_depth(q)) for q in questions]
    counts = {name: 0 for name in DEPTH_BINS}
    for item in bins:
        counts[item.bin] += 1
    total = len(bins)
    return {
        "n": total,
        "counts": counts,
        "percentages": {name: (100.0 * c / total if total else 0.0)
                        for name, c in counts.items()},
        "bins": [b.to_json() for b in bins],
    }
