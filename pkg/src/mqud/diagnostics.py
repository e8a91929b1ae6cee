"""Figure-grounding diagnostics from NLL traces.

Each item is scored under three conditions that differ only in the image:
the correct figure (mm), no figure (to), and a wrong figure from the same
paper (swap). From the mean per-token NLLs we derive

    relative information gain  rIG = (L_to - L_mm) / L_mm
    swap gap                   L_swap - L_to   (positive = content-specific)

and aggregate with seeded percentile-bootstrap confidence intervals.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .backends import ScoreBackend, ScoreCall
from .corpus import QudRecord
from .errors import DegenerateTrace, EmptyInput, InvariantViolation, MissingSwap
from .paperstore import FigureUnit, PaperRecord

logger = logging.getLogger(__name__)

# Below this the per-token loss is numerically meaningless as a normalizer.
DEGENERATE_NLL = 1e-6

CONDITIONS = ("mm", "to", "swap")


@dataclass
class NllTrace:
    qud_id: str
    qud_type: str
    nll_mm: float
    nll_to: float
    model_tag: str
    nll_swap: float | None = None
    swap_figure_label: str | None = None

    def validate(self, own_figure_label: str | None = None) -> None:
        for name in ("nll_mm", "nll_to"):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0:
                raise InvariantViolation(f"{name}={value} must be finite and > 0")
        if (self.nll_swap is None) != (self.swap_figure_label is None):
            raise InvariantViolation("nll_swap and swap_figure_label come together")
        if self.nll_swap is not None:
            if not math.isfinite(self.nll_swap) or self.nll_swap <= 0:
                raise InvariantViolation(f"nll_swap={self.nll_swap} must be finite and > 0")
            if own_figure_label is not None and self.swap_figure_label == own_figure_label:
                raise InvariantViolation("swap figure must differ from the item's own figure")

    def to_json(self) -> dict:
        return {"qud_id": self.qud_id, "qud_type": self.qud_type,
                "nll_mm": self.nll_mm, "nll_to": self.nll_to,
                "nll_swap": self.nll_swap,
                "swap_figure_label": self.swap_figure_label,
                "model_tag": self.model_tag}

    @classmethod
    def from_json(cls, obj: dict) -> "NllTrace":
        return cls(qud_id=obj["qud_id"], qud_type=obj["qud_type"],
                   nll_mm=obj["nll_mm"], nll_to=obj["nll_to"],
                   nll_swap=obj.get("nll_swap"),
                   swap_figure_label=obj.get("swap_figure_label"),
                   model_tag=obj["model_tag"])


@dataclass
class DiagnosticReport:
    model_tag: str
    n: int
    delta_l_mean: float
    rig_mean: float
    rig_ci: tuple[float, float]
    swap_mean: float | None
    swap_ci: tuple[float, float] | None
    swap_positive_rate: float | None
    per_type: dict[str, dict] = field(default_factory=dict)
    n_degenerate: int = 0
    resamples: int = 0
    seed: int = 0
    # means are over items; the CIs come from resampling items with replacement
    convention: str = "item-means with percentile bootstrap CIs"

    def to_json(self) -> dict:
        return {"model_tag": self.model_tag, "n": self.n,
                "delta_l_mean": self.delta_l_mean, "rig_mean": self.rig_mean,
                "rig_ci": list(self.rig_ci),
                "swap_mean": self.swap_mean,
                "swap_ci": list(self.swap_ci) if self.swap_ci else None,
                "swap_positive_rate": self.swap_positive_rate,
                "per_type": self.per_type, "n_degenerate": self.n_degenerate,
                "resamples": self.resamples, "seed": self.seed,
                "convention": self.convention}


def rig(trace: NllTrace) -> float:
    """Relative information gain: how much withholding the figure raises the
    loss, normalized by the with-figure loss. Sign-preserving, no clamping."""
    if trace.nll_mm < DEGENERATE_NLL:
        raise DegenerateTrace(
            f"{trace.qud_id}: nll_mm={trace.nll_mm} below {DEGENERATE_NLL}")
    return (trace.nll_to - trace.nll_mm) / trace.nll_mm


def swap_gap(trace: NllTrace) -> float:
    """Wrong-figure loss minus no-figure loss; positive means a mismatched
    figure hurts more than no figure at all."""
    if trace.nll_swap is None:
        raise MissingSwap(f"{trace.qud_id} has no swap condition")
    return trace.nll_swap - trace.nll_to


def select_swap_partner(paper: PaperRecord, figure_label: str) -> FigureUnit | None:
    """Deterministic wrong-figure choice: the other eligible figure declared
    nearest in the document (ties break toward the earlier one, then label)."""
    own = paper.figure(figure_label)
    candidates = [f for f in paper.eligible_figures() if f.label != figure_label]
    if not candidates:
        return None
    return min(candidates, key=lambda f: (abs(f.declared_in_section - own.declared_in_section),
                                          f.declared_in_section, f.label))


def score_conditions(
    record: QudRecord,
    swap_figure: FigureUnit | None,
    backend: ScoreBackend,
    image_b64: str | None,
    swap_image_b64: str | None,
    model_tag: str = "model",
) -> NllTrace:
    """Score one item under mm / to / swap.

    The text context (title, abstract, and the ORIGINAL figure's caption) is
    identical across conditions; only the image slot changes. Papers with a
    single eligible figure produce a trace without the swap condition.
    """
    ctx = record.context

    def call(image: str | None) -> float:
        result = backend.score(ScoreCall(title=ctx.title, abstract=ctx.abstract,
                                         caption=ctx.caption, image=image,
                                         question=record.question))
        if result.token_nlls:
            return float(sum(result.token_nlls) / len(result.token_nlls))
        return float(result.mean_nll)

    nll_mm = call(image_b64)
    nll_to = call(None)
    nll_swap = None
    swap_label = None
    if swap_figure is not None and swap_image_b64 is not None:
        nll_swap = call(swap_image_b64)
        swap_label = swap_figure.label
    else:
        logger.info("%s: no swap candidate, swap condition omitted", record.qud_id)
    trace = NllTrace(qud_id=record.qud_id, qud_type=record.qud_type,
                     nll_mm=nll_mm, nll_to=nll_to, nll_swap=nll_swap,
                     swap_figure_label=swap_label, model_tag=model_tag)
    trace.validate(own_figure_label=ctx.figure_label)
    return trace


# =============================================================================
# Aggregation
# =============================================================================

def _bootstrap_ci(values: np.ndarray, resamples: int,
                  rng: np.random.Generator) -> tuple[float, float]:
    n = len(values)
    idx = rng.integers(0, n, size=(resamples, n))
    means = values[idx].mean(axis=1)
    lo, hi = np.percentile(means, [2.5, 97.5])
    return float(lo), float(hi)


def aggregate(traces: list[NllTrace], resamples: int = 10_000,
              seed: int = 0) -> DiagnosticReport:
    """Corpus-level report: item means, 95% percentile-bootstrap CIs over item
    resampling, per-type rIG, and the swap-positive rate.

    Deterministic given (traces, resamples, seed) and invariant to trace
    order: traces are canonicalized by qud_id before any resampling.
    """
    if not traces:
        raise EmptyInput("no traces to aggregate")
    if resamples < 1:
        raise ValueError("resamples must be >= 1")
    traces = sorted(traces, key=lambda t: t.qud_id)
    model_tags = {t.model_tag for t in traces}
    if len(model_tags) > 1:
        raise InvariantViolation(f"traces mix model tags: {sorted(model_tags)}")

    usable = [t for t in traces if t.nll_mm >= DEGENERATE_NLL]
    n_degenerate = len(traces) - len(usable)
    if n_degenerate:
        logger.warning("%d degenerate trace(s) excluded from aggregation", n_degenerate)
    if not usable:
        raise EmptyInput("all traces are degenerate")

    rng = np.random.default_rng(seed)
    rigs = np.array([rig(t) for t in usable])
    deltas = np.array([t.nll_to - t.nll_mm for t in usable])
    rig_ci = _bootstrap_ci(rigs, resamples, rng)

    swap_traces = [t for t in usable if t.nll_swap is not None]
    swap_mean = swap_ci = swap_rate = None
    if swap_traces:
        gaps = np.array([swap_gap(t) for t in swap_traces])
        swap_mean = float(gaps.mean())
        swap_ci = _bootstrap_ci(gaps, resamples, rng)
        swap_rate = float((gaps > 0).sum() / len(gaps))

    return DiagnosticReport(
        model_tag=next(iter(model_tags)),
        n=len(usable),
        delta_l_mean=float(deltas.mean()),
        rig_mean=float(rigs.mean()),
        rig_ci=rig_ci,
        swap_mean=swap_mean,
        swap_ci=swap_ci,
        swap_positive_rate=swap_rate,
        per_type={t: {"n": stats["n"], "rig_mean": stats["rig_mean"]}
                  for t, stats in _per_type_stats(usable).items()},
        n_degenerate=n_degenerate,
        resamples=resamples,
        seed=seed,
    )


def _per_type_stats(traces: list[NllTrace]) -> dict[str, dict]:
    grouped: dict[str, list[float]] = {}
    for trace in traces:
        grouped.setdefault(trace.qud_type, []).append(rig(trace))
    return {qud_type: {"n": len(values), "rig_mean": float(np.mean(values))}
            for qud_type, values in sorted(grouped.items())}


def per_type_rig(traces: list[NllTrace]) -> dict[str, float]:
    """Mean rIG per question type; types with zero items are omitted."""
    if not traces:
        raise EmptyInput("no traces")
    usable = [t for t in traces if t.nll_mm >= DEGENERATE_NLL]
    if not usable:
        raise EmptyInput("all traces are degenerate")
    return {qud_type: stats["rig_mean"]
            for qud_type, stats in _per_type_stats(usable).items()}
