from __future__ import annotations

import numpy as np
import pytest
from scipy import stats as scipy_stats

from mqud.analysis import (
    classify_depth,
    corpus_stats,
    dependency_clusters,
    depth_bins,
    rankdata_average,
    refcount_correlations,
    spearman,
)
from mqud.errors import ConstantInput, EmptyCorpus, EmptyInput
from mqud.paperstore import FigureUnit, PaperRecord, SectionNode
from tests.conftest import make_annotation, make_qud


def brute_force_average_ranks(values):
    """Independent oracle: rank = (#smaller) + (#equal + 1) / 2."""
    return [sum(1 for v in values if v < x) + (sum(1 for v in values if v == x) + 1) / 2
            for x in values]


# --- Spearman ---------------------------------------------------------------------

def test_spearman_monotone_vectors():
    x = list(range(10))
    y = [2.0 * v + 1 for v in x]
    rho, p = spearman(x, y)
    assert rho == pytest.approx(1.0)
    assert p == 0.0
    rho_rev, _ = spearman(x, list(reversed(y)))
    assert rho_rev == pytest.approx(-1.0)


def test_rankdata_matches_brute_force_oracle():
    cases = [
        [3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0, 5.0, 3.0],
        [1.0, 1.0, 1.0, 2.0],
        [7.0],
        [2.0, 2.0],
    ]
    for values in cases:
        assert rankdata_average(values) == brute_force_average_ranks(values)


def test_spearman_ties_match_brute_force():
    x = [1.0, 2.0, 2.0, 3.0, 3.0, 3.0, 4.0, 5.0, 5.0, 6.0]
    y = [1.0, 1.0, 2.0, 2.0, 4.0, 3.0, 5.0, 5.0, 6.0, 7.0]
    rho, _ = spearman(x, y)
    rx = brute_force_average_ranks(x)
    ry = brute_force_average_ranks(y)
    expected = float(np.corrcoef(rx, ry)[0, 1])
    assert rho == pytest.approx(expected, abs=1e-12)


def test_spearman_equals_pearson_on_ranks_property():
    rng = np.random.default_rng(11)
    for _ in range(20):
        x = rng.integers(0, 5, size=12).astype(float).tolist()
        y = rng.integers(0, 5, size=12).astype(float).tolist()
        if len(set(x)) == 1 or len(set(y)) == 1:
            continue
        rho, _ = spearman(x, y)
        pearson = float(np.corrcoef(rankdata_average(x), rankdata_average(y))[0, 1])
        assert rho == pytest.approx(pearson, abs=1e-12)


def test_spearman_matches_scipy():
    rng = np.random.default_rng(3)
    x = rng.integers(0, 8, size=30).astype(float).tolist()
    y = (np.array(x) * -0.5 + rng.normal(size=30)).tolist()
    rho, p = spearman(x, y)
    expected = scipy_stats.spearmanr(x, y)
    assert rho == pytest.approx(expected.statistic, abs=1e-12)
    assert p == pytest.approx(expected.pvalue, rel=1e-6)


def test_spearman_constant_input():
    with pytest.raises(ConstantInput):
        spearman([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])


# --- corpus statistics ---------------------------------------------------------------

def _small_corpus():
    quds = [
        make_qud(question="Why does the curve in the figure dip?", qud_type="cause"),
        make_qud(question="How do the two plotted baselines compare?",
                 qud_type="comparison"),
        make_qud(question="To what extent does the figure trend vary?",
                 qud_type="extent", figure_label="fig:b"),
    ]
    annotations = [
        make_annotation(quds[0].qud_id, figure_useful="useful",
                        answered_by_figure="no"),
        make_annotation(quds[1].qud_id, figure_useful="useful",
                        answered_by_figure="yes", answer_quality="low"),
    ]
    return quds, annotations


def test_corpus_stats_counts_and_percentages():
    quds, annotations = _small_corpus()
    report = corpus_stats(quds, annotations)
    totals = report["totals"]
    assert totals["quds"] == 3
    assert totals["papers"] == 1
    assert totals["figures"] == 2
    assert totals["quds_per_figure_avg"] == pytest.approx(1.5)
    per_type = report["per_type"]
    assert per_type["cause"]["count"] == 1
    assert per_type["cause"]["pct"] == pytest.approx(100 / 3)
    assert sum(row["count"] for row in per_type.values()) == 3
    dist = report["annotations"]["distribution"]
    assert report["annotations"]["n_annotated"] == 2
    assert dist["answered_by_figure"]["yes"]["count"] == 1
    assert dist["answered_by_figure"]["yes"]["pct"] == pytest.approx(50.0)


def test_corpus_stats_without_annotations():
    quds, _ = _small_corpus()
    report = corpus_stats(quds, [])
    assert report["annotations"] == {"no_annotations": True}


def test_corpus_stats_empty():
    with pytest.raises(EmptyCorpus):
        corpus_stats([], [])


# --- dependency clusters ---------------------------------------------------------------

def test_clusters_all_useful_all_answerable_is_figure_driven():
    quds = [make_qud(question=f"How do bars {i} compare in the figure?",
                     qud_type="comparison") for i in range(4)]
    annotations = [make_annotation(q.qud_id, figure_useful="useful",
                                   answered_by_figure="yes") for q in quds]
    report = dependency_clusters(quds, annotations)
    point = report.points[0]
    assert (point.rate_useful, point.rate_answerable) == (1.0, 1.0)
    assert point.cluster == "figure_driven"


def test_clusters_gap_and_max_type():
    quds, annotations = [], []
    # cause: useful everywhere, answerable rarely -> integration with a big gap
    for i in range(10):
        q = make_qud(question=f"Why does effect {i} appear in the figure?",
                     qud_type="cause")
        quds.append(q)
        annotations.append(make_annotation(
            q.qud_id, figure_useful="useful",
            answered_by_figure="yes" if i < 2 else "no"))
    # comparison: fully figure-driven
    for i in range(5):
        q = make_qud(question=f"How do series {i} compare in the plotted figure?",
                     qud_type="comparison")
        quds.append(q)
        annotations.append(make_annotation(q.qud_id, figure_useful="useful",
                                           answered_by_figure="yes"))
    report = dependency_clusters(quds, annotations)
    by_type = {p.qud_type: p for p in report.points}
    assert by_type["cause"].cluster == "integration"
    assert by_type["cause"].gap == pytest.approx(0.8)
    assert by_type["comparison"].cluster == "figure_driven"
    assert report.max_gap_type == "cause"


def test_clusters_order_invariant():
    quds, annotations = _small_corpus()
    one = dependency_clusters(quds, annotations)
    two = dependency_clusters(list(reversed(quds)), list(reversed(annotations)))
    assert one.to_json() == two.to_json()


def test_clusters_rule_other_when_not_useful():
    q = make_qud(question="Why is the figure margin grey?", qud_type="concept")
    annotations = [make_annotation(q.qud_id, figure_useful="not_useful",
                                   answered_by_figure="no")]
    report = dependency_clusters([q], annotations)
    assert report.points[0].cluster == "other"


def test_clusters_empty():
    with pytest.raises(EmptyInput):
        dependency_clusters([], [])


# --- reference-count correlations ---------------------------------------------------------

def _paper_with_refcounts(counts):
    figures = [FigureUnit(label=f"fig:{i}", caption=f"Caption {i}.", image_path="",
                          declared_in_section=1, eligible=True, reference_count=c)
               for i, c in enumerate(counts)]
    section = SectionNode(title="Results", ordinal=1, is_appendix=False,
                          paragraphs=["p"], paragraph_refs=[[]])
    return PaperRecord(paper_id="paper-x", title="T", abstract="A",
                       sections=[section], figures=figures)


def test_correlations_wire_refcounts_to_labels():
    paper = _paper_with_refcounts([1, 2, 3, 4, 5])
    quds, annotations = [], []
    for i in range(5):
        q = make_qud(question=f"Why does figure panel {i} matter?",
                     figure_label=f"fig:{i}")
        quds.append(q)
        # usefulness and quality both rise with reference count
        annotations.append(make_annotation(
            q.qud_id,
            figure_useful="useful" if i >= 2 else "not_useful",
            answer_quality="high" if i >= 3 else "low"))
    report = refcount_correlations([paper], quds, annotations)
    assert report["rho_useful"] == pytest.approx(
        spearman([1, 2, 3, 4, 5], [0, 0, 1, 1, 1])[0])
    assert report["rho_useful"] > 0.8  # monotone-with-ties stays strongly positive
    assert report["n_useful"] == 5
    assert report["granularity"] == "per_qud"


def test_correlations_ties_match_brute_force():
    counts = [1, 1, 2, 2, 3, 3, 4, 4]
    paper = _paper_with_refcounts(counts)
    quds, annotations = [], []
    useful_flags = [0, 1, 0, 1, 1, 1, 0, 1]
    for i, flag in enumerate(useful_flags):
        q = make_qud(question=f"Why does the figure region {i} shift?",
                     figure_label=f"fig:{i}")
        quds.append(q)
        annotations.append(make_annotation(
            q.qud_id, figure_useful="useful" if flag else "not_useful",
            answer_quality="high" if i % 2 else "low"))
    report = refcount_correlations([paper], quds, annotations)
    rx = brute_force_average_ranks([float(c) for c in counts])
    ry = brute_force_average_ranks([float(f) for f in useful_flags])
    assert report["rho_useful"] == pytest.approx(float(np.corrcoef(rx, ry)[0, 1]),
                                                 abs=1e-12)


def test_correlations_per_figure_granularity():
    paper = _paper_with_refcounts([1, 5])
    quds, annotations = [], []
    for fig_idx, flags in ((0, [1, 0]), (1, [1, 1])):
        for j, flag in enumerate(flags):
            q = make_qud(question=f"Why does figure {fig_idx} case {j} change?",
                         figure_label=f"fig:{fig_idx}")
            quds.append(q)
            annotations.append(make_annotation(
                q.qud_id, figure_useful="useful" if flag else "not_useful",
                answer_quality="high" if flag else "low"))
    report = refcount_correlations([paper], quds, annotations,
                                   granularity="per_figure")
    assert report["n_useful"] == 2
    assert report["rho_useful"] == pytest.approx(1.0)


def test_correlations_constant_input():
    paper = _paper_with_refcounts([2, 2, 2])
    quds, annotations = [], []
    for i in range(3):
        q = make_qud(question=f"Why does figure item {i} hold?",
                     figure_label=f"fig:{i}")
        quds.append(q)
        annotations.append(make_annotation(q.qud_id))
    with pytest.raises(ConstantInput):
        refcount_correlations([paper], quds, annotations)


# --- question depth ----------------------------------------------------------------------

def test_depth_integration_examples():
    for question in (
        "Why does the accuracy drop after 100 tokens?",
        "To what extent does perplexity improve?",
        "What happens when the learning rate exceeds 0.01?",
        "What are the implications of the overlap?",
        "How does the model achieve the plateau?",
        "How do the two baselines compare in the high-resource setting?",
    ):
        assert classify_depth(question) == "integration_q", question


def test_depth_extraction_examples():
    for question in (
        "How many lines are in the legend?",
        "What is the value of the red bar?",
        "Which model scores highest?",
        "Is the trend significant?",
        "Does the baseline overfit?",
    ):
        assert classify_depth(question) == "extraction_q", question


def test_depth_other_bucket():
    assert classify_depth("Consider the margins of the plot.") == "other"


def test_depth_distribution_sums_to_100():
    questions = ["Why does it drop?", "How many runs?", "What is shown?",
                 "Regarding the axis."]
    report = depth_bins(questions)
    assert report["n"] == 4
    assert sum(report["counts"].values()) == 4
    assert sum(report["percentages"].values()) == pytest.approx(100.0)
    again = depth_bins(questions)
    assert again == report  # pure function
