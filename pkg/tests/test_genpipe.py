from __future__ import annotations

import json

import pytest

from mqud.backends import ChatBackend, MockChatBackend
from mqud.corpus import AnchorParagraph, TriggerContext
from mqud.errors import TypeOutOfVocabulary, UnparseableResponse
from mqud.genpipe import (
    filter_candidates,
    generate_candidates,
    jaccard,
    map_evidence,
    question_tokens,
    rephrase_augment,
    word_count,
)
from mqud.paperstore import FigureUnit
from tests.conftest import make_qud


class ScriptedChatBackend(ChatBackend):
    """Returns queued responses in order; repeats the last one when drained."""

    def __init__(self, responses):
        super().__init__()
        self.responses = list(responses)

    def _complete(self, call):
        if len(self.responses) > 1:
            return self.responses.pop(0)
        return self.responses[0]


GROUNDED_OK = json.dumps({"grounded": True, "reason": "traceable"})
GROUNDED_NO = json.dumps({"grounded": False, "reason": "vague"})


def _figure():
    return FigureUnit(label="fig:a", caption="Accuracy curves across epochs.",
                      image_path="figs/a.png", declared_in_section=2,
                      eligible=True, reference_count=2)


def _ctx():
    return TriggerContext(paper_id="paper-x", figure_label="fig:a",
                          title="A Study", abstract="We study curves.",
                          caption="Accuracy curves across epochs.",
                          image_ref="abc123")


def _anchors():
    return [AnchorParagraph(section=2, paragraph=1,
                            text="The contextual model climbs for ten epochs and "
                                 "then plateaus. The lexical baseline saturates "
                                 "early at a lower level.")]


def _candidate_payload(question_type="cause", answer_words=30):
    answer = " ".join(["word"] * answer_words)
    return {"question": "Why does the accuracy curve plateau in the figure?",
            "answer": answer,
            "answer_source": "The contextual model climbs for ten epochs",
            "question_type": question_type, "difficulty": "medium"}


# --- candidate generation -------------------------------------------------------

def test_generate_from_canned_response():
    payload = json.dumps([_candidate_payload() for _ in range(5)])
    backend = ScriptedChatBackend([payload])
    records = generate_candidates(_figure(), _ctx(), _anchors(), n=5,
                                  backend=backend)
    assert len(records) == 5  # dedup is the filter's job, not generation's
    assert all(r.provenance == "generated" for r in records)
    assert all(r.extractive_evidence for r in records)
    assert records[0].anchor_text.startswith("The contextual model")


def test_generate_rejects_out_of_vocabulary_type():
    bad = _candidate_payload(question_type="verification")
    backend = ScriptedChatBackend([json.dumps([bad])])
    with pytest.raises(TypeOutOfVocabulary):
        generate_candidates(_figure(), _ctx(), _anchors(), n=5, backend=backend)


def test_generate_retries_malformed_json_once():
    good = json.dumps([_candidate_payload()])
    backend = ScriptedChatBackend(["not json {", good])
    records = generate_candidates(_figure(), _ctx(), _anchors(), n=5,
                                  backend=backend)
    assert len(records) == 1
    assert len(backend.calls) == 2


def test_generate_fails_after_retry():
    backend = ScriptedChatBackend(["not json {"])
    with pytest.raises(UnparseableResponse):
        generate_candidates(_figure(), _ctx(), _anchors(), n=5, backend=backend)
    assert len(backend.calls) == 2


def test_generate_n_bounds():
    with pytest.raises(ValueError):
        generate_candidates(_figure(), _ctx(), _anchors(), n=4,
                            backend=ScriptedChatBackend(["[]"]))


def test_mock_pipeline_deterministic():
    backend = MockChatBackend()
    first = generate_candidates(_figure(), _ctx(), _anchors(), n=7, backend=backend)
    second = generate_candidates(_figure(), _ctx(), _anchors(), n=7, backend=backend)
    assert [r.to_json() for r in first] == [r.to_json() for r in second]
    assert len(first) == 7


# --- evidence mapping -----------------------------------------------------------

def test_map_evidence_exact_substring():
    anchors = _anchors()
    spans, coverage = map_evidence("climbs for ten epochs", anchors)
    assert coverage == 1.0
    span = spans[0]
    para = anchors[0].text
    assert para[span.start:span.end].lower() == "climbs for ten epochs"


def test_map_evidence_partial_and_missing():
    anchors = _anchors()
    _, coverage = map_evidence("climbs for ten epochs but somewhere else entirely",
                               anchors)
    assert 0 < coverage < 1
    spans, coverage = map_evidence("zzz qqq xxx", anchors)
    assert coverage < 0.5


# --- quality filter -------------------------------------------------------------

def _filter_one(record, grounded=GROUNDED_OK):
    backend = ScriptedChatBackend([grounded])
    kept, reports = filter_candidates([record], backend)
    return kept, reports[0]


@pytest.mark.parametrize("n_words,expected", [(19, False), (20, True),
                                              (120, True), (121, False)])
def test_filter_length_boundaries(n_words, expected):
    answer = " ".join(["grounded"] * n_words)
    record = make_qud(answer=answer)
    kept, report = _filter_one(record)
    assert report.length_ok is expected
    assert report.kept is expected
    assert bool(kept) is expected


def test_filter_requires_grounding():
    record = make_qud()
    kept, report = _filter_one(record, grounded=GROUNDED_NO)
    assert report.grounded is False and not kept


def test_filter_requires_figure_reference():
    record = make_qud(question="Why is the sky blue at noon?")
    kept, report = _filter_one(record)
    assert report.references_figure is False and not kept


def test_filter_visual_term_suffices():
    record = make_qud(question="Why does the left panel dip before noon?")
    kept, report = _filter_one(record)
    assert report.references_figure is True and kept


def test_filter_dedup_jaccard_oracle():
    # Hand-computed oracle: token sets share 17 of 20 union members -> 0.85.
    shared = [f"tok{i}" for i in range(17)]
    q1 = " ".join(shared + ["alpha"]) + " figure"
    q2 = " ".join(shared + ["beta", "gamma"]) + " figure"
    t1, t2 = question_tokens(q1), question_tokens(q2)
    assert len(t1 & t2) == 18 and len(t1 | t2) == 21  # "figure" joins both sets

    # rebuild exactly 17/20: drop the shared visual term from one side
    q1 = " ".join(shared + ["alpha"])
    q2 = " ".join(shared + ["beta", "gamma"])
    t1, t2 = question_tokens(q1), question_tokens(q2)
    assert jaccard(t1, t2) == pytest.approx(17 / 20) == pytest.approx(0.85)

    r1 = make_qud(question=q1 + " figure")
    r2 = make_qud(question=q2 + " figure")
    backend = ScriptedChatBackend([GROUNDED_OK])
    kept, reports = filter_candidates([r1, r2], backend)
    assert reports[0].kept is True
    assert reports[1].duplicate_of == r1.qud_id
    assert [r.qud_id for r in kept] == [r1.qud_id]


def test_filter_dedup_only_within_figure():
    r1 = make_qud(figure_label="fig:a")
    r2 = make_qud(figure_label="fig:b")
    backend = ScriptedChatBackend([GROUNDED_OK])
    kept, reports = filter_candidates([r1, r2], backend)
    assert len(kept) == 2
    assert all(r.duplicate_of is None for r in reports)


def test_filter_idempotent():
    records = [make_qud(question=f"Why does series {i} dip in the figure?")
               for i in range(4)]
    records.append(make_qud(answer="too short"))
    backend = ScriptedChatBackend([GROUNDED_OK])
    kept, _ = filter_candidates(records, backend)
    kept_again, reports = filter_candidates(kept, ScriptedChatBackend([GROUNDED_OK]))
    assert [r.qud_id for r in kept_again] == [r.qud_id for r in kept]
    assert all(r.kept for r in reports)


def test_filter_report_invariant():
    records = [make_qud(), make_qud(answer="short")]
    backend = ScriptedChatBackend([GROUNDED_OK])
    _, reports = filter_candidates(records, backend)
    for report in reports:
        assert report.kept == (report.length_ok and report.grounded
                               and report.references_figure
                               and report.duplicate_of is None)


# --- rephrase augmentation -------------------------------------------------------

def test_rephrase_nominal():
    parent = make_qud()
    variants_payload = json.dumps([
        {"question": "In what way does the accuracy curve plateau?",
         "answer": "It plateaus once attention entropy stabilizes after ten epochs."},
        {"question": "What explains the plateau of the accuracy curve?",
         "answer": "The plateau reflects stabilized attention entropy: after ten "
                   "epochs the classifier attends to the same cue tokens, so "
                   "further training leaves predictions unchanged across forums "
                   "and thread lengths."},
    ])
    backend = ScriptedChatBackend([variants_payload, GROUNDED_OK, GROUNDED_OK])
    variants = rephrase_augment(parent, backend)
    assert len(variants) == 2
    for variant in variants:
        assert variant.provenance == "rephrase_variant"
        assert variant.parent_id == parent.qud_id
        assert variant.qud_type == parent.qud_type


def test_rephrase_variant_rejected_by_grounding():
    parent = make_qud()
    variants_payload = json.dumps([
        {"question": "In what way does it plateau?",
         "answer": "Please see the figure."},
        {"question": "What explains the plateau?",
         "answer": "Entropy stabilizes after ten epochs of training."},
    ])
    backend = ScriptedChatBackend([variants_payload, GROUNDED_NO, GROUNDED_OK])
    variants = rephrase_augment(parent, backend)
    assert len(variants) == 1
    assert variants[0].question == "What explains the plateau?"


def test_rephrase_zero_variants():
    parent = make_qud()
    backend = ScriptedChatBackend(["should never be called"])
    assert rephrase_augment(parent, backend, n_variants=0) == []
    assert backend.calls == []


def test_word_count_is_whitespace_based():
    assert word_count("one two  three") == 3
    assert word_count("") == 0


def test_filter_report_roundtrip():
    from mqud.genpipe import FilterReport

    report = FilterReport(qud_id="q1", length_ok=True, grounded=False,
                          references_figure=True, duplicate_of="q0", kept=False)
    assert FilterReport.from_json(report.to_json()) == report
