from __future__ import annotations

from pathlib import Path

import pytest

from mqud.corpus import (
    AnchorParagraph,
    AnnotationRecord,
    EvidenceSpan,
    QudRecord,
    TriggerContext,
    make_qud_id,
)

FIXTURES = Path(__file__).parent / "fixtures"
PAPERS_DIR = FIXTURES / "papers"


def make_context(paper_id="paper-x", figure_label="fig:a", image_ref="deadbeef"):
    return TriggerContext(
        paper_id=paper_id, figure_label=figure_label,
        title="A Study of Synthetic Curves",
        abstract="We analyze synthetic accuracy curves under varied settings.",
        caption="Accuracy curves across epochs for two baseline models.",
        image_ref=image_ref,
    )


def make_qud(question="Why does the accuracy curve in the figure plateau after ten epochs?",
             qud_type="cause", paper_id="paper-x", figure_label="fig:a",
             answer=None, provenance="generated", parent_id=None,
             difficulty="medium"):
    ctx = make_context(paper_id=paper_id, figure_label=figure_label)
    anchor = AnchorParagraph(
        section=2, paragraph=1,
        text="The accuracy curve plateaus after ten epochs because attention "
             "entropy stabilizes. The baseline saturates earlier at a lower level.")
    answer = answer or ("The plateau appears because attention entropy stabilizes "
                        "after ten epochs, so additional training no longer changes "
                        "which tokens the classifier attends to in practice.")
    return QudRecord(
        qud_id=make_qud_id(paper_id, figure_label, question),
        context=ctx,
        question=question,
        abstractive_answer=answer,
        extractive_evidence=[EvidenceSpan(section=2, paragraph=1, start=0, end=40)],
        anchor_paragraphs=[anchor],
        qud_type=qud_type,
        difficulty=difficulty,
        provenance=provenance,
        parent_id=parent_id,
    )


def make_annotation(qud_id, annotator_id="ann-1", source="human_expert",
                    salience="salient", figure_useful="useful",
                    answered_by_figure="no", answer_correct="acceptable",
                    answer_quality="high", figure_type="result",
                    q_grammar="acceptable", notes=""):
    return AnnotationRecord(
        qud_id=qud_id, annotator_id=annotator_id, source=source,
        salience=salience, figure_useful=figure_useful,
        answered_by_figure=answered_by_figure, answer_correct=answer_correct,
        answer_quality=answer_quality, figure_type=figure_type,
        q_grammar=q_grammar, notes=notes,
    )


@pytest.fixture()
def paper_a():
    from mqud.paperstore import mark_eligibility, parse_paper

    return mark_eligibility(parse_paper(PAPERS_DIR / "paper-a"))


@pytest.fixture()
def paper_b():
    from mqud.paperstore import mark_eligibility, parse_paper

    return mark_eligibility(parse_paper(PAPERS_DIR / "paper-b"))
