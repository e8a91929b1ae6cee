from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mqud.corpus import (
    DIMENSION_VOCAB,
    QUD_TYPES,
    AnnotationRecord,
    CorpusStore,
    QudRecord,
    SftFilterPolicy,
    SplitManifest,
    build_sft_export,
    dimension_schema,
    make_qud_id,
    normalize_question,
    stratified_sample,
)
from mqud.errors import DuplicateKey, EmptyExport, InvariantViolation
from tests.conftest import make_annotation, make_qud


def test_qud_id_stable_under_whitespace_and_case():
    a = make_qud_id("p", "f", "Why does  the curve\nplateau?")
    b = make_qud_id("p", "f", "why does the curve plateau?")
    assert a == b
    assert normalize_question("A  B\tC") == "a b c"


def test_qud_roundtrip():
    record = make_qud()
    assert QudRecord.from_json(record.to_json()).to_json() == record.to_json()


def test_annotation_roundtrip():
    record = make_annotation("q1", notes="fine")
    assert AnnotationRecord.from_json(record.to_json()).to_json() == record.to_json()


@settings(max_examples=50, deadline=None)
@given(
    qud_type=st.sampled_from(QUD_TYPES),
    difficulty=st.sampled_from(("medium", "hard")),
    question=st.text(min_size=1, max_size=80),
)
def test_qud_roundtrip_property(qud_type, difficulty, question):
    record = make_qud(question="Why " + question + "?", qud_type=qud_type,
                      difficulty=difficulty)
    assert QudRecord.from_json(record.to_json()) == record


@settings(max_examples=50, deadline=None)
@given(values=st.fixed_dictionaries(
    {dim: st.sampled_from(vocab) for dim, vocab in DIMENSION_VOCAB.items()}))
def test_annotation_roundtrip_property(values):
    record = make_annotation("q1", **values)
    assert AnnotationRecord.from_json(record.to_json()) == record


def test_qud_invariants():
    with pytest.raises(InvariantViolation):
        make_qud(qud_type="verification").validate()
    variant_without_parent = make_qud(provenance="rephrase_variant")
    with pytest.raises(InvariantViolation):
        variant_without_parent.validate()
    bad_span = make_qud()
    bad_span.extractive_evidence[0].paragraph = 9
    with pytest.raises(InvariantViolation):
        bad_span.validate()
    over_long = make_qud()
    over_long.extractive_evidence[0].end = 10_000
    with pytest.raises(InvariantViolation):
        over_long.validate()


def test_annotation_vocabulary_enforced():
    record = make_annotation("q1", figure_type="pipeline")
    with pytest.raises(InvariantViolation):
        record.validate()


def test_store_append_and_replay(tmp_path):
    store = CorpusStore(tmp_path)
    record = make_qud()
    receipt = store.store_append(record)
    assert receipt.offset == 0
    annotation = make_annotation(record.qud_id)
    receipt2 = store.store_append(annotation)
    assert receipt2.offset == 0

    with pytest.raises(DuplicateKey):
        store.store_append(record)
    with pytest.raises(DuplicateKey):
        store.store_append(make_annotation(record.qud_id))  # same annotator

    store.store_append(make_annotation(record.qud_id, annotator_id="ann-2"))

    reopened = CorpusStore(tmp_path)
    assert reopened.quds.keys() == store.quds.keys()
    assert reopened.annotations.keys() == store.annotations.keys()
    assert reopened.annotations_for(record.qud_id)[0] == annotation


def test_store_rejects_invalid_record(tmp_path):
    store = CorpusStore(tmp_path)
    bad = make_annotation("q1", salience="maybe")
    with pytest.raises(InvariantViolation):
        store.store_append(bad)
    assert not store.annotations_path.exists()  # nothing written


def test_split_manifest_soundness():
    q_train = make_qud(question="Why one?", paper_id="p-train")
    q_val = make_qud(question="Why two?", paper_id="p-train")
    q_disjoint = make_qud(question="Why three?", paper_id="p-held")
    by_id = {q.qud_id: q for q in (q_train, q_val, q_disjoint)}
    manifest = SplitManifest(train=[q_train.qud_id], validation=[q_val.qud_id],
                             eval_disjoint=[q_disjoint.qud_id],
                             disjoint_paper_ids=["p-held"])
    manifest.validate(by_id)

    overlapping = SplitManifest(train=[q_train.qud_id], validation=[q_train.qud_id])
    with pytest.raises(InvariantViolation):
        overlapping.validate()

    leaky = SplitManifest(train=[q_disjoint.qud_id], disjoint_paper_ids=["p-held"])
    with pytest.raises(InvariantViolation):
        leaky.validate(by_id)


# --- SFT export -----------------------------------------------------------------

def _pool(n_parents=6):
    quds, annotations = [], []
    types = list(QUD_TYPES)
    for i in range(n_parents):
        parent = make_qud(question=f"Why does effect {i} appear in the figure?",
                          qud_type=types[i % len(types)])
        quds.append(parent)
        correct = i % 3 != 0  # every third parent rated not acceptable
        annotations.append(make_annotation(
            parent.qud_id,
            answer_correct="acceptable" if correct else "not_acceptable"))
        variant = make_qud(
            question=f"What explains effect {i} shown in the figure?",
            qud_type=parent.qud_type, provenance="rephrase_variant",
            parent_id=parent.qud_id)
        quds.append(variant)
    return quds, annotations


def test_export_filters_on_latest_human_annotation():
    quds, annotations = _pool()
    export = build_sft_export(quds, annotations,
                              SftFilterPolicy(validation_size=0, seed=1))
    # parents 1,2,4,5 retained; each brings one surviving variant
    assert len(export.retained_parents) == 4
    assert len(export.lines) == 8
    targets = {line["target"] for line in export.lines}
    assert any(t.startswith("What explains") for t in targets)
    for line in export.lines:
        assert set(line["input"]) == {"title", "abstract", "caption",
                                      "image_ref", "figure_label"}


def test_export_respects_figure_useful_policy():
    quds, annotations = _pool()
    annotations[2] = make_annotation(annotations[2].qud_id,
                                     figure_useful="not_useful")
    strict = build_sft_export(quds, annotations,
                              SftFilterPolicy(validation_size=0, seed=1))
    lax = build_sft_export(quds, annotations,
                           SftFilterPolicy(validation_size=0, seed=1,
                                           require_figure_useful=False))
    assert len(strict.retained_parents) == len(lax.retained_parents) - 1


def test_export_empty():
    quds, annotations = _pool()
    for a in annotations:
        a.answer_correct = "not_acceptable"
    with pytest.raises(EmptyExport):
        build_sft_export(quds, annotations)


def test_export_validation_split_seeded():
    quds, annotations = _pool(n_parents=12)
    policy = SftFilterPolicy(validation_size=5, seed=42)
    one = build_sft_export(quds, annotations, policy)
    two = build_sft_export(quds, annotations, policy)
    assert [l["qud_id"] for l in one.validation] == [l["qud_id"] for l in two.validation]
    assert len(one.validation) == 5
    assert len(one.train) + len(one.validation) == len(one.lines)
    ids = {l["qud_id"] for l in one.lines}
    assert len(ids) == len(one.lines)  # no qud in two splits


def test_stratified_sample_quotas():
    groups = {"a": [f"a{i}" for i in range(8)], "b": [f"b{i}" for i in range(2)]}
    picked = stratified_sample(groups, 5, seed=3)
    assert len(picked) == 5
    assert 1 <= sum(1 for p in picked if p.startswith("b")) <= 2


def test_dimension_schema_mirrors_vocab():
    schema = dimension_schema()
    assert [d["name"] for d in schema["dimensions"]] == list(DIMENSION_VOCAB)
    for entry in schema["dimensions"]:
        assert tuple(entry["values"]) == DIMENSION_VOCAB[entry["name"]]


def test_split_manifest_roundtrip():
    manifest = SplitManifest(train=["a"], validation=["b"], eval_within=["c"],
                             eval_disjoint=["d"], disjoint_paper_ids=["p9"])
    assert SplitManifest.from_json(manifest.to_json()) == manifest
