from __future__ import annotations

import json

import pytest

from mqud.cli import main
from mqud.corpus import CorpusStore
from mqud.jsonio import load_jsonl, sha256_file
from tests.conftest import PAPERS_DIR, make_annotation
from tests.pipeline import STAGE_OUTPUTS, golden_hashes, run_offline_pipeline


def test_offline_pipeline_matches_golden(tmp_path):
    corpus = run_offline_pipeline(tmp_path)
    expected = golden_hashes()
    for name in STAGE_OUTPUTS:
        assert sha256_file(corpus / name) == expected[name], name


def test_offline_pipeline_byte_identical_runs(tmp_path):
    first = run_offline_pipeline(tmp_path / "one")
    second = run_offline_pipeline(tmp_path / "two")
    for name in STAGE_OUTPUTS:
        assert (first / name).read_bytes() == (second / name).read_bytes(), name


def test_run_manifest_chain(tmp_path):
    corpus = run_offline_pipeline(tmp_path)
    entries = load_jsonl(corpus / "run_manifest.jsonl")
    assert [e["command"] for e in entries] == \
        ["ingest", "generate", "filter", "judge", "diagnose"]
    diagnose = entries[-1]
    assert diagnose["backend_mode"] == "replay"
    assert diagnose["seed"] == 7
    assert any(k.endswith("report_base.json") for k in diagnose["outputs"])
    for entry in entries:
        assert entry["started_at"] <= entry["finished_at"]


def test_exit_code_config_error(tmp_path):
    # filter before generate: missing candidates file
    code = main(["filter", "--corpus", str(tmp_path / "corpus"),
                 "--backend", "mock"])
    assert code == 2


def test_exit_code_backend_error(tmp_path):
    corpus = tmp_path / "corpus"
    assert main(["ingest", str(PAPERS_DIR), "--out", str(corpus)]) == 0
    empty_cache = tmp_path / "empty.jsonl"
    empty_cache.write_text("", "utf-8")
    code = main(["generate", "--corpus", str(corpus), "--backend", "replay",
                 "--cache", str(empty_cache)])
    assert code == 3


def test_exit_code_data_error(tmp_path):
    corpus = run_offline_pipeline(tmp_path)
    # no annotations -> nothing passes the export policy
    code = main(["export-sft", "--corpus", str(corpus)])
    assert code == 4


def test_replay_recording_conflict(tmp_path):
    corpus = run_offline_pipeline(tmp_path)
    code = main(["generate", "--corpus", str(corpus), "--backend", "replay",
                 "--cache", str(corpus / "x.jsonl"), "--record"])
    assert code == 2


def _annotate_all(corpus, answer_correct="acceptable"):
    store = CorpusStore(corpus)
    for i, record in enumerate(store.quds.values()):
        store.store_append(make_annotation(
            record.qud_id, annotator_id="expert-1",
            answer_correct=answer_correct,
            figure_useful="useful" if i % 4 else "not_useful",
            answered_by_figure="yes" if i % 2 else "no",
            answer_quality="high" if i % 3 else "low"))
    return store


def test_augment_then_export(tmp_path):
    corpus = run_offline_pipeline(tmp_path)
    _annotate_all(corpus)
    assert main(["augment", "--corpus", str(corpus), "--backend", "mock"]) == 0
    store = CorpusStore(corpus)
    variants = [q for q in store.quds.values() if q.provenance == "rephrase_variant"]
    assert variants, "augment should add variants for correct-rated parents"
    for variant in variants:
        assert variant.parent_id in store.quds

    assert main(["export-sft", "--corpus", str(corpus), "--validation-size", "3",
                 "--seed", "5"]) == 0
    lines = load_jsonl(corpus / "sft_export.jsonl")
    assert {line["split"] for line in lines} == {"train", "validation"}
    assert sum(1 for line in lines if line["split"] == "validation") == 3
    splits = json.loads((corpus / "splits.json").read_text("utf-8"))
    assert set(splits["validation"]) == {
        line["qud_id"] for line in lines if line["split"] == "validation"}


def test_analysis_commands_run(tmp_path, capsys):
    corpus = run_offline_pipeline(tmp_path)
    _annotate_all(corpus)

    assert main(["stats", "--corpus", str(corpus),
                 "--json-out", str(tmp_path / "stats.json")]) == 0
    stats = json.loads((tmp_path / "stats.json").read_text("utf-8"))
    assert stats["totals"]["quds"] == 9
    assert stats["totals"]["figures"] == 3
    capsys.readouterr()

    assert main(["clusters", "--corpus", str(corpus),
                 "--json-out", str(tmp_path / "clusters.json")]) == 0
    clusters = json.loads((tmp_path / "clusters.json").read_text("utf-8"))
    assert {p["qud_type"] for p in clusters["points"]} == \
        {"cause", "consequence", "concept"}
    capsys.readouterr()

    assert main(["correlate", "--corpus", str(corpus),
                 "--json-out", str(tmp_path / "corr.json")]) == 0
    corr = json.loads((tmp_path / "corr.json").read_text("utf-8"))
    assert -1 <= corr["rho_useful"] <= 1

    assert main(["depth", "--corpus", str(corpus),
                 "--json-out", str(tmp_path / "depth.json")]) == 0
    depth = json.loads((tmp_path / "depth.json").read_text("utf-8"))
    assert depth["n"] == 9
    assert sum(depth["counts"].values()) == 9


def test_validate_judge_command(tmp_path, capsys):
    corpus = run_offline_pipeline(tmp_path)
    _annotate_all(corpus)
    assert main(["validate-judge", "--corpus", str(corpus), "--agreement",
                 "--json-out", str(tmp_path / "vj.json")]) == 0
    report = json.loads((tmp_path / "vj.json").read_text("utf-8"))
    assert report["n"] == 9
    assert 0.0 <= report["f1"] <= 1.0
    assert "median_weighted_agreement" in report


def test_judge_split_filter(tmp_path):
    corpus = run_offline_pipeline(tmp_path)
    _annotate_all(corpus)
    assert main(["export-sft", "--corpus", str(corpus), "--validation-size", "2",
                 "--seed", "1"]) == 0
    assert main(["judge", "--corpus", str(corpus), "--backend", "mock",
                 "--split", "validation"]) == 0
    verdicts = load_jsonl(corpus / "judge_verdicts.jsonl")
    assert len(verdicts) == 2


def test_depth_on_question_file(tmp_path, capsys):
    path = tmp_path / "questions.txt"
    path.write_text("Why does it drop?\nHow many runs are shown?\n", "utf-8")
    assert main(["depth", "--questions", str(path),
                 "--json-out", str(tmp_path / "d.json")]) == 0
    report = json.loads((tmp_path / "d.json").read_text("utf-8"))
    assert report["counts"]["integration_q"] == 1
    assert report["counts"]["extraction_q"] == 1


def test_generate_parallel_workers_identical_output(tmp_path):
    corpus_a = tmp_path / "a" / "corpus"
    corpus_b = tmp_path / "b" / "corpus"
    for corpus in (corpus_a, corpus_b):
        assert main(["ingest", str(PAPERS_DIR), "--out", str(corpus)]) == 0
    assert main(["generate", "--corpus", str(corpus_a), "--backend", "mock",
                 "--n", "7"]) == 0
    assert main(["generate", "--corpus", str(corpus_b), "--backend", "mock",
                 "--n", "7", "--workers", "3"]) == 0
    assert (corpus_a / "candidates.jsonl").read_bytes() == \
        (corpus_b / "candidates.jsonl").read_bytes()


def test_config_file_with_flag_override(tmp_path):
    corpus = tmp_path / "corpus"
    assert main(["ingest", str(PAPERS_DIR), "--out", str(corpus)]) == 0
    config = tmp_path / "mqud.yaml"
    config.write_text("backend: mock\nn: 5\n", "utf-8")

    # config supplies backend and n
    assert main(["--config", str(config), "generate", "--corpus", str(corpus)]) == 0
    per_figure = len(load_jsonl(corpus / "candidates.jsonl")) / 3
    assert per_figure == 5

    # explicit flag beats the config value
    assert main(["--config", str(config), "generate", "--corpus", str(corpus),
                 "--n", "7"]) == 0
    per_figure = len(load_jsonl(corpus / "candidates.jsonl")) / 3
    assert per_figure == 7


def test_correlate_and_depth_csv(tmp_path):
    corpus = run_offline_pipeline(tmp_path)
    _annotate_all(corpus)
    csv_path = tmp_path / "points.csv"
    assert main(["correlate", "--corpus", str(corpus), "--csv", str(csv_path)]) == 0
    rows = csv_path.read_text("utf-8").strip().splitlines()
    assert rows[0] == "reference_count,useful,quality"
    assert len(rows) == 10  # header + 9 annotated QUDs

    depth_csv = tmp_path / "depth.csv"
    assert main(["depth", "--corpus", str(corpus), "--csv", str(depth_csv)]) == 0
    assert depth_csv.read_text("utf-8").startswith("bin,count,pct")


def test_manifest_traces_inputs(tmp_path):
    corpus = run_offline_pipeline(tmp_path)
    entries = load_jsonl(corpus / "run_manifest.jsonl")
    by_command = {e["command"]: e for e in entries}
    # the filter stage's input hash equals the generate stage's output hash
    candidates = str(corpus / "candidates.jsonl")
    assert by_command["filter"]["inputs"][candidates] == \
        by_command["generate"]["outputs"][candidates]
    assert by_command["ingest"]["inputs"]  # source tree hashed
