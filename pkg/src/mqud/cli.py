"""Command-line entry point.

Pipeline: ingest -> generate -> filter -> augment -> annotate/judge ->
export-sft -> diagnose -> analyze. Every command appends one entry to the run
manifest (inputs, outputs, seed, backend mode) so any output file traces back
to exact inputs. Exit codes: 0 ok, 2 config, 3 backend, 4 data invariant.
"""

from __future__ import annotations

import argparse
import base64
import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path

import yaml

from . import analysis, diagnostics, genpipe, judge as judge_mod
from .backends import make_chat_backend, make_score_backend, parallel_map
from .corpus import (
    CorpusStore,
    QudRecord,
    SftFilterPolicy,
    TriggerContext,
    build_sft_export,
    split_manifest_from_export,
)
from .errors import ConfigError, EmptyInput, MqudError
from .jsonio import canonical_dumps, load_jsonl, save_jsonl, sha256_file, sha256_text
from .paperstore import (
    AssetManifest,
    PaperRecord,
    anchor_paragraph_units,
    ingest_corpus,
    load_papers,
)

logger = logging.getLogger(__name__)

RUN_MANIFEST = "run_manifest.jsonl"


# =============================================================================
# Shared plumbing
# =============================================================================

def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        payload = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(payload, dict):
        raise ConfigError("config file must hold a mapping")
    return payload


def _effective(args: argparse.Namespace, config: dict, key: str, default=None):
    """Flag wins over config file wins over default."""
    value = getattr(args, key, None)
    if value is not None:
        return value
    return config.get(key, default)


def _write_manifest(root: Path, command: str, config: dict,
                    inputs: dict[str, str], outputs: dict[str, str],
                    seed, backend_mode, started_at: str) -> None:
    entry = {
        "schema": "mqud/1",
        "command": command,
        "config": config,
        "inputs": inputs,
        "outputs": outputs,
        "seed": seed,
        "backend_mode": backend_mode,
        "started_at": started_at,
        "finished_at": datetime.now(timezone.utc).isoformat(),
    }
    root.mkdir(parents=True, exist_ok=True)
    with open(root / RUN_MANIFEST, "a", encoding="utf-8") as f:
        f.write(canonical_dumps(entry) + "\n")


def _hash_files(paths: list[Path]) -> dict[str, str]:
    return {str(p): sha256_file(p) for p in paths if p.exists()}


def _corpus_paths(corpus: Path) -> dict[str, Path]:
    return {
        "papers": corpus / "papers.jsonl",
        "manifest": corpus / "assets.manifest",
        "candidates": corpus / "candidates.jsonl",
        "quds": corpus / "quds.jsonl",
        "filter_reports": corpus / "filter_reports.jsonl",
        "annotations": corpus / "annotations.jsonl",
        "verdicts": corpus / "judge_verdicts.jsonl",
        "splits": corpus / "splits.json",
        "sft": corpus / "sft_export.jsonl",
    }


def _require(path: Path, hint: str) -> Path:
    if not path.exists():
        raise ConfigError(f"{path} not found; run `mqud {hint}` first")
    return path


def _load_corpus_inputs(corpus: Path) -> tuple[list[PaperRecord], AssetManifest]:
    paths = _corpus_paths(corpus)
    papers = load_papers(_require(paths["papers"], "ingest"))
    manifest = AssetManifest.load(_require(paths["manifest"], "ingest"))
    return papers, manifest


def _image_b64(manifest: AssetManifest, digest: str | None) -> str | None:
    if not digest or digest == AssetManifest.MISSING:
        return None
    data = manifest.bytes_for(digest)
    return base64.b64encode(data).decode("ascii") if data is not None else None


def _chat_backend(args, config, corpus: Path):
    mode = _effective(args, config, "backend", "mock")
    cache = _effective(args, config, "cache") or str(corpus / "backend_cache.jsonl")
    record = bool(getattr(args, "record", False))
    if mode == "replay" and record:
        raise ConfigError("--record makes no sense with --backend replay")
    return mode, make_chat_backend(mode, cache_path=Path(cache),
                                   base_url=_effective(args, config, "backend_url"),
                                   record=record)


def _score_backend(args, config, corpus: Path):
    mode = _effective(args, config, "backend", "mock")
    cache = _effective(args, config, "cache") or str(corpus / "scoring_cache.jsonl")
    record = bool(getattr(args, "record", False))
    if mode == "replay" and record:
        raise ConfigError("--record makes no sense with --backend replay")
    return mode, make_score_backend(mode, cache_path=Path(cache),
                                    base_url=_effective(args, config, "backend_url"),
                                    record=record)


# =============================================================================
# Commands
# =============================================================================

def cmd_ingest(args, config) -> dict:
    source = Path(args.source)
    out = Path(_effective(args, config, "out", str(source.parent / "corpus")))
    papers, _ = ingest_corpus(source, out)
    print(f"ingested {len(papers)} paper(s) -> {out}")
    source_files = sorted(p for p in source.rglob("*") if p.is_file())
    return {"root": out, "outputs": [out / "papers.jsonl", out / "assets.manifest"],
            "input_files": source_files}


def cmd_generate(args, config) -> dict:
    corpus = Path(args.corpus)
    papers, manifest = _load_corpus_inputs(corpus)
    mode, backend = _chat_backend(args, config, corpus)
    n = int(_effective(args, config, "n", 5))
    window = int(_effective(args, config, "window", 1))

    jobs = []
    for paper in papers:
        eligible = paper.eligible_figures()
        for figure in eligible:
            anchors = anchor_paragraph_units(paper, figure.label, window=window)
            if not anchors:
                logger.warning("%s/%s has no anchor paragraphs; skipped",
                               paper.paper_id, figure.label)
                continue
            rel = f"{paper.paper_id}/{figure.image_path}" if figure.image_path else None
            digest = manifest.hash_for(rel) if rel else None
            if digest == AssetManifest.MISSING:
                digest = None
            ctx = TriggerContext(paper_id=paper.paper_id, figure_label=figure.label,
                                 title=paper.title, abstract=paper.abstract,
                                 caption=figure.caption, image_ref=digest)
            others = "; ".join(f"{f.label}: {f.caption}" for f in eligible
                               if f.label != figure.label) or "none"
            jobs.append((figure, ctx, anchors, others, digest))

    def run_job(job):
        figure, ctx, anchors, others, digest = job
        return genpipe.generate_candidates(
            figure, ctx, anchors, n=n, backend=backend,
            image_b64=_image_b64(manifest, digest), other_figures=others)

    batches = parallel_map(run_job, jobs,
                           workers=int(_effective(args, config, "workers", 1)),
                           rate=_effective(args, config, "rate"))
    candidates: list[QudRecord] = [record for batch in batches for record in batch]
    save_jsonl(corpus / "candidates.jsonl", [c.to_json() for c in candidates])
    print(f"generated {len(candidates)} candidate(s) over "
          f"{sum(len(p.eligible_figures()) for p in papers)} eligible figure(s)")
    paths = _corpus_paths(corpus)
    return {"root": corpus, "outputs": [corpus / "candidates.jsonl"],
            "input_files": [paths["papers"], paths["manifest"]],
            "backend_mode": mode}


def cmd_filter(args, config) -> dict:
    corpus = Path(args.corpus)
    paths = _corpus_paths(corpus)
    records = [QudRecord.from_json(obj)
               for obj in load_jsonl(_require(paths["candidates"], "generate"))]
    mode, backend = _chat_backend(args, config, corpus)
    kept, reports = genpipe.filter_candidates(records, backend)
    save_jsonl(paths["quds"], [r.to_json() for r in kept])
    save_jsonl(paths["filter_reports"], [r.to_json() for r in reports])
    print(f"kept {len(kept)} of {len(records)} candidate(s)")
    return {"root": corpus, "outputs": [paths["quds"], paths["filter_reports"]],
            "input_files": [paths["candidates"]], "backend_mode": mode}


def cmd_augment(args, config) -> dict:
    corpus = Path(args.corpus)
    store = CorpusStore(corpus)
    mode, backend = _chat_backend(args, config, corpus)
    n_variants = int(_effective(args, config, "n_variants", 2))
    added = 0
    for record in list(store.quds.values()):
        if record.provenance != "generated":
            continue
        humans = store.annotations_for(record.qud_id, source="human_expert")
        if not humans or humans[-1].answer_correct != "acceptable":
            continue
        for variant in genpipe.rephrase_augment(record, backend, n_variants=n_variants):
            if variant.qud_id not in store.quds:
                store.store_append(variant)
                added += 1
    print(f"appended {added} rephrase variant(s)")
    return {"root": corpus, "outputs": [store.quds_path],
            "input_files": [store.annotations_path], "backend_mode": mode}


def cmd_judge(args, config) -> dict:
    corpus = Path(args.corpus)
    paths = _corpus_paths(corpus)
    _, manifest = _load_corpus_inputs(corpus)
    records = [QudRecord.from_json(obj)
               for obj in load_jsonl(_require(paths["quds"], "filter"))]
    records = _filter_split(records, args, paths)
    mode, backend = _chat_backend(args, config, corpus)

    def run_one(record):
        image = _image_b64(manifest, record.context.image_ref)
        if record.context.image_ref and image is None:
            logger.warning("%s: image bytes unavailable; judging text-only",
                           record.qud_id)
        return judge_mod.judge_qud(record, backend, image_b64=image)

    verdicts = parallel_map(run_one, records,
                            workers=int(_effective(args, config, "workers", 1)),
                            rate=_effective(args, config, "rate"))
    save_jsonl(paths["verdicts"], [v.to_json() for v in verdicts])
    print(f"judged {len(verdicts)} QUD(s)")
    return {"root": corpus, "outputs": [paths["verdicts"]],
            "input_files": [paths["quds"]], "backend_mode": mode}


def _filter_split(records: list[QudRecord], args, paths) -> list[QudRecord]:
    split = getattr(args, "split", None)
    if not split:
        return records
    manifest = json.loads(_require(paths["splits"], "export-sft").read_text("utf-8"))
    if split not in ("train", "validation", "eval_within", "eval_disjoint"):
        raise ConfigError(f"unknown split {split!r}")
    wanted = set(manifest[split])
    return [r for r in records if r.qud_id in wanted]


def cmd_export_sft(args, config) -> dict:
    corpus = Path(args.corpus)
    store = CorpusStore(corpus)
    policy = SftFilterPolicy(
        require_figure_useful=not bool(getattr(args, "no_require_figure_useful", False)),
        validation_size=int(_effective(args, config, "validation_size", 51)),
        seed=int(_effective(args, config, "seed", 13)),
    )
    export = build_sft_export(list(store.quds.values()),
                              list(store.annotations.values()), policy)
    paths = _corpus_paths(corpus)
    save_jsonl(paths["sft"], export.lines)
    manifest = split_manifest_from_export(export, store.quds)
    paths["splits"].write_text(canonical_dumps(manifest.to_json()) + "\n", "utf-8")
    print(f"exported {len(export.train)} train / {len(export.validation)} validation")
    return {"root": corpus, "outputs": [paths["sft"], paths["splits"]],
            "input_files": [paths["quds"], paths["annotations"]],
            "seed": policy.seed}


def cmd_diagnose(args, config) -> dict:
    corpus = Path(args.corpus)
    paths = _corpus_paths(corpus)
    papers, manifest = _load_corpus_inputs(corpus)
    papers_by_id = {p.paper_id: p for p in papers}
    records = [QudRecord.from_json(obj)
               for obj in load_jsonl(_require(paths["quds"], "filter"))]
    records = _filter_split(records, args, paths)
    if not records:
        raise EmptyInput("no QUDs to diagnose")

    conditions = tuple((_effective(args, config, "conditions", "mm,to,swap")).split(","))
    for needed in ("mm", "to"):
        if needed not in conditions:
            raise ConfigError(f"conditions must include {needed!r}")
    mode, backend = _score_backend(args, config, corpus)
    model_tag = _effective(args, config, "model_tag", "model")
    seed = int(_effective(args, config, "seed", 0))
    resamples = int(_effective(args, config, "resamples", 10_000))

    def score_one(record):
        paper = papers_by_id[record.context.paper_id]
        swap_figure = None
        swap_image = None
        if "swap" in conditions:
            swap_figure = diagnostics.select_swap_partner(paper, record.context.figure_label)
            if swap_figure is not None:
                rel = f"{paper.paper_id}/{swap_figure.image_path}" if swap_figure.image_path else None
                swap_image = _image_b64(manifest, manifest.hash_for(rel) if rel else None)
                if swap_image is None:
                    swap_figure = None
        return diagnostics.score_conditions(
            record, swap_figure, backend,
            image_b64=_image_b64(manifest, record.context.image_ref),
            swap_image_b64=swap_image, model_tag=model_tag)

    traces = parallel_map(score_one, records,
                          workers=int(_effective(args, config, "workers", 1)),
                          rate=_effective(args, config, "rate"))

    traces_path = corpus / f"traces_{model_tag}.jsonl"
    save_jsonl(traces_path, [t.to_json() for t in traces])
    report = diagnostics.aggregate(traces, resamples=resamples, seed=seed)
    report_path = corpus / f"report_{model_tag}.json"
    report_path.write_text(canonical_dumps(report.to_json()) + "\n", "utf-8")
    _print_diagnostic_report(report)
    cache = _effective(args, config, "cache")
    return {"root": corpus, "outputs": [traces_path, report_path],
            "input_files": [paths["quds"], paths["papers"]]
            + ([Path(cache)] if cache else []),
            "backend_mode": mode, "seed": seed}


def _print_diagnostic_report(report: diagnostics.DiagnosticReport) -> None:
    print(f"model {report.model_tag}  n={report.n}  (+{report.n_degenerate} degenerate)")
    print(f"  rIG   {report.rig_mean:+.3f}  CI [{report.rig_ci[0]:+.3f}, {report.rig_ci[1]:+.3f}]")
    if report.swap_mean is not None:
        print(f"  swap  {report.swap_mean:+.3f}  CI [{report.swap_ci[0]:+.3f}, "
              f"{report.swap_ci[1]:+.3f}]  positive {100 * report.swap_positive_rate:.0f}%")
    else:
        print("  swap  (no swap condition)")
    for qud_type, stats in report.per_type.items():
        print(f"  rIG[{qud_type}] {stats['rig_mean']:+.3f} (n={stats['n']})")


def _load_analysis_inputs(corpus: Path):
    paths = _corpus_paths(corpus)
    store = CorpusStore(corpus)
    quds = list(store.quds.values())
    annotations = list(store.annotations.values())
    papers = load_papers(paths["papers"]) if paths["papers"].exists() else []
    return quds, annotations, papers


def _emit_report(report: dict, args) -> None:
    out = getattr(args, "json_out", None)
    text = canonical_dumps(report)
    if out:
        Path(out).write_text(text + "\n", "utf-8")
    print(text)


def cmd_stats(args, config) -> dict:
    corpus = Path(args.corpus)
    quds, annotations, _ = _load_analysis_inputs(corpus)
    report = analysis.corpus_stats(quds, annotations)
    totals = report["totals"]
    print(f"QUDs {totals['quds']}  papers {totals['papers']}  figures {totals['figures']}"
          f"  avg/figure {totals['quds_per_figure_avg']:.1f}"
          f"  answer words {totals['answer_len_avg_words']:.0f}"
          f"  anchor words {totals['anchor_len_avg_words']:.0f}")
    for qud_type, row in report["per_type"].items():
        print(f"  {qud_type:<12} {row['count']:>5}  ({row['pct']:.0f}%)")
    _emit_report(report, args)
    _maybe_csv(args, [("qud_type", "count", "pct")] + [
        (t, str(row["count"]), f"{row['pct']:.2f}")
        for t, row in report["per_type"].items()])
    return {"root": corpus, "outputs": []}


def cmd_clusters(args, config) -> dict:
    corpus = Path(args.corpus)
    quds, annotations, _ = _load_analysis_inputs(corpus)
    report = analysis.dependency_clusters(quds, annotations)
    for point in report.points:
        print(f"  {point.qud_type:<12} useful {point.rate_useful:.2f}  "
              f"answerable {point.rate_answerable:.2f}  gap {point.gap:+.2f}  "
              f"-> {point.cluster}")
    print(f"max gap: {report.max_gap_type} at {100 * report.max_gap:.0f} points")
    _emit_report(report.to_json(), args)
    _maybe_csv(args, [("qud_type", "rate_useful", "rate_answerable", "gap", "cluster")] + [
        (p.qud_type, f"{p.rate_useful:.4f}", f"{p.rate_answerable:.4f}",
         f"{p.gap:.4f}", p.cluster) for p in report.points])
    return {"root": corpus, "outputs": []}


def cmd_correlate(args, config) -> dict:
    corpus = Path(args.corpus)
    quds, annotations, papers = _load_analysis_inputs(corpus)
    granularity = _effective(args, config, "granularity", "per_qud")
    want_csv = bool(getattr(args, "csv", None))
    report = analysis.refcount_correlations(papers, quds, annotations,
                                            granularity=granularity,
                                            include_points=want_csv)
    print(f"rho(useful)  {report['rho_useful']:+.3f} (p={report['p_useful']:.4g}, "
          f"n={report['n_useful']})")
    print(f"rho(quality) {report['rho_quality']:+.3f} (p={report['p_quality']:.4g}, "
          f"n={report['n_quality']})")
    if want_csv:
        points = report.pop("points")
        rows = [("reference_count", "useful", "quality")]
        rows += [(f"{x:g}", f"{yu:g}", f"{yq:g}")
                 for (x, yu), (_, yq) in zip(points["useful"], points["quality"])]
        _maybe_csv(args, rows)
    _emit_report(report, args)
    return {"root": corpus, "outputs": []}


def cmd_depth(args, config) -> dict:
    if getattr(args, "questions", None):
        questions = [line.strip() for line
                     in Path(args.questions).read_text("utf-8").splitlines()
                     if line.strip()]
        root = Path(args.questions).parent
    else:
        corpus = Path(args.corpus)
        quds, _, _ = _load_analysis_inputs(corpus)
        questions = [q.question for q in quds]
        root = corpus
    report = analysis.depth_bins(questions)
    for name, pct in report["percentages"].items():
        print(f"  {name:<15} {report['counts'][name]:>5}  ({pct:.0f}%)")
    _maybe_csv(args, [("bin", "count", "pct")] + [
        (name, str(report["counts"][name]), f"{report['percentages'][name]:.2f}")
        for name in report["counts"]])
    report_out = dict(report)
    report_out.pop("bins")
    _emit_report(report_out, args)
    return {"root": root, "outputs": []}


def cmd_validate_judge(args, config) -> dict:
    corpus = Path(args.corpus)
    paths = _corpus_paths(corpus)
    store = CorpusStore(corpus)
    verdicts = [judge_mod.JudgeVerdict.from_json(obj)
                for obj in load_jsonl(_require(paths["verdicts"], "judge"))]
    human = store.human_annotations()
    matching = _effective(args, config, "matching", "latest")
    report = judge_mod.validate_judge(human, verdicts, matching=matching)
    print(f"precision {report['precision']:.3f}  recall {report['recall']:.3f}  "
          f"F1 {report['f1']:.3f}  (n={report['n']}, matching={matching})")
    if getattr(args, "agreement", False):
        summary = judge_mod.annotator_agreement(human, verdicts)
        for item in summary.reports:
            print(f"  {item.annotator_id:<12} weighted {item.weighted:.2f} "
                  f"(n={item.n_pairs})")
        print(f"median weighted agreement: {summary.median_weighted:.2f}")
        report = dict(report)
        report["median_weighted_agreement"] = summary.median_weighted
    _emit_report(report, args)
    return {"root": corpus, "outputs": []}


def cmd_serve(args, config) -> dict:
    import uvicorn

    from .annosvc import create_app

    corpus = Path(args.corpus)
    roster = Path(_effective(args, config, "roster"))
    ui_dist = _effective(args, config, "ui")
    app = create_app(
        corpus_root=corpus,
        roster_path=roster,
        seed=int(_effective(args, config, "seed", 0)),
        dual_size=int(_effective(args, config, "dual_size", 60)),
        author_matching=not bool(getattr(args, "no_author_matching", False)),
        blinding=_effective(args, config, "blinding", "full_bundle"),
        ui_dist=Path(ui_dist) if ui_dist else None,
    )
    port = int(_effective(args, config, "port", 8100))
    uvicorn.run(app, host=_effective(args, config, "host", "127.0.0.1"), port=port)
    return {"root": corpus, "outputs": []}


def _maybe_csv(args, rows: list[tuple]) -> None:
    path = getattr(args, "csv", None)
    if not path:
        return
    import csv

    with open(path, "w", newline="", encoding="utf-8") as f:
        csv.writer(f).writerows(rows)


# =============================================================================
# Parser
# =============================================================================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mqud")
    parser.add_argument("--config", help="YAML config file; flags override it")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.set_defaults(fn=fn)
        return p

    p = add("ingest", cmd_ingest, help="parse LaTeX paper sources")
    p.add_argument("source", help="directory tree, one subdirectory per paper")
    p.add_argument("--out", help="corpus output directory")

    def backend_flags(p):
        p.add_argument("--backend", choices=("mock", "replay", "live"))
        p.add_argument("--cache", help="replay cache file")
        p.add_argument("--backend-url", dest="backend_url")
        p.add_argument("--record", action="store_true",
                       help="record responses into the replay cache")
        p.add_argument("--workers", type=int, help="bounded in-flight backend calls")
        p.add_argument("--rate", type=float, help="max backend requests per second")

    p = add("generate", cmd_generate, help="generate candidate QUDs per figure")
    p.add_argument("--corpus", required=True)
    p.add_argument("--n", type=int, help="candidates per figure (5-7)")
    p.add_argument("--window", type=int, help="anchor paragraph window")
    p.add_argument("--seed", type=int)
    backend_flags(p)

    p = add("filter", cmd_filter, help="apply the quality filter")
    p.add_argument("--corpus", required=True)
    backend_flags(p)

    p = add("augment", cmd_augment, help="rephrase-augment correct QUDs")
    p.add_argument("--corpus", required=True)
    p.add_argument("--n-variants", dest="n_variants", type=int)
    backend_flags(p)

    p = add("judge", cmd_judge, help="run the seven-dimension judge")
    p.add_argument("--corpus", required=True)
    p.add_argument("--split")
    backend_flags(p)

    p = add("export-sft", cmd_export_sft, help="emit training JSONL + splits")
    p.add_argument("--corpus", required=True)
    p.add_argument("--validation-size", dest="validation_size", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--no-require-figure-useful", dest="no_require_figure_useful",
                   action="store_true")

    p = add("diagnose", cmd_diagnose, help="score mm/to/swap and aggregate")
    p.add_argument("--corpus", required=True)
    p.add_argument("--model-tag", dest="model_tag")
    p.add_argument("--conditions", help="comma list from mm,to,swap")
    p.add_argument("--resamples", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--split")
    backend_flags(p)

    for name, fn in (("stats", cmd_stats), ("clusters", cmd_clusters),
                     ("correlate", cmd_correlate)):
        p = add(name, fn, help=f"corpus analysis: {name}")
        p.add_argument("--corpus", required=True)
        p.add_argument("--json-out", dest="json_out")
        p.add_argument("--csv")
        if name == "correlate":
            p.add_argument("--granularity", choices=("per_qud", "per_figure"))

    p = add("depth", cmd_depth, help="leading-word question depth bins")
    p.add_argument("--corpus")
    p.add_argument("--questions", help="plain text file, one question per line")
    p.add_argument("--json-out", dest="json_out")
    p.add_argument("--csv")

    p = add("validate-judge", cmd_validate_judge,
            help="precision/F1 of judge vs human annotations")
    p.add_argument("--corpus", required=True)
    p.add_argument("--matching", choices=("latest", "all_pairs"))
    p.add_argument("--agreement", action="store_true")
    p.add_argument("--json-out", dest="json_out")

    p = add("serve", cmd_serve, help="run the annotation service")
    p.add_argument("--corpus", required=True)
    p.add_argument("--roster", required=True)
    p.add_argument("--port", type=int)
    p.add_argument("--host")
    p.add_argument("--seed", type=int)
    p.add_argument("--dual-size", dest="dual_size", type=int)
    p.add_argument("--no-author-matching", dest="no_author_matching",
                   action="store_true")
    p.add_argument("--blinding", choices=("full_bundle", "hide_answer"))
    p.add_argument("--ui", help="built UI bundle directory")

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    started_at = datetime.now(timezone.utc).isoformat()
    try:
        config = _load_config(args.config)
        result = args.fn(args, config)
    except MqudError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    root = result.get("root")
    if root is not None and args.command not in ("serve",):
        flags = {k: v for k, v in vars(args).items()
                 if k not in ("fn", "config", "verbose") and v is not None}
        _write_manifest(
            Path(root), args.command, {"flags": flags, "file": config},
            inputs=_hash_files(result.get("input_files", [])),
            outputs=_hash_files(result.get("outputs", [])),
            seed=result.get("seed", getattr(args, "seed", None)),
            backend_mode=result.get("backend_mode"),
            started_at=started_at)
    return 0


if __name__ == "__main__":
    sys.exit(main())
