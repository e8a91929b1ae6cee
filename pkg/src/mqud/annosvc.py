"""HTTP annotation service: task assignment, judgment intake, progress.

Assignment is deterministic given (seed, roster, corpus order) and is rebuilt
from scratch on every start; task status derives from the append-only stores,
so a restart never loses or duplicates work. The service is the sole writer
of annotations.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable

from fastapi import Depends, FastAPI, Request
from fastapi.responses import JSONResponse, Response
from fastapi.staticfiles import StaticFiles

from .corpus import (
    DIMENSION_VOCAB,
    DIMENSIONS,
    AnnotationRecord,
    CorpusStore,
    QudRecord,
    dimension_schema,
    stratified_sample,
)
from .errors import (
    IncompletePayload,
    MqudError,
    TaskNotPending,
    UnknownAnnotator,
    UnknownQud,
    VocabularyViolation,
)
from .jsonio import append_jsonl, content_id, iter_jsonl
from .paperstore import AssetManifest

logger = logging.getLogger(__name__)

DEFAULT_DUAL_SIZE = 60


@dataclass
class RosterEntry:
    annotator_id: str
    token: str
    authored_papers: list[str]


def load_roster(path: Path) -> list[RosterEntry]:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    roster = [RosterEntry(annotator_id=e["annotator_id"], token=e["token"],
                          authored_papers=list(e.get("authored_papers", [])))
              for e in payload]
    ids = [e.annotator_id for e in roster]
    if len(set(ids)) != len(ids):
        raise VocabularyViolation(f"duplicate annotator ids in roster: {ids}")
    return roster


@dataclass
class TaskAssignment:
    task_id: str
    qud_id: str
    annotator_id: str
    status: str  # pending | submitted | skipped
    assigned_at: str
    dual_group: str | None = None

    def to_json(self) -> dict:
        return {"task_id": self.task_id, "qud_id": self.qud_id,
                "annotator_id": self.annotator_id, "status": self.status,
                "assigned_at": self.assigned_at, "dual_group": self.dual_group}


def build_assignments(
    quds: list[QudRecord],
    roster: list[RosterEntry],
    seed: int = 0,
    dual_size: int = DEFAULT_DUAL_SIZE,
    author_matching: bool = True,
    clock: Callable[[], str] | None = None,
) -> list[TaskAssignment]:
    """Assign every QUD to one annotator, plus a dual-annotated subset to two.

    With author matching on, a QUD only ever goes to authors of its paper;
    the dual subset is a seeded, type-stratified sample drawn from QUDs with
    at least two eligible annotators. Load is balanced by current queue size
    with annotator id as the tiebreak, so the result is reproducible.
    """
    now = clock or (lambda: datetime.now(timezone.utc).isoformat())

    def candidates(record: QudRecord) -> list[RosterEntry]:
        if not author_matching:
            return roster
        return [e for e in roster if record.context.paper_id in e.authored_papers]

    dual_eligible: dict[str, list[str]] = {}
    for record in quds:
        if len(candidates(record)) >= 2:
            dual_eligible.setdefault(record.qud_type, []).append(record.qud_id)
    dual_ids = stratified_sample(dual_eligible, dual_size, seed)

    load: dict[str, int] = {e.annotator_id: 0 for e in roster}
    assignments: list[TaskAssignment] = []
    unassigned: list[str] = []

    def take(pool: list[RosterEntry], exclude: set[str]) -> RosterEntry | None:
        open_pool = [e for e in pool if e.annotator_id not in exclude]
        if not open_pool:
            return None
        return min(open_pool, key=lambda e: (load[e.annotator_id], e.annotator_id))

    for record in quds:
        pool = candidates(record)
        n_needed = 2 if record.qud_id in dual_ids else 1
        chosen: list[RosterEntry] = []
        for _ in range(n_needed):
            entry = take(pool, {e.annotator_id for e in chosen})
            if entry is None:
                break
            chosen.append(entry)
            load[entry.annotator_id] += 1
        if not chosen:
            unassigned.append(record.qud_id)
            continue
        dual_group = record.qud_id if len(chosen) == 2 else None
        for entry in chosen:
            assignments.append(TaskAssignment(
                task_id=content_id(record.qud_id, entry.annotator_id),
                qud_id=record.qud_id,
                annotator_id=entry.annotator_id,
                status="pending",
                assigned_at=now(),
                dual_group=dual_group,
            ))
    if unassigned:
        logger.warning("%d QUD(s) had no eligible annotator: %s",
                       len(unassigned), unassigned[:5])
    return assignments


class AnnotationService:
    """In-memory index over assignments + the corpus store."""

    EVENTS_FILE = "task_events.jsonl"

    def __init__(self, store: CorpusStore, roster: list[RosterEntry],
                 assignments: list[TaskAssignment],
                 manifest: AssetManifest | None = None,
                 blinding: str = "full_bundle"):
        self.store = store
        self.roster = roster
        self.manifest = manifest
        self.blinding = blinding
        self.assignments = assignments
        self.by_task_id = {t.task_id: t for t in assignments}
        self._tokens = {e.token: e.annotator_id for e in roster}
        self._replay_status()

    # -- state rebuild ---------------------------------------------------------

    @property
    def events_path(self) -> Path:
        return self.store.root / self.EVENTS_FILE

    def _replay_status(self) -> None:
        for task in self.assignments:
            if (task.qud_id, task.annotator_id) in self.store.annotations:
                task.status = "submitted"
        if self.events_path.exists():
            for event in iter_jsonl(self.events_path):
                task = self.by_task_id.get(event.get("task_id", ""))
                if task is not None and event.get("event") == "skipped" \
                        and task.status == "pending":
                    task.status = "skipped"

    # -- operations ------------------------------------------------------------

    def annotator_for_token(self, token: str) -> str:
        annotator = self._tokens.get(token)
        if annotator is None:
            raise UnknownAnnotator("unknown or missing bearer token")
        return annotator

    def require_annotator(self, annotator_id: str) -> None:
        if annotator_id not in {e.annotator_id for e in self.roster}:
            raise UnknownAnnotator(f"annotator {annotator_id!r} not in roster")

    def next_task(self, annotator_id: str) -> TaskAssignment | None:
        """Oldest pending assignment for this annotator (FIFO)."""
        self.require_annotator(annotator_id)
        for task in self.assignments:
            if task.annotator_id == annotator_id and task.status == "pending":
                return task
        return None

    def submit(self, task_id: str, payload: dict) -> dict:
        task = self.by_task_id.get(task_id)
        if task is None:
            raise TaskNotPending(f"no task {task_id!r}")
        if task.status != "pending":
            raise TaskNotPending(f"task {task_id} is {task.status}")
        missing = [dim for dim in DIMENSIONS if not payload.get(dim)]
        if missing:
            raise IncompletePayload(f"missing dimensions: {', '.join(missing)}")
        for dim in DIMENSIONS:
            if payload[dim] not in DIMENSION_VOCAB[dim]:
                raise VocabularyViolation(
                    f"{dim}={payload[dim]!r} not in {DIMENSION_VOCAB[dim]}")
        record = AnnotationRecord(
            qud_id=task.qud_id, annotator_id=task.annotator_id,
            source="human_expert", notes=str(payload.get("notes", "")),
            **{dim: payload[dim] for dim in DIMENSIONS})
        receipt = self.store.store_append(record)
        task.status = "submitted"
        return {"stored": True, "task_id": task_id, "qud_id": task.qud_id,
                "offset": receipt.offset}

    def skip(self, task_id: str) -> dict:
        task = self.by_task_id.get(task_id)
        if task is None or task.status != "pending":
            raise TaskNotPending(f"task {task_id!r} is not pending")
        task.status = "skipped"
        append_jsonl(self.events_path, {"task_id": task_id, "event": "skipped"})
        return {"skipped": True, "task_id": task_id}

    def progress(self) -> dict:
        per_annotator: dict[str, dict[str, int]] = {
            e.annotator_id: {"pending": 0, "submitted": 0, "skipped": 0}
            for e in self.roster}
        for task in self.assignments:
            per_annotator[task.annotator_id][task.status] += 1
        dual_groups: dict[str, list[TaskAssignment]] = {}
        for task in self.assignments:
            if task.dual_group:
                dual_groups.setdefault(task.dual_group, []).append(task)
        dual_complete = sum(
            1 for tasks in dual_groups.values()
            if all(t.status == "submitted" for t in tasks))
        annotated = {qud_id for (qud_id, _), a in self.store.annotations.items()
                     if a.source == "human_expert"}
        total_quds = len(self.store.quds)
        return {
            "per_annotator": per_annotator,
            "dual_groups_total": len(dual_groups),
            "dual_groups_complete": dual_complete,
            "quds_total": total_quds,
            "quds_annotated": len(annotated),
            "annotated_fraction": len(annotated) / total_quds if total_quds else 0.0,
            "blinding": self.blinding,
        }

    def qud_bundle(self, qud_id: str) -> dict:
        record = self.store.quds.get(qud_id)
        if record is None:
            raise UnknownQud(f"unknown qud {qud_id!r}")
        ctx = record.context
        bundle = {
            "qud_id": record.qud_id,
            "question": record.question,
            "answer": record.abstractive_answer,
            "qud_type": record.qud_type,
            "caption": ctx.caption,
            "title": ctx.title,
            "abstract": ctx.abstract,
            "anchor_text": record.anchor_text,
            "image_url": f"/asset/{ctx.image_ref}" if ctx.image_ref else None,
        }
        if self.blinding == "hide_answer":
            bundle["answer"] = None
        return bundle

    def submissions_for(self, annotator_id: str) -> list[dict]:
        self.require_annotator(annotator_id)
        return [a.to_json() for (_, aid), a in self.store.annotations.items()
                if aid == annotator_id]


# =============================================================================
# FastAPI wiring
# =============================================================================

_STATUS_FOR = [
    (UnknownAnnotator, 401),
    (UnknownQud, 404),
    (TaskNotPending, 409),
    (IncompletePayload, 422),
    (VocabularyViolation, 422),
]


def create_app(
    corpus_root: Path,
    roster_path: Path,
    seed: int = 0,
    dual_size: int = DEFAULT_DUAL_SIZE,
    author_matching: bool = True,
    blinding: str = "full_bundle",
    ui_dist: Path | None = None,
) -> FastAPI:
    corpus_root = Path(corpus_root)
    store = CorpusStore(corpus_root)
    roster = load_roster(roster_path)
    assignments = build_assignments(list(store.quds.values()), roster, seed=seed,
                                    dual_size=dual_size,
                                    author_matching=author_matching)
    manifest_path = corpus_root / "assets.manifest"
    manifest = AssetManifest.load(manifest_path) if manifest_path.exists() else None
    service = AnnotationService(store, roster, assignments, manifest=manifest,
                                blinding=blinding)

    app = FastAPI(title="mqud annotation service")
    app.state.service = service

    @app.exception_handler(MqudError)
    async def handle_mqud_error(_request: Request, exc: MqudError) -> JSONResponse:
        status = 400
        for exc_type, code in _STATUS_FOR:
            if isinstance(exc, exc_type):
                status = code
                break
        return JSONResponse(status_code=status,
                            content={"error": type(exc).__name__, "detail": str(exc)})

    def current_annotator(request: Request) -> str:
        header = request.headers.get("authorization", "")
        if not header.lower().startswith("bearer "):
            raise UnknownAnnotator("missing bearer token")
        return service.annotator_for_token(header[7:].strip())

    @app.get("/schema")
    def get_schema() -> dict:
        return dimension_schema()

    @app.get("/task/next")
    def get_next_task(annotator_id: str = Depends(current_annotator)) -> dict:
        task = service.next_task(annotator_id)
        return {"task": task.to_json() if task else None}

    @app.get("/qud/{qud_id}")
    def get_qud(qud_id: str) -> dict:
        return service.qud_bundle(qud_id)

    @app.post("/task/{task_id}/submit")
    async def submit_task(task_id: str, request: Request,
                          annotator_id: str = Depends(current_annotator)) -> dict:
        payload = await request.json()
        task = service.by_task_id.get(task_id)
        if task is not None and task.annotator_id != annotator_id:
            raise TaskNotPending("task belongs to a different annotator")
        return service.submit(task_id, payload)

    @app.post("/task/{task_id}/skip")
    def skip_task(task_id: str,
                  annotator_id: str = Depends(current_annotator)) -> dict:
        task = service.by_task_id.get(task_id)
        if task is not None and task.annotator_id != annotator_id:
            raise TaskNotPending("task belongs to a different annotator")
        return service.skip(task_id)

    @app.get("/progress")
    def get_progress() -> dict:
        return service.progress()

    @app.get("/annotations/mine")
    def get_my_annotations(annotator_id: str = Depends(current_annotator)) -> dict:
        return {"annotations": service.submissions_for(annotator_id)}

    @app.get("/asset/{digest}")
    def get_asset(digest: str) -> Response:
        data = service.manifest.bytes_for(digest) if service.manifest else None
        if data is None:
            return JSONResponse(status_code=404, content={"error": "unknown asset"})
        media = "image/png" if data[:8] == b"\x89PNG\r\n\x1a\n" else "image/jpeg"
        return Response(content=data, media_type=media)

    if ui_dist and Path(ui_dist).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dist), html=True), name="ui")
    return app
