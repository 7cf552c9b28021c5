"""Human-preference ranking: anonymized task assignment, durable ranking
storage, and Win@K / Mean-Rank aggregation, exposed over HTTP for the
annotation frontend.

Model identities never leave the server: tasks present responses under slot
labels A, B, C, ... in a seeded random order, and the slot-to-model maps
live in a separate assignment file.  Rankings are appended to a JSON-lines
log (fsynced before acknowledgment) whose replay reproduces the store.
"""

from __future__ import annotations

import json
import os
import string
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import IO, Mapping, Sequence

import numpy as np
from pydantic import BaseModel


class RankingSubmission(BaseModel):
    """POST /api/rankings request body."""

    task_id: str
    annotator_id: str
    ordering: list[str]


class RankingError(Exception):
    """Base class for ranking-store rejections."""


class UnknownTaskError(RankingError):
    pass


class MalformedRankingError(RankingError):
    pass


class DuplicateRankingError(RankingError):
    pass


@dataclass(frozen=True)
class RankingTask:
    task_id: str
    sample_id: str
    question_text: str
    candidates: tuple[tuple[str, str], ...]  # (slot_label, response_text)
    permutation_seed: int

    @property
    def slots(self) -> tuple[str, ...]:
        return tuple(slot for slot, _ in self.candidates)


@dataclass(frozen=True)
class RankingRecord:
    task_id: str
    annotator_id: str
    ordering: tuple[str, ...]  # slot labels, best first
    submitted_at: str


@dataclass(frozen=True)
class ModelStanding:
    model: str
    win_at: dict[int, float]  # K -> percentage, full precision
    mean_rank: float
    n_rankings: int


@dataclass(frozen=True)
class AggregateReport:
    k_values: tuple[int, ...]
    standings: tuple[ModelStanding, ...]

    def as_dict(self, display_decimals: int = 2) -> dict:
        return {
            "k_values": list(self.k_values),
            "models": {
                s.model: {
                    "win_at": {str(k): v for k, v in s.win_at.items()},
                    "mean_rank": s.mean_rank,
                    "n_rankings": s.n_rankings,
                    "display": {
                        "win_at": {str(k): round(v, display_decimals) for k, v in s.win_at.items()},
                        "mean_rank": round(s.mean_rank, display_decimals),
                    },
                }
                for s in self.standings
            },
        }


def slot_labels(n: int) -> tuple[str, ...]:
    if not 1 <= n <= len(string.ascii_uppercase):
        raise ValueError(f"slot count must be in 1..{len(string.ascii_uppercase)}")
    return tuple(string.ascii_uppercase[:n])


def make_assignment(
    samples: Sequence[tuple[str, str]],
    model_outputs: Mapping[str, Mapping[str, str]],
    n_models: int,
    seed: int,
) -> tuple[list[RankingTask], dict[str, dict[str, str]]]:
    """One task per (sample_id, question) with a seeded random slot order.

    Returns the tasks (no model names anywhere) and the server-side
    task_id -> {slot: model} maps.
    """
    models = sorted(model_outputs)
    if len(models) != n_models:
        raise ValueError(f"expected {n_models} models, got {len(models)}")
    labels = slot_labels(n_models)
    rng = np.random.default_rng(seed)
    tasks: list[RankingTask] = []
    slot_maps: dict[str, dict[str, str]] = {}
    for sample_id, question in samples:
        for model in models:
            if sample_id not in model_outputs[model]:
                raise ValueError(f"model {model!r} has no output for sample {sample_id!r}")
        perm_seed = int(rng.integers(0, 2**31 - 1))
        perm = np.random.default_rng(perm_seed).permutation(n_models)
        ordered_models = [models[int(i)] for i in perm]
        candidates = tuple(
            (labels[i], model_outputs[m][sample_id]) for i, m in enumerate(ordered_models)
        )
        task_id = f"task-{sample_id}"
        tasks.append(
            RankingTask(
                task_id=task_id,
                sample_id=sample_id,
                question_text=question,
                candidates=candidates,
                permutation_seed=perm_seed,
            )
        )
        slot_maps[task_id] = {labels[i]: m for i, m in enumerate(ordered_models)}
    return tasks, slot_maps


class RankingStore:
    """Tasks plus an append-only ranking log.

    ``record_ranking`` validates, appends one JSON line and fsyncs before
    acknowledging; duplicate (task, annotator) submissions are rejected.
    """

    def __init__(self, tasks: Sequence[RankingTask], log_path: str | Path | None = None):
        self._tasks: dict[str, RankingTask] = {}
        self._task_order: list[str] = []
        for task in tasks:
            if task.task_id in self._tasks:
                raise ValueError(f"duplicate task id {task.task_id!r}")
            self._tasks[task.task_id] = task
            self._task_order.append(task.task_id)
        self._records: list[RankingRecord] = []
        self._seen: set[tuple[str, str]] = set()
        self._lock = threading.Lock()
        self._log_path = Path(log_path) if log_path is not None else None
        self._log_fp: IO[str] | None = None
        if self._log_path is not None:
            if self._log_path.exists():
                with open(self._log_path, encoding="utf-8") as fp:
                    for line in fp:
                        if line.strip():
                            self._admit(_record_from_json(json.loads(line)))
            self._log_fp = open(self._log_path, "a", encoding="utf-8")

    def close(self) -> None:
        if self._log_fp is not None:
            self._log_fp.close()
            self._log_fp = None

    def task(self, task_id: str) -> RankingTask:
        if task_id not in self._tasks:
            raise UnknownTaskError(f"unknown task {task_id!r}")
        return self._tasks[task_id]

    @property
    def tasks(self) -> list[RankingTask]:
        return [self._tasks[t] for t in self._task_order]

    def records(self) -> list[RankingRecord]:
        with self._lock:
            return list(self._records)

    def done_count(self, annotator_id: str) -> int:
        with self._lock:
            return sum(1 for t, a in self._seen if a == annotator_id and t in self._tasks)

    def next_task(self, annotator_id: str) -> RankingTask | None:
        """The first task (in creation order) this annotator has not ranked."""
        with self._lock:
            for task_id in self._task_order:
                if (task_id, annotator_id) not in self._seen:
                    return self._tasks[task_id]
        return None

    def _validate(self, record: RankingRecord) -> None:
        if record.task_id not in self._tasks:
            raise UnknownTaskError(f"unknown task {record.task_id!r}")
        if not record.annotator_id:
            raise MalformedRankingError("annotator_id must be nonempty")
        task = self._tasks[record.task_id]
        if sorted(record.ordering) != sorted(task.slots):
            raise MalformedRankingError(
                f"ordering must be a complete permutation of slots {list(task.slots)}"
            )
        if (record.task_id, record.annotator_id) in self._seen:
            raise DuplicateRankingError(
                f"annotator {record.annotator_id!r} already ranked task {record.task_id!r}"
            )

    def _admit(self, record: RankingRecord) -> None:
        self._validate(record)
        self._records.append(record)
        self._seen.add((record.task_id, record.annotator_id))

    def record_ranking(self, record: RankingRecord) -> None:
        with self._lock:
            self._validate(record)
            if self._log_fp is not None:
                self._log_fp.write(json.dumps(_record_to_json(record), ensure_ascii=False) + "\n")
                self._log_fp.flush()
                os.fsync(self._log_fp.fileno())
            self._records.append(record)
            self._seen.add((record.task_id, record.annotator_id))


def _record_to_json(record: RankingRecord) -> dict:
    return {
        "task_id": record.task_id,
        "annotator_id": record.annotator_id,
        "ordering": list(record.ordering),
        "submitted_at": record.submitted_at,
    }


def _record_from_json(obj: dict) -> RankingRecord:
    return RankingRecord(
        task_id=obj["task_id"],
        annotator_id=obj["annotator_id"],
        ordering=tuple(obj["ordering"]),
        submitted_at=obj.get("submitted_at", ""),
    )


def now_iso() -> str:
    return datetime.now(timezone.utc).isoformat()


def aggregate(
    records: Sequence[RankingRecord],
    slot_maps: Mapping[str, Mapping[str, str]],
    k_values: Sequence[int] = (1, 2),
) -> AggregateReport:
    """De-anonymize rankings through the slot maps and compute Win@K and
    Mean-Rank per model."""
    ks = tuple(sorted(set(int(k) for k in k_values)))
    if not ks or ks[0] < 1:
        raise ValueError("k_values must be positive integers")
    ranks: dict[str, list[int]] = {}
    for record in records:
        if record.task_id not in slot_maps:
            raise UnknownTaskError(f"record references unknown task {record.task_id!r}")
        slot_map = slot_maps[record.task_id]
        for position, slot in enumerate(record.ordering, start=1):
            if slot not in slot_map:
                raise MalformedRankingError(f"slot {slot!r} missing from assignment")
            ranks.setdefault(slot_map[slot], []).append(position)
    standings = []
    for model in sorted(ranks):
        positions = ranks[model]
        n = len(positions)
        standings.append(
            ModelStanding(
                model=model,
                win_at={k: 100.0 * sum(p <= k for p in positions) / n for k in ks},
                mean_rank=sum(positions) / n,
                n_rankings=n,
            )
        )
    return AggregateReport(k_values=ks, standings=tuple(standings))


def rank_sum_residuals(
    win_at: Mapping[int, Sequence[float]], mean_ranks: Sequence[float]
) -> dict[str, float]:
    """Protocol-invariant residuals: |sum Win@K - 100K| per K and
    |sum MR - n(n+1)/2| for n models with complete rankings."""
    n = len(mean_ranks)
    residuals = {f"win@{k}": abs(sum(values) - 100.0 * k) for k, values in win_at.items()}
    residuals["mean_rank"] = abs(sum(mean_ranks) - n * (n + 1) / 2.0)
    return residuals


def report_residuals(report: AggregateReport) -> dict[str, float]:
    win_at = {k: [s.win_at[k] for s in report.standings] for k in report.k_values}
    return rank_sum_residuals(win_at, [s.mean_rank for s in report.standings])


# -- file formats ------------------------------------------------------------------


def write_tasks(tasks: Sequence[RankingTask], fp: IO[str]) -> None:
    for task in tasks:
        fp.write(
            json.dumps(
                {
                    "task_id": task.task_id,
                    "sample_id": task.sample_id,
                    "question_text": task.question_text,
                    "candidates": [{"slot": s, "text": t} for s, t in task.candidates],
                    "permutation_seed": task.permutation_seed,
                },
                ensure_ascii=False,
            )
            + "\n"
        )


def read_tasks(path: str | Path) -> list[RankingTask]:
    tasks = []
    with open(path, encoding="utf-8") as fp:
        for line in fp:
            if not line.strip():
                continue
            obj = json.loads(line)
            tasks.append(
                RankingTask(
                    task_id=obj["task_id"],
                    sample_id=obj["sample_id"],
                    question_text=obj["question_text"],
                    candidates=tuple((c["slot"], c["text"]) for c in obj["candidates"]),
                    permutation_seed=obj["permutation_seed"],
                )
            )
    return tasks


def write_assignments(slot_maps: Mapping[str, Mapping[str, str]], fp: IO[str]) -> None:
    for task_id, slots in slot_maps.items():
        fp.write(json.dumps({"task_id": task_id, "slots": dict(slots)}, ensure_ascii=False) + "\n")


def read_assignments(path: str | Path) -> dict[str, dict[str, str]]:
    slot_maps: dict[str, dict[str, str]] = {}
    with open(path, encoding="utf-8") as fp:
        for line in fp:
            if line.strip():
                obj = json.loads(line)
                slot_maps[obj["task_id"]] = dict(obj["slots"])
    return slot_maps


def read_rankings(path: str | Path) -> list[RankingRecord]:
    records = []
    with open(path, encoding="utf-8") as fp:
        for line in fp:
            if line.strip():
                records.append(_record_from_json(json.loads(line)))
    return records


# -- HTTP service ------------------------------------------------------------------


def create_app(
    store: RankingStore,
    slot_maps: Mapping[str, Mapping[str, str]],
    default_k: Sequence[int] = (1, 2),
):
    """FastAPI app exposing the annotation API.

    GET /api/health, GET /api/tasks/next?annotator=ID,
    POST /api/rankings, GET /api/report?k=1,2
    """
    from fastapi import FastAPI, Query, Request
    from fastapi.exceptions import RequestValidationError
    from fastapi.middleware.cors import CORSMiddleware
    from fastapi.responses import JSONResponse

    app = FastAPI(title="empathykit ranking service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.exception_handler(RequestValidationError)
    async def malformed_request(_request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.get("/api/health")
    def health():
        return {"status": "ok", "n_tasks": len(store.tasks)}

    @app.get("/api/tasks/next")
    def next_task(annotator: str = Query(...)):
        if not annotator:
            return JSONResponse(status_code=400, content={"detail": "annotator must be nonempty"})
        task = store.next_task(annotator)
        total = len(store.tasks)
        if task is None:
            return JSONResponse(
                status_code=404,
                content={"detail": "no tasks remaining", "progress": {"done": total, "total": total}},
            )
        return {
            "task_id": task.task_id,
            "sample_id": task.sample_id,
            "question_text": task.question_text,
            "candidates": [{"slot": s, "text": t} for s, t in task.candidates],
            "progress": {"done": store.done_count(annotator), "total": total},
        }

    @app.post("/api/rankings", status_code=201)
    def post_ranking(submission: RankingSubmission):
        record = RankingRecord(
            task_id=submission.task_id,
            annotator_id=submission.annotator_id,
            ordering=tuple(submission.ordering),
            submitted_at=now_iso(),
        )
        try:
            store.record_ranking(record)
        except DuplicateRankingError as exc:
            return JSONResponse(status_code=409, content={"detail": str(exc)})
        except (UnknownTaskError, MalformedRankingError) as exc:
            return JSONResponse(status_code=400, content={"detail": str(exc)})
        return {"status": "recorded", "task_id": record.task_id}

    @app.get("/api/report")
    def report(k: str = "1,2"):
        try:
            k_values = [int(part) for part in k.split(",") if part.strip()]
            if not k_values:
                raise ValueError
        except ValueError:
            return JSONResponse(status_code=400, content={"detail": f"bad k list {k!r}"})
        agg = aggregate(store.records(), slot_maps, k_values or default_k)
        return agg.as_dict()

    return app
