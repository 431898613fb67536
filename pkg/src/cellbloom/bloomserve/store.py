"""Durable task and vote storage for the annotation service.

Tasks live in a snapshot file (tasks.json); votes go to an append-only
JSON Lines log that is fsync'd before a submission is acknowledged and
replayed on startup. Provenance (which cell a flower image came from) is
kept server-side and never enters annotator-facing payloads.
"""
from __future__ import annotations

import datetime
import json
import logging
import os
import threading
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from ..labels import CellClass, ClassPairMap, FlowerClass
from ..manifest import DatasetManifest, ImageRecord

log = logging.getLogger(__name__)

TASKS_FILE = "tasks.json"
ANNOTATIONS_FILE = "annotations.jsonl"


class UnknownTaskError(KeyError):
    pass


class DuplicateVoteError(ValueError):
    pass


class TaskClosedError(ValueError):
    pass


class InvalidClassError(ValueError):
    pass


@dataclass(frozen=True)
class AnnotationTask:
    task_id: str
    image_path: str
    required_annotations: int
    # hidden provenance; never serialized to annotators
    source_record_id: str
    source_record_path: str
    source_cell_class: CellClass
    pair_flower_class: FlowerClass

    def to_public_dict(self, image_url: str) -> dict:
        """Annotator-facing view: no provenance, just the image and choices."""
        return {
            "task_id": self.task_id,
            "image_url": image_url,
            "classes": [f.name for f in FlowerClass],
        }

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "image_path": self.image_path,
            "required_annotations": self.required_annotations,
            "source_record_id": self.source_record_id,
            "source_record_path": self.source_record_path,
            "source_cell_class": self.source_cell_class.name,
            "pair_flower_class": self.pair_flower_class.name,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AnnotationTask":
        return cls(
            task_id=d["task_id"],
            image_path=d["image_path"],
            required_annotations=d["required_annotations"],
            source_record_id=d["source_record_id"],
            source_record_path=d["source_record_path"],
            source_cell_class=CellClass.from_name(d["source_cell_class"]),
            pair_flower_class=FlowerClass.from_name(d["pair_flower_class"]),
        )


@dataclass(frozen=True)
class AnnotationRecord:
    task_id: str
    annotator_id: str
    flower_class: FlowerClass
    client_timestamp: str | None
    server_timestamp: str

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "annotator_id": self.annotator_id,
            "flower_class": self.flower_class.name,
            "client_timestamp": self.client_timestamp,
            "server_timestamp": self.server_timestamp,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AnnotationRecord":
        return cls(
            task_id=d["task_id"],
            annotator_id=d["annotator_id"],
            flower_class=FlowerClass.from_name(d["flower_class"]),
            client_timestamp=d.get("client_timestamp"),
            server_timestamp=d["server_timestamp"],
        )


@dataclass(frozen=True)
class AggregatedLabel:
    source_record_id: str
    winning_flower: FlowerClass
    mapped_cell: CellClass
    histogram: dict[str, int]
    agreement: float


class AnnotationStore:
    """Task queue plus vote log. All mutation goes through a single lock so
    duplicate-vote rejection is atomic with the durable append."""

    def __init__(
        self,
        data_dir: str | Path,
        pair_map: ClassPairMap | None = None,
        required_annotations: int = 3,
    ):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.pair_map = pair_map if pair_map is not None else ClassPairMap()
        self.required_annotations = required_annotations
        self._lock = threading.Lock()
        self._tasks: dict[str, AnnotationTask] = {}
        self._votes: dict[str, dict[str, AnnotationRecord]] = {}
        self._load()

    # ---------- persistence ----------

    def _load(self) -> None:
        tasks_path = self.data_dir / TASKS_FILE
        if tasks_path.exists():
            doc = json.loads(tasks_path.read_text(encoding="utf-8"))
            self.required_annotations = doc.get("required_annotations", self.required_annotations)
            if "pair_map" in doc:
                self.pair_map = ClassPairMap.from_dict(doc["pair_map"])
            for td in doc["tasks"]:
                task = AnnotationTask.from_dict(td)
                self._tasks[task.task_id] = task
                self._votes.setdefault(task.task_id, {})
        log_path = self.data_dir / ANNOTATIONS_FILE
        if log_path.exists():
            replayed = 0
            for line in log_path.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                rec = AnnotationRecord.from_dict(json.loads(line))
                self._votes.setdefault(rec.task_id, {})[rec.annotator_id] = rec
                replayed += 1
            if replayed:
                log.info("replayed %d annotation(s) from %s", replayed, log_path)

    def add_tasks(self, tasks: list[AnnotationTask]) -> None:
        with self._lock:
            for task in tasks:
                if task.task_id in self._tasks:
                    raise ValueError(f"duplicate task id {task.task_id!r}")
                self._tasks[task.task_id] = task
                self._votes.setdefault(task.task_id, {})
            self._save_tasks()

    def _save_tasks(self) -> None:
        doc = {
            "required_annotations": self.required_annotations,
            "pair_map": self.pair_map.as_dict(),
            "tasks": [t.to_dict() for t in sorted(self._tasks.values(), key=lambda t: t.task_id)],
        }
        (self.data_dir / TASKS_FILE).write_text(
            json.dumps(doc, indent=2, sort_keys=True), encoding="utf-8"
        )

    # ---------- queries ----------

    def task(self, task_id: str) -> AnnotationTask:
        try:
            return self._tasks[task_id]
        except KeyError:
            raise UnknownTaskError(task_id) from None

    def tasks(self) -> list[AnnotationTask]:
        return sorted(self._tasks.values(), key=lambda t: t.task_id)

    def vote_count(self, task_id: str) -> int:
        return len(self._votes.get(task_id, {}))

    def is_complete(self, task_id: str) -> bool:
        return self.vote_count(task_id) >= self.task(task_id).required_annotations

    def next_task(self, annotator_id: str) -> AnnotationTask | None:
        """An open task this annotator has not answered, preferring fewest
        votes and then the lowest task id; None when exhausted."""
        if not annotator_id:
            raise ValueError("annotator_id must be non-empty")
        with self._lock:
            candidates = [
                t
                for t in self._tasks.values()
                if not self.is_complete(t.task_id)
                and annotator_id not in self._votes[t.task_id]
            ]
            if not candidates:
                return None
            return min(candidates, key=lambda t: (self.vote_count(t.task_id), t.task_id))

    def progress(self) -> dict:
        with self._lock:
            complete = sum(1 for tid in self._tasks if self.is_complete(tid))
            return {
                "open": len(self._tasks) - complete,
                "complete": complete,
                "total_votes": sum(len(v) for v in self._votes.values()),
            }

    # ---------- mutation ----------

    def submit(
        self,
        task_id: str,
        annotator_id: str,
        flower_class: str | FlowerClass,
        client_timestamp: str | None = None,
    ) -> AnnotationRecord:
        """Record one vote. The record is durably appended before the call
        returns; a duplicate (task, annotator) or a vote on a completed task
        is rejected without touching the log."""
        if not annotator_id:
            raise InvalidClassError("annotator_id must be non-empty")
        if isinstance(flower_class, str):
            try:
                flower_class = FlowerClass.from_name(flower_class)
            except ValueError as exc:
                raise InvalidClassError(str(exc)) from None
        with self._lock:
            task = self.task(task_id)
            votes = self._votes[task_id]
            if annotator_id in votes:
                raise DuplicateVoteError(
                    f"annotator {annotator_id!r} already voted on {task_id}"
                )
            if len(votes) >= task.required_annotations:
                raise TaskClosedError(f"task {task_id} is already complete")
            rec = AnnotationRecord(
                task_id=task_id,
                annotator_id=annotator_id,
                flower_class=flower_class,
                client_timestamp=client_timestamp,
                server_timestamp=datetime.datetime.now(datetime.timezone.utc).isoformat(),
            )
            with open(self.data_dir / ANNOTATIONS_FILE, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(rec.to_dict(), sort_keys=True) + "\n")
                fh.flush()
                os.fsync(fh.fileno())
            votes[annotator_id] = rec
            return rec

    # ---------- aggregation ----------

    def aggregate(self, task_id: str) -> AggregatedLabel:
        """Majority flower class (ties to the lowest class index), mapped
        back to the cell domain through the pairing."""
        task = self.task(task_id)
        votes = self._votes.get(task_id, {})
        if not votes:
            raise ValueError(f"task {task_id} has no votes to aggregate")
        hist = Counter(rec.flower_class for rec in votes.values())
        winner = min(hist, key=lambda f: (-hist[f], f.index))
        return AggregatedLabel(
            source_record_id=task.source_record_id,
            winning_flower=winner,
            mapped_cell=self.pair_map.to_cell(winner),
            histogram={f.name: hist.get(f, 0) for f in FlowerClass if hist.get(f, 0)},
            agreement=hist[winner] / sum(hist.values()),
        )

    def export_labels(self) -> tuple[DatasetManifest, list[AggregatedLabel]]:
        """Crowd labels for all complete tasks as a cell-domain manifest
        (plus the per-task aggregates). Empty when nothing is complete."""
        records: list[ImageRecord] = []
        aggregates: list[AggregatedLabel] = []
        for task in self.tasks():
            if not self.is_complete(task.task_id):
                continue
            agg = self.aggregate(task.task_id)
            aggregates.append(agg)
            records.append(
                ImageRecord(
                    id=task.source_record_id,
                    path=task.source_record_path,
                    domain="cell",
                    class_label=agg.mapped_cell,
                )
            )
        if not records:
            log.warning("export requested but no task is complete yet")
        return DatasetManifest(records=records, domain="cell"), aggregates

    def export_jsonl(self) -> str:
        """Crowd-label manifest as JSON Lines (manifest schema plus an
        agreement field per row)."""
        manifest, aggregates = self.export_labels()
        lines = [
            json.dumps(
                {"domain": "cell", "seed": 0, "census": manifest.census}, sort_keys=True
            )
        ]
        for rec, agg in zip(manifest.records, aggregates):
            row = rec.to_dict()
            row["agreement"] = agg.agreement
            row["votes"] = agg.histogram
            lines.append(json.dumps(row, sort_keys=True))
        return "\n".join(lines) + "\n"
