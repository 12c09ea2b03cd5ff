"""Verification-loop store: predictions to review, expert verdicts, model
versions, and monitoring snapshots.

Persistence is a single append-only JSON Lines event log per store
directory; state is rebuilt by replaying it, so identical logs always
yield identical stores.  Timestamps are logical sequence numbers, which
keeps every derived artifact byte-reproducible.  ``compact()`` writes a
state snapshot file that accelerates reopening without deleting any event.
"""
from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from . import annotator as annotator_module
from .annotator import AnnotationModel, Prediction, TrainingExample, load_model, save_model
from .evaluation import (
    per_concept_by_group,
    per_concept_table,
    per_group_table,
    per_sentence_metrics,
    summarize_metrics,
)
from .fairness import GroupComparison, compare_groups
from .taxonomy import Taxonomy


class WorkflowError(Exception):
    pass


class UnknownModelVersion(WorkflowError):
    pass


class UnknownTask(WorkflowError):
    pass


class IncompleteDecisions(WorkflowError):
    pass


class InvalidVerdict(WorkflowError):
    pass


class NoNewVerdicts(WorkflowError):
    pass


class NoVerdictsForBatch(WorkflowError):
    pass


@dataclass
class TaskState:
    task_id: str
    doc_id: str
    idx: int
    text: str
    predicted: tuple[tuple[str, float], ...]
    model_version: int
    status: str  # "pending" | "done"
    created_at: int

    def predicted_codes(self) -> set[str]:
        return {c for c, _ in self.predicted}

    def as_dict(self, stale: bool) -> dict:
        return {
            "task_id": self.task_id,
            "doc_id": self.doc_id,
            "idx": self.idx,
            "text": self.text,
            "predicted": [{"code": c, "score": round(s, 4)} for c, s in self.predicted],
            "model_version": self.model_version,
            "status": self.status,
            "created_at": self.created_at,
            "stale": stale,
        }


@dataclass(frozen=True)
class VerdictRecord:
    task_id: str
    annotator_id: str
    decisions: Mapping[str, str]      # code -> "correct" | "incorrect"
    added_concepts: tuple[str, ...]
    submitted_at: int

    def positive_codes(self) -> frozenset[str]:
        correct = {c for c, d in self.decisions.items() if d == "correct"}
        return frozenset(correct | set(self.added_concepts))


@dataclass(frozen=True)
class ModelVersionInfo:
    version: int
    path: str
    training_batches: tuple[str, ...]
    created_at: int


def _task_id(version: int, doc_id: str, idx: int) -> str:
    return f"v{version}:{doc_id}:{idx}"


class Store:
    """Event-sourced store for one annotation project.

    Corpus-side context (taxonomy, document demographic groups, batch
    membership) is supplied at open time; only workflow events persist in
    the log.
    """

    def __init__(self, directory: str | Path, taxonomy: Taxonomy,
                 doc_groups: Mapping[str, str] | None = None,
                 batches: Mapping[str, Sequence[str]] | None = None) -> None:
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        (self.directory / "models").mkdir(exist_ok=True)
        self.taxonomy = taxonomy
        self.doc_groups = dict(doc_groups or {})
        self.batches = {b: tuple(docs) for b, docs in (batches or {}).items()}

        self.seq = 0
        self.versions: dict[int, ModelVersionInfo] = {}
        self.tasks: dict[str, TaskState] = {}
        self.task_order: list[str] = []
        self.verdict_log: list[VerdictRecord] = []
        self.latest_verdict: dict[str, VerdictRecord] = {}
        self.verdict_authors: dict[str, set[str]] = {}
        self.auto_skipped: set[str] = set()
        self.unconsumed: list[str] = []  # task ids with fresh training material
        self.snapshots: dict[tuple[int, str], list[dict]] = {}

        self._model_cache: dict[int, AnnotationModel] = {}
        # Single-writer rule: every event append is serialized; readers see
        # immutable snapshots of already-applied events.
        self._write_lock = threading.RLock()
        self._replay()

    # -- event plumbing ----------------------------------------------------

    @property
    def log_path(self) -> Path:
        return self.directory / "events.jsonl"

    @property
    def snapshot_path(self) -> Path:
        return self.directory / "state.json"

    def _replay(self) -> None:
        start_seq = 0
        if self.snapshot_path.exists():
            state = json.loads(self.snapshot_path.read_text(encoding="utf-8"))
            self._restore_state(state)
            start_seq = self.seq
        if self.log_path.exists():
            with self.log_path.open(encoding="utf-8") as fp:
                for line in fp:
                    line = line.strip()
                    if not line:
                        continue
                    event = json.loads(line)
                    if event["seq"] <= start_seq:
                        continue
                    self._apply(event)

    def _append(self, event: dict) -> dict:
        with self._write_lock:
            self.seq += 1
            event = {"seq": self.seq, **event}
            with self.log_path.open("a", encoding="utf-8") as fp:
                fp.write(json.dumps(event, sort_keys=True, ensure_ascii=False) + "\n")
            self._apply(event, advance_seq=False)
            return event

    def _apply(self, event: dict, advance_seq: bool = True) -> None:
        if advance_seq:
            self.seq = event["seq"]
        kind = event["type"]
        if kind == "model_registered":
            info = ModelVersionInfo(
                version=event["version"], path=event["path"],
                training_batches=tuple(event["batches"]), created_at=event["seq"])
            self.versions[info.version] = info
            consumed = set(event.get("consumed", ()))
            self.unconsumed = [t for t in self.unconsumed if t not in consumed]
        elif kind == "predictions_enqueued":
            for t in event["tasks"]:
                task = TaskState(
                    task_id=t["task_id"], doc_id=t["doc_id"], idx=t["idx"],
                    text=t["text"],
                    predicted=tuple((c, s) for c, s in t["predicted"]),
                    model_version=event["model_version"],
                    status="pending", created_at=event["seq"])
                self.tasks[task.task_id] = task
                self.task_order.append(task.task_id)
            self.auto_skipped.update(event["skipped"])
        elif kind == "verdict_recorded":
            record = VerdictRecord(
                task_id=event["task_id"], annotator_id=event["annotator_id"],
                decisions=dict(event["decisions"]),
                added_concepts=tuple(event["added_concepts"]),
                submitted_at=event["seq"])
            task = self.tasks[record.task_id]
            self.verdict_log.append(record)
            self.latest_verdict[record.task_id] = record
            self.verdict_authors.setdefault(record.task_id, set()).add(record.annotator_id)
            task.status = "done"
            if record.positive_codes():
                if record.task_id in self.unconsumed:
                    self.unconsumed.remove(record.task_id)
                self.unconsumed.append(record.task_id)
        elif kind == "snapshot":
            key = (event["model_version"], event["batch_id"])
            self.snapshots.setdefault(key, []).append(event["payload"])
        else:
            raise WorkflowError(f"unknown event type {kind!r}")

    # -- compaction ---------------------------------------------------------

    def compact(self) -> None:
        """Write a state snapshot so reopening skips replaying old events.

        The event log itself is never truncated; it remains the audit
        trail.
        """
        state = {
            "seq": self.seq,
            "versions": [
                {"version": v.version, "path": v.path,
                 "batches": list(v.training_batches), "created_at": v.created_at}
                for _, v in sorted(self.versions.items())
            ],
            "tasks": [
                {**{k: getattr(t, k) for k in
                    ("task_id", "doc_id", "idx", "text", "model_version",
                     "status", "created_at")},
                 "predicted": [list(p) for p in t.predicted]}
                for t in (self.tasks[tid] for tid in self.task_order)
            ],
            "verdicts": [
                {"task_id": r.task_id, "annotator_id": r.annotator_id,
                 "decisions": dict(r.decisions),
                 "added_concepts": list(r.added_concepts),
                 "submitted_at": r.submitted_at}
                for r in self.verdict_log
            ],
            "auto_skipped": sorted(self.auto_skipped),
            "unconsumed": list(self.unconsumed),
            "snapshots": [
                {"model_version": v, "batch_id": b, "payload": payload}
                for (v, b), payloads in sorted(self.snapshots.items())
                for payload in payloads
            ],
        }
        self.snapshot_path.write_text(
            json.dumps(state, sort_keys=True, ensure_ascii=False), encoding="utf-8")

    def _restore_state(self, state: dict) -> None:
        self.seq = state["seq"]
        for v in state["versions"]:
            self.versions[v["version"]] = ModelVersionInfo(
                v["version"], v["path"], tuple(v["batches"]), v["created_at"])
        for t in state["tasks"]:
            task = TaskState(
                task_id=t["task_id"], doc_id=t["doc_id"], idx=t["idx"],
                text=t["text"], predicted=tuple((c, s) for c, s in t["predicted"]),
                model_version=t["model_version"], status=t["status"],
                created_at=t["created_at"])
            self.tasks[task.task_id] = task
            self.task_order.append(task.task_id)
        for r in state["verdicts"]:
            record = VerdictRecord(
                task_id=r["task_id"], annotator_id=r["annotator_id"],
                decisions=dict(r["decisions"]),
                added_concepts=tuple(r["added_concepts"]),
                submitted_at=r["submitted_at"])
            self.verdict_log.append(record)
            self.latest_verdict[record.task_id] = record
            self.verdict_authors.setdefault(record.task_id, set()).add(record.annotator_id)
        self.auto_skipped = set(state["auto_skipped"])
        self.unconsumed = list(state["unconsumed"])
        for s in state["snapshots"]:
            self.snapshots.setdefault(
                (s["model_version"], s["batch_id"]), []).append(s["payload"])

    # -- model registry ------------------------------------------------------

    @property
    def current_version(self) -> int | None:
        return max(self.versions) if self.versions else None

    def register_model(self, model: AnnotationModel,
                       training_batches: Sequence[str] = ()) -> ModelVersionInfo:
        if model.version in self.versions:
            raise WorkflowError(f"model version {model.version} already registered")
        path = self.directory / "models" / f"v{model.version}.json"
        save_model(model, path)
        self._model_cache[model.version] = model
        self._append({
            "type": "model_registered", "version": model.version,
            "path": str(path), "batches": list(training_batches), "consumed": [],
        })
        return self.versions[model.version]

    def model_for(self, version: int) -> AnnotationModel:
        if version not in self.versions:
            raise UnknownModelVersion(f"model version {version} not registered")
        if version not in self._model_cache:
            self._model_cache[version] = load_model(self.versions[version].path)
        return self._model_cache[version]

    # -- verification loop ---------------------------------------------------

    def is_stale(self, task: TaskState) -> bool:
        return (task.status == "pending"
                and self.current_version is not None
                and task.model_version < self.current_version)

    def enqueue_predictions(self, predictions: Iterable[Prediction],
                            texts: Mapping[tuple[str, int], str] | None = None
                            ) -> int:
        """Create one pending task per sentence with predictions.

        Idempotent per (sentence, model version); sentences with empty
        predictions are recorded as auto-skipped.  ``texts`` supplies the
        sentence texts shown to reviewers and reused for retraining.
        """
        texts = texts or {}
        per_version: dict[int, tuple[list[dict], list[str]]] = {}
        for pred in predictions:
            if pred.model_version not in self.versions:
                raise UnknownModelVersion(
                    f"predictions reference unregistered version {pred.model_version}")
            doc_id, idx = pred.sentence_id
            tid = _task_id(pred.model_version, doc_id, idx)
            if tid in self.tasks or tid in self.auto_skipped:
                continue
            new_tasks, skipped = per_version.setdefault(pred.model_version, ([], []))
            if tid in skipped or any(t["task_id"] == tid for t in new_tasks):
                continue
            if not pred.assigned:
                skipped.append(tid)
                continue
            new_tasks.append({
                "task_id": tid, "doc_id": doc_id, "idx": idx,
                "text": texts.get((doc_id, idx), ""),
                "predicted": [[c, s] for c, s in pred.assigned],
            })
        created = 0
        for version in sorted(per_version):
            new_tasks, skipped = per_version[version]
            if new_tasks or skipped:
                self._append({
                    "type": "predictions_enqueued", "model_version": version,
                    "tasks": new_tasks, "skipped": skipped,
                })
            created += len(new_tasks)
        return created

    def next_task(self, annotator_id: str) -> dict | None:
        """Oldest pending task without a verdict from this annotator."""
        for tid in self.task_order:
            task = self.tasks[tid]
            if task.status != "pending":
                continue
            if annotator_id in self.verdict_authors.get(tid, set()):
                continue
            return task.as_dict(stale=self.is_stale(task))
        return None

    def record_verdict(self, task_id: str, annotator_id: str,
                       decisions: Mapping[str, str],
                       added_concepts: Sequence[str] = ()
                       ) -> tuple[dict, TrainingExample | None]:
        """Apply one expert verdict; returns task view + derived example.

        Every predicted concept needs a correct/incorrect decision; added
        concepts must be annotatable and not among the predictions.  Later
        verdicts on a done task are retained (last write wins for training
        derivation).
        """
        task = self.tasks.get(task_id)
        if task is None:
            raise UnknownTask(f"no task {task_id!r}")
        predicted = task.predicted_codes()
        missing = predicted - set(decisions)
        if missing:
            raise IncompleteDecisions(
                f"missing decisions for predicted concepts: {sorted(missing)}")
        extra = set(decisions) - predicted
        if extra:
            raise InvalidVerdict(f"decisions for unpredicted concepts: {sorted(extra)}")
        for code, decision in decisions.items():
            if decision not in ("correct", "incorrect"):
                raise InvalidVerdict(f"decision for {code} must be correct|incorrect")
        added_codes = []
        for concept in added_concepts:
            node = self.taxonomy.require_annotatable(concept)
            if node.code in predicted:
                raise InvalidVerdict(f"added concept {concept!r} was already predicted")
            added_codes.append(node.code)

        self._append({
            "type": "verdict_recorded", "task_id": task_id,
            "annotator_id": annotator_id,
            "decisions": dict(sorted(decisions.items())),
            "added_concepts": sorted(added_codes),
        })
        return (self.tasks[task_id].as_dict(stale=self.is_stale(task)),
                self.derived_example(task_id))

    def derived_example(self, task_id: str) -> TrainingExample | None:
        """Training example from the latest verdict on a task, if any."""
        record = self.latest_verdict.get(task_id)
        if record is None:
            return None
        labels = record.positive_codes()
        if not labels:
            return None
        task = self.tasks[task_id]
        return TrainingExample(
            doc_id=task.doc_id, idx=task.idx, text=task.text,
            concepts=labels, source="verdict")

    def trigger_retrain(self, batch_id: str | None = None) -> ModelVersionInfo:
        """Retrain the current model on fresh verdict-derived examples."""
        with self._write_lock:
            return self._trigger_retrain_locked(batch_id)

    def _trigger_retrain_locked(self, batch_id: str | None) -> ModelVersionInfo:
        if self.current_version is None:
            raise UnknownModelVersion("no model registered")
        consumable = [tid for tid in self.unconsumed
                      if self.derived_example(tid) is not None]
        if not consumable:
            raise NoNewVerdicts("no new verdict-derived examples since last version")
        examples = [self.derived_example(tid) for tid in consumable]
        model = self.model_for(self.current_version)
        new_model = annotator_module.update_with_verdicts(
            model, examples, batch_id=batch_id)
        path = self.directory / "models" / f"v{new_model.version}.json"
        save_model(new_model, path)
        self._model_cache[new_model.version] = new_model
        self._append({
            "type": "model_registered", "version": new_model.version,
            "path": str(path),
            "batches": [new_model.training_log[-1][0]],
            "consumed": list(consumable),
        })
        return self.versions[new_model.version]

    # -- monitoring ----------------------------------------------------------

    def counts(self) -> dict[str, int]:
        pending = sum(1 for t in self.tasks.values()
                      if t.status == "pending" and not self.is_stale(t))
        stale = sum(1 for t in self.tasks.values() if self.is_stale(t))
        done = sum(1 for t in self.tasks.values() if t.status == "done")
        return {"pending": pending, "stale": stale, "done": done,
                "skipped": len(self.auto_skipped), "total": len(self.tasks)}

    def _batch_docs(self, batch_id: str) -> set[str]:
        if batch_id not in self.batches:
            raise NoVerdictsForBatch(f"unknown batch {batch_id!r}")
        return set(self.batches[batch_id])

    def _gold_pred_for(self, model_version: int, batch_id: str
                       ) -> tuple[dict, dict, int, int]:
        if model_version not in self.versions:
            raise UnknownModelVersion(f"model version {model_version} not registered")
        docs = self._batch_docs(batch_id)
        gold: dict[tuple[str, int], set[str]] = {}
        pred: dict[tuple[str, int], set[str]] = {}
        enqueued = 0
        for tid in self.task_order:
            task = self.tasks[tid]
            if task.model_version != model_version or task.doc_id not in docs:
                continue
            enqueued += 1
            record = self.latest_verdict.get(tid)
            if record is None:
                continue
            sid = (task.doc_id, task.idx)
            pred[sid] = task.predicted_codes()
            gold[sid] = set(record.positive_codes())
        if not gold:
            raise NoVerdictsForBatch(
                f"batch {batch_id!r} has no verdicts for model version {model_version}")
        return gold, pred, len(gold), enqueued

    def snapshot_metrics(self, model_version: int, batch_id: str) -> dict:
        """Metrics snapshot for one (model version, batch), persisted.

        Gold sets come from the latest verdict per task; the negative
        universe is the evaluated model's trained concept set.
        """
        gold, pred, judged, enqueued = self._gold_pred_for(model_version, batch_id)
        model = self.model_for(model_version)
        universe = set(model.prototypes)
        for sets in list(gold.values()) + list(pred.values()):
            universe |= sets

        overall = summarize_metrics(per_sentence_metrics(pred, gold, universe))
        concept_rows = per_concept_table(pred, gold, universe)
        group_table = per_group_table(pred, gold, self.doc_groups)
        by_group = per_concept_by_group(pred, gold, self.doc_groups)

        payload = {
            "model_version": model_version,
            "batch_id": batch_id,
            "coverage": judged / enqueued if enqueued else 0.0,
            "sentences_judged": judged,
            "overall": {
                name: {"mean": mean, "sd": sd}
                for name, (mean, sd) in overall.items()
            },
            "per_concept": [
                {
                    "code": code,
                    "label": model.label_of(code),
                    "tp": row.counts.tp, "fp": row.counts.fp,
                    "fn": row.counts.fn, "tn": row.counts.tn,
                    "pct_correct": row.pct_correct,
                }
                for code, row in concept_rows.items()
            ],
            "per_group": {
                "rows": [
                    {"group": g, "correct": r.correct, "incorrect": r.incorrect,
                     "pct_correct": r.pct_correct}
                    for g, r in group_table.rows.items()
                ],
                "sum_correct": group_table.sum_correct,
                "sum_incorrect": group_table.sum_incorrect,
                "overall_pct": group_table.overall_pct,
                "group_pct_sd": group_table.group_pct_sd,
            },
            "per_concept_by_group": {
                code: dict(groups) for code, groups in by_group.items()
            },
        }
        self._append({
            "type": "snapshot", "model_version": model_version,
            "batch_id": batch_id, "payload": payload,
        })
        return payload

    def latest_snapshot(self, model_version: int, batch_id: str) -> dict | None:
        history = self.snapshots.get((model_version, batch_id), [])
        return history[-1] if history else None

    def fairness_comparison(self, model_version: int, batch_id: str,
                            group_a: str, group_b: str) -> GroupComparison:
        """Wilcoxon comparison of two demographic groups on one batch."""
        gold, pred, _, _ = self._gold_pred_for(model_version, batch_id)
        table = per_concept_by_group(pred, gold, self.doc_groups)
        return compare_groups(table, group_a, group_b)
