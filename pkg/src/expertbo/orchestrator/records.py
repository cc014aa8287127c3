"""Replayable run records with integrity hashing.

A record embeds everything needed to reproduce its regret trace: the task's
generator parameters, a checkpoint reference with digest, the preference
dataset, every candidate pair and choice, and all derived seeds. Wall-clock
fields are excluded from the integrity hash so that re-runs of the same
configuration hash identically.
"""
from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from ..errors import RecordError
from ..families import task_from_json, task_to_json
from ..preference import PreferenceDataset

RECORD_FORMAT_VERSION = 1
STEP_SEED_BASE = 10


def _canonical(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def _integrity(payload: dict) -> str:
    return hashlib.sha256(_canonical(payload).encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class RunRecord:
    format_version: int
    method: str
    config: dict
    task: dict
    model_ref: Optional[dict]
    pref_dataset: Optional[str]  # JSON lines
    history: list
    regret: Optional[list]
    n_evaluations: int
    context: dict
    wall_ms: list
    timestamps: dict
    integrity: str

    @staticmethod
    def build(
        method: str,
        config: dict,
        task,
        task_kind: str,
        model_ref: Optional[str],
        pref_dataset: Optional[PreferenceDataset],
        history: list,
        regret,
        n_evaluations: int,
        context,
        wall_ms: list,
        started: float,
    ) -> "RunRecord":
        task_doc = task_to_json(task, task_kind)
        ref = None
        if model_ref is not None:
            ref = {"path": str(model_ref), "sha256": _file_digest(model_ref)}
        payload = {
            "format_version": RECORD_FORMAT_VERSION,
            "method": method,
            "config": config,
            "task": task_doc,
            "pref_dataset": pref_dataset.to_jsonl() if pref_dataset else None,
            "history": history,
            "regret": None if regret is None else np.asarray(regret).tolist(),
            "n_evaluations": n_evaluations,
            "context": context.to_json(),
        }
        return RunRecord(
            format_version=RECORD_FORMAT_VERSION,
            method=method,
            config=config,
            task=task_doc,
            model_ref=ref,
            pref_dataset=payload["pref_dataset"],
            history=history,
            regret=payload["regret"],
            n_evaluations=n_evaluations,
            context=payload["context"],
            wall_ms=[float(w) for w in wall_ms],
            timestamps={"started": started, "finished": time.time()},
            integrity=_integrity(payload),
        )

    def hash_payload(self) -> dict:
        return {
            "format_version": self.format_version,
            "method": self.method,
            "config": self.config,
            "task": self.task,
            "pref_dataset": self.pref_dataset,
            "history": self.history,
            "regret": self.regret,
            "n_evaluations": self.n_evaluations,
            "context": self.context,
        }

    def verify(self) -> None:
        if _integrity(self.hash_payload()) != self.integrity:
            raise RecordError("integrity hash mismatch: record was modified")

    def regret_trace(self) -> np.ndarray:
        if self.regret is None:
            raise RecordError("record has no regret trace")
        return np.asarray(self.regret, dtype=float)

    def to_json(self) -> dict:
        doc = self.hash_payload()
        doc["model_ref"] = self.model_ref
        doc["wall_ms"] = self.wall_ms
        doc["timestamps"] = self.timestamps
        doc["integrity"] = self.integrity
        return doc

    @staticmethod
    def from_json(doc: dict) -> "RunRecord":
        if doc.get("format_version") != RECORD_FORMAT_VERSION:
            raise RecordError(f"unsupported record format {doc.get('format_version')!r}")
        return RunRecord(
            format_version=doc["format_version"],
            method=doc["method"],
            config=doc["config"],
            task=doc["task"],
            model_ref=doc.get("model_ref"),
            pref_dataset=doc.get("pref_dataset"),
            history=doc["history"],
            regret=doc.get("regret"),
            n_evaluations=doc["n_evaluations"],
            context=doc["context"],
            wall_ms=doc.get("wall_ms", []),
            timestamps=doc.get("timestamps", {}),
            integrity=doc["integrity"],
        )


def _file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def save_run(record: RunRecord, path) -> None:
    Path(path).write_text(
        json.dumps(record.to_json(), sort_keys=True, indent=1), encoding="utf-8"
    )


def load_run(path) -> RunRecord:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise RecordError(f"cannot read record {path}: {exc}") from exc
    return RunRecord.from_json(doc)


def replay(record: RunRecord, model=None) -> np.ndarray:
    """Re-execute a record's pipeline with its stored choices and seeds.

    Returns the replayed regret trace, which must equal the stored one for an
    untampered record; the integrity hash is checked first.
    """
    from ..surrogate import load_model
    from .loop import PrefConfig, RecordedChoiceOracle, SessionConfig, run_hlmbo
    from ..acquisition import SearchConfig

    record.verify()
    if model is None:
        if not record.model_ref:
            raise RecordError("record has no model reference; pass a model")
        if _file_digest(record.model_ref["path"]) != record.model_ref["sha256"]:
            raise RecordError("checkpoint digest mismatch")
        model = load_model(record.model_ref["path"])
    task = task_from_json(record.task)
    c = record.config
    cfg = SessionConfig(
        task=task,
        model=model,
        pref=PrefConfig(
            m_pairs=c["m_pairs"],
            hypothesis_kind=c["hypothesis_kind"],
            boxes=c["hypothesis_boxes"],
        ),
        budget=c["budget"],
        initial=c["initial"],
        gamma=c["gamma"],
        zeta=c["zeta"],
        expert_mode=c["expert_mode"],
        sigma_pref=c["sigma_pref"],
        seed=c["seed"],
        acq=c["acq"],
        explanations=c["explanations"],
        search=SearchConfig(**c["search"]),
        task_kind=record.task["kind"],
    )
    oracle = RecordedChoiceOracle([h["side"] for h in record.history])
    pref = (
        PreferenceDataset.from_jsonl(record.pref_dataset)
        if record.pref_dataset
        else None
    )
    rerun = run_hlmbo(
        cfg,
        expert=oracle,
        pref_dataset=pref,
        method=record.method,
        use_preferences=record.pref_dataset is not None,
    )
    return rerun.regret_trace()
