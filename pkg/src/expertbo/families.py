"""Synthetic source-task families with disjoint train/val/test splits.

Two generators:

* ``random_feature`` — smooth functions built from a sum of cosine features
  with random frequencies and phases; smoothness set by a lengthscale.
* ``multimodal`` — a family-level layout of Gaussian bumps, randomly
  shifted / scaled / rotated per task.

Every generated task stores its parameter vectors, so a family serializes to
JSON and rebuilds bit-exactly, and records a known optimum located by a dense
grid plus local refinement at construction time.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from .errors import InvalidFamily
from .tasks import BlackBoxTask, Optimum, SearchSpace, sample_space

FAMILY_FORMAT_VERSION = 1

GRID_BUDGET_LOW_DIM = 10_000   # dense grid, dims <= 3
GRID_BUDGET_HIGH_DIM = 100_000  # Latin hypercube, dims > 3
REFINE_STARTS = 5


@dataclass(frozen=True)
class FamilyConfig:
    """Generator parameters for a synthetic task family."""

    dims: int = 2
    n_train: int = 6
    n_val: int = 2
    n_test: int = 3
    kind: str = "random_feature"  # or "multimodal"
    lower: Optional[list] = None
    upper: Optional[list] = None
    # random_feature knobs
    n_features: int = 64
    lengthscale: float = 0.3
    amplitude: float = 1.0
    # multimodal knobs
    n_bumps: int = 5
    bump_width: tuple = (0.08, 0.18)
    shift_scale: float = 0.12
    amp_range: tuple = (0.85, 1.2)

    def space(self) -> SearchSpace:
        lower = np.zeros(self.dims) if self.lower is None else np.asarray(self.lower)
        upper = np.ones(self.dims) if self.upper is None else np.asarray(self.upper)
        return SearchSpace(lower, upper)


@dataclass(frozen=True)
class TaskFamily:
    train: tuple
    val: tuple
    test: tuple
    family_config: FamilyConfig
    seed: int

    @property
    def space(self) -> SearchSpace:
        return self.train[0].space if self.train else self.family_config.space()

    def all_tasks(self):
        return list(self.train) + list(self.val) + list(self.test)

    def task_by_id(self, task_id: str) -> BlackBoxTask:
        for t in self.all_tasks():
            if t.task_id == task_id:
                return t
        raise KeyError(f"no task {task_id!r} in family")


def _rf_fn(space: SearchSpace, params: dict):
    omega = np.asarray(params["omega"], dtype=float)       # (K, d)
    phase = np.asarray(params["phase"], dtype=float)       # (K,)
    coef = np.asarray(params["coef"], dtype=float)         # (K,)
    amplitude = float(params["amplitude"])
    k = omega.shape[0]
    scale = amplitude * np.sqrt(2.0 / k)
    lower, widths = space.lower, space.widths

    def fn(X: np.ndarray) -> np.ndarray:
        u = (np.asarray(X, dtype=float) - lower) / widths
        return scale * np.cos(u @ omega.T + phase) @ coef

    return fn


def _mm_fn(space: SearchSpace, params: dict):
    centers = np.asarray(params["centers"], dtype=float)   # (C, d)
    radii = np.asarray(params["radii"], dtype=float)       # (C,)
    weights = np.asarray(params["weights"], dtype=float)   # (C,)
    rot = np.asarray(params["rotation"], dtype=float)      # (d, d)
    shift = np.asarray(params["shift"], dtype=float)       # (d,)
    amp = float(params["amp"])
    lower, widths = space.lower, space.widths

    def fn(X: np.ndarray) -> np.ndarray:
        u = (np.asarray(X, dtype=float) - lower) / widths
        v = (u - 0.5) @ rot.T + 0.5 + shift
        d2 = ((v[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        return amp * (weights * np.exp(-d2 / (2.0 * radii**2))).sum(axis=1)

    return fn


_GENERATORS = {"random_feature": _rf_fn, "multimodal": _mm_fn}


def _draw_rf_params(cfg: FamilyConfig, rng: np.random.Generator) -> dict:
    return {
        "omega": rng.normal(0.0, 1.0 / cfg.lengthscale, size=(cfg.n_features, cfg.dims)).tolist(),
        "phase": rng.uniform(0.0, 2.0 * np.pi, size=cfg.n_features).tolist(),
        "coef": rng.normal(0.0, 1.0, size=cfg.n_features).tolist(),
        "amplitude": cfg.amplitude,
    }


def _draw_mm_params(cfg: FamilyConfig, layout: dict, rng: np.random.Generator) -> dict:
    if cfg.dims == 1:
        rot = np.array([[rng.choice([-1.0, 1.0])]])
    else:
        q, r = np.linalg.qr(rng.normal(size=(cfg.dims, cfg.dims)))
        rot = q * np.sign(np.diag(r))
    return {
        "centers": layout["centers"],
        "radii": layout["radii"],
        "weights": layout["weights"],
        "rotation": rot.tolist(),
        "shift": rng.uniform(-cfg.shift_scale, cfg.shift_scale, size=cfg.dims).tolist(),
        "amp": float(rng.uniform(*cfg.amp_range)),
    }


def _locate_optimum(space: SearchSpace, fn, seed: int) -> Optimum:
    d = space.dims
    if d <= 3:
        per_dim = int(np.ceil(GRID_BUDGET_LOW_DIM ** (1.0 / d)))
        axes = [np.linspace(space.lower[j], space.upper[j], per_dim) for j in range(d)]
        mesh = np.meshgrid(*axes, indexing="ij")
        grid = np.stack([m.ravel() for m in mesh], axis=1)
    else:
        grid = sample_space(space, GRID_BUDGET_HIGH_DIM, "latin_hypercube", seed)
    vals = fn(grid)
    order = np.argsort(vals)[::-1][:REFINE_STARTS]
    best_x, best_v = grid[order[0]], float(vals[order[0]])
    bounds = list(zip(space.lower, space.upper))
    for i in order:
        res = minimize(
            lambda x: -float(fn(x[None, :])[0]),
            grid[i],
            method="L-BFGS-B",
            bounds=bounds,
        )
        if -res.fun > best_v:
            best_x, best_v = space.clip(res.x), -float(res.fun)
    # re-evaluate so the stored value equals fn at the stored point exactly
    best_v = float(fn(best_x[None, :])[0])
    return Optimum(best_x, best_v)


def _build_task(task_id: str, cfg: FamilyConfig, space: SearchSpace, params: dict, seed: int) -> BlackBoxTask:
    fn = _GENERATORS[cfg.kind](space, params)
    opt = _locate_optimum(space, fn, seed)
    return BlackBoxTask(task_id, space, fn, known_optimum=opt, params=params)


def make_synthetic_family(config: FamilyConfig, seed: int) -> TaskFamily:
    """Generate a family of related tasks over one shared search space."""
    if config.n_train <= 0:
        raise InvalidFamily("a family needs at least one training task")
    if config.kind not in _GENERATORS:
        raise InvalidFamily(f"unknown family kind {config.kind!r}")
    space = config.space()
    root = np.random.SeedSequence([int(seed), 0xFA417])
    layout = None
    if config.kind == "multimodal":
        layout_rng = np.random.default_rng(root.spawn(1)[0])
        centers = layout_rng.uniform(0.12, 0.88, size=(config.n_bumps, config.dims))
        radii = layout_rng.uniform(*config.bump_width, size=config.n_bumps)
        weights = layout_rng.uniform(0.35, 0.8, size=config.n_bumps)
        weights[int(layout_rng.integers(config.n_bumps))] = 1.0
        layout = {
            "centers": centers.tolist(),
            "radii": radii.tolist(),
            "weights": weights.tolist(),
        }

    splits = {"train": config.n_train, "val": config.n_val, "test": config.n_test}
    tasks = {"train": [], "val": [], "test": []}
    task_seq = root.spawn(sum(splits.values()) + 1)[1:]
    idx = 0
    for split, count in splits.items():
        for i in range(count):
            rng = np.random.default_rng(task_seq[idx])
            if config.kind == "random_feature":
                params = _draw_rf_params(config, rng)
            else:
                params = _draw_mm_params(config, layout, rng)
            task_id = f"{split}-{i}"
            tasks[split].append(
                _build_task(task_id, config, space, params, seed=int(seed) + idx)
            )
            idx += 1
    return TaskFamily(
        train=tuple(tasks["train"]),
        val=tuple(tasks["val"]),
        test=tuple(tasks["test"]),
        family_config=config,
        seed=int(seed),
    )


def family_to_json(family: TaskFamily) -> dict:
    cfg = asdict(family.family_config)
    cfg["bump_width"] = list(family.family_config.bump_width)
    cfg["amp_range"] = list(family.family_config.amp_range)
    doc = {
        "format_version": FAMILY_FORMAT_VERSION,
        "seed": family.seed,
        "family_config": cfg,
        "space": family.space.to_json(),
        "tasks": [],
    }
    for split in ("train", "val", "test"):
        for t in getattr(family, split):
            doc["tasks"].append(
                {
                    "task_id": t.task_id,
                    "split": split,
                    "params": t.params,
                    "optimum": {
                        "point": t.known_optimum.point.tolist(),
                        "value": t.known_optimum.value,
                    },
                }
            )
    return doc


def family_from_json(doc: dict) -> TaskFamily:
    if doc.get("format_version") != FAMILY_FORMAT_VERSION:
        raise InvalidFamily(f"unsupported family format {doc.get('format_version')!r}")
    raw_cfg = dict(doc["family_config"])
    raw_cfg["bump_width"] = tuple(raw_cfg["bump_width"])
    raw_cfg["amp_range"] = tuple(raw_cfg["amp_range"])
    cfg = FamilyConfig(**raw_cfg)
    space = SearchSpace.from_json(doc["space"])
    buckets = {"train": [], "val": [], "test": []}
    for entry in doc["tasks"]:
        fn = _GENERATORS[cfg.kind](space, entry["params"])
        opt = Optimum(np.asarray(entry["optimum"]["point"]), entry["optimum"]["value"])
        buckets[entry["split"]].append(
            BlackBoxTask(entry["task_id"], space, fn, known_optimum=opt, params=entry["params"])
        )
    return TaskFamily(
        train=tuple(buckets["train"]),
        val=tuple(buckets["val"]),
        test=tuple(buckets["test"]),
        family_config=cfg,
        seed=int(doc["seed"]),
    )


def save_family(family: TaskFamily, path) -> None:
    Path(path).write_text(json.dumps(family_to_json(family)), encoding="utf-8")


def load_family(path) -> TaskFamily:
    return family_from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def task_to_json(task: BlackBoxTask, kind: str) -> dict:
    """Serialize one synthetic task so a run record is self-contained."""
    if task.params is None:
        raise InvalidFamily(f"task {task.task_id} has no generator parameters")
    return {
        "task_id": task.task_id,
        "kind": kind,
        "space": task.space.to_json(),
        "params": task.params,
        "optimum": None
        if task.known_optimum is None
        else {
            "point": task.known_optimum.point.tolist(),
            "value": task.known_optimum.value,
        },
    }


def task_from_json(doc: dict) -> BlackBoxTask:
    space = SearchSpace.from_json(doc["space"])
    fn = _GENERATORS[doc["kind"]](space, doc["params"])
    opt = None
    if doc.get("optimum") is not None:
        opt = Optimum(np.asarray(doc["optimum"]["point"]), doc["optimum"]["value"])
    return BlackBoxTask(doc["task_id"], space, fn, known_optimum=opt, params=doc["params"])
