"""Search spaces, black-box tasks, the simulated expert, and regret accounting.

All types here are immutable after construction and safe to share across
workers. Tasks are deterministic: evaluating the same point twice returns
the same value.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, EmptyRequest, RegretUnavailable

# Vectorized objective: maps an (n, dims) array to an (n,) array of values.
ObjectiveFn = Callable[[np.ndarray], np.ndarray]

BOUNDS_ATOL = 1e-9


@dataclass(frozen=True)
class SearchSpace:
    """Box-bounded input domain."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=float)
        upper = np.asarray(self.upper, dtype=float)
        if lower.ndim != 1 or upper.ndim != 1 or lower.shape != upper.shape:
            raise ValueError("lower and upper must be 1-D and of equal length")
        if not (np.isfinite(lower).all() and np.isfinite(upper).all()):
            raise ValueError("bounds must be finite")
        if not (lower < upper).all():
            raise ValueError("each lower bound must be strictly below its upper bound")
        lower.setflags(write=False)
        upper.setflags(write=False)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def dims(self) -> int:
        return self.lower.shape[0]

    @property
    def widths(self) -> np.ndarray:
        return self.upper - self.lower

    def contains(self, x: np.ndarray, atol: float = BOUNDS_ATOL) -> bool:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dims:
            return False
        return bool(
            (x >= self.lower - atol).all() and (x <= self.upper + atol).all()
        )

    def clip(self, x: np.ndarray) -> np.ndarray:
        return np.clip(np.asarray(x, dtype=float), self.lower, self.upper)

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def to_json(self) -> dict:
        return {"lower": self.lower.tolist(), "upper": self.upper.tolist()}

    @staticmethod
    def from_json(doc: dict) -> "SearchSpace":
        return SearchSpace(np.asarray(doc["lower"]), np.asarray(doc["upper"]))


def unit_space(dims: int) -> SearchSpace:
    return SearchSpace(np.zeros(dims), np.ones(dims))


@dataclass(frozen=True)
class Optimum:
    point: np.ndarray
    value: float

    def __post_init__(self):
        point = np.asarray(self.point, dtype=float)
        point.setflags(write=False)
        object.__setattr__(self, "point", point)
        object.__setattr__(self, "value", float(self.value))


@dataclass(frozen=True)
class BlackBoxTask:
    """A deterministic objective over a box-bounded domain.

    ``fn`` is vectorized: it takes an (n, dims) array and returns (n,) values.
    ``params`` holds the generator parameters for synthetic tasks so the task
    can be serialized and rebuilt bit-exactly.
    """

    task_id: str
    space: SearchSpace
    fn: ObjectiveFn
    known_optimum: Optional[Optimum] = None
    params: Optional[dict] = field(default=None, repr=False)


def evaluate(task: BlackBoxTask, x: np.ndarray) -> float:
    """Evaluate the task at a single point. Raises DomainError out of bounds."""
    x = np.asarray(x, dtype=float)
    if x.shape != (task.space.dims,):
        raise DomainError(
            f"point has shape {x.shape}, expected ({task.space.dims},)"
        )
    if not task.space.contains(x):
        raise DomainError(f"point {x.tolist()} outside bounds")
    return float(task.fn(x[None, :])[0])


def evaluate_batch(task: BlackBoxTask, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != task.space.dims:
        raise DomainError(f"batch has shape {X.shape}, expected (n, {task.space.dims})")
    if not task.space.contains(X):
        raise DomainError("batch contains out-of-bounds points")
    return np.asarray(task.fn(X), dtype=float)


@dataclass(frozen=True)
class TaskDataset:
    """Evaluated (x, y) pairs for one task, in observation order."""

    task_id: str
    points: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if points.ndim != 2:
            raise ValueError("points must be a 2-D array (n, dims)")
        if values.ndim != 1 or len(points) != len(values):
            raise ValueError("points and values must have equal length")
        points.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def dims(self) -> int:
        return self.points.shape[1]

    @staticmethod
    def empty(task_id: str, dims: int) -> "TaskDataset":
        return TaskDataset(task_id, np.empty((0, dims)), np.empty((0,)))

    def with_observation(self, x: np.ndarray, y: float) -> "TaskDataset":
        x = np.asarray(x, dtype=float)[None, :]
        return TaskDataset(
            self.task_id,
            np.concatenate([self.points, x]),
            np.concatenate([self.values, [float(y)]]),
        )

    def best(self) -> tuple[np.ndarray, float]:
        if len(self) == 0:
            raise ValueError("empty dataset has no incumbent")
        i = int(np.argmax(self.values))
        return self.points[i], float(self.values[i])

    def to_json(self) -> dict:
        return {
            "task_id": self.task_id,
            "points": self.points.tolist(),
            "values": self.values.tolist(),
        }

    @staticmethod
    def from_json(doc: dict) -> "TaskDataset":
        pts = np.asarray(doc["points"], dtype=float)
        if pts.size == 0:
            pts = pts.reshape(0, 0)
        return TaskDataset(doc["task_id"], pts, np.asarray(doc["values"], dtype=float))


def sample_space(
    space: SearchSpace, n: int, method: str = "uniform", seed: int = 0
) -> np.ndarray:
    """Draw n points from the space.

    ``latin_hypercube`` stratifies each dimension into n equal bins and places
    exactly one sample per bin per dimension.
    """
    if n == 0:
        raise EmptyRequest("requested zero samples")
    if n < 0:
        raise EmptyRequest(f"requested negative sample count {n}")
    rng = np.random.default_rng(seed)
    d = space.dims
    if method == "uniform":
        u = rng.uniform(size=(n, d))
    elif method == "latin_hypercube":
        u = np.empty((n, d))
        for j in range(d):
            perm = rng.permutation(n)
            u[:, j] = (perm + rng.uniform(size=n)) / n
    else:
        raise ValueError(f"unknown sampling method {method!r}")
    return space.lower + u * space.widths


class SimulatedExpert:
    """Synthetic expert that compares two points under Gaussian value noise.

    The noise stream is deterministic given the seed: reconstructing the
    expert with the same seed reproduces the same choice sequence.
    """

    def __init__(self, sigma_pref: float, seed: int = 0):
        if sigma_pref < 0:
            raise ValueError("sigma_pref must be nonnegative")
        self.sigma_pref = float(sigma_pref)
        self.seed = int(seed)
        self._rng = np.random.default_rng(seed)


def simulated_expert_choice(
    expert: SimulatedExpert, task: BlackBoxTask, x1: np.ndarray, x2: np.ndarray
) -> str:
    """Return "first" or "second" per the expert's noisy value comparison.

    Independent noise is added to each side; exact ties go to "first".
    """
    f1 = evaluate(task, x1)
    f2 = evaluate(task, x2)
    if expert.sigma_pref > 0:
        eps = expert._rng.normal(0.0, expert.sigma_pref, size=2)
        f1, f2 = f1 + eps[0], f2 + eps[1]
    return "first" if f1 >= f2 else "second"


def simple_regret(task: BlackBoxTask, history: TaskDataset) -> np.ndarray:
    """Per-step gap between the known optimum and the best value seen so far."""
    if task.known_optimum is None:
        raise RegretUnavailable(f"task {task.task_id} has no known optimum")
    if len(history) == 0:
        raise ValueError("history is empty")
    running_best = np.maximum.accumulate(history.values)
    return task.known_optimum.value - running_best
