"""Decision-support explanations for candidate points.

For each proposed candidate we attribute three scalar targets — its
acquisition score, the surrogate's predicted mean, and the surrogate's
predictive uncertainty — to the input features, with both Shapley values and
a local linear surrogate. Heatmap slices render the same three quantities
over a 2-D cut of the search space with evaluated samples annotated in visit
order.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Optional, Sequence

import numpy as np

from .acquisition import AcquisitionState, DecaySchedule, EiConfig
from .errors import BackgroundRequired, LimeFitError, ShapeError
from .preference import PreferenceModel
from .surrogate import TnpModel, predict
from .tasks import SearchSpace, TaskDataset, sample_space

EXACT_SHAP_MAX_DIMS = 12
TARGET_KINDS = ("acquisition", "surrogate_mean", "surrogate_uncertainty")


@dataclass(frozen=True)
class AttributionTarget:
    """A named scalar function of a point, vectorized over (n, dims) arrays."""

    kind: str
    fn: Callable[[np.ndarray], np.ndarray]

    def __call__(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(self.fn(np.atleast_2d(X)), dtype=float)


def make_targets(
    model: TnpModel,
    context: TaskDataset,
    space: SearchSpace,
    cfg: EiConfig,
    pref: Optional[PreferenceModel] = None,
    sched: DecaySchedule = DecaySchedule(),
    mc_seed: int = 0,
    acq: str = "ei",
    combined: bool = False,
) -> dict[str, AttributionTarget]:
    """The three explanation targets, closed over the scoring state.

    ``combined`` selects the preference-informed acquisition (used for the
    candidate proposed by it); otherwise the surrogate-only acquisition.
    """
    state = AcquisitionState(
        model, context, space, cfg, pref=pref if combined else None,
        sched=sched, mc_seed=mc_seed, acq=acq,
    )
    score = state.alpha_s_pi if combined else state.alpha_s
    return {
        "acquisition": AttributionTarget("acquisition", score),
        "surrogate_mean": AttributionTarget(
            "surrogate_mean", lambda X: predict(model, context, X).mean
        ),
        "surrogate_uncertainty": AttributionTarget(
            "surrogate_uncertainty", lambda X: predict(model, context, X).std
        ),
    }


@dataclass(frozen=True)
class Attribution:
    method: str                 # "shap" | "lime"
    target: str                 # one of TARGET_KINDS
    values: np.ndarray          # one per input feature
    baseline: float             # expected value over background / intercept
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def to_json(self) -> dict:
        return {
            "method": self.method,
            "target": self.target,
            "values": self.values.tolist(),
            "baseline": self.baseline,
            "diagnostics": self.diagnostics,
        }


def _coalition_values(
    target: AttributionTarget,
    x: np.ndarray,
    background: np.ndarray,
    coalitions: Sequence[tuple],
) -> np.ndarray:
    """Mean target per coalition: features in the coalition come from x,
    the rest from each background point."""
    nb, d = background.shape
    rows = np.tile(background, (len(coalitions), 1))
    for ci, coalition in enumerate(coalitions):
        block = rows[ci * nb : (ci + 1) * nb]
        for j in coalition:
            block[:, j] = x[j]
    vals = target(rows)
    return vals.reshape(len(coalitions), nb).mean(axis=1)


def shap_attributions(
    target: AttributionTarget,
    x: np.ndarray,
    background: np.ndarray,
    n_coalitions: Optional[int] = None,
    seed: int = 0,
) -> Attribution:
    """Shapley attribution of ``target`` at ``x`` against a background set.

    Exact subset enumeration up to 12 features; above that, weighted coalition
    sampling with the efficiency constraint enforced in the solve.
    """
    x = np.asarray(x, dtype=float)
    background = np.atleast_2d(np.asarray(background, dtype=float))
    if background.size == 0:
        raise BackgroundRequired("shap needs a nonempty background set")
    if background.shape[1] != x.shape[0]:
        raise ShapeError("background and x disagree on feature count")
    d = x.shape[0]
    if d <= EXACT_SHAP_MAX_DIMS:
        return _shap_exact(target, x, background)
    return _shap_sampled(target, x, background, n_coalitions or 2048, seed)


def _shap_exact(target: AttributionTarget, x: np.ndarray, background: np.ndarray) -> Attribution:
    d = x.shape[0]
    coalitions = [()]
    for size in range(1, d + 1):
        coalitions.extend(combinations(range(d), size))
    index = {c: i for i, c in enumerate(coalitions)}
    v = _coalition_values(target, x, background, coalitions)
    fact = [math.factorial(i) for i in range(d + 1)]
    phi = np.zeros(d)
    for j in range(d):
        for c in coalitions:
            if j in c:
                continue
            s = len(c)
            weight = fact[s] * fact[d - s - 1] / fact[d]
            c_with = tuple(sorted(c + (j,)))
            phi[j] += weight * (v[index[c_with]] - v[index[c]])
    return Attribution("shap", target.kind, phi, baseline=float(v[0]))


def _shap_sampled(
    target: AttributionTarget,
    x: np.ndarray,
    background: np.ndarray,
    n_coalitions: int,
    seed: int,
) -> Attribution:
    d = x.shape[0]
    rng = np.random.default_rng(seed)
    sizes = np.arange(1, d)
    size_weights = (d - 1) / (sizes * (d - sizes))
    size_weights = size_weights / size_weights.sum()
    seen = {}
    for _ in range(n_coalitions):
        s = int(rng.choice(sizes, p=size_weights))
        members = tuple(sorted(rng.choice(d, size=s, replace=False)))
        seen[members] = seen.get(members, 0) + 1
    coalitions = list(seen)
    v = _coalition_values(target, x, background, [(), tuple(range(d))] + coalitions)
    v_empty, v_full = float(v[0]), float(v[1])
    v_mid = v[2:]
    # eliminate the last feature with the efficiency constraint, then weighted
    # least squares on the remaining d-1 columns
    z = np.zeros((len(coalitions), d))
    for i, c in enumerate(coalitions):
        z[i, list(c)] = 1.0
    w = np.sqrt(np.asarray([seen[c] for c in coalitions], dtype=float))
    a = (z[:, :-1] - z[:, -1:]) * w[:, None]
    b = (v_mid - v_empty - z[:, -1] * (v_full - v_empty)) * w
    coef, *_ = np.linalg.lstsq(a, b, rcond=None)
    phi = np.empty(d)
    phi[:-1] = coef
    phi[-1] = (v_full - v_empty) - coef.sum()
    return Attribution(
        "shap", target.kind, phi, baseline=v_empty,
        diagnostics={"n_unique_coalitions": len(coalitions)},
    )


@dataclass(frozen=True)
class LimeConfig:
    n_perturb: int = 200
    kernel_width: float = 0.75
    k: int = 8


def lime_attributions(
    target: AttributionTarget,
    x: np.ndarray,
    space: SearchSpace,
    config: LimeConfig = LimeConfig(),
    seed: int = 0,
) -> Attribution:
    """Sparse local linear surrogate of ``target`` around ``x``.

    Perturbations are Gaussian with std 0.1 of each dimension's range and
    clipped to bounds; proximity weights use an exponential kernel on
    range-normalized distance; the top-k features by normalized coefficient
    magnitude are kept and refit.
    """
    x = np.asarray(x, dtype=float)
    d = x.shape[0]
    if config.n_perturb < 10 * d:
        raise ValueError("n_perturb must be at least 10x the feature count")
    rng = np.random.default_rng(seed)
    widths = space.widths
    perturbed = space.clip(x + rng.normal(size=(config.n_perturb, d)) * 0.1 * widths)
    y = target(perturbed)
    u = (perturbed - x) / widths
    dist2 = (u**2).sum(axis=1)
    w = np.exp(-dist2 / config.kernel_width**2)

    def weighted_fit(cols: np.ndarray) -> tuple[np.ndarray, float, np.ndarray]:
        a = np.concatenate([u[:, cols], np.ones((len(u), 1))], axis=1)
        aw = a * np.sqrt(w)[:, None]
        bw = y * np.sqrt(w)
        sol, _, rank, _ = np.linalg.lstsq(aw, bw, rcond=None)
        if rank < a.shape[1]:
            # ridge fallback for a degenerate design
            g = aw.T @ aw + 1e-8 * np.eye(a.shape[1])
            try:
                sol = np.linalg.solve(g, aw.T @ bw)
            except np.linalg.LinAlgError as exc:
                raise LimeFitError("degenerate perturbation design") from exc
        resid = y - a @ sol
        return sol[:-1], float(sol[-1]), resid

    all_cols = np.arange(d)
    coef_norm, intercept, _ = weighted_fit(all_cols)
    k = min(config.k, d)
    keep = np.sort(np.argsort(np.abs(coef_norm))[::-1][:k])
    coef_k, intercept, resid = weighted_fit(keep)
    values = np.zeros(d)
    values[keep] = coef_k / widths[keep]
    ybar = float(np.average(y, weights=w))
    ss_res = float(np.sum(w * resid**2))
    ss_tot = float(np.sum(w * (y - ybar) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return Attribution(
        "lime", target.kind, values, baseline=intercept,
        diagnostics={"weighted_r2": r2, "kept_features": keep.tolist()},
    )


@dataclass(frozen=True)
class ExplanationBundle:
    """Attributions and posterior snapshots for both candidates of a step."""

    candidates: tuple          # ((x1, snapshot1), (x2, snapshot2))
    attributions: tuple        # Attribution records, 2 candidates x 3 targets x 2 methods

    def to_json(self) -> dict:
        return {
            "candidates": [
                {"point": np.asarray(x).tolist(), "snapshot": snap}
                for x, snap in self.candidates
            ],
            "attributions": [
                dict(a.to_json(), candidate=i)
                for i, a in zip(self._candidate_index(), self.attributions)
            ],
        }

    def _candidate_index(self):
        half = len(self.attributions) // 2
        return [0] * half + [1] * half

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["candidate", "method", "target", "feature", "value", "baseline"])
        for i, a in zip(self._candidate_index(), self.attributions):
            for j, val in enumerate(a.values):
                writer.writerow([i + 1, a.method, a.target, j, repr(val), repr(a.baseline)])
        return buf.getvalue()


def default_background(
    context: TaskDataset, space: SearchSpace, seed: int = 0, n_fallback: int = 32
) -> np.ndarray:
    """Context inputs, or a Latin-hypercube fallback when the context is small."""
    if len(context) >= 4:
        return context.points.copy()
    return sample_space(space, n_fallback, "latin_hypercube", seed=seed)


def explain_candidates(
    pair,
    context: TaskDataset,
    model: TnpModel,
    pref: Optional[PreferenceModel],
    space: SearchSpace,
    sched: DecaySchedule,
    cfg: EiConfig,
    background: Optional[np.ndarray] = None,
    seed: int = 0,
    mc_seed: int = 0,
    acq: str = "ei",
    lime_config: Optional[LimeConfig] = None,
) -> ExplanationBundle:
    """Both attribution methods for each candidate against all three targets."""
    if background is None:
        background = default_background(context, space, seed=seed)
    lime_config = lime_config or LimeConfig(n_perturb=max(200, 10 * space.dims))
    records = []
    candidates = []
    for ci, (x, combined) in enumerate(((pair.x1, False), (pair.x2, True))):
        targets = make_targets(
            model, context, space, cfg, pref=pref, sched=sched,
            mc_seed=mc_seed, acq=acq, combined=combined and pref is not None,
        )
        for kind in TARGET_KINDS:
            records.append(shap_attributions(targets[kind], x, background, seed=seed + ci))
            records.append(
                lime_attributions(targets[kind], x, space, lime_config, seed=seed + 17 * ci + 3)
            )
        snap = pair.snapshot1 if ci == 0 else pair.snapshot2
        candidates.append((np.asarray(x, dtype=float), snap))
    return ExplanationBundle(tuple(candidates), tuple(records))


@dataclass(frozen=True)
class HeatmapSlice:
    """Mean / uncertainty / acquisition over a 2-D slice of the space."""

    dim_pair: tuple
    fixed: np.ndarray
    axis_i: np.ndarray
    axis_j: np.ndarray
    mean: np.ndarray
    uncertainty: np.ndarray
    acquisition: np.ndarray
    annotations: tuple  # (visit index, coord_i, coord_j) in evaluation order

    def to_json(self) -> dict:
        return {
            "dim_pair": list(self.dim_pair),
            "fixed": self.fixed.tolist(),
            "axis_i": self.axis_i.tolist(),
            "axis_j": self.axis_j.tolist(),
            "mean": self.mean.tolist(),
            "uncertainty": self.uncertainty.tolist(),
            "acquisition": self.acquisition.tolist(),
            "annotations": [
                {"index": idx, "i": ci, "j": cj} for idx, ci, cj in self.annotations
            ],
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["layer", "coord_i", "coord_j", "value"])
        layers = (("mean", self.mean), ("uncertainty", self.uncertainty), ("acquisition", self.acquisition))
        for name, grid in layers:
            for a, ci in enumerate(self.axis_i):
                for b, cj in enumerate(self.axis_j):
                    writer.writerow([name, repr(float(ci)), repr(float(cj)), repr(float(grid[a, b]))])
        return buf.getvalue()


def slice_heatmap(
    model: TnpModel,
    pref: Optional[PreferenceModel],
    context: TaskDataset,
    space: SearchSpace,
    dim_pair: tuple,
    fixed: Optional[np.ndarray] = None,
    resolution: int = 32,
    sched: DecaySchedule = DecaySchedule(),
    cfg: EiConfig = EiConfig(),
    mc_seed: int = 0,
    acq: str = "ei",
) -> HeatmapSlice:
    """Evaluate the three layers on a resolution^2 grid.

    Cells are scored one point at a time through the same calls a consumer
    would make directly, so any grid cell reproduces a direct predict/score
    call bitwise.
    """
    di, dj = dim_pair
    if di == dj or not (0 <= di < space.dims and 0 <= dj < space.dims):
        raise ShapeError(f"invalid slice dims {dim_pair} for {space.dims}-D space")
    if resolution < 2:
        raise ShapeError("resolution must be at least 2")
    if fixed is None:
        if len(context):
            fixed = context.points[int(np.argmax(context.values))].copy()
        else:
            fixed = space.center
    fixed = np.asarray(fixed, dtype=float)
    state = AcquisitionState(
        model, context, space, cfg, pref=pref, sched=sched, mc_seed=mc_seed, acq=acq
    )
    score = state.alpha_s_pi if pref is not None else state.alpha_s
    axis_i = np.linspace(space.lower[di], space.upper[di], resolution)
    axis_j = np.linspace(space.lower[dj], space.upper[dj], resolution)
    mean = np.empty((resolution, resolution))
    unc = np.empty((resolution, resolution))
    acqv = np.empty((resolution, resolution))
    point = fixed.copy()
    for a in range(resolution):
        for b in range(resolution):
            point[di] = axis_i[a]
            point[dj] = axis_j[b]
            post = predict(model, context, point[None, :])
            mean[a, b] = post.mean[0]
            unc[a, b] = post.std[0]
            acqv[a, b] = score(point[None, :])[0]
    annotations = tuple(
        (idx + 1, float(p[di]), float(p[dj])) for idx, p in enumerate(context.points)
    )
    return HeatmapSlice(
        (di, dj), fixed, axis_i, axis_j, mean, unc, acqv, annotations
    )


def suggest_dims(
    model: TnpModel,
    context: TaskDataset,
    space: SearchSpace,
    cfg: EiConfig = EiConfig(),
    seed: int = 0,
) -> tuple[int, int]:
    """The two most influential dims by mean |Shapley| on the surrogate mean."""
    if space.dims == 2:
        return (0, 1)
    background = default_background(context, space, seed=seed)
    target = AttributionTarget(
        "surrogate_mean", lambda X: predict(model, context, X).mean
    )
    probes = sample_space(space, 4, "latin_hypercube", seed=seed + 1)
    if len(context):
        probes = np.concatenate([probes, context.points[-1:][:]])
    scores = np.zeros(space.dims)
    for p in probes:
        scores += np.abs(shap_attributions(target, p, background).values)
    top = np.argsort(scores)[::-1][:2]
    return (int(min(top)), int(max(top)))
