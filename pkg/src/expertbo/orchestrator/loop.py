"""The end-to-end optimization loop.

One run: draw the initial samples, elicit preference labels inside the
expert's hypothesis, fit the preference model, then iterate propose →
explain → expert choice → evaluate for the full budget. Only chosen points
are evaluated on the task; candidate proposals cost nothing. The decay clock
passed to the acquisition counts completed online evaluations, so the first
step runs at t = 0.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from ..acquisition import (
    AcquisitionState,
    CandidatePair,
    DecaySchedule,
    EiConfig,
    SearchConfig,
    maximize_acquisition,
    propose_pair,
)
from ..errors import ConfigError
from ..explain import explain_candidates
from ..preference import (
    Hypothesis,
    PreferenceDataset,
    augment_skew,
    build_pref_dataset,
    fit_preference_model,
    make_hypothesis,
)
from ..surrogate import TnpModel
from ..tasks import (
    BlackBoxTask,
    SimulatedExpert,
    TaskDataset,
    evaluate,
    sample_space,
    simple_regret,
    simulated_expert_choice,
)
from .records import RunRecord, STEP_SEED_BASE

BASELINE_KINDS = ("tnp_ei", "mcoexbo_ucb", "hlmbo_ei")


def derive_seed(seed: int, *tags: int) -> int:
    """Stable sub-seed derivation, so every stream in a run is reproducible."""
    ss = np.random.SeedSequence([int(seed)] + [int(t) for t in tags])
    return int(ss.generate_state(1, np.uint64)[0])


class SimulatedChoiceOracle:
    """Noisy ground-truth comparisons, used for both labels and step choices."""

    def __init__(self, task: BlackBoxTask, sigma_pref: float, seed: int):
        self.task = task
        self.expert = SimulatedExpert(sigma_pref, seed)

    def choose(self, x1: np.ndarray, x2: np.ndarray) -> str:
        return simulated_expert_choice(self.expert, self.task, x1, x2)

    def label(self, x1: np.ndarray, x2: np.ndarray) -> int:
        return 1 if self.choose(x1, x2) == "first" else 0


class AccuracyChoiceOracle:
    """Comparisons forced to a target accuracy.

    The correct side (by true value) is returned with probability
    ``accuracy`` and flipped otherwise, independently per query.
    """

    def __init__(self, task: BlackBoxTask, accuracy: float, seed: int):
        if not 0.0 <= accuracy <= 1.0:
            raise ValueError("accuracy must lie in [0, 1]")
        self.task = task
        self.accuracy = accuracy
        self._rng = np.random.default_rng(seed)

    def choose(self, x1: np.ndarray, x2: np.ndarray) -> str:
        correct = "first" if evaluate(self.task, x1) >= evaluate(self.task, x2) else "second"
        if self._rng.uniform() < self.accuracy:
            return correct
        return "second" if correct == "first" else "first"

    def label(self, x1: np.ndarray, x2: np.ndarray) -> int:
        return 1 if self.choose(x1, x2) == "first" else 0


class RecordedChoiceOracle:
    """Replays a recorded sequence of choices."""

    def __init__(self, sides: list):
        self._sides = list(sides)
        self._i = 0

    def choose(self, x1, x2) -> str:
        side = self._sides[self._i]
        self._i += 1
        return side

    def label(self, x1, x2) -> int:
        raise RuntimeError("replay supplies the recorded preference dataset")


@dataclass(frozen=True)
class PrefConfig:
    """Preference-elicitation settings for a run."""

    m_pairs: int = 20
    hypothesis_kind: Optional[str] = "expert"  # expert | random | adversarial | None
    boxes: Optional[list] = None               # explicit boxes override the kind
    slices: int = 5                            # K slabs on the first dimension
    slice_samples: int = 100                   # probes per slab for the adversarial pick


@dataclass(frozen=True)
class SessionConfig:
    task: BlackBoxTask
    model: TnpModel
    pref: PrefConfig = PrefConfig()
    budget: int = 10
    initial: int = 1
    gamma: float = 0.1
    zeta: float = 0.1
    expert_mode: str = "simulated"
    sigma_pref: float = float(np.sqrt(0.1))
    seed: int = 0
    acq: str = "ei"
    explanations: bool = True
    search: SearchConfig = SearchConfig()
    task_kind: str = "multimodal"
    model_ref: Optional[str] = None

    def __post_init__(self):
        if self.budget < 1:
            raise ConfigError("budget must be at least 1")
        if self.initial < 1:
            raise ConfigError("initial sample count must be at least 1")

    def snapshot(self, hypothesis: Optional[Hypothesis]) -> dict:
        return {
            "budget": self.budget,
            "initial": self.initial,
            "gamma": self.gamma,
            "zeta": self.zeta,
            "expert_mode": self.expert_mode,
            "sigma_pref": self.sigma_pref,
            "seed": self.seed,
            "acq": self.acq,
            "explanations": self.explanations,
            "m_pairs": self.pref.m_pairs,
            "hypothesis_kind": self.pref.hypothesis_kind,
            "hypothesis_boxes": hypothesis.to_json() if hypothesis else None,
            "search": {
                "n_candidates": self.search.n_candidates,
                "top_k": self.search.top_k,
                "refine_iters": self.search.refine_iters,
                "init_step": self.search.init_step,
                "shrink": self.search.shrink,
            },
        }


def resolve_hypothesis(cfg: SessionConfig) -> Optional[Hypothesis]:
    if cfg.pref.boxes is not None:
        return Hypothesis.from_json(cfg.pref.boxes)
    if cfg.pref.hypothesis_kind is None:
        return Hypothesis.full_space(cfg.task.space)
    return make_hypothesis(
        cfg.pref.hypothesis_kind,
        cfg.task,
        K=cfg.pref.slices,
        M=cfg.pref.slice_samples,
        seed=derive_seed(cfg.seed, 2),
    )


def initial_context(cfg: SessionConfig) -> TaskDataset:
    """Draw and evaluate the I initial Latin-hypercube samples."""
    pts = sample_space(
        cfg.task.space, cfg.initial, "latin_hypercube", seed=derive_seed(cfg.seed, 1)
    )
    context = TaskDataset.empty(cfg.task.task_id, cfg.task.space.dims)
    for x in pts:
        context = context.with_observation(x, evaluate(cfg.task, x))
    return context


def default_oracle(cfg: SessionConfig):
    return SimulatedChoiceOracle(cfg.task, cfg.sigma_pref, derive_seed(cfg.seed, 4))


def _propose_surrogate_only(
    model: TnpModel, context: TaskDataset, cfg: SessionConfig, step_seed: int
) -> CandidatePair:
    state = AcquisitionState(
        model, context, cfg.task.space, EiConfig(cfg.zeta), acq=cfg.acq
    )
    x1, s1 = maximize_acquisition(state.alpha_s, cfg.task.space, cfg.search, step_seed)
    snap = state.snapshot(x1)
    return CandidatePair(x1, x1, s1, s1, snap, snap)


def run_hlmbo(
    cfg: SessionConfig,
    expert=None,
    pref_dataset: Optional[PreferenceDataset] = None,
    method: str = "hlmbo_ei",
    use_preferences: bool = True,
) -> RunRecord:
    """Execute one full optimization run and return its replayable record."""
    started = time.time()
    expert = expert or default_oracle(cfg)
    context = initial_context(cfg)

    hypothesis = None
    pref_model = None
    if use_preferences:
        hypothesis = resolve_hypothesis(cfg)
        if pref_dataset is None:
            pref_dataset = build_pref_dataset(
                expert.label,
                cfg.task.space,
                hypothesis,
                cfg.pref.m_pairs,
                seed=derive_seed(cfg.seed, 3),
            )
        pref_model = fit_preference_model(augment_skew(pref_dataset))

    history = []
    wall_ms = []
    for t in range(cfg.budget):
        t0 = time.time()
        step_seed = derive_seed(cfg.seed, STEP_SEED_BASE + t)
        if use_preferences:
            pair = propose_pair(
                cfg.model,
                pref_model,
                context,
                cfg.task.space,
                DecaySchedule(cfg.gamma, t),
                EiConfig(cfg.zeta),
                cfg.search,
                seed=step_seed,
                acq=cfg.acq,
            )
            side = expert.choose(pair.x1, pair.x2)
        else:
            pair = _propose_surrogate_only(cfg.model, context, cfg, step_seed)
            side = "first"
        bundle = None
        if cfg.explanations:
            bundle = explain_candidates(
                pair,
                context,
                cfg.model,
                pref_model,
                cfg.task.space,
                DecaySchedule(cfg.gamma, t),
                EiConfig(cfg.zeta),
                seed=derive_seed(cfg.seed, 1000 + t),
                mc_seed=step_seed,
                acq=cfg.acq,
            )
        x_p = pair.x1 if side == "first" else pair.x2
        y_p = evaluate(cfg.task, x_p)
        context = context.with_observation(x_p, y_p)
        wall_ms.append(1000.0 * (time.time() - t0))
        history.append(
            {
                "step": t,
                "pair": pair.to_json(),
                "side": side,
                "x": np.asarray(x_p).tolist(),
                "y": y_p,
                "explanations": bundle.to_json() if bundle else None,
            }
        )

    trace = simple_regret(cfg.task, context) if cfg.task.known_optimum else None
    return RunRecord.build(
        method=method,
        config=cfg.snapshot(hypothesis),
        task=cfg.task,
        task_kind=cfg.task_kind,
        model_ref=cfg.model_ref,
        pref_dataset=pref_dataset,
        history=history,
        regret=trace,
        n_evaluations=cfg.initial + cfg.budget,
        context=context,
        wall_ms=wall_ms,
        started=started,
    )


def run_baseline(kind: str, cfg: SessionConfig, expert=None) -> RunRecord:
    """The three in-repo methods.

    ``tnp_ei`` maximizes the surrogate-only acquisition and auto-accepts it,
    never querying the expert. ``mcoexbo_ucb`` swaps expected improvement for
    the upper confidence bound in both acquisitions. ``hlmbo_ei`` is the full
    loop.
    """
    if kind not in BASELINE_KINDS:
        raise ConfigError(f"unknown method {kind!r}; expected one of {BASELINE_KINDS}")
    if kind == "tnp_ei":
        return run_hlmbo(
            replace(cfg, acq="ei"), expert=expert, method=kind, use_preferences=False
        )
    if kind == "mcoexbo_ucb":
        return run_hlmbo(replace(cfg, acq="ucb"), expert=expert, method=kind)
    return run_hlmbo(replace(cfg, acq="ei"), expert=expert, method=kind)
