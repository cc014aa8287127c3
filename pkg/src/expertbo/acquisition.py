"""Acquisition functions combining the surrogate and preference posteriors.

The preference posterior's influence decays with the online step count t:
its effective variance is inflated by ``gamma * t^2`` times the surrogate
variance, so the combined posterior converges to the surrogate-only posterior
as t grows, whatever the preference model believes. Candidate proposal
maximizes the preference-free and the combined acquisition over the full
space (never restricted to hypothesis boxes).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import erf

from .errors import InvalidPosterior
from .preference import PreferenceModel, preference_posterior
from .surrogate import TnpModel, predict
from .tasks import SearchSpace, TaskDataset, sample_space

log = logging.getLogger(__name__)

N_BRIDGE_REFERENCE = 512
SQRT2 = np.sqrt(2.0)
INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class DecaySchedule:
    """Decay factor gamma and current online step t."""

    gamma: float = 0.1
    t: int = 0

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.t < 0:
            raise ValueError("t must be nonnegative")

    def at(self, t: int) -> "DecaySchedule":
        return DecaySchedule(self.gamma, t)


@dataclass(frozen=True)
class EiConfig:
    """Exploration margin for expected improvement."""

    zeta: float = 0.1

    def __post_init__(self):
        if self.zeta < 0:
            raise ValueError("zeta must be nonnegative")


@dataclass(frozen=True)
class SearchConfig:
    n_candidates: int = 2048
    top_k: int = 8
    refine_iters: int = 50
    init_step: float = 0.2
    shrink: float = 0.93


@dataclass(frozen=True)
class CombinedPosterior:
    mean: np.ndarray
    variance: np.ndarray
    w_pi: np.ndarray
    w_s: np.ndarray


def _as_positive(name: str, v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if (v <= 0).any() or not np.isfinite(v).all():
        raise InvalidPosterior(f"{name} must be positive and finite")
    return v


def _weights(var_pi: np.ndarray, var_s: np.ndarray, sched: DecaySchedule):
    s_pi2 = var_pi + sched.gamma * float(sched.t) ** 2 * var_s
    sigma2 = s_pi2 * var_s / (s_pi2 + var_s)
    return s_pi2, sigma2, sigma2 / s_pi2, sigma2 / var_s


def combine_posterior(mu_s, var_s, mu_pi, var_pi, sched: DecaySchedule) -> CombinedPosterior:
    """Precision-weighted average of surrogate and decayed preference posteriors."""
    mu_s = np.asarray(mu_s, dtype=float)
    mu_pi = np.asarray(mu_pi, dtype=float)
    var_s = _as_positive("surrogate variance", var_s)
    var_pi = _as_positive("preference variance", var_pi)
    _, sigma2, w_pi, w_s = _weights(var_pi, var_s, sched)
    mean = w_pi * mu_pi + w_s * mu_s
    return CombinedPosterior(mean, sigma2, w_pi, w_s)


def noharm_weights(var_pi, var_s, sched: DecaySchedule) -> tuple[np.ndarray, np.ndarray]:
    """Mixture weights (w_pi, w_s); w_pi decays to zero as t grows."""
    var_s = _as_positive("surrogate variance", var_s)
    var_pi = _as_positive("preference variance", var_pi)
    _, _, w_pi, w_s = _weights(var_pi, var_s, sched)
    return w_pi, w_s


def normal_cdf(z):
    return 0.5 * (1.0 + erf(np.asarray(z, dtype=float) / SQRT2))


def normal_pdf(z):
    z = np.asarray(z, dtype=float)
    return INV_SQRT_2PI * np.exp(-0.5 * z * z)


def expected_improvement(mu, sigma, f_best: float, cfg: EiConfig = EiConfig()):
    """EI with exploration margin zeta; zero-variance limit is max(gap, 0)."""
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if (sigma < 0).any():
        raise ValueError("sigma must be nonnegative")
    gap = mu - f_best - cfg.zeta
    sigma_safe = np.where(sigma > 0, sigma, 1.0)
    z = gap / sigma_safe
    ei = gap * normal_cdf(z) + sigma * normal_pdf(z)
    ei = np.where(sigma > 0, ei, np.maximum(gap, 0.0))
    out = np.maximum(ei, 0.0)
    return float(out) if out.ndim == 0 else out


def ucb(mu, sigma):
    """Upper confidence bound with unit exploration weight."""
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if (sigma < 0).any():
        raise ValueError("sigma must be nonnegative")
    out = mu + sigma
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ScaleBridge:
    """Affine map taking preference probabilities onto the surrogate's scale.

    The preference mean is the probability of beating the incumbent, so the
    indifference point 0.5 is anchored at the incumbent's value: a confident
    "beats the incumbent" always lands above it on the objective scale. The
    slope matches the spread of the two posteriors over a fixed reference set.
    """

    slope: float
    intercept: float

    def apply(self, mu_pi: np.ndarray, var_pi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        mu = self.slope * (np.asarray(mu_pi, dtype=float) - 0.5) + self.intercept
        var = np.maximum(self.slope**2 * np.asarray(var_pi, dtype=float), 1e-12)
        return mu, var


def fit_bridge(
    mu_s_ref: np.ndarray, mu_pi_ref: np.ndarray, anchor: Optional[float] = None
) -> ScaleBridge:
    std_s = float(np.std(mu_s_ref))
    std_pi = float(np.std(mu_pi_ref))
    slope = std_s / max(std_pi, 1e-8)
    if anchor is None:
        anchor = float(np.mean(mu_s_ref)) + slope * (0.5 - float(np.mean(mu_pi_ref)))
    return ScaleBridge(slope, float(anchor))


class AcquisitionState:
    """Per-step scoring context: incumbent, bridge, and decay clock.

    Built once per optimization step; all scoring through one state is a pure
    deterministic function of the query point, so scores agree bitwise whether
    a point is scored alone or within a batch sharing the state's call shapes.
    """

    def __init__(
        self,
        model: TnpModel,
        context: TaskDataset,
        space: SearchSpace,
        cfg: EiConfig,
        pref: Optional[PreferenceModel] = None,
        sched: DecaySchedule = DecaySchedule(),
        mc_seed: int = 0,
        acq: str = "ei",
    ):
        if acq not in ("ei", "ucb"):
            raise ValueError(f"unknown acquisition kind {acq!r}")
        self.model = model
        self.context = context
        self.space = space
        self.cfg = cfg
        self.pref = pref
        self.sched = sched
        self.mc_seed = int(mc_seed)
        self.acq = acq
        if len(context):
            self.f_best = float(np.max(context.values))
            incumbent = context.points[int(np.argmax(context.values))].copy()
        else:
            self.f_best = None
            incumbent = space.center
            if acq == "ei":
                log.warning("empty context: expected improvement falls back to mean ranking")
        self.x_ref = incumbent
        self.bridge = None
        if pref is not None:
            # Anchor pairwise queries at the labeled point most comparable to
            # the incumbent: the model has support there, whereas an incumbent
            # far outside the elicitation region would push every query off
            # the labeled manifold and silence the preference signal.
            labeled = pref.z_train[:, : pref.input_dims]
            j = int(np.argmin(((labeled - incumbent) ** 2).sum(axis=1)))
            self.x_ref = labeled[j].copy()
            ref = sample_space(space, N_BRIDGE_REFERENCE, "latin_hypercube", seed=self.mc_seed)
            post = predict(model, context, ref)
            pp = preference_posterior(pref, ref, self.x_ref, self.mc_seed)
            anchor_value = float(predict(model, context, self.x_ref[None, :]).mean[0])
            self.bridge = fit_bridge(post.mean, pp.mean, anchor=anchor_value)

    def _finalize(self, mean: np.ndarray, std: np.ndarray) -> np.ndarray:
        if self.acq == "ucb":
            return ucb(mean, std)
        if self.f_best is None:
            return mean.copy()
        return expected_improvement(mean, std, self.f_best, self.cfg)

    def alpha_s(self, candidates: np.ndarray) -> np.ndarray:
        """Preference-free acquisition over the surrogate posterior."""
        post = predict(self.model, self.context, candidates)
        return np.atleast_1d(self._finalize(post.mean, post.std))

    def alpha_s_pi(self, candidates: np.ndarray) -> np.ndarray:
        """Combined acquisition over the decayed surrogate-preference posterior."""
        if self.pref is None:
            raise InvalidPosterior("no preference model attached to this state")
        post = predict(self.model, self.context, candidates)
        pp = preference_posterior(self.pref, candidates, self.x_ref, self.mc_seed)
        mu_b, var_b = self.bridge.apply(pp.mean, pp.variance)
        comb = combine_posterior(post.mean, post.variance, mu_b, var_b, self.sched)
        return np.atleast_1d(self._finalize(comb.mean, np.sqrt(comb.variance)))

    def snapshot(self, x: np.ndarray) -> dict:
        """Posterior numbers at one point, for records and the UI."""
        post = predict(self.model, self.context, np.atleast_2d(x))
        out = {
            "mu_s": float(post.mean[0]),
            "var_s": float(post.variance[0]),
            "alpha_s": float(self.alpha_s(np.atleast_2d(x))[0]),
        }
        if self.pref is not None:
            pp = preference_posterior(self.pref, np.atleast_2d(x), self.x_ref, self.mc_seed)
            mu_b, var_b = self.bridge.apply(pp.mean, pp.variance)
            comb = combine_posterior(post.mean, post.variance, mu_b, var_b, self.sched)
            out.update(
                {
                    "mu_pi": float(pp.mean[0]),
                    "var_pi": float(pp.variance[0]),
                    "mu_combined": float(comb.mean[0]),
                    "var_combined": float(comb.variance[0]),
                    "w_pi": float(comb.w_pi[0]),
                    "w_s": float(comb.w_s[0]),
                    "alpha_s_pi": float(self.alpha_s_pi(np.atleast_2d(x))[0]),
                }
            )
        return out


def score_alpha_s(
    model: TnpModel,
    context: TaskDataset,
    candidates: np.ndarray,
    cfg: EiConfig = EiConfig(),
    space: Optional[SearchSpace] = None,
) -> np.ndarray:
    """EI over the surrogate alone, with the incumbent as the improvement anchor."""
    candidates = np.atleast_2d(np.asarray(candidates, dtype=float))
    space = space or SearchSpace(candidates.min(axis=0) - 1.0, candidates.max(axis=0) + 1.0)
    state = AcquisitionState(model, context, space, cfg)
    return state.alpha_s(candidates)


def score_alpha_s_pi(
    model: TnpModel,
    pref: PreferenceModel,
    context: TaskDataset,
    candidates: np.ndarray,
    sched: DecaySchedule,
    cfg: EiConfig,
    mc_seed: int,
    space: SearchSpace,
) -> np.ndarray:
    """Combined acquisition; the scale bridge is calibrated on a fixed
    Latin-hypercube reference set over the space, seeded by mc_seed."""
    candidates = np.atleast_2d(np.asarray(candidates, dtype=float))
    state = AcquisitionState(
        model, context, space, cfg, pref=pref, sched=sched, mc_seed=mc_seed
    )
    return state.alpha_s_pi(candidates)


@dataclass(frozen=True)
class CandidatePair:
    """The two proposals per step: surrogate-only and preference-informed."""

    x1: np.ndarray
    x2: np.ndarray
    score1: float
    score2: float
    snapshot1: dict
    snapshot2: dict

    def to_json(self) -> dict:
        return {
            "x1": np.asarray(self.x1).tolist(),
            "x2": np.asarray(self.x2).tolist(),
            "score1": self.score1,
            "score2": self.score2,
            "snapshot1": self.snapshot1,
            "snapshot2": self.snapshot2,
        }


def maximize_acquisition(
    score_fn,
    space: SearchSpace,
    search: SearchConfig,
    seed: int,
) -> tuple[np.ndarray, float]:
    """Batch Latin-hypercube scan plus local refinement of the top candidates.

    Refinement keeps each start's score from the scan as the incumbent and
    only accepts strict improvements, so the returned score is never below
    any raw candidate's score.
    """
    cands = sample_space(space, search.n_candidates, "latin_hypercube", seed=seed)
    scores = np.asarray(score_fn(cands), dtype=float)
    order = np.argsort(scores)[::-1][: search.top_k]
    best_x = cands[order].copy()
    best_s = scores[order].copy()
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x5EED]))
    widths = space.widths
    for it in range(search.refine_iters):
        sigma = search.init_step * search.shrink**it
        props = best_x + rng.normal(size=best_x.shape) * sigma * widths
        props = space.clip(props)
        s = np.asarray(score_fn(props), dtype=float)
        improved = s > best_s
        best_x[improved] = props[improved]
        best_s[improved] = s[improved]
    i = int(np.argmax(best_s))
    return best_x[i].copy(), float(best_s[i])


def propose_pair(
    model: TnpModel,
    pref: PreferenceModel,
    context: TaskDataset,
    space: SearchSpace,
    sched: DecaySchedule,
    cfg: EiConfig,
    search: SearchConfig = SearchConfig(),
    seed: int = 0,
    acq: str = "ei",
    mc_seed: Optional[int] = None,
) -> CandidatePair:
    """Propose the surrogate-only and combined acquisition maximizers."""
    mc_seed = seed if mc_seed is None else mc_seed
    state = AcquisitionState(
        model, context, space, cfg, pref=pref, sched=sched, mc_seed=mc_seed, acq=acq
    )
    x1, s1 = maximize_acquisition(state.alpha_s, space, search, seed)
    x2, s2 = maximize_acquisition(state.alpha_s_pi, space, search, seed)
    return CandidatePair(
        x1, x2, s1, s2, snapshot1=state.snapshot(x1), snapshot2=state.snapshot(x2)
    )
