"""Pairwise expert-preference model.

Pipeline: sample candidate pairs inside the expert's hypothesis boxes, have a
choice oracle label them, mirror every pair with the flipped label, and fit
one exact GP regression per class on Dirichlet-transformed targets over
pair features ``z = concat(x1, x2)``. Class 1 means "the first point is
favored". The per-point posterior used by the acquisition anchors the second
slot at a reference point (the incumbent) and Monte-Carlo-maps latent samples
through a softmax.

Monte-Carlo draws are keyed by a hash of the query point, so a point's
preference posterior is identical whether it is scored alone or in a batch.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.spatial.distance import cdist

from .errors import ElicitationAborted, FitError, HypothesisUnavailable, ModelNotFitted
from .tasks import BlackBoxTask, SearchSpace

PREF_VAR_FLOOR = 1e-6
LATENT_VAR_FLOOR = 1e-10
JITTERS = (1e-8, 1e-7, 1e-6, 1e-5, 1e-4)

LabelOracle = Callable[[np.ndarray, np.ndarray], int]


@dataclass(frozen=True)
class Hypothesis:
    """Expert-designated sub-boxes of the search space."""

    boxes: tuple  # tuple of (lower, upper) ndarray pairs

    def __post_init__(self):
        boxes = []
        for lo, hi in self.boxes:
            lo = np.asarray(lo, dtype=float)
            hi = np.asarray(hi, dtype=float)
            if not (lo < hi).all():
                raise ValueError("hypothesis box must have positive width")
            boxes.append((lo, hi))
        object.__setattr__(self, "boxes", tuple(boxes))

    @staticmethod
    def full_space(space: SearchSpace) -> "Hypothesis":
        return Hypothesis(((space.lower.copy(), space.upper.copy()),))

    def contains(self, x: np.ndarray) -> bool:
        x = np.asarray(x, dtype=float)
        return any(
            bool((x >= lo - 1e-12).all() and (x <= hi + 1e-12).all())
            for lo, hi in self.boxes
        )

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        idx = rng.integers(0, len(self.boxes), size=n)
        out = np.empty((n, self.boxes[0][0].shape[0]))
        for i, b in enumerate(idx):
            lo, hi = self.boxes[int(b)]
            out[i] = rng.uniform(lo, hi)
        return out

    def to_json(self) -> list:
        return [{"lower": lo.tolist(), "upper": hi.tolist()} for lo, hi in self.boxes]

    @staticmethod
    def from_json(doc: list) -> "Hypothesis":
        return Hypothesis(
            tuple((np.asarray(b["lower"]), np.asarray(b["upper"])) for b in doc)
        )


def make_hypothesis(
    kind: str, task: BlackBoxTask, K: int = 10, M: int = 100, seed: int = 0
) -> Hypothesis:
    """Slice the first dimension into K slabs and pick one per the kind.

    ``expert`` picks the slab containing the known optimum, ``adversarial``
    the slab with the lowest summed value over M Latin-hypercube probes,
    ``random`` returns the full space.
    """
    space = task.space
    if kind == "random":
        return Hypothesis.full_space(space)
    if K < 2:
        raise ValueError("need at least 2 slices")
    lo0, hi0 = space.lower[0], space.upper[0]
    width = (hi0 - lo0) / K

    def slab(k: int) -> Hypothesis:
        lower = space.lower.copy()
        upper = space.upper.copy()
        lower[0] = lo0 + k * width
        upper[0] = lo0 + (k + 1) * width
        return Hypothesis(((lower, upper),))

    if kind == "expert":
        if task.known_optimum is None:
            raise HypothesisUnavailable(
                f"task {task.task_id} has no known optimum for an expert hypothesis"
            )
        k = int((task.known_optimum.point[0] - lo0) / width)
        return slab(min(max(k, 0), K - 1))
    if kind == "adversarial":
        sums = np.empty(K)
        for k in range(K):
            h = slab(k)
            pts = h.sample(M, np.random.default_rng(np.random.SeedSequence([seed, k])))
            sums[k] = task.fn(pts).sum()
        return slab(int(np.argmin(sums)))
    raise ValueError(f"unknown hypothesis kind {kind!r}")


@dataclass(frozen=True)
class PreferenceDataset:
    """Labeled pairs; label 1 means the first point was favored."""

    x1: np.ndarray
    x2: np.ndarray
    labels: np.ndarray
    sources: tuple = ()
    complete: bool = True

    def __post_init__(self):
        x1 = np.asarray(self.x1, dtype=float)
        x2 = np.asarray(self.x2, dtype=float)
        labels = np.asarray(self.labels, dtype=int)
        if len(x1) != len(x2) or len(x1) != len(labels):
            raise ValueError("pairs and labels must have equal length")
        if len(x1) and (np.abs(x1 - x2).max(axis=1) == 0).any():
            raise ValueError("degenerate pair with x1 == x2")
        sources = self.sources or tuple("simulated" for _ in range(len(labels)))
        for arr in (x1, x2, labels):
            arr.setflags(write=False)
        object.__setattr__(self, "x1", x1)
        object.__setattr__(self, "x2", x2)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "sources", tuple(sources))

    def __len__(self) -> int:
        return len(self.labels)

    def to_jsonl(self) -> str:
        lines = [
            json.dumps(
                {
                    "x1": self.x1[i].tolist(),
                    "x2": self.x2[i].tolist(),
                    "y": int(self.labels[i]),
                    "source": self.sources[i],
                }
            )
            for i in range(len(self))
        ]
        return "\n".join(lines) + ("\n" if lines else "")

    @staticmethod
    def from_jsonl(text: str) -> "PreferenceDataset":
        rows = [json.loads(line) for line in text.splitlines() if line.strip()]
        return PreferenceDataset(
            np.asarray([r["x1"] for r in rows], dtype=float),
            np.asarray([r["x2"] for r in rows], dtype=float),
            np.asarray([r["y"] for r in rows], dtype=int),
            tuple(r.get("source", "simulated") for r in rows),
        )


def save_pref_jsonl(dataset: PreferenceDataset, path) -> None:
    Path(path).write_text(dataset.to_jsonl(), encoding="utf-8")


def load_pref_jsonl(path) -> PreferenceDataset:
    return PreferenceDataset.from_jsonl(Path(path).read_text(encoding="utf-8"))


def sample_pair(hypothesis: Hypothesis, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """One candidate pair inside the hypothesis, resampled if degenerate."""
    while True:
        x1 = hypothesis.sample(1, rng)[0]
        x2 = hypothesis.sample(1, rng)[0]
        if np.abs(x1 - x2).max() > 0:
            return x1, x2


def build_pref_dataset(
    expert: LabelOracle,
    space: SearchSpace,
    hypothesis: Optional[Hypothesis],
    M: int,
    seed: int = 0,
    source: str = "simulated",
) -> PreferenceDataset:
    """Sample M pairs inside the hypothesis and collect labels from the oracle.

    If the oracle aborts mid-way the partial dataset is returned with
    ``complete=False``.
    """
    if M < 1:
        raise ValueError("need at least one pair")
    hypothesis = hypothesis or Hypothesis.full_space(space)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x9EF]))
    x1s, x2s, labels = [], [], []
    complete = True
    for _ in range(M):
        x1, x2 = sample_pair(hypothesis, rng)
        try:
            y = int(expert(x1, x2))
        except ElicitationAborted:
            complete = False
            break
        x1s.append(x1)
        x2s.append(x2)
        labels.append(y)
    d = space.dims
    return PreferenceDataset(
        np.asarray(x1s, dtype=float).reshape(len(x1s), d),
        np.asarray(x2s, dtype=float).reshape(len(x2s), d),
        np.asarray(labels, dtype=int),
        tuple(source for _ in labels),
        complete=complete,
    )


def augment_skew(dataset: PreferenceDataset) -> PreferenceDataset:
    """Append every pair reversed with the flipped label."""
    return PreferenceDataset(
        np.concatenate([dataset.x1, dataset.x2]),
        np.concatenate([dataset.x2, dataset.x1]),
        np.concatenate([dataset.labels, 1 - dataset.labels]),
        dataset.sources + dataset.sources,
        complete=dataset.complete,
    )


def bernoulli_likelihood(y: int, z: float) -> float:
    """S(y; z) = z^y (1-z)^(1-y)."""
    return float(z**y * (1.0 - z) ** (1 - y))


@dataclass(frozen=True)
class KernelConfig:
    lengthscale_factors: tuple = (0.5, 1.0, 2.0)
    dirichlet_eps: float = 0.01
    mc_samples: int = 64


def _matern52(a: np.ndarray, b: np.ndarray, lengthscales: np.ndarray, signal_var: float) -> np.ndarray:
    r = cdist(a / lengthscales, b / lengthscales)
    s = np.sqrt(5.0) * r
    return signal_var * (1.0 + s + s**2 / 3.0) * np.exp(-s)


def _median_lengthscales(z: np.ndarray) -> np.ndarray:
    n, d = z.shape
    scales = np.empty(d)
    for j in range(d):
        diffs = np.abs(z[:, None, j] - z[None, :, j])
        med = np.median(diffs[np.triu_indices(n, k=1)])
        scales[j] = med if med > 1e-12 else 1.0
    return scales


@dataclass
class _ClassPosterior:
    mean_const: float
    signal_var: float
    alpha: np.ndarray      # (K + noise)^-1 (targets - mean)
    chol: tuple            # cho_factor of (K + noise)
    targets: np.ndarray
    noise: np.ndarray


@dataclass
class PreferenceModel:
    """Two-class Dirichlet GP over pair features, plus sampling config."""

    z_train: np.ndarray = None
    lengthscales: np.ndarray = None
    classes: list = field(default_factory=list)
    dirichlet_eps: float = 0.01
    mc_samples: int = 64
    diagnostics: dict = field(default_factory=dict)

    @property
    def fitted(self) -> bool:
        return self.z_train is not None and len(self.classes) == 2

    @property
    def input_dims(self) -> int:
        return self.z_train.shape[1] // 2

    def latent(self, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Per-class latent mean and variance at pair features z (q, 2d)."""
        if not self.fitted:
            raise ModelNotFitted("preference model has not been fitted")
        k_star = [
            _matern52(self.z_train, z, self.lengthscales, c.signal_var)
            for c in self.classes
        ]
        means = np.stack(
            [c.mean_const + k.T @ c.alpha for c, k in zip(self.classes, k_star)],
            axis=1,
        )
        variances = np.empty_like(means)
        for ci, (c, k) in enumerate(zip(self.classes, k_star)):
            v = cho_solve(c.chol, k)
            variances[:, ci] = np.maximum(
                c.signal_var - np.einsum("ij,ij->j", k, v), LATENT_VAR_FLOOR
            )
        return means, variances


def _log_marginal(kmat: np.ndarray, noise: np.ndarray, targets: np.ndarray) -> tuple[float, tuple, np.ndarray, float]:
    mean_const = float(np.mean(targets))
    centered = targets - mean_const
    cov = kmat + np.diag(noise)
    chol = None
    for jitter in (0.0,) + JITTERS:
        try:
            chol = cho_factor(cov + jitter * np.eye(len(cov)), lower=True)
            break
        except np.linalg.LinAlgError:
            continue
    if chol is None:
        raise FitError("kernel matrix singular after jitter escalation")
    alpha = cho_solve(chol, centered)
    logdet = 2.0 * np.sum(np.log(np.diag(chol[0])))
    lml = -0.5 * centered @ alpha - 0.5 * logdet - 0.5 * len(targets) * np.log(2 * np.pi)
    return float(lml), chol, alpha, mean_const


def fit_preference_model(
    dataset: PreferenceDataset, kernel: KernelConfig = KernelConfig()
) -> PreferenceModel:
    """Fit the two-class Dirichlet GP on a skew-augmented dataset.

    Lengthscales come from the per-dimension median heuristic, then a
    maximum-marginal-likelihood grid over {0.5x, 1x, 2x} of the median.
    """
    if len(dataset) < 2:
        raise FitError("need at least 2 labeled pairs (after augmentation)")
    if len(dataset) % 2 != 0:
        raise FitError("expected a skew-augmented dataset of even size")
    z = np.concatenate([dataset.x1, dataset.x2], axis=1)
    y = dataset.labels
    eps = kernel.dirichlet_eps

    # Dirichlet transform per class: alpha -> lognormal moment matching
    targets, noises, signal_vars = [], [], []
    for c in (0, 1):
        alpha_c = eps + (y == c).astype(float)
        sigma2 = np.log(1.0 / alpha_c + 1.0)
        ytil = np.log(alpha_c) - sigma2 / 2.0
        targets.append(ytil)
        noises.append(sigma2)
        signal_vars.append(max(float(np.var(ytil)), 1e-8))

    base = _median_lengthscales(z)
    best = None
    for factor in kernel.lengthscale_factors:
        ls = base * factor
        total = 0.0
        parts = []
        try:
            for c in (0, 1):
                kmat = _matern52(z, z, ls, signal_vars[c])
                lml, chol, alpha, mean_const = _log_marginal(kmat, noises[c], targets[c])
                total += lml
                parts.append(
                    _ClassPosterior(mean_const, signal_vars[c], alpha, chol, targets[c], noises[c])
                )
        except FitError:
            continue
        if best is None or total > best[0]:
            best = (total, ls, parts)
    if best is None:
        raise FitError("kernel matrix singular for every lengthscale candidate")

    model = PreferenceModel(
        z_train=z,
        lengthscales=best[1],
        classes=best[2],
        dirichlet_eps=eps,
        mc_samples=kernel.mc_samples,
    )
    model.diagnostics = {
        "log_marginal": best[0],
        "lengthscale_factor": float(best[1][0] / base[0]),
        "train_consistency": training_consistency(model, dataset),
        "mean_train_likelihood": _mean_train_likelihood(model, dataset),
    }
    return model


def _pair_mean_prob(model: PreferenceModel, x1: np.ndarray, x2: np.ndarray) -> float:
    z = np.concatenate([np.atleast_2d(x1), np.atleast_2d(x2)], axis=1)
    means, _ = model.latent(z)
    return float(1.0 / (1.0 + np.exp(means[0, 0] - means[0, 1])))


def training_consistency(model: PreferenceModel, dataset: PreferenceDataset) -> float:
    """Fraction of training pairs whose predicted winner matches the label."""
    z = np.concatenate([dataset.x1, dataset.x2], axis=1)
    means, _ = model.latent(z)
    predicted = (means[:, 1] > means[:, 0]).astype(int)
    return float(np.mean(predicted == dataset.labels))


def _mean_train_likelihood(model: PreferenceModel, dataset: PreferenceDataset) -> float:
    z = np.concatenate([dataset.x1, dataset.x2], axis=1)
    means, _ = model.latent(z)
    p1 = 1.0 / (1.0 + np.exp(means[:, 0] - means[:, 1]))
    return float(
        np.mean(
            [bernoulli_likelihood(int(y), float(p)) for y, p in zip(dataset.labels, p1)]
        )
    )


@dataclass(frozen=True)
class PreferencePosterior:
    mean: np.ndarray
    variance: np.ndarray


def _pair_noise(
    x: np.ndarray, x_ref: np.ndarray, mc_seed: int, mc_samples: int
) -> np.ndarray:
    """Class-noise draws keyed by the unordered pair.

    The stream is derived from the lexicographically sorted pair and the
    columns are swapped for the reversed orientation, with antithetic halves.
    This makes the softmax estimates exactly antisymmetric — evaluating
    (a, b) and (b, a) yields probabilities summing to 1 up to rounding — and
    independent of how queries are batched.
    """
    a, b = np.asarray(x, dtype=float), np.asarray(x_ref, dtype=float)
    swapped = False
    for av, bv in zip(a, b):
        if av < bv:
            break
        if av > bv:
            swapped = True
            break
    lo, hi = (b, a) if swapped else (a, b)
    digest = hashlib.blake2b(
        np.concatenate([lo, hi]).tobytes(), digest_size=8
    ).digest()
    rng = np.random.default_rng(
        np.random.SeedSequence([int(mc_seed), int.from_bytes(digest, "little")])
    )
    half = rng.standard_normal(((mc_samples + 1) // 2, 2))
    eps = np.concatenate([half, -half])[:mc_samples]
    return eps[:, ::-1] if swapped else eps


def preference_posterior(
    model: PreferenceModel,
    queries: np.ndarray,
    x_ref: np.ndarray,
    mc_seed: int = 0,
) -> PreferencePosterior:
    """Monte-Carlo mean/variance of P(query beats x_ref) per query point.

    Latent samples per class are drawn from the marginal posterior at
    z = concat(query, x_ref) and mapped through a two-class softmax.
    """
    if not model.fitted:
        raise ModelNotFitted("preference model has not been fitted")
    queries = np.atleast_2d(np.asarray(queries, dtype=float))
    x_ref = np.asarray(x_ref, dtype=float)
    z = np.concatenate(
        [queries, np.repeat(x_ref[None, :], len(queries), axis=0)], axis=1
    )
    means, variances = model.latent(z)
    stds = np.sqrt(variances)
    mu = np.empty(len(queries))
    var = np.empty(len(queries))
    for i in range(len(queries)):
        eps = _pair_noise(queries[i], x_ref, mc_seed, model.mc_samples)
        draws = means[i] + stds[i] * eps
        p1 = 1.0 / (1.0 + np.exp(draws[:, 0] - draws[:, 1]))
        mu[i] = p1.mean()
        var[i] = max(p1.var(), PREF_VAR_FLOOR)
    return PreferencePosterior(mu, var)
