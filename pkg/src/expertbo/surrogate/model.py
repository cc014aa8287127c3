"""Sequence-model surrogate with Gaussian predictive heads.

The model conditions on an observed context set without gradient updates and
emits a per-point predictive mean and variance. Three token roles exist:

* context tokens ``(x, y, 1)`` — mutually fully visible;
* observed-target tokens ``(x_j, y_j, 1)`` — used only when scoring a known
  target sequence (teacher forcing); token j sees context and targets <= j;
* query tokens ``(x_i, 0, 0)`` — read out by the heads; query i sees context
  and observed-target tokens < i, never other queries and never itself.

At prediction time no observed-target tokens exist, so each query depends on
the context alone: a point's posterior is independent of whatever other
queries share the batch. Context rows are canonically ordered before encoding,
so any permutation of the same context yields bit-identical output.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, asdict, field
import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from ..errors import ShapeError
from ..tasks import SearchSpace, TaskDataset

VAR_FLOOR = 1e-6
MASK_FILL = -1e30


@dataclass(frozen=True)
class TnpConfig:
    model_dim: int = 64
    embed_layers: int = 4
    ff_dim: int = 128
    heads: int = 8
    transformer_layers: int = 6
    dropout: float = 0.0
    learning_rate: float = 5e-5
    max_sequence: int = 64
    train_steps: int = 20_000
    batch_tasks: int = 16

    def __post_init__(self):
        if self.model_dim % self.heads != 0:
            raise ValueError("model_dim must be divisible by heads")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")

    def to_json(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Normalization:
    """Per-family input scaling and output standardization."""

    x_lower: np.ndarray
    x_width: np.ndarray
    y_mean: float
    y_std: float

    def to_json(self) -> dict:
        return {
            "x_lower": np.asarray(self.x_lower).tolist(),
            "x_width": np.asarray(self.x_width).tolist(),
            "y_mean": self.y_mean,
            "y_std": self.y_std,
        }

    @staticmethod
    def from_json(doc: dict) -> "Normalization":
        return Normalization(
            np.asarray(doc["x_lower"], dtype=float),
            np.asarray(doc["x_width"], dtype=float),
            float(doc["y_mean"]),
            float(doc["y_std"]),
        )

    @staticmethod
    def from_space(space: SearchSpace, y_mean: float, y_std: float) -> "Normalization":
        return Normalization(space.lower.copy(), space.widths.copy(), y_mean, y_std)


@dataclass(frozen=True)
class Posterior:
    """Predictive mean and variance aligned with the queried points."""

    mean: np.ndarray
    variance: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        variance = np.asarray(self.variance, dtype=float)
        mean.setflags(write=False)
        variance.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "variance", variance)

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(self.variance)


class MaskedAttention(nn.Module):
    def __init__(self, model_dim: int, heads: int, dropout: float):
        super().__init__()
        self.heads = heads
        self.head_dim = model_dim // heads
        self.qkv = nn.Linear(model_dim, 3 * model_dim)
        self.proj = nn.Linear(model_dim, model_dim)
        self.drop = nn.Dropout(dropout)

    def _split(self, x: torch.Tensor):
        b, s, _ = x.shape
        q, k, v = self.qkv(x).reshape(b, s, 3, self.heads, self.head_dim).unbind(dim=2)
        return q.transpose(1, 2), k.transpose(1, 2), v.transpose(1, 2)

    def forward(self, x: torch.Tensor, allowed: torch.Tensor) -> torch.Tensor:
        # x: (B, S, D); allowed: (B, S, S) bool, True where row may attend column
        q, k, v = self._split(x)
        scores = q @ k.transpose(-1, -2) / math.sqrt(self.head_dim)
        gate = allowed[:, None, :, :]
        # Large-negative fill keeps fully masked rows finite (uniform weights),
        # which are then zeroed so such rows contribute nothing.
        scores = scores.masked_fill(~gate, MASK_FILL)
        attn = torch.softmax(scores, dim=-1)
        attn = attn * gate.any(dim=-1, keepdim=True)
        b, s = x.shape[:2]
        out = (attn @ v).transpose(1, 2).reshape(b, s, -1)
        return self.drop(self.proj(out))

    def cross(self, xq: torch.Tensor, xkv: torch.Tensor) -> torch.Tensor:
        # every query row attends every key/value row; no mask needed
        if xkv.shape[1] == 0:
            return torch.zeros_like(xq)
        q = self._split(xq)[0]
        _, k, v = self._split(xkv)
        attn = torch.softmax(q @ k.transpose(-1, -2) / math.sqrt(self.head_dim), dim=-1)
        b, s = xq.shape[:2]
        out = (attn @ v).transpose(1, 2).reshape(b, s, -1)
        return self.drop(self.proj(out))


class Block(nn.Module):
    def __init__(self, cfg: TnpConfig):
        super().__init__()
        self.ln1 = nn.LayerNorm(cfg.model_dim)
        self.attn = MaskedAttention(cfg.model_dim, cfg.heads, cfg.dropout)
        self.ln2 = nn.LayerNorm(cfg.model_dim)
        self.ff = nn.Sequential(
            nn.Linear(cfg.model_dim, cfg.ff_dim),
            nn.GELU(),
            nn.Linear(cfg.ff_dim, cfg.model_dim),
            nn.Dropout(cfg.dropout),
        )

    def forward(self, x: torch.Tensor, allowed: torch.Tensor) -> torch.Tensor:
        x = x + self.attn(self.ln1(x), allowed)
        return x + self.ff(self.ln2(x))

    def forward_pair(
        self, hc: torch.Tensor, hq: torch.Tensor
    ) -> tuple[torch.Tensor, torch.Tensor]:
        """Context stream self-attends; query rows cross-attend the context."""
        nc, nq = self.ln1(hc), self.ln1(hq)
        hq = hq + self.attn.cross(nq, nc)
        if hc.shape[1]:
            full = torch.ones(
                hc.shape[0], hc.shape[1], hc.shape[1], dtype=torch.bool, device=hc.device
            )
            hc = hc + self.attn(nc, full)
            hc = hc + self.ff(self.ln2(hc))
        hq = hq + self.ff(self.ln2(hq))
        return hc, hq


class SequenceRegressor(nn.Module):
    """Embedding MLP, masked transformer blocks, and Gaussian heads."""

    def __init__(self, cfg: TnpConfig, input_dims: int):
        super().__init__()
        layers: list[nn.Module] = [nn.Linear(input_dims + 2, cfg.model_dim)]
        for _ in range(cfg.embed_layers - 1):
            layers += [nn.ReLU(), nn.Linear(cfg.model_dim, cfg.model_dim)]
        self.embed = nn.Sequential(*layers)
        self.blocks = nn.ModuleList(Block(cfg) for _ in range(cfg.transformer_layers))
        self.ln_f = nn.LayerNorm(cfg.model_dim)
        self.head_mean = nn.Linear(cfg.model_dim, 1)
        self.head_var = nn.Linear(cfg.model_dim, 1)

    def forward(self, tokens: torch.Tensor, allowed: torch.Tensor) -> torch.Tensor:
        h = self.embed(tokens)
        for block in self.blocks:
            h = block(h, allowed)
        return self.ln_f(h)

    def heads(self, h: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        mean = self.head_mean(h).squeeze(-1)
        var = F.softplus(self.head_var(h).squeeze(-1)) + VAR_FLOOR
        return mean, var


@dataclass
class TnpModel:
    """Trained surrogate: network weights plus normalization statistics."""

    config: TnpConfig
    net: SequenceRegressor
    input_dims: int
    normalization: Normalization
    loss_curve: np.ndarray = field(default_factory=lambda: np.empty(0))

    def normalize_x(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.normalization.x_lower) / self.normalization.x_width

    def normalize_y(self, y: np.ndarray) -> np.ndarray:
        return (np.asarray(y, dtype=np.float64) - self.normalization.y_mean) / self.normalization.y_std


def build_train_mask(m: int, l: int, device=None) -> torch.Tensor:
    """Attention gate for a [context, observed-target, query] sequence."""
    s = m + 2 * l
    allowed = torch.zeros(s, s, dtype=torch.bool, device=device)
    allowed[:m, :m] = True
    for a in range(l):
        allowed[m + a, :m] = True
        allowed[m + a, m : m + a + 1] = True
        allowed[m + l + a, :m] = True
        allowed[m + l + a, m : m + a] = True
    return allowed


def build_predict_mask(m: int, l: int, device=None) -> torch.Tensor:
    """Attention gate for a [context, query] sequence: queries see context only."""
    s = m + l
    allowed = torch.zeros(s, s, dtype=torch.bool, device=device)
    allowed[:, :m] = True
    return allowed


def canonical_context_order(points: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Sort index making the context encoding independent of observation order."""
    keys = [values] + [points[:, j] for j in range(points.shape[1] - 1, -1, -1)]
    return np.lexsort(keys)


def _encode_context(model: TnpModel, context: TaskDataset) -> np.ndarray:
    if len(context) == 0:
        return np.empty((0, model.input_dims + 2), dtype=np.float32)
    if context.dims != model.input_dims:
        raise ShapeError(
            f"context has {context.dims} dims, model expects {model.input_dims}"
        )
    order = canonical_context_order(context.points, context.values)
    xs = model.normalize_x(context.points[order])
    ys = model.normalize_y(context.values[order])
    out = np.concatenate([xs, ys[:, None], np.ones((len(ys), 1))], axis=1)
    return out.astype(np.float32)


def _encode_queries(model: TnpModel, targets: np.ndarray) -> np.ndarray:
    xs = model.normalize_x(targets)
    pad = np.zeros((len(xs), 2))
    return np.concatenate([xs, pad], axis=1).astype(np.float32)


def predict(model: TnpModel, context: TaskDataset, targets: np.ndarray) -> Posterior:
    """Per-point predictive mean and variance given the observed context.

    A single forward pass with no gradient updates; each target's posterior
    depends only on the context set.
    """
    targets = np.asarray(targets, dtype=float)
    if targets.ndim != 2 or targets.shape[0] == 0:
        raise ShapeError("targets must be a nonempty (n, dims) array")
    if targets.shape[1] != model.input_dims:
        raise ShapeError(
            f"targets have {targets.shape[1]} dims, model expects {model.input_dims}"
        )
    ctx = _encode_context(model, context)
    tq = _encode_queries(model, targets)
    with torch.no_grad():
        hc = model.net.embed(torch.from_numpy(ctx)[None])
        hq = model.net.embed(torch.from_numpy(tq)[None])
        for block in model.net.blocks:
            hc, hq = block.forward_pair(hc, hq)
        mean_std, var_std = model.net.heads(model.net.ln_f(hq))
    norm = model.normalization
    mean = mean_std[0].numpy().astype(np.float64) * norm.y_std + norm.y_mean
    variance = var_std[0].numpy().astype(np.float64) * norm.y_std**2
    return Posterior(mean, variance)


def gaussian_nll(y: np.ndarray, mean: np.ndarray, variance: np.ndarray) -> float:
    """Mean negative Gaussian log-density of y under N(mean, variance)."""
    y = np.asarray(y, dtype=float)
    mean = np.asarray(mean, dtype=float)
    variance = np.asarray(variance, dtype=float)
    per_point = 0.5 * (np.log(2.0 * np.pi * variance) + (y - mean) ** 2 / variance)
    return float(np.mean(per_point))


def nll(model: TnpModel, context: TaskDataset, targets: TaskDataset) -> float:
    """Mean negative log-likelihood of a target sequence.

    Scored autoregressively with teacher forcing: the prediction for target i
    conditions on the context and the true values of targets before i.
    """
    if len(targets) == 0:
        raise ShapeError("targets must be nonempty")
    if targets.dims != model.input_dims:
        raise ShapeError(
            f"targets have {targets.dims} dims, model expects {model.input_dims}"
        )
    ctx = _encode_context(model, context)
    xs = model.normalize_x(targets.points)
    ys = model.normalize_y(targets.values)
    tv = np.concatenate([xs, ys[:, None], np.ones((len(ys), 1))], axis=1).astype(np.float32)
    tq = _encode_queries(model, targets.points)
    m, l = len(ctx), len(tq)
    tokens = torch.from_numpy(np.concatenate([ctx, tv, tq], axis=0))[None]
    allowed = build_train_mask(m, l)[None]
    with torch.no_grad():
        h = model.net(tokens, allowed)
        mean_std, var_std = model.net.heads(h[:, m + l :, :])
    norm = model.normalization
    mean = mean_std[0].numpy().astype(np.float64) * norm.y_std + norm.y_mean
    variance = var_std[0].numpy().astype(np.float64) * norm.y_std**2
    return gaussian_nll(targets.values, mean, variance)
