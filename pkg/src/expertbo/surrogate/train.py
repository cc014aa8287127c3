"""Meta-training of the surrogate on synthetic source tasks.

Each step draws a batch of (task, context-size) samples: the task index and
the context/target split point are picked uniformly, a fresh evaluation
sequence is sampled from the task, and the Gaussian negative log-likelihood
of the target suffix is minimized with teacher forcing.
"""
from __future__ import annotations

import numpy as np
import torch

from ..errors import InsufficientData, InvalidFamily, TrainingDiverged
from ..families import TaskFamily
from ..tasks import BlackBoxTask, TaskDataset, sample_space
from .model import (
    Normalization,
    SequenceRegressor,
    TnpConfig,
    TnpModel,
    build_train_mask,
    nll,
)

NORM_SAMPLES = 512
GRAD_CLIP = 1.0


def _family_normalization(family: TaskFamily, seed: int) -> Normalization:
    space = family.space
    values = []
    for i, task in enumerate(family.train):
        pts = sample_space(space, NORM_SAMPLES, "uniform", seed=(seed * 1_000_003 + i))
        values.append(task.fn(pts))
    y = np.concatenate(values)
    std = float(np.std(y))
    return Normalization.from_space(space, float(np.mean(y)), max(std, 1e-8))


def _sample_batch(
    family: TaskFamily, cfg: TnpConfig, norm: Normalization, rng: np.random.Generator
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor, torch.Tensor, torch.Tensor]:
    """Build one padded training batch of token sequences.

    Returns (tokens, allowed, y_targets, batch_index, position_index) where the
    two index tensors address the query rows carrying real targets.
    """
    space = family.space
    d = space.dims
    e_n = cfg.max_sequence
    b = cfg.batch_tasks
    task_idx = rng.integers(0, len(family.train), size=b)
    splits = rng.integers(1, e_n, size=b)
    xs = space.lower + rng.uniform(size=(b, e_n, d)) * space.widths
    seq_len = 2 * e_n - splits
    s_max = int(seq_len.max())
    tokens = np.zeros((b, s_max, d + 2), dtype=np.float32)
    allowed = torch.zeros(b, s_max, s_max, dtype=torch.bool)
    b_idx, pos_idx, y_rows = [], [], []
    for i in range(b):
        task = family.train[int(task_idx[i])]
        m = int(splits[i])
        l = e_n - m
        y = task.fn(xs[i])
        xn = (xs[i] - space.lower) / space.widths
        yn = (y - norm.y_mean) / norm.y_std
        ctx = np.concatenate([xn[:m], yn[:m, None], np.ones((m, 1))], axis=1)
        tv = np.concatenate([xn[m:], yn[m:, None], np.ones((l, 1))], axis=1)
        tq = np.concatenate([xn[m:], np.zeros((l, 2))], axis=1)
        s = m + 2 * l
        tokens[i, :s] = np.concatenate([ctx, tv, tq], axis=0).astype(np.float32)
        allowed[i, :s, :s] = build_train_mask(m, l)
        b_idx.extend([i] * l)
        pos_idx.extend(range(m + l, s))
        y_rows.extend(yn[m:])
    return (
        torch.from_numpy(tokens),
        allowed,
        torch.tensor(y_rows, dtype=torch.float32),
        torch.tensor(b_idx, dtype=torch.long),
        torch.tensor(pos_idx, dtype=torch.long),
    )


def _check_finite(net: torch.nn.Module, step: int, losses: list):
    for name, p in net.named_parameters():
        if not torch.isfinite(p).all():
            raise TrainingDiverged(
                f"non-finite weights in {name} after step {step}",
                diagnostics={"step": step, "recent_losses": losses[-20:]},
            )


def meta_train(family: TaskFamily, cfg: TnpConfig, seed: int) -> TnpModel:
    """Train the surrogate; deterministic given (family, cfg, seed)."""
    if not family.train:
        raise InvalidFamily("family has no training tasks")
    if cfg.max_sequence < 2:
        raise InsufficientData("training sequences need at least 2 points")

    norm = _family_normalization(family, seed)
    torch.manual_seed(seed)
    net = SequenceRegressor(cfg, family.space.dims)
    optimizer = torch.optim.Adam(net.parameters(), lr=cfg.learning_rate)
    scheduler = torch.optim.lr_scheduler.CosineAnnealingLR(
        optimizer, T_max=max(cfg.train_steps, 1)
    )
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x7E42]))

    losses: list[float] = []
    for step in range(cfg.train_steps):
        tokens, allowed, y, b_idx, pos_idx = _sample_batch(family, cfg, norm, rng)
        h = net(tokens, allowed)
        mean, var = net.heads(h[b_idx, pos_idx])
        loss = torch.mean(0.5 * (torch.log(2 * torch.pi * var) + (y - mean) ** 2 / var))
        if not torch.isfinite(loss):
            raise TrainingDiverged(
                f"loss became non-finite at step {step}",
                diagnostics={"step": step, "recent_losses": losses[-20:]},
            )
        optimizer.zero_grad()
        loss.backward()
        torch.nn.utils.clip_grad_norm_(net.parameters(), GRAD_CLIP)
        optimizer.step()
        scheduler.step()
        losses.append(float(loss.detach()))
        _check_finite(net, step, losses)

    net.eval()
    return TnpModel(
        config=cfg,
        net=net,
        input_dims=family.space.dims,
        normalization=norm,
        loss_curve=np.asarray(losses),
    )


def gradient_check(
    cfg: TnpConfig = TnpConfig(
        model_dim=8,
        embed_layers=2,
        ff_dim=16,
        heads=2,
        transformer_layers=1,
        max_sequence=3,
        train_steps=0,
        batch_tasks=1,
    ),
    input_dims: int = 1,
    n_context: int = 1,
    n_targets: int = 2,
    seed: int = 0,
    fd_step: float = 1e-6,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    Runs a miniature double-precision model on one random sequence and
    differences every parameter element.
    """
    torch.manual_seed(seed)
    net = SequenceRegressor(cfg, input_dims).double()
    rng = np.random.default_rng(seed)
    m, l = n_context, n_targets
    xn = rng.uniform(size=(m + l, input_dims))
    yn = rng.normal(size=m + l)
    ctx = np.concatenate([xn[:m], yn[:m, None], np.ones((m, 1))], axis=1)
    tv = np.concatenate([xn[m:], yn[m:, None], np.ones((l, 1))], axis=1)
    tq = np.concatenate([xn[m:], np.zeros((l, 2))], axis=1)
    tokens = torch.from_numpy(np.concatenate([ctx, tv, tq], axis=0))[None]
    allowed = build_train_mask(m, l)[None]
    y = torch.from_numpy(yn[m:])

    def loss_fn() -> torch.Tensor:
        h = net(tokens, allowed)
        mean, var = net.heads(h[:, m + l :, :])
        return torch.mean(
            0.5 * (torch.log(2 * torch.pi * var) + (y - mean[0]) ** 2 / var[0])
        )

    loss = loss_fn()
    net.zero_grad()
    loss.backward()
    analytic = torch.cat([p.grad.flatten().clone() for p in net.parameters()])

    numeric = torch.zeros_like(analytic)
    offset = 0
    with torch.no_grad():
        for p in net.parameters():
            flat = p.view(-1)
            for j in range(flat.numel()):
                orig = flat[j].item()
                flat[j] = orig + fd_step
                up = loss_fn().item()
                flat[j] = orig - fd_step
                down = loss_fn().item()
                flat[j] = orig
                numeric[offset + j] = (up - down) / (2 * fd_step)
            offset += flat.numel()
    denom = max(float(analytic.norm()), float(numeric.norm()), 1e-12)
    return float((analytic - numeric).norm()) / denom


def validation_nll(
    model: TnpModel,
    tasks: list[BlackBoxTask],
    n_context: int = 8,
    n_targets: int = 16,
    rounds: int = 4,
    seed: int = 0,
) -> float:
    """Average held-out NLL over sampled context/target splits."""
    total = []
    k = 0
    for task in tasks:
        for r in range(rounds):
            pts = sample_space(task.space, n_context + n_targets, "uniform", seed=seed * 7919 + k)
            k += 1
            y = task.fn(pts)
            ctx = TaskDataset(task.task_id, pts[:n_context], y[:n_context])
            tgt = TaskDataset(task.task_id, pts[n_context:], y[n_context:])
            total.append(nll(model, ctx, tgt))
    return float(np.mean(total))
