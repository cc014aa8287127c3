import os
from pathlib import Path

import numpy as np
import pytest

from expertbo.bench import cmd_train, load_config
from expertbo.families import FamilyConfig, TaskFamily, load_family, make_synthetic_family
from expertbo.surrogate import TnpConfig, load_model, meta_train
from expertbo.tasks import BlackBoxTask, Optimum, SearchSpace, unit_space

REPO_ROOT = Path(__file__).resolve().parents[1]
DEFAULT_BENCH_CONFIG = REPO_ROOT / "configs" / "default.toml"

TINY_TNP = TnpConfig(
    model_dim=32,
    embed_layers=2,
    ff_dim=64,
    heads=4,
    transformer_layers=2,
    learning_rate=3e-4,
    max_sequence=16,
    train_steps=200,
    batch_tasks=8,
)


@pytest.fixture(scope="session")
def rf_family() -> TaskFamily:
    return make_synthetic_family(
        FamilyConfig(dims=2, n_train=6, n_val=2, n_test=3, kind="random_feature", lengthscale=0.35),
        seed=11,
    )


@pytest.fixture(scope="session")
def mm_family() -> TaskFamily:
    return make_synthetic_family(
        FamilyConfig(dims=2, n_train=6, n_val=2, n_test=3, kind="multimodal"),
        seed=7,
    )


@pytest.fixture(scope="session")
def tiny_model(rf_family):
    """A small, quickly trained surrogate for plumbing-level tests."""
    return meta_train(rf_family, TINY_TNP, seed=0)


@pytest.fixture(scope="session")
def bench_artifacts(tmp_path_factory):
    """Family + checkpoint trained with the committed bench defaults.

    Expensive (minutes); built once per session and reusable across runs via
    the EXPERTBO_TEST_CACHE directory.
    """
    cache = os.environ.get("EXPERTBO_TEST_CACHE")
    out = Path(cache) if cache else tmp_path_factory.mktemp("bench")
    cfg = load_config(DEFAULT_BENCH_CONFIG)
    family_path = out / "family.json"
    ck_path = out / "checkpoint.npz"
    if not (family_path.exists() and ck_path.exists()):
        cmd_train(cfg, out)
    return {
        "config": cfg,
        "out": out,
        "family": load_family(family_path),
        "model": load_model(ck_path),
        "family_path": str(family_path),
        "checkpoint_path": str(ck_path),
    }


@pytest.fixture(scope="session")
def mm_model(mm_family):
    """A surrogate good enough for behavioral checks on the multimodal family."""
    cfg = TnpConfig(
        model_dim=32,
        embed_layers=2,
        ff_dim=64,
        heads=4,
        transformer_layers=3,
        learning_rate=3e-4,
        max_sequence=24,
        train_steps=800,
        batch_tasks=8,
    )
    return meta_train(mm_family, cfg, seed=0)


def two_bump_task(height_a=1.0, height_b=1.0, task_id="two-bump") -> BlackBoxTask:
    """2-D task with Gaussian bumps at (0.25, 0.5) and (0.75, 0.5)."""
    ca = np.array([0.25, 0.5])
    cb = np.array([0.75, 0.5])

    def fn(X):
        da = ((X - ca) ** 2).sum(axis=1)
        db = ((X - cb) ** 2).sum(axis=1)
        return height_a * np.exp(-da / 0.02) + height_b * np.exp(-db / 0.02)

    best = ca if height_a >= height_b else cb
    return BlackBoxTask(
        task_id,
        unit_space(2),
        fn,
        known_optimum=Optimum(best, float(fn(best[None])[0])),
        params={"height_a": height_a, "height_b": height_b},
    )


def constant_family(n_train=6, seed=0) -> TaskFamily:
    """Family of constant functions; the analytic posterior mean is the
    context-value average."""
    rng = np.random.default_rng(seed)
    space = unit_space(1)

    def make(i, c):
        return BlackBoxTask(
            f"const-{i}",
            space,
            lambda X, c=c: np.full(len(X), c),
            known_optimum=Optimum(np.array([0.5]), c),
            params={"c": c},
        )

    consts = rng.uniform(-1.0, 1.0, size=n_train + 2)
    tasks = [make(i, float(c)) for i, c in enumerate(consts)]
    return TaskFamily(
        train=tuple(tasks[:n_train]),
        val=tuple(tasks[n_train : n_train + 1]),
        test=tuple(tasks[n_train + 1 :]),
        family_config=FamilyConfig(dims=1, n_train=n_train, n_val=1, n_test=1),
        seed=seed,
    )
