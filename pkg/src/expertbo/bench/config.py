"""Benchmark configuration: TOML or JSON files with three sections.

``[family]`` feeds the synthetic task generator, ``[tnp]`` the surrogate
trainer, and ``[run]`` the comparison/ablation matrix. Every command is
deterministic given the config file and the seed list.
"""
from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from ..errors import ConfigError
from ..families import FamilyConfig
from ..surrogate import TnpConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

DEFAULT_METHODS = ("hlmbo_ei", "mcoexbo_ucb", "tnp_ei")
DEFAULT_HYPOTHESIS_KINDS = ("expert", "random", "adversarial")
DEFAULT_ACCURACY_LEVELS = (0.5, 0.75, 1.0)
DEFAULT_ZETA_GRID = (0.1, 0.3, 0.5)


@dataclass(frozen=True)
class RunSettings:
    methods: tuple = DEFAULT_METHODS
    n_seeds: int = 10
    seed_base: int = 100
    budget: int = 10
    initial: int = 1
    gamma: float = 0.1
    zeta: Optional[float] = None  # None -> validation-selected, else 0.1
    zeta_grid: tuple = DEFAULT_ZETA_GRID
    hypothesis_kinds: tuple = DEFAULT_HYPOTHESIS_KINDS
    accuracy_levels: tuple = DEFAULT_ACCURACY_LEVELS
    m_pairs: int = 20
    slices: int = 5
    slice_samples: int = 100
    sigma_pref_sq: float = 0.1
    explanations: bool = False
    workers: int = 1
    n_candidates: int = 2048
    refine_iters: int = 50

    def seeds(self) -> list[int]:
        return [self.seed_base + i for i in range(self.n_seeds)]

    @property
    def sigma_pref(self) -> float:
        return float(np.sqrt(self.sigma_pref_sq))


@dataclass(frozen=True)
class BenchConfig:
    family: FamilyConfig = FamilyConfig()
    family_seed: int = 1
    tnp: TnpConfig = TnpConfig()
    tnp_seed: int = 0
    run: RunSettings = RunSettings()

    def default_zeta(self, out_dir: Optional[Path] = None) -> float:
        """Explicit zeta wins; otherwise the validation-selected value if a
        sweep has produced one; otherwise the general default 0.1."""
        if self.run.zeta is not None:
            return self.run.zeta
        if out_dir is not None:
            selected = Path(out_dir) / "selected_zeta.json"
            if selected.exists():
                return float(json.loads(selected.read_text())["zeta"])
        return 0.1


def _build(cls, section: dict, name: str):
    valid = {f.name for f in fields(cls)}
    unknown = set(section) - valid
    if unknown:
        raise ConfigError(f"unknown keys in [{name}]: {sorted(unknown)}")
    converted = {
        k: tuple(v) if isinstance(v, list) else v for k, v in section.items()
    }
    try:
        return cls(**converted)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad [{name}] section: {exc}") from exc


def load_config(path) -> BenchConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    try:
        if path.suffix == ".toml":
            doc = tomllib.loads(path.read_text(encoding="utf-8"))
        elif path.suffix == ".json":
            doc = json.loads(path.read_text(encoding="utf-8"))
        else:
            raise ConfigError(f"config must be .toml or .json, got {path.suffix!r}")
    except ConfigError:
        raise
    except Exception as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc

    family_sec = dict(doc.get("family", {}))
    family_seed = family_sec.pop("seed", 1)
    tnp_sec = dict(doc.get("tnp", {}))
    tnp_seed = tnp_sec.pop("seed", 0)
    run_sec = dict(doc.get("run", {}))
    if "bump_width" in family_sec:
        family_sec["bump_width"] = tuple(family_sec["bump_width"])
    if "amp_range" in family_sec:
        family_sec["amp_range"] = tuple(family_sec["amp_range"])
    cfg = BenchConfig(
        family=_build(FamilyConfig, family_sec, "family"),
        family_seed=int(family_seed),
        tnp=_build(TnpConfig, tnp_sec, "tnp"),
        tnp_seed=int(tnp_seed),
        run=_build(RunSettings, run_sec, "run"),
    )
    if not cfg.run.seeds():
        raise ConfigError("need at least one seed")
    if not cfg.run.methods:
        raise ConfigError("need at least one method")
    return cfg
