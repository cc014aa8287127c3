"""Benchmark execution: training, head-to-head comparisons, and ablations.

All ablation commands reuse the checkpoint produced by ``train``; nothing is
retrained mid-ablation. Independent (method, seed) runs execute in a worker
pool; the report tables are assembled single-threaded. Seeds are paired
across methods: seed i always lands on the same test task for every method.
"""
from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from ..acquisition import SearchConfig
from ..errors import ConfigError, NothingToReport
from ..families import TaskFamily, load_family, make_synthetic_family, save_family
from ..orchestrator import (
    AccuracyChoiceOracle,
    PrefConfig,
    SessionConfig,
    SimulatedChoiceOracle,
    derive_seed,
    run_baseline,
)
from ..surrogate import TnpModel, load_model, meta_train, save_model
from .config import BenchConfig

CSV_HEADER = ["method", "seed", "step", "regret", "wall_ms"]


@dataclass
class BenchReport:
    """Dense per-(method, seed, step) regret table."""

    rows: list  # dicts with CSV_HEADER keys

    def methods(self) -> list[str]:
        return sorted({r["method"] for r in self.rows})

    def seeds(self, method: str) -> list[int]:
        return sorted({r["seed"] for r in self.rows if r["method"] == method})

    def trace(self, method: str, seed: int) -> np.ndarray:
        rows = [r for r in self.rows if r["method"] == method and r["seed"] == seed]
        rows.sort(key=lambda r: r["step"])
        return np.asarray([r["regret"] for r in rows])

    def final_regrets(self, method: str) -> np.ndarray:
        return np.asarray([self.trace(method, s)[-1] for s in self.seeds(method)])

    def aggregate(self, method: str) -> tuple[np.ndarray, np.ndarray]:
        traces = np.stack([self.trace(method, s) for s in self.seeds(method)])
        return traces.mean(axis=0), traces.std(axis=0)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=CSV_HEADER, lineterminator="\n")
        writer.writeheader()
        for r in self.rows:
            writer.writerow(
                {
                    "method": r["method"],
                    "seed": r["seed"],
                    "step": r["step"],
                    "regret": repr(float(r["regret"])),
                    "wall_ms": f"{r['wall_ms']:.3f}",
                }
            )
        return buf.getvalue()

    @staticmethod
    def from_csv(text: str) -> "BenchReport":
        rows = []
        for r in csv.DictReader(io.StringIO(text)):
            rows.append(
                {
                    "method": r["method"],
                    "seed": int(r["seed"]),
                    "step": int(r["step"]),
                    "regret": float(r["regret"]),
                    "wall_ms": float(r["wall_ms"]),
                }
            )
        return BenchReport(rows)


def save_report(report: BenchReport, path) -> None:
    Path(path).write_text(report.to_csv(), encoding="utf-8")


def load_report(path) -> BenchReport:
    return BenchReport.from_csv(Path(path).read_text(encoding="utf-8"))


def cmd_train(cfg: BenchConfig, out_dir) -> dict:
    """Generate the family, meta-train the surrogate, write artifacts."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    family = make_synthetic_family(cfg.family, cfg.family_seed)
    save_family(family, out / "family.json")
    model = meta_train(family, cfg.tnp, cfg.tnp_seed)
    save_model(model, out / "checkpoint.npz")
    with (out / "loss.csv").open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "loss"])
        for i, v in enumerate(model.loss_curve):
            writer.writerow([i, repr(float(v))])
    return {
        "family": str(out / "family.json"),
        "checkpoint": str(out / "checkpoint.npz"),
        "loss_csv": str(out / "loss.csv"),
    }


def _load_artifacts(out_dir) -> tuple[TaskFamily, TnpModel, str]:
    out = Path(out_dir)
    family_path = out / "family.json"
    ck_path = out / "checkpoint.npz"
    if not family_path.exists() or not ck_path.exists():
        raise ConfigError(
            f"missing artifacts in {out}: run `bench train` first"
        )
    return load_family(family_path), load_model(ck_path), str(ck_path)


def _session_config(
    cfg: BenchConfig,
    task,
    model: TnpModel,
    model_ref: str,
    seed: int,
    zeta: float,
    hypothesis_kind: Optional[str],
) -> SessionConfig:
    run = cfg.run
    return SessionConfig(
        task=task,
        model=model,
        pref=PrefConfig(
            m_pairs=run.m_pairs,
            hypothesis_kind=hypothesis_kind,
            slices=run.slices,
            slice_samples=run.slice_samples,
        ),
        budget=run.budget,
        initial=run.initial,
        gamma=run.gamma,
        zeta=zeta,
        sigma_pref=run.sigma_pref,
        seed=seed,
        explanations=run.explanations,
        search=SearchConfig(n_candidates=run.n_candidates, refine_iters=run.refine_iters),
        task_kind=cfg.family.kind,
        model_ref=model_ref,
    )


def _record_rows(label: str, seed: int, record) -> list[dict]:
    trace = record.regret_trace()
    initial = record.config["initial"]
    rows = []
    for step, regret in enumerate(trace):
        wall = 0.0 if step < initial else record.wall_ms[step - initial]
        rows.append(
            {"method": label, "seed": seed, "step": step, "regret": float(regret), "wall_ms": wall}
        )
    return rows


def _run_matrix(
    cfg: BenchConfig,
    tasks: list,
    variants: list,  # (label, kind, zeta, hypothesis_kind, accuracy)
    out_dir,
) -> BenchReport:
    _family, model, model_ref = _load_artifacts(out_dir)
    run = cfg.run

    def one(args) -> list[dict]:
        label, kind, zeta, hyp, accuracy, seed, idx = args
        task = tasks[idx % len(tasks)]
        session = _session_config(cfg, task, model, model_ref, seed, zeta, hyp)
        if accuracy is None:
            expert = SimulatedChoiceOracle(task, run.sigma_pref, derive_seed(seed, 4))
        else:
            expert = AccuracyChoiceOracle(task, accuracy, derive_seed(seed, 5))
        record = run_baseline(kind, session, expert=expert)
        return _record_rows(label, seed, record)

    jobs = [
        (label, kind, zeta, hyp, accuracy, seed, idx)
        for (label, kind, zeta, hyp, accuracy) in variants
        for idx, seed in enumerate(run.seeds())
    ]
    rows: list[dict] = []
    if run.workers > 1:
        with ThreadPoolExecutor(max_workers=run.workers) as pool:
            for chunk in pool.map(one, jobs):
                rows.extend(chunk)
    else:
        for job in jobs:
            rows.extend(one(job))
    rows.sort(key=lambda r: (r["method"], r["seed"], r["step"]))
    return BenchReport(rows)


def cmd_compare(cfg: BenchConfig, out_dir) -> BenchReport:
    """All configured methods, paired seeds, simulated expert, test tasks."""
    family, _, _ = _load_artifacts(out_dir)
    zeta = cfg.default_zeta(out_dir)
    variants = [(m, m, zeta, "expert", None) for m in cfg.run.methods]
    report = _run_matrix(cfg, list(family.test), variants, out_dir)
    save_report(report, Path(out_dir) / "compare.csv")
    _plot(report, Path(out_dir) / "compare.png", "method comparison")
    return report


def cmd_ablate_hypothesis(cfg: BenchConfig, out_dir) -> BenchReport:
    family, _, _ = _load_artifacts(out_dir)
    zeta = cfg.default_zeta(out_dir)
    variants = [
        (f"hlmbo_ei:{kind}", "hlmbo_ei", zeta, kind, None)
        for kind in cfg.run.hypothesis_kinds
    ]
    report = _run_matrix(cfg, list(family.test), variants, out_dir)
    save_report(report, Path(out_dir) / "hypothesis.csv")
    _plot(report, Path(out_dir) / "hypothesis.png", "hypothesis ablation")
    return report


def cmd_ablate_accuracy(cfg: BenchConfig, out_dir) -> BenchReport:
    family, _, _ = _load_artifacts(out_dir)
    zeta = cfg.default_zeta(out_dir)
    variants = [
        (f"hlmbo_ei:acc{int(round(100 * acc))}", "hlmbo_ei", zeta, "expert", acc)
        for acc in cfg.run.accuracy_levels
    ]
    report = _run_matrix(cfg, list(family.test), variants, out_dir)
    save_report(report, Path(out_dir) / "accuracy.csv")
    _plot(report, Path(out_dir) / "accuracy.png", "label-accuracy ablation")
    return report


def cmd_sweep_zeta(cfg: BenchConfig, out_dir) -> BenchReport:
    """Sweep the exploration margin on the validation tasks and record the best."""
    family, _, _ = _load_artifacts(out_dir)
    tasks = list(family.val) or list(family.test)
    variants = [
        (f"hlmbo_ei:zeta{z}", "hlmbo_ei", z, "expert", None) for z in cfg.run.zeta_grid
    ]
    report = _run_matrix(cfg, tasks, variants, out_dir)
    save_report(report, Path(out_dir) / "zeta.csv")
    _plot(report, Path(out_dir) / "zeta.png", "exploration margin sweep")
    best_label = min(report.methods(), key=lambda m: report.final_regrets(m).mean())
    best = float(best_label.split("zeta")[-1])
    (Path(out_dir) / "selected_zeta.json").write_text(
        json.dumps({"zeta": best, "per_variant": {
            m: float(report.final_regrets(m).mean()) for m in report.methods()
        }}, sort_keys=True),
        encoding="utf-8",
    )
    return report


REPORT_TABLES = ("compare", "hypothesis", "accuracy", "zeta")


def cmd_report(out_dir) -> str:
    """Markdown summary plus refreshed plots from the CSV tables on disk."""
    out = Path(out_dir)
    found = [(name, out / f"{name}.csv") for name in REPORT_TABLES if (out / f"{name}.csv").exists()]
    if not found:
        raise NothingToReport(f"no result tables in {out}")
    lines = ["# Benchmark report", ""]
    for name, path in found:
        report = load_report(path)
        lines.append(f"## {name}")
        lines.append("")
        lines.append("| method | seeds | final regret (mean ± std) |")
        lines.append("|---|---|---|")
        for method in report.methods():
            finals = report.final_regrets(method)
            lines.append(
                f"| {method} | {len(finals)} | {finals.mean():.6f} ± {finals.std():.6f} |"
            )
        lines.append("")
        _plot(report, out / f"{name}.png", name)
    text = "\n".join(lines) + "\n"
    (out / "report.md").write_text(text, encoding="utf-8")
    return text


def _plot(report: BenchReport, path, title: str) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for method in report.methods():
        mean, std = report.aggregate(method)
        steps = np.arange(len(mean))
        ax.plot(steps, mean, label=method)
        ax.fill_between(steps, mean - std, mean + std, alpha=0.2)
    ax.set_xlabel("evaluation")
    ax.set_ylabel("simple regret")
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
