import json
import subprocess
import sys

import numpy as np
import pytest

from expertbo.bench import (
    cmd_ablate_accuracy,
    cmd_ablate_hypothesis,
    cmd_compare,
    cmd_report,
    cmd_sweep_zeta,
    cmd_train,
    load_config,
)
from expertbo.bench.cli import main as cli_main
from expertbo.bench.runner import BenchReport, load_report
from expertbo.errors import ConfigError, NothingToReport

TINY_TOML = """
[family]
dims = 2
n_train = 3
n_val = 1
n_test = 2
kind = "multimodal"
seed = 2

[tnp]
model_dim = 32
embed_layers = 2
ff_dim = 64
heads = 4
transformer_layers = 2
learning_rate = 3e-4
max_sequence = 16
train_steps = 80
batch_tasks = 4

[run]
n_seeds = 2
budget = 2
m_pairs = 6
n_candidates = 128
refine_iters = 5
zeta_grid = [0.1, 0.3]
accuracy_levels = [0.5, 1.0]
"""


@pytest.fixture(scope="module")
def bench_env(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("bench_cli")
    config_path = tmp / "cfg.toml"
    config_path.write_text(TINY_TOML)
    out = tmp / "out"
    cfg = load_config(config_path)
    cmd_train(cfg, out)
    return {"cfg": cfg, "config_path": config_path, "out": out}


class TestConfig:
    def test_toml_and_json_equivalent(self, tmp_path):
        toml_path = tmp_path / "c.toml"
        toml_path.write_text(TINY_TOML)
        cfg_toml = load_config(toml_path)
        json_path = tmp_path / "c.json"
        json_path.write_text(
            json.dumps(
                {
                    "family": {"dims": 2, "n_train": 3, "n_val": 1, "n_test": 2, "kind": "multimodal", "seed": 2},
                    "tnp": {"model_dim": 32, "embed_layers": 2, "ff_dim": 64, "heads": 4,
                            "transformer_layers": 2, "learning_rate": 3e-4, "max_sequence": 16,
                            "train_steps": 80, "batch_tasks": 4},
                    "run": {"n_seeds": 2, "budget": 2, "m_pairs": 6, "n_candidates": 128,
                            "refine_iters": 5, "zeta_grid": [0.1, 0.3], "accuracy_levels": [0.5, 1.0]},
                }
            )
        )
        cfg_json = load_config(json_path)
        assert cfg_toml == cfg_json

    def test_unknown_key_rejected(self, tmp_path):
        p = tmp_path / "bad.toml"
        p.write_text("[run]\nbogus_key = 1\n")
        with pytest.raises(ConfigError):
            load_config(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "none.toml")

    def test_sigma_pref_is_std_of_variance(self, bench_env):
        assert bench_env["cfg"].run.sigma_pref == pytest.approx(np.sqrt(0.1))


class TestTrain:
    def test_artifacts_written(self, bench_env):
        out = bench_env["out"]
        assert (out / "checkpoint.npz").exists()
        assert (out / "family.json").exists()
        loss = (out / "loss.csv").read_text().splitlines()
        assert loss[0] == "step,loss"
        assert len(loss) == 1 + bench_env["cfg"].tnp.train_steps

    def test_deterministic_checkpoint(self, bench_env, tmp_path):
        import hashlib

        cmd_train(bench_env["cfg"], tmp_path / "out2")
        a = hashlib.sha256((bench_env["out"] / "checkpoint.npz").read_bytes()).hexdigest()
        b = hashlib.sha256((tmp_path / "out2" / "checkpoint.npz").read_bytes()).hexdigest()
        assert a == b

    def test_loss_improves(self, bench_env):
        rows = (bench_env["out"] / "loss.csv").read_text().splitlines()[1:]
        losses = [float(r.split(",")[1]) for r in rows]
        assert np.mean(losses[-10:]) < losses[0]


class TestCompare:
    @pytest.fixture(scope="class")
    def report(self, bench_env):
        return cmd_compare(bench_env["cfg"], bench_env["out"])

    def test_dense_table_shape(self, bench_env, report):
        cfg = bench_env["cfg"]
        expected = len(cfg.run.methods) * cfg.run.n_seeds * (cfg.run.budget + cfg.run.initial)
        assert len(report.rows) == expected

    def test_traces_monotone(self, report):
        for method in report.methods():
            for seed in report.seeds(method):
                assert (np.diff(report.trace(method, seed)) <= 1e-12).all()

    def test_csv_roundtrip(self, bench_env, report):
        # regret round-trips exactly; wall_ms is rounded to microseconds
        back = load_report(bench_env["out"] / "compare.csv")
        assert len(back.rows) == len(report.rows)
        for a, b in zip(back.rows, report.rows):
            assert (a["method"], a["seed"], a["step"]) == (b["method"], b["seed"], b["step"])
            assert a["regret"] == b["regret"]
            assert a["wall_ms"] == pytest.approx(b["wall_ms"], abs=1e-3)

    def test_missing_checkpoint_is_config_error(self, bench_env, tmp_path):
        with pytest.raises(ConfigError):
            cmd_compare(bench_env["cfg"], tmp_path / "empty")


class TestAblations:
    def test_hypothesis_variants(self, bench_env):
        report = cmd_ablate_hypothesis(bench_env["cfg"], bench_env["out"])
        assert report.methods() == [
            "hlmbo_ei:adversarial", "hlmbo_ei:expert", "hlmbo_ei:random",
        ]
        for method in report.methods():
            for seed in report.seeds(method):
                trace = report.trace(method, seed)
                assert len(trace) == 3 and (np.diff(trace) <= 1e-12).all()

    def test_accuracy_levels(self, bench_env):
        report = cmd_ablate_accuracy(bench_env["cfg"], bench_env["out"])
        assert report.methods() == ["hlmbo_ei:acc100", "hlmbo_ei:acc50"]

    def test_zeta_sweep_selects_and_plumbs(self, bench_env):
        report = cmd_sweep_zeta(bench_env["cfg"], bench_env["out"])
        assert len(report.methods()) == 2
        selected = json.loads((bench_env["out"] / "selected_zeta.json").read_text())
        assert selected["zeta"] in (0.1, 0.3)
        by_variant = selected["per_variant"]
        best = min(by_variant, key=by_variant.get)
        assert best.endswith(str(selected["zeta"]))
        # downstream commands pick the selected value up as the default
        assert bench_env["cfg"].default_zeta(bench_env["out"]) == selected["zeta"]
        explicit = bench_env["cfg"]
        assert explicit.default_zeta(None) == 0.1


class TestReport:
    def test_summary_lists_methods_and_regenerates_identically(self, bench_env):
        text1 = cmd_report(bench_env["out"])
        assert "compare" in text1
        for method in ("hlmbo_ei", "mcoexbo_ucb", "tnp_ei"):
            assert method in text1
        assert (bench_env["out"] / "compare.png").stat().st_size > 0
        text2 = cmd_report(bench_env["out"])
        assert text1 == text2
        assert (bench_env["out"] / "report.md").read_text() == text1

    def test_empty_dir(self, tmp_path):
        with pytest.raises(NothingToReport):
            cmd_report(tmp_path)


class TestCli:
    def test_report_exit_codes(self, bench_env, tmp_path):
        assert cli_main(["report", "--out", str(bench_env["out"])]) == 0
        assert cli_main(["report", "--out", str(tmp_path)]) == 3

    def test_config_error_exit_code(self, tmp_path):
        assert cli_main(["compare", "--config", "/does/not/exist.toml", "--out", str(tmp_path)]) == 2

    def test_seed_override(self, bench_env, tmp_path):
        code = cli_main(
            [
                "compare",
                "--config", str(bench_env["config_path"]),
                "--out", str(bench_env["out"]),
                "--seeds", "1",
            ]
        )
        assert code == 0
        report = load_report(bench_env["out"] / "compare.csv")
        assert all(len(report.seeds(m)) == 1 for m in report.methods())

    def test_entrypoint_installed(self):
        proc = subprocess.run(
            [sys.executable, "-m", "expertbo.bench.cli", "report", "--out", "/tmp/definitely-missing-dir"],
            capture_output=True,
        )
        assert proc.returncode == 3
