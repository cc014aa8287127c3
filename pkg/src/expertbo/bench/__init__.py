from .config import BenchConfig, load_config
from .runner import (
    BenchReport,
    cmd_ablate_accuracy,
    cmd_ablate_hypothesis,
    cmd_compare,
    cmd_report,
    cmd_sweep_zeta,
    cmd_train,
)

__all__ = [
    "BenchConfig",
    "load_config",
    "BenchReport",
    "cmd_train",
    "cmd_compare",
    "cmd_ablate_hypothesis",
    "cmd_ablate_accuracy",
    "cmd_sweep_zeta",
    "cmd_report",
]
