from .loop import (
    AccuracyChoiceOracle,
    PrefConfig,
    RecordedChoiceOracle,
    SessionConfig,
    SimulatedChoiceOracle,
    derive_seed,
    run_baseline,
    run_hlmbo,
)
from .records import RunRecord, load_run, replay, save_run

__all__ = [
    "AccuracyChoiceOracle",
    "PrefConfig",
    "RecordedChoiceOracle",
    "SessionConfig",
    "SimulatedChoiceOracle",
    "derive_seed",
    "run_baseline",
    "run_hlmbo",
    "RunRecord",
    "load_run",
    "replay",
    "save_run",
]
