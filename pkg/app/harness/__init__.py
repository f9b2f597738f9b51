"""Command-line harness operations: offline checks, replay and experiments."""

from .check import check, parse_assignments
from .experiment import (
    MODES,
    PLOT_COLUMNS,
    Comparison,
    ExperimentResult,
    SeedComparison,
    compare,
    compute_mse,
    parse_seeds,
    plot_frame,
    run_experiment,
    stuck_intervals,
)
from .replay import (
    REPLAY_COLUMNS,
    ReplayError,
    ReplayReport,
    ReplayRow,
    load_states,
    read_replay_csv,
    replay,
    replay_to_twin,
    row_from_state,
    write_replay_csv,
)

__all__ = [
    "check",
    "parse_assignments",
    "MODES",
    "PLOT_COLUMNS",
    "Comparison",
    "ExperimentResult",
    "SeedComparison",
    "compare",
    "compute_mse",
    "parse_seeds",
    "plot_frame",
    "run_experiment",
    "stuck_intervals",
    "REPLAY_COLUMNS",
    "ReplayError",
    "ReplayReport",
    "ReplayRow",
    "load_states",
    "read_replay_csv",
    "replay",
    "replay_to_twin",
    "row_from_state",
    "write_replay_csv",
]
