"""Tests for the offline check, replay, experiments and the command line."""

import json
from pathlib import Path

import pandas as pd
import pytest

from app.core.models import LIDAR_BEAMS, ActuationCommand, RobotStateMsg
from app.core.settings import Settings
from app.harness import (
    PLOT_COLUMNS,
    REPLAY_COLUMNS,
    Comparison,
    ReplayError,
    ReplayRow,
    SeedComparison,
    check,
    compare,
    compute_mse,
    load_states,
    parse_assignments,
    parse_seeds,
    read_replay_csv,
    replay,
    replay_to_twin,
    row_from_state,
    run_experiment,
    stuck_intervals,
    write_replay_csv,
)
from app.sim import Scenario, TickRecord
from app.stream import KindMismatchError, TraceFormatError
from app.twin import EventStore, InMemoryBus, TwinService, read_log
from main import EXIT_ACCEPTANCE, EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, main

ROOT = Path(__file__).resolve().parent.parent
P2_SPEC = ROOT / "specs" / "p2_tolerance.tessla"
LISTING = ROOT / "traces" / "listing1.in"
SCENARIOS = ROOT / "scenarios"


def short_scenario(**overrides) -> Scenario:
    data = {
        "name": "short",
        "seed": 2,
        "world": {"bounds": {"x_min": -0.5, "y_min": -1.0, "x_max": 5.0, "y_max": 1.0}},
        "terrain": [{"name": "mud", "x_start": 0.05, "x_end": 5.0, "traction": 0.5}],
        "robot": {"lidar_sigma": 0.0},
        "mission": {"kind": "constant", "linear": 0.1},
        "monitor": {"delta": 0.02},
        "duration": 2.0,
    }
    data.update(overrides)
    return Scenario.from_dict(data)


def sample_rows(n: int = 3) -> list[ReplayRow]:
    return [
        ReplayRow(t=i * 0.1, lidar=[2.0] * LIDAR_BEAMS, expected_speed=0.1,
                  actual_speed=0.04 if i else 0.1, proposed=ActuationCommand(0.1, 0.0),
                  meta=["fw", "default", "pose", "schedule", "100", "floor", ""])
        for i in range(n)
    ]


def tick(t: float, expected: float, actual: float) -> TickRecord:
    cmd = ActuationCommand(expected, 0.0)
    return TickRecord(seq=int(t * 10), t=t, expected_speed=expected, actual_speed=actual,
                      proposed=cmd, applied=cmd, approved=True, corrected=False,
                      collision=False, encoder_speed=expected, pose_speed=actual,
                      clearance=3.5)


@pytest.fixture
def config(tmp_path) -> str:
    return str(Settings().save(tmp_path / "settings.json"))


class TestCheck:
    """Offline spec/trace check."""

    def test_listing_with_delta_two(self):
        """The recorded trace flags timestamps 2, 4 and 8."""
        lines = check(P2_SPEC, LISTING, {"delta": 2}).splitlines()
        diffs = [line for line in lines if ": diff = " in line]
        violations = [line for line in lines if ": violation = " in line]
        assert diffs == ["0: diff = 1.0", "2: diff = -4.0", "4: diff = 3.0",
                         "6: diff = 0.0", "8: diff = 3.0"]
        assert violations == ["0: violation = false", "2: violation = true",
                              "4: violation = true", "6: violation = false",
                              "8: violation = true"]

    def test_bad_override_kind(self):
        """A Bool constant cannot be set to a number."""
        with pytest.raises(KindMismatchError):
            check(P2_SPEC, LISTING, {"oneSided": 3})

    def test_bad_trace(self, tmp_path):
        """Malformed trace lines surface as TraceFormatError."""
        trace = tmp_path / "bad.in"
        trace.write_text("0: actualSpeed 1\n")
        with pytest.raises(TraceFormatError):
            check(P2_SPEC, trace)

    def test_parse_assignments(self):
        """name=value pairs with scalar values."""
        assert parse_assignments(["delta=2", "oneSided = true", "gain=0.25"]) == {
            "delta": 2, "oneSided": True, "gain": 0.25}
        with pytest.raises(ValueError, match="name=value"):
            parse_assignments(["delta"])


class TestMse:
    """compute_mse and stuck detection."""

    def test_worked_example(self):
        """((0.02)^2 + 0 + (0.04)^2) / 3."""
        mse = compute_mse([0.1, 0.1, 0.05], [0.08, 0.1, 0.01])
        assert mse == pytest.approx(0.000667, abs=1e-6)

    def test_identical(self):
        """Equal series have zero error."""
        assert compute_mse([0.1, 0.2], [0.1, 0.2]) == 0.0

    def test_permutation_and_scaling(self):
        """Order does not matter, scaling differences scales quadratically."""
        e, a = [0.1, 0.2, 0.3], [0.0, 0.25, 0.1]
        base = compute_mse(e, a)
        assert compute_mse(e[::-1], a[::-1]) == pytest.approx(base)
        assert compute_mse([2 * x for x in e], [2 * x for x in a]) == pytest.approx(4 * base)

    def test_invalid(self):
        """Empty or mismatched series raise."""
        with pytest.raises(ValueError, match="empty"):
            compute_mse([], [])
        with pytest.raises(ValueError, match="lengths"):
            compute_mse([0.1], [0.1, 0.2])

    def test_stuck_intervals(self):
        """Runs of near-zero actual speed under a real command."""
        ticks = ([tick(i * 0.1, 0.05, 0.0) for i in range(10)]
                 + [tick(1.0 + i * 0.1, 0.05, 0.05) for i in range(3)]
                 + [tick(1.3 + i * 0.1, 0.01, 0.0) for i in range(5)]
                 + [tick(1.8 + i * 0.1, 0.05, 0.001) for i in range(4)])
        intervals = stuck_intervals(ticks, 0.1)
        assert len(intervals) == 2
        assert intervals[0] == (0.0, pytest.approx(1.0))
        assert intervals[1][1] == pytest.approx(0.4)


class TestSeeds:
    """Seed list parsing."""

    def test_forms(self):
        """Single, range and list forms."""
        assert parse_seeds("3") == [3]
        assert parse_seeds("1-4") == [1, 2, 3, 4]
        assert parse_seeds("1, 4,7") == [1, 4, 7]
        assert parse_seeds("1-2,5") == [1, 2, 5]

    def test_invalid(self):
        """Empty text and reversed ranges raise."""
        with pytest.raises(ValueError):
            parse_seeds("")
        with pytest.raises(ValueError, match="range"):
            parse_seeds("5-1")
        with pytest.raises(ValueError):
            parse_seeds("a")


class TestReplayCsv:
    """Replay CSV format."""

    def test_write_read(self, tmp_path):
        """Rows survive the CSV file."""
        rows = sample_rows()
        path = write_replay_csv(rows, tmp_path / "run.csv")
        assert list(pd.read_csv(path).columns) == REPLAY_COLUMNS
        assert read_replay_csv(path) == rows

    def test_missing_column(self, tmp_path):
        """Every column is required."""
        path = tmp_path / "run.csv"
        pd.DataFrame({"t": [0.0]}).to_csv(path, index=False)
        with pytest.raises(ReplayError, match="missing columns"):
            read_replay_csv(path)

    def test_bad_value_names_row(self, tmp_path):
        """Unparsable numbers report their row and column."""
        path = write_replay_csv(sample_rows(), tmp_path / "run.csv")
        df = pd.read_csv(path, dtype=str, keep_default_na=False)
        df.loc[1, "actual_speed"] = "fast"
        df.to_csv(path, index=False)
        with pytest.raises(ReplayError, match="actual_speed") as info:
            read_replay_csv(path)
        assert info.value.row == 2

    def test_time_goes_backwards(self, tmp_path):
        """t must not decrease."""
        rows = sample_rows()
        rows[2] = ReplayRow(0.05, rows[2].lidar, 0.1, 0.1, rows[2].proposed, rows[2].meta)
        path = write_replay_csv(rows, tmp_path / "run.csv")
        with pytest.raises(ReplayError, match="decreases") as info:
            read_replay_csv(path)
        assert info.value.row == 3

    def test_empty_file(self, tmp_path):
        """An empty file replays nothing."""
        path = tmp_path / "run.csv"
        path.write_text("")
        assert read_replay_csv(path) == []

    def test_states_from_csv(self, tmp_path):
        """Row index becomes seq."""
        path = write_replay_csv(sample_rows(), tmp_path / "run.csv")
        states = load_states(path)
        assert [s.seq for s in states] == [0, 1, 2]
        assert states[1].actual_speed == pytest.approx(0.04)

    def test_row_from_state(self):
        """States convert back to rows."""
        state = RobotStateMsg(seq=5, t=0.5, expected_speed=0.1, actual_speed=0.09,
                              proposed=ActuationCommand(0.1, 0.2))
        row = row_from_state(state)
        assert row.t == 0.5 and row.proposed.angular == 0.2
        assert len(row.values()) == len(REPLAY_COLUMNS)


class TestReplay:
    """Mock robot publishing."""

    def test_replay_to_twin(self, tmp_path):
        """Every row gets a verdict from an in-process twin."""
        path = write_replay_csv(sample_rows(5), tmp_path / "run.csv")
        store = EventStore(tmp_path / "twin.jsonl")
        report, status = replay_to_twin(path, Settings(), store)
        assert (report.sent, report.verdicts) == (5, 5)
        assert status.violations_p2 == 4
        kinds = [r["kind"] for r in read_log(tmp_path / "twin.jsonl")]
        assert kinds.count("verdict") == 5

    def test_pacing(self, tmp_path):
        """Pacing sleeps the time difference divided by rate."""
        path = write_replay_csv(sample_rows(3), tmp_path / "run.csv")
        bus = InMemoryBus()
        bus.connect()
        naps: list[float] = []
        replay(path, bus, Settings().topic_config(), rate=2.0, sleep=naps.append)
        assert naps == [pytest.approx(0.05), pytest.approx(0.05)]

    def test_negative_rate(self, tmp_path):
        """Rates below zero are rejected."""
        path = write_replay_csv(sample_rows(1), tmp_path / "run.csv")
        with pytest.raises(ValueError, match="rate"):
            replay(path, InMemoryBus(), Settings().topic_config(), rate=-1.0)

    def test_publish_failure(self, tmp_path):
        """A closed transport fails the replay at row 1."""
        path = write_replay_csv(sample_rows(2), tmp_path / "run.csv")
        with pytest.raises(ReplayError) as info:
            replay(path, InMemoryBus(), Settings().topic_config())
        assert info.value.row == 1

    def test_replay_twin_log(self, tmp_path):
        """A twin log replays its state records with their seqs."""
        bus = InMemoryBus()
        service = TwinService(Settings(), bus, EventStore(tmp_path / "first.jsonl"))
        service.start()
        bus.connect()
        for i, row in enumerate(sample_rows(4)):
            bus.publish("tessla", row.to_state(i * 2).to_json())
        service.store.close()
        states = load_states(tmp_path / "first.jsonl")
        assert [s.seq for s in states] == [0, 2, 4, 6]


class TestExperiment:
    """Single runs and comparisons."""

    def test_default_run(self, tmp_path):
        """Default mode applies proposals and still counts violations."""
        result = run_experiment(short_scenario(), "default", out_dir=tmp_path)
        assert len(result.ticks) == 20
        assert result.corrected == 0
        assert result.violations["p2"] > 0
        assert result.mse > 0
        frame = pd.read_csv(tmp_path / "ticks.csv")
        assert len(frame) == 20
        summary = json.loads((tmp_path / "summary.jsonl").read_text().splitlines()[0])
        assert summary["mode"] == "default" and summary["seed"] == 2

    def test_augmented_run(self, tmp_path):
        """Augmented mode corrects slip and logs every exchange."""
        result = run_experiment(short_scenario(), "augmented", out_dir=tmp_path)
        assert result.corrected > 0
        assert result.flagged == 0
        kinds = [r["kind"] for r in result.records]
        assert kinds.count("state") == kinds.count("verdict") == 20
        assert (tmp_path / "twin_log.jsonl").exists()

    def test_correction_reduces_error(self):
        """Steady slip is tracked better with the twin."""
        scenario = short_scenario(duration=5.0)
        default = run_experiment(scenario, "default")
        augmented = run_experiment(scenario, "augmented")
        assert augmented.mse < default.mse

    def test_deterministic(self):
        """Same seed, same ticks."""
        a = run_experiment(short_scenario(), "augmented", seed=9)
        b = run_experiment(short_scenario(), "augmented", seed=9)
        assert [t.row() for t in a.ticks] == [t.row() for t in b.ticks]

    def test_unknown_mode(self):
        """Only default and augmented."""
        with pytest.raises(ValueError, match="mode"):
            run_experiment(short_scenario(), "turbo")

    def test_compare_outputs(self, tmp_path):
        """compare writes per-run directories and one plot file."""
        comparison = compare(short_scenario(), [1, 2], tmp_path)
        assert [r.seed for r in comparison.runs] == [1, 2]
        for name in ("default-seed1", "augmented-seed1", "default-seed2", "augmented-seed2"):
            assert (tmp_path / name / "ticks.csv").exists()
        plot = pd.read_csv(tmp_path / "plot.csv")
        assert list(plot.columns) == PLOT_COLUMNS
        assert set(plot["mode"]) == {"default", "augmented"}
        assert len((tmp_path / "summary.jsonl").read_text().splitlines()) == 2

    def test_compare_needs_seeds(self):
        """An empty seed list is an error."""
        with pytest.raises(ValueError, match="seed"):
            compare(short_scenario(), [])

    def test_comparison_table(self):
        """Reduction, wins and the summary line."""
        comparison = Comparison("x", [SeedComparison(1, 0.002, 0.001),
                                      SeedComparison(2, 0.001, 0.0015),
                                      SeedComparison(3, 0.0, 0.0)])
        assert comparison.runs[0].reduction == pytest.approx(0.5)
        assert comparison.runs[2].reduction == 0.0
        assert comparison.wins == 1
        assert comparison.mean_reduction == pytest.approx((0.5 - 0.5 + 0.0) / 3)
        assert "(augmented better in 1/3 seeds)" in comparison.to_table()


class TestCli:
    """Command-line exit codes and output."""

    def test_check(self, capsys):
        """check prints the output trace."""
        code = main(["check", str(P2_SPEC), str(LISTING), "--set", "delta=2"])
        assert code == EXIT_OK
        assert "2: violation = true" in capsys.readouterr().out

    def test_check_missing_spec(self, tmp_path):
        """A missing spec file is a usage error."""
        assert main(["check", str(tmp_path / "nope.tessla"), str(LISTING)]) == EXIT_USAGE

    def test_check_bad_spec(self, tmp_path, capsys):
        """Spec errors report their position and exit 1."""
        spec = tmp_path / "bad.tessla"
        spec.write_text("in x: Events[Int]\ndef y = x +\n")
        assert main(["check", str(spec), str(LISTING)]) == EXIT_USAGE
        assert "line" in capsys.readouterr().err

    def test_unknown_stream(self, tmp_path):
        """An event for an undeclared input is a runtime failure."""
        trace = tmp_path / "extra.in"
        trace.write_text("0: mystery = 1\n")
        assert main(["check", str(P2_SPEC), str(trace)]) == EXIT_RUNTIME

    def test_usage_error(self):
        """Unknown subcommands exit 1."""
        assert main(["dance"]) == EXIT_USAGE

    def test_version(self, capsys):
        """--version exits 0."""
        assert main(["--version"]) == EXIT_OK
        assert "twinmon" in capsys.readouterr().out.lower()

    def test_replay_in_process(self, tmp_path, config, capsys):
        """replay over memory:// runs a local twin and reports counts."""
        path = write_replay_csv(sample_rows(3), tmp_path / "run.csv")
        log = tmp_path / "twin.jsonl"
        code = main(["--config", config, "replay", str(path), "--log", str(log)])
        assert code == EXIT_OK
        assert "sent 3 states, 3 verdicts" in capsys.readouterr().out
        assert log.exists()

    def test_replay_bad_csv(self, tmp_path, config):
        """A malformed replay source exits 1."""
        path = tmp_path / "run.csv"
        path.write_text("t,x\n0,1\n")
        assert main(["--config", config, "replay", str(path),
                     "--log", str(tmp_path / "twin.jsonl")]) == EXIT_USAGE

    def test_experiment(self, tmp_path, config, capsys):
        """experiment prints its summary and writes ticks."""
        code = main(["--config", config, "experiment", str(SCENARIOS / "stuck.yaml"),
                     "--mode", "augmented", "--out", str(tmp_path)])
        assert code == EXIT_OK
        assert "mode=augmented" in capsys.readouterr().out
        assert (tmp_path / "ticks.csv").exists()

    def test_compare_assert_reduction(self, tmp_path, config, capsys):
        """An unmet reduction threshold exits 3."""
        code = main(["--config", config, "compare", str(SCENARIOS / "flat.yaml"),
                     "--seed", "1", "--assert-reduction", "50", "--out", str(tmp_path)])
        assert code == EXIT_ACCEPTANCE
        captured = capsys.readouterr()
        assert "mean reduction" in captured.out
        assert "below 50%" in captured.err

    def test_bad_scenario(self, tmp_path, config):
        """Broken scenarios are usage errors."""
        path = tmp_path / "broken.yaml"
        path.write_text("mission: {kind: dance}\n")
        assert main(["--config", config, "experiment", str(path)]) == EXIT_USAGE
