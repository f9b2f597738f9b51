"""
Default-vs-augmented experiments and their speed-tracking error.
"""

from __future__ import annotations

import json
import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from app.core.models import RobotStateMsg
from app.core.settings import Settings
from app.monitors import MonitorSuite
from app.sim import ControlLoop, Scenario, TickRecord, write_ticks
from app.twin import EventStore, Transport, TwinLink, TwinService, create_transport

logger = logging.getLogger(__name__)

MODES = ("default", "augmented")
PLOT_COLUMNS = ["t", "mode", "expected", "actual", "corrected"]


def compute_mse(expected: Sequence[float] | np.ndarray,
                actual: Sequence[float] | np.ndarray) -> float:
    """Mean squared difference of two equal-length, non-empty series."""
    e = np.asarray(expected, dtype=float)
    a = np.asarray(actual, dtype=float)
    if e.shape != a.shape:
        raise ValueError(f"series lengths differ: {e.shape} vs {a.shape}")
    if e.size == 0:
        raise ValueError("series are empty")
    return float(np.mean((e - a) ** 2))


def stuck_intervals(ticks: Sequence[TickRecord], period: float, min_expected: float = 0.03,
                    ratio: float = 0.1) -> list[tuple[float, float]]:
    """
    (start, length) of runs where the robot barely moves although asked to:
    actual < ratio * expected while expected >= min_expected.
    """
    intervals: list[tuple[float, float]] = []
    start: Optional[float] = None
    count = 0
    for tick in ticks:
        stuck = (tick.expected_speed >= min_expected
                 and tick.actual_speed < ratio * tick.expected_speed)
        if stuck:
            if start is None:
                start, count = tick.t, 0
            count += 1
        elif start is not None:
            intervals.append((start, count * period))
            start = None
    if start is not None:
        intervals.append((start, count * period))
    return intervals


@dataclass
class ExperimentResult:
    scenario: str
    mode: str
    seed: int
    ticks: list[TickRecord]
    mse: float
    violations: dict[str, int] = field(default_factory=lambda: {"p1": 0, "p2": 0, "p3": 0})
    collisions: int = 0
    records: list[dict] = field(default_factory=list)    # twin log, augmented only

    @property
    def corrected(self) -> int:
        return sum(t.corrected for t in self.ticks)

    @property
    def flagged(self) -> int:
        return sum(t.flagged for t in self.ticks)

    def summary(self) -> dict:
        return {
            "scenario": self.scenario,
            "mode": self.mode,
            "seed": self.seed,
            "ticks": len(self.ticks),
            "mse": self.mse,
            "violations": dict(self.violations),
            "collisions": self.collisions,
            "corrected": self.corrected,
            "flagged": self.flagged,
        }


def _append_summary(path: Path, summary: dict) -> None:
    with path.open("a", encoding="utf-8") as fh:
        fh.write(json.dumps(summary, separators=(",", ":")) + "\n")


def run_experiment(scenario: Scenario, mode: str = "default", seed: Optional[int] = None,
                   out_dir: Optional[Path] = None,
                   settings: Optional[Settings] = None) -> ExperimentResult:
    """
    Run a scenario to the end of its duration.

    Augmented runs wire a twin over the transport named by settings.broker_url
    (the in-process bus by default). Default runs still evaluate the monitors,
    passively, so both modes report violation counts.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    seed = scenario.seed if seed is None else seed
    settings = Settings.from_dict(settings.to_dict()) if settings else Settings()
    settings.monitor = scenario.monitor
    settings.validate()
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)

    robot = scenario.build_robot(seed)
    mission = scenario.build_mission()
    logger.info(f"Experiment {scenario.name} mode={mode} seed={seed}")

    violations = {"p1": 0, "p2": 0, "p3": 0}
    records: list[dict] = []
    if mode == "default":
        suite = MonitorSuite(scenario.monitor, settings.monitor_backend)

        def observe(state: RobotStateMsg) -> None:
            verdict = suite.evaluate(state)
            violations["p1"] += not verdict.p1_ok
            violations["p2"] += not verdict.p2_ok
            violations["p3"] += bool(verdict.faulty_beams)

        ticks = ControlLoop(robot, mission, "default", observer=observe).run(scenario.run_duration)
    else:
        store = EventStore(out_dir / "twin_log.jsonl" if out_dir else None)
        twin_transport = create_transport(settings)
        robot_transport: Transport = (twin_transport if twin_transport.synchronous
                                      else create_transport(settings))
        service = TwinService(settings, twin_transport, store)
        service.start()
        twin_transport.connect()
        if robot_transport is not twin_transport:
            robot_transport.connect()
        link = TwinLink(robot_transport, settings.topic_config(), settings.verdict_timeout)
        try:
            ticks = ControlLoop(robot, mission, "augmented", link).run(scenario.run_duration)
        finally:
            service.stop()
            if robot_transport is not twin_transport:
                robot_transport.disconnect()
            twin_transport.disconnect()
            store.close()
        status = service.status
        violations = {"p1": status.violations_p1, "p2": status.violations_p2,
                      "p3": status.violations_p3}
        records = store.records()

    result = ExperimentResult(
        scenario=scenario.name,
        mode=mode,
        seed=seed,
        ticks=ticks,
        mse=compute_mse([t.expected_speed for t in ticks], [t.actual_speed for t in ticks]),
        violations=violations,
        collisions=robot.collisions,
        records=records,
    )
    if out_dir is not None:
        write_ticks(ticks, out_dir / "ticks.csv")
        _append_summary(out_dir / "summary.jsonl", result.summary())
    logger.info(f"{scenario.name} {mode} seed={seed}: mse={result.mse:.6f} "
                f"corrected={result.corrected} collisions={result.collisions}")
    return result


@dataclass(frozen=True)
class SeedComparison:
    seed: int
    mse_default: float
    mse_augmented: float

    @property
    def reduction(self) -> float:
        """Relative MSE reduction of augmented over default."""
        if self.mse_default == 0:
            return 0.0
        return (self.mse_default - self.mse_augmented) / self.mse_default


@dataclass
class Comparison:
    scenario: str
    runs: list[SeedComparison]

    @property
    def mean_reduction(self) -> float:
        return float(np.mean([r.reduction for r in self.runs])) if self.runs else 0.0

    @property
    def wins(self) -> int:
        """Seeds where the augmented run tracked expected speed better."""
        return sum(r.mse_augmented < r.mse_default for r in self.runs)

    def to_table(self) -> str:
        lines = [f"{'seed':>6}  {'mse_default':>12}  {'mse_augmented':>13}  {'reduction':>9}"]
        for r in self.runs:
            lines.append(f"{r.seed:>6}  {r.mse_default:>12.6f}  {r.mse_augmented:>13.6f}  "
                         f"{r.reduction:>8.1%}")
        lines.append(f"mean reduction {self.mean_reduction:.1%} "
                     f"(augmented better in {self.wins}/{len(self.runs)} seeds)")
        return "\n".join(lines)


def plot_frame(default: ExperimentResult, augmented: ExperimentResult) -> pd.DataFrame:
    rows = [
        {"t": t.t, "mode": result.mode, "expected": t.expected_speed,
         "actual": t.actual_speed, "corrected": t.corrected}
        for result in (default, augmented)
        for t in result.ticks
    ]
    return pd.DataFrame(rows, columns=PLOT_COLUMNS)


def compare(scenario: Scenario, seeds: Sequence[int], out_dir: Optional[Path] = None,
            settings: Optional[Settings] = None) -> Comparison:
    """
    Run both modes on every seed, one after the other.

    With out_dir, each run writes into `<mode>-seed<N>/` and the first seed's
    pair is written to plot.csv.
    """
    if not seeds:
        raise ValueError("compare needs at least one seed")
    runs = []
    for i, seed in enumerate(seeds):
        pair = {}
        for mode in MODES:
            run_dir = Path(out_dir) / f"{mode}-seed{seed}" if out_dir is not None else None
            pair[mode] = run_experiment(scenario, mode, seed, run_dir, settings)
        runs.append(SeedComparison(seed, pair["default"].mse, pair["augmented"].mse))
        if out_dir is not None:
            _append_summary(Path(out_dir) / "summary.jsonl",
                            {"scenario": scenario.name, "seed": seed,
                             "mse_default": runs[-1].mse_default,
                             "mse_augmented": runs[-1].mse_augmented,
                             "reduction": runs[-1].reduction})
            if i == 0:
                plot_frame(pair["default"], pair["augmented"]).to_csv(
                    Path(out_dir) / "plot.csv", index=False)
    return Comparison(scenario.name, runs)


def parse_seeds(text: str) -> list[int]:
    """'3', '1-10' or '1,4,7' -> list of seeds."""
    seeds: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        lo, sep, hi = part.partition("-")
        if sep:
            start, stop = int(lo), int(hi)
            if stop < start:
                raise ValueError(f"bad seed range {part!r}")
            seeds.extend(range(start, stop + 1))
        else:
            seeds.append(int(part))
    if not seeds:
        raise ValueError(f"no seeds in {text!r}")
    return seeds
