"""
Mock robot: publish recorded states as if they came from the robot.

Sources are replay CSVs (`t,lidar_1..lidar_360,expected_speed,actual_speed,
proposed_linear,proposed_angular,meta_1..meta_7`) or twin logs (.jsonl, their
state records). Replay is open loop: verdicts are counted, never fed back.
"""

from __future__ import annotations

import logging
import time
from collections.abc import Callable
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from app.core.models import (
    LIDAR_BEAMS,
    META_FIELDS,
    ActuationCommand,
    DecodeError,
    RobotStateMsg,
    TopicConfig,
    state_from_record,
)
from app.core.settings import Settings
from app.twin.service import ServiceStatus, TwinService
from app.twin.store import EventStore, read_log
from app.twin.transport import InMemoryBus, Transport, TransportError

logger = logging.getLogger(__name__)

LIDAR_COLUMNS = [f"lidar_{i}" for i in range(1, LIDAR_BEAMS + 1)]
META_COLUMNS = [f"meta_{i}" for i in range(1, META_FIELDS + 1)]
NUMERIC_COLUMNS = ["t", *LIDAR_COLUMNS, "expected_speed", "actual_speed",
                   "proposed_linear", "proposed_angular"]
REPLAY_COLUMNS = [*NUMERIC_COLUMNS, *META_COLUMNS]


class ReplayError(Exception):
    """A replay source is malformed or could not be published."""

    def __init__(self, message: str, row: Optional[int] = None):
        self.row = row
        super().__init__(f"row {row}: {message}" if row is not None else message)


@dataclass(frozen=True)
class ReplayRow:
    t: float
    lidar: list[float]
    expected_speed: float
    actual_speed: float
    proposed: ActuationCommand
    meta: list[str]

    def to_state(self, seq: int) -> RobotStateMsg:
        return RobotStateMsg(
            seq=seq,
            t=self.t,
            expected_linear=self.expected_speed,
            expected_angular=self.proposed.angular,
            actual_linear=self.actual_speed,
            actual_angular=0.0,
            expected_speed=self.expected_speed,
            actual_speed=self.actual_speed,
            lidar=list(self.lidar),
            proposed=self.proposed,
            meta=list(self.meta),
        )

    def values(self) -> list:
        return [self.t, *self.lidar, self.expected_speed, self.actual_speed,
                self.proposed.linear, self.proposed.angular, *self.meta]


def read_replay_csv(path: Path) -> list[ReplayRow]:
    """
    Parse a replay CSV. Rows are numbered from 1, after the header.

    Raises:
        ReplayError: missing columns, unparsable or missing numbers, or t decreasing
    """
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError:
        return []
    except pd.errors.ParserError as e:
        raise ReplayError(f"{path}: {e}") from e

    missing = [c for c in REPLAY_COLUMNS if c not in df.columns]
    if missing:
        raise ReplayError(f"{path}: missing columns {', '.join(missing[:5])}")
    if df.empty:
        return []

    values = df[NUMERIC_COLUMNS].apply(pd.to_numeric, errors="coerce").to_numpy(dtype=float)
    finite = np.isfinite(values)
    bad_rows = np.flatnonzero(~finite.all(axis=1))
    if bad_rows.size:
        row = int(bad_rows[0])
        column = NUMERIC_COLUMNS[int(np.flatnonzero(~finite[row])[0])]
        raise ReplayError(f"{path}: bad or missing value in {column}", row + 1)

    backwards = np.flatnonzero(np.diff(values[:, 0]) < 0)
    if backwards.size:
        raise ReplayError(f"{path}: t decreases", int(backwards[0]) + 2)

    meta = df[META_COLUMNS].fillna("").astype(str).to_numpy()
    lidar = values[:, 1:LIDAR_BEAMS + 1]
    tail = values[:, LIDAR_BEAMS + 1:]
    return [
        ReplayRow(
            t=float(values[i, 0]),
            lidar=lidar[i].tolist(),
            expected_speed=float(tail[i, 0]),
            actual_speed=float(tail[i, 1]),
            proposed=ActuationCommand(float(tail[i, 2]), float(tail[i, 3])),
            meta=meta[i].tolist(),
        )
        for i in range(len(values))
    ]


def write_replay_csv(rows: list[ReplayRow], path: Path) -> Path:
    pd.DataFrame([r.values() for r in rows], columns=REPLAY_COLUMNS).to_csv(path, index=False)
    return path


def row_from_state(state: RobotStateMsg) -> ReplayRow:
    return ReplayRow(state.t, list(state.lidar), state.expected_speed, state.actual_speed,
                     state.proposed, list(state.meta))


def load_states(path: Path) -> list[RobotStateMsg]:
    """States from a replay CSV (seq = row index) or from a twin log (seq kept)."""
    path = Path(path)
    if path.suffix == ".jsonl":
        states = []
        for n, record in enumerate(read_log(path, kind="state"), 1):
            try:
                state = state_from_record(record)
            except (DecodeError, KeyError) as e:
                raise ReplayError(f"{path}: bad state record: {e}", n) from e
            if state is not None:
                states.append(state)
        return states
    return [row.to_state(i) for i, row in enumerate(read_replay_csv(path))]


@dataclass
class ReplayReport:
    sent: int = 0
    verdicts: int = 0


def replay(path: Path, transport: Transport, topics: TopicConfig, rate: float = 0.0,
           sleep: Callable[[float], None] = time.sleep) -> ReplayReport:
    """
    Publish every state of a replay source.

    Messages are paced by their time difference divided by `rate`;
    rate 0 publishes as fast as possible.

    Raises:
        ReplayError: malformed source or a failed publish
    """
    if rate < 0:
        raise ValueError(f"rate must be >= 0, got {rate}")
    states = load_states(path)
    report = ReplayReport()

    def on_verdict(payload: bytes) -> None:
        report.verdicts += 1
        logger.debug(f"verdict {payload[:120]!r}")

    transport.subscribe(topics.action_topic, on_verdict, topics.qos)
    logger.info(f"Replaying {len(states)} states from {path}")
    previous: Optional[float] = None
    for n, state in enumerate(states, 1):
        if rate > 0 and previous is not None:
            sleep(max(0.0, (state.t - previous) / rate))
        try:
            transport.publish(topics.state_topic, state.to_json(), topics.qos)
        except TransportError as e:
            raise ReplayError(f"publish failed: {e}", n) from e
        report.sent += 1
        previous = state.t
    return report


def replay_to_twin(path: Path, settings: Settings, store: Optional[EventStore] = None,
                   rate: float = 0.0) -> tuple[ReplayReport, ServiceStatus]:
    """Replay a source into a fresh in-process twin on the in-memory bus."""
    bus = InMemoryBus()
    service = TwinService(settings, bus, store if store is not None else EventStore())
    service.start()
    bus.connect()
    try:
        report = replay(path, bus, settings.topic_config(), rate)
    finally:
        service.stop()
        bus.disconnect()
        service.store.close()
    return report, service.status
