"""
The digital twin: ingest robot state, run the monitors, answer with verdicts.

Every accepted state goes through one serialized pipeline:
decode -> dedup by seq -> mirror + log -> evaluate -> clamp -> publish -> log.
"""

from __future__ import annotations

import logging
import queue
import signal
import threading
import time
from dataclasses import dataclass, field
from typing import Optional

from app.core.models import (
    V_MAX,
    ActuationCommand,
    DecodeError,
    MonitorConfig,
    RobotStateMsg,
    VerdictMsg,
)
from app.core.settings import Settings
from app.monitors import MonitorError, MonitorSuite, SpeedPair, Verdict, as_scan

from .status import StatusServer
from .store import EventStore
from .transport import Transport, TransportError, create_transport

logger = logging.getLogger(__name__)


@dataclass
class ServiceStatus:
    """Counters exposed by the status endpoint."""
    connected: bool = False
    messages_in: int = 0
    messages_out: int = 0
    dead_letters: int = 0
    dropped: int = 0
    violations_p1: int = 0
    violations_p2: int = 0
    violations_p3: int = 0
    publish_failures: int = 0
    latency_total: float = 0.0     # s
    latency_count: int = 0

    @property
    def mean_latency(self) -> float:
        return self.latency_total / self.latency_count if self.latency_count else 0.0

    def render(self) -> str:
        lines = [
            f"connected {int(self.connected)}",
            f"messages_in {self.messages_in}",
            f"messages_out {self.messages_out}",
            f"dead_letters {self.dead_letters}",
            f"dropped {self.dropped}",
            f"violations_p1 {self.violations_p1}",
            f"violations_p2 {self.violations_p2}",
            f"violations_p3 {self.violations_p3}",
            f"publish_failures {self.publish_failures}",
            f"mean_latency_ms {self.mean_latency * 1000.0:.3f}",
        ]
        return "\n".join(lines) + "\n"


@dataclass
class DTState:
    """Mirrored robot state plus what the twin derived from it."""
    monitor: MonitorConfig
    latest: Optional[RobotStateMsg] = None
    last_verdict: Optional[Verdict] = None
    status: ServiceStatus = field(default_factory=ServiceStatus)


def decode_state(payload: bytes | str) -> RobotStateMsg:
    """
    Decode and validate a state payload.

    Raises:
        DecodeError: not a well-formed state message
        MonitorError: the monitors could not evaluate it
    """
    msg = RobotStateMsg.from_json(payload)
    as_scan(msg.lidar)
    SpeedPair(msg.expected_speed, msg.actual_speed)
    return msg


def clamp_action(action: ActuationCommand, v_max: float) -> ActuationCommand:
    """Egress cap: linear speed within [0, min(v_max, V_MAX)]."""
    return ActuationCommand(min(max(action.linear, 0.0), min(v_max, V_MAX)), action.angular)


class TwinService:
    """
    One digital twin instance.

    With a synchronous transport the pipeline runs on the publisher's thread;
    otherwise transport callbacks only enqueue and a worker thread drains the
    inbox in arrival order.
    """

    def __init__(self, settings: Settings, transport: Transport,
                 store: Optional[EventStore] = None, threaded: Optional[bool] = None):
        self.settings = settings
        self.transport = transport
        self.store = store if store is not None else EventStore()
        self.suite = MonitorSuite(settings.monitor, settings.monitor_backend)
        self.state = DTState(monitor=settings.monitor)
        self._threaded = (not transport.synchronous) if threaded is None else threaded
        self._inbox: queue.Queue[Optional[tuple[bytes, float]]] = queue.Queue()
        self._worker: Optional[threading.Thread] = None
        self._pipeline_lock = threading.Lock()
        self._last_seq: Optional[int] = None

    @property
    def status(self) -> ServiceStatus:
        return self.state.status

    def start(self) -> None:
        self.transport.on_connection_change(self._on_connection)
        self.state.status.connected = self.transport.connected
        self.transport.subscribe(self.settings.state_topic, self._on_payload, self.settings.qos)
        if self._threaded and self._worker is None:
            self._worker = threading.Thread(target=self._run_worker, name="twin-pipeline",
                                            daemon=True)
            self._worker.start()
        logger.info(f"Twin listening on {self.settings.state_topic!r}, "
                    f"answering on {self.settings.action_topic!r}")

    def stop(self) -> None:
        if self._worker is not None:
            self._inbox.put(None)
            self._worker.join()
            self._worker = None
        self.store.flush()

    def wait_idle(self) -> None:
        """Block until every queued message has been processed."""
        self._inbox.join()

    def _on_connection(self, connected: bool) -> None:
        self.state.status.connected = connected

    def _on_payload(self, payload: bytes) -> None:
        received = time.perf_counter()
        if self._threaded:
            self._inbox.put((payload, received))
        else:
            self.handle(payload, received)

    def _run_worker(self) -> None:
        while True:
            item = self._inbox.get()
            try:
                if item is None:
                    return
                self.handle(*item)
            except Exception:
                logger.exception("Twin pipeline failed on a message")
            finally:
                self._inbox.task_done()

    def handle(self, payload: bytes | str,
               received: Optional[float] = None) -> Optional[VerdictMsg]:
        """Run one payload through the pipeline; None when no verdict is due."""
        if received is None:
            received = time.perf_counter()
        with self._pipeline_lock:
            msg = self.ingest(payload)
            if msg is None:
                return None
            return self.on_state_change(msg, received)

    def ingest(self, payload: bytes | str) -> Optional[RobotStateMsg]:
        """Decode, dedup and mirror a state; None if it was rejected."""
        status = self.state.status
        status.messages_in += 1
        try:
            msg = decode_state(payload)
        except (DecodeError, MonitorError) as e:
            status.dead_letters += 1
            self.store.dead_letter(None, str(e), payload)
            logger.warning(f"Dead letter: {e}")
            return None
        if self._last_seq is not None and msg.seq <= self._last_seq:
            status.dropped += 1
            logger.warning(f"Dropped stale state seq={msg.seq} (last {self._last_seq})")
            return None
        self._last_seq = msg.seq
        self.state.latest = msg
        self.store.append("state", msg.t, msg.seq, msg.to_payload())
        return msg

    def on_state_change(self, msg: RobotStateMsg, received: float) -> VerdictMsg:
        """Evaluate the monitors on a fresh state and publish the verdict."""
        verdict = self.suite.evaluate(msg)
        self.state.last_verdict = verdict
        out = verdict.to_message(msg.seq, msg.t)
        out.action = clamp_action(out.action, self.settings.monitor.v_max)

        status = self.state.status
        status.violations_p1 += not verdict.p1_ok
        status.violations_p2 += not verdict.p2_ok
        status.violations_p3 += bool(verdict.faulty_beams)

        self._publish(out)
        self.store.append("verdict", msg.t, msg.seq, out.to_payload())
        status.latency_total += time.perf_counter() - received
        status.latency_count += 1
        logger.debug(f"seq={msg.seq} p1={verdict.p1_ok} p2={verdict.p2_ok} "
                     f"faulty={len(verdict.faulty_beams)} action={out.action}")
        return out

    def _publish(self, out: VerdictMsg) -> None:
        payload = out.to_json()
        for attempt in range(2):
            try:
                self.transport.publish(self.settings.action_topic, payload, self.settings.qos)
                self.state.status.messages_out += 1
                return
            except TransportError as e:
                if attempt == 0:
                    logger.warning(f"Publishing verdict seq={out.seq} failed, retrying: {e}")
                else:
                    self.state.status.publish_failures += 1
                    logger.error(f"Verdict seq={out.seq} not delivered: {e}")


def run_service(settings: Settings, transport: Optional[Transport] = None,
                stop_event: Optional[threading.Event] = None,
                store: Optional[EventStore] = None) -> ServiceStatus:
    """
    Serve until stop_event is set or SIGINT/SIGTERM arrives.

    Raises:
        ValueError: invalid settings, before anything connects
    """
    settings.validate()
    transport = transport or create_transport(settings)
    store = store if store is not None else EventStore(settings.resolved_log_path())
    stop_event = stop_event or threading.Event()

    if threading.current_thread() is threading.main_thread():
        def _shutdown(signum, frame):
            logger.info(f"Received signal {signum}, shutting down")
            stop_event.set()
        signal.signal(signal.SIGINT, _shutdown)
        signal.signal(signal.SIGTERM, _shutdown)

    service = TwinService(settings, transport, store)
    status_server = None
    if settings.status_port:
        status_server = StatusServer(service.status, settings.status_port)
        status_server.start()

    service.start()
    transport.connect()
    logger.info(f"Twin service running (broker {settings.broker_url})")
    try:
        while not stop_event.wait(0.2):
            pass
    finally:
        service.stop()
        try:
            transport.disconnect()
        except Exception:
            logger.exception("Transport disconnect failed")
        store.close()
        if status_server is not None:
            status_server.stop()
        logger.info(f"Twin service stopped after {service.status.messages_in} messages")
    return service.status
