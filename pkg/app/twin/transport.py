"""
Pub/sub transports between robot and twin.

Two implementations share one contract: an in-process bus used for tests and
experiments, and an MQTT 3.1.1 client for an external broker.
"""

from __future__ import annotations

import logging
import threading
import uuid
from abc import ABC, abstractmethod
from collections import deque
from collections.abc import Callable
from dataclasses import dataclass
from urllib.parse import urlsplit

import paho.mqtt.client as mqtt

from app.core.settings import Settings

logger = logging.getLogger(__name__)

Handler = Callable[[bytes], None]
ConnectionListener = Callable[[bool], None]

DEFAULT_MQTT_PORT = 1883
KEEPALIVE = 30


class TransportError(Exception):
    """Publish or subscribe failed."""


class NotConnectedError(TransportError):
    """Operation on a transport that is not connected."""


@dataclass(frozen=True)
class Backoff:
    """Exponential reconnect delays: base * 2**attempt, capped."""
    base: float = 0.5
    cap: float = 8.0

    def delay(self, attempt: int) -> float:
        return min(self.cap, self.base * (2 ** max(0, attempt)))


def _as_bytes(payload: bytes | str) -> bytes:
    return payload.encode("utf-8") if isinstance(payload, str) else payload


class Transport(ABC):
    """Topic-based publish/subscribe."""

    def __init__(self) -> None:
        self._handlers: dict[str, list[Handler]] = {}
        self._listeners: list[ConnectionListener] = []
        self._lock = threading.RLock()

    @property
    def synchronous(self) -> bool:
        """True when publish returns only after every handler has run."""
        return False

    @property
    @abstractmethod
    def connected(self) -> bool:
        ...

    @abstractmethod
    def connect(self) -> None:
        ...

    @abstractmethod
    def disconnect(self) -> None:
        ...

    @abstractmethod
    def publish(self, topic: str, payload: bytes | str, qos: int = 1) -> None:
        ...

    def subscribe(self, topic: str, handler: Handler, qos: int = 1) -> None:
        with self._lock:
            self._handlers.setdefault(topic, []).append(handler)

    def on_connection_change(self, listener: ConnectionListener) -> None:
        self._listeners.append(listener)

    def _notify(self, connected: bool) -> None:
        for listener in list(self._listeners):
            try:
                listener(connected)
            except Exception:
                logger.exception("Connection listener failed")

    def _deliver(self, topic: str, payload: bytes) -> None:
        with self._lock:
            handlers = list(self._handlers.get(topic, ()))
        for handler in handlers:
            try:
                handler(payload)
            except Exception:
                logger.exception(f"Handler for topic {topic!r} failed")


class InMemoryBus(Transport):
    """
    Ordered, lossless in-process bus.

    Publishing runs the subscribed handlers before returning. A publish made
    from inside a handler is queued and delivered after the current one, so
    messages on every topic stay FIFO.
    """

    def __init__(self) -> None:
        super().__init__()
        self._queue: deque[tuple[str, bytes]] = deque()
        self._dispatching = False
        self._connected = False
        self.published = 0

    @property
    def synchronous(self) -> bool:
        return True

    @property
    def connected(self) -> bool:
        return self._connected

    def connect(self) -> None:
        self._connected = True
        self._notify(True)

    def disconnect(self) -> None:
        self._connected = False
        self._notify(False)

    def publish(self, topic: str, payload: bytes | str, qos: int = 1) -> None:
        if not self._connected:
            raise NotConnectedError(f"cannot publish on {topic!r}: bus not connected")
        with self._lock:
            self._queue.append((topic, _as_bytes(payload)))
            self.published += 1
            if self._dispatching:
                return
            self._dispatching = True
        try:
            while True:
                with self._lock:
                    # clear the flag under the same lock that saw the empty queue
                    if not self._queue:
                        self._dispatching = False
                        return
                    topic, data = self._queue.popleft()
                self._deliver(topic, data)
        except BaseException:
            with self._lock:
                self._dispatching = False
            raise


def _create_client(client_id: str) -> mqtt.Client:
    try:
        return mqtt.Client(mqtt.CallbackAPIVersion.VERSION2, client_id=client_id,
                           protocol=mqtt.MQTTv311)
    except Exception:
        # paho-mqtt < 2.0
        return mqtt.Client(client_id=client_id, protocol=mqtt.MQTTv311)


def _extract_rc(args: tuple) -> int:
    """Return code from v1 (int) or v2 (ReasonCode) callback arguments."""
    for a in args:
        if isinstance(a, bool):
            continue
        if isinstance(a, int):
            return a
        value = getattr(a, "value", None)
        if isinstance(value, int) and type(a).__name__ == "ReasonCode":
            return value
    return 0


class MqttTransport(Transport):
    """
    MQTT 3.1.1 client on paho's network thread.

    Subscriptions are re-issued on every (re)connect and connect() or
    subscribe() return only once the broker has acknowledged them, so nothing
    published afterwards can miss a subscriber. paho retries lost connections
    with the configured backoff.
    """

    def __init__(self, host: str, port: int = DEFAULT_MQTT_PORT, client_id: str = "",
                 backoff: Backoff = Backoff(), connect_timeout: float = 5.0):
        super().__init__()
        self.host = host
        self.port = port
        self.backoff = backoff
        self.connect_timeout = connect_timeout
        self._qos: dict[str, int] = {}
        self.attempt = 0
        self._connected_event = threading.Event()
        self._suback = threading.Condition()
        self._pending: set[int] = set()
        self._early_acks: set[int] = set()
        self._client = _create_client(client_id or f"twinmon-{uuid.uuid4().hex[:8]}")
        self._client.on_connect = self._on_connect
        self._client.on_disconnect = self._on_disconnect
        self._client.on_message = self._on_message
        self._client.on_subscribe = self._on_subscribe
        self._client.reconnect_delay_set(min_delay=backoff.base, max_delay=backoff.cap)

    @property
    def connected(self) -> bool:
        return self._connected_event.is_set()

    def connect(self) -> None:
        """Start the network loop; returns once connected or after the timeout."""
        logger.info(f"Connecting to MQTT broker {self.host}:{self.port}")
        self._client.connect_async(self.host, self.port, KEEPALIVE)
        self._client.loop_start()
        if not self._connected_event.wait(self.connect_timeout):
            logger.warning(f"Broker {self.host}:{self.port} unreachable, retrying in background "
                           f"(backoff {self.backoff.base}s..{self.backoff.cap}s)")
            return
        self._await_subacks()

    def disconnect(self) -> None:
        try:
            self._client.disconnect()
        finally:
            self._client.loop_stop()
            self._connected_event.clear()

    def subscribe(self, topic: str, handler: Handler, qos: int = 1) -> None:
        super().subscribe(topic, handler, qos)
        self._qos[topic] = qos
        if self.connected:
            self._request_subscription(self._client, topic, qos)
            self._await_subacks()

    def _request_subscription(self, client, topic: str, qos: int) -> None:
        rc, mid = client.subscribe(topic, qos=qos)
        if rc != mqtt.MQTT_ERR_SUCCESS:
            return
        with self._suback:
            # the SUBACK may already have arrived on the network thread
            if mid in self._early_acks:
                self._early_acks.discard(mid)
            else:
                self._pending.add(mid)

    def _await_subacks(self) -> None:
        with self._suback:
            if not self._suback.wait_for(lambda: not self._pending, self.connect_timeout):
                logger.warning(f"{len(self._pending)} subscription(s) not acknowledged yet")

    def _on_subscribe(self, client, userdata, mid, *args) -> None:
        with self._suback:
            if mid in self._pending:
                self._pending.discard(mid)
            else:
                self._early_acks.add(mid)
            self._suback.notify_all()

    def publish(self, topic: str, payload: bytes | str, qos: int = 1) -> None:
        if not self.connected:
            raise NotConnectedError(f"cannot publish on {topic!r}: not connected to broker")
        info = self._client.publish(topic, _as_bytes(payload), qos=qos)
        if info.rc != mqtt.MQTT_ERR_SUCCESS:
            raise TransportError(f"publish on {topic!r} failed: {mqtt.error_string(info.rc)}")

    def _next_delay(self) -> float:
        delay = self.backoff.delay(self.attempt)
        self.attempt += 1
        return delay

    def _on_connect(self, client, userdata, *args) -> None:
        rc = _extract_rc(args)
        if rc != 0:
            logger.error(f"MQTT connect failed rc={rc}, retrying in {self._next_delay():.1f}s")
            return
        logger.info("MQTT connected")
        self.attempt = 0
        for topic, qos in self._qos.items():
            self._request_subscription(client, topic, qos)
        self._connected_event.set()
        self._notify(True)

    def _on_disconnect(self, client, userdata, *args) -> None:
        rc = _extract_rc(args)
        self._connected_event.clear()
        with self._suback:
            # a new session re-requests every subscription
            self._pending.clear()
            self._early_acks.clear()
        if rc == 0:
            logger.info("MQTT disconnected")
        else:
            logger.warning(f"MQTT connection lost (rc={rc}), retrying in {self._next_delay():.1f}s")
        self._notify(False)

    def _on_message(self, client, userdata, msg) -> None:
        self._deliver(msg.topic, msg.payload or b"")


def create_transport(settings: Settings) -> Transport:
    """Transport selected by the broker URL scheme."""
    parts = urlsplit(settings.broker_url)
    if parts.scheme == "memory":
        return InMemoryBus()
    if parts.scheme in ("mqtt", "tcp") and parts.hostname:
        return MqttTransport(
            parts.hostname,
            parts.port or DEFAULT_MQTT_PORT,
            backoff=Backoff(settings.backoff_base, settings.backoff_cap),
        )
    raise ValueError(f"unsupported broker_url {settings.broker_url!r}")
