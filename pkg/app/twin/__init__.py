"""Digital twin service, its transports and its append-only log."""

from .link import TwinLink
from .service import DTState, ServiceStatus, TwinService, clamp_action, decode_state, run_service
from .status import StatusServer
from .store import EventStore, filter_records, read_log, write_records
from .transport import (
    Backoff,
    InMemoryBus,
    MqttTransport,
    NotConnectedError,
    Transport,
    TransportError,
    create_transport,
)

__all__ = [
    "TwinLink",
    "DTState",
    "ServiceStatus",
    "TwinService",
    "clamp_action",
    "decode_state",
    "run_service",
    "StatusServer",
    "EventStore",
    "filter_records",
    "read_log",
    "write_records",
    "Backoff",
    "InMemoryBus",
    "MqttTransport",
    "NotConnectedError",
    "Transport",
    "TransportError",
    "create_transport",
]
