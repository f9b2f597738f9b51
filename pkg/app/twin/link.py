"""
Robot side of the twin connection: publish state, wait for the matching verdict.
"""

from __future__ import annotations

import logging
import threading
from typing import Optional

from app.core.models import DecodeError, RobotStateMsg, TopicConfig, VerdictMsg

from .transport import Transport

logger = logging.getLogger(__name__)


class TwinLink:
    """
    Matches verdicts to states by seq.

    Over a synchronous transport the verdict has already arrived when
    publish returns, so waiting never blocks.
    """

    def __init__(self, transport: Transport, topics: TopicConfig, timeout: float = 1.0):
        self.transport = transport
        self.topics = topics
        self.timeout = timeout
        self._verdicts: dict[int, VerdictMsg] = {}
        self._cond = threading.Condition()
        transport.subscribe(topics.action_topic, self._on_verdict, topics.qos)

    def _on_verdict(self, payload: bytes) -> None:
        try:
            verdict = VerdictMsg.from_json(payload)
        except DecodeError as e:
            logger.warning(f"Ignoring malformed verdict: {e}")
            return
        with self._cond:
            self._verdicts.setdefault(verdict.seq, verdict)
            self._cond.notify_all()

    def request(self, state: RobotStateMsg) -> Optional[VerdictMsg]:
        """
        Publish a state and wait for its verdict; None on timeout.

        Raises:
            TransportError: the state could not be published
        """
        self.transport.publish(self.topics.state_topic, state.to_json(), self.topics.qos)
        return self.await_verdict(state.seq)

    def await_verdict(self, seq: int) -> Optional[VerdictMsg]:
        timeout = 0.0 if self.transport.synchronous else self.timeout
        with self._cond:
            self._cond.wait_for(lambda: seq in self._verdicts, timeout)
            verdict = self._verdicts.pop(seq, None)
            for stale in [s for s in self._verdicts if s < seq]:
                del self._verdicts[stale]
        if verdict is None:
            logger.warning(f"No verdict for seq={seq} within {timeout}s")
        return verdict
