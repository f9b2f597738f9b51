"""
Local plain-text status endpoint: GET /status.
"""

from __future__ import annotations

import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Optional, Protocol

logger = logging.getLogger(__name__)


class Renderable(Protocol):
    def render(self) -> str:
        ...


def _handler_for(source: Renderable) -> type[BaseHTTPRequestHandler]:
    class StatusHandler(BaseHTTPRequestHandler):
        def do_GET(self) -> None:
            if self.path.rstrip("/") != "/status":
                self.send_error(404)
                return
            body = source.render().encode("utf-8")
            self.send_response(200)
            self.send_header("Content-Type", "text/plain; charset=utf-8")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def log_message(self, format: str, *args) -> None:
            logger.debug(f"status {self.address_string()} {format % args}")

    return StatusHandler


class StatusServer:
    """Serves counters on 127.0.0.1; port 0 picks a free port."""

    def __init__(self, source: Renderable, port: int = 0, host: str = "127.0.0.1"):
        self._server = ThreadingHTTPServer((host, port), _handler_for(source))
        self._thread: Optional[threading.Thread] = None

    @property
    def port(self) -> int:
        return int(self._server.server_address[1])

    def start(self) -> None:
        self._thread = threading.Thread(target=self._server.serve_forever,
                                        name="twin-status", daemon=True)
        self._thread.start()
        logger.info(f"Status endpoint on http://127.0.0.1:{self.port}/status")

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join()
            self._thread = None
