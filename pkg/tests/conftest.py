"""Shared test helpers: seeded generators and a scriptable local endpoint."""

from __future__ import annotations

import json
import random
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from gdtbench.client import EndpointConfig
from gdtbench.model import DrawingAnnotation, FeatureControlFrame
from gdtbench.symbols import GeometricCharacteristic

# Enough to pass the signature check; not a renderable image.
PNG_STUB = b"\x89PNG\r\n\x1a\n" + bytes(range(32))

GLYPHS = tuple(member.glyph for member in GeometricCharacteristic)

# Small pools so random pred/gt pairs collide often enough to be interesting.
TOLERANCE_POOL = (
    "0.01", "0.02", "0.05", "0.1", "0.15", "0.2", "0.25", "0.3",
    "⌀0.1", "⌀0.2Ⓜ", "⌀0.5Ⓛ", "0.4Ⓢ",
)
DATUM_POOL = ("A", "B", "C", "D", "A-B", "BⓂ")


def random_fcf(rng: random.Random) -> FeatureControlFrame:
    return FeatureControlFrame(
        characteristic=GeometricCharacteristic(rng.choice(GLYPHS)),
        tolerance=rng.choice(TOLERANCE_POOL),
        datums=tuple(rng.sample(DATUM_POOL, rng.randint(0, 3))),
    )


def random_annotation(
    rng: random.Random,
    drawing_id: str = "d",
    max_entries: int = 14,
    n_entries: int | None = None,
) -> DrawingAnnotation:
    if n_entries is None:
        n_entries = rng.randint(0, max_entries)
    return DrawingAnnotation(
        drawing_id=drawing_id, fcfs=tuple(random_fcf(rng) for _ in range(n_entries))
    )


def generic_reply(text: str) -> str:
    """Response body for the generic-json style."""
    return json.dumps({"text": text}, ensure_ascii=False)


def make_config(url: str, style: str = "generic-json", **overrides) -> EndpointConfig:
    settings = dict(
        name="stub",
        style=style,
        base_url=url,
        model="stub-model",
        api_key_env="",
        timeout=10.0,
        max_retries=3,
        max_concurrency=4,
        backoff_base=0.01,
    )
    settings.update(overrides)
    return EndpointConfig(**settings)


class StubEndpoint:
    """Local HTTP server with a scriptable responder and request accounting.

    responder(path, body_bytes) -> (status, response_text). in_flight is
    decremented before the reply is sent, so max_in_flight counts requests
    the client truly had outstanding at the same time.
    """

    def __init__(self, responder):
        self.responder = responder
        self.requests = 0
        self.in_flight = 0
        self.max_in_flight = 0
        self.last_headers: dict[str, str] = {}
        self._lock = threading.Lock()
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                with stub._lock:
                    stub.requests += 1
                    stub.in_flight += 1
                    stub.max_in_flight = max(stub.max_in_flight, stub.in_flight)
                    stub.last_headers = {k.lower(): v for k, v in self.headers.items()}
                length = int(self.headers.get("Content-Length") or 0)
                body = self.rfile.read(length)
                try:
                    status, text = stub.responder(self.path, body)
                finally:
                    with stub._lock:
                        stub.in_flight -= 1
                payload = text.encode("utf-8")
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                self.wfile.write(payload)

            def log_message(self, *_args):
                pass

        self._server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()

    @property
    def url(self) -> str:
        host, port = self._server.server_address
        return f"http://{host}:{port}/v1/run"

    def close(self) -> None:
        self._server.shutdown()
        self._server.server_close()


@pytest.fixture
def stub_endpoint():
    stubs: list[StubEndpoint] = []

    def factory(responder) -> StubEndpoint:
        stub = StubEndpoint(responder)
        stubs.append(stub)
        return stub

    yield factory
    for stub in stubs:
        stub.close()
