"""HTTP server exposing a MockBackend over the wire protocol.

Lets the pipeline exercise the real HTTP client against a process (or
thread) boundary instead of only the in-process mock.
"""

import json
import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from . import wire
from .errors import PoseSynthError, ProtocolError, ValidationError

log = logging.getLogger(__name__)


def _json_bytes(payload):
    return json.dumps(payload, sort_keys=True).encode("utf-8")


class MockRequestHandler(BaseHTTPRequestHandler):
    backend = None  # set by make_server
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):
        log.debug("mock-server: " + fmt, *args)

    def _reply(self, status, payload):
        body = _json_bytes(payload)
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _envelope(self, extra):
        return {"api_version": wire.API_VERSION,
                "model_id": self.backend.model_id, **extra}

    def do_GET(self):
        if self.path == "/v1/health":
            self._reply(200, self._envelope(
                {"endpoints": [f"/v1/{e}" for e in wire.ENDPOINTS]}
            ))
        else:
            self._reply(404, {"error": f"unknown endpoint {self.path}"})

    def do_POST(self):
        try:
            length = int(self.headers.get("Content-Length", 0))
            payload = json.loads(self.rfile.read(length))
        except (ValueError, json.JSONDecodeError):
            self._reply(400, {"error": "request body is not valid JSON"})
            return
        try:
            handler = {
                "/v1/txt2img": self._txt2img,
                "/v1/encode": self._encode,
                "/v1/depth2img": self._depth2img,
                "/v1/hmr": self._hmr,
                "/v1/segment": self._segment,
            }.get(self.path)
            if handler is None:
                self._reply(404, {"error": f"unknown endpoint {self.path}"})
                return
            self._reply(200, self._envelope(handler(payload)))
        except (ValidationError, ProtocolError) as exc:
            self._reply(400, {"error": str(exc)})
        except PoseSynthError as exc:
            self._reply(500, {"error": str(exc)})
        except Exception as exc:  # pragma: no cover - defensive
            log.exception("mock server failure")
            self._reply(500, {"error": f"internal error: {exc}"})

    def _txt2img(self, payload):
        req = wire.GenerationRequest.from_json(payload).require_prompt()
        img = self.backend.txt2img(req)
        return {"seed": int(req.seed), "image": wire.image_to_json(img)}

    def _encode(self, payload):
        img = wire.image_from_json(payload.get("image", {}))
        lat = self.backend.encode_latents(img)
        return {"latents": wire.latents_to_json(lat)}

    def _depth2img(self, payload):
        req = wire.GenerationRequest.from_json(payload)
        lat = wire.latents_from_json(payload.get("latents", {}))
        depth = wire.depth_from_json(payload.get("depth", {}))
        img, trace = self.backend.depth2img(lat, depth, req)
        return {"seed": int(req.seed), "image": wire.image_to_json(img),
                "trace": trace}

    def _hmr(self, payload):
        img = wire.image_from_json(payload.get("image", {}))
        return {"people": self.backend.hmr_wire(img)}

    def _segment(self, payload):
        img = wire.image_from_json(payload.get("image", {}))
        return {"instances": self.backend.segment_wire(img)}


def make_server(backend, host="127.0.0.1", port=0):
    """Build (but do not start) a threading HTTP server for ``backend``."""
    handler = type("BoundHandler", (MockRequestHandler,), {"backend": backend})
    return ThreadingHTTPServer((host, port), handler)


class ServerThread:
    """Context manager running a mock server on a daemon thread."""

    def __init__(self, backend, host="127.0.0.1", port=0):
        self.server = make_server(backend, host, port)
        self.thread = threading.Thread(
            target=self.server.serve_forever, daemon=True
        )

    @property
    def url(self):
        host, port = self.server.server_address[:2]
        return f"http://{host}:{port}"

    def __enter__(self):
        self.thread.start()
        return self

    def __exit__(self, *exc_info):
        self.server.shutdown()
        self.server.server_close()
        self.thread.join(timeout=5)
        return False
