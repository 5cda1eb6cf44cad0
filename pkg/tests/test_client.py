import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import pytest
import requests

from posesynth.client import ENV_BACKEND_URL, HttpBackend, get_backend
from posesynth.depthmap import DepthMap
from posesynth.errors import BackendError, ProtocolError
from posesynth.mock_backend import MockBackend
from posesynth.serve import ServerThread
from posesynth.wire import GenerationRequest


@pytest.fixture(scope="module")
def live():
    backend = MockBackend()
    with ServerThread(backend) as srv:
        yield backend, HttpBackend(srv.url, backoff_base=0.0), srv


class TestHttpParity:
    """The HTTP path must reproduce the in-process mock exactly."""

    def test_txt2img(self, live):
        mock, http, _ = live
        req = GenerationRequest("parity", seed=12)
        assert http.txt2img(req).data == mock.txt2img(req).data

    def test_encode(self, live):
        mock, http, _ = live
        img = mock.txt2img(GenerationRequest("parity", seed=12))
        assert np.array_equal(http.encode_latents(img).data,
                              mock.encode_latents(img).data)

    def test_depth2img(self, live):
        mock, http, _ = live
        req = GenerationRequest("parity", seed=12)
        img = mock.txt2img(req)
        lat = mock.encode_latents(img)
        d = DepthMap(np.where(np.eye(64) > 0, 0.5, 0.0))
        got, trace_http = http.depth2img(lat, d, req)
        want, trace_mock = mock.depth2img(lat, d, req)
        assert got.data == want.data
        assert trace_http == trace_mock

    def test_hmr(self, live):
        mock, http, _ = live
        img = mock.txt2img(GenerationRequest("parity", seed=12))
        got = http.hmr(img)
        want = mock.hmr(img)
        assert len(got) == len(want)
        for a, b in zip(got, want):
            assert np.array_equal(a.theta.body_pose, b.theta.body_pose)
            assert np.array_equal(a.theta.global_orient, b.theta.global_orient)
            assert a.camera == b.camera
            assert a.confidence == b.confidence

    def test_segment(self, live):
        mock, http, _ = live
        img = mock.txt2img(GenerationRequest("parity", seed=12))
        got = http.segment(img)
        want = mock.segment(img)
        assert got == want


class TestServerBehavior:
    def test_health(self, live):
        _, http, _ = live
        payload = http.health()
        assert payload["api_version"] == "1.0"
        assert "/v1/txt2img" in payload["endpoints"]

    def test_unknown_endpoint_404(self, live):
        _, _, srv = live
        resp = requests.post(f"{srv.url}/v1/nonsense", json={})
        assert resp.status_code == 404

    def test_identical_requests_identical_bodies(self, live):
        _, _, srv = live
        body = {"prompt": "same bytes", "seed": 4}
        r1 = requests.post(f"{srv.url}/v1/txt2img", json=body)
        r2 = requests.post(f"{srv.url}/v1/txt2img", json=body)
        assert r1.content == r2.content

    def test_validation_error_maps_to_400(self, live):
        _, _, srv = live
        resp = requests.post(f"{srv.url}/v1/txt2img",
                             json={"prompt": "", "seed": 1})
        assert resp.status_code == 400
        assert "error" in resp.json()

    def test_malformed_json_maps_to_400(self, live):
        _, _, srv = live
        resp = requests.post(f"{srv.url}/v1/txt2img", data=b"{nope",
                             headers={"Content-Type": "application/json"})
        assert resp.status_code == 400

    def test_client_raises_backend_error_on_400(self, live):
        _, http, _ = live
        with pytest.raises(BackendError, match="rejected"):
            http._post("txt2img", {"prompt": "x"})  # missing seed


class _ScriptedHandler(BaseHTTPRequestHandler):
    responses = []  # list of (status, payload) consumed in order
    calls = 0

    def log_message(self, *args):
        pass

    def do_POST(self):
        cls = type(self)
        status, payload = cls.responses[min(cls.calls, len(cls.responses) - 1)]
        cls.calls += 1
        body = json.dumps(payload).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)


def scripted_server(responses):
    handler = type("Scripted", (_ScriptedHandler,),
                   {"responses": responses, "calls": 0})
    server = ThreadingHTTPServer(("127.0.0.1", 0), handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    url = f"http://127.0.0.1:{server.server_address[1]}"
    return server, handler, url


class TestRetries:
    def test_retries_on_5xx_then_succeeds(self):
        ok = {"api_version": "1.0", "model_id": "m", "seed": 1, "x": 1}
        server, handler, url = scripted_server(
            [(500, {"error": "boom"}), (503, {"error": "boom"}), (200, ok)])
        try:
            client = HttpBackend(url, attempts=3, backoff_base=0.0)
            payload = client._post("txt2img", {"prompt": "p", "seed": 1})
            assert payload["x"] == 1
            assert handler.calls == 3
        finally:
            server.shutdown()
            server.server_close()

    def test_gives_up_after_attempts(self):
        server, handler, url = scripted_server([(500, {"error": "boom"})])
        try:
            client = HttpBackend(url, attempts=3, backoff_base=0.0)
            with pytest.raises(BackendError, match="giving up"):
                client._post("txt2img", {"prompt": "p", "seed": 1})
            assert handler.calls == 3
        finally:
            server.shutdown()
            server.server_close()

    def test_no_retry_on_4xx(self):
        server, handler, url = scripted_server([(400, {"error": "bad"})])
        try:
            client = HttpBackend(url, attempts=3, backoff_base=0.0)
            with pytest.raises(BackendError, match="rejected"):
                client._post("txt2img", {"prompt": "p", "seed": 1})
            assert handler.calls == 1
        finally:
            server.shutdown()
            server.server_close()

    def test_connection_error_retries_then_fails(self):
        client = HttpBackend("http://127.0.0.1:1", attempts=2,
                             backoff_base=0.0, timeout=0.5)
        with pytest.raises(BackendError, match="giving up"):
            client._post("txt2img", {"prompt": "p", "seed": 1})


class TestVersionEnforcement:
    def test_version_mismatch_rejected(self):
        bad = {"api_version": "2.0", "model_id": "m", "image": {}}
        server, _, url = scripted_server([(200, bad)])
        try:
            client = HttpBackend(url, attempts=1, backoff_base=0.0)
            with pytest.raises(ProtocolError, match="incompatible"):
                client._post("txt2img", {"prompt": "p", "seed": 1})
        finally:
            server.shutdown()
            server.server_close()

    def test_missing_version_rejected(self):
        server, _, url = scripted_server([(200, {"image": {}})])
        try:
            client = HttpBackend(url, attempts=1, backoff_base=0.0)
            with pytest.raises(ProtocolError, match="no api_version"):
                client._post("txt2img", {"prompt": "p", "seed": 1})
        finally:
            server.shutdown()
            server.server_close()


class TestBackendSelection:
    def test_mock(self):
        assert isinstance(get_backend("mock"), MockBackend)

    def test_url(self):
        assert isinstance(get_backend("http://example:1"), HttpBackend)

    def test_env_fallback(self, monkeypatch):
        monkeypatch.setenv(ENV_BACKEND_URL, "http://from-env:2")
        backend = get_backend(None)
        assert isinstance(backend, HttpBackend)
        assert backend.base_url == "http://from-env:2"

    def test_no_backend(self, monkeypatch):
        monkeypatch.delenv(ENV_BACKEND_URL, raising=False)
        with pytest.raises(BackendError, match="no backend"):
            get_backend(None)

    def test_garbage_rejected(self):
        with pytest.raises(BackendError):
            get_backend("ftp://nope")
