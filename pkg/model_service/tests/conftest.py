import json
import socket
import subprocess
import sys
import time

import pytest
import requests
from fastapi.testclient import TestClient

from model_service.adapters.tiny import TinyAdapters, write_weights
from model_service.app import create_app


@pytest.fixture(scope="session")
def weights_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("weights") / "tiny.pt"
    write_weights(str(path))
    return str(path)


@pytest.fixture(scope="session")
def adapters(weights_path):
    return TinyAdapters(weights_path)


@pytest.fixture(scope="session")
def client(adapters):
    app = create_app(adapters, workers=2)
    with TestClient(app, raise_server_exceptions=False) as c:
        yield c


def free_port():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def wait_for_health(url, timeout=90):
    deadline = time.time() + timeout
    last = None
    while time.time() < deadline:
        try:
            resp = requests.get(f"{url}/v1/health", timeout=2)
            if resp.status_code == 200:
                return resp
        except requests.ConnectionError as exc:
            last = exc
        time.sleep(0.3)
    raise RuntimeError(f"service at {url} never became healthy: {last}")


class LiveServer:
    def __init__(self, argv, url):
        self.proc = subprocess.Popen(argv, stdout=subprocess.PIPE,
                                     stderr=subprocess.STDOUT)
        self.url = url

    def stop(self):
        self.proc.terminate()
        try:
            self.proc.wait(timeout=15)
        except subprocess.TimeoutExpired:
            self.proc.kill()


@pytest.fixture(scope="session")
def live_service(weights_path):
    """model-service running as a real subprocess over HTTP."""
    port = free_port()
    server = LiveServer(
        [sys.executable, "-m", "model_service", "--port", str(port),
         "--weights", weights_path],
        f"http://127.0.0.1:{port}",
    )
    try:
        wait_for_health(server.url)
        yield server
    finally:
        server.stop()


@pytest.fixture(scope="session")
def live_mock():
    """The pipeline's own mock server, via its public CLI."""
    port = free_port()
    server = LiveServer(
        [sys.executable, "-m", "posesynth.cli", "serve-mock",
         "--port", str(port)],
        f"http://127.0.0.1:{port}",
    )
    try:
        wait_for_health(server.url)
        yield server
    finally:
        server.stop()


def http_transport(base_url):
    def post(path, payload):
        resp = requests.post(base_url + path, json=payload, timeout=120)
        try:
            return resp.status_code, resp.json()
        except ValueError:
            return resp.status_code, {}

    def get(path):
        resp = requests.get(base_url + path, timeout=30)
        try:
            return resp.status_code, resp.json()
        except ValueError:
            return resp.status_code, {}

    return post, get


def client_transport(client):
    def post(path, payload):
        resp = client.post(path, json=payload)
        try:
            return resp.status_code, resp.json()
        except ValueError:
            return resp.status_code, {}

    def get(path):
        resp = client.get(path)
        try:
            return resp.status_code, resp.json()
        except ValueError:
            return resp.status_code, {}

    return post, get
