"""HTTP client for the backend wire protocol, plus backend selection.

Any backend (mock or real) exposes the same five methods:

    txt2img(req) -> ImageBuffer
    encode_latents(img) -> Latents
    depth2img(latents, depth, req) -> (ImageBuffer, trace dict)
    hmr(img) -> [HmrPerson, ...]
    segment(img) -> [SegmentInstance, ...]

The HTTP client retries transient failures (connection errors, timeouts,
5xx) up to ``attempts`` times with exponential backoff; requests are
idempotent by seed so a retry never changes the result. 4xx responses are
treated as caller errors and raised immediately.
"""

import json
import logging
import os
import threading
import time

import requests

from . import wire
from .errors import BackendError, ProtocolError
from .mock_backend import MockBackend

log = logging.getLogger(__name__)

ENV_BACKEND_URL = "HPC_BACKEND_URL"

DEFAULT_ATTEMPTS = 3
DEFAULT_BACKOFF = 1.0
DEFAULT_TIMEOUT = 120.0


class HttpBackend:
    def __init__(self, base_url, attempts=DEFAULT_ATTEMPTS,
                 backoff_base=DEFAULT_BACKOFF, timeout=DEFAULT_TIMEOUT):
        self.base_url = base_url.rstrip("/")
        self.attempts = int(attempts)
        self.backoff_base = float(backoff_base)
        self.timeout = float(timeout)
        self._local = threading.local()

    def _session(self):
        if not hasattr(self._local, "session"):
            self._local.session = requests.Session()
        return self._local.session

    def _post(self, endpoint, payload):
        url = f"{self.base_url}/v1/{endpoint}"
        last_error = None
        for attempt in range(1, self.attempts + 1):
            try:
                resp = self._session().post(url, json=payload, timeout=self.timeout)
            except (requests.ConnectionError, requests.Timeout) as exc:
                last_error = exc
            else:
                if resp.status_code < 500:
                    return self._parse(endpoint, resp)
                last_error = BackendError(
                    f"{url}: server error {resp.status_code}: {resp.text[:200]}"
                )
            if attempt < self.attempts:
                delay = self.backoff_base * 2 ** (attempt - 1)
                log.warning("%s failed (attempt %d/%d): %s; retrying in %.1fs",
                            url, attempt, self.attempts, last_error, delay)
                if delay > 0:
                    time.sleep(delay)
        raise BackendError(
            f"{url}: giving up after {self.attempts} attempts: {last_error}"
        )

    def _parse(self, endpoint, resp):
        try:
            payload = resp.json()
        except (ValueError, json.JSONDecodeError) as exc:
            raise ProtocolError(f"/v1/{endpoint}: response is not JSON") from exc
        if resp.status_code != 200:
            raise BackendError(
                f"/v1/{endpoint}: request rejected ({resp.status_code}): "
                f"{payload.get('error', resp.text[:200])}"
            )
        wire.check_api_version(payload, context=f"/v1/{endpoint}")
        return payload

    def health(self):
        url = f"{self.base_url}/v1/health"
        resp = self._session().get(url, timeout=self.timeout)
        if resp.status_code != 200:
            raise BackendError(f"{url}: status {resp.status_code}")
        payload = resp.json()
        wire.check_api_version(payload, context="/v1/health")
        return payload

    def txt2img(self, req):
        payload = self._post("txt2img", req.require_prompt().to_json())
        try:
            return wire.image_from_json(payload["image"], context="/v1/txt2img")
        except KeyError:
            raise ProtocolError("/v1/txt2img: response has no image") from None

    def encode_latents(self, img):
        payload = self._post("encode", {"image": wire.image_to_json(img)})
        try:
            return wire.latents_from_json(payload["latents"], context="/v1/encode")
        except KeyError:
            raise ProtocolError("/v1/encode: response has no latents") from None

    def depth2img(self, latents, depth, req):
        body = req.require_prompt().to_json()
        body["latents"] = wire.latents_to_json(latents)
        body["depth"] = wire.depth_to_json(depth)
        payload = self._post("depth2img", body)
        try:
            img = wire.image_from_json(payload["image"], context="/v1/depth2img")
        except KeyError:
            raise ProtocolError("/v1/depth2img: response has no image") from None
        return img, payload.get("trace", {})

    def hmr(self, img):
        payload = self._post("hmr", {"image": wire.image_to_json(img)})
        people = payload.get("people")
        if people is None:
            raise ProtocolError("/v1/hmr: response has no people list")
        return [wire.person_from_json(p, context=f"/v1/hmr person {i}")
                for i, p in enumerate(people)]

    def segment(self, img):
        payload = self._post("segment", {"image": wire.image_to_json(img)})
        instances = payload.get("instances")
        if instances is None:
            raise ProtocolError("/v1/segment: response has no instances list")
        return [wire.instance_from_json(m, context=f"/v1/segment instance {i}")
                for i, m in enumerate(instances)]


def get_backend(spec, **mock_kwargs):
    """Resolve a backend from "mock", a URL, or the environment.

    ``spec=None`` falls back to the HPC_BACKEND_URL environment variable.
    """
    if spec is None:
        spec = os.environ.get(ENV_BACKEND_URL)
    if spec is None:
        raise BackendError(
            f"no backend: pass --backend or set {ENV_BACKEND_URL}"
        )
    if spec == "mock":
        return MockBackend(**mock_kwargs)
    if spec.startswith(("http://", "https://")):
        return HttpBackend(spec)
    raise BackendError(f"backend must be 'mock' or an http(s) URL, got {spec!r}")
