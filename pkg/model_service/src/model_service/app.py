"""FastAPI application exposing the five wire-protocol endpoints.

Endpoints are synchronous (FastAPI runs them on a threadpool); a
semaphore caps concurrent model invocations at the configured worker
count, which is what bounds GPU memory. Per-request out-of-memory
failures return 503 with a Retry-After header.
"""

import logging
import threading

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from . import payloads
from .payloads import API_VERSION, PayloadError

log = logging.getLogger(__name__)


def _is_oom(exc):
    return "out of memory" in str(exc).lower()


def create_app(adapters, workers=2):
    app = FastAPI(title="model-service", docs_url=None, redoc_url=None)
    gate = threading.Semaphore(max(1, int(workers)))

    def envelope(extra):
        return {"api_version": API_VERSION, "model_id": adapters.model_id,
                **extra}

    @app.exception_handler(PayloadError)
    async def payload_error(request: Request, exc: PayloadError):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.exception_handler(Exception)
    async def internal_error(request: Request, exc: Exception):
        if _is_oom(exc):
            return JSONResponse(status_code=503,
                                content={"error": f"out of memory: {exc}"},
                                headers={"Retry-After": "5"})
        log.exception("unhandled error on %s", request.url.path)
        return JSONResponse(status_code=500, content={"error": str(exc)})

    async def read_json(request):
        try:
            return await request.json()
        except Exception as exc:
            raise PayloadError(f"request body is not valid JSON: {exc}")

    @app.get("/v1/health")
    def health():
        return envelope({"endpoints": [
            "/v1/txt2img", "/v1/encode", "/v1/depth2img", "/v1/hmr",
            "/v1/segment",
        ]})

    @app.post("/v1/txt2img")
    async def txt2img(request: Request):
        body = await read_json(request)
        prompt, seed, steps, strength, guidance = \
            payloads.parse_generation_fields(body)
        with gate:
            image = adapters.txt2img(prompt, seed, steps, strength, guidance)
        return envelope({"seed": seed, "image": payloads.encode_image(image)})

    @app.post("/v1/encode")
    async def encode(request: Request):
        body = await read_json(request)
        image = payloads.decode_image(body.get("image", {}))
        with gate:
            latents = adapters.encode(image)
        return envelope({"latents": payloads.encode_latents(latents)})

    @app.post("/v1/depth2img")
    async def depth2img(request: Request):
        body = await read_json(request)
        prompt, seed, steps, strength, guidance = \
            payloads.parse_generation_fields(body)
        latents = payloads.decode_latents(body.get("latents", {}))
        depth = payloads.decode_depth(body.get("depth", {}))
        if depth.shape != latents.shape[1:]:
            raise PayloadError(
                f"depth {depth.shape} does not match latent spatial dims "
                f"{latents.shape[1:]}"
            )
        with gate:
            image, trace = adapters.depth2img(latents, depth, prompt, seed,
                                              steps, strength, guidance)
        return envelope({"seed": seed, "image": payloads.encode_image(image),
                         "trace": trace})

    @app.post("/v1/hmr")
    async def hmr(request: Request):
        body = await read_json(request)
        image = payloads.decode_image(body.get("image", {}))
        with gate:
            people = adapters.hmr(image)
        return envelope({"people": people})

    @app.post("/v1/segment")
    async def segment(request: Request):
        body = await read_json(request)
        image = payloads.decode_image(body.get("image", {}))
        with gate:
            instances = adapters.segment(image)
        return envelope({"instances": instances})

    return app
