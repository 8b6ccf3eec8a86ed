"""Real-time HTTP inference service.

Endpoints:
    GET  /health                        -> {loaded, digest, version}
    POST /api/predict?heatmap=...       -> {label, confidence, probabilities,
                                            latency_ms, heatmap?}
    POST /api/preprocess                -> Fig-style panels (original/enhanced/
                                           mask/edges) as base64 PNGs

Uploads are raw image bytes or a multipart form with a single file field.
The model is loaded once and shared immutably; reload swaps the reference
atomically.
"""

from __future__ import annotations

import base64
import hashlib
import time

import numpy as np
from fastapi import FastAPI, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from . import model as model_mod
from .errors import DecodeError
from .gradcam import grad_cam, overlay
from .imaging import decode_image, encode_png, resize_bilinear, to_grayscale
from .preprocess import CannyConfig, ClaheConfig, run_pipeline

API_VERSION = "1"
DEFAULT_UPLOAD_LIMIT = 10 * 1024 * 1024


class ModelStore:
    """Shared, atomically swappable model reference."""

    def __init__(self, params=None, digest=None):
        self.params = params
        self.digest = digest

    @classmethod
    def from_file(cls, path: str) -> "ModelStore":
        with open(path, "rb") as f:
            digest = hashlib.sha256(f.read()).hexdigest()
        return cls(model_mod.load_model(path), digest)

    def load(self, path: str):
        store = ModelStore.from_file(path)
        self.params, self.digest = store.params, store.digest


async def _read_upload(request: Request, limit: int):
    """Raw body or the first file of a multipart form; None if over limit."""
    length = request.headers.get("content-length")
    if length is not None and int(length) > limit:
        return None
    body = await request.body()
    if len(body) > limit:
        return None
    ctype = request.headers.get("content-type", "")
    if ctype.startswith("multipart/form-data"):
        form = await request.form()
        for value in form.values():
            if hasattr(value, "read"):
                data = await value.read()
                return None if len(data) > limit else data
        return b""
    return body


def create_app(store: ModelStore | None = None,
               upload_limit: int = DEFAULT_UPLOAD_LIMIT,
               cors_origin: str | None = "*",
               clahe_cfg: ClaheConfig = ClaheConfig(),
               canny_cfg: CannyConfig = CannyConfig()) -> FastAPI:
    store = store or ModelStore()
    app = FastAPI(title="fracturekit inference service")
    if cors_origin:
        app.add_middleware(CORSMiddleware, allow_origins=[cors_origin],
                           allow_methods=["*"], allow_headers=["*"])
    app.state.store = store

    def error(status: int, reason: str) -> JSONResponse:
        return JSONResponse({"error": reason}, status_code=status)

    @app.get("/health")
    def health():
        return {"loaded": store.params is not None,
                "digest": store.digest, "version": API_VERSION}

    @app.post("/api/predict")
    async def predict(request: Request, heatmap: bool = False):
        if store.params is None:
            return error(503, "model not loaded")
        data = await _read_upload(request, upload_limit)
        if data is None:
            return error(413, f"payload exceeds {upload_limit} bytes")
        if not data:
            return error(400, "empty body")
        t0 = time.monotonic()
        try:
            img = decode_image(data)
            params = store.params
            size = params.spec.input_shape[1]
            pipe = run_pipeline(img, clahe_cfg, canny_cfg, size=size)
            logits, probs, _ = model_mod.forward(params, pipe.model_input)
            label_idx = int(np.argmax(probs))
            payload = {
                "label": model_mod.CLASS_NAMES[label_idx],
                "confidence": float(probs[label_idx]),
                "probabilities": {"fractured": float(probs[0]),
                                  "not_fractured": float(probs[1])},
            }
            if heatmap:
                hm = grad_cam(params, pipe.model_input, label_idx)
                base = resize_bilinear(pipe.enhanced, size, size)
                png = encode_png(overlay(hm, base, alpha=0.5).pixels)
                payload["heatmap"] = base64.b64encode(png).decode("ascii")
        except DecodeError as exc:
            return error(400, str(exc))
        payload["latency_ms"] = (time.monotonic() - t0) * 1000.0
        return JSONResponse(payload)

    @app.post("/api/preprocess")
    async def preprocess(request: Request):
        data = await _read_upload(request, upload_limit)
        if data is None:
            return error(413, f"payload exceeds {upload_limit} bytes")
        if not data:
            return error(400, "empty body")
        try:
            img = decode_image(data)
            pipe = run_pipeline(img, clahe_cfg, canny_cfg)
        except DecodeError as exc:
            return error(400, str(exc))
        gray = to_grayscale(img)

        def b64(grid):
            return base64.b64encode(encode_png(grid.pixels)).decode("ascii")

        return JSONResponse({
            "original": b64(gray),
            "enhanced": b64(pipe.enhanced),
            "mask": b64(pipe.mask),
            "edges": b64(pipe.edges),
            "degenerate_mask": pipe.degenerate_mask,
        })

    return app


def serve(model_path: str | None, host: str = "127.0.0.1", port: int = 8000,
          upload_limit: int = DEFAULT_UPLOAD_LIMIT, cors_origin: str | None = "*"):
    import uvicorn
    store = ModelStore.from_file(model_path) if model_path else ModelStore()
    app = create_app(store, upload_limit=upload_limit, cors_origin=cors_origin)
    uvicorn.run(app, host=host, port=port)
