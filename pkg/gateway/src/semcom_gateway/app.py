"""Protocol v1 endpoints: /v1/caption, /v1/segment, /v1/generate, /v1/similarity.

All endpoints POST JSON and answer JSON; failures use the shared error
shape {"error": {"code", "message"}} with a matching HTTP status.
"""

from __future__ import annotations

import base64
import binascii
import io
import threading
from typing import Optional

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from PIL import Image
from pydantic import BaseModel
from starlette.exceptions import HTTPException as StarletteHTTPException

from semcom_gateway.backends import ModelError, make_backends
from semcom_gateway.config import GatewayConfig
from semcom_gateway.rle import encode_labels


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str) -> None:
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


def _error_response(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(
        status_code=status, content={"error": {"code": code, "message": message}}
    )


class CaptionRequest(BaseModel):
    image_png_b64: str


class SegmentRequest(BaseModel):
    image_png_b64: str


class GenerateRequest(BaseModel):
    image_png_b64: str
    caption: str
    k: int
    negative_prompt: str = ""
    seed: int = 0
    strength: Optional[float] = None


class SimilarityRequest(BaseModel):
    reference: str
    candidate: str


def create_app(config: GatewayConfig | None = None) -> FastAPI:
    config = config or GatewayConfig()
    backends = make_backends(config)
    app = FastAPI(title="semcom model gateway", version="1.0")
    # generation is memory-heavy: serialize per device
    generate_locks: dict[str, threading.Lock] = {config.device: threading.Lock()}

    def decode_image(b64: str) -> np.ndarray:
        try:
            raw = base64.b64decode(b64, validate=True)
        except binascii.Error:
            raise ApiError(400, "invalid_base64", "image_png_b64 is not valid base64")
        if len(raw) > config.max_image_bytes:
            raise ApiError(413, "image_too_large",
                           f"image exceeds {config.max_image_bytes} bytes")
        try:
            pil = Image.open(io.BytesIO(raw))
            pil.load()
        except Exception as exc:
            raise ApiError(400, "invalid_image", f"cannot decode PNG: {exc}")
        return np.asarray(pil.convert("RGB"), dtype=np.uint8)

    @app.exception_handler(ApiError)
    async def handle_api_error(request: Request, exc: ApiError):
        return _error_response(exc.status, exc.code, exc.message)

    @app.exception_handler(RequestValidationError)
    async def handle_validation_error(request: Request, exc: RequestValidationError):
        return _error_response(400, "bad_request", str(exc.errors()[:1]))

    @app.exception_handler(StarletteHTTPException)
    async def handle_http_exception(request: Request, exc: StarletteHTTPException):
        return _error_response(exc.status_code, "http_error", str(exc.detail))

    @app.exception_handler(ModelError)
    async def handle_model_error(request: Request, exc: ModelError):
        return _error_response(500, "model_failure", str(exc))

    @app.exception_handler(Exception)
    async def handle_unexpected(request: Request, exc: Exception):
        return _error_response(500, "internal", str(exc))

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "mode": config.mode}

    @app.post("/v1/caption")
    def caption(request: CaptionRequest):
        image = decode_image(request.image_png_b64)
        text = backends.caption(image)
        if not text.strip():
            raise ModelError("caption backend returned empty text")
        return {"caption": text}

    @app.post("/v1/segment")
    def segment(request: SegmentRequest):
        image = decode_image(request.image_png_b64)
        labels = backends.segment(image)
        height, width = labels.shape
        if (height, width) != image.shape[:2]:
            raise ModelError(
                f"segmentation backend returned {width}x{height} "
                f"for a {image.shape[1]}x{image.shape[0]} image"
            )
        if int(labels.max(initial=0)) > 20:
            raise ModelError("segmentation backend produced labels above 20")
        return {
            "width": width,
            "height": height,
            "rle_b64": base64.b64encode(encode_labels(labels)).decode("ascii"),
        }

    @app.post("/v1/generate")
    def generate(request: GenerateRequest):
        if request.k < 1:
            raise ApiError(400, "bad_k", f"k must be at least 1, got {request.k}")
        if request.k > config.max_candidates:
            raise ApiError(400, "bad_k",
                           f"k exceeds the configured maximum {config.max_candidates}")
        if request.strength is not None and not 0.0 < request.strength <= 1.0:
            raise ApiError(400, "bad_strength", "strength must lie in (0, 1]")
        conditioning = decode_image(request.image_png_b64)
        strength = request.strength if request.strength is not None else config.default_strength
        with generate_locks[config.device]:
            images = backends.generate(
                conditioning, request.caption, request.k,
                request.negative_prompt, request.seed, strength,
            )
        if len(images) != request.k:
            raise ModelError(f"backend produced {len(images)} images for k={request.k}")
        return {"images_png_b64": [base64.b64encode(data).decode("ascii") for data in images]}

    @app.post("/v1/similarity")
    def similarity(request: SimilarityRequest):
        if not request.reference.strip():
            raise ApiError(400, "empty_text", "reference must be non-empty")
        if not request.candidate.strip():
            raise ApiError(400, "empty_text", "candidate must be non-empty")
        precision, recall, f1 = backends.similarity(request.reference, request.candidate)
        return {"precision": precision, "recall": recall, "f1": f1}

    return app
