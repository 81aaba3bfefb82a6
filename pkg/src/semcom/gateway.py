"""HTTP client for the model-gateway protocol (v1).

All endpoints are POST with JSON bodies; binary payloads (PNG images, RLE
segmentation blocks) travel base64-encoded. Each logical call carries one
client-generated request ID reused across retries so a replayed generation
request can be deduplicated server-side.
"""

from __future__ import annotations

import base64
import binascii
import io
import os
import uuid
from dataclasses import dataclass
from typing import Optional

import requests

from semcom.codec import DecodeError, rle_decode
from semcom.core import RasterImage, SegmentationArray, load_image, save_image
from semcom.pipeline import BackendSet

ENV_GATEWAY_URL = "SEMCOM_GATEWAY_URL"
ENV_GATEWAY_TOKEN = "SEMCOM_GATEWAY_TOKEN"
ENV_GATEWAY_TIMEOUT = "SEMCOM_GATEWAY_TIMEOUT"


class GatewayError(RuntimeError):
    """Base class for gateway client failures."""


class TransportError(GatewayError):
    """No usable response after exhausting retries."""


class ProtocolError(GatewayError):
    """Non-2xx status or a response that violates the protocol schema."""


@dataclass(frozen=True)
class GatewayEndpoint:
    base_url: str
    timeout: float = 30.0
    retries: int = 2
    token: Optional[str] = None

    def __post_init__(self) -> None:
        if self.timeout <= 0:
            raise ValueError(f"timeout must be positive, got {self.timeout}")
        if self.retries < 0:
            raise ValueError(f"retries must be non-negative, got {self.retries}")


def endpoint_from_env(url: Optional[str] = None) -> GatewayEndpoint:
    """Build an endpoint from arguments with environment fallbacks."""
    base_url = url or os.environ.get(ENV_GATEWAY_URL)
    if not base_url:
        raise ValueError(f"no gateway URL given and {ENV_GATEWAY_URL} is not set")
    timeout = float(os.environ.get(ENV_GATEWAY_TIMEOUT, "30"))
    token = os.environ.get(ENV_GATEWAY_TOKEN) or None
    return GatewayEndpoint(base_url=base_url, timeout=timeout, token=token)


def _post(endpoint: GatewayEndpoint, path: str, body: dict) -> dict:
    url = endpoint.base_url.rstrip("/") + path
    headers = {"X-Request-Id": uuid.uuid4().hex}
    if endpoint.token:
        headers["Authorization"] = f"Bearer {endpoint.token}"
    failure: Optional[str] = None
    for _attempt in range(endpoint.retries + 1):
        try:
            response = requests.post(url, json=body, headers=headers, timeout=endpoint.timeout)
        except requests.RequestException as exc:
            failure = str(exc)
            continue
        if response.status_code >= 500:
            failure = f"HTTP {response.status_code}"
            continue
        if not 200 <= response.status_code < 300:
            raise ProtocolError(f"{path}: {_error_detail(response)}")
        try:
            data = response.json()
        except ValueError as exc:
            raise ProtocolError(f"{path}: schema violation: body is not JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ProtocolError(f"{path}: schema violation: body is not a JSON object")
        return data
    raise TransportError(
        f"{path}: no response after {endpoint.retries + 1} attempts (last: {failure})"
    )


def _error_detail(response) -> str:
    try:
        payload = response.json()
        error = payload["error"]
        return f"HTTP {response.status_code}: [{error['code']}] {error['message']}"
    except Exception:
        return f"HTTP {response.status_code}"


def _require(data: dict, name: str, kind, path: str):
    if name not in data:
        raise ProtocolError(f"{path}: schema violation: missing field '{name}'")
    value = data[name]
    if kind is float:
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ProtocolError(f"{path}: schema violation: field '{name}' is not a number")
        return float(value)
    if not isinstance(value, kind) or isinstance(value, bool):
        raise ProtocolError(
            f"{path}: schema violation: field '{name}' has type {type(value).__name__}"
        )
    return value


def _png_b64(image: RasterImage) -> str:
    buffer = io.BytesIO()
    save_image(image, buffer, format="png")
    return base64.b64encode(buffer.getvalue()).decode("ascii")


def _b64_bytes(text: str, path: str, what: str) -> bytes:
    try:
        return base64.b64decode(text, validate=True)
    except binascii.Error as exc:
        raise ProtocolError(f"{path}: schema violation: invalid base64 in {what}") from exc


def remote_caption(endpoint: GatewayEndpoint, image: RasterImage) -> str:
    path = "/v1/caption"
    data = _post(endpoint, path, {"image_png_b64": _png_b64(image)})
    caption = _require(data, "caption", str, path)
    if not caption.strip():
        raise ProtocolError(f"{path}: schema violation: empty caption")
    return caption


def remote_segment(endpoint: GatewayEndpoint, image: RasterImage) -> SegmentationArray:
    path = "/v1/segment"
    data = _post(endpoint, path, {"image_png_b64": _png_b64(image)})
    width = _require(data, "width", int, path)
    height = _require(data, "height", int, path)
    rle = _b64_bytes(_require(data, "rle_b64", str, path), path, "rle_b64")
    if (width, height) != (image.width, image.height):
        raise ProtocolError(
            f"{path}: segmentation dimension mismatch: got {width}x{height} "
            f"for a {image.width}x{image.height} image"
        )
    try:
        labels = rle_decode(rle, width * height)
    except DecodeError as exc:
        raise ProtocolError(f"{path}: schema violation: {exc}") from exc
    return SegmentationArray(labels.reshape(height, width))


def remote_generate(endpoint: GatewayEndpoint, conditioning: RasterImage, caption: str,
                    count: int, negative_prompt: str, seed: int,
                    strength: Optional[float] = None) -> list[RasterImage]:
    if count < 1:
        raise ValueError(f"candidate count must be at least 1, got {count}")
    path = "/v1/generate"
    body = {
        "image_png_b64": _png_b64(conditioning),
        "caption": caption,
        "k": count,
        "negative_prompt": negative_prompt,
        "seed": seed,
    }
    if strength is not None:
        body["strength"] = strength
    data = _post(endpoint, path, body)
    encoded = _require(data, "images_png_b64", list, path)
    if len(encoded) != count:
        raise ProtocolError(
            f"{path}: candidate count mismatch: got {len(encoded)}, expected {count}"
        )
    images = []
    for index, item in enumerate(encoded):
        if not isinstance(item, str):
            raise ProtocolError(f"{path}: schema violation: images_png_b64[{index}] is not a string")
        raw = _b64_bytes(item, path, f"images_png_b64[{index}]")
        try:
            image = load_image(raw, format="png")
        except ValueError as exc:
            raise ProtocolError(f"{path}: candidate {index}: bad PNG: {exc}") from exc
        if (image.width, image.height) != (conditioning.width, conditioning.height):
            raise ProtocolError(
                f"{path}: candidate {index}: dimension mismatch "
                f"{image.width}x{image.height} vs {conditioning.width}x{conditioning.height}"
            )
        images.append(image)
    return images


def remote_similarity(endpoint: GatewayEndpoint, reference: str, candidate: str) -> float:
    path = "/v1/similarity"
    data = _post(endpoint, path, {"reference": reference, "candidate": candidate})
    f1 = _require(data, "f1", float, path)
    return min(1.0, max(0.0, f1))


def gateway_backends(endpoint: GatewayEndpoint) -> BackendSet:
    """Wire the four remote calls into a BackendSet."""
    return BackendSet(
        captioner=lambda image: remote_caption(endpoint, image),
        segmenter=lambda image: remote_segment(endpoint, image),
        generator=lambda conditioning, caption, count, negative_prompt, seed: remote_generate(
            endpoint, conditioning, caption, count, negative_prompt, seed
        ),
        similarity=lambda reference, candidate: remote_similarity(endpoint, reference, candidate),
    )
