from __future__ import annotations

import base64
import io
import json
from importlib import resources

import numpy as np
import pytest
from fastapi.testclient import TestClient
from PIL import Image

from semcom_gateway import GatewayConfig, create_app


@pytest.fixture(scope="session")
def config() -> GatewayConfig:
    # small limits keep the oversized/overbroad error paths cheap to hit
    return GatewayConfig(max_image_bytes=8192, max_candidates=8)


@pytest.fixture(scope="session")
def client(config) -> TestClient:
    return TestClient(create_app(config))


@pytest.fixture(scope="session")
def schemas() -> dict:
    loaded = {}
    for entry in resources.files("semcom_gateway").joinpath("schemas").iterdir():
        if entry.name.endswith(".json"):
            loaded[entry.name.removesuffix(".json")] = json.loads(entry.read_text("utf-8"))
    return loaded


def png_b64_of(array: np.ndarray) -> str:
    buffer = io.BytesIO()
    Image.fromarray(array.astype(np.uint8), mode="RGB").save(buffer, format="PNG")
    return base64.b64encode(buffer.getvalue()).decode("ascii")


@pytest.fixture
def small_image_b64() -> str:
    array = np.zeros((6, 8, 3), dtype=np.uint8)
    array[:, :4] = (200, 30, 30)
    array[:, 4:] = (255, 255, 255)
    return png_b64_of(array)
