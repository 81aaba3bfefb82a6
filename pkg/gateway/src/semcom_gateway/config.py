"""Server configuration: file + environment overrides."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields
from typing import Optional

ENV_PREFIX = "SEMCOM_GATEWAY_"


@dataclass(frozen=True)
class GatewayConfig:
    host: str = "127.0.0.1"
    port: int = 8008
    mode: str = "stub"  # "stub" or "real"
    device: str = "cpu"
    caption_model: str = "Salesforce/blip-image-captioning-base"
    segment_model: str = "deeplabv3_resnet50"
    generate_model: str = "runwayml/stable-diffusion-v1-5"
    similarity_model: str = "bert-base-uncased"
    caption_prefix: str = "a photography of"
    caption_min_words: int = 20
    caption_max_words: int = 30
    default_strength: float = 0.8
    max_image_bytes: int = 16 * 1024 * 1024
    max_candidates: int = 64

    def __post_init__(self) -> None:
        if self.mode not in ("stub", "real"):
            raise ValueError(f"mode must be 'stub' or 'real', got {self.mode!r}")
        if self.caption_min_words > self.caption_max_words:
            raise ValueError(
                f"caption word range invalid: min {self.caption_min_words} "
                f"> max {self.caption_max_words}"
            )
        if self.max_candidates < 1:
            raise ValueError("max_candidates must be at least 1")
        if not 0.0 < self.default_strength <= 1.0:
            raise ValueError("default_strength must lie in (0, 1]")


def load_config(path: Optional[str] = None, env=os.environ) -> GatewayConfig:
    """Read a JSON config file (if given), then apply env overrides.

    Every field can be overridden with SEMCOM_GATEWAY_<FIELD>, e.g.
    SEMCOM_GATEWAY_PORT=9000 or SEMCOM_GATEWAY_MODE=stub.
    """
    values: dict = {}
    if path:
        with open(path, "r", encoding="utf-8") as fh:
            loaded = json.load(fh)
        if not isinstance(loaded, dict):
            raise ValueError(f"config file must hold a JSON object: {path}")
        values.update(loaded)
    for spec in fields(GatewayConfig):
        raw = env.get(ENV_PREFIX + spec.name.upper())
        if raw is None:
            continue
        if spec.type in ("int", int):
            values[spec.name] = int(raw)
        elif spec.type in ("float", float):
            values[spec.name] = float(raw)
        else:
            values[spec.name] = raw
    unknown = set(values) - {spec.name for spec in fields(GatewayConfig)}
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return GatewayConfig(**values)
