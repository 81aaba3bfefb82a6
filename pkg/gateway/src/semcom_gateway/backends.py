"""Model backends behind the four endpoints.

Stub mode serves deterministic canned responses so protocol clients can be
tested with no model downloads. Real mode wraps actual models (lazy
imports; weights download on first use) and is selected per-config.
"""

from __future__ import annotations

import io
from collections import Counter
from typing import Protocol

import numpy as np
from PIL import Image

from semcom_gateway.config import GatewayConfig


class ModelError(RuntimeError):
    """The underlying model failed or is unavailable."""


class Backends(Protocol):
    def caption(self, image: np.ndarray) -> str: ...

    def segment(self, image: np.ndarray) -> np.ndarray: ...

    def generate(self, conditioning: np.ndarray, caption: str, count: int,
                 negative_prompt: str, seed: int, strength: float) -> list[bytes]: ...

    def similarity(self, reference: str, candidate: str) -> tuple[float, float, float]: ...


# 21-class colormap: white background plus the Pascal VOC object colors.
# Stub segmentation quantizes to the nearest of these, labels 0..20.
CLASS_TABLE = np.asarray(
    [
        (255, 255, 255),
        (128, 0, 0), (0, 128, 0), (128, 128, 0), (0, 0, 128), (128, 0, 128),
        (0, 128, 128), (128, 128, 128), (64, 0, 0), (192, 0, 0), (64, 128, 0),
        (192, 128, 0), (64, 0, 128), (192, 0, 128), (64, 128, 128), (192, 128, 128),
        (0, 64, 0), (128, 64, 0), (0, 192, 0), (128, 192, 0), (0, 64, 128),
    ],
    dtype=np.int64,
)

_FILLER_WORDS = ("captured", "in", "even", "light", "with", "clean", "smooth",
                 "tones", "and", "sharp", "natural", "detail")


def png_bytes(array: np.ndarray) -> bytes:
    buffer = io.BytesIO()
    Image.fromarray(array.astype(np.uint8), mode="RGB").save(buffer, format="PNG")
    return buffer.getvalue()


class StubBackends:
    """Deterministic doubles: quantizing segmenter, templated captioner,
    conditioning-echo generator, and token-F1 similarity."""

    def __init__(self, config: GatewayConfig) -> None:
        self.config = config

    def caption(self, image: np.ndarray) -> str:
        mean = image.reshape(-1, 3).mean(axis=0)
        if mean.min() > 200:
            tone = "bright"
        elif mean.max() < 55:
            tone = "dark"
        else:
            tone = ("red", "green", "blue")[int(np.argmax(mean))]
        words = (
            f"{self.config.caption_prefix} a {tone} scene with a single "
            f"clear subject framed against a plain background"
        ).split()
        index = 0
        while len(words) < self.config.caption_min_words:
            words.append(_FILLER_WORDS[index % len(_FILLER_WORDS)])
            index += 1
        return " ".join(words[: self.config.caption_max_words])

    def segment(self, image: np.ndarray) -> np.ndarray:
        values = image.astype(np.int64)
        best = np.full(values.shape[:2], np.iinfo(np.int64).max, dtype=np.int64)
        labels = np.zeros(values.shape[:2], dtype=np.uint8)
        for label, color in enumerate(CLASS_TABLE):
            distance = ((values - color) ** 2).sum(axis=2)
            closer = distance < best
            labels[closer] = label
            np.minimum(best, distance, out=best)
        return labels

    def generate(self, conditioning: np.ndarray, caption: str, count: int,
                 negative_prompt: str, seed: int, strength: float) -> list[bytes]:
        # canned: the conditioning image echoed count times; trivially
        # deterministic for a fixed seed
        encoded = png_bytes(conditioning)
        return [encoded] * count

    def similarity(self, reference: str, candidate: str) -> tuple[float, float, float]:
        reference_tokens = reference.lower().split()
        candidate_tokens = candidate.lower().split()
        if not reference_tokens or not candidate_tokens:
            return 0.0, 0.0, 0.0
        overlap = sum((Counter(reference_tokens) & Counter(candidate_tokens)).values())
        if overlap == 0:
            return 0.0, 0.0, 0.0
        precision = overlap / len(candidate_tokens)
        recall = overlap / len(reference_tokens)
        return precision, recall, 2 * precision * recall / (precision + recall)


class RealBackends:
    """Adapters over actual models; every import is lazy and every model is
    cached after first load. Weights download on first use, so this mode
    needs network access and the `real` extra installed.
    """

    def __init__(self, config: GatewayConfig) -> None:
        self.config = config
        self._cache: dict = {}

    def caption(self, image: np.ndarray) -> str:
        pipeline = self._captioner()
        result = pipeline(
            Image.fromarray(image.astype(np.uint8), mode="RGB"),
            prompt=self.config.caption_prefix,
            generate_kwargs={
                "min_new_tokens": self.config.caption_min_words,
                "max_new_tokens": self.config.caption_max_words + 10,
            },
        )
        text = result[0]["generated_text"].strip()
        if not text:
            raise ModelError("caption model returned empty text")
        return text

    def segment(self, image: np.ndarray) -> np.ndarray:
        model, preprocess, torch = self._segmenter()
        tensor = preprocess(Image.fromarray(image.astype(np.uint8), mode="RGB"))
        with torch.no_grad():
            output = model(tensor.unsqueeze(0).to(self.config.device))["out"]
        return output.argmax(1).squeeze(0).cpu().numpy().astype(np.uint8)

    def generate(self, conditioning: np.ndarray, caption: str, count: int,
                 negative_prompt: str, seed: int, strength: float) -> list[bytes]:
        pipeline, torch = self._generator()
        generator = torch.Generator(device=self.config.device).manual_seed(seed)
        source = Image.fromarray(conditioning.astype(np.uint8), mode="RGB")
        images = []
        for _ in range(count):
            result = pipeline(
                prompt=caption,
                image=source,
                strength=strength,
                negative_prompt=negative_prompt,
                generator=generator,
            )
            images.append(result.images[0].resize(source.size))
        return [png_bytes(np.asarray(img.convert("RGB"))) for img in images]

    def similarity(self, reference: str, candidate: str) -> tuple[float, float, float]:
        score = self._bert_score()
        precision, recall, f1 = score(
            [candidate], [reference], model_type=self.config.similarity_model, lang="en"
        )
        return float(precision[0]), float(recall[0]), float(f1[0])

    def _captioner(self):
        if "caption" not in self._cache:
            try:
                from transformers import pipeline
            except ImportError as exc:
                raise ModelError(f"transformers not installed: {exc}") from exc
            self._cache["caption"] = pipeline(
                "image-to-text", model=self.config.caption_model, device=self.config.device
            )
        return self._cache["caption"]

    def _segmenter(self):
        if "segment" not in self._cache:
            try:
                import torch
                from torchvision.models import segmentation as seg_models
            except ImportError as exc:
                raise ModelError(f"torchvision not installed: {exc}") from exc
            factory = getattr(seg_models, self.config.segment_model, None)
            if factory is None:
                raise ModelError(f"unknown segmentation model {self.config.segment_model!r}")
            model = factory(weights="DEFAULT").eval().to(self.config.device)
            weights = seg_models.DeepLabV3_ResNet50_Weights.DEFAULT
            self._cache["segment"] = (model, weights.transforms(), torch)
        return self._cache["segment"]

    def _generator(self):
        if "generate" not in self._cache:
            try:
                import torch
                from diffusers import StableDiffusionImg2ImgPipeline
            except ImportError as exc:
                raise ModelError(f"diffusers not installed: {exc}") from exc
            pipeline = StableDiffusionImg2ImgPipeline.from_pretrained(self.config.generate_model)
            self._cache["generate"] = (pipeline.to(self.config.device), torch)
        return self._cache["generate"]

    def _bert_score(self):
        if "similarity" not in self._cache:
            try:
                from bert_score import score
            except ImportError as exc:
                raise ModelError(f"bert-score not installed: {exc}") from exc
            self._cache["similarity"] = score
        return self._cache["similarity"]


def make_backends(config: GatewayConfig) -> Backends:
    if config.mode == "stub":
        return StubBackends(config)
    return RealBackends(config)
