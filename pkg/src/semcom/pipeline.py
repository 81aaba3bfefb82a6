"""Transmitter/receiver orchestration over pluggable model backends.

The transmitter turns an image into a semantic payload (caption +
segmentation + palette); the receiver renders the conditioning image,
asks a generator for K candidates, scores each candidate against the
received features, and returns the argmax together with the full scored
list for audit.

Deterministic mock backends are provided so the whole loop runs hermetic:
the mock segmenter quantizes pixels to a fixed 21-color class table, the
mock captioner names the classes it sees, and the mock generator emits the
conditioning image plus seeded, progressively larger perturbations of it.
"""

from __future__ import annotations

import os
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from semcom.core import (
    BACKGROUND_LABEL,
    WHITE,
    RasterImage,
    SegmentationArray,
    SemanticPayload,
    validate_payload,
)
from semcom.palette import extract_palette, recolor_background, render_colored_segmented
from semcom.scoring import ScoredCandidate, ScoringConfig, score_candidates, select_output

DEFAULT_CANDIDATE_COUNT = 50

DEFAULT_NEGATIVE_PROMPT = (
    "low quality, worst quality, out of focus, ugly, error, jpeg artifacts, "
    "lowers, blurry, broken, illustration, animation, painting, 2D, "
    "oil painting, sketch, watercolor, ink, flat color"
)

Captioner = Callable[[RasterImage], str]
Segmenter = Callable[[RasterImage], SegmentationArray]
Generator = Callable[[RasterImage, str, int, str, int], Sequence[RasterImage]]
Similarity = Callable[[str, str], float]


class BackendError(RuntimeError):
    """A model backend failed or broke its contract."""

    def __init__(self, stage: str, message: str) -> None:
        super().__init__(f"{stage}: {message}")
        self.stage = stage


@dataclass(frozen=True)
class BackendSet:
    """The four model roles the pipeline delegates to.

    `similarity` may be None, in which case scoring falls back to the
    builtin token-F1. Backends that cannot handle concurrent calls set
    `single_flight`, and the receiver serializes candidate processing.
    """

    captioner: Captioner
    segmenter: Segmenter
    generator: Generator
    similarity: Optional[Similarity] = None
    single_flight: bool = False


@dataclass(frozen=True)
class TransmitterConfig:
    apply_background_recoloring: bool = False
    background_label: int = BACKGROUND_LABEL


@dataclass(frozen=True)
class ReceiverConfig:
    candidate_count: int = DEFAULT_CANDIDATE_COUNT
    scoring: ScoringConfig = field(default_factory=ScoringConfig)
    negative_prompt: str = DEFAULT_NEGATIVE_PROMPT
    generation_seed: int = 0

    def __post_init__(self) -> None:
        if self.candidate_count < 1:
            raise ValueError(f"candidate_count must be at least 1, got {self.candidate_count}")


def _invoke(stage: str, fn, *args):
    try:
        return fn(*args)
    except BackendError:
        raise
    except Exception as exc:
        raise BackendError(stage, str(exc)) from exc


def transmit(image: RasterImage, backends: BackendSet,
             config: TransmitterConfig = TransmitterConfig()) -> SemanticPayload:
    """Extract caption, segmentation, and palette from an image."""
    caption = _invoke("captioner", backends.captioner, image)
    segmentation = _invoke("segmenter", backends.segmenter, image)
    if (segmentation.width, segmentation.height) != (image.width, image.height):
        raise BackendError(
            "segmenter",
            f"segmenter dimension mismatch: got {segmentation.width}x{segmentation.height} "
            f"for a {image.width}x{image.height} image",
        )
    palette = extract_palette(image, segmentation)
    if config.apply_background_recoloring:
        if config.background_label in palette:
            palette = recolor_background(palette, config.background_label)
        else:
            # no background pixels: still ship a white entry so the flag's
            # invariant (background entry exactly white) holds
            palette = palette.with_color(config.background_label, WHITE)
    payload = SemanticPayload(
        caption=caption,
        segmentation=segmentation,
        palette=palette,
        background_label=config.background_label,
        background_recolored=config.apply_background_recoloring,
    )
    violations = validate_payload(payload)
    if violations:
        raise BackendError("transmit", f"produced invalid payload: {violations[0]}")
    return payload


def receive(payload: SemanticPayload, backends: BackendSet,
            config: ReceiverConfig = ReceiverConfig(),
            jobs: Optional[int] = None) -> tuple[RasterImage, list[ScoredCandidate]]:
    """Reconstruct an image from a payload.

    Renders the colored-segmented conditioning image, generates
    `config.candidate_count` candidates, captions and segments each one,
    scores them against the received features, and returns the selected
    image plus the full scored list. Results are independent of `jobs`.
    """
    violations = validate_payload(payload)
    if violations:
        raise ValueError(f"invalid payload: {violations[0]}")
    conditioning = render_colored_segmented(payload.segmentation, payload.palette)
    count = config.candidate_count
    images = list(_invoke(
        "generator", backends.generator,
        conditioning, payload.caption, count, config.negative_prompt, config.generation_seed,
    ))
    if len(images) != count:
        raise BackendError(
            "generator", f"candidate count mismatch: got {len(images)}, expected {count}"
        )
    for index, image in enumerate(images):
        if (image.width, image.height) != (conditioning.width, conditioning.height):
            raise BackendError(
                "generator",
                f"candidate {index}: dimension mismatch "
                f"{image.width}x{image.height} vs {conditioning.width}x{conditioning.height}",
            )

    def describe(item: tuple[int, RasterImage]) -> tuple[str, SegmentationArray]:
        index, image = item
        try:
            caption = backends.captioner(image)
        except Exception as exc:
            raise BackendError("captioner", f"candidate {index}: {exc}") from exc
        try:
            segmentation = backends.segmenter(image)
        except Exception as exc:
            raise BackendError("segmenter", f"candidate {index}: {exc}") from exc
        return caption, segmentation

    workers = 1 if backends.single_flight else (jobs or os.cpu_count() or 1)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            described = list(pool.map(describe, enumerate(images)))
    else:
        described = [describe(item) for item in enumerate(images)]

    candidates = [
        (image, caption, segmentation)
        for image, (caption, segmentation) in zip(images, described)
    ]
    scored = score_candidates(payload, candidates, config.scoring,
                              similarity_backend=backends.similarity)
    selected = select_output(scored)
    return scored[selected].image, scored


# --- deterministic mock backends -----------------------------------------

CLASS_NAMES = (
    "background", "airplane", "bicycle", "bird", "boat", "bottle", "bus",
    "car", "cat", "chair", "cow", "table", "dog", "horse", "motorbike",
    "person", "potted plant", "sheep", "sofa", "train", "tv",
)

# White background plus the 20 well-separated object colors of the Pascal VOC
# colormap; mutually distinct so nearest-color quantization inverts rendering.
CLASS_COLORS = (
    (255, 255, 255),
    (128, 0, 0), (0, 128, 0), (128, 128, 0), (0, 0, 128), (128, 0, 128),
    (0, 128, 128), (128, 128, 128), (64, 0, 0), (192, 0, 0), (64, 128, 0),
    (192, 128, 0), (64, 0, 128), (192, 0, 128), (64, 128, 128), (192, 128, 128),
    (0, 64, 0), (128, 64, 0), (0, 192, 0), (128, 192, 0), (0, 64, 128),
)

_CLASS_TABLE = np.asarray(CLASS_COLORS, dtype=np.int64)


def class_name(label: int) -> str:
    return CLASS_NAMES[label] if 0 <= label < len(CLASS_NAMES) else f"class {label}"


def builtin_class_palette():
    """The mock class table as a ColorPalette (all 21 entries)."""
    from semcom.core import ColorPalette

    return ColorPalette({label: color for label, color in enumerate(CLASS_COLORS)})


def _nearest_labels(pixels: np.ndarray) -> np.ndarray:
    """Label of the nearest class color per pixel; ties go to the lowest label."""
    values = pixels.astype(np.int64)
    best = np.full(values.shape[:-1], np.iinfo(np.int64).max, dtype=np.int64)
    labels = np.zeros(values.shape[:-1], dtype=np.uint8)
    for label, color in enumerate(_CLASS_TABLE):
        distance = ((values - color) ** 2).sum(axis=-1)
        better = distance < best  # strict: earlier (lower) labels win ties
        labels[better] = label
        np.minimum(best, distance, out=best)
    return labels


def mock_segmenter(image: RasterImage) -> SegmentationArray:
    """Quantize each pixel to the nearest builtin class color."""
    return SegmentationArray(_nearest_labels(image.array))


def mock_captioner(image: RasterImage) -> str:
    """Name the classes the mock segmenter sees, in alphabetical order."""
    labels = np.unique(_nearest_labels(image.array)).tolist()
    names = sorted(class_name(label) for label in labels if label != BACKGROUND_LABEL)
    if not names:
        names = [class_name(BACKGROUND_LABEL)]
    return "a photography of " + " and ".join(names)


def mock_generator(conditioning: RasterImage, caption: str, count: int,
                   negative_prompt: str, seed: int) -> list[RasterImage]:
    """Candidate 0 is the conditioning image; candidate i >= 1 relabels a
    seeded i-by-i square (clipped to the image), so the perturbed pixel
    count grows strictly with i while i <= min(width, height).
    """
    if count < 1:
        raise ValueError(f"candidate count must be at least 1, got {count}")
    rng = random.Random(seed)
    candidates = [conditioning]
    for i in range(1, count):
        candidates.append(_perturb(conditioning, rng, i))
    return candidates


def _perturb(image: RasterImage, rng: random.Random, step: int) -> RasterImage:
    span_w = min(image.width, step)
    span_h = min(image.height, step)
    x0 = rng.randrange(image.width - span_w + 1)
    y0 = rng.randrange(image.height - span_h + 1)
    pixels = image.array.copy()
    patch = pixels[y0:y0 + span_h, x0:x0 + span_w]
    shifted = (_nearest_labels(patch).astype(np.int64) + 1) % len(CLASS_COLORS)
    pixels[y0:y0 + span_h, x0:x0 + span_w] = _CLASS_TABLE[shifted].astype(np.uint8)
    return RasterImage(pixels)


def mock_backends() -> BackendSet:
    return BackendSet(
        captioner=mock_captioner,
        segmenter=mock_segmenter,
        generator=mock_generator,
    )
