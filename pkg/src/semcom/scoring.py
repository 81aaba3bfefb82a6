"""Similarity scoring between received features and generated candidates.

Two signals are computed per candidate: the segmentation matching rate (the
fraction of pixel positions whose labels agree) and a caption similarity.
The builtin caption similarity is token-level F1 — precision and recall of
the multiset token overlap — which stands in for embedding-based scoring
when no external similarity backend is attached. A linear mix of the two
signals ranks the candidates.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable, Optional, Sequence

import numpy as np

from semcom.core import BACKGROUND_LABEL, RasterImage, SegmentationArray, SemanticPayload

SimilarityBackend = Callable[[str, str], float]

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def load_stop_words(source) -> frozenset[str]:
    """Parse a stop-word file: one token per line, '#' comments ignored."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source, "r", encoding="utf-8") as fh:
            text = fh.read()
    return _parse_stop_words(text)


def _parse_stop_words(text: str) -> frozenset[str]:
    words = set()
    for line in text.splitlines():
        token = line.split("#", 1)[0].strip().lower()
        if token:
            words.add(token)
    return frozenset(words)


def _default_stop_words() -> frozenset[str]:
    text = resources.files("semcom").joinpath("stopwords.txt").read_text("utf-8")
    return _parse_stop_words(text)


DEFAULT_STOP_WORDS = _default_stop_words()


@dataclass(frozen=True)
class ScoringConfig:
    smr_weight: float = 0.5
    remove_stop_words: bool = True
    foreground_only_smr: bool = False
    stop_words: frozenset[str] = field(default=DEFAULT_STOP_WORDS)

    def __post_init__(self) -> None:
        if not 0.0 <= self.smr_weight <= 1.0:
            raise ValueError(f"smr_weight must lie in [0, 1], got {self.smr_weight}")


@dataclass(frozen=True)
class ScoredCandidate:
    candidate_index: int
    image: RasterImage
    candidate_segmentation: SegmentationArray
    candidate_caption: str
    smr: float
    text_similarity: float
    combined: float


def kronecker(x: int, y: int) -> int:
    """1 if the two labels are equal, else 0."""
    return 1 if x == y else 0


def _check_dimensions(reference: SegmentationArray, candidate: SegmentationArray) -> None:
    if (reference.width, reference.height) != (candidate.width, candidate.height):
        raise ValueError(
            f"dimension mismatch: reference {reference.width}x{reference.height}, "
            f"candidate {candidate.width}x{candidate.height}"
        )


def smr(reference: SegmentationArray, candidate: SegmentationArray) -> float:
    """Segmentation matching rate: matching pixel positions over all pixels.

    The match count is exact integer arithmetic; the single division at the
    end is the only floating-point step.
    """
    _check_dimensions(reference, candidate)
    matches = int(np.count_nonzero(reference.array == candidate.array))
    return matches / reference.array.size


def smr_foreground(reference: SegmentationArray, candidate: SegmentationArray,
                   background_label: int = BACKGROUND_LABEL) -> float:
    """Matching rate over only the reference's non-background positions.

    Scores a candidate on how well it reproduces the target object rather
    than the (usually dominant) background, so an empty candidate cannot
    ride a small object's background to a high score.
    """
    _check_dimensions(reference, candidate)
    foreground = reference.array != background_label
    denominator = int(np.count_nonzero(foreground))
    if denominator == 0:
        raise ValueError("all-background reference: foreground matching rate undefined")
    matches = int(np.count_nonzero((reference.array == candidate.array) & foreground))
    return matches / denominator


def tokenize(text: str, config: ScoringConfig) -> list[str]:
    """Lowercase and split on non-alphanumeric runs, dropping stop words if configured."""
    tokens = _TOKEN_RE.findall(text.lower())
    if config.remove_stop_words:
        tokens = [token for token in tokens if token not in config.stop_words]
    return tokens


def text_similarity(reference: str, candidate: str, config: ScoringConfig,
                    backend: Optional[SimilarityBackend] = None) -> float:
    """Caption similarity in [0, 1].

    With a backend handle the backend's score is used, clamped to [0, 1].
    Otherwise: token-F1 with the multiset overlap, 0.0 when either token
    list is empty.
    """
    if backend is not None:
        return min(1.0, max(0.0, float(backend(reference, candidate))))
    reference_tokens = tokenize(reference, config)
    candidate_tokens = tokenize(candidate, config)
    if not reference_tokens or not candidate_tokens:
        return 0.0
    overlap = sum((Counter(reference_tokens) & Counter(candidate_tokens)).values())
    if overlap == 0:
        return 0.0
    precision = overlap / len(candidate_tokens)
    recall = overlap / len(reference_tokens)
    return 2.0 * precision * recall / (precision + recall)


def score_candidates(
    payload: SemanticPayload,
    candidates: Sequence[tuple[RasterImage, str, SegmentationArray]],
    config: ScoringConfig,
    similarity_backend: Optional[SimilarityBackend] = None,
) -> list[ScoredCandidate]:
    """Score each (image, caption, segmentation) candidate against the payload.

    Input order is preserved; any per-candidate failure aborts with the
    candidate index attached.
    """
    reference = payload.segmentation
    scored: list[ScoredCandidate] = []
    for index, (image, caption, segmentation) in enumerate(candidates):
        try:
            if config.foreground_only_smr:
                match_rate = smr_foreground(reference, segmentation, payload.background_label)
            else:
                match_rate = smr(reference, segmentation)
            text_score = text_similarity(payload.caption, caption, config,
                                         backend=similarity_backend)
        except Exception as exc:
            raise RuntimeError(f"candidate {index}: {exc}") from exc
        combined = config.smr_weight * match_rate + (1.0 - config.smr_weight) * text_score
        scored.append(ScoredCandidate(
            candidate_index=index,
            image=image,
            candidate_segmentation=segmentation,
            candidate_caption=caption,
            smr=match_rate,
            text_similarity=text_score,
            combined=combined,
        ))
    return scored


def select_output(scored: Sequence[ScoredCandidate]) -> int:
    """Index of the highest combined score; ties go to the lowest index."""
    if not scored:
        raise ValueError("empty candidate list")
    return max(range(len(scored)), key=lambda i: scored[i].combined)
