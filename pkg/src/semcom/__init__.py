"""semcom: image transmission via semantic features and generative reconstruction.

A transmitter extracts a caption, a per-pixel segmentation, and an
average-color palette from an image and ships only those (a few KB). The
receiver renders the palette-colored segmentation, asks an image generator
for candidates conditioned on it, scores each candidate against the
received features, and outputs the best match.
"""

from semcom.codec import (
    DecodeError,
    EncodeError,
    SizeReport,
    decode_payload,
    encode_payload,
    rle_decode,
    rle_encode,
    size_report,
)
from semcom.core import (
    BACKGROUND_LABEL,
    ColorPalette,
    ImageFormatError,
    RasterImage,
    SegmentationArray,
    SemanticPayload,
    load_image,
    save_image,
    validate_payload,
)
from semcom.palette import (
    background_separation,
    extract_palette,
    recolor_background,
    render_colored_segmented,
)
from semcom.pipeline import (
    BackendError,
    BackendSet,
    ReceiverConfig,
    TransmitterConfig,
    mock_backends,
    mock_captioner,
    mock_generator,
    mock_segmenter,
    receive,
    transmit,
)
from semcom.scoring import (
    ScoredCandidate,
    ScoringConfig,
    kronecker,
    load_stop_words,
    score_candidates,
    select_output,
    smr,
    smr_foreground,
    text_similarity,
    tokenize,
)

__version__ = "0.1.0"

__all__ = [
    "BACKGROUND_LABEL",
    "BackendError",
    "BackendSet",
    "ColorPalette",
    "DecodeError",
    "EncodeError",
    "ImageFormatError",
    "RasterImage",
    "ReceiverConfig",
    "ScoredCandidate",
    "ScoringConfig",
    "SegmentationArray",
    "SemanticPayload",
    "SizeReport",
    "TransmitterConfig",
    "background_separation",
    "decode_payload",
    "encode_payload",
    "extract_palette",
    "kronecker",
    "load_image",
    "load_stop_words",
    "mock_backends",
    "mock_captioner",
    "mock_generator",
    "mock_segmenter",
    "receive",
    "recolor_background",
    "render_colored_segmented",
    "rle_decode",
    "rle_encode",
    "save_image",
    "score_candidates",
    "select_output",
    "size_report",
    "smr",
    "smr_foreground",
    "text_similarity",
    "tokenize",
    "transmit",
    "validate_payload",
]
