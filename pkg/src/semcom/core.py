"""Domain types, payload validation, and raster image I/O (PPM P6 / PNG)."""

from __future__ import annotations

import io
import os
from dataclasses import dataclass
from typing import BinaryIO, Iterable, Mapping, Union

import numpy as np
from PIL import Image

RGB = tuple[int, int, int]

BACKGROUND_LABEL = 0
WHITE: RGB = (255, 255, 255)

ImageSource = Union[str, os.PathLike, bytes, bytearray, BinaryIO]


class ImageFormatError(ValueError):
    """An image stream could not be parsed or written."""


def _as_uint8(array: np.ndarray, what: str) -> np.ndarray:
    if array.dtype != np.uint8:
        if not np.issubdtype(array.dtype, np.integer):
            raise ValueError(f"{what} must be integers, got dtype {array.dtype}")
        if array.size and (array.min() < 0 or array.max() > 255):
            raise ValueError(f"{what} must lie in 0..255")
        array = array.astype(np.uint8)
    array = np.ascontiguousarray(array)
    array.setflags(write=False)
    return array


class RasterImage:
    """8-bit RGB raster, row-major. Immutable after construction."""

    __slots__ = ("width", "height", "array")

    def __init__(self, array) -> None:
        arr = np.asarray(array)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError(f"pixel array must have shape (height, width, 3), got {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("width and height must be at least 1")
        self.array = _as_uint8(arr, "pixel values")
        self.height = int(arr.shape[0])
        self.width = int(arr.shape[1])

    @classmethod
    def from_flat(cls, width: int, height: int, pixels: Iterable[RGB]) -> "RasterImage":
        flat = np.asarray(list(pixels))
        if flat.ndim != 2 or flat.shape[1] != 3:
            raise ValueError("pixels must be an iterable of (r, g, b) triples")
        if flat.shape[0] != width * height:
            raise ValueError(
                f"pixels length {flat.shape[0]} does not equal width*height = {width * height}"
            )
        return cls(flat.reshape(height, width, 3))

    @property
    def pixels(self) -> list[RGB]:
        """Row-major pixel list; convenience for small images."""
        return [tuple(int(c) for c in px) for px in self.array.reshape(-1, 3)]

    def __eq__(self, other) -> bool:
        if not isinstance(other, RasterImage):
            return NotImplemented
        return (self.width, self.height) == (other.width, other.height) and np.array_equal(
            self.array, other.array
        )

    def __repr__(self) -> str:
        return f"RasterImage(width={self.width}, height={self.height})"


class SegmentationArray:
    """Per-pixel class labels, row-major, one unsigned byte per pixel."""

    __slots__ = ("width", "height", "array")

    def __init__(self, array) -> None:
        arr = np.asarray(array)
        if arr.ndim != 2:
            raise ValueError(f"label array must have shape (height, width), got {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("width and height must be at least 1")
        self.array = _as_uint8(arr, "labels")
        self.height = int(arr.shape[0])
        self.width = int(arr.shape[1])

    @classmethod
    def from_flat(cls, width: int, height: int, labels: Iterable[int]) -> "SegmentationArray":
        flat = np.asarray(list(labels))
        if flat.ndim != 1:
            raise ValueError("labels must be a flat iterable")
        if flat.shape[0] != width * height:
            raise ValueError(
                f"labels length {flat.shape[0]} does not equal width*height = {width * height}"
            )
        return cls(flat.reshape(height, width))

    @property
    def labels(self) -> list[int]:
        return [int(v) for v in self.array.reshape(-1)]

    @property
    def flat(self) -> np.ndarray:
        """Row-major 1-D view of the labels."""
        return self.array.reshape(-1)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SegmentationArray):
            return NotImplemented
        return (self.width, self.height) == (other.width, other.height) and np.array_equal(
            self.array, other.array
        )

    def __repr__(self) -> str:
        return f"SegmentationArray(width={self.width}, height={self.height})"


class ColorPalette:
    """Label -> RGB mapping with unique labels; keeps insertion order."""

    __slots__ = ("colors",)

    def __init__(self, entries: Union[Mapping[int, RGB], Iterable[tuple[int, RGB]]]) -> None:
        items = entries.items() if isinstance(entries, Mapping) else entries
        colors: dict[int, RGB] = {}
        for label, color in items:
            label = int(label)
            if not 0 <= label <= 255:
                raise ValueError(f"label {label} outside 0..255")
            if label in colors:
                raise ValueError(f"duplicate label {label}")
            rgb = tuple(int(c) for c in color)
            if len(rgb) != 3 or any(not 0 <= c <= 255 for c in rgb):
                raise ValueError(f"invalid RGB color {color!r} for label {label}")
            colors[label] = rgb
        self.colors = colors

    def __contains__(self, label: int) -> bool:
        return int(label) in self.colors

    def __getitem__(self, label: int) -> RGB:
        return self.colors[int(label)]

    def __iter__(self):
        return iter(self.colors)

    def __len__(self) -> int:
        return len(self.colors)

    def items(self):
        return self.colors.items()

    def with_color(self, label: int, color: RGB) -> "ColorPalette":
        """Copy with one entry replaced (or appended if the label is new)."""
        updated = dict(self.colors)
        updated[int(label)] = tuple(int(c) for c in color)
        return ColorPalette(updated)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ColorPalette):
            return NotImplemented
        return self.colors == other.colors

    def __repr__(self) -> str:
        return f"ColorPalette({self.colors!r})"


@dataclass(frozen=True)
class SemanticPayload:
    """The transmitted unit: caption, segmentation, palette, and flags."""

    caption: str
    segmentation: SegmentationArray
    palette: ColorPalette
    background_label: int = BACKGROUND_LABEL
    background_recolored: bool = False


def validate_payload(payload: SemanticPayload) -> list[str]:
    """Check every payload invariant; returns a list of violations (empty = ok).

    Violations are data, not faults: callers that require a valid payload
    should raise on a non-empty result.
    """
    violations: list[str] = []
    seg = payload.segmentation
    if seg.array.size != seg.width * seg.height:
        violations.append(
            f"length mismatch: {seg.array.size} labels for {seg.width}x{seg.height}"
        )
    if not payload.caption.strip():
        violations.append("empty caption")
    if not 0 <= payload.background_label <= 255:
        violations.append(f"background label {payload.background_label} outside 0..255")
    for label in np.unique(seg.array).tolist():
        if label not in payload.palette:
            violations.append(f"uncovered label {label}")
    if payload.background_recolored:
        bg = payload.background_label
        if bg not in payload.palette:
            violations.append(f"background label {bg} missing from palette")
        elif payload.palette[bg] != WHITE:
            violations.append(
                f"background label {bg} is {payload.palette[bg]} but the recolored flag requires (255, 255, 255)"
            )
    return violations


# --- raster I/O ---------------------------------------------------------

_PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"


def _read_source(source: ImageSource) -> bytes:
    if isinstance(source, (bytes, bytearray)):
        return bytes(source)
    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            return fh.read()
    return source.read()


def _sniff_format(data: bytes) -> str:
    if data[:2] == b"P6":
        return "ppm"
    if data[:8] == _PNG_SIGNATURE:
        return "png"
    raise ImageFormatError("unrecognized image format (expected PPM P6 or PNG)")


def load_image(source: ImageSource, format: str | None = None) -> RasterImage:
    """Read a PPM (P6, maxval 255) or PNG image.

    PNG alpha, if present, is composited over opaque white and discarded.
    With no format hint the stream is sniffed by its magic bytes.
    """
    data = _read_source(source)
    fmt = format.lower() if format else _sniff_format(data)
    if fmt == "ppm":
        return _decode_ppm(data)
    if fmt == "png":
        return _decode_png(data)
    raise ImageFormatError(f"unsupported format {format!r}")


def save_image(image: RasterImage, sink: Union[str, os.PathLike, BinaryIO],
               format: str | None = None) -> None:
    """Write `image` as PPM P6 or PNG; format inferred from a path suffix."""
    if format is None:
        if isinstance(sink, (str, os.PathLike)):
            format = os.fspath(sink).rsplit(".", 1)[-1].lower()
        else:
            raise ImageFormatError("format required when writing to a stream")
    fmt = format.lower()
    if fmt == "ppm":
        data = _encode_ppm(image)
    elif fmt == "png":
        data = _encode_png(image)
    else:
        raise ImageFormatError(f"unsupported format {format!r}")
    if isinstance(sink, (str, os.PathLike)):
        with open(sink, "wb") as fh:
            fh.write(data)
    else:
        sink.write(data)


def _decode_ppm(data: bytes) -> RasterImage:
    if data[:2] != b"P6":
        raise ImageFormatError("malformed header: not a P6 file")
    whitespace = b" \t\r\n"
    tokens: list[bytes] = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(data):
            if data[pos:pos + 1] == b"#":
                newline = data.find(b"\n", pos)
                if newline == -1:
                    raise ImageFormatError("malformed header: unterminated comment")
                pos = newline + 1
            elif data[pos] in whitespace:
                pos += 1
            else:
                break
        start = pos
        while pos < len(data) and data[pos] not in whitespace and data[pos:pos + 1] != b"#":
            pos += 1
        if pos == start:
            raise ImageFormatError("malformed header: missing size fields")
        tokens.append(data[start:pos])
    if pos >= len(data):
        raise ImageFormatError("malformed header: missing pixel data")
    if data[pos] not in whitespace:
        raise ImageFormatError("malformed header: maxval not followed by whitespace")
    pos += 1  # exactly one whitespace byte separates the header from the raster
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError as exc:
        raise ImageFormatError(f"malformed header: {exc}") from exc
    if maxval != 255:
        raise ImageFormatError(f"unsupported bit depth: maxval {maxval}")
    if width < 1 or height < 1:
        raise ImageFormatError(f"malformed header: invalid size {width}x{height}")
    expected = width * height * 3
    body = data[pos:]
    if len(body) < expected:
        raise ImageFormatError(
            f"truncated pixel data: got {len(body)} bytes, expected {expected}"
        )
    if len(body) > expected:
        raise ImageFormatError("trailing data after pixel raster")
    pixels = np.frombuffer(body, dtype=np.uint8).reshape(height, width, 3)
    return RasterImage(pixels)


def _encode_ppm(image: RasterImage) -> bytes:
    header = f"P6\n{image.width} {image.height}\n255\n".encode("ascii")
    return header + image.array.tobytes()


def _decode_png(data: bytes) -> RasterImage:
    try:
        pil = Image.open(io.BytesIO(data))
        pil.load()
    except Exception as exc:
        raise ImageFormatError(f"malformed PNG stream: {exc}") from exc
    if pil.mode in ("I", "I;16", "I;16B", "I;16L", "I;16N", "F"):
        raise ImageFormatError(f"unsupported bit depth: PNG mode {pil.mode}")
    has_alpha = pil.mode in ("RGBA", "LA", "PA") or (
        pil.mode == "P" and "transparency" in pil.info
    )
    if has_alpha:
        rgba = pil.convert("RGBA")
        canvas = Image.new("RGBA", rgba.size, (255, 255, 255, 255))
        pil = Image.alpha_composite(canvas, rgba)
    return RasterImage(np.asarray(pil.convert("RGB"), dtype=np.uint8))


def _encode_png(image: RasterImage) -> bytes:
    buffer = io.BytesIO()
    Image.fromarray(image.array, mode="RGB").save(buffer, format="PNG")
    return buffer.getvalue()
