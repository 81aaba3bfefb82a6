"""Wire codec for semantic payloads.

Byte layout of an encoded payload (all multi-byte integers little-endian):

    magic "SMC1"            4 octets
    version                 1 octet  (0x01)
    flags                   1 octet  (bit 0 = background recolored)
    background label        1 octet
    width, height           2 + 2 octets
    caption length + text   2 octets + N (Latin-1, one octet per character)
    palette count + entries 1 octet  + 4 per entry (label, R, G, B), ascending labels
    RLE length + runs       4 octets + 3 per run (label, run length as uint16)

The fixed-width fields total 18 octets and are excluded from SizeReport,
which counts only caption + palette + RLE segmentation bytes against the
uncompressed width*height*3 reference.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from semcom.core import ColorPalette, SegmentationArray, SemanticPayload, validate_payload

MAGIC = b"SMC1"
VERSION = 1
MAX_RUN_LENGTH = 0xFFFF
HEADER_OVERHEAD = 18

_KNOWN_FLAGS = 0x01
_FLAG_BACKGROUND_RECOLORED = 0x01


class EncodeError(ValueError):
    """The payload cannot be represented in the wire format."""


class DecodeError(ValueError):
    """The octet stream is not a well-formed encoded payload."""


@dataclass(frozen=True)
class SizeReport:
    """Per-component byte counts of a payload, header overhead excluded."""

    uncompressed_image_bytes: int
    caption_bytes: int
    palette_bytes: int
    segmentation_rle_bytes: int
    total_payload_bytes: int


def rle_encode(segmentation: SegmentationArray) -> bytes:
    """Run-length encode the row-major label sequence.

    Each run is 3 octets: label, then the run length as uint16 LE. Runs may
    cross row boundaries; runs longer than 65535 are split at the cap.
    """
    flat = segmentation.flat
    changes = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    starts = np.concatenate(([0], changes))
    ends = np.concatenate((changes, [flat.size]))
    out = bytearray()
    for start, end in zip(starts.tolist(), ends.tolist()):
        label = int(flat[start])
        length = end - start
        while length > MAX_RUN_LENGTH:
            out += struct.pack("<BH", label, MAX_RUN_LENGTH)
            length -= MAX_RUN_LENGTH
        out += struct.pack("<BH", label, length)
    return bytes(out)


def rle_decode(octets: bytes, expected_pixel_count: int) -> np.ndarray:
    """Inverse of rle_encode; returns the flat uint8 label sequence."""
    if len(octets) % 3:
        raise DecodeError("trailing partial run")
    runs = np.frombuffer(bytes(octets), dtype=np.uint8).reshape(-1, 3)
    labels = runs[:, 0]
    lengths = runs[:, 1].astype(np.int64) | (runs[:, 2].astype(np.int64) << 8)
    if lengths.size and int(lengths.min()) == 0:
        raise DecodeError("zero-length run")
    total = int(lengths.sum())
    if total != expected_pixel_count:
        raise DecodeError(
            f"length-sum mismatch: runs cover {total} pixels, expected {expected_pixel_count}"
        )
    return np.repeat(labels, lengths)


def encode_payload(payload: SemanticPayload) -> bytes:
    """Serialize a valid payload to its canonical octet sequence."""
    violations = validate_payload(payload)
    if violations:
        raise EncodeError(f"invalid payload: {violations[0]}")
    seg = payload.segmentation
    if seg.width > 0xFFFF or seg.height > 0xFFFF:
        raise EncodeError(f"image too large: {seg.width}x{seg.height} exceeds 65535")
    try:
        caption = payload.caption.encode("latin-1")
    except UnicodeEncodeError as exc:
        raise EncodeError(f"caption not encodable as Latin-1: {exc}") from exc
    if len(caption) > 0xFFFF:
        raise EncodeError(f"caption too long: {len(caption)} octets")
    if len(payload.palette) > 255:
        raise EncodeError(f"palette overflow: {len(payload.palette)} entries")
    rle = rle_encode(seg)
    if len(rle) > 0xFFFFFFFF:
        raise EncodeError("RLE block too large")

    flags = _FLAG_BACKGROUND_RECOLORED if payload.background_recolored else 0
    out = bytearray()
    out += MAGIC
    out.append(VERSION)
    out.append(flags)
    out.append(payload.background_label)
    out += struct.pack("<HH", seg.width, seg.height)
    out += struct.pack("<H", len(caption))
    out += caption
    out.append(len(payload.palette))
    for label in sorted(payload.palette):  # canonical: ascending label order
        red, green, blue = payload.palette[label]
        out += bytes((label, red, green, blue))
    out += struct.pack("<I", len(rle))
    out += rle
    return bytes(out)


class _Reader:
    __slots__ = ("data", "pos")

    def __init__(self, data: bytes) -> None:
        self.data = data
        self.pos = 0

    def take(self, count: int) -> bytes:
        if self.pos + count > len(self.data):
            raise DecodeError("truncated payload")
        chunk = self.data[self.pos:self.pos + count]
        self.pos += count
        return chunk


def decode_payload(encoded: bytes) -> SemanticPayload:
    """Parse an encoded payload; exact inverse of encode_payload.

    Only canonical streams are accepted (ascending palette labels, known
    flag bits, no trailing octets), so re-encoding the result reproduces
    the input byte-for-byte.
    """
    reader = _Reader(bytes(encoded))
    if reader.take(4) != MAGIC:
        raise DecodeError("bad magic")
    version = reader.take(1)[0]
    if version != VERSION:
        raise DecodeError(f"unsupported version {version}")
    flags = reader.take(1)[0]
    if flags & ~_KNOWN_FLAGS:
        raise DecodeError(f"unknown flags 0x{flags:02x}")
    background_label = reader.take(1)[0]
    width, height = struct.unpack("<HH", reader.take(4))
    if width == 0 or height == 0:
        raise DecodeError(f"invalid dimensions {width}x{height}")
    (caption_length,) = struct.unpack("<H", reader.take(2))
    caption = reader.take(caption_length).decode("latin-1")
    entry_count = reader.take(1)[0]
    entries: list[tuple[int, tuple[int, int, int]]] = []
    previous = -1
    for _ in range(entry_count):
        label, red, green, blue = reader.take(4)
        if label <= previous:
            raise DecodeError("palette entries out of order")
        previous = label
        entries.append((label, (red, green, blue)))
    (rle_length,) = struct.unpack("<I", reader.take(4))
    rle = reader.take(rle_length)
    if reader.pos != len(reader.data):
        raise DecodeError("trailing data")
    labels = rle_decode(rle, width * height)
    return SemanticPayload(
        caption=caption,
        segmentation=SegmentationArray(labels.reshape(height, width)),
        palette=ColorPalette(entries),
        background_label=background_label,
        background_recolored=bool(flags & _FLAG_BACKGROUND_RECOLORED),
    )


def size_report(payload: SemanticPayload) -> SizeReport:
    """Byte accounting: caption at one octet per character, palette entries
    at four octets each, segmentation at its RLE size."""
    seg = payload.segmentation
    caption_bytes = len(payload.caption)
    palette_bytes = 4 * len(payload.palette)
    rle_bytes = len(rle_encode(seg))
    return SizeReport(
        uncompressed_image_bytes=seg.width * seg.height * 3,
        caption_bytes=caption_bytes,
        palette_bytes=palette_bytes,
        segmentation_rle_bytes=rle_bytes,
        total_payload_bytes=caption_bytes + palette_bytes + rle_bytes,
    )
