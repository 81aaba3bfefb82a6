"""Palette extraction, colored-segmented rendering, and background recoloring."""

from __future__ import annotations

import numpy as np

from semcom.core import WHITE, ColorPalette, RasterImage, SegmentationArray


def extract_palette(image: RasterImage, segmentation: SegmentationArray) -> ColorPalette:
    """Average RGB color of every label present in the segmentation.

    Channel means are rounded half-up; labels with no pixels get no entry.
    Entries come out in ascending label order.
    """
    if (image.width, image.height) != (segmentation.width, segmentation.height):
        raise ValueError(
            f"dimension mismatch: image {image.width}x{image.height}, "
            f"segmentation {segmentation.width}x{segmentation.height}"
        )
    labels = segmentation.flat
    pixels = image.array.reshape(-1, 3)
    counts = np.bincount(labels, minlength=256)
    # float64 bincount sums are exact here: 255 * 65535^2 < 2^53
    sums = np.stack(
        [np.bincount(labels, weights=pixels[:, channel], minlength=256) for channel in range(3)],
        axis=1,
    ).astype(np.int64)
    entries = {}
    for label in np.flatnonzero(counts).tolist():
        count = int(counts[label])
        entries[label] = tuple(
            int((2 * int(total) + count) // (2 * count)) for total in sums[label]
        )
    return ColorPalette(entries)


def render_colored_segmented(segmentation: SegmentationArray, palette: ColorPalette) -> RasterImage:
    """Replace each label with its palette color; the generator's conditioning image."""
    for label in np.unique(segmentation.array).tolist():
        if label not in palette:
            raise ValueError(f"uncovered label {label}")
    lut = np.zeros((256, 3), dtype=np.uint8)
    for label, color in palette.items():
        lut[label] = color
    return RasterImage(lut[segmentation.array])


def recolor_background(palette: ColorPalette, background_label: int) -> ColorPalette:
    """Force the background entry to white, leaving every other entry untouched."""
    if background_label not in palette:
        raise ValueError(f"background label absent: {background_label}")
    return palette.with_color(background_label, WHITE)


def background_separation(palette: ColorPalette, background_label: int) -> int:
    """Smallest max-channel distance between the background color and any
    other palette entry. A diagnostic for conditioning images whose object
    and background colors are too close for a generator to tell apart.
    """
    if background_label not in palette:
        raise ValueError(f"background label absent: {background_label}")
    background = np.asarray(palette[background_label], dtype=np.int64)
    distances = [
        int(np.abs(np.asarray(color, dtype=np.int64) - background).max())
        for label, color in palette.items()
        if label != background_label
    ]
    return min(distances) if distances else 255
