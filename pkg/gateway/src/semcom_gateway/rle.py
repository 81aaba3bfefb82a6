"""Run-length coding of label arrays for the segment endpoint.

One record per run: label octet + run length as uint16 little-endian,
capped at 65535, runs taken over the row-major flattening. This is the
single segmentation wire encoding shared with protocol clients.
"""

from __future__ import annotations

import struct

import numpy as np

MAX_RUN_LENGTH = 0xFFFF


def encode_labels(labels: np.ndarray) -> bytes:
    flat = np.ascontiguousarray(labels, dtype=np.uint8).reshape(-1)
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
