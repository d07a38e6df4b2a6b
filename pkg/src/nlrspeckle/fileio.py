"""Image file formats: PGM (P2/P5, 8-bit) and the raw float format NLR1.

NLR1 layout::

    NLR1 <width> <height>\\n
    <width*height little-endian IEEE-754 float64, row-major>
"""

import os
import re

import numpy as np

from .errors import ImageFormatError
from .image import as_image

NLR1_MAGIC = b"NLR1"
_TOKEN = re.compile(rb"\s*((?:#[^\n]*\n\s*)*)(\S+)")


def _pgm_tokens(data, count, pos=0):
    """Read ``count`` whitespace-separated header tokens, skipping comments."""
    out = []
    for _ in range(count):
        m = _TOKEN.match(data, pos)
        if m is None:
            raise ImageFormatError("truncated PGM header")
        out.append(m.group(2))
        pos = m.end()
    return out, pos


def parse_pgm(data):
    magic = data[:2]
    if magic not in (b"P2", b"P5"):
        raise ImageFormatError(f"not a grayscale PGM (magic {magic!r})")
    try:
        (w, h, maxval), pos = _pgm_tokens(data, 3, 2)
        width, height, maxval = int(w), int(h), int(maxval)
    except ValueError as exc:
        raise ImageFormatError("bad PGM header") from exc
    if width <= 0 or height <= 0 or not 0 < maxval < 65536:
        raise ImageFormatError("bad PGM dimensions or maxval")
    n = width * height
    if magic == b"P5":
        pos += 1  # single whitespace byte after maxval
        dtype = np.dtype(np.uint8) if maxval < 256 else np.dtype(">u2")
        if len(data) < pos + n * dtype.itemsize:
            raise ImageFormatError("truncated PGM raster")
        pixels = np.frombuffer(data, dtype=dtype, count=n, offset=pos).astype(np.float64)
    else:
        body = re.sub(rb"#[^\n]*", b"", data[pos:]).split()
        if len(body) < n:
            raise ImageFormatError("truncated PGM raster")
        pixels = np.array([int(t) for t in body[:n]], dtype=np.float64)
    if maxval != 255:
        pixels *= 255.0 / maxval
    return pixels.reshape(height, width)


def to_uint8(img):
    """Round and clamp to the 0..255 byte range."""
    return np.clip(np.rint(as_image(img)), 0, 255).astype(np.uint8)


def format_pgm(img, ascii=False):
    a = to_uint8(img)
    h, w = a.shape
    if ascii:
        rows = [" ".join(str(int(p)) for p in row) for row in a]
        return f"P2\n{w} {h}\n255\n".encode() + ("\n".join(rows) + "\n").encode()
    return f"P5\n{w} {h}\n255\n".encode() + a.tobytes()


def parse_nlr1(data):
    nl = data.find(b"\n")
    if nl < 0:
        raise ImageFormatError("NLR1 header has no newline")
    parts = data[:nl].split()
    if len(parts) != 3 or parts[0] != NLR1_MAGIC:
        raise ImageFormatError("bad NLR1 header")
    try:
        width, height = int(parts[1]), int(parts[2])
    except ValueError as exc:
        raise ImageFormatError("bad NLR1 dimensions") from exc
    n = width * height
    if width <= 0 or height <= 0 or len(data) - nl - 1 != 8 * n:
        raise ImageFormatError("NLR1 payload size does not match header")
    return np.frombuffer(data, dtype="<f8", count=n, offset=nl + 1).astype(np.float64).reshape(height, width)


def format_nlr1(img):
    a = as_image(img)
    h, w = a.shape
    return f"NLR1 {w} {h}\n".encode() + np.ascontiguousarray(a, dtype="<f8").tobytes()


def read_image(path):
    """Read a PGM (P2/P5) or NLR1 file into a float64 array."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data.startswith(NLR1_MAGIC):
        return parse_nlr1(data)
    return parse_pgm(data)


def write_image(path, img, fmt=None):
    """Write ``img``; format from ``fmt`` or the extension (.pgm -> P5, else NLR1)."""
    if fmt is None:
        fmt = "pgm" if os.fspath(path).lower().endswith(".pgm") else "nlr1"
    if fmt == "pgm":
        payload = format_pgm(img)
    elif fmt == "pgm-ascii":
        payload = format_pgm(img, ascii=True)
    elif fmt == "nlr1":
        payload = format_nlr1(img)
    else:
        raise ValueError(f"unknown image format {fmt!r}")
    with open(path, "wb") as fh:
        fh.write(payload)
