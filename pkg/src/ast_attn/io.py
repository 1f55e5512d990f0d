"""Portable graymap (PGM) and CSV readers/writers.

Outputs are written with fixed formatting so identical inputs always give
byte-identical files.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import FormatError


def _header_tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    """Read ``count`` whitespace-separated header tokens, skipping comments."""
    tokens = []
    pos = 0
    n = len(data)
    while len(tokens) < count:
        while pos < n and data[pos : pos + 1].isspace():
            pos += 1
        if pos >= n:
            raise FormatError("truncated PGM header")
        if data[pos : pos + 1] == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos : pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    return tokens, pos


def read_pgm(path) -> np.ndarray:
    """Read a P2 (ASCII) or P5 (binary) graymap into an integer array."""
    data = Path(path).read_bytes()
    return parse_pgm(data)


def parse_pgm(data: bytes) -> np.ndarray:
    if len(data) < 2 or data[:2] not in (b"P2", b"P5"):
        raise FormatError("not a P2/P5 graymap")
    magic = data[:2]
    (w, h, maxval), pos = _header_tokens(data[2:], 3)
    try:
        w, h, maxval = int(w), int(h), int(maxval)
    except ValueError:
        raise FormatError("non-integer PGM header field") from None
    if w < 1 or h < 1 or not 0 < maxval < 65536:
        raise FormatError(f"bad PGM header: {w}x{h} maxval {maxval}")
    body = data[2 + pos :]
    if magic == b"P2":
        try:
            values = [int(t) for t in body.split()]
        except ValueError:
            raise FormatError("non-integer sample in P2 body") from None
        if len(values) != w * h:
            raise FormatError(f"expected {w * h} samples, found {len(values)}")
        arr = np.array(values, dtype=np.int64)
    else:
        # exactly one whitespace byte separates header from raster
        raster = body[1:]
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        need = w * h * dtype.itemsize
        if len(raster) < need:
            raise FormatError("truncated P5 raster")
        arr = np.frombuffer(raster[:need], dtype=dtype).astype(np.int64)
    if arr.min() < 0 or arr.max() > maxval:
        raise FormatError("sample outside [0, maxval]")
    return arr.reshape(h, w)


def format_pgm(grid, maxval: int | None = None, binary: bool = False) -> bytes:
    g = np.asarray(grid)
    if g.ndim != 2:
        raise FormatError("PGM grids are 2-D")
    g = g.astype(np.int64)
    if maxval is None:
        maxval = max(1, int(g.max()))
    h, w = g.shape
    header = f"P{5 if binary else 2}\n{w} {h}\n{maxval}\n".encode()
    if binary:
        dtype = ">u2" if maxval > 255 else "u1"
        return header + g.astype(dtype).tobytes()
    lines = [" ".join(str(int(v)) for v in row) for row in g]
    return header + ("\n".join(lines) + "\n").encode()


def write_pgm(path, grid, maxval: int | None = None, binary: bool = False) -> None:
    Path(path).write_bytes(format_pgm(grid, maxval=maxval, binary=binary))


def to_gray(values) -> np.ndarray:
    """Map a real grid linearly onto 0..255 (a constant grid maps to 0)."""
    v = np.asarray(values, dtype=np.float64)
    lo, hi = float(v.min()), float(v.max())
    if hi <= lo:
        return np.zeros(v.shape, dtype=np.int64)
    return np.rint((v - lo) / (hi - lo) * 255.0).astype(np.int64)


def write_heatmap(path, values) -> None:
    write_pgm(path, to_gray(values), maxval=255)


def write_mask_pgm(path, mask) -> None:
    write_pgm(path, np.asarray(mask, dtype=np.int64) * 255, maxval=255)


def fmt(x: float) -> str:
    """Shortest round-tripping text for a float."""
    return repr(float(x))


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    Path(path).write_text(buf.getvalue())


def read_csv(path) -> list[dict[str, str]]:
    with open(path, newline="") as f:
        return list(csv.DictReader(f))
