"""Binary PGM (P5) reading and writing.

Occupancy rasters use 8-bit PGM with 0 = free and 255 = solid; height rasters
use 16-bit PGM (big-endian, per the format) with a scale factor applied by the
caller. Comments (# ...) in the header are tolerated on read, never written.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import ParseError


def read_pgm(path: str | Path) -> tuple[np.ndarray, int]:
    """Read a binary PGM file; returns (array of shape (rows, cols), maxval)."""
    data = Path(path).read_bytes()
    if not data.startswith(b"P5"):
        raise ParseError(f"{path}: not a binary PGM (missing P5 magic)")

    # Header is three whitespace-separated tokens after the magic, with
    # optional comment lines starting with '#'.
    tokens: list[int] = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ParseError(f"{path}: truncated PGM header")
        try:
            tokens.append(int(data[start:pos]))
        except ValueError as exc:
            raise ParseError(f"{path}: bad PGM header token {data[start:pos]!r}") from exc
    pos += 1  # single whitespace byte separates header from raster

    cols, rows, maxval = tokens
    if cols <= 0 or rows <= 0 or not 0 < maxval < 65536:
        raise ParseError(f"{path}: invalid PGM dimensions {cols}x{rows} maxval {maxval}")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    expected = rows * cols * dtype.itemsize
    raster = data[pos : pos + expected]
    if len(raster) != expected:
        raise ParseError(f"{path}: PGM raster truncated ({len(raster)} of {expected} bytes)")
    array = np.frombuffer(raster, dtype=dtype).reshape(rows, cols)
    return array.astype(np.uint16 if maxval > 255 else np.uint8), maxval


def write_pgm(path: str | Path, array: np.ndarray, maxval: int | None = None) -> None:
    """Write a binary PGM; dtype is chosen from maxval (8-bit up to 255)."""
    array = np.asarray(array)
    if maxval is None:
        maxval = 255 if array.max(initial=0) <= 255 else 65535
    if not 0 < maxval < 65536:
        raise ValueError(f"maxval {maxval} out of range")
    rows, cols = array.shape
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    header = f"P5\n{cols} {rows}\n{maxval}\n".encode()
    Path(path).write_bytes(header + np.ascontiguousarray(array, dtype=dtype).tobytes())
