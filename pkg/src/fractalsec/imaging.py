"""Grayscale rasters, binary PGM I/O and the MSE/PSNR quality metrics."""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = ["GrayImage", "PgmError", "load_pgm", "save_pgm", "read_pgm", "write_pgm", "mse", "psnr"]


class PgmError(ValueError):
    """Malformed PGM data. ``offset`` is the byte position where parsing failed."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


@dataclass(frozen=True, eq=False)
class GrayImage:
    """8-bit single channel image, stored row-major as an (height, width) uint8 array."""

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.pixels)
        if arr.ndim != 2 or arr.size == 0:
            raise ValueError(f"expected a non-empty 2-D pixel array, got shape {arr.shape}")
        if arr.dtype != np.uint8:
            if np.issubdtype(arr.dtype, np.floating) and not np.all(np.isfinite(arr)):
                raise ValueError("pixel values must be finite")
            if arr.min() < 0 or arr.max() > 255 or not np.array_equal(arr, np.round(arr)):
                raise ValueError("pixel values must be integers in [0, 255]")
            arr = arr.astype(np.uint8)
        arr = np.array(arr, dtype=np.uint8, copy=True)
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @classmethod
    def filled(cls, width: int, height: int, value: int) -> "GrayImage":
        return cls(np.full((height, width), value, dtype=np.uint8))

    def __eq__(self, other):
        if not isinstance(other, GrayImage):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and np.array_equal(self.pixels, other.pixels)

    def __hash__(self):
        return hash((self.pixels.shape, self.pixels.tobytes()))

    def __repr__(self):
        return f"GrayImage({self.width}x{self.height})"


_WHITESPACE = b" \t\r\n\v\f"


def _next_token(data: bytes, pos: int) -> tuple[bytes, int, int]:
    """Return (token, start, end) skipping whitespace and '#' comments."""
    n = len(data)
    while pos < n:
        c = data[pos : pos + 1]
        if c in (b"#",):
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif c in _WHITESPACE:
            pos += 1
        else:
            break
    start = pos
    while pos < n and data[pos : pos + 1] not in _WHITESPACE and data[pos : pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise PgmError("truncated header", start)
    return data[start:pos], start, pos


def _header_int(data: bytes, pos: int, what: str) -> tuple[int, int]:
    tok, start, end = _next_token(data, pos)
    if not tok.isdigit():
        raise PgmError(f"invalid {what} {tok!r}", start)
    return int(tok), end


def load_pgm(data: bytes) -> GrayImage:
    if data[:2] != b"P5":
        raise PgmError(f"bad magic {data[:2]!r}, expected b'P5'", 0)
    pos = 2
    if pos >= len(data) or data[pos : pos + 1] not in _WHITESPACE + b"#":
        raise PgmError("missing whitespace after magic", pos)
    width, pos = _header_int(data, pos, "width")
    height, pos = _header_int(data, pos, "height")
    maxval_start = pos
    maxval, pos = _header_int(data, pos, "maxval")
    if width == 0 or height == 0:
        raise PgmError("zero image dimension", maxval_start)
    if maxval != 255:
        raise PgmError(f"unsupported maxval {maxval}, only 255 is accepted", maxval_start)
    # exactly one whitespace byte separates the header from the raster
    if pos >= len(data) or data[pos : pos + 1] not in _WHITESPACE:
        raise PgmError("missing whitespace before pixel data", pos)
    pos += 1
    need = width * height
    payload = data[pos : pos + need]
    if len(payload) < need:
        raise PgmError(f"truncated pixel payload: need {need} bytes, got {len(payload)}", pos + len(payload))
    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(height, width)
    return GrayImage(pixels)


def save_pgm(img: GrayImage) -> bytes:
    return b"P5\n%d %d\n255\n" % (img.width, img.height) + img.pixels.tobytes()


def read_pgm(path) -> GrayImage:
    return load_pgm(Path(path).read_bytes())


def write_pgm(path, img: GrayImage) -> None:
    Path(path).write_bytes(save_pgm(img))


def _check_same_shape(a: GrayImage, b: GrayImage) -> None:
    if a.pixels.shape != b.pixels.shape:
        raise ValueError(f"dimension mismatch: {a.width}x{a.height} vs {b.width}x{b.height}")


def mse(a: GrayImage, b: GrayImage) -> float:
    _check_same_shape(a, b)
    diff = a.pixels.astype(np.float64) - b.pixels.astype(np.float64)
    return float(np.mean(diff * diff))


def psnr(a: GrayImage, b: GrayImage) -> float:
    """PSNR in dB; ``math.inf`` for identical images."""
    err = mse(a, b)
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(255.0 ** 2 / err)
