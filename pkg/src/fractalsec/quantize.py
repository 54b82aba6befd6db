"""Scalar quantizers for the contrast scaling and luminance offset."""
from __future__ import annotations

import math

__all__ = ["round_half_away", "quantize_alpha", "dequantize_alpha", "quantize_dg", "dequantize_dg"]


def round_half_away(x: float) -> int:
    r = math.floor(abs(x) + 0.5)
    return -r if x < 0 else r


def quantize_alpha(alpha: float, bits: int) -> int:
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    return min(round_half_away(alpha * (1 << bits)), (1 << bits) - 1)


def dequantize_alpha(index: int, bits: int) -> float:
    # divisor 2**bits keeps the largest level strictly below 1
    return index / (1 << bits)


def quantize_dg(dg: float, bits_mag: int) -> tuple[int, int]:
    sign = 1 if dg < 0 else 0
    mag = min(round_half_away(abs(dg)), (1 << bits_mag) - 1)
    return sign, mag


def dequantize_dg(sign: int, mag: int) -> int:
    return -mag if sign else mag
