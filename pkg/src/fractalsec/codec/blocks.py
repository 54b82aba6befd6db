"""Block-level primitives: the eight isometries, 2x2 averaging, least-squares affine fit."""
from __future__ import annotations

import numpy as np

from ..imaging import GrayImage
from ..model import CodecConfig

__all__ = [
    "ISOMETRY_NAMES",
    "apply_isometry",
    "inverse_isometry",
    "isometry_permutation",
    "downsample",
    "fit_affine",
    "domain_pool",
]

ISOMETRY_NAMES = (
    "identity",
    "flip about horizontal axis",
    "flip about vertical axis",
    "reflect about main diagonal",
    "reflect about anti-diagonal",
    "rotate 90 clockwise",
    "rotate 180",
    "rotate 90 counterclockwise",
)

_INVERSE = (0, 1, 2, 3, 4, 7, 6, 5)


def apply_isometry(block: np.ndarray, iso: int) -> np.ndarray:
    """Apply isometry ``iso`` (0..7) to the last two axes of ``block``.

    Row index grows downward. Code 5 is ``out[r, c] = in[B-1-c, r]``,
    code 7 is ``out[r, c] = in[c, B-1-r]``.
    """
    b = np.asarray(block)
    if b.shape[-1] != b.shape[-2]:
        raise ValueError("isometries apply to square blocks")
    if iso == 0:
        return b.copy()
    if iso == 1:
        return b[..., ::-1, :].copy()
    if iso == 2:
        return b[..., :, ::-1].copy()
    if iso == 3:
        return np.swapaxes(b, -1, -2).copy()
    if iso == 4:
        return np.swapaxes(b, -1, -2)[..., ::-1, ::-1].copy()
    if iso == 5:
        return np.swapaxes(b, -1, -2)[..., :, ::-1].copy()
    if iso == 6:
        return b[..., ::-1, ::-1].copy()
    if iso == 7:
        return np.swapaxes(b, -1, -2)[..., ::-1, :].copy()
    raise ValueError(f"isometry code must be in 0..7, got {iso}")


def inverse_isometry(iso: int) -> int:
    return _INVERSE[iso]


def isometry_permutation(size: int, iso: int) -> np.ndarray:
    """Flat source index for each output pixel of a ``size`` x ``size`` block."""
    return apply_isometry(np.arange(size * size).reshape(size, size), iso).reshape(-1)


def downsample(block: np.ndarray) -> np.ndarray:
    b = np.asarray(block, dtype=np.float64)
    h, w = b.shape[-2:]
    if h % 2 or w % 2:
        raise ValueError("downsampling needs an even block side")
    return b.reshape(*b.shape[:-2], h // 2, 2, w // 2, 2).mean(axis=(-3, -1))


def fit_affine(range_block: np.ndarray, domain_ds: np.ndarray) -> tuple[float, float, float]:
    """Least-squares ``range ~ alpha * domain + dg`` with alpha clamped to [0, 1].

    Returns (alpha, dg, mse). A flat domain gets alpha = 0.
    """
    r = np.asarray(range_block, dtype=np.float64).reshape(-1)
    d = np.asarray(domain_ds, dtype=np.float64).reshape(-1)
    if r.shape != d.shape:
        raise ValueError("range and domain blocks differ in size")
    dm, rm = d.mean(), r.mean()
    var = np.mean((d - dm) ** 2)
    if var == 0.0:
        alpha = 0.0
    else:
        alpha = float(np.clip(np.mean((d - dm) * (r - rm)) / var, 0.0, 1.0))
    dg = float(rm - alpha * dm)
    err = float(np.mean((alpha * d + dg - r) ** 2))
    return alpha, dg, err


def domain_pool(img: GrayImage, cfg: CodecConfig, size: int | None = None) -> list[tuple[int, int]]:
    """Domain block origins as (x, y), raster order (y outer)."""
    size = cfg.range_size if size is None else size
    nx, ny = cfg.domain_grid(img.width, img.height, size)
    step = cfg.domain_step_for(size)
    return [(j * step, i * step) for i in range(ny) for j in range(nx)]


def pair_sums(pixels: np.ndarray) -> np.ndarray:
    """Sum of every 2x2 neighbourhood; entry (y, x) covers rows y..y+1, cols x..x+1."""
    p = pixels.astype(np.int64)
    return p[:-1, :-1] + p[1:, :-1] + p[:-1, 1:] + p[1:, 1:]


def gather_index(origins_y, origins_x, size: int, stride: int) -> np.ndarray:
    """Flat indices into a pair-sum image of row stride ``stride`` for downsampled blocks."""
    steps = 2 * np.arange(size)
    rows = np.asarray(origins_y)[:, None, None] + steps[None, :, None]
    cols = np.asarray(origins_x)[:, None, None] + steps[None, None, :]
    return (rows * stride + cols).reshape(len(origins_y), size * size)
