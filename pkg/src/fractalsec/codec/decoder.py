"""Iterated decoding of a fractal code."""
from __future__ import annotations

import numpy as np

from ..imaging import GrayImage
from ..model import CodecConfig, FractalCode
from .blocks import gather_index, isometry_permutation, pair_sums
from .encoder import Region, _grid

__all__ = ["DecodeError", "quadtree_leaves", "leaf_regions", "leaf_count", "decode", "decode_iterates"]


class DecodeError(ValueError):
    pass


def quadtree_leaves(width: int, height: int, cfg: CodecConfig, tree_bits, strict: bool = True) -> list[Region]:
    """Replay split flags depth-first. Non-strict mode reads missing flags as 0 and ignores extras."""
    bits = [int(b) for b in np.asarray(tree_bits).reshape(-1)]
    depth_max = cfg.max_depth
    pos = 0
    leaves: list[Region] = []

    def visit(reg: Region, depth: int):
        nonlocal pos
        flag = 0
        if depth < depth_max:
            if pos < len(bits):
                flag = bits[pos]
            elif strict:
                raise DecodeError("tree bits exhausted before the quadtree was complete")
            pos += 1
        if flag:
            h = reg.size // 2
            for child in (Region(reg.x, reg.y, h), Region(reg.x + h, reg.y, h),
                          Region(reg.x, reg.y + h, h), Region(reg.x + h, reg.y + h, h)):
                visit(child, depth + 1)
        else:
            leaves.append(reg)

    for top in _grid(width, height, cfg.top_block_size):
        visit(top, 0)
    if strict and pos != len(bits):
        raise DecodeError(f"{len(bits) - pos} unused tree bits")
    return leaves


def leaf_regions(code: FractalCode, strict: bool = True) -> list[Region]:
    cfg = code.config
    if cfg.is_quadtree:
        return quadtree_leaves(code.width, code.height, cfg, code.tree_bits, strict)
    return _grid(code.width, code.height, cfg.range_size)


def leaf_count(width: int, height: int, cfg: CodecConfig, tree_bits=()) -> int:
    if cfg.is_quadtree:
        return len(quadtree_leaves(width, height, cfg, tree_bits))
    return (width // cfg.range_size) * (height // cfg.range_size)


class _Group:
    """Precomputed gather/scatter indices for all leaves of one size."""

    def __init__(self, code: FractalCode, regions: list[Region], pidx: np.ndarray, strict: bool):
        cfg = code.config
        w, h = code.width, code.height
        size = regions[0].size
        nx, ny = cfg.domain_grid(w, h, size)
        step = cfg.domain_step_for(size)
        dx, dy = code.dx[pidx], code.dy[pidx]
        bad = (dx >= nx) | (dy >= ny) | (dx < 0) | (dy < 0)
        if strict and bad.any():
            i = int(pidx[np.argmax(bad)])
            raise DecodeError(
                f"block {i} references domain ({int(code.dx[i])}, {int(code.dy[i])}) outside the {nx}x{ny} pool"
            )
        dx, dy = dx % nx, dy % ny
        src = gather_index(dy * step, dx * step, size, w - 1)
        perms = np.stack([isometry_permutation(size, k) for k in range(8)])
        self.src = np.take_along_axis(src, perms[code.iso[pidx] & 7], axis=1)
        ry = np.array([r.y for r in regions])[:, None, None] + np.arange(size)[None, :, None]
        rx = np.array([r.x for r in regions])[:, None, None] + np.arange(size)[None, None, :]
        self.dst = (ry * w + rx).reshape(len(regions), -1)
        self.alpha = (code.alpha_q[pidx] / float(1 << cfg.bits_alpha))[:, None] / 4.0
        self.dg = code.dg_values()[pidx].astype(np.float64)[:, None]


def _prepare(code: FractalCode, strict: bool, allow_encrypted: bool) -> list[_Group]:
    if code.encrypted and not allow_encrypted:
        raise DecodeError("code is encrypted; decrypt it first")
    if len(code) == 0:
        raise DecodeError("code has no transforms")
    regions = leaf_regions(code, strict)
    if strict and len(regions) != len(code):
        raise DecodeError(f"partition has {len(regions)} leaves but the code holds {len(code)} transforms")
    pidx = np.arange(len(regions)) % len(code)
    by_size: dict[int, list[int]] = {}
    for i, reg in enumerate(regions):
        by_size.setdefault(reg.size, []).append(i)
    return [_Group(code, [regions[i] for i in idx], pidx[idx], strict) for idx in by_size.values()]


def decode_iterates(
    code: FractalCode,
    initial: GrayImage | None = None,
    iterations: int | None = None,
    *,
    strict: bool = True,
    allow_encrypted: bool = False,
):
    """Yield the image after each decoding pass."""
    groups = _prepare(code, strict, allow_encrypted)
    if initial is None:
        cur = np.full((code.height, code.width), 128, dtype=np.uint8)
    else:
        if (initial.width, initial.height) != (code.width, code.height):
            raise DecodeError("initial image size does not match the code")
        cur = initial.pixels.copy()
    n_iter = code.config.iterations if iterations is None else iterations
    for _ in range(n_iter):
        q = pair_sums(cur).reshape(-1)
        nxt = np.empty(code.width * code.height, dtype=np.uint8)
        for g in groups:
            vals = g.alpha * q[g.src] + g.dg
            # blocks read only the previous pass, so update order is irrelevant
            nxt[g.dst] = np.floor(np.clip(vals, 0.0, 255.0) + 0.5)
        cur = nxt.reshape(code.height, code.width)
        yield GrayImage(cur)


def decode(
    code: FractalCode,
    initial: GrayImage | None = None,
    iterations: int | None = None,
    *,
    strict: bool = True,
    allow_encrypted: bool = False,
) -> GrayImage:
    out = None
    for out in decode_iterates(code, initial, iterations, strict=strict, allow_encrypted=allow_encrypted):
        pass
    return out
