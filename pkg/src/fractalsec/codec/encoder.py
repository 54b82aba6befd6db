"""Partitioning and encoding."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..imaging import GrayImage
from ..model import BlockTransform, CodecConfig, FractalCode
from .search import CandidateSet, MatchResult, best_matches

__all__ = ["Region", "partition", "match_block", "encode"]


@dataclass(frozen=True)
class Region:
    x: int
    y: int
    size: int


def _blocks(pixels: np.ndarray, regions: list[Region], size: int) -> np.ndarray:
    out = np.empty((len(regions), size * size), dtype=np.int64)
    for i, reg in enumerate(regions):
        out[i] = pixels[reg.y : reg.y + size, reg.x : reg.x + size].reshape(-1)
    return out


def _grid(width: int, height: int, size: int) -> list[Region]:
    return [Region(x, y, size) for y in range(0, height, size) for x in range(0, width, size)]


class _Matcher:
    def __init__(self, pixels: np.ndarray, cfg: CodecConfig):
        self.pixels = pixels
        self.cfg = cfg
        self._cands: dict[int, CandidateSet] = {}

    def candidates(self, size: int) -> CandidateSet:
        if size not in self._cands:
            self._cands[size] = CandidateSet(self.pixels, self.cfg, size)
        return self._cands[size]

    def match(self, regions: list[Region], size: int) -> MatchResult:
        cfg = self.cfg
        return best_matches(self.candidates(size), _blocks(self.pixels, regions, size), cfg.bits_alpha, cfg.bits_dg)


def _plan(img: GrayImage, cfg: CodecConfig):
    """Leaf regions, split flags and the matching for each leaf."""
    cfg.validate_for(img.width, img.height)
    matcher = _Matcher(img.pixels, cfg)
    if not cfg.is_quadtree:
        regions = _grid(img.width, img.height, cfg.range_size)
        return regions, np.zeros(0, dtype=np.uint8), matcher.match(regions, cfg.range_size)

    depth_max = cfg.max_depth
    threshold = cfg.partition.split_threshold
    found: dict[Region, tuple] = {}
    split: set[Region] = set()
    level = _grid(img.width, img.height, cfg.top_block_size)
    for depth in range(depth_max + 1):
        size = cfg.top_block_size >> depth
        res = matcher.match(level, size)
        mse = res.mse
        nxt = []
        for i, reg in enumerate(level):
            found[reg] = (res, i)
            if depth < depth_max and mse[i] > threshold:
                split.add(reg)
                h = size // 2
                nxt += [Region(reg.x, reg.y, h), Region(reg.x + h, reg.y, h),
                        Region(reg.x, reg.y + h, h), Region(reg.x + h, reg.y + h, h)]
        level = nxt
        if not level:
            break

    bits: list[int] = []
    leaves: list[Region] = []

    def visit(reg: Region, depth: int):
        if depth < depth_max:
            bits.append(1 if reg in split else 0)
        if reg in split:
            h = reg.size // 2
            for child in (Region(reg.x, reg.y, h), Region(reg.x + h, reg.y, h),
                          Region(reg.x, reg.y + h, h), Region(reg.x + h, reg.y + h, h)):
                visit(child, depth + 1)
        else:
            leaves.append(reg)

    for top in _grid(img.width, img.height, cfg.top_block_size):
        visit(top, 0)
    return leaves, np.array(bits, dtype=np.uint8), [found[r] for r in leaves]


def partition(img: GrayImage, cfg: CodecConfig) -> tuple[list[Region], np.ndarray]:
    """Leaf range blocks in coding order and the quadtree split flags (empty for a fixed grid)."""
    regions, tree_bits, _ = _plan(img, cfg)
    return regions, tree_bits


def match_block(range_block: np.ndarray, img: GrayImage, cfg: CodecConfig) -> tuple[BlockTransform, float]:
    """Best (domain, isometry, alpha, dg) for one square range block, and its MSE."""
    block = np.asarray(range_block)
    size = block.shape[0]
    if block.shape != (size, size):
        raise ValueError("range block must be square")
    cands = CandidateSet(img.pixels, cfg, size)
    res = best_matches(cands, block.astype(np.int64).reshape(1, -1), cfg.bits_alpha, cfg.bits_dg)
    t = BlockTransform(int(res.dx[0]), int(res.dy[0]), int(res.alpha_q[0]),
                       int(res.dg_sign[0]), int(res.dg_mag[0]), int(res.iso[0]))
    return t, float(res.mse[0])


def encode(img: GrayImage, cfg: CodecConfig | None = None) -> FractalCode:
    cfg = CodecConfig() if cfg is None else cfg
    regions, tree_bits, matched = _plan(img, cfg)
    names = ("dx", "dy", "alpha_q", "dg_sign", "dg_mag", "iso")
    if not cfg.is_quadtree:
        cols = {name: getattr(matched, name) for name in names}
    else:
        per_level = {}
        for res, _ in matched:
            if id(res) not in per_level:
                per_level[id(res)] = {name: getattr(res, name) for name in names}
        cols = {
            name: np.array([per_level[id(res)][name][i] for res, i in matched], dtype=np.int64)
            for name in names
        }
    return FractalCode(img.width, img.height, cfg, tree_bits=tree_bits, **cols)
