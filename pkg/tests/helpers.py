"""Shared fixtures-in-functions for the test modules."""
from functools import lru_cache
from importlib.resources import files

import numpy as np

from fractalsec.codec import encode, leaf_count
from fractalsec.imaging import GrayImage, read_pgm
from fractalsec.model import CodecConfig, FractalCode, Quadtree

KEY_HEX = "0123 4567 890A BCDE 0123 4567 890A BCDE"
WRONG_KEY_HEX = "0123 4567 890A BCDE 0123 4567 890A BCDF"
NATURAL_256 = ("camera_256", "astronaut_256", "chelsea_256")


@lru_cache(maxsize=None)
def bundled(name: str) -> GrayImage:
    return read_pgm(files("fractalsec").joinpath("data", name + ".pgm"))


@lru_cache(maxsize=None)
def bundled_code(name: str, cfg: CodecConfig = CodecConfig()) -> FractalCode:
    return encode(bundled(name), cfg)


def random_image(rng: np.random.Generator, width: int, height: int, kind: str = "uniform") -> GrayImage:
    if kind == "uniform":
        px = rng.integers(0, 256, (height, width))
    elif kind == "binary":
        px = rng.choice([0, 255], (height, width))
    elif kind == "few":
        px = rng.choice(rng.integers(0, 256, 3), (height, width))
    elif kind == "gradient":
        yy, xx = np.mgrid[:height, :width]
        px = (xx * rng.integers(1, 9) + yy * rng.integers(0, 9) + rng.integers(0, 50)) % 256
    else:
        px = np.full((height, width), rng.integers(0, 256))
    return GrayImage(px.astype(np.uint8))


def _random_tree(rng, depth_left: int, bits: list) -> int:
    if depth_left == 0:
        return 1
    split = int(rng.integers(0, 2))
    bits.append(split)
    if not split:
        return 1
    return sum(_random_tree(rng, depth_left - 1, bits) for _ in range(4))


def random_code(rng: np.random.Generator, cfg: CodecConfig, width: int, height: int) -> FractalCode:
    """A structurally valid code with uniformly random parameters."""
    tree = []
    if cfg.is_quadtree:
        top = cfg.top_block_size
        n = sum(_random_tree(rng, cfg.max_depth, tree) for _ in range((width // top) * (height // top)))
    else:
        n = leaf_count(width, height, cfg)
    nx, ny = cfg.domain_grid(width, height, cfg.top_block_size if cfg.is_quadtree else None)
    cols = {
        "dx": rng.integers(0, nx, n),
        "dy": rng.integers(0, ny, n),
        "alpha_q": rng.integers(0, 1 << cfg.bits_alpha, n),
        "dg_sign": rng.integers(0, 2, n),
        "dg_mag": rng.integers(0, 1 << cfg.bits_dg, n),
        "iso": rng.integers(0, 8, n),
    }
    return FractalCode(width, height, cfg, tree_bits=np.array(tree, dtype=np.uint8), **cols)


def random_config(rng: np.random.Generator) -> CodecConfig:
    quad = bool(rng.integers(0, 2))
    return CodecConfig(
        range_size=int(rng.choice([2, 4])),
        domain_step=int(rng.choice([2, 4, 8])),
        bits_dx=7,
        bits_dy=7,
        bits_alpha=int(rng.integers(1, 9)),
        bits_dg=int(rng.integers(1, 10)),
        partition=Quadtree(max_depth=int(rng.integers(1, 3))) if quad else CodecConfig().partition,
    )


ACCEPTANCE_LINES: list[str] = []


def report(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)
