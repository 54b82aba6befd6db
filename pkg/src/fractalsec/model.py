"""Configuration and parameter containers shared by the codec, bitstream and cipher layers."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterator, NamedTuple, Union

import numpy as np

__all__ = [
    "FixedGrid",
    "Quadtree",
    "CodecConfig",
    "ConfigError",
    "BlockTransform",
    "FractalCode",
    "PARAM_FIELDS",
    "PRESETS",
    "preset",
]

# per-block payload order in the bitstream
PARAM_FIELDS = ("dx", "dy", "alpha_q", "dg_sign", "dg_mag", "iso")
ISO_BITS = 3


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class FixedGrid:
    pass


@dataclass(frozen=True)
class Quadtree:
    max_depth: int = 2
    # encoder-only knob, never serialized
    split_threshold: float = field(default=64.0, compare=False)

    def __post_init__(self):
        if not 1 <= self.max_depth <= 4:
            raise ConfigError("quadtree max_depth must be in [1, 4]")
        if math.isnan(self.split_threshold) or self.split_threshold < 0:
            raise ConfigError("split_threshold must be a non-negative MSE")


PartitionMode = Union[FixedGrid, Quadtree]


@dataclass(frozen=True)
class CodecConfig:
    range_size: int = 4
    domain_step: int = 4
    bits_dx: int = 7
    bits_dy: int = 7
    bits_alpha: int = 6
    bits_dg: int = 8
    partition: PartitionMode = FixedGrid()
    iterations: int = 10

    def __post_init__(self):
        if self.range_size < 2:
            raise ConfigError("range_size must be >= 2")
        if self.domain_step < 1:
            raise ConfigError("domain_step must be >= 1")
        for name in ("bits_dx", "bits_dy", "bits_alpha", "bits_dg"):
            bits = getattr(self, name)
            if not 1 <= bits <= 16:
                raise ConfigError(f"{name} must be in [1, 16], got {bits}")
        if self.bits_alpha > 12:
            # keeps the integer block search inside int64
            raise ConfigError("bits_alpha must be <= 12")
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1")
        if self.range_size > 255 or self.domain_step > 255 or self.iterations > 255:
            raise ConfigError("range_size, domain_step and iterations must fit in one byte")

    @property
    def is_quadtree(self) -> bool:
        return isinstance(self.partition, Quadtree)

    @property
    def max_depth(self) -> int:
        return self.partition.max_depth if self.is_quadtree else 0

    @property
    def top_block_size(self) -> int:
        return self.range_size << self.max_depth

    @property
    def bits_per_block(self) -> int:
        return self.bits_dx + self.bits_dy + self.bits_alpha + 1 + self.bits_dg + ISO_BITS

    @property
    def word_bits(self) -> int:
        """Width of the alpha|dg word the cipher works on."""
        return self.bits_alpha + 1 + self.bits_dg

    def field_bits(self, name: str) -> int:
        return {
            "dx": self.bits_dx,
            "dy": self.bits_dy,
            "alpha_q": self.bits_alpha,
            "dg_sign": 1,
            "dg_mag": self.bits_dg,
            "iso": ISO_BITS,
        }[name]

    def domain_step_for(self, size: int) -> int:
        # quadtree levels above the leaf size use a proportionally coarser domain lattice
        return self.domain_step * (size // self.range_size)

    def domain_grid(self, width: int, height: int, size: int | None = None) -> tuple[int, int]:
        """Number of domain positions (horizontal, vertical) for range blocks of side ``size``."""
        size = self.range_size if size is None else size
        step = self.domain_step_for(size)
        if 2 * size > width or 2 * size > height:
            raise ConfigError(f"domain block side {2 * size} exceeds image {width}x{height}")
        return (width - 2 * size) // step + 1, (height - 2 * size) // step + 1

    def validate_for(self, width: int, height: int) -> None:
        top = self.top_block_size
        if width % top or height % top:
            raise ConfigError(f"image {width}x{height} is not divisible into {top}x{top} blocks")
        nx, ny = self.domain_grid(width, height)
        if nx > 1 << self.bits_dx or ny > 1 << self.bits_dy:
            raise ConfigError(
                f"{nx}x{ny} domain positions do not fit in {self.bits_dx}+{self.bits_dy} position bits"
            )
        if width > 0xFFFF or height > 0xFFFF:
            raise ConfigError("image dimensions must fit in 16 bits")


PRESETS = {
    "default": CodecConfig(),
    # 2x2 ranges with a 127x127 domain lattice on 256x256 images
    "paper-2x2": CodecConfig(range_size=2, domain_step=2),
    # a 64x64 grid of 4x4 ranges on 256x256, 5+5 position bits, 5-bit alpha, 7-bit offset
    "paper-fig2": CodecConfig(range_size=4, domain_step=8, bits_dx=5, bits_dy=5, bits_alpha=5, bits_dg=7),
}


def preset(name: str) -> CodecConfig:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None


class BlockTransform(NamedTuple):
    dx: int
    dy: int
    alpha_q: int
    dg_sign: int
    dg_mag: int
    iso: int


def _frozen_array(values, dtype=np.int64) -> np.ndarray:
    arr = np.array(values, dtype=dtype).reshape(-1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class FractalCode:
    """The full transform set of an encoded image.

    Per-block parameters are held column-wise (one integer array per field) in
    partition order; ``transforms`` gives the row view.
    """

    width: int
    height: int
    config: CodecConfig
    dx: np.ndarray
    dy: np.ndarray
    alpha_q: np.ndarray
    dg_sign: np.ndarray
    dg_mag: np.ndarray
    iso: np.ndarray
    tree_bits: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.uint8))
    encrypted: bool = False
    iv: int | None = None
    tree_encrypted: bool = False

    def __post_init__(self):
        for name in PARAM_FIELDS:
            object.__setattr__(self, name, _frozen_array(getattr(self, name)))
        object.__setattr__(self, "tree_bits", _frozen_array(self.tree_bits, np.uint8))
        n = len(self.dx)
        if any(len(getattr(self, name)) != n for name in PARAM_FIELDS):
            raise ValueError("parameter arrays must have equal length")
        if self.encrypted and self.iv is None:
            raise ValueError("an encrypted code must carry its initial vector")
        if self.tree_bits.size and not self.config.is_quadtree:
            raise ValueError("tree bits only exist in quadtree mode")

    @classmethod
    def from_transforms(cls, width, height, config, transforms, **kw) -> "FractalCode":
        rows = np.array([tuple(t) for t in transforms], dtype=np.int64).reshape(-1, len(PARAM_FIELDS))
        cols = {name: rows[:, i] for i, name in enumerate(PARAM_FIELDS)}
        return cls(width, height, config, **cols, **kw)

    def __len__(self) -> int:
        return len(self.dx)

    @property
    def transforms(self) -> list[BlockTransform]:
        return [BlockTransform(*map(int, row)) for row in zip(*(getattr(self, f) for f in PARAM_FIELDS))]

    def __iter__(self) -> Iterator[BlockTransform]:
        return iter(self.transforms)

    def params(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAM_FIELDS}

    def with_params(self, **changes) -> "FractalCode":
        return replace(self, **changes)

    def dg_values(self) -> np.ndarray:
        """Dequantized signed luminance offsets."""
        return np.where(self.dg_sign == 1, -self.dg_mag, self.dg_mag)

    def alpha_values(self) -> np.ndarray:
        return self.alpha_q / float(1 << self.config.bits_alpha)

    def __eq__(self, other):
        if not isinstance(other, FractalCode):
            return NotImplemented
        return (
            (self.width, self.height, self.config, self.encrypted, self.iv, self.tree_encrypted)
            == (other.width, other.height, other.config, other.encrypted, other.iv, other.tree_encrypted)
            and np.array_equal(self.tree_bits, other.tree_bits)
            and all(np.array_equal(getattr(self, f), getattr(other, f)) for f in PARAM_FIELDS)
        )

    def __repr__(self):
        flag = ", encrypted" if self.encrypted else ""
        return f"FractalCode({self.width}x{self.height}, {len(self)} blocks{flag})"
