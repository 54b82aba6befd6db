"""Block-based fractal encoder and decoder."""
from .blocks import (
    ISOMETRY_NAMES,
    apply_isometry,
    domain_pool,
    downsample,
    fit_affine,
    inverse_isometry,
)
from .decoder import DecodeError, decode, decode_iterates, leaf_count, leaf_regions, quadtree_leaves
from .encoder import Region, encode, match_block, partition

__all__ = [
    "ISOMETRY_NAMES",
    "apply_isometry",
    "inverse_isometry",
    "downsample",
    "fit_affine",
    "domain_pool",
    "Region",
    "partition",
    "match_block",
    "encode",
    "DecodeError",
    "decode",
    "decode_iterates",
    "leaf_regions",
    "leaf_count",
    "quadtree_leaves",
]
