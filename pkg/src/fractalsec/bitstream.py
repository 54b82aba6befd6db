"""The .frc container: a fixed 25-byte header followed by an MSB-first bit payload.

Header (big-endian)::

    magic "FRC1" | version u8 | flags u8 | width u16 | height u16 |
    range_size u8 | domain_step u8 | bits_dx bits_dy bits_alpha bits_dg bits_iso u8 |
    max_depth u8 | iterations u8 | iv u16 | payload_bit_count u32

flags: bit0 parameters encrypted, bit1 quadtree partition, bit2 tree bits encrypted.
The payload holds the quadtree split flags (depth-first) and then, per leaf,
dx, dy, alpha_q, dg_sign, dg_mag, iso. The last byte is zero-padded.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .codec.decoder import DecodeError, leaf_count
from .model import ISO_BITS, PARAM_FIELDS, CodecConfig, ConfigError, FixedGrid, FractalCode, Quadtree
from .quantize import dequantize_alpha, dequantize_dg, quantize_alpha, quantize_dg

__all__ = [
    "MAGIC",
    "VERSION",
    "HEADER_SIZE",
    "FrcHeader",
    "BitstreamError",
    "BadMagicError",
    "UnsupportedVersionError",
    "HeaderError",
    "PayloadSizeError",
    "TruncatedPayloadError",
    "FieldOverflowError",
    "read_header",
    "pack",
    "unpack",
    "quantize_alpha",
    "dequantize_alpha",
    "quantize_dg",
    "dequantize_dg",
]

MAGIC = b"FRC1"
VERSION = 1
_HEADER = struct.Struct(">4sBBHHBBBBBBBBBHI")
HEADER_SIZE = _HEADER.size

FLAG_ENCRYPTED = 0x01
FLAG_QUADTREE = 0x02
FLAG_TREE_ENCRYPTED = 0x04


class BitstreamError(ValueError):
    pass


class BadMagicError(BitstreamError):
    pass


class UnsupportedVersionError(BitstreamError):
    pass


class HeaderError(BitstreamError):
    pass


class PayloadSizeError(BitstreamError):
    pass


class TruncatedPayloadError(BitstreamError):
    pass


class FieldOverflowError(BitstreamError):
    pass


@dataclass(frozen=True)
class FrcHeader:
    flags: int
    width: int
    height: int
    range_size: int
    domain_step: int
    bits_dx: int
    bits_dy: int
    bits_alpha: int
    bits_dg: int
    max_depth: int
    iterations: int
    iv: int
    payload_bit_count: int
    bits_iso: int = ISO_BITS
    version: int = VERSION

    @property
    def encrypted(self) -> bool:
        return bool(self.flags & FLAG_ENCRYPTED)

    @property
    def quadtree(self) -> bool:
        return bool(self.flags & FLAG_QUADTREE)

    @property
    def tree_encrypted(self) -> bool:
        return bool(self.flags & FLAG_TREE_ENCRYPTED)

    @property
    def bits_per_block(self) -> int:
        return self.bits_dx + self.bits_dy + self.bits_alpha + 1 + self.bits_dg + self.bits_iso

    def to_bytes(self) -> bytes:
        return _HEADER.pack(
            MAGIC, self.version, self.flags, self.width, self.height, self.range_size, self.domain_step,
            self.bits_dx, self.bits_dy, self.bits_alpha, self.bits_dg, self.bits_iso,
            self.max_depth, self.iterations, self.iv, self.payload_bit_count,
        )

    def config(self) -> CodecConfig:
        part = Quadtree(max_depth=self.max_depth) if self.quadtree else FixedGrid()
        try:
            return CodecConfig(
                range_size=self.range_size, domain_step=self.domain_step, bits_dx=self.bits_dx,
                bits_dy=self.bits_dy, bits_alpha=self.bits_alpha, bits_dg=self.bits_dg,
                partition=part, iterations=self.iterations,
            )
        except ConfigError as exc:
            raise HeaderError(f"invalid codec parameters in header: {exc}") from None

    def describe(self) -> dict:
        return {
            "version": self.version,
            "width": self.width,
            "height": self.height,
            "partition": f"quadtree (max depth {self.max_depth})" if self.quadtree else "fixed grid",
            "range_size": self.range_size,
            "domain_step": self.domain_step,
            "iterations": self.iterations,
            "encrypted": self.encrypted,
            "tree_encrypted": self.tree_encrypted,
            "iv": f"{self.iv:04x}" if self.encrypted else "-",
            "payload_bits": self.payload_bit_count,
            "bits": {
                "dx": self.bits_dx,
                "dy": self.bits_dy,
                "alpha": self.bits_alpha,
                "dg": f"{self.bits_dg}+1",
                "iso": self.bits_iso,
            },
            "bits_per_block": self.bits_per_block,
        }


def read_header(data: bytes) -> FrcHeader:
    if len(data) < 4 or data[:4] != MAGIC:
        raise BadMagicError(f"bad magic {bytes(data[:4])!r}, expected {MAGIC!r}")
    if len(data) < HEADER_SIZE:
        raise TruncatedPayloadError(f"header needs {HEADER_SIZE} bytes, got {len(data)}")
    (_, version, flags, width, height, range_size, domain_step, bdx, bdy, balpha, bdg, biso,
     max_depth, iterations, iv, nbits) = _HEADER.unpack_from(data)
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported version {version}")
    if biso != ISO_BITS:
        raise HeaderError(f"isometry field must be {ISO_BITS} bits, header says {biso}")
    if flags & ~(FLAG_ENCRYPTED | FLAG_QUADTREE | FLAG_TREE_ENCRYPTED):
        raise HeaderError(f"unknown flag bits 0x{flags:02x}")
    if not flags & FLAG_QUADTREE and max_depth != 0:
        raise HeaderError("fixed-grid files must declare max_depth 0")
    return FrcHeader(flags, width, height, range_size, domain_step, bdx, bdy, balpha, bdg,
                     max_depth, iterations, iv, nbits, biso, version)


def _field_matrix(code: FractalCode) -> np.ndarray:
    """(N, bits_per_block) bit matrix, MSB first within each field."""
    cfg = code.config
    cols = []
    for name in PARAM_FIELDS:
        width = cfg.field_bits(name)
        vals = getattr(code, name)
        if len(vals) and (vals.min() < 0 or vals.max() >= 1 << width):
            bad = int(vals[(vals < 0) | (vals >= 1 << width)][0])
            raise FieldOverflowError(f"{name} value {bad} does not fit in {width} bits")
        shifts = np.arange(width - 1, -1, -1)
        cols.append(((vals[:, None] >> shifts) & 1).astype(np.uint8))
    return np.concatenate(cols, axis=1)


def pack(code: FractalCode) -> bytes:
    cfg = code.config
    if code.tree_encrypted:
        raise BitstreamError("codes with encrypted tree bits cannot be serialized: the leaf count is unrecoverable")
    try:
        cfg.validate_for(code.width, code.height)
        leaves = leaf_count(code.width, code.height, cfg, code.tree_bits)
    except (ConfigError, DecodeError) as exc:
        raise BitstreamError(f"code is not serializable: {exc}") from None
    if leaves != len(code):
        raise BitstreamError(f"partition has {leaves} leaves but the code holds {len(code)} transforms")
    if code.encrypted and not 0 <= code.iv < 1 << 16:
        raise FieldOverflowError("iv does not fit in 16 bits")
    bits = np.concatenate([code.tree_bits.astype(np.uint8), _field_matrix(code).reshape(-1)])
    flags = (FLAG_ENCRYPTED if code.encrypted else 0) | (FLAG_QUADTREE if cfg.is_quadtree else 0)
    header = FrcHeader(
        flags, code.width, code.height, cfg.range_size, cfg.domain_step, cfg.bits_dx, cfg.bits_dy,
        cfg.bits_alpha, cfg.bits_dg, cfg.max_depth, cfg.iterations,
        code.iv if code.encrypted else 0, len(bits),
    )
    return header.to_bytes() + np.packbits(bits).tobytes()


def _read_tree(bits: np.ndarray, width: int, height: int, cfg: CodecConfig) -> int:
    """Number of leading payload bits taken by the split flags."""
    # flags are self-delimiting; replay them against the longest possible prefix
    top = (width // cfg.top_block_size) * (height // cfg.top_block_size)
    limit = min(len(bits), top * sum(4 ** d for d in range(cfg.max_depth)))
    pos = 0
    stack = [0] * top
    while stack:
        depth = stack.pop()
        if depth >= cfg.max_depth:
            continue
        if pos >= limit:
            raise PayloadSizeError("payload ends inside the quadtree flags")
        if bits[pos]:
            stack.extend([depth + 1] * 4)
        pos += 1
    return pos


def unpack(data: bytes) -> FractalCode:
    hdr = read_header(data)
    if hdr.tree_encrypted:
        raise HeaderError("tree bits are encrypted; this file cannot be parsed")
    cfg = hdr.config()
    try:
        cfg.validate_for(hdr.width, hdr.height)
    except ConfigError as exc:
        raise HeaderError(str(exc)) from None
    payload = data[HEADER_SIZE:]
    need = (hdr.payload_bit_count + 7) // 8
    if len(payload) < need:
        raise TruncatedPayloadError(
            f"header declares {hdr.payload_bit_count} payload bits but only {len(payload)} bytes follow"
        )
    if len(payload) > need:
        raise PayloadSizeError(f"{len(payload) - need} trailing bytes after the payload")
    bits = np.unpackbits(np.frombuffer(payload, dtype=np.uint8))
    if bits[hdr.payload_bit_count:].any():
        raise PayloadSizeError("non-zero padding bits")
    bits = bits[: hdr.payload_bit_count]

    n_tree = _read_tree(bits, hdr.width, hdr.height, cfg) if cfg.is_quadtree else 0
    tree_bits = bits[:n_tree]
    leaves = leaf_count(hdr.width, hdr.height, cfg, tree_bits)
    per_block = cfg.bits_per_block
    expected = n_tree + leaves * per_block
    if expected != hdr.payload_bit_count:
        raise PayloadSizeError(f"payload_bit_count {hdr.payload_bit_count} disagrees with the layout ({expected} bits)")
    matrix = bits[n_tree:].reshape(leaves, per_block).astype(np.int64)
    cols = {}
    pos = 0
    for name in PARAM_FIELDS:
        width = cfg.field_bits(name)
        weights = 1 << np.arange(width - 1, -1, -1, dtype=np.int64)
        cols[name] = matrix[:, pos : pos + width] @ weights
        pos += width
    return FractalCode(
        hdr.width, hdr.height, cfg, tree_bits=tree_bits, encrypted=hdr.encrypted,
        iv=hdr.iv if hdr.encrypted else None, **cols,
    )
