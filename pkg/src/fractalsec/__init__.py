"""Fractal image codec with selective chained encryption of the contrast/offset parameters."""
from .bitstream import pack, read_header, unpack
from .codec import decode, encode, match_block
from .crypt import CipherKey, brute_force_exponent, decrypt_params, encrypt_params
from .imaging import GrayImage, load_pgm, mse, psnr, read_pgm, save_pgm, write_pgm
from .model import CodecConfig, FixedGrid, FractalCode, Quadtree, preset

__version__ = "0.1.0"

__all__ = [
    "GrayImage",
    "load_pgm",
    "save_pgm",
    "read_pgm",
    "write_pgm",
    "mse",
    "psnr",
    "CodecConfig",
    "FixedGrid",
    "Quadtree",
    "FractalCode",
    "preset",
    "encode",
    "decode",
    "match_block",
    "pack",
    "unpack",
    "read_header",
    "CipherKey",
    "encrypt_params",
    "decrypt_params",
    "brute_force_exponent",
]
