"""Selective encryption of the contrast/offset words with a chained stream-cipher mode.

For N range blocks the plaintext words are ``X_i = alpha_q | dg_sign | dg_mag``
(alpha in the high bits). Encryption and decryption are::

    Y_0 = E(X_0 ^ V_0),  Y_i = E(X_i ^ Y_{i-1})
    X_0 = D(Y_0) ^ V_0,  X_i = D(Y_i) ^ Y_{i-1}

with ``E(w) = D(w) = w ^ k_i`` and ``k_i`` the i-th word-sized slice of one RC4
keystream. Domain positions and isometries stay in the clear, so the packed
file keeps its exact layout and length.
"""
from __future__ import annotations

import secrets
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np
from cryptography.hazmat.decrepit.ciphers.algorithms import ARC4
from cryptography.hazmat.primitives.ciphers import Cipher

from .model import FractalCode

__all__ = [
    "CryptError",
    "KeyFormatError",
    "CipherKey",
    "parse_iv",
    "random_iv",
    "iv_bits",
    "rc4_keystream",
    "keystream",
    "keystream_words",
    "chain_encrypt",
    "chain_decrypt",
    "param_words",
    "encrypt_fields",
    "encrypt_params",
    "decrypt_params",
    "brute_force_exponent",
    "FIELD_GROUPS",
]

# selectable parameter groups, high bits first within a word
FIELD_GROUPS = {
    "alpha": ("alpha_q",),
    "dg": ("dg_sign", "dg_mag"),
    "dxy": ("dy", "dx"),
}
PARAM_GROUPS = ("alpha", "dg")

Keystream = Callable[["CipherKey", int], bytes]


class CryptError(ValueError):
    pass


class KeyFormatError(CryptError):
    pass


@dataclass(frozen=True)
class CipherKey:
    key_bytes: bytes

    def __post_init__(self):
        if len(self.key_bytes) != 16:
            raise KeyFormatError(f"key must be 16 bytes (128 bits), got {len(self.key_bytes)}")

    @classmethod
    def from_hex(cls, text: str) -> "CipherKey":
        """Parse 32 hex digits; spaces between groups are ignored."""
        digits = "".join(text.split())
        if len(digits) != 32:
            raise KeyFormatError(f"key must be 32 hex digits, got {len(digits)}")
        try:
            return cls(bytes.fromhex(digits))
        except ValueError:
            raise KeyFormatError("key contains non-hex characters") from None

    def hex(self) -> str:
        return self.key_bytes.hex().upper()

    def __repr__(self):
        return "CipherKey(<128-bit>)"


def parse_iv(text: str, bits: int = 15) -> int:
    """An IV given as up to 4 hex digits, or ``"random"``."""
    if text.strip().lower() == "random":
        return random_iv(bits)
    digits = text.strip()
    if not 1 <= len(digits) <= 4:
        raise KeyFormatError(f"iv must be 1 to 4 hex digits or 'random', got {text!r}")
    try:
        value = int(digits, 16)
    except ValueError:
        raise KeyFormatError(f"iv {text!r} is not hexadecimal") from None
    if value >= 1 << bits:
        raise KeyFormatError(f"iv 0x{value:x} does not fit in {bits} bits")
    return value


def iv_bits(word_width: int) -> int:
    """IV width for a given word width; the header field holds at most 16 bits."""
    return min(word_width, 16)


def random_iv(bits: int = 15) -> int:
    return secrets.randbits(bits)


def _rc4_python(key: bytes, n: int) -> bytes:
    s = list(range(256))
    j = 0
    for i in range(256):
        j = (j + s[i] + key[i % len(key)]) & 0xFF
        s[i], s[j] = s[j], s[i]
    out = bytearray(n)
    i = j = 0
    for t in range(n):
        i = (i + 1) & 0xFF
        j = (j + s[i]) & 0xFF
        s[i], s[j] = s[j], s[i]
        out[t] = s[(s[i] + s[j]) & 0xFF]
    return bytes(out)


def rc4_keystream(key: bytes, n: int) -> bytes:
    """First ``n`` bytes of the plain RC4 keystream (no initial bytes dropped)."""
    if not 1 <= len(key) <= 256:
        raise CryptError("RC4 keys are 1 to 256 bytes")
    if n <= 0:
        return b""
    if len(key) * 8 not in ARC4.key_sizes:
        # the OpenSSL backend only takes a fixed set of key lengths
        return _rc4_python(key, n)
    return Cipher(ARC4(key), mode=None).encryptor().update(bytes(n))


def keystream(key: CipherKey, n: int) -> bytes:
    return rc4_keystream(key.key_bytes, n)


def _bytes_per_word(width: int) -> int:
    # two bytes for every width up to 16, more only for wider words
    return max(2, (width + 7) // 8)


def keystream_words(stream: bytes, count: int, width: int) -> np.ndarray:
    """Slice ``stream`` into big-endian words of ``max(2, ceil(width / 8))`` bytes, masked to ``width`` bits."""
    nb = _bytes_per_word(width)
    raw = np.frombuffer(stream[: count * nb], dtype=np.uint8).reshape(count, nb).astype(np.int64)
    words = np.zeros(count, dtype=np.int64)
    for b in range(nb):
        words = (words << 8) | raw[:, b]
    return words & ((1 << width) - 1)


def chain_encrypt(words: np.ndarray, ks: np.ndarray, iv: int) -> np.ndarray:
    # with XOR as the block function the chain collapses to a running XOR
    return np.bitwise_xor.accumulate(np.asarray(words) ^ ks) ^ iv if len(words) else np.asarray(words)


def chain_decrypt(cipher: np.ndarray, ks: np.ndarray, iv: int) -> np.ndarray:
    cipher = np.asarray(cipher)
    if not len(cipher):
        return cipher
    prev = np.concatenate([[iv], cipher[:-1]])
    return cipher ^ ks ^ prev


def _layout(code: FractalCode, groups: Sequence[str]) -> list[tuple[str, int]]:
    cfg = code.config
    fields = []
    for g in groups:
        if g not in FIELD_GROUPS:
            raise CryptError(f"unknown parameter group {g!r}; choose from {', '.join(FIELD_GROUPS)}")
        fields += [(f, cfg.field_bits(f)) for f in FIELD_GROUPS[g]]
    return fields


def param_words(code: FractalCode, groups: Sequence[str] = PARAM_GROUPS) -> tuple[np.ndarray, int]:
    """Multiplex the selected fields of every block into one word each; returns (words, width)."""
    words = np.zeros(len(code), dtype=np.int64)
    width = 0
    for name, bits in _layout(code, groups):
        words = (words << bits) | getattr(code, name)
        width += bits
    return words, width


def _split_words(code: FractalCode, words: np.ndarray, groups: Sequence[str]) -> dict[str, np.ndarray]:
    out = {}
    shift = 0
    for name, bits in reversed(_layout(code, groups)):
        out[name] = (words >> shift) & ((1 << bits) - 1)
        shift += bits
    return out


def _tree_mask(stream: bytes, offset: int, n_bits: int) -> np.ndarray:
    chunk = np.frombuffer(stream[offset : offset + (n_bits + 7) // 8], dtype=np.uint8)
    return np.unpackbits(chunk)[:n_bits]


def _stream_for(code: FractalCode, key: CipherKey, width: int, tree: bool, ks_fn: Keystream):
    n_words = len(code) * _bytes_per_word(width)
    n_tree = (code.tree_bits.size + 7) // 8 if tree else 0
    stream = ks_fn(key, n_words + n_tree)
    return stream, n_words


def encrypt_fields(
    code: FractalCode,
    key: CipherKey,
    iv: int,
    groups: Sequence[str] = PARAM_GROUPS,
    *,
    encrypt_tree: bool = False,
    keystream: Keystream = keystream,
) -> FractalCode:
    """Chain-encrypt the chosen parameter groups (and optionally the split flags)."""
    if code.encrypted:
        raise CryptError("code is already encrypted")
    if encrypt_tree and not code.config.is_quadtree:
        raise CryptError("tree encryption needs a quadtree code")
    words, width = param_words(code, groups)
    if not 0 <= iv < 1 << iv_bits(width):
        raise CryptError(f"iv 0x{iv:x} does not fit in {iv_bits(width)} bits")
    stream, n_words = _stream_for(code, key, width, encrypt_tree, keystream)
    cipher = chain_encrypt(words, keystream_words(stream, len(code), width), iv)
    changes = _split_words(code, cipher, groups)
    if encrypt_tree:
        changes["tree_bits"] = code.tree_bits ^ _tree_mask(stream, n_words, code.tree_bits.size)
    return replace(code, encrypted=True, iv=int(iv), tree_encrypted=encrypt_tree, **changes)


def encrypt_params(
    code: FractalCode,
    key: CipherKey,
    iv: int,
    *,
    encrypt_tree: bool = False,
    keystream: Keystream = keystream,
) -> FractalCode:
    return encrypt_fields(code, key, iv, PARAM_GROUPS, encrypt_tree=encrypt_tree, keystream=keystream)


def decrypt_params(code: FractalCode, key: CipherKey, *, keystream: Keystream = keystream) -> FractalCode:
    """Undo :func:`encrypt_params`. A wrong key yields a well-formed but garbled code."""
    if not code.encrypted:
        raise CryptError("code is not encrypted")
    words, width = param_words(code, PARAM_GROUPS)
    stream, n_words = _stream_for(code, key, width, code.tree_encrypted, keystream)
    plain = chain_decrypt(words, keystream_words(stream, len(code), width), code.iv)
    changes = _split_words(code, plain, PARAM_GROUPS)
    if code.tree_encrypted:
        changes["tree_bits"] = code.tree_bits ^ _tree_mask(stream, n_words, code.tree_bits.size)
    return replace(code, encrypted=False, iv=None, tree_encrypted=False, **changes)


def brute_force_exponent(n_blocks: int, bits_alpha: int, bits_dg: int) -> int:
    """log2 of the search space for guessing every encrypted word; ``bits_dg`` includes the sign bit."""
    if min(n_blocks, bits_alpha, bits_dg) < 0:
        raise ValueError("counts must be non-negative")
    return n_blocks * (bits_alpha + bits_dg)
