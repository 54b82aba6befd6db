import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from helpers import KEY_HEX, bundled_code, random_code, random_config
from fractalsec.crypt import (
    CipherKey,
    CryptError,
    KeyFormatError,
    brute_force_exponent,
    chain_decrypt,
    chain_encrypt,
    decrypt_params,
    encrypt_fields,
    encrypt_params,
    iv_bits,
    keystream,
    keystream_words,
    param_words,
    parse_iv,
    rc4_keystream,
)
from fractalsec.model import CodecConfig, FractalCode, Quadtree


def null_stream(key, n):
    return bytes(n)


def bit_fraction(a: np.ndarray, b: np.ndarray, width: int) -> float:
    diff = np.bitwise_xor(a, b)
    return sum(bin(int(v)).count("1") for v in diff) / (len(diff) * width)


# RFC 6229 key 0x0102...10, offsets 0 and 16
RFC_KEY = bytes(range(1, 17))
RFC_OUT = bytes.fromhex("9ac7cc9a609d1ef7b2932899cde41b97" "5248c4959014126a6e8a84f11d1a9e1c")


def test_rc4_known_vectors():
    assert rc4_keystream(b"Key", 10) == bytes.fromhex("EB9F7781B734CA72A719")
    assert rc4_keystream(RFC_KEY, 32) == RFC_OUT
    assert keystream(CipherKey(RFC_KEY), 32) == RFC_OUT


@settings(max_examples=40, deadline=None)
@given(st.binary(min_size=1, max_size=32), st.integers(0, 600))
def test_rc4_matches_oracle(key, n):
    assert rc4_keystream(key, n) == oracles.rc4(key, n)


def test_keystream_is_deterministic_and_key_sensitive():
    key = CipherKey.from_hex(KEY_HEX)
    a = np.frombuffer(keystream(key, 4096), dtype=np.uint8)
    assert np.array_equal(a, np.frombuffer(keystream(key, 4096), dtype=np.uint8))
    flipped = bytearray(key.key_bytes)
    flipped[15] ^= 1
    b = np.frombuffer(keystream(CipherKey(bytes(flipped)), 4096), dtype=np.uint8)
    agree = 1 - np.unpackbits(a ^ b).mean()
    assert 0.45 <= agree <= 0.55


def test_key_parsing():
    key = CipherKey.from_hex(KEY_HEX)
    assert key.hex() == KEY_HEX.replace(" ", "")
    assert CipherKey.from_hex(KEY_HEX.replace(" ", "").lower()) == key
    for bad in ("0123", KEY_HEX + "00", "zz" * 16):
        with pytest.raises(KeyFormatError):
            CipherKey.from_hex(bad)
    with pytest.raises(KeyFormatError):
        CipherKey(b"short")
    assert "0123" not in repr(key) and "0123" not in str(key)


def test_iv_parsing():
    assert parse_iv("1d3b") == 0x1D3B
    assert 0 <= parse_iv("random") < 2**15
    assert iv_bits(15) == 15 and iv_bits(29) == 16
    for bad in ("8000", "12345", "xyz", ""):
        with pytest.raises(KeyFormatError):
            parse_iv(bad)


def test_chain_with_identity_cipher():
    words = np.array([0x1234, 0x0001, 0x7FFF, 0x0000])
    ks = np.zeros(4, dtype=np.int64)
    out = chain_encrypt(words, ks, 0x0F0F)
    assert out[0] == 0x1D3B
    assert out[1] == words[1] ^ out[0] and out[2] == words[2] ^ out[1]
    zero_iv = chain_encrypt(words, ks, 0)
    assert zero_iv[0] == words[0] and zero_iv[1] == words[1] ^ zero_iv[0]
    assert np.array_equal(chain_decrypt(out, ks, 0x0F0F), words)


def test_encrypt_params_word_layout():
    # X = 0x1234 -> alpha 9, sign 0, magnitude 0x34 with default widths
    code = FractalCode.from_transforms(8, 8, CodecConfig(), [(0, 0, 9, 0, 0x34, 3)] * 4)
    words, width = param_words(code)
    assert width == 15 and words[0] == 0x1234
    enc = encrypt_params(code, CipherKey(bytes(16)), 0x0F0F, keystream=null_stream)
    assert param_words(enc)[0][0] == 0x1D3B
    assert enc.encrypted and enc.iv == 0x0F0F


def test_precondition_errors():
    code = random_code(np.random.default_rng(0), CodecConfig(), 16, 16)
    key = CipherKey.from_hex(KEY_HEX)
    with pytest.raises(CryptError):
        decrypt_params(code, key)
    enc = encrypt_params(code, key, 5)
    with pytest.raises(CryptError):
        encrypt_params(enc, key, 5)
    with pytest.raises(CryptError):
        encrypt_params(code, key, 1 << 15)
    with pytest.raises(CryptError):
        encrypt_params(code, key, 5, encrypt_tree=True)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_round_trip_and_clear_fields(seed):
    rng = np.random.default_rng(seed)
    cfg = random_config(rng)
    code = random_code(rng, cfg, 2 * cfg.top_block_size, 3 * cfg.top_block_size)
    key = CipherKey(rng.bytes(16))
    iv = int(rng.integers(0, 1 << iv_bits(cfg.word_bits)))
    tree = cfg.is_quadtree and bool(rng.integers(0, 2))
    enc = encrypt_params(code, key, iv, encrypt_tree=tree)
    for name in ("dx", "dy", "iso"):
        assert np.array_equal(getattr(enc, name), getattr(code, name))
    assert decrypt_params(enc, key) == code


def test_chain_diffusion_is_linear():
    code = bundled_code("camera_128")
    key = CipherKey.from_hex(KEY_HEX)
    base = param_words(encrypt_params(code, key, 0x0123))[0]
    rng = np.random.default_rng(7)
    for _ in range(20):
        j, b = int(rng.integers(len(code))), int(rng.integers(15))
        words = param_words(code)[0].copy()
        words[j] ^= 1 << b
        changed = code.with_params(alpha_q=words >> 9, dg_sign=(words >> 8) & 1, dg_mag=words & 0xFF)
        diff = param_words(encrypt_params(changed, key, 0x0123))[0] ^ base
        assert np.all(diff[:j] == 0) and np.all(diff[j:] == 1 << b)


def test_error_propagation_is_local():
    code = bundled_code("camera_128")
    key = CipherKey.from_hex(KEY_HEX)
    enc = encrypt_params(code, key, 0x0123)
    cipher = param_words(enc)[0]
    plain = param_words(code)[0]
    for j in (0, 17, len(code) - 1):
        hit = cipher.copy()
        hit[j] ^= 0x2A5
        bad = enc.with_params(alpha_q=hit >> 9, dg_sign=(hit >> 8) & 1, dg_mag=hit & 0xFF)
        diff = param_words(decrypt_params(bad, key))[0] != plain
        assert diff[j] and (j + 1 == len(code) or diff[j + 1])
        assert diff.sum() == min(2, len(code) - j)


def test_ciphertext_bits_are_balanced():
    code = bundled_code("camera_256")  # 4096 blocks
    words = np.concatenate([
        param_words(encrypt_params(code, CipherKey(bytes([i]) * 16), 0x0123))[0] for i in range(3)
    ])
    assert len(words) >= 10_000
    ones = np.unpackbits(words.astype(">u2").view(np.uint8).reshape(-1, 2), axis=1)[:, 1:].mean()
    assert 0.48 <= ones <= 0.52


def test_wrong_key_garbles_words():
    code = bundled_code("camera_128")
    enc = encrypt_params(code, CipherKey.from_hex(KEY_HEX), 0x0123)
    wrong = decrypt_params(enc, CipherKey.from_hex(KEY_HEX[:-1] + "F"))
    assert 0.4 <= bit_fraction(param_words(wrong)[0], param_words(code)[0], 15) <= 0.6


def test_dxy_and_tree_groups_for_experiments():
    rng = np.random.default_rng(11)
    cfg = CodecConfig(partition=Quadtree(max_depth=1))
    code = random_code(rng, cfg, 32, 32)
    key = CipherKey.from_hex(KEY_HEX)
    enc = encrypt_fields(code, key, 3, ("dxy",), encrypt_tree=True)
    assert np.array_equal(enc.alpha_q, code.alpha_q)
    assert not np.array_equal(enc.dx, code.dx)
    assert enc.tree_encrypted
    with pytest.raises(CryptError):
        encrypt_fields(code, key, 3, ("iso",))


def test_brute_force_exponent():
    assert brute_force_exponent(256, 6, 9) == 3840
    assert brute_force_exponent(1, 6, 9) == 15
    assert brute_force_exponent(0, 6, 9) == 0
    with pytest.raises(ValueError):
        brute_force_exponent(-1, 6, 9)


def test_keystream_word_slicing():
    stream = bytes([0xAB, 0xCD, 0x12, 0x34, 0xFF, 0xEE, 0x01, 0x02, 0x03])
    assert keystream_words(stream, 2, 15).tolist() == [0x2BCD, 0x1234]
    assert keystream_words(stream, 2, 6).tolist() == [0x0D, 0x34]
    assert keystream_words(stream, 2, 20).tolist() == [0xBCD12, 0x4FFEE & 0xFFFFF]
