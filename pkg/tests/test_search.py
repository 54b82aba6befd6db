from fractions import Fraction

import numpy as np
import pytest

import oracles
from helpers import bundled, random_image
from fractalsec.codec import match_block
from fractalsec.codec.search import CandidateSet, best_matches, score_pairs
from fractalsec.imaging import GrayImage
from fractalsec.model import CodecConfig


def _check_against_oracle(im, cfg):
    pix = im.pixels.tolist()
    b = cfg.range_size
    for y in range(0, im.height, b):
        for x in range(0, im.width, b):
            block = im.pixels[y : y + b, x : x + b]
            got, err = match_block(block, im, cfg)
            want, want_err = oracles.brute_match(block.tolist(), pix, cfg.domain_step, cfg.bits_alpha, cfg.bits_dg)
            assert tuple(got) == want, (x, y)
            assert err == pytest.approx(float(want_err), rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("seed, kind", list(enumerate(["uniform", "binary", "few", "gradient", "flat"])))
def test_match_block_equals_oracle(seed, kind):
    rng = np.random.default_rng(seed)
    _check_against_oracle(random_image(rng, 16, 16, kind), CodecConfig())


@pytest.mark.parametrize("step, bits_alpha, bits_dg", [(1, 6, 8), (2, 3, 4), (2, 1, 2)])
def test_match_block_oracle_other_settings(step, bits_alpha, bits_dg):
    rng = np.random.default_rng(step * 100 + bits_alpha)
    cfg = CodecConfig(domain_step=step, bits_alpha=bits_alpha, bits_dg=bits_dg)
    _check_against_oracle(random_image(rng, 12, 12, "few"), cfg)


def test_constant_image_picks_first_candidate():
    im = GrayImage.filled(16, 16, 77)
    t, err = match_block(im.pixels[:4, :4], im, CodecConfig())
    assert tuple(t) == (0, 0, 0, 0, 77, 0) and err == 0


def test_equal_error_prefers_smaller_position():
    # two identical domain blocks; the first in raster order must win
    px = np.zeros((8, 16), dtype=np.uint8)
    px[:, :8] = px[:, 8:] = np.arange(64).reshape(8, 8) * 3
    im = GrayImage(px)
    cfg = CodecConfig(domain_step=8)
    t, _ = match_block(np.arange(16).reshape(4, 4) * 6, im, cfg)
    assert (t.dy, t.dx) == (0, 0)


def _exhaustive(cands, ranges, bits_alpha, bits_dg):
    m, c = len(ranges), len(cands)
    ridx = np.repeat(np.arange(m), c)
    cidx = np.tile(np.arange(c), m)
    q, s, g, sse = score_pairs(cands, ranges, cidx, ridx, bits_alpha, bits_dg)
    sse = sse.reshape(m, c)
    best = np.argmin(sse, axis=1)  # first minimum = lowest candidate index
    pick = np.arange(m) * c + best
    return best, q[pick], s[pick], g[pick], sse[np.arange(m), best]


@pytest.mark.parametrize("name, bits_alpha", [("camera_128", 6), ("chelsea_256", 5), ("astronaut_256", 2)])
def test_pruned_search_equals_full_enumeration(name, bits_alpha):
    # natural-image crops exercise the pruning much harder than random noise
    px = bundled(name).pixels[:48, :64].astype(np.int64)
    cfg = CodecConfig(domain_step=2, bits_alpha=bits_alpha)
    cands = CandidateSet(px, cfg, 4)
    ranges = px.reshape(12, 4, 16, 4).swapaxes(1, 2).reshape(-1, 16)
    res = best_matches(cands, ranges, cfg.bits_alpha, cfg.bits_dg)
    best, q, s, g, sse = _exhaustive(cands, ranges, cfg.bits_alpha, cfg.bits_dg)
    assert np.array_equal(res.index, best)
    assert np.array_equal(res.alpha_q, q) and np.array_equal(res.dg_sign, s) and np.array_equal(res.dg_mag, g)
    assert np.array_equal(res.sse, sse)


def test_scaled_error_is_exact():
    rng = np.random.default_rng(5)
    im = random_image(rng, 16, 16)
    cfg = CodecConfig()
    cands = CandidateSet(im.pixels.astype(np.int64), cfg, 4)
    r = im.pixels[4:8, 8:12].astype(np.int64).reshape(1, -1)
    res = best_matches(cands, r, cfg.bits_alpha, cfg.bits_dg)
    _, want_err = oracles.brute_match(r.reshape(4, 4).tolist(), im.pixels.tolist(), 4, 6, 8)
    assert Fraction(int(res.sse[0]), res.scale * res.n_pixels) == want_err
