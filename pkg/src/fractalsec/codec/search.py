"""Exhaustive domain search with exact integer scoring.

Pixels of a downsampled domain block are kept as 2x2 sums (``D4 = 4 * mean``)
so that, for a quantized contrast ``q / 2**b`` and an integer offset ``g``,
the scaled reconstruction ``q * D4 + K * g`` with ``K = 4 * 2**b`` is an
integer. All fits and errors below are therefore exact, and ties resolve
deterministically on the candidate index ``(dy * nx + dx) * 8 + iso``.

A least-squares lower bound computed with one matrix product discards
candidates that cannot beat the current best; every candidate that could
tie or win is still scored exactly, so the result is that of a plain
enumeration.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from ..model import CodecConfig
from .blocks import apply_isometry, gather_index, pair_sums

_CHUNK_ELEMENTS = 1 << 22


@dataclass
class MatchResult:
    """Best candidate per range block. ``sse`` is scaled by ``scale``."""

    index: np.ndarray
    alpha_q: np.ndarray
    dg_sign: np.ndarray
    dg_mag: np.ndarray
    sse: np.ndarray
    scale: int
    n_pixels: int
    nx: int

    @property
    def mse(self) -> np.ndarray:
        return self.sse / float(self.scale * self.n_pixels)

    @property
    def dx(self) -> np.ndarray:
        return (self.index // 8) % self.nx

    @property
    def dy(self) -> np.ndarray:
        return (self.index // 8) // self.nx

    @property
    def iso(self) -> np.ndarray:
        return self.index % 8


class CandidateSet:
    """All (domain position, isometry) candidates for one range-block size."""

    def __init__(self, pixels: np.ndarray, cfg: CodecConfig, size: int):
        h, w = pixels.shape
        self.size = size
        self.n = size * size
        self.nx, self.ny = cfg.domain_grid(w, h, size)
        step = cfg.domain_step_for(size)
        oy, ox = np.divmod(np.arange(self.nx * self.ny), self.nx)
        q = pair_sums(pixels)
        blocks = q.reshape(-1)[gather_index(oy * step, ox * step, size, q.shape[1])]
        blocks = blocks.reshape(-1, size, size)
        stacked = np.stack([apply_isometry(blocks, k) for k in range(8)], axis=1)
        self.d4 = stacked.reshape(-1, self.n)  # (positions * 8, n), int64
        self.sd = self.d4.sum(axis=1)
        self.sd2 = (self.d4 * self.d4).sum(axis=1)
        self.vd = self.n * self.sd2 - self.sd * self.sd
        # unit-norm centred candidates: z . r = cov / sqrt(var), in scaled units
        with np.errstate(invalid="ignore", divide="ignore"):
            inv = np.where(self.vd > 0, 1.0 / np.sqrt(self.vd.astype(np.float64)), 0.0)
        self.z32 = ((self.n * self.d4 - self.sd[:, None]) * inv[:, None]).astype(np.float32)

    def __len__(self) -> int:
        return len(self.d4)


def _exact_fit(n, sd, sd2, vd, sdr, sr, sr2, bits_alpha: int, bits_dg: int):
    """Quantized fit from sufficient statistics; arguments broadcast elementwise."""
    k = 4 << bits_alpha
    cov = n * sdr - sd * sr
    pos = (cov > 0) & (vd > 0)
    safe_vd = np.where(pos, vd, 1)
    # round-half-away of 2**b * (4 cov / vd), clamped to the top level
    q = np.where(pos, (2 * k * cov + safe_vd) // (2 * safe_vd), 0)
    q = np.minimum(q, (1 << bits_alpha) - 1)
    num = k * sr - q * sd
    den = k * n
    sign = (num < 0).astype(np.int64)
    mag = np.minimum((2 * np.abs(num) + den) // (2 * den), (1 << bits_dg) - 1)
    g = np.where(sign == 1, -mag, mag)
    kg = k * g
    sse = q * (q * sd2 + 2 * kg * sd - 2 * k * sdr) + kg * (n * kg - 2 * k * sr) + k * k * sr2
    return q, sign, mag, sse


def score_pairs(cands: CandidateSet, ranges: np.ndarray, cidx, ridx, bits_alpha: int, bits_dg: int):
    """Exact quantized fit of candidate ``cidx[k]`` to range ``ridx[k]``.

    Returns (alpha_q, dg_sign, dg_mag, sse) with sse scaled by ``(4 * 2**bits_alpha) ** 2``.
    """
    r = ranges[ridx]
    sdr = np.einsum("ij,ij->i", cands.d4[cidx], r)
    sr = r.sum(axis=1)
    sr2 = np.einsum("ij,ij->i", r, r)
    return _exact_fit(cands.n, cands.sd[cidx], cands.sd2[cidx], cands.vd[cidx], sdr, sr, sr2, bits_alpha, bits_dg)


@numba.njit(cache=True)
def _fit_one(d4c, sd, sd2, vd, r, sr, sr2, n, bits_alpha, bits_dg):
    k = 4 << bits_alpha
    sdr = 0
    for j in range(n):
        sdr += d4c[j] * r[j]
    cov = n * sdr - sd * sr
    q = 0
    if cov > 0 and vd > 0:
        q = min((2 * k * cov + vd) // (2 * vd), (1 << bits_alpha) - 1)
    num = k * sr - q * sd
    den = k * n
    sign = 1 if num < 0 else 0
    mag = min((2 * abs(num) + den) // (2 * den), (1 << bits_dg) - 1)
    g = -mag if sign else mag
    kg = k * g
    sse = q * (q * sd2 + 2 * kg * sd - 2 * k * sdr) + kg * (n * kg - 2 * k * sr) + k * k * sr2
    return q, sign, mag, sse


@numba.njit(cache=True)
def _scan(scores, cut, slack, q0cut, d4, sd, sd2, vd, r, bits_alpha, bits_dg, out):
    m, n_cand = scores.shape
    n = r.shape[1]
    for i in range(m):
        ri = r[i]
        sr = 0
        sr2 = 0
        for j in range(n):
            sr += ri[j]
            sr2 += ri[j] * ri[j]
        s = slack[i]
        lim = cut[i]
        best_c = -1
        best = (0, 0, 0, 0)
        for c in range(n_cand):
            sc = scores[i, c]
            if sc < lim:
                continue
            if sc + s < q0cut[c]:
                # contrast certainly quantizes to 0; the first such candidate stands for all
                continue
            fit = _fit_one(d4[c], sd[c], sd2[c], vd[c], ri, sr, sr2, n, bits_alpha, bits_dg)
            if best_c < 0 or fit[3] < best[3]:
                best_c = c
                best = fit
        # candidates with zero contrast all share one error; only the lowest index can win a tie
        first_q0 = -1
        for c in range(n_cand):
            if scores[i, c] + s < q0cut[c]:
                first_q0 = c
                break
        if first_q0 >= 0:
            fit = _fit_one(d4[first_q0], sd[first_q0], sd2[first_q0], vd[first_q0], ri, sr, sr2, n, bits_alpha, bits_dg)
            if best_c < 0 or fit[3] < best[3] or (fit[3] == best[3] and first_q0 < best_c):
                best_c = first_q0
                best = fit
        out[i, 0] = best_c
        out[i, 1] = best[0]
        out[i, 2] = best[1]
        out[i, 3] = best[2]
        out[i, 4] = best[3]


def best_matches(cands: CandidateSet, ranges: np.ndarray, bits_alpha: int, bits_dg: int) -> MatchResult:
    """Minimum-error candidate for every row of ``ranges`` (M, n), int64 pixel values."""
    ranges = np.ascontiguousarray(ranges, dtype=np.int64)
    m_total = len(ranges)
    n = cands.n
    k = 4 << bits_alpha
    # score >= sqrt(vd) / 2k  <=>  2k cov >= vd  <=>  quantized contrast >= 1
    with np.errstate(divide="ignore"):
        q0cut = np.where(cands.vd > 0, np.sqrt(cands.vd.astype(np.float64)) / (2 * k), np.inf)
    out = np.zeros((m_total, 5), dtype=np.int64)
    chunk = max(1, _CHUNK_ELEMENTS // len(cands))
    for lo in range(0, m_total, chunk):
        sel = slice(lo, min(lo + chunk, m_total))
        r = ranges[sel]
        sr = r.sum(axis=1)
        vr = n * np.einsum("ij,ij->i", r, r) - sr * sr
        centred = (r - sr[:, None] / n).astype(np.float32)
        scores = centred @ cands.z32.T  # (m, C)
        first = np.argmax(scores, axis=1)
        _, _, _, upper = score_pairs(cands, r, first, np.arange(len(r)), bits_alpha, bits_dg)
        # float32 rounding bound on |score - cov / sqrt(vd)|
        slack = 1e-6 * n * np.sqrt(vr.astype(np.float64)) + 1e-6
        # least-squares bound: sse >= (vr - max(score, 0)**2) / n
        thresh = vr - n * upper / float(k * k)
        cut = np.where(thresh > 0, np.sqrt(np.maximum(thresh, 0.0)) - slack, -np.inf)
        _scan(scores, cut, slack, q0cut, cands.d4, cands.sd, cands.sd2, cands.vd, r, bits_alpha, bits_dg, out[sel])
    return MatchResult(out[:, 0], out[:, 1], out[:, 2], out[:, 3], out[:, 4], k * k, n, cands.nx)
