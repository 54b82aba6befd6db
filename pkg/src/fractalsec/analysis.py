"""Parameter statistics and the security/efficiency experiments, with CSV output."""
from __future__ import annotations

import csv
import enum
import math
import statistics
import sys
import time
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence, TextIO

import numpy as np

from .codec import decode, encode
from .crypt import CipherKey, decrypt_params, encrypt_fields, encrypt_params, iv_bits, param_words
from .imaging import GrayImage, psnr
from .model import CodecConfig, FractalCode

__all__ = [
    "ParamKind",
    "ParamDistribution",
    "SensitivityCurve",
    "PerceptualRow",
    "TimingReport",
    "SplitMix64",
    "space_size",
    "param_values",
    "param_distribution",
    "sensitivity_curve",
    "perceptual_experiment",
    "PERCEPTUAL_SETS",
    "timing_report",
    "write_distribution_csv",
    "write_sensitivity_csv",
    "write_perceptual_csv",
    "write_timing_csv",
    "format_psnr",
]


class ParamKind(enum.Enum):
    DOMAIN_POSITION = "dxy"
    ALPHA = "alpha"
    LUMINANCE_OFFSET = "dg"
    ISOMETRY = "iso"
    TREE_BITS = "tree"


def format_psnr(value: float) -> str:
    return "inf" if math.isinf(value) else f"{value:.4f}"


def space_size(code: FractalCode, kind: ParamKind) -> int:
    cfg = code.config
    return {
        ParamKind.DOMAIN_POSITION: 1 << (cfg.bits_dx + cfg.bits_dy),
        ParamKind.ALPHA: 1 << cfg.bits_alpha,
        ParamKind.LUMINANCE_OFFSET: 1 << (cfg.bits_dg + 1),
        ParamKind.ISOMETRY: 8,
        ParamKind.TREE_BITS: 2,
    }[kind]


def param_values(code: FractalCode, kind: ParamKind) -> np.ndarray:
    """Per-block value index in [0, space_size). Offsets use their sign|magnitude code."""
    cfg = code.config
    if kind is ParamKind.DOMAIN_POSITION:
        return code.dy * (1 << cfg.bits_dx) + code.dx
    if kind is ParamKind.ALPHA:
        return code.alpha_q
    if kind is ParamKind.LUMINANCE_OFFSET:
        return code.dg_sign * (1 << cfg.bits_dg) + code.dg_mag
    if kind is ParamKind.ISOMETRY:
        return code.iso
    if not cfg.is_quadtree:
        raise ValueError("tree bits exist only for quadtree codes")
    return code.tree_bits.astype(np.int64)


@dataclass(frozen=True, eq=False)
class ParamDistribution:
    kind: ParamKind
    space_size: int
    counts: np.ndarray

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    @property
    def paper_probability(self) -> np.ndarray:
        # frequency over space size, so it sums to n / space_size rather than 1
        return self.counts / float(self.space_size)

    @property
    def relative_frequency(self) -> np.ndarray:
        return self.counts / float(max(self.n, 1))

    def flatness(self) -> float:
        """max count / min count; infinite when some value never occurs."""
        lo = self.counts.min()
        return math.inf if lo == 0 else float(self.counts.max() / lo)


def param_distribution(code: FractalCode, kind: ParamKind) -> ParamDistribution:
    if code.encrypted:
        raise ValueError("distribution of an encrypted code is meaningless; decrypt first")
    size = space_size(code, kind)
    counts = np.bincount(param_values(code, kind), minlength=size)
    return ParamDistribution(kind, size, counts)


class SplitMix64:
    """Small counter-based PRNG so experiment seeds reproduce across platforms."""

    _MASK = (1 << 64) - 1

    def __init__(self, seed: int):
        self.state = seed & self._MASK

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & self._MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & self._MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & self._MASK
        return z ^ (z >> 31)

    def below(self, bound: int) -> int:
        return (self.next_u64() * bound) >> 64

    def sample(self, population: int, k: int) -> list[int]:
        """``k`` distinct integers from range(population), partial Fisher-Yates."""
        pool = list(range(population))
        for i in range(k):
            j = i + self.below(population - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]

    def other_than(self, bound: int, current: int) -> int:
        v = self.below(bound - 1)
        return v + 1 if v >= current else v


@dataclass(frozen=True)
class SensitivityCurve:
    kind: ParamKind
    points: tuple[tuple[int, float], ...]
    trials: int
    seed: int
    n_blocks: int

    def psnr_at(self, k: int) -> float:
        return dict(self.points)[k]


def _corrupt(code: FractalCode, kind: ParamKind, blocks: Sequence[int], rng: SplitMix64) -> FractalCode:
    cfg = code.config
    if kind is ParamKind.DOMAIN_POSITION:
        # draw from positions that exist in the pool, not the whole 2**bits space
        nx, ny = cfg.domain_grid(code.width, code.height)
        dx, dy = code.dx.copy(), code.dy.copy()
        for b in blocks:
            pos = rng.other_than(nx * ny, int(dy[b]) * nx + int(dx[b]))
            dy[b], dx[b] = divmod(pos, nx)
        return replace(code, dx=dx, dy=dy)
    if kind is ParamKind.ALPHA:
        a = code.alpha_q.copy()
        for b in blocks:
            a[b] = rng.other_than(1 << cfg.bits_alpha, int(a[b]))
        return replace(code, alpha_q=a)
    if kind is ParamKind.LUMINANCE_OFFSET:
        sign, mag = code.dg_sign.copy(), code.dg_mag.copy()
        for b in blocks:
            word = rng.other_than(1 << (cfg.bits_dg + 1), int(sign[b]) << cfg.bits_dg | int(mag[b]))
            sign[b], mag[b] = word >> cfg.bits_dg, word & ((1 << cfg.bits_dg) - 1)
        return replace(code, dg_sign=sign, dg_mag=mag)
    if kind is ParamKind.ISOMETRY:
        iso = code.iso.copy()
        for b in blocks:
            iso[b] = rng.other_than(8, int(iso[b]))
        return replace(code, iso=iso)
    raise ValueError(f"sensitivity is not defined for {kind.name}")


def sensitivity_curve(
    img: GrayImage,
    code: FractalCode,
    kind: ParamKind,
    ks: Iterable[int],
    trials: int,
    seed: int,
) -> SensitivityCurve:
    """Mean PSNR (against ``img``) after corrupting ``k`` random blocks' ``kind`` parameter."""
    if code.encrypted:
        raise ValueError("code must not be encrypted")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    n = len(code)
    ks = sorted(set(int(k) for k in ks) | {0})
    if ks[0] < 0 or ks[-1] > n:
        raise ValueError(f"k must lie in [0, {n}]")
    rng = SplitMix64(seed)
    points = []
    clean = psnr(img, decode(code))
    for k in ks:
        if k == 0:
            points.append((0, clean))
            continue
        vals = []
        for _ in range(trials):
            blocks = rng.sample(n, k)
            vals.append(psnr(img, decode(_corrupt(code, kind, blocks, rng))))
        points.append((k, statistics.fmean(vals)))
    return SensitivityCurve(kind, tuple(points), trials, seed, n)


# label -> (parameter groups, encrypt tree flags)
PERCEPTUAL_SETS = {
    "none": ((), False),
    "alpha": (("alpha",), False),
    "dg": (("dg",), False),
    "dxy": (("dxy",), False),
    "alpha+dg": (("alpha", "dg"), False),
    "alpha+dg+tree": (("alpha", "dg"), True),
}


@dataclass(frozen=True, eq=False)
class PerceptualRow:
    label: str
    psnr: float
    image: GrayImage | None
    note: str = ""


def perceptual_experiment(
    img: GrayImage,
    cfg: CodecConfig,
    key: CipherKey,
    *,
    iv: int = 0x2A5B,
    code: FractalCode | None = None,
    sets: Sequence[str] = tuple(PERCEPTUAL_SETS),
    log: TextIO | None = None,
) -> list[PerceptualRow]:
    """Encrypt each parameter set, decode without the key and score the result against ``img``."""
    code = encode(img, cfg) if code is None else code
    rows = []
    for label in sets:
        groups, tree = PERCEPTUAL_SETS[label]
        if tree and not code.config.is_quadtree:
            msg = f"skipping {label}: fixed-grid code has no tree bits"
            print(msg, file=log or sys.stderr)
            rows.append(PerceptualRow(label, math.nan, None, msg))
            continue
        if not groups:
            scrambled = code
        else:
            width = param_words(code, groups)[1]
            scrambled = encrypt_fields(code, key, iv & ((1 << iv_bits(width)) - 1), groups, encrypt_tree=tree)
        out = decode(scrambled, strict=False, allow_encrypted=True)
        rows.append(PerceptualRow(label, psnr(img, out), out))
    return rows


@dataclass(frozen=True)
class TimingReport:
    t_encode: float
    t_decode: float
    t_encrypt: float
    t_decrypt: float
    image: str = ""
    width: int = 0
    height: int = 0
    repetitions: int = 0
    samples: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def etr(self) -> float:
        return 100.0 * self.t_encrypt / self.t_encode

    @property
    def dtr(self) -> float:
        return 100.0 * self.t_decrypt / self.t_decode


def _median_time(fn, repetitions: int) -> tuple[float, list[float], object]:
    times = []
    result = None
    for _ in range(repetitions):
        t0 = time.perf_counter()
        result = fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times), times, result


def timing_report(
    img: GrayImage,
    cfg: CodecConfig,
    key: CipherKey,
    repetitions: int = 5,
    *,
    name: str = "",
    iv: int = 0x2A5B,
) -> TimingReport:
    """Median wall-clock times of encode, decode, encrypt_params and decrypt_params."""
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    iv &= (1 << iv_bits(cfg.word_bits)) - 1
    # warm caches (JIT, keystream backend) outside the timed region
    warm = encode(img, cfg)
    decrypt_params(encrypt_params(warm, key, iv), key)
    t_enc, s_enc, code = _median_time(lambda: encode(img, cfg), repetitions)
    t_dec, s_dec, _ = _median_time(lambda: decode(code), repetitions)
    t_cry, s_cry, sealed = _median_time(lambda: encrypt_params(code, key, iv), repetitions)
    t_dcr, s_dcr, _ = _median_time(lambda: decrypt_params(sealed, key), repetitions)
    samples = {"encode": s_enc, "decode": s_dec, "encrypt": s_cry, "decrypt": s_dcr}
    return TimingReport(t_enc, t_dec, t_cry, t_dcr, name, img.width, img.height, repetitions, samples)


def write_distribution_csv(dists: Iterable[ParamDistribution], out: TextIO) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["kind", "value", "count", "paper_probability", "relative_frequency"])
    for d in dists:
        pp, rf = d.paper_probability, d.relative_frequency
        for j in range(d.space_size):
            w.writerow([d.kind.value, j, int(d.counts[j]), f"{pp[j]:.8g}", f"{rf[j]:.8g}"])


def write_sensitivity_csv(curves: Iterable[SensitivityCurve], out: TextIO) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["kind", "k", "psnr_mean", "trials", "seed", "k_fraction"])
    for c in curves:
        for k, p in c.points:
            w.writerow([c.kind.value, k, format_psnr(p), c.trials, c.seed, f"{k / c.n_blocks:.6g}"])


def write_perceptual_csv(rows: Iterable[PerceptualRow], out: TextIO, image: str = "") -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["image", "encrypted_set", "psnr_db", "note"])
    for r in rows:
        w.writerow([image, r.label, "" if math.isnan(r.psnr) else format_psnr(r.psnr), r.note])


def write_timing_csv(reports: Iterable[TimingReport], out: TextIO, header: bool = True) -> None:
    w = csv.writer(out, lineterminator="\n")
    if header:
        w.writerow(["image", "size", "t_encode_s", "t_decode_s", "t_encrypt_s", "t_decrypt_s", "etr_pct", "dtr_pct"])
    for r in reports:
        w.writerow([
            r.image, f"{r.width}x{r.height}", f"{r.t_encode:.6f}", f"{r.t_decode:.6f}",
            f"{r.t_encrypt:.6f}", f"{r.t_decrypt:.6f}", f"{r.etr:.3f}", f"{r.dtr:.3f}",
        ])
