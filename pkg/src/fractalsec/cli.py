"""Command-line front end: codec, cipher and analysis campaigns."""
from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from importlib.resources import files
from pathlib import Path
from typing import Sequence

from . import analysis
from .bitstream import BitstreamError, pack, read_header, unpack
from .codec import DecodeError, decode, encode
from .crypt import CipherKey, CryptError, KeyFormatError, decrypt_params, encrypt_params, iv_bits, parse_iv
from .imaging import GrayImage, PgmError, psnr, read_pgm, write_pgm
from .model import PRESETS, CodecConfig, ConfigError, FixedGrid, Quadtree, preset

KEY_ENV = "FRACTALSEC_KEY"
BUNDLED_PREFIX = "bundled:"

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_CRYPTO = 4


class CliError(Exception):
    def __init__(self, message: str, status: int):
        super().__init__(message)
        self.status = status


def bundled_images() -> list[str]:
    return sorted(p.name[:-4] for p in files("fractalsec").joinpath("data").iterdir() if p.name.endswith(".pgm"))


def load_image(spec: str) -> GrayImage:
    """Read a PGM path, or ``bundled:NAME`` for one of the packaged test images."""
    if spec.startswith(BUNDLED_PREFIX):
        name = spec[len(BUNDLED_PREFIX):]
        if name not in bundled_images():
            raise CliError(f"no bundled image {name!r}; available: {', '.join(bundled_images())}", EXIT_USAGE)
        return read_pgm(files("fractalsec").joinpath("data", name + ".pgm"))
    return read_pgm(spec)


def _image_label(spec: str) -> str:
    return spec[len(BUNDLED_PREFIX):] if spec.startswith(BUNDLED_PREFIX) else Path(spec).stem


def _read_bytes(path: str) -> bytes:
    return Path(path).read_bytes()


def _write_bytes(path: str, data: bytes) -> None:
    Path(path).write_bytes(data)


def resolve_key(args, required: bool) -> CipherKey | None:
    text = args.key if args.key is not None else os.environ.get(KEY_ENV)
    if text is None:
        if required:
            raise CliError(f"this command requires --key (or {KEY_ENV})", EXIT_CRYPTO)
        return None
    try:
        return CipherKey.from_hex(text)
    except KeyFormatError as exc:
        # the message never contains the key text itself
        raise CliError(f"malformed key: {exc}", EXIT_CRYPTO) from None


def resolve_iv(args, width: int) -> int:
    try:
        return parse_iv(args.iv, width)
    except CryptError as exc:
        raise CliError(f"bad --iv: {exc}", EXIT_CRYPTO) from None


def build_config(args) -> CodecConfig:
    cfg = preset(args.preset)
    overrides = {
        name: getattr(args, name)
        for name in ("range_size", "domain_step", "bits_dx", "bits_dy", "bits_alpha", "bits_dg", "iterations")
        if getattr(args, name) is not None
    }
    part = cfg.partition
    if args.partition == "quadtree" or (args.partition is None and isinstance(part, Quadtree)):
        base = part if isinstance(part, Quadtree) else Quadtree()
        part = Quadtree(
            max_depth=args.max_depth if args.max_depth is not None else base.max_depth,
            split_threshold=args.split_threshold if args.split_threshold is not None else base.split_threshold,
        )
    elif args.partition == "grid":
        part = FixedGrid()
    return replace(cfg, partition=part, **overrides)


def _add_config_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("codec configuration")
    g.add_argument("--preset", choices=sorted(PRESETS), default="default")
    g.add_argument("--range-size", type=int, help="range block side B")
    g.add_argument("--domain-step", type=int, help="domain lattice step in pixels")
    g.add_argument("--bits-dx", type=int)
    g.add_argument("--bits-dy", type=int)
    g.add_argument("--bits-alpha", type=int)
    g.add_argument("--bits-dg", type=int, help="offset magnitude bits (sign bit is extra)")
    g.add_argument("--partition", choices=("grid", "quadtree"))
    g.add_argument("--max-depth", type=int, help="quadtree depth")
    g.add_argument("--split-threshold", type=float, help="quadtree split MSE threshold")
    g.add_argument("--iterations", type=int, help="decoder iterations")


def _add_key_args(p: argparse.ArgumentParser, iv: bool = False) -> None:
    p.add_argument("--key", help=f"128-bit key as 32 hex digits (default: ${KEY_ENV})")
    if iv:
        p.add_argument("--iv", default="random", help="initial chain value in hex, or 'random'")


def _open_out(path: str | None):
    if path is None or path == "-":
        return sys.stdout, False
    return open(path, "w", newline=""), True


def cmd_encode(args) -> int:
    cfg = build_config(args)
    img = load_image(args.input)
    key = resolve_key(args, required=False)
    code = encode(img, cfg)
    if key is not None:
        if args.key is None:
            print(f"encrypting with key from ${KEY_ENV}", file=sys.stderr)
        code = encrypt_params(code, key, resolve_iv(args, iv_bits(cfg.word_bits)))
    _write_bytes(args.output, pack(code))
    return EXIT_OK


def cmd_decode(args) -> int:
    code = unpack(_read_bytes(args.input))
    if code.encrypted:
        key = resolve_key(args, required=False)
        if key is None:
            raise CliError("encrypted payload requires --key", EXIT_CRYPTO)
        code = decrypt_params(code, key)
    img = decode(code, iterations=args.iterations)
    write_pgm(args.output, img)
    return EXIT_OK


def cmd_encrypt(args) -> int:
    code = unpack(_read_bytes(args.input))
    key = resolve_key(args, required=True)
    if code.encrypted:
        raise CliError("input is already encrypted", EXIT_CRYPTO)
    _write_bytes(args.output, pack(encrypt_params(code, key, resolve_iv(args, iv_bits(code.config.word_bits)))))
    return EXIT_OK


def cmd_decrypt(args) -> int:
    code = unpack(_read_bytes(args.input))
    key = resolve_key(args, required=True)
    if not code.encrypted:
        raise CliError("input is not encrypted", EXIT_CRYPTO)
    _write_bytes(args.output, pack(decrypt_params(code, key)))
    return EXIT_OK


def cmd_inspect(args) -> int:
    data = _read_bytes(args.input)
    head = read_header(data)
    code = unpack(data)
    info = head.describe()
    bits = info.pop("bits")
    info.pop("bits_per_block")
    for name, value in info.items():
        print(f"{name}: {value}")
    print(f"blocks: {len(code)}")
    if code.config.is_quadtree:
        print(f"tree flags: {code.tree_bits.size}")
    budget = ", ".join(f"{k} {v}" for k, v in bits.items())
    print(f"bit budget: {budget} = {head.bits_per_block} bits/block")
    return EXIT_OK


_KIND_NAMES = {k.value: k for k in analysis.ParamKind}


def _kinds(text: str, allow_tree: bool) -> list[analysis.ParamKind]:
    out = []
    for name in text.split(","):
        kind = _KIND_NAMES.get(name.strip())
        if kind is None or (kind is analysis.ParamKind.TREE_BITS and not allow_tree):
            raise CliError(f"unknown parameter kind {name!r}", EXIT_USAGE)
        out.append(kind)
    return out


def cmd_analyze_dist(args) -> int:
    cfg = build_config(args)
    code = encode(load_image(args.input), cfg)
    kinds = _kinds(args.kinds, allow_tree=True)
    if analysis.ParamKind.TREE_BITS in kinds and not cfg.is_quadtree:
        raise CliError("tree distribution needs --partition quadtree", EXIT_USAGE)
    out, close = _open_out(args.output)
    try:
        analysis.write_distribution_csv([analysis.param_distribution(code, k) for k in kinds], out)
    finally:
        if close:
            out.close()
    return EXIT_OK


def _k_values(text: str | None, n: int) -> list[int]:
    if text is None:
        return sorted({0, n // 64, n // 32, n // 16, n // 8, n // 4, n // 2})
    try:
        ks = [int(v) for v in text.split(",")]
    except ValueError:
        raise CliError(f"bad --k list {text!r}", EXIT_USAGE) from None
    if any(k < 0 or k > n for k in ks):
        raise CliError(f"k must lie in [0, {n}]", EXIT_USAGE)
    return ks


def cmd_analyze_sensitivity(args) -> int:
    cfg = build_config(args)
    img = load_image(args.input)
    code = encode(img, cfg)
    ks = _k_values(args.k, len(code))
    curves = [
        analysis.sensitivity_curve(img, code, kind, ks, args.trials, args.seed)
        for kind in _kinds(args.kinds, allow_tree=False)
    ]
    out, close = _open_out(args.output)
    try:
        analysis.write_sensitivity_csv(curves, out)
    finally:
        if close:
            out.close()
    return EXIT_OK


def cmd_analyze_perceptual(args) -> int:
    cfg = build_config(args)
    img = load_image(args.input)
    key = resolve_key(args, required=True)
    iv = resolve_iv(args, 16) if args.iv != "random" else 0x2A5B
    rows = analysis.perceptual_experiment(img, cfg, key, iv=iv)
    if args.out_dir:
        outdir = Path(args.out_dir)
        outdir.mkdir(parents=True, exist_ok=True)
        for row in rows:
            if row.image is not None:
                write_pgm(outdir / f"{_image_label(args.input)}_{row.label.replace('+', '_')}.pgm", row.image)
    out, close = _open_out(args.output)
    try:
        analysis.write_perceptual_csv(rows, out, _image_label(args.input))
    finally:
        if close:
            out.close()
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = build_config(args)
    key = resolve_key(args, required=True)
    inputs = args.inputs or [BUNDLED_PREFIX + n for n in ("camera_128", "camera_256", "camera_512")]
    out, close = _open_out(args.output)
    try:
        analysis.write_timing_csv([], out)
        for spec in inputs:
            report = analysis.timing_report(load_image(spec), cfg, key, args.repetitions, name=_image_label(spec))
            analysis.write_timing_csv([report], out, header=False)
            out.flush()
    finally:
        if close:
            out.close()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fractalsec", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("encode", help="PGM -> .frc, encrypting when a key is given")
    p.add_argument("input", help="PGM path or bundled:NAME")
    p.add_argument("output")
    _add_config_args(p)
    _add_key_args(p, iv=True)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help=".frc -> PGM, decrypting first if needed")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--iterations", type=int, help="override the stored iteration count")
    _add_key_args(p)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("encrypt", help="encrypt the alpha|offset words of a plain .frc")
    p.add_argument("input")
    p.add_argument("output")
    _add_key_args(p, iv=True)
    p.set_defaults(func=cmd_encrypt)

    p = sub.add_parser("decrypt", help="decrypt an encrypted .frc")
    p.add_argument("input")
    p.add_argument("output")
    _add_key_args(p)
    p.set_defaults(func=cmd_decrypt)

    p = sub.add_parser("inspect", help="print header fields and the per-block bit budget")
    p.add_argument("input")
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("analyze-dist", help="parameter value distributions as CSV")
    p.add_argument("input", help="PGM path or bundled:NAME")
    p.add_argument("-o", "--output", help="CSV path (default stdout)")
    p.add_argument("--kinds", default="dxy,alpha,dg,iso")
    _add_config_args(p)
    p.set_defaults(func=cmd_analyze_dist)

    p = sub.add_parser("analyze-sensitivity", help="PSNR after corrupting k blocks, as CSV")
    p.add_argument("input", help="PGM path or bundled:NAME")
    p.add_argument("-o", "--output", help="CSV path (default stdout)")
    p.add_argument("--kinds", default="dxy,alpha,dg,iso")
    p.add_argument("--k", help="comma-separated block counts (default: fractions of N)")
    p.add_argument("--trials", type=int, default=8)
    p.add_argument("--seed", type=int, default=1)
    _add_config_args(p)
    p.set_defaults(func=cmd_analyze_sensitivity)

    p = sub.add_parser("analyze-perceptual", help="decode PSNR with various parameter sets encrypted")
    p.add_argument("input", help="PGM path or bundled:NAME")
    p.add_argument("-o", "--output", help="CSV path (default stdout)")
    p.add_argument("--out-dir", help="also write the garbled decodes here")
    _add_key_args(p, iv=True)
    _add_config_args(p)
    p.set_defaults(func=cmd_analyze_perceptual)

    p = sub.add_parser("bench", help="encode/decode/encrypt/decrypt timing as CSV")
    p.add_argument("inputs", nargs="*", help="images (default: bundled camera 128/256/512)")
    p.add_argument("-o", "--output", help="CSV path (default stdout)")
    p.add_argument("--repetitions", type=int, default=5)
    _add_key_args(p)
    _add_config_args(p)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        msg, status = str(exc), exc.status
    except ConfigError as exc:
        msg, status = f"invalid configuration: {exc}", EXIT_USAGE
    except (CryptError, DecodeError) as exc:
        msg, status = str(exc), EXIT_CRYPTO if isinstance(exc, CryptError) else EXIT_IO
    except PgmError as exc:
        msg, status = f"cannot parse image: {exc}", EXIT_IO
    except BitstreamError as exc:
        msg, status = f"cannot parse .frc: {exc}", EXIT_IO
    except OSError as exc:
        msg, status = f"I/O error: {exc.strerror or exc} ({exc.filename})", EXIT_IO
    print(f"fractalsec: error: {msg}", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
