"""``specmark`` command line: embed, extract, attack, bench, train, capacity.

Exit codes: 0 ok, 2 config, 3 I/O, 4 capacity, 5 divergence.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from . import bench
from .attacks import KINDS, AttackSpec, apply_attack
from .codec import capacity_bound, embed, format_bits, parse_message
from .config import RunConfig, load_config
from .corpus import load_corpus, synthetic_corpus
from .decoder import extract
from .errors import ConfigError, DivergenceError, SpecMarkError
from .imagecore import load_image, save_image
from .metrics import bra, psnr, ssim
from .model import SpecMarkModel, load_model, save_model
from .training import TrainConfig, train

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_CAPACITY, EXIT_DIVERGENCE = 0, 2, 3, 4, 5


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def _config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if getattr(args, "seed", None) is not None:
        cfg = cfg.replace(seed=args.seed)
    return cfg


def _model(args):
    return load_model(args.model) if args.model else None


def cmd_embed(args) -> int:
    cfg = _config(args)
    img = load_image(args.input)
    msg = parse_message(args.message, cfg.bit_length)
    marked = embed(img, msg, cfg, _model(args))
    save_image(marked, args.output)
    stored = load_image(args.output)
    print(f"psnr {psnr(img, stored):.4f}")
    if min(img.height, img.width) >= 11:
        print(f"ssim {ssim(img, stored):.6f}")
    return EXIT_OK


def cmd_extract(args) -> int:
    cfg = _config(args)
    res = extract(load_image(args.input), cfg, _model(args))
    print(format_bits(res.bits))
    if args.expect is not None:
        expected = parse_message(args.expect, cfg.bit_length)
        print(f"bra {bra(expected, res.bits):.4f}")
    return EXIT_OK


def cmd_attack(args) -> int:
    spec = AttackSpec(args.kind, args.strength, args.seed)
    save_image(apply_attack(load_image(args.input), spec), args.output)
    return EXIT_OK


def _strengths(text):
    try:
        return [float(s) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad strength list {text!r}") from exc


def cmd_bench(args) -> int:
    cfg = _config(args)
    names, images = load_corpus(args.corpus)
    if not images:
        raise ConfigError(f"no PNG images in {args.corpus}")
    attacks = [a.strip() for a in args.attacks.split(",") if a.strip()]
    for a in attacks:
        if a not in KINDS:
            raise ConfigError(f"unknown attack kind {a!r}")
    strengths = _strengths(args.strengths)
    rows = bench.run_grid(images, [os.path.basename(n) for n in names], cfg, _model(args),
                          attacks, strengths, cfg.seed, args.threads)
    csv_path, json_path = bench.write_report(rows, args.out)
    ok = sum(1 for r in rows if not r["error"])
    print(f"{ok}/{len(rows)} cells ok; wrote {csv_path} and {json_path}")
    return EXIT_OK if ok else 1


def cmd_train(args) -> int:
    cfg = _config(args)
    if args.synthetic:
        corpus = synthetic_corpus(args.synthetic, args.size, seed=cfg.seed)
    else:
        if not args.corpus:
            raise ConfigError("give a corpus directory or --synthetic COUNT")
        _, corpus = load_corpus(args.corpus)
    if not corpus:
        raise ConfigError("training corpus is empty")
    tcfg = TrainConfig(steps=args.steps, batch_size=args.batch_size, seed=cfg.seed)
    init = SpecMarkModel.initialize(corpus[0].channels, cfg.conv_layers, cfg.kernel_size, cfg.alpha,
                                    cfg.theta, seed=cfg.seed)
    report_path = args.report or os.path.splitext(args.output)[0] + "_train.csv"

    def progress(row):
        if args.verbose:
            print(f"step {row['step']:5d} total {row['total']:.6f} enc {row['enc']:.6f} dec {row['dec']:.6f}")

    try:
        model, report = train(corpus, cfg, tcfg, init, progress=progress)
    except DivergenceError as exc:
        if exc.checkpoint is not None:
            save_model(exc.checkpoint, args.output)
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    save_model(model, args.output)
    report.write_csv(report_path)
    if report.rows:
        print(f"loss {report.rows[0]['total']:.6f} -> {report.rows[-1]['total']:.6f}; theta {model.theta:.6f}")
    return EXIT_OK


def cmd_capacity(args) -> int:
    print(capacity_bound(args.height, args.width, args.channels, args.level, args.fspectral, args.bits_per_coeff))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="specmark", description="Wavelet/spectral image watermarking toolkit.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def keyed(sp):
        sp.add_argument("--config", help="JSON run config (the extraction key)")
        sp.add_argument("--model", help="specmark_model_v1 file; identity stacks if omitted")

    sp = sub.add_parser("embed", help="watermark an image")
    sp.add_argument("input")
    sp.add_argument("output")
    sp.add_argument("--message", required=True, help="bit string or 0x-prefixed hex")
    keyed(sp)
    sp.set_defaults(func=cmd_embed)

    sp = sub.add_parser("extract", help="decode the message from an image")
    sp.add_argument("input")
    sp.add_argument("--expect", help="expected message; prints BRA")
    keyed(sp)
    sp.set_defaults(func=cmd_extract)

    sp = sub.add_parser("attack", help="apply one distortion")
    sp.add_argument("input")
    sp.add_argument("output")
    sp.add_argument("--kind", required=True)
    sp.add_argument("--strength", type=float, default=0.0)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_attack)

    sp = sub.add_parser("bench", help="robustness grid over a corpus")
    sp.add_argument("corpus")
    sp.add_argument("--attacks", default="noise,jpeg,brightness,contrast")
    sp.add_argument("--strengths", default="0,0.25,0.5,0.75,1")
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--threads", type=int)
    keyed(sp)
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("train", help="fit stacks and threshold")
    sp.add_argument("corpus", nargs="?")
    sp.add_argument("--synthetic", type=int, default=0, metavar="COUNT")
    sp.add_argument("--size", type=int, default=128)
    sp.add_argument("--steps", type=int, default=300)
    sp.add_argument("--batch-size", type=int, default=32)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--output", "-o", required=True, help="model file to write")
    sp.add_argument("--report", help="training CSV path")
    sp.add_argument("--config")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("capacity", help="theoretical capacity bound")
    sp.add_argument("width", type=int)
    sp.add_argument("height", type=int)
    sp.add_argument("channels", type=int)
    sp.add_argument("level", type=int)
    sp.add_argument("fspectral", type=float)
    sp.add_argument("bits_per_coeff", type=int)
    sp.set_defaults(func=cmd_capacity)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except SpecMarkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except FloatingPointError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE


if __name__ == "__main__":
    sys.exit(main())
