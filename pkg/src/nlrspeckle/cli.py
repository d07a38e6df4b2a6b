"""Command-line interface: ``nlrspeckle add-noise | denoise | metrics``."""

import argparse
import os
import sys


from . import metrics
from .config import format_config, load_config, parse_config, preset, preset_names
from .errors import NLRError
from .fileio import read_image, write_image
from .image import NoiseSpec, apply_gamma_noise, clip_positive, from_log
from .patches import block_match, write_groups_csv
from .solver import parm_fixed, parm_practical, write_diagnostics_csv


def _fail(msg):
    print(f"error: {msg}", file=sys.stderr)
    return 2


def cmd_add_noise(args):
    u = read_image(args.input)
    spec = NoiseSpec(args.looks, args.seed)
    write_image(args.output, apply_gamma_noise(u, spec), args.format)
    print(f"seed={spec.seed}")
    return 0


def _run_config(args):
    cfg = preset(args.preset) if args.preset else None
    if args.config:
        cfg = load_config(args.config, cfg)
    if args.set:
        cfg = parse_config("\n".join(args.set), cfg)
    if cfg is None:
        cfg = preset("L3-standard")
    return cfg


def cmd_denoise(args):
    cfg = _run_config(args)
    threads = args.threads or os.cpu_count() or 1
    v = read_image(args.input)
    model = cfg.model()
    algo = cfg.algo(threads=threads, diagnostics=args.diagnostics is not None)
    match = cfg.matching()
    if cfg.algorithm == "practical":
        x, diags = parm_practical(v, model, algo, match)
    else:
        if args.init:
            init = read_image(args.init)
        else:
            # start from the practical algorithm with the standard settings for these looks
            pre = preset(f"L{cfg.looks}-standard")
            x0, _ = parm_practical(v, pre.model(), pre.algo(threads=threads), pre.matching())
            init = from_log(x0)
        groups = block_match(init, match, threads=threads)
        if args.groups:
            write_groups_csv(args.groups, groups)
        x, diags = parm_fixed(v, init, groups, model, algo, looks=cfg.looks)
    u_hat = from_log(x)
    write_image(args.output, u_hat, "nlr1")
    if args.preview:
        write_image(args.preview, u_hat, "pgm")
    if args.diagnostics:
        write_diagnostics_csv(args.diagnostics, diags)
    if args.save_config:
        with open(args.save_config, "w", encoding="utf-8") as fh:
            fh.write(format_config(cfg))
    print(f"iterations={len(diags)}")
    return 0


def cmd_metrics(args):
    ref = read_image(args.reference)
    cand = read_image(args.candidate)
    want_all = not (args.psnr or args.ssim or args.enl)
    results = []
    if args.psnr or want_all:
        results.append(("psnr", metrics.psnr(ref, cand)))
    if args.ssim or want_all:
        results.append(("ssim", metrics.ssim(ref, cand)))
    if args.enl:
        results.append(("enl", metrics.enl(cand, metrics.Region.parse(args.enl))))
    if args.ratio:
        write_image(args.ratio, metrics.ratio_image(ref, clip_positive(cand)), "nlr1")
    for name, val in results:
        print(f"{name}={val!r}")
    if args.report:
        new = not os.path.exists(args.report)
        with open(args.report, "a", encoding="utf-8") as fh:
            if new:
                fh.write("reference,candidate,metric,value\n")
            for name, val in results:
                fh.write(f"{args.reference},{args.candidate},{name},{val!r}\n")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="nlrspeckle", description="Nonlocal low-rank speckle removal.")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("add-noise", help="degrade an image with L-look gamma speckle")
    a.add_argument("input")
    a.add_argument("output")
    a.add_argument("--looks", "-L", type=int, default=3)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--format", choices=["nlr1", "pgm", "pgm-ascii"], default="nlr1")
    a.set_defaults(func=cmd_add_noise)

    d = sub.add_parser("denoise", help="restore a speckled image")
    d.add_argument("input")
    d.add_argument("output", help="restored image, NLR1")
    d.add_argument("--config", help="key = value settings file")
    d.add_argument("--preset", help=f"built-in settings: {', '.join(preset_names())}")
    d.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one setting")
    d.add_argument("--threads", type=int, default=0, help="worker threads (default: all cores)")
    d.add_argument("--init", help="initial estimate for the fixed-group algorithm")
    d.add_argument("--preview", help="also write an 8-bit PGM")
    d.add_argument("--diagnostics", help="write per-iteration diagnostics CSV")
    d.add_argument("--groups", help="write the fixed patch groups as CSV")
    d.add_argument("--save-config", help="write the effective settings")
    d.set_defaults(func=cmd_denoise)

    m = sub.add_parser("metrics", help="compare a restored image to a reference")
    m.add_argument("reference")
    m.add_argument("candidate")
    m.add_argument("--psnr", action="store_true")
    m.add_argument("--ssim", action="store_true")
    m.add_argument("--enl", metavar="R,C,H,W", help="ENL of the candidate over a region")
    m.add_argument("--ratio", help="write reference/candidate as NLR1")
    m.add_argument("--report", help="append results to a CSV file")
    m.set_defaults(func=cmd_metrics)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if getattr(args, "threads", 0) < 0:
        return _fail("--threads must be nonnegative")
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        return _fail(f"cannot open {exc.filename}")
    except (NLRError, ValueError, OSError) as exc:
        return _fail(str(exc))


if __name__ == "__main__":
    sys.exit(main())
