"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 data error,
4 numeric degeneracy (an undefined statistic).
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from vqm3d import pipeline, video_io
from vqm3d.synthetic import FIXTURE_CAMERA, make_scene
from vqm3d.validation import REPORT_COLUMNS, ValidationDataError

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_DEGENERATE = 0, 2, 3, 4


def _synth(args) -> None:
    out = Path(args.outdir)
    cam = FIXTURE_CAMERA
    names = [f"synth{i}" for i in range(args.sequences)]
    lines = [
        "# synthetic fixture written by `vqm3d synth`",
        f"sequences = {', '.join(names)}",
        f"width = {args.width}",
        f"height = {args.height}",
        "format = gray",
        f"focal_length = {cam.focal_length}",
        f"baseline = {cam.baseline}",
        f"side = {cam.side}",
        f"alpha = {cam.alpha}",
        f"z_near = {cam.z_near}",
        f"z_far = {cam.z_far}",
        "channels = color, depth",
        "distortions = blur:7:2, blur:7:10, qp:28, qp:40, qp:50, loss:0.02:burst2, loss:0.05:burst2, loss:0.10:burst2",
        "metrics = 3vqm, psnr, wpsnr, ssim",
        "output_dir = results",
        f"seed = {args.seed}",
    ]
    for i, name in enumerate(names):
        colors, depths = make_scene(args.width, args.height, args.frames, seed=args.seed + i)
        video_io.write_video(colors, out / f"{name}_color.yuv", "gray")
        video_io.write_depth(depths, out / f"{name}_depth.yuv")
        lines += [f"{name}.reference = {name}_color.yuv", f"{name}.depth = {name}_depth.yuv"]
    video_io.atomic_write_bytes(out / "experiment.cfg", ("\n".join(lines) + "\n").encode())
    print(out / "experiment.cfg")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vqm3d", description="3VQM quality assessment for DIBR stereoscopic video")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    for name, help_ in (("degrade", "write degraded color/depth sequences"),
                        ("render", "synthesize virtual views for clean and degraded inputs"),
                        ("score", "compute metrics for every rendered job"),
                        ("run", "degrade, render and score in one go")):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("config", help="key = value experiment file")
        sp.add_argument("--workers", type=int, help="override the config's worker count")

    sp = sub.add_parser("validate", help="compare objective scores against DMOS")
    sp.add_argument("dmos", help="CSV with sequence_id, dmos[, metric columns]")
    sp.add_argument("--scores", help="scores.csv from `score`, or a wide sequence_id table")
    sp.add_argument("--out", help="report CSV path (default: print)")
    sp.add_argument("--metrics", help="comma-separated metric subset")
    sp.add_argument("--logistic", action="store_true", help="fit a 4-parameter logistic mapping first")

    sp = sub.add_parser("report", help="pivot scores.csv into a per-sequence table")
    sp.add_argument("scores")
    sp.add_argument("--metric", default="3vqm")
    sp.add_argument("--out")

    sp = sub.add_parser("synth", help="write a synthetic textured fixture and a matching config")
    sp.add_argument("outdir")
    sp.add_argument("--frames", type=int, default=48)
    sp.add_argument("--width", type=int, default=128)
    sp.add_argument("--height", type=int, default=128)
    sp.add_argument("--sequences", type=int, default=1)
    sp.add_argument("--seed", type=int, default=0)
    return p


def _config(args):
    cfg = pipeline.load_config(args.config)
    if getattr(args, "workers", None):
        cfg = dataclasses.replace(cfg, workers=max(1, args.workers))
    return cfg


def _print_rows(rows, columns) -> None:
    sys.stdout.write(video_io.render_csv(rows, columns))


def dispatch(args) -> int:
    if args.command in ("degrade", "render", "score", "run"):
        cfg = _config(args)
        fn = {"degrade": pipeline.cmd_degrade, "render": pipeline.cmd_render,
              "score": pipeline.cmd_score, "run": pipeline.cmd_run}[args.command]
        print(fn(cfg))
    elif args.command == "validate":
        metrics = [m.strip() for m in args.metrics.split(",")] if args.metrics else None
        try:
            reports = pipeline.cmd_validate(args.dmos, args.scores, args.out, metrics, args.logistic)
        except pipeline.DegenerateResult as exc:
            logging.error("%s", exc)
            return EXIT_DEGENERATE
        if args.out is None:
            _print_rows([r.as_row() for r in reports], REPORT_COLUMNS)
    elif args.command == "report":
        rows = pipeline.cmd_report(args.scores, args.metric, args.out)
        if args.out is None and rows:
            _print_rows(rows, list(rows[0].keys()))
    elif args.command == "synth":
        _synth(args)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return dispatch(args)
    except pipeline.ConfigError as exc:
        logging.error("config error: %s", exc)
        return EXIT_CONFIG
    except (video_io.DescriptorError, ValidationDataError, OSError) as exc:
        logging.error("data error: %s", exc)
        return EXIT_DATA
    except ValueError as exc:
        logging.error("data error: %s", exc)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
