"""Command line entry point: ``sliceprop {segment,eval,phantom,experiments}``.

Exit codes: 0 success, 2 usage error, 3 I/O or validation error, 4 pipeline
warnings with ``--strict``.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
import time
from pathlib import Path

from .core import InvalidInputError
from .evaluation import aggregate, format_cohort, score_slices
from .mforest import MFParams
from .pgm import PGMError, load_mask, load_stack, save_mask, save_slice, slice_files
from .phantom import PhantomParams, generate_phantom
from .pipeline import PipelineConfig, PipelineMode, run_experiments, segment_stack
from .reports import write_experiments_report, write_report
from .rforest import RFParams
from .serialization import ModelFormatError

log = logging.getLogger("sliceprop")

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_WARNINGS = 0, 2, 3, 4
SEED_ENV = "SLICEPROP_SEED"
CLI_MODES = {"basic": PipelineMode.BASIC, "post": PipelineMode.POSTPROCESS, "full": PipelineMode.FULL}


def mask_name(slice_no: int) -> str:
    return f"lv_{slice_no:04d}.pgm"


def _default_seed() -> int:
    value = os.environ.get(SEED_ENV)
    if value is None:
        return 0
    try:
        return int(value)
    except ValueError:
        raise UsageError(f"{SEED_ENV}={value!r} is not an integer")


class UsageError(Exception):
    pass


def _config(args, mode: PipelineMode) -> PipelineConfig:
    seed = args.seed if args.seed is not None else _default_seed()
    return PipelineConfig(
        rf_params=RFParams(n_trees=args.trees, min_samples_leaf=args.min_leaf),
        mf_params=MFParams(n_trees=args.trees, min_samples_leaf=args.min_leaf),
        mode=mode,
        seed=seed,
    )


def _load_truth(gt_dir, n: int) -> list:
    files = slice_files(gt_dir)
    if len(files) != n:
        raise InvalidInputError(f"{gt_dir}: expected {n} ground-truth masks, found {len(files)}")
    return [load_mask(f) for f in files]


def _report(result, truth, seconds):
    return score_slices(
        result.masks,
        truth,
        mf=result.mf_masks,
        rf=result.rf_masks,
        config=result.config.as_dict(),
        wall_seconds=seconds,
        slice_warnings=result.warnings,
    )


def _print_summary(report):
    m = report.overall_mean
    sys.stdout.write(
        f"mean dice  mf {m['mf']:.4f}  rf {m['rf']:.4f}  combined {m['combined']:.4f}\n"
    )


def cmd_segment(args) -> int:
    stack = load_stack(args.stack)
    first = load_mask(args.first_mask)
    config = _config(args, CLI_MODES[args.mode])
    t0 = time.perf_counter()
    result = segment_stack(stack, first, config)
    seconds = time.perf_counter() - t0

    out = Path(args.out)
    for sub in ("", "mf", "rf"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    for k in range(1, len(stack)):
        name = mask_name(k + 1)
        save_mask(result.masks[k], out / name)
        save_mask(result.mf_masks[k], out / "mf" / name)
        save_mask(result.rf_masks[k], out / "rf" / name)
    for slice_no, msg in result.warnings:
        log.warning("slice %d: %s", slice_no, msg)

    if args.gt:
        report = _report(result, _load_truth(args.gt, len(stack)), seconds)
        write_report(report, args.report or out / "report.json")
        _print_summary(report)
    if args.strict and result.warnings:
        return EXIT_WARNINGS
    return EXIT_OK


def cmd_eval(args) -> int:
    gt_files = slice_files(args.gt)
    if len(gt_files) < 2:
        raise InvalidInputError(f"{args.gt}: need at least 2 ground-truth masks")
    truth = [load_mask(f) for f in gt_files]
    pred_dir = Path(args.pred)

    def load_dir(d: Path, required: bool):
        masks = [truth[0]]
        for f in gt_files[1:]:
            p = d / f.name
            if not p.is_file():
                if required:
                    raise FileNotFoundError(f"missing prediction {p}")
                return None
            masks.append(load_mask(p))
        return masks

    combined = load_dir(pred_dir, True)
    mf = load_dir(pred_dir / "mf", False) if (pred_dir / "mf").is_dir() else None
    rf = load_dir(pred_dir / "rf", False) if (pred_dir / "rf").is_dir() else None
    report = score_slices(combined, truth, mf=mf, rf=rf, config={"pred": str(pred_dir), "gt": str(args.gt)})
    write_report(report, args.report)
    sys.stdout.write(f"mean dice combined {report.overall_mean['combined']:.4f}\n")
    return EXIT_OK


def cmd_phantom(args) -> int:
    scale = args.size / 128
    base = PhantomParams()
    params = dataclasses.replace(
        base,
        size=args.size,
        n_slices=args.slices,
        r0=base.r0 * scale,
        shrink=base.shrink * scale,
        ring_width=base.ring_width * scale,
        blob_radius=tuple(r * scale for r in base.blob_radius),
        seed=args.seed if args.seed is not None else _default_seed(),
    )
    stack, truth = generate_phantom(params)
    out = Path(args.out)
    (out / "slices").mkdir(parents=True, exist_ok=True)
    (out / "gt").mkdir(parents=True, exist_ok=True)
    for k, (img, gt) in enumerate(zip(stack.slices, truth), start=1):
        save_slice(img, out / "slices" / f"slice_{k:04d}.pgm")
        save_mask(gt, out / "gt" / mask_name(k))
    save_mask(truth[0], out / "first_mask.pgm")
    return EXIT_OK


def cmd_experiments(args) -> int:
    stack = load_stack(args.stack)
    first = load_mask(args.first_mask)
    truth = _load_truth(args.gt, len(stack))
    base = _config(args, PipelineMode.FULL)
    reports = {}
    t0 = time.perf_counter()
    results = run_experiments(stack, first, base)
    for mode, result in results.items():
        reports[mode.value] = _report(result, truth, None)
    log.info("three modes in %.1f s", time.perf_counter() - t0)
    summary = aggregate(list(reports.values()))
    write_experiments_report(
        reports,
        args.report,
        summary={mode: {m: {"mean": e.mean, "sd": e.sd} for m, e in by.items()} for mode, by in summary.items()},
    )
    sys.stdout.write(format_cohort(summary) + "\n")
    if args.strict and any(r.warnings for r in results.values()):
        return EXIT_WARNINGS
    return EXIT_OK


def _add_forest_args(p):
    p.add_argument("--trees", type=int, default=50, help="trees per forest (default 50)")
    p.add_argument("--min-leaf", type=int, default=2, help="minimum samples per leaf (default 2)")
    p.add_argument("--seed", type=int, default=None, help=f"run seed (default ${SEED_ENV} or 0)")
    p.add_argument("--strict", action="store_true", help="exit 4 when the pipeline records warnings")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sliceprop", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("segment", help="propagate the first mask through a stack")
    p.add_argument("--stack", required=True, help="directory of P5 slices")
    p.add_argument("--first-mask", required=True, help="P5 mask of slice 1 (0/255)")
    p.add_argument("--mode", choices=sorted(CLI_MODES), default="full")
    p.add_argument("--out", required=True, help="output directory for lv_NNNN.pgm masks")
    p.add_argument("--gt", help="ground-truth mask directory; enables the report")
    p.add_argument("--report", help="report path (default OUT/report.json)")
    _add_forest_args(p)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("eval", help="score predicted masks against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--report", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("phantom", help="write a synthetic stack with ground truth")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--slices", type=int, default=10)
    p.add_argument("--size", type=int, default=128)
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser("experiments", help="run basic, post and full modes on one stack")
    p.add_argument("--stack", required=True)
    p.add_argument("--first-mask", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--report", required=True)
    _add_forest_args(p)
    p.set_defaults(func=cmd_experiments)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else EXIT_OK
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if getattr(args, "trees", 1) < 1 or getattr(args, "min_leaf", 1) < 1:
        parser.print_usage(sys.stderr)
        sys.stderr.write("sliceprop: error: --trees and --min-leaf must be positive\n")
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as e:
        sys.stderr.write(f"sliceprop: error: {e}\n")
        return EXIT_USAGE
    except (OSError, PGMError, InvalidInputError, ModelFormatError) as e:
        sys.stderr.write(f"sliceprop: error: {e}\n")
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
