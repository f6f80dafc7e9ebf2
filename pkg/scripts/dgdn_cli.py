"""Command-line surface for masks, phantoms, training, reconstruction and evaluation.

Usage:
  python -m scripts.dgdn_cli mask-gen --size 64x64 --ratio 0.1 --scheme pseudo-radial --seed 0 --out mask.txt
  python -m scripts.dgdn_cli phantoms --synthetic 8 --size 32x32 --seed 0 --out data/train
  python -m scripts.dgdn_cli train --config train.json --out runs/r10
  python -m scripts.dgdn_cli reconstruct --checkpoint runs/r10/final.dgdn --mask mask.txt --input img.pgm --out recon.pgm
  python -m scripts.dgdn_cli baseline --method ista --mask mask.txt --input img.pgm --gamma 1e-3 --out ista.pgm
  python -m scripts.dgdn_cli eval --config eval.json --out reports/
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from baselines.classical import ista_reconstruct, write_objective_csv, zero_filling
from config.settings import settings
from core.errors import ConfigurationError, DataFormatError, DGDNError, ShapeError
from data.images import read_pgm, write_pgm
from data.phantoms import generate_phantoms
from evaluation.report import evaluate_dataset, load_test_set
from model.checkpoint import load_checkpoint
from model.network import init_model, reconstruct
from mri.fourier import MeasurementOp, simulate_measurement
from mri.masks import MaskScheme, generate_mask, read_mask, write_mask
from schemas.models import EvalConfig, IstaConfig, TrainConfig, load_config, parse_config
from training.trainer import load_datasets, train
from utils.logging_config import get_logger, setup_logging

logger = get_logger("cli")


def _size(text: str) -> Tuple[int, int]:
    try:
        height, width = (int(part) for part in text.lower().split("x"))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected HxW, got '{text}'") from exc
    if height < 1 or width < 1:
        raise argparse.ArgumentTypeError("extents must be positive")
    return height, width


def _seed(args: argparse.Namespace) -> int:
    return args.seed if args.seed is not None else settings.default_seed


def _load_pair(args: argparse.Namespace):
    mask = read_mask(args.mask)
    image = read_pgm(args.input)
    if image.shape != mask.shape:
        raise ShapeError("input image and mask extents differ", {"image": list(image.shape), "mask": list(mask.shape)})
    return mask, image


def _write_image(image: np.ndarray, path: str, bit_depth: int) -> Path:
    written = write_pgm(image, path, bit_depth)
    if read_pgm(written).shape != image.shape:
        raise DataFormatError("written image did not read back", {"path": str(written)})
    return written


def _csv_rows(path: Path) -> int:
    with path.open(newline="", encoding="utf-8") as handle:
        return sum(1 for _ in csv.reader(handle)) - 1


def cmd_mask_gen(args: argparse.Namespace) -> None:
    height, width = args.size
    mask = generate_mask(height, width, args.ratio, args.scheme, _seed(args))
    path = write_mask(mask, args.out)
    if not np.array_equal(read_mask(path).grid, mask.grid):
        raise DataFormatError("mask file did not read back", {"path": str(path)})
    print(f"mask={path}")
    print(f"count={mask.count}")
    print(f"achieved_ratio={mask.achieved_ratio!r}")


def cmd_phantoms(args: argparse.Namespace) -> None:
    height, width = args.size
    if height != width:
        raise ConfigurationError("phantoms are square; use --size NxN", {"size": [height, width]})
    out = Path(args.out)
    for index, image in enumerate(generate_phantoms(args.synthetic, height, seed=_seed(args))):
        _write_image(image, str(out / f"phantom{index:03d}.pgm"), 16)
    print(f"phantoms={args.synthetic}")
    print(f"directory={out}")


def cmd_train(args: argparse.Namespace) -> None:
    if args.config is None and args.synthetic is None:
        raise ConfigurationError("train needs --config or --synthetic N")
    cfg = load_config(TrainConfig, args.config) if args.config else parse_config(TrainConfig, {"synthetic_train": args.synthetic})
    updates = {}
    if args.synthetic is not None:
        updates.update(synthetic_train=args.synthetic, train_dir=None)
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.epochs is not None:
        updates["epochs"] = args.epochs
    cfg = parse_config(TrainConfig, {**cfg.model_dump(mode="json"), **updates})

    train_images, val_images = load_datasets(cfg)
    model = init_model(cfg.p, cfg.k, cfg.n_stages, seed=cfg.seed, distinct_b=cfg.distinct_b)
    out = Path(args.out)
    model, log = train(model, train_images, cfg, val_images, out)

    reloaded = load_checkpoint(out / "final.dgdn")
    if not all(np.array_equal(a.data, b.data) for a, b in zip(model.parameters(), reloaded.parameters())):
        raise DataFormatError("final checkpoint does not match the trained model", {"path": str(out / "final.dgdn")})
    if _csv_rows(out / "train_log.csv") != len(log.iterations):
        raise DataFormatError("training log is incomplete", {"path": str(out / "train_log.csv")})

    print(f"checkpoint={out / 'final.dgdn'}")
    print(f"final_loss={log.epochs[-1].mean_loss!r}")


def cmd_reconstruct(args: argparse.Namespace) -> None:
    model = load_checkpoint(args.checkpoint)
    mask, image = _load_pair(args)
    xhat = reconstruct(model, simulate_measurement(image, mask), MeasurementOp(mask))
    path = _write_image(xhat, args.out, args.bit_depth)
    print(f"reconstruction={path}")


def cmd_baseline(args: argparse.Namespace) -> None:
    mask, image = _load_pair(args)
    y, op = simulate_measurement(image, mask), MeasurementOp(mask)
    if args.method == "zero-filling":
        xhat = zero_filling(y, op)
    else:
        cfg = parse_config(IstaConfig, {"steps": args.steps, "eta": args.eta, "gamma": args.gamma, "transform": args.transform})
        result = ista_reconstruct(y, op, cfg, reference=image)
        xhat = result.image
        if args.objective_csv:
            write_objective_csv(result, args.objective_csv)
    path = _write_image(xhat, args.out, args.bit_depth)
    print(f"{args.method}={path}")


def cmd_eval(args: argparse.Namespace) -> None:
    cfg = load_config(EvalConfig, args.config)
    if args.synthetic is not None:
        updates = {"synthetic_test": args.synthetic, "test_dir": None}
        if args.seed is not None:
            updates["synthetic_seed"] = args.seed
        cfg = parse_config(EvalConfig, {**cfg.model_dump(mode="json"), **updates})

    image_ids, images = load_test_set(cfg)
    report = evaluate_dataset(cfg.methods, images, cfg.ratios, image_ids, cfg.mask_scheme, cfg.mask_seed, workers=args.workers)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    table = report.render_table()
    (out / "report.txt").write_text(table, encoding="utf-8")
    per_image = report.write_csv(out / "per_image.csv")
    aggregate = report.write_aggregate_csv(out / "aggregate.csv")
    if _csv_rows(per_image) != len(report.rows) or _csv_rows(aggregate) != len(report.aggregates):
        raise DataFormatError("report files are incomplete", {"directory": str(out)})
    sys.stdout.write(table)


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--seed", type=int, default=None, help="Seed (defaults to DGDN_DEFAULT_SEED)")
    shared.add_argument("--config", default=None, help="JSON configuration document")
    shared.add_argument("--out", required=True, help="Output file or directory")

    parser = argparse.ArgumentParser(prog="dgdn", description="Deep geometric distillation for CS-MRI")
    sub = parser.add_subparsers(dest="command", required=True)

    mask = sub.add_parser("mask-gen", parents=[shared], help="Generate a sampling mask")
    mask.add_argument("--size", type=_size, required=True)
    mask.add_argument("--ratio", type=float, required=True)
    mask.add_argument("--scheme", default=MaskScheme.PSEUDO_RADIAL.value, choices=[s.value for s in MaskScheme])
    mask.set_defaults(handler=cmd_mask_gen)

    phantoms = sub.add_parser("phantoms", parents=[shared], help="Write seeded synthetic phantoms")
    phantoms.add_argument("--synthetic", type=int, required=True)
    phantoms.add_argument("--size", type=_size, default=(32, 32))
    phantoms.set_defaults(handler=cmd_phantoms)

    train_cmd = sub.add_parser("train", parents=[shared], help="Train a model")
    train_cmd.add_argument("--synthetic", type=int, default=None, help="Train on N seeded phantoms")
    train_cmd.add_argument("--epochs", type=int, default=None)
    train_cmd.set_defaults(handler=cmd_train)

    images = argparse.ArgumentParser(add_help=False)
    images.add_argument("--mask", required=True)
    images.add_argument("--input", required=True)
    images.add_argument("--bit-depth", type=int, default=16, choices=[8, 16])

    recon = sub.add_parser("reconstruct", parents=[shared, images], help="Reconstruct one image with a checkpoint")
    recon.add_argument("--checkpoint", required=True)
    recon.set_defaults(handler=cmd_reconstruct)

    baseline = sub.add_parser("baseline", parents=[shared, images], help="Run a classical baseline")
    baseline.add_argument("--method", required=True, choices=["zero-filling", "ista"])
    baseline.add_argument("--gamma", type=float, default=1e-3)
    baseline.add_argument("--eta", type=float, default=1.0)
    baseline.add_argument("--steps", type=int, default=200)
    baseline.add_argument("--transform", default="dct2", choices=["dct2", "identity"])
    baseline.add_argument("--objective-csv", default=None)
    baseline.set_defaults(handler=cmd_baseline)

    evaluate = sub.add_parser("eval", parents=[shared], help="Evaluate methods over a test set")
    evaluate.add_argument("--synthetic", type=int, default=None, help="Evaluate on N seeded phantoms")
    evaluate.add_argument("--workers", type=int, default=1)
    evaluate.set_defaults(handler=cmd_eval)
    return parser


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    if args.command == "eval" and args.config is None:
        parser.print_usage(sys.stderr)
        print("dgdn eval: error: --config is required", file=sys.stderr)
        return 2

    setup_logging(settings.logging_config())
    try:
        args.handler(args)
    except DGDNError as exc:
        logger.error("command failed", data={"command": args.command, **exc.to_dict()})
        print(f"error: {exc.kind}: {exc.message}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: io_error: {exc}", file=sys.stderr)
        return 1
    return 0


def main(argv: Optional[List[str]] = None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
