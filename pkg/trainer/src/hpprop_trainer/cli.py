"""Command line: train the descent network and export HPW1 weights."""

import argparse
import sys

from .data import TrainConfig, build_patch_dataset
from .export import export_hpw1
from .model import DivergenceError, train


def build_parser():
    p = argparse.ArgumentParser(prog="hpprop-train")
    sub = p.add_subparsers(dest="command", required=True)
    t = sub.add_parser("train", help="train on a clean-image corpus")
    t.add_argument("--corpus", required=True, help="directory of clean images")
    t.add_argument("--out", required=True, help="output .hpw1 weights path")
    t.add_argument("--sigmas", type=float, nargs="+", default=None,
                   help="noise sigmas on the [0,1] intensity scale")
    t.add_argument("--epochs", type=int, default=30)
    t.add_argument("--batch-size", type=int, default=64)
    t.add_argument("--learning-rate", type=float, default=1e-3)
    t.add_argument("--patch-size", type=int, default=35)
    t.add_argument("--stride", type=int, default=35)
    t.add_argument("--no-augment", action="store_true")
    t.add_argument("--seed", type=int, default=0)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    kwargs = dict(
        corpus_dir=args.corpus,
        patch_size=args.patch_size,
        stride=args.stride,
        augment=not args.no_augment,
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
        seed=args.seed,
    )
    if args.sigmas is not None:
        kwargs["noise_sigmas"] = tuple(args.sigmas)
    try:
        cfg = TrainConfig(**kwargs)
        dataset = build_patch_dataset(cfg)
        print(f"dataset: {len(dataset[0])} patches")
        model, train_mse, val_mse = train(cfg, dataset, log=print)
        print(f"final train MSE {train_mse:.3e}, validation MSE {val_mse:.3e}")
        export_hpw1(model, args.out)
        print(f"wrote {args.out}")
    except (ValueError, DivergenceError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
