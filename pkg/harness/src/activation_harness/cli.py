"""Command-line entry point mirroring HarnessConfig."""

import argparse
import sys

from .config import ACTIVATIONS, ARCHITECTURES, HarnessConfig
from .datasets import DatasetUnavailable
from .dump import train_and_dump


def build_parser():
    parser = argparse.ArgumentParser(
        prog="activation-harness",
        description=(
            "Train a small CNN and dump per-batch activations, error signals, "
            "inputs and labels as NPY files indexed by manifest.json."
        ),
    )
    parser.add_argument("--arch", choices=ARCHITECTURES, default="lenet5-like")
    parser.add_argument(
        "--filters", type=int, nargs="+", default=None,
        help="conv filter counts (2 for lenet5-like, 4 for small-alexnet-like)",
    )
    parser.add_argument(
        "--dataset", choices=["auto", "mnist", "digits"], default="auto",
        help="auto uses MNIST when present locally, else the bundled digits set",
    )
    parser.add_argument("--subset", type=int, default=5000, help="training subset size")
    parser.add_argument("--epochs", type=int, default=2)
    parser.add_argument("--batch-size", type=int, default=128)
    parser.add_argument("--lr", type=float, default=0.1)
    parser.add_argument("--momentum", type=float, default=0.95)
    parser.add_argument("--activation", choices=ACTIVATIONS, default="sigmoid")
    parser.add_argument(
        "--dump-every", type=int, default=50,
        help="dump batches 0, k, 2k, ... of every epoch",
    )
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument(
        "--post-pool", action="store_true",
        help="dump conv maps after pooling instead of before",
    )
    parser.add_argument("--data-dir", default=None, help="local MNIST root")
    parser.add_argument("--run-id", default="run")
    parser.add_argument("--out", required=True, help="output directory")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    filters = args.filters
    if filters is None:
        filters = (6, 12) if args.arch == "lenet5-like" else (16, 32, 64, 128)
    try:
        config = HarnessConfig(
            architecture=args.arch,
            conv_filters=tuple(filters),
            dataset=args.dataset,
            subset_size=args.subset,
            lr=args.lr,
            momentum=args.momentum,
            epochs=args.epochs,
            batch_size=args.batch_size,
            dump_every=args.dump_every,
            activation=args.activation,
            seed=args.seed,
            post_pool=args.post_pool,
            data_dir=args.data_dir,
            run_id=args.run_id,
        )
        manifest = train_and_dump(config, args.out)
    except (DatasetUnavailable, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(manifest)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
