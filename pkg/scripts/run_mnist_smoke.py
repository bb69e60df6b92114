#!/usr/bin/env python3
"""Reduced-scale MNIST run (6000 images, MLP-64, 60 rounds, long-tail shards).

Expects the four standard IDX files under --data-dir (or $ROSS_MNIST_DIR).
"""

import argparse
import os
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from ross.config import default_config  # noqa: E402
from ross.runner import run_experiment  # noqa: E402


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--data-dir", default=os.environ.get("ROSS_MNIST_DIR", "data/mnist"))
    parser.add_argument("--algo", default="ross", choices=("ross", "dpsgd", "dmsgd"))
    parser.add_argument("--rounds", type=int, default=60)
    parser.add_argument("--seed", type=int, default=42)
    args = parser.parse_args()

    root = Path(args.data_dir)
    files = {
        "data.train_images": root / "train-images-idx3-ubyte",
        "data.train_labels": root / "train-labels-idx1-ubyte",
        "data.test_images": root / "t10k-images-idx3-ubyte",
        "data.test_labels": root / "t10k-labels-idx1-ubyte",
    }
    missing = [str(p) for p in files.values() if not p.exists()]
    if missing:
        print("missing IDX files:\n  " + "\n  ".join(missing), file=sys.stderr)
        return 2

    cfg = default_config().with_overrides(
        **{
            "train.algo": args.algo,
            "seed": args.seed,
            "topology.kind": "full",
            "topology.n": 10,
            "model.kind": "mlp",
            "model.hidden": (64,),
            "data.source": "mnist",
            **{key: str(path) for key, path in files.items()},
            "data.limit": 6000,
            "data.partition_mu": 0.25,
            "train.rounds": args.rounds,
            "train.lr": 0.001,
            "train.momentum": 0.5,
            "train.batch": 260,
            "shapley.validation_subsample": 200,
            "diagnostics.enabled": False,
        }
    )
    result = run_experiment(cfg)
    for rec in result.metrics:
        if rec.round % 10 == 0 or rec.round == 1:
            print(
                f"round {rec.round:3d}  loss {rec.avg_train_loss:.4f}  "
                f"acc {rec.test_acc:.4f}  consensus {rec.consensus_dist:.2e}"
            )
    return 0


if __name__ == "__main__":
    sys.exit(main())
