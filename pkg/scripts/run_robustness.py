#!/usr/bin/env python3
"""Robustness comparison sweep: every attack scenario x agent count x algorithm.

Produces one metrics CSV per cell plus a manifest, ready for the figure
emitter, and prints a mean-final summary table. A full-size sweep takes a few
minutes; use --rounds/--samples/--reps to shrink it.
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from ross.cli import main as ross_main  # noqa: E402


def build_config(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = out / "base.cfg"
    cfg.write_text(
        "\n".join(
            [
                f"out_dir = {out}",
                f"seed = {args.seed}",
                "topology.kind = full",
                f"data.train_samples = {args.samples}",
                f"data.test_samples = {args.samples // 5}",
                "data.validation_fraction = 0.3333333333333333",
                "attack.fraction = 0.3",
                f"train.rounds = {args.rounds}",
                "train.lr = 0.001",
                "train.momentum = 0.5",
                "train.batch = 64",
                "diagnostics.enabled = false",
            ]
        )
        + "\n"
    )
    return cfg


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="runs/robustness")
    parser.add_argument("--rounds", type=int, default=150)
    parser.add_argument("--samples", type=int, default=3000)
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--reps", type=int, default=1)
    parser.add_argument("--n", type=int, nargs="+", default=[6, 10, 14])
    args = parser.parse_args()

    cfg = build_config(args)
    return ross_main(
        [
            "sweep",
            str(cfg),
            "--n",
            *[str(n) for n in args.n],
            "--attack",
            "longtail",
            "data_noise",
            "label_flip",
            "grad_poison",
            "--algo",
            "ross",
            "dmsgd",
            "dpsgd",
            "--reps",
            str(args.reps),
        ]
    )


if __name__ == "__main__":
    sys.exit(main())
