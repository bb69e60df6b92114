"""`emit-figs` command: sweep manifest -> multi-panel PNG/SVG figures."""

import argparse
import sys

from .render import METRICS, FigureSpec, RenderError, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="emit-figs", description=__doc__)
    parser.add_argument("--manifest", required=True, help="sweep manifest.csv path")
    parser.add_argument("--metric", default="test_acc", choices=METRICS)
    parser.add_argument("--out", default="figs", help="output directory")
    parser.add_argument(
        "--formats", default="png,svg", help="comma-separated image formats (default png,svg)"
    )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = FigureSpec(
            manifest=args.manifest,
            metric=args.metric,
            out_dir=args.out,
            formats=tuple(args.formats.split(",")),
        )
        written = render(spec)
    except RenderError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for path in written:
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
