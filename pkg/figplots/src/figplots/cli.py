"""Command line: figplots <kind> --csv IN [--csv IN2 ...] --out FILE."""

from __future__ import annotations

import argparse
import sys

from .render import KINDS, PlotSpec, RenderError, render


def build_parser():
    parser = argparse.ArgumentParser(
        prog="figplots", description="Render cavsim CSV artifacts as figures.")
    parser.add_argument("kind", choices=KINDS, help="figure kind")
    parser.add_argument("--csv", action="append", required=True,
                        help="input CSV (repeatable for overlay kinds)")
    parser.add_argument("--out", required=True, help="output image (.svg/.png/.pdf)")
    parser.add_argument("--x-label", default="")
    parser.add_argument("--y-label", default="")
    parser.add_argument("--x-scale", default="linear", choices=("linear", "log"))
    parser.add_argument("--y-scale", default="linear", choices=("linear", "log"))
    parser.add_argument("--db-range", type=float, default=None,
                        help="symmetric color range for maps (dB)")
    parser.add_argument("--title", default="")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    spec = PlotSpec(csv_paths=tuple(args.csv), kind=args.kind, output=args.out,
                    x_label=args.x_label, y_label=args.y_label,
                    x_scale=args.x_scale, y_scale=args.y_scale,
                    db_range=args.db_range, title=args.title)
    try:
        out = render(spec)
    except (RenderError, OSError) as exc:
        print(f"figplots: {exc}", file=sys.stderr)
        return 1
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
