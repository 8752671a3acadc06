"""Command line entry: render --in <csv-dir> --fig <name> --out <file>."""

from __future__ import annotations

import argparse
import sys

from .render import SchemaError, render


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="mmwbh-render", description="render figures from experiment CSV output"
    )
    parser.add_argument("--in", dest="csv_dir", required=True, help="directory with the CSVs")
    parser.add_argument("--fig", required=True, help="figure name")
    parser.add_argument("--out", required=True, help="output image path")
    args = parser.parse_args(argv)
    try:
        render(args.csv_dir, args.fig, args.out)
    except (SchemaError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
