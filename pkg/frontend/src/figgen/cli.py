"""figgen <kind> --csv <in> --out <png> [--json <sidecar>]"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import SchemaError
from .render import KINDS, FigureSpec, render


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="figgen",
        description="Render a figure from a configadapt CSV output.")
    parser.add_argument("kind", choices=KINDS)
    parser.add_argument("--csv", required=True, help="input CSV path")
    parser.add_argument("--out", required=True,
                        help="output image path (.md for table_markdown)")
    parser.add_argument("--json", help="sidecar JSON path "
                        "(default: output path with .json suffix)")
    args = parser.parse_args(argv)

    spec_kwargs = dict(csv_path=Path(args.csv), kind=args.kind,
                       out_path=Path(args.out),
                       sidecar_path=Path(args.json) if args.json else None)
    try:
        render(FigureSpec(**spec_kwargs))
    except (SchemaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
