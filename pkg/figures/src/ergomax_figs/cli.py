"""Command-line entry point: ergomax-figs <kind> --in <csv...> --out <img>."""

from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from .io import FigureError
from .render import FIGURE_KINDS, FigureSpec, render


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="ergomax-figs",
        description="Render diagnostic figures from ergomax run artifacts.")
    p.add_argument("kind", choices=FIGURE_KINDS)
    p.add_argument("--in", dest="inputs", nargs="+", required=True,
                   metavar="CSV", help="input CSV file(s)")
    p.add_argument("--summary", help="the run's summary.json")
    p.add_argument("--out", required=True, help="output image path")
    p.add_argument("--xscale", choices=["linear", "log"])
    p.add_argument("--yscale", choices=["linear", "log"])
    p.add_argument("--reference", type=float,
                   help="reference level for ratio figures (default 1.0)")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    options = {key: value for key, value in
               [("xscale", args.xscale), ("yscale", args.yscale),
                ("reference", args.reference)]
               if value is not None}
    spec = FigureSpec(kind=args.kind, inputs=tuple(args.inputs),
                      output=args.out, summary=args.summary, options=options)
    try:
        result = render(spec)
    except (FigureError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(result.output)
    return 0


if __name__ == "__main__":
    sys.exit(main())
