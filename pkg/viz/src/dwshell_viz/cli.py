"""dwshell-viz KIND CSV... -o IMG"""

import argparse
import sys

from .io import VizInputError
from .render import KINDS, PlotJob, render


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="dwshell-viz",
        description="Render dwshell CSV outputs into figures.")
    p.add_argument("kind", choices=KINDS, help="figure kind")
    p.add_argument("inputs", nargs="+", metavar="CSV",
                   help="input CSV files (cloud, segment, locus or time series)")
    p.add_argument("-o", "--output", required=True, metavar="IMG",
                   help="output image path (.png, .pdf, .svg, ...)")
    p.add_argument("--title", default=None, help="figure title override")
    p.add_argument("--dpi", type=int, default=150)
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        out = render(PlotJob(kind=args.kind, inputs=args.inputs,
                             output=args.output, title=args.title,
                             dpi=args.dpi))
    except VizInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
