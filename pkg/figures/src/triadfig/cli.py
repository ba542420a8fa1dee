"""`triadred-render --figure <id> --in <dir> --out <file.png>`"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .render import FIGURE_IDS, FigureSpec, RenderError, render


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="triadred-render",
        description="Render simulation CSV bundles into figures")
    ap.add_argument("--figure", choices=FIGURE_IDS, required=True)
    ap.add_argument("--in", dest="in_dir", required=True,
                    help="bundle directory written by `triadred reproduce`")
    ap.add_argument("--out", required=True, help="output image path")
    ap.add_argument("--title", default="")
    args = ap.parse_args(argv)
    spec = FigureSpec(figure_id=args.figure, in_dir=Path(args.in_dir),
                      out_path=Path(args.out), title=args.title)
    try:
        out = render(spec)
    except RenderError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
