"""casbp-plot: render figures from a solver output directory."""

from __future__ import annotations

import argparse
import sys

from . import render


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="casbp-plot",
                                 description="Render heatmap panels and the convergence "
                                             "curve from a solution directory")
    ap.add_argument("dir", help="solution directory written by the solver")
    ap.add_argument("--quantity", default="all",
                    choices=["rho", "u", "reaction", "phi", "phi_hat", "all"],
                    help="which snapshot family to render (default: all present)")
    ap.add_argument("--output", default="plots", help="directory for the images")
    args = ap.parse_args(argv)
    try:
        written = render.render_all(args.dir, args.quantity, args.output)
    except (OSError, ValueError) as exc:
        print(f"casbp-plot: error: {exc}", file=sys.stderr)
        return 1
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
