"""One command-line script per figure kind.

Each script takes ``--in`` (a harness output file), ``--out`` (the image to
write), and ``--format {png,svg}``.  Schema mismatches and unreadable inputs
exit 1 with a message on stderr; nothing is written in that case.
"""

from __future__ import annotations

import argparse
import sys

from .plots import (render_boxplot, render_covariance_bars, render_curve,
                    render_heatmap, render_trace, save_figure)
from .schema import read_summary, read_table


def _base_parser(description):
    parser = argparse.ArgumentParser(description=description)
    parser.add_argument("--in", dest="infile", required=True, metavar="FILE",
                        help="harness output file to plot")
    parser.add_argument("--out", required=True, metavar="FILE",
                        help="image file to write")
    parser.add_argument("--format", choices=("png", "svg"), default="png",
                        help="image format (default png)")
    return parser


def _run(argv, parser, render):
    args = parser.parse_args(argv)
    try:
        fig = render(args)
        save_figure(fig, args.out, args.format)
    except Exception as err:  # noqa: BLE001 - CLI boundary reports all
        print(f"error: {err}", file=sys.stderr)
        return 1
    print(f"wrote {args.out}")
    return 0


def trace_main(argv=None):
    parser = _base_parser("Parameter-convergence traces from "
                          "outer_cycles.csv")
    parser.add_argument("--ref", type=float, action="append", default=[],
                        metavar="VALUE",
                        help="dashed horizontal reference line (repeatable)")
    return _run(argv, parser, lambda args: render_trace(
        *read_table(args.infile, "outer", required=("replicate", "outer")),
        refs=args.ref))


def curve_main(argv=None):
    parser = _base_parser("RMSE curve over a one-parameter lattice from "
                          "grid.csv")
    parser.add_argument("--ref", type=float, action="append", default=[],
                        metavar="VALUE",
                        help="dashed vertical reference line (repeatable)")
    return _run(argv, parser, lambda args: render_curve(
        *read_table(args.infile, "grid", required=("rmse_mean", "rmse_std")),
        refs=args.ref))


def _parse_pair(text):
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected 'X,Y', got {text!r}")
    return float(parts[0]), float(parts[1])


def heatmap_main(argv=None):
    parser = _base_parser("RMSE heatmap over a two-parameter lattice from "
                          "grid.csv")
    parser.add_argument("--estimate", type=_parse_pair, action="append",
                        default=[], metavar="X,Y",
                        help="estimated parameter pair to circle "
                             "(repeatable)")
    return _run(argv, parser, lambda args: render_heatmap(
        *read_table(args.infile, "grid", required=("rmse_mean",)),
        estimates=args.estimate))


def boxplot_main(argv=None):
    parser = _base_parser("Box plot of final estimates across replicates "
                          "from summary.json")
    return _run(argv, parser, lambda args: render_boxplot(
        read_summary(args.infile,
                     required=("parameter_names", "replicates"))))


def covbars_main(argv=None):
    parser = _base_parser("Residual covariance by ring distance from "
                          "residual_cov.csv")
    return _run(argv, parser, lambda args: render_covariance_bars(
        *read_table(args.infile, "residual_cov")))


if __name__ == "__main__":
    sys.exit(trace_main())
