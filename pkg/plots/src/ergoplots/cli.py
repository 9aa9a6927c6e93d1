"""Command line entry: render figures from exported run artifacts."""

import argparse
import sys

from .artifacts import ArtifactError
from . import render

KINDS = ("trajectory-heatmap", "gamma-curve", "sweep-table")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plots",
        description="Render figures from solver artifacts (JSON/CSV).",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_render = sub.add_parser("render", help="render one figure")
    p_render.add_argument("--kind", required=True, choices=KINDS)
    p_render.add_argument(
        "--in",
        dest="inputs",
        required=True,
        nargs="+",
        metavar="FILE",
        help="input artifacts; order: sweep CSV first, then trajectories",
    )
    p_render.add_argument("--out", required=True, help="output image path")
    return parser


def cmd_render(args) -> int:
    if args.kind == "trajectory-heatmap":
        if len(args.inputs) != 1:
            raise ArtifactError("trajectory-heatmap takes exactly one artifact")
        result = render.trajectory_heatmap(args.inputs[0], args.out)
    elif args.kind == "gamma-curve":
        if len(args.inputs) < 2:
            raise ArtifactError(
                "gamma-curve needs the sweep CSV plus its row artifacts"
            )
        result = render.gamma_curve(args.inputs[0], args.inputs[1:], args.out)
    else:
        if len(args.inputs) != 1:
            raise ArtifactError("sweep-table takes exactly one sweep CSV")
        result = render.sweep_table(args.inputs[0], args.out)
    print(f"wrote {result.out_path}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return cmd_render(args)
    except ArtifactError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
