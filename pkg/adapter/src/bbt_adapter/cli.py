"""Adapter command-line entry points.

`bbt-export` converts a stored upstream model dump into an interchange
dataset directory; `bbt-plot` renders 2-D embedding panels from exported
feature tables. Exit codes match the core CLI: 0 success, 1 usage error,
2 data error, 3 internal error.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from bbt.errors import BbtError, InternalError

from .export import ExportJob, export_recording
from .plotting import plot_embedding


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's default 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _dispatch(fn, args) -> int:
    try:
        fn(args)
    except InternalError as e:
        print(f"{Path(sys.argv[0]).name}: internal error: {e}", file=sys.stderr)
        return 3
    except BbtError as e:
        print(f"{Path(sys.argv[0]).name}: error: {e}", file=sys.stderr)
        return 2
    return 0


def export_main(argv: list[str] | None = None) -> int:
    p = _Parser(prog="bbt-export",
                description="export an upstream recording dump to interchange files")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--mock", type=Path,
                     help="directory of stored upstream model outputs")
    src.add_argument("--video", type=Path,
                     help="raw video (requires live model inference)")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--transpose-pointmap", action="store_true",
                   help="swap point-map axes for dumps stored column-major")
    args = p.parse_args(argv)
    if args.video is not None:
        p.error("live inference is not available in this build; use --mock")

    def run(a):
        out = export_recording(ExportJob(a.mock, a.out, a.transpose_pointmap))
        print(f"exported {a.mock} -> {out}")
    return _dispatch(run, args)


def plot_main(argv: list[str] | None = None) -> int:
    p = _Parser(prog="bbt-plot",
                description="2-D embedding panels of exported feature tables")
    p.add_argument("--features", required=True, type=Path, nargs="+",
                   help="healthy reference feature CSVs")
    p.add_argument("--overlay", type=Path, action="append", default=[],
                   help="patient feature CSV; repeat for one panel each")
    p.add_argument("--n-neighbors", type=int, default=20)
    p.add_argument("--min-dist", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--coords-out", type=Path,
                   help="coordinates CSV (default: alongside the image)")
    args = p.parse_args(argv)

    def run(a):
        result = plot_embedding(a.features, a.overlay, a.out, a.coords_out,
                                n_neighbors=a.n_neighbors, min_dist=a.min_dist,
                                seed=a.seed)
        print(f"embedded {result.coords.shape[0]} frames -> {a.out}")
    return _dispatch(run, args)
