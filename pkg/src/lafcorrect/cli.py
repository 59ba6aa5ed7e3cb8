"""Command line interface.

Subcommands:

* ``correct``  - read a track document, correct every track against its
  geometry, write the corrected document;
* ``bench``    - run the synthetic noise benchmark, write the CSV report and
  heatmap figures;
* ``validate`` - report per-track constraint residuals without touching the
  frames.

Exit codes: 0 success, 2 schema or flag errors, 3 numerical failure in at
least one track (partial output is still written).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import bench
from .errors import LafCorrectionError, SchemaError
from .solver import assemble, correct_track
from .trackfile import build_track, load_document

EXIT_OK = 0
EXIT_SCHEMA = 2
EXIT_NUMERIC = 3

THREADS_ENV = "LAFCORRECT_THREADS"


def _worker_count() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            count = int(raw)
            if count >= 1:
                return count
        except ValueError:
            pass
        print(f"warning: ignoring invalid {THREADS_ENV}={raw!r}", file=sys.stderr)
    return os.cpu_count() or 1


def _parse_float_axis(spec: str) -> list[float]:
    """Parse "a..b:step", a comma list, or a single value."""
    spec = spec.strip()
    if ".." in spec:
        head, _, step_s = spec.partition(":")
        lo_s, _, hi_s = head.partition("..")
        lo, hi = float(lo_s), float(hi_s)
        step = float(step_s) if step_s else 1.0
        if step <= 0 or hi < lo:
            raise ValueError(f"bad range {spec!r}")
        count = int(round((hi - lo) / step)) + 1
        return [round(lo + k * step, 10) for k in range(count)]
    return [float(tok) for tok in spec.split(",") if tok.strip()]


def _parse_int_axis(spec: str) -> list[int]:
    spec = spec.strip()
    if ".." in spec:
        lo_s, _, hi_s = spec.partition("..")
        lo, hi = int(lo_s), int(hi_s)
        if hi < lo:
            raise ValueError(f"bad range {spec!r}")
        return list(range(lo, hi + 1))
    return [int(tok) for tok in spec.split(",") if tok.strip()]


def _observation_dict(obs, matrix) -> dict:
    return {
        "view_id": obs.view_id,
        "x": float(obs.x),
        "y": float(obs.y),
        "M": [float(v) for v in np.asarray(matrix).reshape(-1)],
    }


def _echo_observation(obs) -> dict:
    out = {"view_id": obs.view_id, "x": float(obs.x), "y": float(obs.y)}
    if obs.is_partial:
        out["sigma"] = float(obs.sigma)
        out["theta"] = float(obs.theta)
    else:
        out["M"] = [float(v) for v in obs.m.reshape(-1)]
    return out


def _echo_geometry(doc) -> dict:
    if doc.pose_based:
        return {
            "cameras": [
                {
                    "id": cam_id,
                    "K": cam.K.tolist(),
                    "R": cam.R.tolist(),
                    "t": cam.t.tolist(),
                }
                for cam_id, cam in doc.cameras.items()
            ]
        }
    return {
        "pairwise": [
            {"i": i, "j": j, "F": F.tolist()} for (i, j), F in doc.pairwise.items()
        ]
    }


def cmd_correct(args) -> int:
    doc = load_document(args.input)
    normalize = args.row_normalize == "on"

    def one(record):
        try:
            track = build_track(doc, record, pairs_mode=args.pairs, normalize=normalize)
            return correct_track(track, path=args.path), None
        except LafCorrectionError as exc:
            return None, f"{type(exc).__name__}: {exc}"

    with ThreadPoolExecutor(max_workers=_worker_count()) as pool:
        outcomes = list(pool.map(one, doc.tracks))

    out = _echo_geometry(doc)
    out_tracks = []
    any_failed = False
    for record, (result, error) in zip(doc.tracks, outcomes):
        if error is not None:
            any_failed = True
            out_tracks.append({
                "observations": [_echo_observation(o) for o in record.observations],
                "report": {"status": "error", "message": error},
            })
            continue
        report = {
            "status": "ok",
            "residual_before": result.residual_before,
            "residual_after": result.residual_after,
            "path": result.path,
        }
        if result.warnings:
            report["warnings"] = list(result.warnings)
        out_tracks.append({
            "observations": [
                _observation_dict(o, m)
                for o, m in zip(record.observations, result.matrices)
            ],
            "report": report,
        })
    out["tracks"] = out_tracks
    with open(args.output, "w", encoding="utf-8") as fh:
        json.dump(out, fh, indent=2)
        fh.write("\n")
    return EXIT_NUMERIC if any_failed else EXIT_OK


def cmd_validate(args) -> int:
    doc = load_document(args.input)
    if not doc.tracks:
        print("no tracks")
        return EXIT_OK
    feasible = True
    for n, record in enumerate(doc.tracks):
        try:
            track = build_track(doc, record, normalize=args.row_normalize == "on")
            cs = assemble(track)
            residual = float(cs.pair_residuals(cs.omega_hat).max())
        except LafCorrectionError as exc:
            print(f"track {n}: error ({type(exc).__name__}: {exc})")
            feasible = False
            continue
        verdict = "feasible" if residual <= args.threshold else "infeasible"
        if verdict == "infeasible":
            feasible = False
        print(f"track {n}: max residual {residual:.3e} ({verdict})")
    print(f"verdict: {'feasible' if feasible else 'infeasible'} "
          f"at threshold {args.threshold:g}")
    return EXIT_OK


def cmd_bench(args, parser) -> int:
    try:
        sigmas = _parse_float_axis(args.sigmas)
        views = _parse_int_axis(args.views)
    except ValueError as exc:
        parser.error(str(exc))
    if not sigmas or any(s < 0 for s in sigmas):
        parser.error("noise levels must be nonnegative")
    if not views or min(views) < 2:
        parser.error("benchmark needs at least 2 views")
    if args.trials < 1:
        parser.error("need at least one trial per cell")
    modes = {
        "gt": (bench.MODE_GROUND_TRUTH,),
        "8pt": (bench.MODE_EIGHT_POINT,),
        "both": (bench.MODE_GROUND_TRUTH, bench.MODE_EIGHT_POINT),
    }[args.f_mode]
    grids = bench.run_grid(
        sigmas, views, args.trials,
        f_modes=modes,
        path=args.path,
        seed=args.seed,
        eight_point_points=args.points,
        eight_point_radius=args.point_radius,
        constraint_mode=args.constraint_mode,
    )
    csv_path = Path(args.csv)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    rows = bench.write_grid_csv(grids, csv_path, include_timing=args.timing)
    messages = [f"wrote {rows} rows to {csv_path}"]
    if not args.no_figures:
        from .plots import save_grid_heatmaps

        fig_dir = Path(args.figures) if args.figures else csv_path.parent
        paths = save_grid_heatmaps(grids, fig_dir, stem=csv_path.stem)
        messages.append(f"figures: {', '.join(str(p) for p in paths)}")
    corrected = [g for g in grids if g.label != bench.GRID_INPUT]
    if corrected:
        grid = corrected[0]
        if 5 in grid.view_counts:
            row = grid.view_counts.index(5)
            t = float(np.nanmean(grid.mean_time_us[row]))
            messages.append(f"5-view mean correction time: {t:.1f} us")
        else:
            t = float(np.nanmean(grid.mean_time_us))
            messages.append(f"mean correction time (all views): {t:.1f} us")
    print("; ".join(messages))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lafcorrect",
        description="Correct multi-view local affine frames against epipolar geometry",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_correct = sub.add_parser("correct", help="correct the tracks of a document")
    p_correct.add_argument("--input", required=True)
    p_correct.add_argument("--output", required=True)
    p_correct.add_argument("--path", choices=["qr", "svd", "kkt"], default=None,
                           help="solve path; default follows the geometry source")
    p_correct.add_argument("--row-normalize", choices=["on", "off"], default="on")
    p_correct.add_argument("--pairs", choices=["all", "chain"], default="all")

    p_bench = sub.add_parser("bench", help="run the synthetic noise benchmark")
    p_bench.add_argument("--sigmas", default="0.0..1.0:0.1",
                         help='noise levels, e.g. "0.0..1.0:0.1" or "0.1,0.5"')
    p_bench.add_argument("--views", default="2..10",
                         help='view counts, e.g. "2..10" or "2,5,10"')
    p_bench.add_argument("--trials", type=int, default=1000)
    p_bench.add_argument("--f-mode", choices=["gt", "8pt", "both"], default="both")
    p_bench.add_argument("--path", choices=["qr", "svd"], default=None)
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--csv", required=True)
    p_bench.add_argument("--points", type=int, default=50,
                         help="correspondences per pair for eight-point estimation")
    p_bench.add_argument("--point-radius", type=float, default=2.0,
                         help="radius of the ball the estimation points are drawn from")
    p_bench.add_argument("--constraint-mode", choices=["pinhole", "central"],
                         default="pinhole")
    p_bench.add_argument("--timing", action="store_true",
                         help="write measured per-correction times to the CSV "
                              "(off keeps identical seeds byte-identical)")
    p_bench.add_argument("--figures", default=None,
                         help="directory for heatmap PNGs (default: next to the CSV)")
    p_bench.add_argument("--no-figures", action="store_true")

    p_validate = sub.add_parser("validate", help="report per-track residuals")
    p_validate.add_argument("--input", required=True)
    p_validate.add_argument("--threshold", type=float, default=1e-6)
    p_validate.add_argument("--row-normalize", choices=["on", "off"], default="on")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "correct":
            return cmd_correct(args)
        if args.command == "bench":
            return cmd_bench(args, parser)
        return cmd_validate(args)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA


if __name__ == "__main__":
    sys.exit(main())
