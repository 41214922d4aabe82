"""Command-line pipeline.

Subcommands: generate, track, pod, spod, reconstruct, error,
export-curves.  Running with flags only (``spod --config run.cfg``)
defaults to the spod subcommand.  Exit codes: 0 success, 1 usage or
configuration error, 2 data error, 3 convergence failure.  Diagnostics
go to stderr; results and file paths to stdout.
"""

import argparse
import os
import sys

import numpy as np

from . import generators, io
from .core import FrameShifts, reconstruct
from .greedy import GreedyConfig, spod_decompose
from .pod import modes_for_tolerance, truncation_curve
from .shifts import ShiftSpec
from .snapshots import SnapshotSet, center_rows, relative_error, scale_variables
from .tracking import STATISTICS, center_shifts, track_front


class _Usage(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad flags; we reserve 2 for data
    # errors, so route usage problems through an exception instead
    def error(self, message):
        raise _Usage(message)


def _build_parser() -> _Parser:
    p = _Parser(prog="spod", description=__doc__,
                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command")

    g = sub.add_parser("generate", help="write a synthetic scenario")
    g.add_argument("scenario",
                   choices=["wave", "three-signal", "crossing-fronts"])
    g.add_argument("--out", required=True, help="output directory")
    g.add_argument("--m", type=int, default=None)
    g.add_argument("--n", type=int, default=None)
    g.add_argument("--t-final", type=float, default=None)

    t = sub.add_parser("track", help="estimate shifts from a variable block")
    t.add_argument("snapshots")
    t.add_argument("--block", default=None,
                   help="variable block name (default: first block)")
    t.add_argument("--statistic", choices=list(STATISTICS),
                   default="difference")
    t.add_argument("--windows", default=None,
                   help="window schedule j0:j1@i0:i1,... (index pairs)")
    t.add_argument("--smooth", type=int, default=0)
    t.add_argument("--negate", choices=["auto", "yes", "no"], default="auto",
                   help="negate centered positions; 'auto' negates on "
                        "periodic grids so the CSV feeds T(d) directly")
    t.add_argument("--out", required=True, help="shift CSV path")

    d = sub.add_parser("pod", help="POD baseline: mode counts and SV decay")
    d.add_argument("snapshots")
    d.add_argument("--tol", type=float, default=None,
                   help="print minimal modes for this root-scale tolerance")
    d.add_argument("--curve", default=None, help="write SV-decay CSV here")
    d.add_argument("--center", dest="center", action="store_true", default=True)
    d.add_argument("--no-center", dest="center", action="store_false",
                   help="skip row-mean centering (default: centered)")

    s = sub.add_parser("spod", help="greedy shifted decomposition from a config")
    s.add_argument("--config", required=True)
    s.add_argument("--threads", type=int, default=None,
                   help="override the candidate parallelism degree")

    r = sub.add_parser("reconstruct", help="decomposition -> snapshot file")
    r.add_argument("decomposition")
    r.add_argument("--out", required=True)

    e = sub.add_parser("error", help="squared relative Frobenius error")
    e.add_argument("reference")
    e.add_argument("test")

    c = sub.add_parser("export-curves",
                       help="error-vs-modes tables for POD and sPOD")
    c.add_argument("snapshots")
    c.add_argument("--report", required=True, help="greedy report JSON")
    c.add_argument("--outdir", required=True)
    c.add_argument("--center", dest="center", action="store_true", default=True)
    c.add_argument("--no-center", dest="center", action="store_false")
    return p


def _cmd_generate(args) -> int:
    os.makedirs(args.out, exist_ok=True)

    def override(cls, **extra):
        kw = {k: v for k, v in extra.items() if v is not None}
        return cls(**kw)

    if args.scenario == "wave":
        kw = {"m": args.m, "n": args.n, "t_final": args.t_final}
        params = override(generators.WaveParams, **kw)
        snaps = generators.wave_snapshots(params)
        shifts = generators.wave_shifts(params)
    elif args.scenario == "three-signal":
        kw = {"m": args.m, "n": args.n}
        kw = {k: v for k, v in kw.items() if v is not None}
        snaps, shifts = generators.three_signal_default(**kw)
    else:
        kw = {"m": args.m, "n": args.n, "t_final": args.t_final}
        params = override(generators.CrossingFrontsParams, **kw)
        snaps, shifts = generators.crossing_fronts(params)

    snap_path = os.path.join(args.out, args.scenario + ".snap")
    shift_path = os.path.join(args.out, "true_shifts.csv")
    io.write_snapshots(snaps, snap_path)
    io.write_shifts(shifts.d, shift_path)
    print(snap_path)
    print(shift_path)
    return 0


def _cmd_track(args) -> int:
    snaps = io.read_snapshots(args.snapshots)
    name = args.block or snaps.blocks[0].name
    block = snaps.block(name)
    windows = io.parse_windows(args.windows) if args.windows else None
    positions = track_front(block, snaps.grid, windows=windows,
                            statistic=args.statistic, smooth=args.smooth)
    d = center_shifts(positions, snaps.grid)
    negate = (snaps.grid.boundary == "periodic") if args.negate == "auto" \
        else args.negate == "yes"
    if negate:
        d = -d
    io.write_shifts(d[None, :], args.out, frame_names=[name])
    print(args.out)
    return 0


def _cmd_pod(args) -> int:
    snaps = io.read_snapshots(args.snapshots)
    X = center_rows(snaps)[0].data if args.center else snaps.data
    if args.tol is None and args.curve is None:
        raise _Usage("pod: give --tol and/or --curve")
    if args.tol is not None:
        count = modes_for_tolerance(X, args.tol)
        print(f"modes for tolerance {args.tol:g}: {count}")
    if args.curve is not None:
        sv, squared, root = truncation_curve(X)
        sv = np.append(sv, 0.0)  # aligned with "modes kept" rows
        io.write_curve(args.curve,
                       [np.arange(squared.size), sv, squared, root],
                       ["modes_kept", "next_singular_value",
                        "residual_energy_fraction", "residual_norm_fraction"])
        print(args.curve)
    return 0


def _resolve_frames(cfg, snaps) -> FrameShifts:
    """Read or track every frame's shifts and bundle them."""
    boundary = cfg.boundary or ("periodic" if snaps.grid.boundary == "periodic"
                                else "constant")
    rows = []
    for l, fc in enumerate(cfg.frames):
        if fc.shifts_path is not None:
            mat = io.read_shifts(fc.shifts_path)
            if mat.shape[1] != snaps.n_snapshots:
                raise io.FormatError(
                    f"{fc.shifts_path}: {mat.shape[1]} rows for"
                    f" {snaps.n_snapshots} snapshots")
            if mat.shape[0] != 1:
                raise io.ConfigError(
                    f"frame {l}: shift file must have one column,"
                    f" found {mat.shape[0]}")
            rows.append(mat[0])
        else:
            if fc.track_block not in snaps.block_names():
                raise io.ConfigError(
                    f"frame {l}: no variable block '{fc.track_block}'")
            windows = io.parse_windows(fc.windows) if fc.windows else None
            pos = track_front(snaps.block(fc.track_block), snaps.grid,
                              windows=windows, statistic=fc.statistic,
                              smooth=fc.smooth)
            d = center_shifts(pos, snaps.grid)
            rows.append(-d if boundary == "periodic" else d)
    return FrameShifts(np.vstack(rows), ShiftSpec(boundary, cfg.degree))


def _frame_masks(cfg, snaps):
    if not any(fc.mask for fc in cfg.frames):
        return None
    masks = []
    for l, fc in enumerate(cfg.frames):
        mask = np.zeros(snaps.n_rows, dtype=bool)
        for name in fc.mask:
            if name not in snaps.block_names():
                raise io.ConfigError(f"frame {l}: no variable block '{name}'")
            blk = next(b for b in snaps.blocks if b.name == name)
            mask[blk.rows] = True
        masks.append(mask)
    return masks


def _cmd_spod(args) -> int:
    cfg = io.load_config(args.config)
    if args.threads is not None:
        cfg.threads = max(1, args.threads)
    snaps = io.read_snapshots(cfg.snapshots)
    if cfg.scale_variables:
        snaps, factors = scale_variables(snaps)
        print(f"variable scaling factors: {factors}", file=sys.stderr)
    shifts = _resolve_frames(cfg, snaps)
    masks = _frame_masks(cfg, snaps)
    greedy = GreedyConfig(r0=list(cfg.r0), tol=cfg.tol, p_max=cfg.p_max,
                          optimizer=cfg.optimizer, rank_tol=cfg.rank_tol,
                          warm_start=cfg.warm_start, threads=cfg.threads)

    def progress(info):
        if info["stage"] == "initial":
            print(f"initial solve: r={info['r']} error={info['error']:.3e}",
                  file=sys.stderr)
        else:
            print(f"iteration {info['p']}: frame {info['chosen']} ->"
                  f" r={info['r']} error={info['error']:.3e}", file=sys.stderr)

    dec, report = spod_decompose(snaps, shifts, greedy, masks=masks,
                                 progress=progress)
    out = cfg.output_dir
    os.makedirs(out, exist_ok=True)
    io.write_decomposition(dec, os.path.join(out, "decomposition.bin"),
                           times=snaps.time.values)
    io.write_report(report, os.path.join(out, "report.json"))
    io.write_shifts(shifts.d, os.path.join(out, "resolved_shifts.csv"))
    io.write_manifest(cfg, os.path.join(out, "manifest.cfg"))
    err = report.error_history[-1] if report.error_history else float("nan")
    print(f"termination: {report.termination}")
    print(f"relative error: {err:.6e}")
    print(f"modes per frame: {report.r_final}")
    print(f"runtime: {report.runtime_seconds:.1f} s", file=sys.stderr)
    return 0 if report.converged else 3


def _cmd_reconstruct(args) -> int:
    dec, times = io.read_decomposition(args.decomposition)
    data = reconstruct(dec)
    snaps = SnapshotSet(data, dec.grid, times, tuple(dec.blocks))
    io.write_snapshots(snaps, args.out)
    print(args.out)
    return 0


def _cmd_error(args) -> int:
    ref = io.read_snapshots(args.reference)
    test = io.read_snapshots(args.test)
    print(f"{relative_error(ref.data, test.data):.12e}")
    return 0


def _cmd_export_curves(args) -> int:
    import json

    snaps = io.read_snapshots(args.snapshots)
    with open(args.report) as f:
        report = json.load(f)
    os.makedirs(args.outdir, exist_ok=True)

    X = center_rows(snaps)[0].data if args.center else snaps.data
    _, squared, root = truncation_curve(X)
    pod_path = os.path.join(args.outdir, "pod_curve.csv")
    io.write_curve(pod_path, [np.arange(squared.size), squared, root],
                   ["modes", "relative_error_energy", "relative_error_norm"])

    base = sum(report["r0"])
    modes = [base + i for i in range(len(report["error_history"]))]
    errors = np.asarray(report["error_history"], dtype=float)
    spod_path = os.path.join(args.outdir, "spod_curve.csv")
    io.write_curve(spod_path,
                   [np.asarray(modes), errors, np.sqrt(errors)],
                   ["modes", "relative_error_energy", "relative_error_norm"])
    print(pod_path)
    print(spod_path)
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "track": _cmd_track,
    "pod": _cmd_pod,
    "spod": _cmd_spod,
    "reconstruct": _cmd_reconstruct,
    "error": _cmd_error,
    "export-curves": _cmd_export_curves,
}


def run_cli(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and argv[0].startswith("-") and argv[0] not in ("-h", "--help"):
        argv = ["spod"] + argv  # bare flags mean the spod subcommand
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _Usage as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except SystemExit as e:  # --help
        return int(e.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except _Usage as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except io.ConfigError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return 1
    except (io.FormatError, OSError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return 2
    except ValueError as e:
        print(f"data error: {e}", file=sys.stderr)
        return 2


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
