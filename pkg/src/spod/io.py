"""File formats and run configuration.

Snapshot files are binary: a text header of key=value lines terminated
by an ``end-header`` line, followed by the matrix entries as
little-endian 64-bit floats in column-major order.  Header keys:

    m         number of grid points (required)
    n         number of snapshots (required)
    h         mesh width (required)
    boundary  periodic | non-periodic (required)
    blocks    comma-separated name:rows pairs (default: one block "var0"
              spanning all m rows)
    time      comma-separated snapshot times (default: 0..n-1)

The same layout (plus per-frame mode counts) is used for decomposition
files.  Text floats are written with repr() so round trips are exact.
CSV outputs carry a header row naming every column; shift files hold one
row per snapshot and one column per frame, in space units.

Run configuration files use INI sections ([input], [spod], [optimizer],
[frame.0], [frame.1], ..., [output]); every frame section provides
either a ``shifts`` CSV path or a tracker recipe (``track`` plus
optional statistic / windows / smooth), never both.
"""

import configparser
import json
import os

import numpy as np

from .core import Decomposition, FrameBasis, FrameShifts
from .lbfgs import OptimizerOptions
from .shifts import ShiftSpec
from .snapshots import Grid1D, SnapshotSet, VariableBlock
from .tracking import STATISTICS, WindowSchedule


class FormatError(ValueError):
    """Raised when a data file does not parse."""


class ConfigError(ValueError):
    """Raised when a run configuration is invalid."""


def _fmt(x):
    return repr(float(x))


def _parse_header(f, path):
    """Read key=value lines up to end-header. Returns (dict, line count)."""
    header = {}
    lineno = 0
    while True:
        raw = f.readline()
        lineno += 1
        if not raw:
            raise FormatError(f"{path}: missing end-header (line {lineno})")
        try:
            line = raw.decode("ascii").strip()
        except UnicodeDecodeError:
            raise FormatError(f"{path}: non-ascii header (line {lineno})")
        if not line or line.startswith("#"):
            continue
        if line == "end-header":
            return header, lineno
        if "=" not in line:
            raise FormatError(f"{path}: expected key=value (line {lineno})")
        key, value = line.split("=", 1)
        key = key.strip()
        if key in header:
            raise FormatError(f"{path}: duplicate key '{key}' (line {lineno})")
        header[key] = value.strip()


def _header_int(header, key, path):
    if key not in header:
        raise FormatError(f"{path}: missing header key '{key}'")
    try:
        return int(header[key])
    except ValueError:
        raise FormatError(f"{path}: header key '{key}' is not an integer")


def _header_float(header, key, path):
    if key not in header:
        raise FormatError(f"{path}: missing header key '{key}'")
    try:
        return float(header[key])
    except ValueError:
        raise FormatError(f"{path}: header key '{key}' is not a number")


def _parse_blocks(text, path):
    out = []
    start = 0
    for part in text.split(","):
        name, _, rows = part.partition(":")
        try:
            rows = int(rows)
        except ValueError:
            raise FormatError(f"{path}: bad block entry '{part}'")
        out.append(VariableBlock(name.strip(), start, start + rows))
        start += rows
    return tuple(out), start


def _read_matrix(f, rows, cols, path):
    payload = f.read()
    found = len(payload) // 8
    expected = rows * cols
    if len(payload) % 8 or found != expected:
        raise FormatError(
            f"{path}: data section holds {found} float64 values,"
            f" expected {expected}")
    data = np.frombuffer(payload, dtype="<f8").reshape((rows, cols), order="F")
    if not np.all(np.isfinite(data)):
        raise FormatError(f"{path}: non-finite entries in data section")
    return data.copy()


def read_snapshots(path) -> SnapshotSet:
    with open(path, "rb") as f:
        header, _ = _parse_header(f, path)
        m = _header_int(header, "m", path)
        n = _header_int(header, "n", path)
        h = _header_float(header, "h", path)
        boundary = header.get("boundary")
        if boundary is None:
            raise FormatError(f"{path}: missing header key 'boundary'")
        try:
            grid = Grid1D(m, h, boundary)
        except ValueError as e:
            raise FormatError(f"{path}: {e}")
        if "blocks" in header:
            blocks, total = _parse_blocks(header["blocks"], path)
        else:
            blocks, total = (VariableBlock("var0", 0, m),), m
        if "time" in header:
            time = np.array([float(v) for v in header["time"].split(",")])
            if time.size != n:
                raise FormatError(
                    f"{path}: time axis has {time.size} entries, expected {n}")
        else:
            time = np.arange(n, dtype=float)
        data = _read_matrix(f, total, n, path)
    try:
        return SnapshotSet(data, grid, time, blocks)
    except ValueError as e:
        raise FormatError(f"{path}: {e}")


def write_snapshots(snaps: SnapshotSet, path):
    if not np.all(np.isfinite(snaps.data)):
        raise FormatError("refusing to write non-finite data")
    g = snaps.grid
    blocks = ",".join(f"{b.name}:{b.stop - b.start}" for b in snaps.blocks)
    time = ",".join(_fmt(v) for v in snaps.time.values)
    header = (f"m={g.m}\nn={snaps.n_snapshots}\nh={_fmt(g.h)}\n"
              f"boundary={g.boundary}\nblocks={blocks}\ntime={time}\n"
              "end-header\n")
    with open(path, "wb") as f:
        f.write(header.encode("ascii"))
        f.write(np.asarray(snaps.data, dtype="<f8").tobytes(order="F"))


def write_snapshots_csv(snaps: SnapshotSet, path):
    """Plain-text interoperability export; repr floats keep round trips exact."""
    g = snaps.grid
    blocks = ",".join(f"{b.name}:{b.stop - b.start}" for b in snaps.blocks)
    with open(path, "w") as f:
        f.write(f"# snapshots m={g.m} n={snaps.n_snapshots} h={_fmt(g.h)}"
                f" boundary={g.boundary} blocks={blocks}\n")
        f.write("# time=" + ",".join(_fmt(v) for v in snaps.time.values) + "\n")
        f.write("row," + ",".join(f"snapshot{j}"
                                  for j in range(snaps.n_snapshots)) + "\n")
        for i in range(snaps.n_rows):
            f.write(str(i) + "," +
                    ",".join(_fmt(v) for v in snaps.data[i]) + "\n")


def read_snapshots_csv(path) -> SnapshotSet:
    meta = {}
    rows = []
    time = None
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("# time="):
                time = np.array([float(v) for v in line[7:].split(",")])
            elif line.startswith("# snapshots "):
                for item in line[len("# snapshots "):].split():
                    k, _, v = item.partition("=")
                    meta[k] = v
            elif line.startswith("#") or line.startswith("row,"):
                continue
            else:
                try:
                    rows.append([float(v) for v in line.split(",")][1:])
                except ValueError:
                    raise FormatError(f"{path}: bad data row (line {lineno})")
    for key in ("m", "n", "h", "boundary"):
        if key not in meta:
            raise FormatError(f"{path}: missing metadata key '{key}'")
    grid = Grid1D(int(meta["m"]), float(meta["h"]), meta["boundary"])
    blocks, total = _parse_blocks(meta["blocks"], path) if "blocks" in meta \
        else ((VariableBlock("var0", 0, grid.m),), grid.m)
    data = np.array(rows)
    n = int(meta["n"])
    if data.shape != (total, n):
        raise FormatError(f"{path}: data is {data.shape}, expected ({total}, {n})")
    if time is None:
        time = np.arange(n, dtype=float)
    return SnapshotSet(data, grid, time, blocks)


def write_shifts(d, path, frame_names=None):
    """Shift CSV: one row per snapshot, one column per frame (space units)."""
    d = np.atleast_2d(np.asarray(d, dtype=float))
    names = frame_names or [f"frame{l}" for l in range(d.shape[0])]
    with open(path, "w") as f:
        f.write("# shift per frame, space units; one row per snapshot\n")
        f.write(",".join(names) + "\n")
        for j in range(d.shape[1]):
            f.write(",".join(_fmt(v) for v in d[:, j]) + "\n")


def read_shifts(path):
    """Returns the (n_frames, n_snapshots) shift matrix from a shift CSV."""
    rows = []
    with open(path) as f:
        header_seen = False
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if not header_seen:
                header_seen = True  # column-name row
                continue
            try:
                rows.append([float(v) for v in line.split(",")])
            except ValueError:
                raise FormatError(f"{path}: bad shift row (line {lineno})")
    if not rows:
        raise FormatError(f"{path}: no shift rows")
    if any(len(r) != len(rows[0]) for r in rows):
        raise FormatError(f"{path}: ragged shift rows")
    return np.array(rows).T.copy()


def write_decomposition(dec: Decomposition, path, times=None):
    g = dec.grid
    blocks = ",".join(f"{b.name}:{b.stop - b.start}" for b in dec.blocks)
    n = dec.shifts.n_snapshots
    spec = dec.shifts.spec
    if times is None:
        times = np.arange(n, dtype=float)
    header = (f"m={g.m}\nn={n}\nh={_fmt(g.h)}\nboundary={g.boundary}\n"
              f"blocks={blocks}\n"
              f"ranks={','.join(str(f.n_modes) for f in dec.frames)}\n"
              f"shift_boundary={spec.boundary}\n"
              f"interp_degree={spec.interp_degree}\n"
              f"time={','.join(_fmt(v) for v in np.asarray(times))}\n"
              "end-header\n")
    with open(path, "wb") as f:
        f.write(header.encode("ascii"))
        for frame, amps in zip(dec.frames, dec.amplitudes):
            f.write(np.asarray(frame.modes, dtype="<f8").tobytes(order="F"))
            f.write(np.asarray(amps, dtype="<f8").tobytes(order="F"))
        f.write(np.asarray(dec.shifts.d, dtype="<f8").tobytes(order="F"))


def read_decomposition(path):
    """Returns (Decomposition, time axis)."""
    with open(path, "rb") as f:
        header, _ = _parse_header(f, path)
        m = _header_int(header, "m", path)
        n = _header_int(header, "n", path)
        h = _header_float(header, "h", path)
        grid = Grid1D(m, h, header.get("boundary", "periodic"))
        blocks, total = _parse_blocks(header.get("blocks", f"var0:{m}"), path)
        if "ranks" not in header:
            raise FormatError(f"{path}: missing header key 'ranks'")
        ranks = [int(r) for r in header["ranks"].split(",")]
        spec = ShiftSpec(header["shift_boundary"],
                         _header_int(header, "interp_degree", path))
        if "time" in header:
            times = np.array([float(v) for v in header["time"].split(",")])
        else:
            times = np.arange(n, dtype=float)
        payload = f.read()
    expected = sum(total * r + r * n for r in ranks) + len(ranks) * n
    found = len(payload) // 8
    if len(payload) % 8 or found != expected:
        raise FormatError(f"{path}: data section holds {found} float64 values,"
                          f" expected {expected}")
    vals = np.frombuffer(payload, dtype="<f8")
    pos = 0
    frames, amplitudes = [], []
    for r in ranks:
        modes = vals[pos:pos + total * r].reshape((total, r), order="F")
        pos += total * r
        amps = vals[pos:pos + r * n].reshape((r, n), order="F")
        pos += r * n
        frames.append(FrameBasis(modes.copy()))
        amplitudes.append(amps.copy())
    d = vals[pos:].reshape((len(ranks), n), order="F").copy()
    dec = Decomposition(tuple(frames), tuple(amplitudes),
                        FrameShifts(d, spec), grid, blocks)
    return dec, times


def write_report(report, path):
    """JSON greedy report.  Timing fields are dropped so that repeated
    runs of the same configuration produce identical bytes."""
    d = report.to_dict()
    d.pop("runtime_seconds", None)
    d["stages"] = [{k: v for k, v in s.items() if k != "seconds"}
                   for s in d.get("stages", [])]
    with open(path, "w") as f:
        json.dump(d, f, indent=2, sort_keys=True)
        f.write("\n")


def write_curve(path, columns, names):
    """Small CSV writer: columns is a list of equal-length 1-d arrays."""
    columns = [np.asarray(c) for c in columns]
    with open(path, "w") as f:
        f.write(",".join(names) + "\n")
        for i in range(columns[0].size):
            f.write(",".join(_fmt(c[i]) if c.dtype.kind == "f" else str(c[i])
                             for c in columns) + "\n")


def parse_windows(text) -> WindowSchedule:
    """Parse 'j0:j1@i0:i1,...' into a window schedule."""
    intervals = []
    for part in text.split(","):
        try:
            trange, _, xrange_ = part.partition("@")
            j0, j1 = (int(v) for v in trange.split(":"))
            i0, i1 = (int(v) for v in xrange_.split(":"))
        except ValueError:
            raise ConfigError(f"bad window entry '{part}'"
                              " (expected j0:j1@i0:i1)")
        intervals.append(((j0, j1), (i0, i1)))
    return WindowSchedule(intervals)


def format_windows(windows: WindowSchedule) -> str:
    return ",".join(f"{j0}:{j1}@{i0}:{i1}"
                    for (j0, j1), (i0, i1) in windows.entries)


_TRUE = ("1", "true", "yes", "on")
_FALSE = ("0", "false", "no", "off")


def _as_bool(text, key):
    low = text.strip().lower()
    if low in _TRUE:
        return True
    if low in _FALSE:
        return False
    raise ConfigError(f"{key}: expected a boolean, got '{text}'")


class FrameConfig:
    """Resolved per-frame configuration: shift file XOR tracker recipe."""

    def __init__(self, shifts_path=None, track_block=None,
                 statistic="difference", windows=None, smooth=0, mask=()):
        if (shifts_path is None) == (track_block is None):
            raise ConfigError("each frame needs either 'shifts' or 'track',"
                              " never both")
        if statistic not in STATISTICS:
            raise ConfigError(f"unknown tracking statistic '{statistic}'")
        self.shifts_path = shifts_path
        self.track_block = track_block
        self.statistic = statistic
        self.windows = windows  # raw spec string or None
        self.smooth = int(smooth)
        self.mask = tuple(mask)


class RunConfig:
    """Fully resolved run configuration for the end-to-end pipeline."""

    def __init__(self, snapshots, frames, r0, tol=0.01, p_max=None,
                 warm_start=True, threads=1, rank_tol=1e-10,
                 scale_variables=False, boundary=None, degree=3,
                 optimizer=OptimizerOptions(), output_dir="."):
        if len(frames) == 0:
            raise ConfigError("no frame sections")
        if len(r0) != len(frames):
            raise ConfigError(f"r0 has {len(r0)} entries for"
                              f" {len(frames)} frames")
        self.snapshots = snapshots
        self.frames = tuple(frames)
        self.r0 = tuple(int(r) for r in r0)
        self.tol = float(tol)
        self.p_max = None if p_max is None else int(p_max)
        self.warm_start = bool(warm_start)
        self.threads = int(threads)
        self.rank_tol = float(rank_tol)
        self.scale_variables = bool(scale_variables)
        self.boundary = boundary  # None: follow the grid
        self.degree = int(degree)
        self.optimizer = optimizer
        self.output_dir = output_dir


def _frame_sections(cp):
    names = [s for s in cp.sections() if s.startswith("frame.")]

    def index(name):
        try:
            return int(name.split(".", 1)[1])
        except ValueError:
            raise ConfigError(f"bad frame section name [{name}]")

    names.sort(key=index)
    if [index(s) for s in names] != list(range(len(names))):
        raise ConfigError("frame sections must be numbered 0..Ns-1")
    return names


def load_config(path) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None)
    read = cp.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    base = os.path.dirname(os.path.abspath(path))

    def resolve(p):
        return os.path.normpath(p if os.path.isabs(p) else os.path.join(base, p))

    if not cp.has_option("input", "snapshots"):
        raise ConfigError("missing [input] snapshots")
    snapshots = resolve(cp.get("input", "snapshots"))
    scale = _as_bool(cp.get("input", "scale_variables", fallback="false"),
                     "scale_variables")

    frames = []
    boundaries = set()
    degrees = set()
    for section in _frame_sections(cp):
        sec = cp[section]
        unknown = set(sec) - {"shifts", "track", "statistic", "windows",
                              "smooth", "mask", "boundary", "degree"}
        if unknown:
            raise ConfigError(f"[{section}]: unknown keys {sorted(unknown)}")
        mask = tuple(v.strip() for v in sec.get("mask", "").split(",")
                     if v.strip())
        fc = FrameConfig(
            shifts_path=(resolve(sec["shifts"]) if "shifts" in sec else None),
            track_block=sec.get("track"),
            statistic=sec.get("statistic", "difference"),
            windows=sec.get("windows"),
            smooth=sec.getint("smooth", fallback=0),
            mask=mask)
        if fc.windows:
            parse_windows(fc.windows)  # fail at load time, not mid-run
        frames.append(fc)
        if "boundary" in sec:
            boundaries.add(sec["boundary"])
        if "degree" in sec:
            degrees.add(sec.getint("degree"))

    sp = cp["spod"] if cp.has_section("spod") else {}
    if "boundary" in sp:
        boundaries.add(sp["boundary"])
    if "degree" in sp:
        degrees.add(int(sp["degree"]))
    if len(boundaries) > 1:
        raise ConfigError("frames must agree on the shift boundary mode")
    if len(degrees) > 1:
        raise ConfigError("frames must agree on the interpolation degree")

    if "r0" not in sp:
        raise ConfigError("missing [spod] r0")
    try:
        r0 = [int(v) for v in sp["r0"].split(",")]
    except ValueError:
        raise ConfigError("[spod] r0 must be a comma-separated integer list")

    opt = OptimizerOptions(
        memory=cp.getint("optimizer", "memory", fallback=10),
        grad_tol=cp.getfloat("optimizer", "grad_tol", fallback=1e-6),
        max_iters=cp.getint("optimizer", "max_iters", fallback=500),
        sufficient_decrease=cp.getfloat("optimizer", "sufficient_decrease",
                                        fallback=1e-4),
        curvature=cp.getfloat("optimizer", "curvature", fallback=0.9))

    p_max = sp.get("p_max") if sp else None
    return RunConfig(
        snapshots=snapshots,
        frames=frames,
        r0=r0,
        tol=float(sp.get("tol", 0.01)),
        p_max=None if p_max in (None, "") else int(p_max),
        warm_start=_as_bool(sp.get("warm_start", "true"), "warm_start"),
        threads=int(sp.get("threads", 1)),
        rank_tol=float(sp.get("rank_tol", 1e-10)),
        scale_variables=scale,
        boundary=(next(iter(boundaries)) if boundaries else None),
        degree=(next(iter(degrees)) if degrees else 3),
        optimizer=opt,
        output_dir=resolve(cp.get("output", "directory", fallback=".")))


def write_manifest(cfg: RunConfig, path):
    """Echo the resolved configuration as a config file that reproduces
    the run (paths are written absolute)."""
    cp = configparser.ConfigParser(interpolation=None)
    cp["input"] = {
        "snapshots": os.path.abspath(cfg.snapshots),
        "scale_variables": str(cfg.scale_variables).lower(),
    }
    spod = {
        "r0": ",".join(str(r) for r in cfg.r0),
        "tol": _fmt(cfg.tol),
        "warm_start": str(cfg.warm_start).lower(),
        "threads": str(cfg.threads),
        "rank_tol": _fmt(cfg.rank_tol),
        "degree": str(cfg.degree),
    }
    if cfg.p_max is not None:
        spod["p_max"] = str(cfg.p_max)
    if cfg.boundary is not None:
        spod["boundary"] = cfg.boundary
    cp["spod"] = spod
    o = cfg.optimizer
    cp["optimizer"] = {
        "memory": str(o.memory),
        "grad_tol": _fmt(o.grad_tol),
        "max_iters": str(o.max_iters),
        "sufficient_decrease": _fmt(o.sufficient_decrease),
        "curvature": _fmt(o.curvature),
    }
    for l, fc in enumerate(cfg.frames):
        sec = {}
        if fc.shifts_path is not None:
            sec["shifts"] = os.path.abspath(fc.shifts_path)
        else:
            sec["track"] = fc.track_block
            sec["statistic"] = fc.statistic
            if fc.windows:
                sec["windows"] = fc.windows
            if fc.smooth:
                sec["smooth"] = str(fc.smooth)
        if fc.mask:
            sec["mask"] = ",".join(fc.mask)
        cp[f"frame.{l}"] = sec
    cp["output"] = {"directory": os.path.abspath(cfg.output_dir)}
    with open(path, "w") as f:
        cp.write(f)
