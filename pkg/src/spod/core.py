"""The multi-frame residual-minimization objective.

A decomposition approximates every snapshot by a sum over frames,

    X_j  ~=  sum_l  T(d^l_j) W^l a^l_j ,

where each frame l carries time-independent modes W^l (stacked over the
variable blocks), a shift sequence d^l_j, and per-snapshot amplitudes.
For fixed shifts the optimal amplitudes of snapshot j are the minimum-norm
least-squares solution against the frame matrix K_j whose columns are the
shifted modes.  Substituting them leaves a reduced objective in the modes
alone,

    Jt(W) = - sum_j || U_j1^T X_j ||^2 ,

with U_j1 the left singular vectors of K_j spanning its numerical range;
the full squared residual is J = sum_j ||X_j||^2 + Jt.  The gradient of Jt
with respect to mode k of frame l is

    -2 sum_j a^l_{k,j} T(d^l_j)^T (X_j - U_j1 U_j1^T X_j) ,

which matches central finite differences to the expected order (the
factor -2 is the usual derivative of a squared projection norm).

Modes can be masked: entries marked by a frame's mask stay pinned to zero,
enforced by zeroing those rows of iterates and gradients rather than by
eliminating variables.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import sparse

from .shifts import ShiftSpec, apply_shift, shift_operator
from .snapshots import Grid1D, SnapshotSet, VariableBlock


@dataclass(frozen=True)
class FrameShifts:
    """Shift sequences for all frames: d has shape (Ns, n), in space units."""

    d: np.ndarray
    spec: ShiftSpec

    def __post_init__(self):
        d = np.atleast_2d(np.asarray(self.d, dtype=float))
        object.__setattr__(self, "d", d)

    @property
    def n_frames(self) -> int:
        return self.d.shape[0]

    @property
    def n_snapshots(self) -> int:
        return self.d.shape[1]


@dataclass
class FrameBasis:
    """Modes of one frame; masked entries are forced to zero on creation."""

    modes: np.ndarray
    mask: Optional[np.ndarray] = None

    def __post_init__(self):
        self.modes = np.asarray(self.modes, dtype=float)
        if self.modes.ndim != 2:
            raise ValueError("frame modes must form a 2-d array")
        if self.mask is not None:
            self.mask = np.asarray(self.mask, dtype=bool)
            if self.mask.shape != (self.modes.shape[0],):
                raise ValueError(
                    f"mask length {self.mask.shape} does not match "
                    f"{self.modes.shape[0]} mode rows"
                )
            self.modes = self.modes.copy()
            self.modes[self.mask] = 0.0

    @property
    def n_modes(self) -> int:
        return self.modes.shape[1]


@dataclass
class Decomposition:
    frames: list  # list[FrameBasis]
    amplitudes: list  # list of (r_l, n) arrays
    shifts: FrameShifts
    grid: Grid1D
    blocks: list  # list[VariableBlock]

    @property
    def r(self) -> list:
        return [f.n_modes for f in self.frames]

    def __post_init__(self):
        if len(self.frames) != self.shifts.n_frames:
            raise ValueError(
                f"{len(self.frames)} frames but {self.shifts.n_frames} shift rows"
            )
        if len(self.amplitudes) != len(self.frames):
            raise ValueError("one amplitude matrix per frame required")
        for fb, A in zip(self.frames, self.amplitudes):
            if A.shape != (fb.n_modes, self.shifts.n_snapshots):
                raise ValueError(
                    f"amplitude shape {A.shape} does not match "
                    f"({fb.n_modes}, {self.shifts.n_snapshots})"
                )


def _block_count(m_total: int, grid: Grid1D) -> int:
    if m_total % grid.m:
        raise ValueError(f"{m_total} rows is not a multiple of m={grid.m}")
    return m_total // grid.m


def assemble_frame_matrix(frames, shifts: FrameShifts, grid: Grid1D, j: int) -> np.ndarray:
    """Frame matrix K_j: columns are the shifted modes T(d^l_j) w^l_k.

    Frames appear in order, modes in order within each frame; the shift of
    a frame acts identically on every variable block of its modes.
    """
    if not 0 <= j < shifts.n_snapshots:
        raise ValueError(f"snapshot index {j} outside 0..{shifts.n_snapshots - 1}")
    if len(frames) != shifts.n_frames:
        raise ValueError(f"{len(frames)} frames but {shifts.n_frames} shift rows")
    m = grid.m
    m_total = frames[0].modes.shape[0]
    cols = []
    for l, fb in enumerate(frames):
        if fb.modes.shape[0] != m_total:
            raise ValueError("all frames must share the stacked row count")
        nb = _block_count(fb.modes.shape[0], grid)
        if fb.n_modes == 0:
            continue
        shifted = np.empty_like(fb.modes)
        for b in range(nb):
            rows = slice(b * m, (b + 1) * m)
            shifted[rows] = apply_shift(fb.modes[rows], shifts.d[l, j], grid, shifts.spec)
        cols.append(shifted)
    if not cols:
        return np.zeros((m_total, 0))
    return np.concatenate(cols, axis=1)


def optimal_amplitudes(K: np.ndarray, x: np.ndarray, rank_tol: float = 1e-10) -> np.ndarray:
    """Minimum-norm least-squares amplitudes of one snapshot.

    Solves min_a ||K a - x|| picking the solution with smallest Euclidean
    norm; singular values at or below rank_tol times the largest are
    treated as zero.  An all-zero K returns zero amplitudes.
    """
    K = np.asarray(K, dtype=float)
    x = np.asarray(x, dtype=float)
    if K.ndim != 2 or x.shape != (K.shape[0],):
        raise ValueError(f"shape mismatch: K {K.shape}, x {x.shape}")
    if K.shape[1] == 0:
        return np.zeros(0)
    U, s, Vt = np.linalg.svd(K, full_matrices=False)
    if s.size == 0 or s[0] <= 0.0:
        return np.zeros(K.shape[1])
    rank = int(np.sum(s > rank_tol * s[0]))
    return Vt[:rank].T @ ((U[:, :rank].T @ x) / s[:rank])


class _FramePlan:
    """Cached sparse shift operators for one frame's whole shift sequence.

    stacked is the (n*m, m) vertical stack of the per-snapshot operators,
    so one spgemm shifts a block of modes for every snapshot at once;
    stacked_T = [T_1^T ... T_n^T] accumulates transposed applications the
    same way.
    """

    def __init__(self, d_row: np.ndarray, grid: Grid1D, spec: ShiftSpec):
        self.grid = grid
        ops = [shift_operator(d, grid, spec) for d in d_row]
        self.stacked = sparse.vstack(ops, format="csr")
        self.stacked_T = self.stacked.T.tocsr()
        self.n = len(ops)

    def shifted_modes(self, W: np.ndarray) -> np.ndarray:
        """(n, nb, m, r) array S with S[j, b] = T(d_j) applied to block b of W."""
        m = self.grid.m
        nb = _block_count(W.shape[0], self.grid)
        r = W.shape[1]
        S = np.empty((self.n, nb, m, r))
        for b in range(nb):
            S[:, b] = (self.stacked @ W[b * m:(b + 1) * m]).reshape(self.n, m, r)
        return S

    def accumulate_transpose(self, Z: np.ndarray) -> np.ndarray:
        """sum_j T(d_j)^T Z[j] for block-structured Z of shape (n, nb, m, r)."""
        n, nb, m, r = Z.shape
        out = np.empty((nb * m, r))
        for b in range(nb):
            out[b * m:(b + 1) * m] = self.stacked_T @ np.ascontiguousarray(
                Z[:, b]
            ).reshape(n * m, r)
        return out


class ReducedObjective:
    """Reduced objective and gradient for fixed shifts and mode counts.

    Holds the cached shift operators so that repeated evaluations (line
    searches) only pay sparse products plus one small SVD per snapshot.
    value_and_gradient works on the flat variable vector (frames in order,
    each frame's modes raveled column by column) and returns the full
    squared residual J = sum_j ||X_j||^2 + Jt, which is the quantity the
    optimizer traces; the reduced part Jt is available from evaluate().

    rank_events collects (eval_index, snapshot, rank) whenever some K_j
    was numerically rank-deficient, since the objective is not smooth
    across such rank changes.
    """

    def __init__(self, snaps: SnapshotSet, shifts: FrameShifts, mode_counts,
                 masks=None, rank_tol: float = 1e-10, plans=None):
        if shifts.n_snapshots != snaps.n_snapshots:
            raise ValueError(
                f"shifts cover {shifts.n_snapshots} snapshots, data has "
                f"{snaps.n_snapshots}"
            )
        if len(mode_counts) != shifts.n_frames:
            raise ValueError(
                f"{len(mode_counts)} mode counts for {shifts.n_frames} frames"
            )
        self.X = snaps.data
        self.grid = snaps.grid
        self.n_blocks = len(snaps.blocks)
        self.mode_counts = [int(r) for r in mode_counts]
        if any(r < 0 for r in self.mode_counts):
            raise ValueError("mode counts must be nonnegative")
        self.rank_tol = rank_tol
        self.masks = self._check_masks(masks)
        # plans may be shared across objectives with different mode counts:
        # the operators depend on the shifts alone
        if plans is None:
            plans = [
                _FramePlan(shifts.d[l], snaps.grid, shifts.spec)
                for l in range(shifts.n_frames)
            ]
        elif len(plans) != shifts.n_frames:
            raise ValueError(f"{len(plans)} plans for {shifts.n_frames} frames")
        self.plans = plans
        self.norm2 = float(np.sum(self.X * self.X))
        self.m_total = snaps.n_rows
        self.n = snaps.n_snapshots
        self.n_evals = 0
        self.rank_events = []

    def _check_masks(self, masks):
        if masks is None:
            return [None] * len(self.mode_counts)
        if len(masks) != len(self.mode_counts):
            raise ValueError(f"{len(masks)} masks for {len(self.mode_counts)} frames")
        out = []
        for mk in masks:
            if mk is None:
                out.append(None)
            else:
                mk = np.asarray(mk, dtype=bool)
                out.append(mk)
        return out

    # --- flat variable layout -------------------------------------------
    def pack(self, modes_list) -> np.ndarray:
        parts = []
        for W, r in zip(modes_list, self.mode_counts):
            if W.shape != (self.m_total, r):
                raise ValueError(
                    f"mode block {W.shape} does not match ({self.m_total}, {r})"
                )
            parts.append(np.asarray(W, dtype=float).ravel(order="F"))
        if not parts:
            return np.zeros(0)
        return np.concatenate(parts)

    def unpack(self, z: np.ndarray) -> list:
        out = []
        pos = 0
        for r, mk in zip(self.mode_counts, self.masks):
            size = self.m_total * r
            W = z[pos:pos + size].reshape((self.m_total, r), order="F").copy()
            if mk is not None:
                W[mk] = 0.0
            out.append(W)
            pos += size
        if pos != z.size:
            raise ValueError(f"variable vector has {z.size} entries, expected {pos}")
        return out

    # --- evaluation ------------------------------------------------------
    def evaluate(self, modes_list, need_gradient: bool = True):
        """Returns (Jt, gradients, amplitudes, residual).

        gradients is a per-frame list of (m_total, r_l) arrays (only when
        requested, else None); amplitudes a per-frame list of (r_l, n)
        arrays; residual the (m_total, n) matrix of projection residuals
        (I - U_j1 U_j1^T) X_j.
        """
        self.n_evals += 1
        X = self.X
        n = self.n
        total_r = sum(self.mode_counts)
        amps = [np.zeros((r, n)) for r in self.mode_counts]
        if total_r == 0:
            resid = X.copy()
            grads = [np.zeros((self.m_total, 0)) for _ in self.mode_counts] \
                if need_gradient else None
            return 0.0, grads, amps, resid

        S = []  # per frame: (n, nb, m, r_l) shifted modes
        for plan, W in zip(self.plans, self._masked(modes_list)):
            S.append(plan.shifted_modes(W) if W.shape[1] else None)
        K_all = np.concatenate(
            [s.reshape(n, self.m_total, -1) for s in S if s is not None], axis=2
        )

        Jt = 0.0
        resid = np.empty_like(X)
        col_of = np.cumsum([0] + self.mode_counts)
        for j in range(n):
            Kj = K_all[j]
            xj = X[:, j]
            U, s, Vt = np.linalg.svd(Kj, full_matrices=False)
            if s[0] <= 0.0:
                rank = 0
            else:
                rank = int(np.sum(s > self.rank_tol * s[0]))
            if rank < min(Kj.shape):
                self.rank_events.append((self.n_evals, j, rank))
            c = U[:, :rank].T @ xj
            Jt -= float(c @ c)
            resid[:, j] = xj - U[:, :rank] @ c
            aj = Vt[:rank].T @ (c / s[:rank])
            for l, r in enumerate(self.mode_counts):
                if r:
                    amps[l][:, j] = aj[col_of[l]:col_of[l + 1]]

        grads = None
        if need_gradient:
            grads = []
            resid_blocks = np.ascontiguousarray(resid.T).reshape(
                n, self.n_blocks, self.grid.m
            )
            for l, (plan, r) in enumerate(zip(self.plans, self.mode_counts)):
                if r == 0:
                    grads.append(np.zeros((self.m_total, 0)))
                    continue
                Z = resid_blocks[..., None] * amps[l].T[:, None, None, :]
                G = -2.0 * plan.accumulate_transpose(Z)
                if self.masks[l] is not None:
                    G[self.masks[l]] = 0.0
                grads.append(G)
        return Jt, grads, amps, resid

    def _masked(self, modes_list):
        out = []
        for W, mk in zip(modes_list, self.masks):
            if mk is not None and np.any(W[mk]):
                W = W.copy()
                W[mk] = 0.0
            out.append(W)
        return out

    def value_and_gradient(self, z: np.ndarray):
        """Optimizer callback: full squared residual J and its flat gradient."""
        modes_list = self.unpack(z)
        Jt, grads, _, _ = self.evaluate(modes_list, need_gradient=True)
        g = np.concatenate([G.ravel(order="F") for G in grads]) if grads else np.zeros(0)
        return self.norm2 + Jt, g

    def relative_error_of(self, value: float) -> float:
        """Map an objective value J to the relative squared error J / ||X||^2."""
        return max(value, 0.0) / self.norm2


def objective_and_gradient(snaps: SnapshotSet, frames, shifts: FrameShifts,
                           rank_tol: float = 1e-10):
    """One-shot reduced objective Jt, per-mode gradients and amplitudes.

    The gradients respect the frame masks (masked entries are exactly
    zero).  For repeated evaluations construct a ReducedObjective instead,
    which caches the shift operators.
    """
    prob = ReducedObjective(
        snaps, shifts, [f.n_modes for f in frames],
        masks=[f.mask for f in frames], rank_tol=rank_tol,
    )
    Jt, grads, amps, _ = prob.evaluate([f.modes for f in frames])
    return Jt, grads, amps


def reconstruct(dec: Decomposition) -> np.ndarray:
    """Evaluate the decomposition: X~_j = sum_l T(d^l_j) W^l a^l_j."""
    m = dec.grid.m
    n = dec.shifts.n_snapshots
    m_total = dec.frames[0].modes.shape[0] if dec.frames else 0
    out = np.zeros((m_total, n))
    for l, (fb, A) in enumerate(zip(dec.frames, dec.amplitudes)):
        if fb.n_modes == 0:
            continue
        contrib = fb.modes @ A  # (m_total, n), still in frame coordinates
        nb = _block_count(m_total, dec.grid)
        for j in range(n):
            d = dec.shifts.d[l, j]
            for b in range(nb):
                rows = slice(b * m, (b + 1) * m)
                out[rows, j] += apply_shift(contrib[rows, j], d, dec.grid, dec.shifts.spec)
    return out
