"""Reduced objective, amplitudes, gradients, assembly, reconstruction."""

import numpy as np
import pytest

from spod.core import (Decomposition, FrameBasis, FrameShifts, ReducedObjective,
                       assemble_frame_matrix, objective_and_gradient,
                       optimal_amplitudes, reconstruct)
from spod.shifts import ShiftSpec, dense_shift_matrix
from spod.snapshots import Grid1D, SnapshotSet, VariableBlock

PER3 = ShiftSpec("periodic", 3)


def random_problem(m=16, n=7, n_s=2, n_blocks=1, seed=0, boundary="periodic"):
    rng = np.random.default_rng(seed)
    grid = Grid1D(m, 1.0 / m, boundary)
    blocks = tuple(VariableBlock(f"v{b}", b * m, (b + 1) * m)
                   for b in range(n_blocks))
    X = rng.standard_normal((n_blocks * m, n))
    snaps = SnapshotSet(X, grid, np.arange(n, dtype=float), blocks)
    spec = ShiftSpec("periodic" if boundary == "periodic" else "constant", 3)
    d = rng.uniform(-0.3, 0.3, size=(n_s, n))
    return snaps, FrameShifts(d, spec), rng


def brute_force_frame_matrix(snaps, shifts, modes_list, j):
    """Independent assembly: dense operators applied block by block."""
    m = snaps.grid.m
    cols = []
    for l, W in enumerate(modes_list):
        T = dense_shift_matrix(shifts.d[l, j], snaps.grid, shifts.spec)
        for k in range(W.shape[1]):
            col = np.concatenate([T @ W[b * m:(b + 1) * m, k]
                                  for b in range(len(snaps.blocks))])
            cols.append(col)
    if not cols:
        return np.zeros((snaps.n_rows, 0))
    return np.column_stack(cols)


class TestAssembly:
    @pytest.mark.parametrize("n_blocks", [1, 2])
    def test_matches_dense_block_assembly(self, n_blocks):
        snaps, shifts, rng = random_problem(m=10, n=5, n_s=2,
                                            n_blocks=n_blocks, seed=4)
        modes = [rng.standard_normal((snaps.n_rows, r)) for r in (2, 1)]
        frames = [FrameBasis(W) for W in modes]
        for j in range(snaps.n_snapshots):
            K = assemble_frame_matrix(frames, shifts, snaps.grid, j)
            expected = brute_force_frame_matrix(snaps, shifts, modes, j)
            np.testing.assert_allclose(K, expected, atol=1e-13)

    def test_empty_frames_give_zero_columns(self):
        snaps, shifts, _ = random_problem(n_s=2)
        frames = [FrameBasis(np.zeros((snaps.n_rows, 0))) for _ in range(2)]
        K = assemble_frame_matrix(frames, shifts, snaps.grid, 0)
        assert K.shape == (snaps.n_rows, 0)


class TestAmplitudes:
    def test_against_pseudoinverse_and_normal_equations(self):
        rng = np.random.default_rng(1)
        for trial in range(100):
            m = rng.integers(4, 30)
            r = rng.integers(1, min(m, 8) + 1)
            K = rng.standard_normal((m, r))
            if trial % 3 == 0 and r >= 2:
                K[:, -1] = K[:, 0]  # force rank deficiency
            x = rng.standard_normal(m)
            a = optimal_amplitudes(K, x)
            np.testing.assert_allclose(a, np.linalg.pinv(K) @ x, atol=1e-10)
            # normal equations via pinv of K^T K give the same min-norm point
            a2 = np.linalg.pinv(K.T @ K) @ (K.T @ x)
            np.testing.assert_allclose(a, a2, atol=1e-8)

    def test_duplicate_column_splits_weight_evenly(self):
        w = np.array([1.0, 2.0, -1.0])
        K = np.column_stack([w, w])
        a = optimal_amplitudes(K, w)
        np.testing.assert_allclose(a, [0.5, 0.5], atol=1e-12)

    def test_minimum_norm_among_solutions(self):
        # any other exact solution of the duplicate-column system is longer
        w = np.array([3.0, -1.0, 2.0, 0.5])
        K = np.column_stack([w, w])
        a = optimal_amplitudes(K, 2.0 * w)
        for t in np.linspace(-1.0, 3.0, 13):
            other = np.array([t, 2.0 - t])
            np.testing.assert_allclose(K @ other, 2.0 * w, atol=1e-12)
            assert np.linalg.norm(a) <= np.linalg.norm(other) + 1e-12

    def test_zero_matrix_gives_zero_amplitudes(self):
        a = optimal_amplitudes(np.zeros((5, 3)), np.ones(5))
        np.testing.assert_array_equal(a, np.zeros(3))

    def test_empty_basis(self):
        a = optimal_amplitudes(np.zeros((5, 0)), np.ones(5))
        assert a.shape == (0,)


class TestObjective:
    def brute_force_value(self, snaps, shifts, modes_list):
        """J~ from the definition: project each column on range(K_j)."""
        total = 0.0
        for j in range(snaps.n_snapshots):
            K = brute_force_frame_matrix(snaps, shifts, modes_list, j)
            if K.shape[1] == 0:
                continue
            U, s, _ = np.linalg.svd(K, full_matrices=False)
            rank = int(np.sum(s > 1e-10 * s[0])) if s.size else 0
            U1 = U[:, :rank]
            total -= float(np.linalg.norm(U1.T @ snaps.data[:, j]) ** 2)
        return total

    def test_value_matches_definition(self):
        snaps, shifts, rng = random_problem(m=12, n=6, n_s=2, n_blocks=2,
                                            seed=7)
        counts = [2, 1]
        modes = [rng.standard_normal((snaps.n_rows, r)) for r in counts]
        prob = ReducedObjective(snaps, shifts, counts)
        val, _, _, _ = prob.evaluate(modes, need_gradient=False)
        assert val == pytest.approx(self.brute_force_value(snaps, shifts, modes),
                                    abs=1e-10)

    def test_objective_equals_residual_norm(self):
        # norm2 + J~ must equal the actual squared residual with the
        # least-squares amplitudes filled in
        snaps, shifts, rng = random_problem(m=14, n=5, n_s=2, seed=8)
        counts = [2, 2]
        modes = [rng.standard_normal((snaps.n_rows, r)) for r in counts]
        prob = ReducedObjective(snaps, shifts, counts)
        val, _, amps, _ = prob.evaluate(modes, need_gradient=False)
        dec = Decomposition([FrameBasis(W) for W in modes], amps, shifts,
                            snaps.grid, list(snaps.blocks))
        resid = np.linalg.norm(snaps.data - reconstruct(dec), "fro") ** 2
        assert prob.norm2 + val == pytest.approx(resid, rel=1e-10)

    def test_gradient_matches_finite_differences(self):
        snaps, shifts, rng = random_problem(m=12, n=5, n_s=2, seed=9)
        counts = [1, 2]
        prob = ReducedObjective(snaps, shifts, counts)
        z0 = rng.standard_normal(sum(snaps.n_rows * r for r in counts))
        _, g = prob.value_and_gradient(z0)
        eps = 1e-6
        for _ in range(10):
            v = rng.standard_normal(z0.size)
            v /= np.linalg.norm(v)
            fp = prob.value_and_gradient(z0 + eps * v)[0]
            fm = prob.value_and_gradient(z0 - eps * v)[0]
            assert (fp - fm) / (2 * eps) == pytest.approx(g @ v, rel=1e-5,
                                                          abs=1e-7)

    def test_spec_surface_returns_value_gradients_amplitudes(self):
        snaps, shifts, rng = random_problem(m=10, n=4, n_s=2, seed=10)
        frames = [FrameBasis(rng.standard_normal((snaps.n_rows, 1)))
                  for _ in range(2)]
        val, grads, amps = objective_and_gradient(snaps, frames, shifts)
        assert val <= 0.0
        assert len(grads) == 2 and len(amps) == 2
        assert grads[0].shape == frames[0].modes.shape
        assert amps[0].shape == (1, snaps.n_snapshots)

    def test_rank_events_recorded_for_deficient_bases(self):
        snaps, shifts, rng = random_problem(m=10, n=4, n_s=1, seed=11)
        w = rng.standard_normal((snaps.n_rows, 1))
        modes = [np.hstack([w, w])]  # duplicate mode: K_j rank 1 of 2
        prob = ReducedObjective(snaps, shifts, [2])
        prob.evaluate(modes, need_gradient=False)
        assert len(prob.rank_events) == snaps.n_snapshots

    def test_masked_rows_stay_zero_and_carry_no_gradient(self):
        snaps, shifts, rng = random_problem(m=8, n=4, n_s=2, n_blocks=2,
                                            seed=12)
        mask = np.zeros(snaps.n_rows, dtype=bool)
        mask[8:] = True  # pin the second block of frame 0
        prob = ReducedObjective(snaps, shifts, [1, 1], masks=[mask, None])
        z = rng.standard_normal(2 * snaps.n_rows)
        modes = prob.unpack(z)
        assert np.array_equal(modes[0][8:], np.zeros((8, 1)))
        _, g = prob.value_and_gradient(z)
        np.testing.assert_array_equal(g[8:16], 0.0)
        assert np.any(g[:8] != 0.0)

    def test_relative_error_of(self):
        # maps the full residual cost J to J / ||X||^2, clipped at zero
        snaps, shifts, _ = random_problem(seed=13)
        prob = ReducedObjective(snaps, shifts, [1, 1])
        assert prob.relative_error_of(0.0) == 0.0
        assert prob.relative_error_of(prob.norm2) == pytest.approx(1.0)
        assert prob.relative_error_of(-1e-12) == 0.0


class TestPacking:
    def test_round_trip_mode_major(self):
        snaps, shifts, rng = random_problem(m=6, n=4, n_s=2, seed=14)
        counts = [2, 1]
        prob = ReducedObjective(snaps, shifts, counts)
        modes = [rng.standard_normal((snaps.n_rows, r)) for r in counts]
        z = prob.pack(modes)
        assert z.shape == (snaps.n_rows * 3,)
        back = prob.unpack(z)
        for W, B in zip(modes, back):
            np.testing.assert_array_equal(W, B)
        # frame 0's first mode occupies the leading entries
        np.testing.assert_array_equal(z[:snaps.n_rows], modes[0][:, 0])


class TestReconstruct:
    def test_zero_amplitudes_give_zero_matrix(self):
        snaps, shifts, rng = random_problem(m=8, n=3, n_s=2, seed=15)
        frames = [FrameBasis(rng.standard_normal((snaps.n_rows, 2)))
                  for _ in range(2)]
        amps = [np.zeros((2, 3)) for _ in range(2)]
        dec = Decomposition(frames, amps, shifts, snaps.grid,
                            list(snaps.blocks))
        np.testing.assert_array_equal(reconstruct(dec),
                                      np.zeros((snaps.n_rows, 3)))

    def test_single_frame_zero_shift_is_plain_product(self):
        snaps, _, rng = random_problem(m=8, n=4, n_s=1, seed=16)
        W = rng.standard_normal((snaps.n_rows, 2))
        A = rng.standard_normal((2, 4))
        shifts = FrameShifts(np.zeros((1, 4)), PER3)
        dec = Decomposition([FrameBasis(W)], [A], shifts, snaps.grid,
                            list(snaps.blocks))
        np.testing.assert_allclose(reconstruct(dec), W @ A, atol=1e-13)

    def test_matches_dense_operator_sum(self):
        snaps, shifts, rng = random_problem(m=9, n=4, n_s=2, n_blocks=2,
                                            seed=17)
        m = snaps.grid.m
        frames = [FrameBasis(rng.standard_normal((snaps.n_rows, r)))
                  for r in (1, 2)]
        amps = [rng.standard_normal((r, 4)) for r in (1, 2)]
        dec = Decomposition(frames, amps, shifts, snaps.grid,
                            list(snaps.blocks))
        out = reconstruct(dec)
        expected = np.zeros_like(out)
        for l, (fr, A) in enumerate(zip(frames, amps)):
            contrib = fr.modes @ A
            for j in range(4):
                T = dense_shift_matrix(shifts.d[l, j], snaps.grid, shifts.spec)
                for b in range(2):
                    rows = slice(b * m, (b + 1) * m)
                    expected[rows, j] += T @ contrib[rows, j]
        np.testing.assert_allclose(out, expected, atol=1e-12)


class TestFrameBasis:
    def test_mask_zeroes_rows_on_construction(self):
        mask = np.array([True, False, False, True])
        fb = FrameBasis(np.ones((4, 2)), mask)
        np.testing.assert_array_equal(fb.modes[0], 0.0)
        np.testing.assert_array_equal(fb.modes[3], 0.0)
        np.testing.assert_array_equal(fb.modes[1:3], 1.0)

    def test_shape_validation(self):
        with pytest.raises(ValueError):
            FrameBasis(np.ones((4, 2)), np.array([True, False]))


class TestDecompositionType:
    def test_shape_validation(self):
        grid = Grid1D(4, 0.25, "periodic")
        shifts = FrameShifts(np.zeros((1, 3)), PER3)
        frames = [FrameBasis(np.ones((4, 2)))]
        with pytest.raises(ValueError):
            Decomposition(frames, [np.zeros((3, 3))], shifts, grid,
                          [VariableBlock("var0", 0, 4)])

    def test_rank_list(self):
        grid = Grid1D(4, 0.25, "periodic")
        shifts = FrameShifts(np.zeros((2, 3)), PER3)
        frames = [FrameBasis(np.ones((4, 2))), FrameBasis(np.ones((4, 0)))]
        amps = [np.zeros((2, 3)), np.zeros((0, 3))]
        dec = Decomposition(frames, amps, shifts, grid,
                            [VariableBlock("var0", 0, 4)])
        assert dec.r == [2, 0]
