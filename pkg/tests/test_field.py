import numpy as np
import pytest

from modalsense.field import (
    FieldSnapshot,
    SnapshotSeries,
    Workspace,
    damped_oscillation_complex,
    downsample,
    downsample_indices,
    gen_damped_oscillation,
    gen_lti_field,
    gen_lti_switched,
    inject_noise,
)


class TestWorkspace:
    def test_index_roundtrip_is_bijective(self):
        ws = Workspace(7, 5)
        seen = set()
        for iy in range(5):
            for ix in range(7):
                idx = ws.index_of(ix, iy)
                assert ws.point_of(idx) == (ix, iy)
                seen.add(idx)
        assert seen == set(range(ws.n_points))

    def test_rejects_bad_dimensions(self):
        with pytest.raises(ValueError):
            Workspace(0, 3)
        with pytest.raises(ValueError):
            Workspace(3, 3, spacing=0.0)

    def test_out_of_range_lookups(self):
        ws = Workspace(3, 3)
        with pytest.raises(IndexError):
            ws.index_of(3, 0)
        with pytest.raises(IndexError):
            ws.point_of(9)


class TestSnapshotContainers:
    def test_snapshot_validates_values(self):
        with pytest.raises(ValueError):
            FieldSnapshot(np.array([1.0, np.nan]))
        with pytest.raises(ValueError):
            FieldSnapshot(np.array([1.0]), time=-1.0)

    def test_series_requires_uniform_spacing(self):
        good = [FieldSnapshot(np.zeros(4), time=0.1 * k) for k in range(5)]
        SnapshotSeries(tuple(good), 0.1)
        bad = good[:4] + [FieldSnapshot(np.zeros(4), time=0.55)]
        with pytest.raises(ValueError):
            SnapshotSeries(tuple(bad), 0.1)

    def test_series_matrix_columns_are_snapshots(self):
        snaps = [FieldSnapshot(np.full(3, float(k)), time=k * 0.5) for k in range(4)]
        m = SnapshotSeries(tuple(snaps), 0.5).matrix()
        assert m.shape == (3, 4)
        assert np.array_equal(m[:, 2], np.full(3, 2.0))


class TestDampedOscillation:
    def test_single_point_origin_t0_is_one(self):
        snap = gen_damped_oscillation(Workspace(1, 1), 0.0)
        assert snap.values[0] == pytest.approx(1.0)

    def test_matches_closed_form_pointwise(self):
        # independent evaluation of cosh(x)cosh(y)*1.9**(-t)*cos(pi*t/2)
        ws = Workspace(5, 4)
        xs = np.linspace(-1, 1, 5)
        ys = np.linspace(-1, 1, 4)
        for t in (0.0, 0.3, 1.0, 2.7):
            snap = gen_damped_oscillation(ws, t)
            expected = np.empty(ws.n_points)
            for idx in range(ws.n_points):
                ix, iy = ws.point_of(idx)
                expected[idx] = (np.cosh(xs[ix]) * np.cosh(ys[iy])
                                 * 1.9 ** (-t) * np.cos(np.pi * t / 2.0))
            assert np.allclose(snap.values, expected, atol=1e-12)

    def test_purely_imaginary_factor_at_t1(self):
        snap = gen_damped_oscillation(Workspace(4, 4), 1.0)
        assert np.max(np.abs(snap.values)) < 1e-12

    def test_amplitude_envelope(self):
        ws = Workspace(6, 6)
        base = np.max(np.abs(damped_oscillation_complex(ws, 0.0)))
        for t in (0.5, 1.0, 3.25):
            peak = np.max(np.abs(damped_oscillation_complex(ws, t)))
            assert abs(peak / base - 1.9 ** (-t)) < 1e-9

    def test_rejects_negative_time(self):
        with pytest.raises(ValueError):
            gen_damped_oscillation(Workspace(2, 2), -0.1)


class TestLtiGenerator:
    def test_zero_rate_is_constant_in_time(self):
        series = gen_lti_field(Workspace(3, 3), [0.0], mode_seed=1, T=10, dt=0.1)
        m = series.matrix()
        assert np.allclose(m, m[:, :1])

    def test_real_rate_norm_decay_is_monotone_and_exact(self):
        series = gen_lti_field(Workspace(4, 4), [-1.0], mode_seed=2, T=50, dt=0.05)
        norms = [np.linalg.norm(s.values) for s in series.snapshots]
        assert all(a > b for a, b in zip(norms, norms[1:]))
        assert norms[20] / norms[0] == pytest.approx(np.exp(-1.0), rel=1e-12)

    def test_conjugate_pair_envelope(self):
        series = gen_lti_field(Workspace(5, 5), [-1 + 2j, -1 - 2j], mode_seed=3,
                               T=120, dt=0.05)
        norms = np.array([np.linalg.norm(s.values) for s in series.snapshots])
        times = np.arange(120) * 0.05
        assert np.allclose(norms, norms[0] * np.exp(-times), rtol=1e-10)

    def test_every_mode_is_excited(self):
        series = gen_lti_field(Workspace(4, 4), [-0.5, -2.0, -1 + 1j, -1 - 1j],
                               mode_seed=4, T=30, dt=0.1)
        m = series.matrix()
        # four excited modes leave a rank-4 trace
        sv = np.linalg.svd(m, compute_uv=False)
        assert sv[3] / sv[0] > 1e-8

    def test_unpaired_complex_rejected(self):
        with pytest.raises(ValueError, match="conjugate"):
            gen_lti_field(Workspace(3, 3), [-1 + 2j], mode_seed=0, T=5, dt=0.1)

    def test_too_many_modes_rejected(self):
        with pytest.raises(ValueError, match="more modes"):
            gen_lti_field(Workspace(2, 1), [-1.0, -2.0, -3.0], mode_seed=0,
                          T=5, dt=0.1)

    def test_seed_controls_modes(self):
        a = gen_lti_field(Workspace(3, 3), [-1.0], mode_seed=1, T=5, dt=0.1)
        b = gen_lti_field(Workspace(3, 3), [-1.0], mode_seed=1, T=5, dt=0.1)
        c = gen_lti_field(Workspace(3, 3), [-1.0], mode_seed=2, T=5, dt=0.1)
        assert np.array_equal(a.matrix(), b.matrix())
        assert not np.array_equal(a.matrix(), c.matrix())


class TestSwitchedGenerator:
    def test_coefficients_continuous_at_switch(self):
        series = gen_lti_switched(Workspace(4, 4), [-0.5], [-2.0], 10,
                                  mode_seed=5, T=20, dt=0.1)
        m = series.matrix()
        before = gen_lti_field(Workspace(4, 4), [-0.5], mode_seed=5, T=11, dt=0.1)
        assert np.allclose(m[:, :11], before.matrix()[:, :11])
        norms = np.linalg.norm(m, axis=0)
        # post-switch decay at the new rate
        assert norms[15] / norms[10] == pytest.approx(np.exp(-2.0 * 0.5), rel=1e-10)

    def test_structure_mismatch_rejected(self):
        with pytest.raises(ValueError, match="structure"):
            gen_lti_switched(Workspace(4, 4), [-1.0], [-1 + 1j, -1 - 1j], 5,
                             mode_seed=0, T=10, dt=0.1)


class TestInjectNoise:
    def test_zero_variance_identity(self):
        snap = FieldSnapshot(np.arange(6, dtype=float))
        out = inject_noise(snap, 0.0, seed=9)
        assert np.array_equal(out.values, snap.values)

    def test_deterministic_per_seed(self):
        snap = FieldSnapshot(np.zeros(100))
        a = inject_noise(snap, 0.04, seed=5)
        b = inject_noise(snap, 0.04, seed=5)
        c = inject_noise(snap, 0.04, seed=6)
        assert np.array_equal(a.values, b.values)
        assert not np.array_equal(a.values, c.values)

    def test_sample_variance_matches(self):
        snap = FieldSnapshot(np.zeros(100_000))
        noisy = inject_noise(snap, 0.04, seed=11)
        assert np.var(noisy.values) == pytest.approx(0.04, rel=0.05)

    def test_negative_variance_rejected(self):
        with pytest.raises(ValueError):
            inject_noise(FieldSnapshot(np.zeros(3)), -0.1, seed=0)


class TestDownsample:
    def test_identity_steps(self):
        ws = Workspace(5, 4)
        snap = FieldSnapshot(np.arange(20, dtype=float))
        out, out_ws = downsample(snap, ws, 1, 1)
        assert np.array_equal(out.values, snap.values)
        assert (out_ws.width, out_ws.height) == (5, 4)

    def test_four_by_four_step_two(self):
        ws = Workspace(4, 4)
        snap = FieldSnapshot(np.arange(16, dtype=float))
        out, out_ws = downsample(snap, ws, 2, 2)
        assert (out_ws.width, out_ws.height) == (2, 2)
        # kept cells (0,0), (2,0), (0,2), (2,2) in row-major index order
        assert np.array_equal(out.values, [0.0, 2.0, 8.0, 10.0])

    def test_paper_scale_grid_shapes(self):
        ws = Workspace(96, 384)
        snap = FieldSnapshot(np.zeros(ws.n_points))
        _, coarse = downsample(snap, ws, 2, 2)
        assert (coarse.width, coarse.height) == (48, 192)

    def test_coarse_count_formula(self):
        for (w, h, sx, sy) in [(5, 7, 2, 3), (9, 4, 4, 1), (6, 6, 5, 5)]:
            ws = Workspace(w, h)
            idx = downsample_indices(ws, sx, sy)
            assert idx.size == -(-w // sx) * -(-h // sy)
