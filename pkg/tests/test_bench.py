"""Synthetic scene generation, noise, error metric, and the grid runner."""

import numpy as np
import pytest

from lafcorrect import (
    LocalAffineFrame,
    NoiseModel,
    PinholeCamera,
    SingularFrame,
    add_noise,
    affine_from_laf_pair,
    epipolar_vectors_pinhole,
    fundamental_from_cameras,
    generate_scene,
    ground_truth_lafs,
    laf_error,
    laf_pair_residual,
    run_grid,
    tangent_frames,
    write_grid_csv,
)
from lafcorrect.bench import CSV_HEADER, GRID_CORRECTED_8PT, GRID_CORRECTED_GT, GRID_INPUT
from lafcorrect.solver import all_pairs


class TestSceneGeneration:
    def test_camera_centers_on_radius_five_sphere(self):
        for seed in (0, 1, 2):
            scene = generate_scene(6, seed)
            for cam in scene.cameras:
                assert abs(np.linalg.norm(cam.center) - 5.0) < 1e-12

    def test_point_inside_unit_ball(self):
        for seed in range(10):
            assert np.linalg.norm(generate_scene(3, seed).point) <= 1.0

    def test_principal_axes_pass_through_origin(self):
        scene = generate_scene(4, 5)
        for cam in scene.cameras:
            center = cam.center
            axis = cam.R[2]
            off = center - (center @ axis) * axis
            assert np.linalg.norm(off) < 1e-9

    def test_tangent_basis_orthonormal(self):
        scene = generate_scene(3, 6)
        for t in (scene.tangent1, scene.tangent2):
            assert abs(np.linalg.norm(t) - 1.0) < 1e-12
            assert abs(t @ scene.normal) < 1e-12
        assert abs(scene.tangent1 @ scene.tangent2) < 1e-12

    def test_positive_depth_everywhere(self):
        scene = generate_scene(8, 7)
        for cam in scene.cameras:
            assert (cam.R @ scene.point + cam.t)[2] > 0.0

    def test_deterministic_per_seed(self):
        a = generate_scene(5, 99)
        b = generate_scene(5, 99)
        assert np.array_equal(a.point, b.point)
        assert np.array_equal(a.normal, b.normal)
        for ca, cb in zip(a.cameras, b.cameras):
            assert np.array_equal(ca.R, cb.R) and np.array_equal(ca.t, cb.t)

    def test_single_view_rejected(self):
        with pytest.raises(ValueError):
            generate_scene(1, 0)


class TestGroundTruthFrames:
    def test_frames_satisfy_all_pairwise_constraints(self):
        # the end-to-end correctness anchor: exact frames are exactly feasible
        for seed in range(5):
            scene = generate_scene(5, seed)
            gt = ground_truth_lafs(scene)
            for i, j in all_pairs(5):
                F = fundamental_from_cameras(scene.cameras[i], scene.cameras[j])
                ev = epipolar_vectors_pinhole(F, gt[i].x, gt[j].x, pair=(i, j))
                assert np.linalg.norm(laf_pair_residual(ev, gt[i].m, gt[j].m)) < 1e-9

    def test_induced_affinity_matches_constraint(self):
        scene = generate_scene(2, 11)
        gt = ground_truth_lafs(scene)
        F = fundamental_from_cameras(*scene.cameras)
        ev = epipolar_vectors_pinhole(F, gt[0].x, gt[1].x)
        A = affine_from_laf_pair(gt[0].m, gt[1].m)
        assert np.linalg.norm(A.T @ ev.a + ev.b) < 1e-9

    def test_fronto_parallel_aligned_cameras_give_equal_frames(self):
        K = np.array([[800.0, 0.0, 400.0], [0.0, 800.0, 300.0], [0.0, 0.0, 1.0]])
        cams = [
            PinholeCamera(K=K, R=np.eye(3), t=-np.array([-0.5, 0.0, -5.0])),
            PinholeCamera(K=K, R=np.eye(3), t=-np.array([0.5, 0.0, -5.0])),
        ]
        frames = tangent_frames(cams, np.zeros(3), np.array([1.0, 0.0, 0.0]),
                                np.array([0.0, 1.0, 0.0]))
        np.testing.assert_allclose(frames[0].m, frames[1].m, atol=1e-12)


class TestNoise:
    def test_zero_sigma_is_identity(self):
        scene = generate_scene(3, 12)
        gt = ground_truth_lafs(scene)
        noisy = add_noise(gt, NoiseModel(0.0), 12)
        for f, g in zip(noisy, gt):
            assert np.array_equal(f.x, g.x)
            assert np.array_equal(f.m, g.m)

    def test_deterministic_per_seed(self):
        scene = generate_scene(3, 13)
        gt = ground_truth_lafs(scene)
        a = add_noise(gt, NoiseModel(1.0), 5)
        b = add_noise(gt, NoiseModel(1.0), 5)
        for fa, fb in zip(a, b):
            assert np.array_equal(fa.x, fb.x) and np.array_equal(fa.m, fb.m)

    def test_sample_variance_matches_sigma(self):
        sigma = 0.7
        base = [LocalAffineFrame(x=(0.0, 0.0), m=np.eye(2))] * 20000
        noisy = add_noise(base, NoiseModel(sigma), 77)
        draws = np.concatenate(
            [np.concatenate([f.x, (f.m - np.eye(2)).reshape(-1)]) for f in noisy]
        )
        assert draws.size == 120000
        assert abs(draws.var() - sigma ** 2) < 0.03 * sigma ** 2

    def test_negative_sigma_rejected(self):
        with pytest.raises(ValueError):
            NoiseModel(-0.1)


class TestLafError:
    def test_zero_for_identical_frames(self):
        ms = [np.array([[2.0, 0.3], [-0.4, 1.5]]), np.eye(2)]
        assert laf_error(ms, ms) == 0.0

    def test_doubling_gives_sqrt_two(self):
        ms = [np.array([[2.0, 0.3], [-0.4, 1.5]]), np.eye(2), np.diag([3.0, 0.5])]
        assert abs(laf_error(ms, [2.0 * m for m in ms]) - np.sqrt(2.0)) < 1e-12

    def test_invariant_to_common_left_factor(self):
        rng = np.random.default_rng(14)
        gt = [rng.normal(size=(2, 2)) + 2 * np.eye(2) for _ in range(4)]
        est = [m + rng.normal(size=(2, 2)) * 0.1 for m in gt]
        G = rng.normal(size=(2, 2)) + 1.5 * np.eye(2)
        base = laf_error(gt, est)
        moved = laf_error([G @ m for m in gt], [G @ m for m in est])
        assert abs(base - moved) < 1e-10 * max(1.0, base)

    def test_singular_ground_truth_rejected(self):
        with pytest.raises(SingularFrame):
            laf_error([np.zeros((2, 2))], [np.eye(2)])

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            laf_error([np.eye(2)], [np.eye(2), np.eye(2)])


class TestRunGrid:
    def test_shapes_labels_and_determinism(self):
        kwargs = dict(sigmas=[0.0, 0.5], view_counts=[2, 3], trials=3, seed=9)
        grids_a = run_grid(**kwargs)
        grids_b = run_grid(**kwargs)
        assert [g.label for g in grids_a] == [GRID_INPUT, GRID_CORRECTED_GT,
                                              GRID_CORRECTED_8PT]
        for ga, gb in zip(grids_a, grids_b):
            assert ga.mean.shape == (2, 2)
            assert np.array_equal(ga.mean, gb.mean)
            assert np.array_equal(ga.std, gb.std)
            assert np.array_equal(ga.excluded, gb.excluded)

    def test_zero_noise_column_is_exactly_corrected(self):
        grids = run_grid([0.0], [2, 4], trials=3, seed=10,
                         f_modes="ground_truth")
        by_label = {g.label: g for g in grids}
        assert np.all(by_label[GRID_INPUT].mean < 1e-12)
        assert np.all(by_label[GRID_CORRECTED_GT].mean < 1e-9)

    def test_correction_improves_noisy_cells(self):
        grids = run_grid([0.5], [4], trials=30, seed=11)
        by_label = {g.label: g for g in grids}
        assert (by_label[GRID_CORRECTED_GT].mean[0, 0]
                < by_label[GRID_INPUT].mean[0, 0])
        assert (by_label[GRID_CORRECTED_8PT].mean[0, 0]
                < by_label[GRID_INPUT].mean[0, 0])

    def test_central_rows_reproduce_pinhole_grid(self):
        base = run_grid([0.4], [3], trials=5, seed=12, f_modes="ground_truth")
        central = run_grid([0.4], [3], trials=5, seed=12, f_modes="ground_truth",
                           constraint_mode="central")
        np.testing.assert_allclose(base[1].mean, central[1].mean, rtol=1e-9)

    def test_mode_subset_and_validation(self):
        grids = run_grid([0.1], [2], trials=1, f_modes="eight_point")
        assert [g.label for g in grids] == [GRID_INPUT, GRID_CORRECTED_8PT]
        with pytest.raises(ValueError):
            run_grid([0.1], [2], trials=0)
        with pytest.raises(ValueError):
            run_grid([0.1], [2], trials=1, f_modes="bogus")


class TestCsvWriter:
    def test_layout_and_line_endings(self, tmp_path):
        grids = run_grid([0.0, 0.3], [2, 3], trials=2, seed=13)
        out = tmp_path / "grid.csv"
        rows = write_grid_csv(grids, out)
        raw = out.read_bytes()
        assert b"\r" not in raw
        lines = raw.decode().splitlines()
        assert lines[0] == CSV_HEADER
        assert rows == 3 * 2 * 2
        assert len(lines) == 1 + rows
        first = lines[1].split(",")
        assert first[0] == "0" and first[1] == "2" and first[2] == GRID_INPUT

    def test_timing_suppression_zeroes_column(self, tmp_path):
        grids = run_grid([0.2], [2], trials=2, seed=14)
        out = tmp_path / "grid.csv"
        write_grid_csv(grids, out, include_timing=False)
        for line in out.read_text().splitlines()[1:]:
            assert line.split(",")[-1] == "0.000"
