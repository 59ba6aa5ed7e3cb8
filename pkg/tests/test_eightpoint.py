"""Normalized eight-point estimation."""

import numpy as np
import pytest

from lafcorrect import (
    DegenerateConfiguration,
    estimate_f_eight_point,
    fundamental_from_cameras,
    generate_scene,
)
from lafcorrect.bench import _sample_ball_points


def projected_pairs(scene, points):
    p1 = scene.cameras[0].project_many(points)
    p2 = scene.cameras[1].project_many(points)
    return p1, p2


def mean_epipolar_residual(F, p1, p2):
    vals = [abs(np.append(b, 1.0) @ F @ np.append(a, 1.0)) for a, b in zip(p1, p2)]
    return float(np.mean(vals))


class TestNoiseFreeRecovery:
    def test_matches_pose_derived_matrix(self):
        for seed in range(10):
            rng = np.random.default_rng(seed)
            scene = generate_scene(2, seed)
            p1, p2 = projected_pairs(scene, _sample_ball_points(rng, 20))
            F_est = estimate_f_eight_point(p1, p2)
            F_gt = fundamental_from_cameras(*scene.cameras)
            cos = abs(float(F_est.reshape(-1) @ F_gt.reshape(-1)))
            assert cos > 1.0 - 1e-8
            assert mean_epipolar_residual(F_est, p1, p2) < 1e-8

    def test_exact_rank_two(self):
        rng = np.random.default_rng(3)
        scene = generate_scene(2, 3)
        p1, p2 = projected_pairs(scene, _sample_ball_points(rng, 30))
        s = np.linalg.svd(estimate_f_eight_point(p1, p2), compute_uv=False)
        assert s[2] < 1e-13 * s[0]

    def test_minimal_eight_points(self):
        rng = np.random.default_rng(4)
        scene = generate_scene(2, 4)
        p1, p2 = projected_pairs(scene, _sample_ball_points(rng, 8))
        F_est = estimate_f_eight_point(p1, p2)
        assert mean_epipolar_residual(F_est, p1, p2) < 1e-8


class TestInvariance:
    def test_equivariant_under_similarity_transforms(self):
        # estimating in similarity-transformed pixel coordinates and mapping
        # the result back must reproduce the original estimate
        rng = np.random.default_rng(5)
        scene = generate_scene(2, 5)
        p1, p2 = projected_pairs(scene, _sample_ball_points(rng, 40))
        p1 = p1 + rng.normal(size=p1.shape) * 0.5
        p2 = p2 + rng.normal(size=p2.shape) * 0.5
        F_base = estimate_f_eight_point(p1, p2)
        for _ in range(5):
            def similarity():
                angle = rng.uniform(-np.pi, np.pi)
                scale = rng.uniform(0.2, 5.0)
                shift = rng.uniform(-300.0, 300.0, size=2)
                S = np.eye(3)
                S[:2, :2] = scale * np.array(
                    [[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]]
                )
                S[:2, 2] = shift
                return S

            S1, S2 = similarity(), similarity()
            q1 = (S1[:2, :2] @ p1.T + S1[:2, 2:]).T
            q2 = (S2[:2, :2] @ p2.T + S2[:2, 2:]).T
            F_t = estimate_f_eight_point(q1, q2)
            from lafcorrect import canonicalize_epipolar_matrix

            back = canonicalize_epipolar_matrix(S2.T @ F_t @ S1)
            np.testing.assert_allclose(back, F_base, atol=1e-8)


class TestDegeneracies:
    def test_coplanar_points_rejected(self):
        scene = generate_scene(2, 6)
        uv = np.array([(u, v) for u in np.linspace(-0.5, 0.5, 5)
                       for v in np.linspace(-0.5, 0.5, 4)])
        plane_pts = np.column_stack([uv[:, 0], uv[:, 1],
                                     0.3 * uv[:, 0] - 0.2 * uv[:, 1] + 0.1])
        p1, p2 = projected_pairs(scene, plane_pts)
        with pytest.raises(DegenerateConfiguration):
            estimate_f_eight_point(p1, p2)

    def test_too_few_points_rejected(self):
        pts = np.zeros((7, 2))
        with pytest.raises(DegenerateConfiguration):
            estimate_f_eight_point(pts, pts)

    def test_coincident_points_rejected(self):
        pts = np.ones((10, 2))
        with pytest.raises(DegenerateConfiguration):
            estimate_f_eight_point(pts, pts)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            estimate_f_eight_point(np.zeros((10, 2)), np.zeros((9, 2)))
