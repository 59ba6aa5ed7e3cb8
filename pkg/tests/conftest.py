"""Shared builders for the test suite."""

import numpy as np

from lafcorrect import (
    NoiseModel,
    PinholeCamera,
    add_noise,
    generate_scene,
    ground_truth_lafs,
    track_from_cameras,
)


def random_camera(rng, focal=2.0, spread=3.0):
    """Camera with modest intrinsics at a random pose, roughly aimed at the
    origin so projected test points stay well conditioned."""
    center = rng.normal(size=3)
    center = center / np.linalg.norm(center) * spread
    z = -center / np.linalg.norm(center)
    up = rng.normal(size=3)
    up -= (up @ z) * z
    y = up / np.linalg.norm(up)
    x = np.cross(y, z)
    R = np.vstack([x, y, z])
    K = np.array([[focal, 0.0, 0.5], [0.0, focal, 0.5], [0.0, 0.0, 1.0]])
    return PinholeCamera(K=K, R=R, t=-R @ center)


def points_in_front(rng, n, radius=1.0):
    dirs = rng.normal(size=(n, 3))
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    return dirs * radius * rng.uniform(size=(n, 1)) ** (1.0 / 3.0)


def noisy_scene_track(n_views, sigma, seed, path_anchor="gt", pairs=None):
    """Scene, exact frames, noisy frames, and a track with noise-free rows."""
    rng = np.random.default_rng(seed)
    scene = generate_scene(n_views, rng)
    gt = ground_truth_lafs(scene)
    noisy = add_noise(gt, NoiseModel(sigma), rng)
    anchors = [f.x for f in gt] if path_anchor == "gt" else None
    track = track_from_cameras(scene.cameras, noisy, pairs, anchor_points=anchors)
    return scene, gt, noisy, track
