"""Normalized eight-point estimation of the fundamental matrix."""

from __future__ import annotations

import math

import numpy as np

from .errors import DegenerateConfiguration
from .geometry import canonicalize_epipolar_matrix

# Relative cutoff on the second-smallest singular value of the design matrix;
# below it the correspondences admit a whole family of solutions.
_NULLSPACE_TOL = 1e-8


def _normalize_points(pts):
    # shift the centroid to the origin and scale the mean distance to sqrt(2)
    centroid = pts.mean(axis=0)
    centered = pts - centroid
    mean_dist = np.linalg.norm(centered, axis=1).mean()
    if mean_dist < 1e-12:
        raise DegenerateConfiguration("all points coincide")
    s = math.sqrt(2.0) / mean_dist
    T = np.array(
        [
            [s, 0.0, -s * centroid[0]],
            [0.0, s, -s * centroid[1]],
            [0.0, 0.0, 1.0],
        ]
    )
    return centered * s, T


def estimate_f_eight_point(points1, points2) -> np.ndarray:
    """Fundamental matrix from eight or more point correspondences.

    Coordinates in each image are shifted to zero centroid and scaled to a
    mean distance of sqrt(2) before the linear solve, the rank-2 constraint
    is enforced by zeroing the smallest singular value, and the result is
    mapped back to pixel coordinates and canonicalized (unit Frobenius norm,
    fixed sign).  All correspondences enter one least-squares solve; there is
    no outlier handling here.

    Parameters
    ----------
    points1, points2 : (n, 2) arrays
        Matched pixel coordinates, n >= 8.

    Returns
    -------
    (3, 3) array F satisfying points2_h^T F points1_h = 0.

    Raises
    ------
    DegenerateConfiguration
        For fewer than eight points, or when the design matrix has a
        numerical nullspace of more than one dimension (e.g. coplanar or
        collinear configurations).
    """
    p1 = np.asarray(points1, dtype=float)
    p2 = np.asarray(points2, dtype=float)
    if p1.ndim != 2 or p1.shape[1] != 2 or p1.shape != p2.shape:
        raise ValueError("point sets must both have shape (n, 2)")
    n = p1.shape[0]
    if n < 8:
        raise DegenerateConfiguration(f"need at least 8 correspondences, got {n}")
    n1, T1 = _normalize_points(p1)
    n2, T2 = _normalize_points(p2)
    ones = np.ones(n)
    A = np.column_stack(
        [
            n2[:, 0] * n1[:, 0], n2[:, 0] * n1[:, 1], n2[:, 0],
            n2[:, 1] * n1[:, 0], n2[:, 1] * n1[:, 1], n2[:, 1],
            n1[:, 0], n1[:, 1], ones,
        ]
    )
    _, s, vt = np.linalg.svd(A)
    # pad implicit zeros so the nullspace test covers n == 8 as well
    s_full = np.concatenate([s, np.zeros(9 - s.size)]) if s.size < 9 else s
    if s_full[7] <= _NULLSPACE_TOL * s_full[0]:
        raise DegenerateConfiguration(
            "correspondences admit a family of solutions (degenerate configuration)"
        )
    Fn = vt[-1].reshape(3, 3)
    u, sf, vft = np.linalg.svd(Fn)
    Fn = u @ np.diag([sf[0], sf[1], 0.0]) @ vft
    return canonicalize_epipolar_matrix(T2.T @ Fn @ T1)
