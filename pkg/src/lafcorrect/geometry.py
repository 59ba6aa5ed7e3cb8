"""Pinhole cameras, epipolar matrices, and the constraint vectors that tie
local affine frames together across a view pair.

A local affine frame (LAF) is a point x together with a 2x2 matrix M mapping
surface-local tangent coordinates to pixels.  For a view pair with epipolar
vectors (a, b), geometrically consistent frames satisfy

    M2^T a + M1^T b = 0,

which is the form every solver in this package consumes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    CoincidentCenters,
    DegenerateConstraint,
    NonPositiveScale,
    SingularFrame,
)

# Absolute cutoff under which determinants and constraint rows are treated as
# degenerate; double precision leaves ample headroom at pixel scales in the
# thousands.
DEGENERACY_TOL = 1e-12
_ROTATION_TOL = 1e-10


def _mat(value, rows, cols, name):
    out = np.asarray(value, dtype=float)
    if out.shape != (rows, cols):
        raise ValueError(f"{name} must be {rows}x{cols}, got shape {out.shape}")
    return out


def _vec(value, n, name):
    out = np.asarray(value, dtype=float).reshape(-1)
    if out.shape != (n,):
        raise ValueError(f"{name} must have {n} entries")
    return out


def skew(v):
    """Cross-product matrix of a 3-vector."""
    return np.array(
        [
            [0.0, -v[2], v[1]],
            [v[2], 0.0, -v[0]],
            [-v[1], v[0], 0.0],
        ]
    )


def homogeneous(x):
    return np.array([x[0], x[1], 1.0])


@dataclass(frozen=True)
class PinholeCamera:
    """Calibrated pinhole camera mapping world points through K [R|t]."""

    K: np.ndarray
    R: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "K", _mat(self.K, 3, 3, "K"))
        object.__setattr__(self, "R", _mat(self.R, 3, 3, "R"))
        object.__setattr__(self, "t", _vec(self.t, 3, "t"))
        if np.max(np.abs(self.R @ self.R.T - np.eye(3))) > _ROTATION_TOL:
            raise ValueError("R is not orthonormal")
        if abs(np.linalg.det(self.R) - 1.0) > _ROTATION_TOL:
            raise ValueError("R must be a proper rotation with det +1")
        if np.any(np.tril(self.K, -1) != 0.0) or self.K[0, 0] <= 0.0 or self.K[1, 1] <= 0.0:
            raise ValueError("K must be upper triangular with positive focal entries")

    @property
    def P(self):
        """3x4 projection matrix K [R|t]."""
        return self.K @ np.hstack([self.R, self.t[:, None]])

    @property
    def center(self):
        return -self.R.T @ self.t

    @property
    def Kinv(self):
        """Inverse intrinsics, computed once per camera."""
        cached = self.__dict__.get("_Kinv")
        if cached is None:
            cached = np.linalg.inv(self.K)
            object.__setattr__(self, "_Kinv", cached)
        return cached

    def project(self, point):
        """Pixel coordinates of a world point (assumed to have positive depth)."""
        y = self.K @ (self.R @ np.asarray(point, dtype=float) + self.t)
        return y[:2] / y[2]

    def project_many(self, points):
        """Project an (n, 3) array of world points to (n, 2) pixels."""
        y = self.K @ (self.R @ np.asarray(points, dtype=float).T + self.t[:, None])
        return (y[:2] / y[2]).T


def projection_jacobian(cam: PinholeCamera, point) -> np.ndarray:
    """2x3 derivative of the pixel projection with respect to the world point."""
    y = cam.K @ (cam.R @ np.asarray(point, dtype=float) + cam.t)
    d = np.array(
        [
            [1.0 / y[2], 0.0, -y[0] / y[2] ** 2],
            [0.0, 1.0 / y[2], -y[1] / y[2] ** 2],
        ]
    )
    return d @ cam.K @ cam.R


def canonicalize_epipolar_matrix(F) -> np.ndarray:
    """Scale a 3x3 matrix to unit Frobenius norm with a deterministic sign.

    The sign is fixed so that the largest-magnitude entry is positive, which
    makes results comparable across estimation paths.
    """
    F = _mat(F, 3, 3, "F")
    norm = np.linalg.norm(F)
    if norm < DEGENERACY_TOL:
        raise ValueError("cannot canonicalize a near-zero matrix")
    F = F / norm
    idx = np.unravel_index(int(np.argmax(np.abs(F))), F.shape)
    return -F if F[idx] < 0.0 else F


def _relative_pose(cam1: PinholeCamera, cam2: PinholeCamera):
    R12 = cam2.R @ cam1.R.T
    t12 = cam2.t - R12 @ cam1.t
    return R12, t12


def essential_from_poses(cam1: PinholeCamera, cam2: PinholeCamera) -> np.ndarray:
    """Essential matrix E with q2^T E q1 = 0 for corresponding bearing vectors.

    Canonicalized to unit Frobenius norm; its two nonzero singular values are
    equal by construction.
    """
    R12, t12 = _relative_pose(cam1, cam2)
    if np.linalg.norm(t12) < DEGENERACY_TOL:
        raise CoincidentCenters("optical centers coincide; epipolar geometry undefined")
    return canonicalize_epipolar_matrix(skew(t12) @ R12)


def fundamental_from_cameras(cam1: PinholeCamera, cam2: PinholeCamera) -> np.ndarray:
    """Fundamental matrix F with x2h^T F x1h = 0 for corresponding pixels."""
    R12, t12 = _relative_pose(cam1, cam2)
    if np.linalg.norm(t12) < DEGENERACY_TOL:
        raise CoincidentCenters("optical centers coincide; epipolar geometry undefined")
    E = skew(t12) @ R12
    F = cam2.Kinv.T @ E @ cam1.Kinv
    return canonicalize_epipolar_matrix(F)


@dataclass(frozen=True)
class LocalAffineFrame:
    """Image point plus the 2x2 linear part of a local affine frame."""

    x: np.ndarray
    m: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", _vec(self.x, 2, "x"))
        object.__setattr__(self, "m", _mat(self.m, 2, 2, "m"))
        if abs(float(np.linalg.det(self.m))) <= DEGENERACY_TOL:
            raise SingularFrame("frame matrix is numerically singular")


@dataclass(frozen=True)
class PartialFrame:
    """Scale-plus-rotation approximation of a frame, as reported by detectors
    that recover orientation and scale but not the full affine shape."""

    x: np.ndarray
    sigma: float
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "x", _vec(self.x, 2, "x"))
        object.__setattr__(self, "sigma", float(self.sigma))
        object.__setattr__(self, "theta", float(self.theta))
        if not self.sigma > 0.0:
            raise NonPositiveScale(f"scale must be positive, got {self.sigma}")


def expand_partial_frame(pf: PartialFrame) -> np.ndarray:
    """Full 2x2 matrix sigma * R(theta) for a scale-plus-rotation frame."""
    if not pf.sigma > 0.0:
        raise NonPositiveScale(f"scale must be positive, got {pf.sigma}")
    c, s = math.cos(pf.theta), math.sin(pf.theta)
    return pf.sigma * np.array([[c, -s], [s, c]])


def partial_from_frame(frame: LocalAffineFrame) -> PartialFrame:
    """Reduce a full frame to its closest scale-plus-rotation description.

    The rotation is the proper orthogonal polar factor of the matrix and the
    scale is the least-squares coefficient along it, so sigma * R(theta) is
    the Frobenius-closest similarity to the frame.  Frames dominated by a
    reflection have no positive best-fit scale and raise NonPositiveScale.
    """
    u, _, vt = np.linalg.svd(frame.m)
    rot = u @ vt
    if np.linalg.det(rot) < 0.0:
        rot = u @ np.diag([1.0, -1.0]) @ vt
    sigma = float(np.trace(rot.T @ frame.m)) / 2.0
    theta = math.atan2(rot[1, 0], rot[0, 0])
    return PartialFrame(x=frame.x, sigma=sigma, theta=theta)


def affine_from_laf_pair(m1, m2) -> np.ndarray:
    """Local affine transformation A = m2 m1^{-1} relating two frames."""
    m1 = _mat(m1, 2, 2, "m1")
    m2 = _mat(m2, 2, 2, "m2")
    if abs(float(np.linalg.det(m1))) <= DEGENERACY_TOL:
        raise SingularFrame("first frame is numerically singular")
    return m2 @ np.linalg.inv(m1)


@dataclass(frozen=True)
class PairEpipolarVectors:
    """Coefficients (a, b) of one epipolar constraint row for a view pair.

    Frames in the pair's views are consistent with the geometry exactly when
    m_j^T a + m_i^T b = 0, where (i, j) is the stored pair.
    """

    a: np.ndarray
    b: np.ndarray
    pair: tuple[int, int]

    def __post_init__(self):
        object.__setattr__(self, "a", _vec(self.a, 2, "a"))
        object.__setattr__(self, "b", _vec(self.b, 2, "b"))
        object.__setattr__(self, "pair", (int(self.pair[0]), int(self.pair[1])))
        if math.sqrt(self.a @ self.a + self.b @ self.b) < DEGENERACY_TOL:
            raise DegenerateConstraint("constraint row vanishes")


def _joint_scale(a, b, pair, normalize):
    norm = math.sqrt(a @ a + b @ b)
    if norm < DEGENERACY_TOL:
        raise DegenerateConstraint(
            "constraint row vanishes; the points sit at the epipoles"
        )
    if normalize:
        a = a / norm
        b = b / norm
    return PairEpipolarVectors(a=a, b=b, pair=pair)


def epipolar_vectors_pinhole(F, x1, x2, pair=(0, 1), normalize=True) -> PairEpipolarVectors:
    """Constraint vectors from a fundamental matrix and two pixel positions.

    a is the line normal F x1h truncated to its first two components, b the
    same for F^T x2h.  With normalize=True the concatenated (a, b) 4-vector
    is scaled to unit norm, which conditions the assembled system without
    changing the corrected solution.
    """
    F = _mat(F, 3, 3, "F")
    a = (F @ homogeneous(x1))[:2]
    b = (F.T @ homogeneous(x2))[:2]
    return _joint_scale(a, b, pair, normalize)


@dataclass(frozen=True)
class BearingObservation:
    """Unit bearing vector plus its 3x2 gradient with respect to the pixel."""

    q: np.ndarray
    dq: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "q", _vec(self.q, 3, "q"))
        object.__setattr__(self, "dq", _mat(self.dq, 3, 2, "dq"))
        if abs(float(np.linalg.norm(self.q)) - 1.0) > 1e-12:
            raise ValueError("bearing vector must have unit norm")
        if np.max(np.abs(self.q @ self.dq)) > 1e-10:
            raise ValueError("bearing gradient columns must be tangent to the sphere")


def bearing_and_gradient(cam: PinholeCamera, x) -> BearingObservation:
    """Bearing vector of a pixel and its analytic gradient.

    q is the normalized ray K^{-1} xh; the gradient follows from the chain
    rule through the normalization, so its columns are tangent to the unit
    sphere at q.
    """
    Kinv = cam.Kinv
    ray = Kinv @ homogeneous(x)
    norm = np.linalg.norm(ray)
    q = ray / norm
    dq = (np.eye(3) - np.outer(q, q)) @ Kinv[:, :2] / norm
    return BearingObservation(q=q, dq=dq)


def epipolar_vectors_central(E, obs1: BearingObservation, obs2: BearingObservation,
                             pair=(0, 1), normalize=True) -> PairEpipolarVectors:
    """Constraint vectors for general central projection.

    a = dq2^T E q1 and b = dq1^T E^T q2; for pinhole cameras this row is
    parallel to the pixel-space one from epipolar_vectors_pinhole.
    """
    E = _mat(E, 3, 3, "E")
    a = obs2.dq.T @ (E @ obs1.q)
    b = obs1.dq.T @ (E.T @ obs2.q)
    return _joint_scale(a, b, pair, normalize)


def laf_pair_residual(ev: PairEpipolarVectors, m1, m2) -> np.ndarray:
    """Residual m2^T a + m1^T b of the pairwise constraint; zero when consistent."""
    m1 = np.asarray(m1, dtype=float)
    m2 = np.asarray(m2, dtype=float)
    return m2.T @ ev.a + m1.T @ ev.b
