"""Constraint assembly and the closed-form least-squares frame correction.

The per-view 2x2 frames of a track are stacked vertically into a 2|V| x 2
block column Omega.  Every pairwise constraint contributes one column to a
matrix B: the pair's b vector lands in the block row of its first view and
the a vector in the block row of its second, so that row c of B^T Omega is
the transposed pairwise residual m_j^T a + m_i^T b.  Consistent stacks
therefore satisfy B^T Omega = 0, and the closest consistent stack in the
Frobenius sense is the input minus its orthogonal projection onto col(B).

Three routes compute that projection:

* ``correct_qr``   - column-pivoting Householder QR of B, preferred when B
  is built from exact camera poses and carries no noise;
* ``correct_svd``  - removes the leading 2|V| - 3 left singular directions
  of B, the right choice when only estimated pairwise geometry is known;
* ``correct_kkt``  - a dense solve of the full bordered system, kept as a
  slow oracle for the two fast paths.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    DegenerateConstraint,
    DuplicatePair,
    InsufficientConstraints,
    InvalidPairIndex,
    NumericalFailure,
)
from .geometry import (
    LocalAffineFrame,
    PairEpipolarVectors,
    PartialFrame,
    bearing_and_gradient,
    epipolar_vectors_central,
    epipolar_vectors_pinhole,
    essential_from_poses,
    expand_partial_frame,
    fundamental_from_cameras,
)

# Relative cutoff for rank decisions in both the QR and SVD routes.
RANK_TOL = 1e-10
# Minimum ratio between the last projected-out and first kept singular value
# before the SVD route flags the fixed nullspace dimension as doubtful.
SPECTRAL_GAP_MIN = 10.0
# Prefix of the warning recorded when projected-out directions sit close to
# the nullspace, where noise in B rotates them unpredictably (near-coplanar
# cameras and point); callers can gate on it.
WARN_UNSTABLE_SPECTRUM = "unstable constraint spectrum"

PATH_QR = "qr"
PATH_SVD = "svd"
PATH_KKT = "kkt"


def _validate_pairs(pairs, n_views):
    seen = set()
    for i, j in pairs:
        if not (0 <= i < n_views and 0 <= j < n_views) or i == j:
            raise InvalidPairIndex(f"pair ({i}, {j}) is invalid for {n_views} views")
        if not i < j:
            raise InvalidPairIndex(f"pair ({i}, {j}) must be ordered i < j")
        if (i, j) in seen:
            raise DuplicatePair(f"pair ({i}, {j}) appears more than once")
        seen.add((i, j))


@dataclass(frozen=True)
class MultiViewTrack:
    """One scene point's frames across a view set plus its constraint rows.

    ``pairs[c]`` names the views constrained by ``epipolar[c]``; view indices
    are positions in ``frames``.  ``pose_derived`` records whether the rows
    came from exact camera poses, which drives the default solve path.
    """

    frames: tuple[LocalAffineFrame, ...]
    pairs: tuple[tuple[int, int], ...]
    epipolar: tuple[PairEpipolarVectors, ...]
    views: tuple = None
    pose_derived: bool = False
    dropped_pairs: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))
        object.__setattr__(self, "pairs", tuple((int(i), int(j)) for i, j in self.pairs))
        object.__setattr__(self, "epipolar", tuple(self.epipolar))
        object.__setattr__(self, "dropped_pairs", tuple(self.dropped_pairs))
        if self.views is None:
            object.__setattr__(self, "views", tuple(range(len(self.frames))))
        else:
            object.__setattr__(self, "views", tuple(self.views))
        if len(self.frames) < 2:
            raise ValueError("a track needs at least two views")
        if len(self.views) != len(self.frames):
            raise ValueError("one view identifier per frame is required")
        if len(self.pairs) != len(self.epipolar):
            raise ValueError("one epipolar entry per constraint pair is required")
        _validate_pairs(self.pairs, len(self.frames))


def all_pairs(n_views: int) -> tuple[tuple[int, int], ...]:
    """Every unordered view pair (i < j)."""
    return tuple((i, j) for i in range(n_views) for j in range(i + 1, n_views))


def chain_pairs(n_views: int) -> tuple[tuple[int, int], ...]:
    """Consecutive view pairs only."""
    return tuple((k, k + 1) for k in range(n_views - 1))


def _expand_frames(frames):
    out = []
    for f in frames:
        if isinstance(f, PartialFrame):
            out.append(LocalAffineFrame(x=f.x, m=expand_partial_frame(f)))
        else:
            out.append(f)
    return tuple(out)


def track_from_cameras(cameras, frames, pairs=None, *, mode="pinhole",
                       normalize=True, anchor_points=None, views=None) -> MultiViewTrack:
    """Build a track whose constraint rows come from known camera poses.

    Partial frames are expanded to sigma * R(theta) on entry.  mode selects
    pixel-space rows from fundamental matrices ("pinhole") or bearing-space
    rows from essential matrices ("central").  anchor_points optionally
    overrides the image points at which the rows are evaluated, e.g. exact
    reprojections of a reconstructed point; frame centers are used otherwise.
    Degenerate pairs are dropped and reported on the track.
    """
    if mode not in ("pinhole", "central"):
        raise ValueError(f"unknown constraint mode {mode!r}")
    frames = _expand_frames(frames)
    n = len(frames)
    if len(cameras) != n:
        raise ValueError("one camera per frame is required")
    if pairs is None:
        pairs = all_pairs(n)
    if anchor_points is None:
        pts = [f.x for f in frames]
    else:
        pts = [np.asarray(p, dtype=float) for p in anchor_points]
    kept, evs, dropped = [], [], []
    for i, j in pairs:
        try:
            if mode == "pinhole":
                F = fundamental_from_cameras(cameras[i], cameras[j])
                ev = epipolar_vectors_pinhole(F, pts[i], pts[j], pair=(i, j),
                                              normalize=normalize)
            else:
                E = essential_from_poses(cameras[i], cameras[j])
                ev = epipolar_vectors_central(
                    E,
                    bearing_and_gradient(cameras[i], pts[i]),
                    bearing_and_gradient(cameras[j], pts[j]),
                    pair=(i, j),
                    normalize=normalize,
                )
        except DegenerateConstraint:
            dropped.append((i, j))
            continue
        kept.append((i, j))
        evs.append(ev)
    return MultiViewTrack(frames=frames, pairs=tuple(kept), epipolar=tuple(evs),
                          views=views, pose_derived=True, dropped_pairs=tuple(dropped))


def track_from_fundamentals(fmats, frames, pairs=None, *, normalize=True,
                            anchor_points=None, views=None) -> MultiViewTrack:
    """Build a track from pre-estimated pairwise fundamental matrices.

    fmats maps view index pairs (i, j) to F with xj_h^T F xi_h = 0; reversed
    keys are accepted via transposition.  Pairs without a matrix, like
    degenerate ones, are dropped and reported on the track.
    """
    frames = _expand_frames(frames)
    n = len(frames)
    if pairs is None:
        pairs = all_pairs(n)
    if anchor_points is None:
        pts = [f.x for f in frames]
    else:
        pts = [np.asarray(p, dtype=float) for p in anchor_points]
    kept, evs, dropped = [], [], []
    for i, j in pairs:
        F = fmats.get((i, j))
        if F is None:
            rev = fmats.get((j, i))
            F = None if rev is None else np.asarray(rev, dtype=float).T
        if F is None:
            dropped.append((i, j))
            continue
        try:
            ev = epipolar_vectors_pinhole(F, pts[i], pts[j], pair=(i, j),
                                          normalize=normalize)
        except DegenerateConstraint:
            dropped.append((i, j))
            continue
        kept.append((i, j))
        evs.append(ev)
    return MultiViewTrack(frames=frames, pairs=tuple(kept), epipolar=tuple(evs),
                          views=views, pose_derived=False, dropped_pairs=tuple(dropped))


@dataclass(frozen=True)
class ConstraintSystem:
    """Assembled constraint matrix and stacked input frames for one track."""

    B: np.ndarray          # (2 n_views, n_pairs)
    omega_hat: np.ndarray  # (2 n_views, 2), frames stacked vertically
    pairs: tuple[tuple[int, int], ...]
    n_views: int

    def row_block(self, view: int) -> slice:
        """Rows of B / omega occupied by the given view."""
        return slice(2 * view, 2 * view + 2)

    def pair_residuals(self, omega) -> np.ndarray:
        """Euclidean norm of each pairwise constraint residual."""
        return np.linalg.norm(self.B.T @ omega, axis=1)


def assemble(track: MultiViewTrack) -> ConstraintSystem:
    """Assemble the constraint matrix B and the stacked input frames.

    Column c of B holds the pair's b vector in the block row of view i and
    its a vector in the block row of view j; everything else is zero.
    """
    n = len(track.frames)
    _validate_pairs(track.pairs, n)
    if not track.pairs:
        raise InsufficientConstraints("track has no usable constraint pairs")
    B = np.zeros((2 * n, len(track.pairs)))
    for c, ((i, j), ev) in enumerate(zip(track.pairs, track.epipolar)):
        B[2 * i:2 * i + 2, c] = ev.b
        B[2 * j:2 * j + 2, c] = ev.a
    omega_hat = np.vstack([f.m for f in track.frames])
    return ConstraintSystem(B=B, omega_hat=omega_hat, pairs=track.pairs, n_views=n)


@dataclass(frozen=True)
class CorrectionResult:
    """Corrected frame stack plus diagnostics of the solve."""

    omega: np.ndarray
    residual_before: float
    residual_after: float
    frobenius_change: float
    rank_used: int
    path: str
    warnings: tuple[str, ...] = ()
    lambdas: np.ndarray | None = None

    @property
    def matrices(self) -> tuple[np.ndarray, ...]:
        """Corrected 2x2 frame matrix per view."""
        n = self.omega.shape[0] // 2
        return tuple(self.omega[2 * k:2 * k + 2].copy() for k in range(n))


def _finish(cs, omega, path, rank_used, warnings=(), lambdas=None):
    before = cs.pair_residuals(cs.omega_hat)
    after = cs.pair_residuals(omega)
    return CorrectionResult(
        omega=omega,
        residual_before=float(before.max()),
        residual_after=float(after.max()),
        frobenius_change=float(np.sum((omega - cs.omega_hat) ** 2)),
        rank_used=int(rank_used),
        path=path,
        warnings=tuple(warnings),
        lambdas=lambdas,
    )


def correct_qr(cs: ConstraintSystem) -> CorrectionResult:
    """Project the input stack using a rank-revealing QR basis of col(B).

    The column-pivoting Householder factorization exposes the effective rank
    through the diagonal of R; the projector is applied as Q_r (Q_r^T omega)
    and no normal-equation inverse is ever formed.
    """
    q, r, _ = scipy.linalg.qr(cs.B, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    rank = int(np.count_nonzero(diag > RANK_TOL * diag[0])) if diag[0] > 0.0 else 0
    warnings = []
    expected = min(2 * cs.n_views - 3, cs.B.shape[1])
    if rank < expected:
        warnings.append(
            f"rank deficiency: effective rank {rank} below expected {expected}"
        )
    basis = q[:, :rank]
    omega = cs.omega_hat - basis @ (basis.T @ cs.omega_hat)
    return _finish(cs, omega, PATH_QR, rank, warnings)


def correct_svd(cs: ConstraintSystem) -> CorrectionResult:
    """Project out the leading 2|V| - 3 left singular directions of B.

    Consistent frame stacks occupy a three-dimensional left nullspace of B
    for generic geometry, so exactly 2|V| - 3 directions are removed when
    enough constraints are present.  The spectral gap between kept and
    discarded singular values is measured and a warning recorded when it is
    thin; with fewer constraints than generic directions the route falls
    back to an effective-rank projection.
    """
    n_dirs = 2 * cs.n_views - 3
    if n_dirs <= 0:
        raise InsufficientConstraints("need at least two views")
    u, s, _ = np.linalg.svd(cs.B, full_matrices=False)
    if s[0] <= 0.0:
        return _finish(cs, cs.omega_hat.copy(), PATH_SVD, 0, ("zero constraint matrix",))
    warnings = []
    r_eff = int(np.count_nonzero(s > RANK_TOL * s[0]))
    if cs.B.shape[1] < n_dirs:
        keep = r_eff
        warnings.append(
            f"only {cs.B.shape[1]} constraints for {n_dirs} generic directions; "
            f"falling back to effective rank {keep}"
        )
    else:
        keep = n_dirs
        if r_eff != n_dirs:
            warnings.append(f"effective rank {r_eff} differs from expected {n_dirs}")
        if s.size > n_dirs:
            tail = s[n_dirs]
            gap = s[n_dirs - 1] / tail if tail > 0.0 else float("inf")
            if gap < SPECTRAL_GAP_MIN:
                warnings.append(
                    f"weak spectral gap {gap:.2f} between kept and discarded "
                    "singular values"
                )
        if s[keep - 1] < s[0] / SPECTRAL_GAP_MIN:
            warnings.append(
                f"{WARN_UNSTABLE_SPECTRUM}: smallest retained singular value "
                f"{s[keep - 1]:.2e} is below sigma_max/{SPECTRAL_GAP_MIN:.0f} "
                f"({s[0] / SPECTRAL_GAP_MIN:.2e}); near-degenerate pose "
                "configuration makes the removed directions noise sensitive"
            )
    basis = u[:, :keep]
    omega = cs.omega_hat - basis @ (basis.T @ cs.omega_hat)
    return _finish(cs, omega, PATH_SVD, keep, warnings)


def correct_kkt(cs: ConstraintSystem) -> CorrectionResult:
    """Solve the full bordered system as a dense least-squares oracle.

    The unknowns stack the corrected frames over one 2-vector multiplier per
    constraint.  Columns of B are equilibrated first, which leaves the frame
    block of the solution unchanged while keeping the system well
    conditioned; the multipliers are rescaled back afterwards.
    """
    nv2 = 2 * cs.n_views
    nc = cs.B.shape[1]
    col_norms = np.linalg.norm(cs.B, axis=0)
    scale = np.where(col_norms > 0.0, col_norms, 1.0)
    bn = cs.B / scale
    kkt = np.zeros((nv2 + nc, nv2 + nc))
    kkt[:nv2, :nv2] = np.eye(nv2)
    kkt[:nv2, nv2:] = bn
    kkt[nv2:, :nv2] = bn.T
    rhs = np.vstack([cs.omega_hat, np.zeros((nc, 2))])
    try:
        sol, _, _, _ = np.linalg.lstsq(kkt, rhs, rcond=None)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"KKT solve did not converge: {exc}") from exc
    if not np.all(np.isfinite(sol)):
        raise NumericalFailure("KKT solve produced non-finite values")
    omega = sol[:nv2]
    lambdas = sol[nv2:] / scale[:, None]
    sv = np.linalg.svd(cs.B, compute_uv=False)
    rank = int(np.count_nonzero(sv > RANK_TOL * sv[0])) if sv[0] > 0.0 else 0
    return _finish(cs, omega, PATH_KKT, rank, (), lambdas)


_PATHS = {PATH_QR: correct_qr, PATH_SVD: correct_svd, PATH_KKT: correct_kkt}


def correct_track(track: MultiViewTrack, path: str | None = None) -> CorrectionResult:
    """Assemble and solve one track.

    Picks QR for pose-derived geometry and SVD otherwise unless a path is
    forced explicitly.
    """
    cs = assemble(track)
    if path is None:
        path = PATH_QR if track.pose_derived else PATH_SVD
    try:
        solve = _PATHS[path]
    except KeyError:
        raise ValueError(f"unknown path {path!r}; expected qr, svd or kkt") from None
    return solve(cs)
