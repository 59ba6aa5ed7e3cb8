"""Multi-view local affine frame correction against epipolar geometry.

The library makes detected local affine frames exactly consistent with
pre-estimated two-view geometry through a closed-form least-squares
projection, completes scale-plus-rotation frames to full affine ones, and
ships a synthetic benchmark that measures the correction under controlled
noise.
"""

from .bench import (
    ErrorGrid,
    NoiseModel,
    SyntheticScene,
    add_noise,
    generate_scene,
    ground_truth_lafs,
    laf_error,
    run_grid,
    tangent_frames,
    write_grid_csv,
)
from .eightpoint import estimate_f_eight_point
from .errors import (
    CoincidentCenters,
    DegenerateConfiguration,
    DegenerateConstraint,
    DuplicatePair,
    InsufficientConstraints,
    InvalidPairIndex,
    LafCorrectionError,
    NonPositiveScale,
    NumericalFailure,
    SchemaError,
    SingularFrame,
    VisibilityFailure,
)
from .geometry import (
    BearingObservation,
    LocalAffineFrame,
    PairEpipolarVectors,
    PartialFrame,
    PinholeCamera,
    affine_from_laf_pair,
    bearing_and_gradient,
    canonicalize_epipolar_matrix,
    epipolar_vectors_central,
    epipolar_vectors_pinhole,
    essential_from_poses,
    expand_partial_frame,
    fundamental_from_cameras,
    laf_pair_residual,
    partial_from_frame,
    projection_jacobian,
    skew,
)
from .solver import (
    ConstraintSystem,
    CorrectionResult,
    MultiViewTrack,
    all_pairs,
    assemble,
    chain_pairs,
    correct_kkt,
    correct_qr,
    correct_svd,
    correct_track,
    track_from_cameras,
    track_from_fundamentals,
)

__version__ = "0.1.0"
