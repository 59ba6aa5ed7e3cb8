"""Reading and validating JSON track documents.

Document layout::

    {
      "cameras":  [{"id": "v0", "K": [[...] x3], "R": [[...] x3], "t": [...]}, ...],
      "pairwise": [{"i": "v0", "j": "v1", "F": [[...] x3]}, ...],
      "tracks":   [{"observations": [
          {"view_id": "v0", "x": 10.0, "y": 20.0, "M": [m11, m12, m21, m22]},
          {"view_id": "v1", "x": 11.0, "y": 19.5, "sigma": 2.0, "theta": 0.1}
      ]}, ...]
    }

Exactly one of "cameras" or "pairwise" must be present; mixing them is
rejected.  "M" is row-major; observations may instead carry a scale "sigma"
and orientation "theta" for partially covariant detections.  A "pairwise"
entry provides F with xj_h^T F xi_h = 0 for points in views i and j.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import SchemaError
from .geometry import LocalAffineFrame, PartialFrame, PinholeCamera
from .solver import (
    MultiViewTrack,
    all_pairs,
    chain_pairs,
    track_from_cameras,
    track_from_fundamentals,
)


@dataclass
class Observation:
    view_id: str
    x: float
    y: float
    m: np.ndarray | None = None
    sigma: float | None = None
    theta: float | None = None

    @property
    def is_partial(self) -> bool:
        return self.m is None


@dataclass
class TrackRecord:
    observations: list[Observation]


@dataclass
class TrackDocument:
    cameras: dict[str, PinholeCamera] | None
    pairwise: dict[tuple[str, str], np.ndarray] | None
    tracks: list[TrackRecord]

    @property
    def pose_based(self) -> bool:
        return self.cameras is not None

    def view_ids(self) -> set[str]:
        if self.cameras is not None:
            return set(self.cameras)
        ids = set()
        for i, j in self.pairwise:
            ids.add(i)
            ids.add(j)
        return ids


def _number(value, where):
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise SchemaError(f"{where}: expected a number, got {value!r}")
    out = float(value)
    if not np.isfinite(out):
        raise SchemaError(f"{where}: value must be finite")
    return out


def _matrix(value, rows, cols, where):
    try:
        out = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise SchemaError(f"{where}: expected a {rows}x{cols} numeric matrix") from None
    if out.shape != (rows, cols):
        raise SchemaError(f"{where}: expected shape {rows}x{cols}, got {out.shape}")
    if not np.all(np.isfinite(out)):
        raise SchemaError(f"{where}: matrix entries must be finite")
    return out


def _parse_cameras(entries):
    if not isinstance(entries, list):
        raise SchemaError("'cameras' must be a list")
    cameras = {}
    for n, entry in enumerate(entries):
        where = f"cameras[{n}]"
        if not isinstance(entry, dict):
            raise SchemaError(f"{where}: expected an object")
        cam_id = entry.get("id")
        if not isinstance(cam_id, str) or not cam_id:
            raise SchemaError(f"{where}: 'id' must be a nonempty string")
        if cam_id in cameras:
            raise SchemaError(f"{where}: duplicate camera id {cam_id!r}")
        K = _matrix(entry.get("K"), 3, 3, f"{where}.K")
        R = _matrix(entry.get("R"), 3, 3, f"{where}.R")
        try:
            t = np.asarray(entry.get("t"), dtype=float).reshape(-1)
        except (TypeError, ValueError):
            raise SchemaError(f"{where}.t: expected 3 finite numbers") from None
        if t.shape != (3,) or not np.all(np.isfinite(t)):
            raise SchemaError(f"{where}.t: expected 3 finite numbers")
        try:
            cameras[cam_id] = PinholeCamera(K=K, R=R, t=t)
        except ValueError as exc:
            raise SchemaError(f"{where}: {exc}") from None
    return cameras


def _parse_pairwise(entries):
    if not isinstance(entries, list):
        raise SchemaError("'pairwise' must be a list")
    pairwise = {}
    for n, entry in enumerate(entries):
        where = f"pairwise[{n}]"
        if not isinstance(entry, dict):
            raise SchemaError(f"{where}: expected an object")
        i, j = entry.get("i"), entry.get("j")
        if not isinstance(i, str) or not isinstance(j, str) or not i or not j:
            raise SchemaError(f"{where}: 'i' and 'j' must be nonempty strings")
        if i == j:
            raise SchemaError(f"{where}: a pair cannot relate view {i!r} to itself")
        if (i, j) in pairwise or (j, i) in pairwise:
            raise SchemaError(f"{where}: duplicate geometry for pair ({i!r}, {j!r})")
        pairwise[(i, j)] = _matrix(entry.get("F"), 3, 3, f"{where}.F")
    return pairwise


def _parse_observation(entry, known_ids, where):
    if not isinstance(entry, dict):
        raise SchemaError(f"{where}: expected an object")
    view_id = entry.get("view_id")
    if not isinstance(view_id, str) or not view_id:
        raise SchemaError(f"{where}: 'view_id' must be a nonempty string")
    if view_id not in known_ids:
        raise SchemaError(f"{where}: view_id {view_id!r} does not resolve to any geometry")
    x = _number(entry.get("x"), f"{where}.x")
    y = _number(entry.get("y"), f"{where}.y")
    has_m = "M" in entry
    has_partial = "sigma" in entry or "theta" in entry
    if has_m and has_partial:
        raise SchemaError(f"{where}: give either 'M' or 'sigma'/'theta', not both")
    if has_m:
        m_raw = entry["M"]
        if not isinstance(m_raw, list) or len(m_raw) != 4:
            raise SchemaError(f"{where}.M: expected 4 numbers (row-major)")
        m = np.array([_number(v, f"{where}.M") for v in m_raw]).reshape(2, 2)
        return Observation(view_id=view_id, x=x, y=y, m=m)
    if "sigma" not in entry or "theta" not in entry:
        raise SchemaError(f"{where}: partial observations need both 'sigma' and 'theta'")
    sigma = _number(entry["sigma"], f"{where}.sigma")
    theta = _number(entry["theta"], f"{where}.theta")
    if sigma <= 0.0:
        raise SchemaError(f"{where}.sigma: scale must be positive")
    return Observation(view_id=view_id, x=x, y=y, sigma=sigma, theta=theta)


def parse_document(data) -> TrackDocument:
    """Validate a decoded JSON object against the document schema."""
    if not isinstance(data, dict):
        raise SchemaError("top-level document must be an object")
    has_cameras = "cameras" in data
    has_pairwise = "pairwise" in data
    if has_cameras and has_pairwise:
        raise SchemaError(
            "document mixes 'cameras' poses with 'pairwise' fundamental matrices; "
            "supply exactly one geometry section"
        )
    if not has_cameras and not has_pairwise:
        raise SchemaError("document must supply a 'cameras' or 'pairwise' section")
    cameras = _parse_cameras(data["cameras"]) if has_cameras else None
    pairwise = _parse_pairwise(data["pairwise"]) if has_pairwise else None
    doc = TrackDocument(cameras=cameras, pairwise=pairwise, tracks=[])
    known_ids = doc.view_ids()
    raw_tracks = data.get("tracks")
    if not isinstance(raw_tracks, list):
        raise SchemaError("'tracks' must be a list")
    for tn, raw in enumerate(raw_tracks):
        where = f"tracks[{tn}]"
        if not isinstance(raw, dict) or not isinstance(raw.get("observations"), list):
            raise SchemaError(f"{where}: expected an object with an 'observations' list")
        observations = [
            _parse_observation(obs, known_ids, f"{where}.observations[{k}]")
            for k, obs in enumerate(raw["observations"])
        ]
        if len(observations) < 2:
            raise SchemaError(f"{where}: a track needs at least two observations")
        seen = set()
        for obs in observations:
            if obs.view_id in seen:
                raise SchemaError(f"{where}: view {obs.view_id!r} observed twice")
            seen.add(obs.view_id)
        doc.tracks.append(TrackRecord(observations=observations))
    return doc


def load_document(path) -> TrackDocument:
    """Load and validate a track document from disk."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(
                f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
            ) from None
    return parse_document(data)


def build_track(doc: TrackDocument, record: TrackRecord, pairs_mode="all",
                normalize=True) -> MultiViewTrack:
    """Turn one track record into a solvable MultiViewTrack.

    Frame invariant violations (e.g. a singular M) surface as solver errors
    here, not schema errors; callers report them per track.
    """
    frames = []
    for obs in record.observations:
        if obs.is_partial:
            frames.append(PartialFrame(x=(obs.x, obs.y), sigma=obs.sigma, theta=obs.theta))
        else:
            frames.append(LocalAffineFrame(x=(obs.x, obs.y), m=obs.m))
    ids = [obs.view_id for obs in record.observations]
    n = len(ids)
    pairs = chain_pairs(n) if pairs_mode == "chain" else all_pairs(n)
    if doc.pose_based:
        cams = [doc.cameras[i] for i in ids]
        return track_from_cameras(cams, frames, pairs, normalize=normalize, views=tuple(ids))
    fmats = {}
    for i, j in pairs:
        F = doc.pairwise.get((ids[i], ids[j]))
        if F is None:
            rev = doc.pairwise.get((ids[j], ids[i]))
            F = None if rev is None else rev.T
        if F is not None:
            fmats[(i, j)] = F
    return track_from_fundamentals(fmats, frames, pairs, normalize=normalize,
                                   views=tuple(ids))
