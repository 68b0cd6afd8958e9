"""Motion between keyframes: pose interpolation, dynamic Gaussian
interpolation along predicted displacement fields, and speed-based
dynamic/static labeling of object tracks."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .scene_model import (
    CameraPose,
    DynamicMask,
    GaussianMap,
    TIME_MATCH_TOL,
    normalize_quaternion,
)
from .temporal import DynamicSet, decompose

# Near-parallel quaternions interpolate linearly; the sin-based formula
# degrades as sin(theta) -> 0.  The linear path deviates from the geodesic
# by O(theta^3), so the switch has to happen at a tiny angle or the error
# becomes visible against a matrix-log reference.
DOT_THRESHOLD = 1.0 - 1e-7

# Max-speed thresholds (m/s) above which a tracked object counts as dynamic.
SPEED_THRESHOLDS: Mapping[str, float] = {"vehicle": 0.5, "pedestrian": 0.2}


@dataclass(frozen=True)
class MotionField:
    """Predicted displacements for frame t_a's dynamic pixels toward t_b.

    queries are (row, col) pixel coordinates into frame t_a's Gaussian map;
    displacements[i] moves the Gaussian at queries[i] across the full
    [t_a, t_b] interval.
    """

    t_a: float
    t_b: float
    queries: np.ndarray         # (Q, 2) int64
    displacements: np.ndarray   # (Q, 3) float32

    def __post_init__(self):
        if not (math.isfinite(self.t_a) and math.isfinite(self.t_b)) or self.t_b <= self.t_a:
            raise ValueError(f"motion interval [{self.t_a}, {self.t_b}] must be finite and increasing")
        q = np.ascontiguousarray(np.asarray(self.queries, dtype=np.int64))
        d = np.ascontiguousarray(np.asarray(self.displacements, dtype=np.float32))
        if q.ndim != 2 or q.shape[1] != 2:
            raise ValueError(f"queries must be (Q, 2), got {q.shape}")
        if d.shape != (len(q), 3):
            raise ValueError(f"displacements must be ({len(q)}, 3), got {d.shape}")
        q.setflags(write=False)
        d.setflags(write=False)
        object.__setattr__(self, "queries", q)
        object.__setattr__(self, "displacements", d)

    def __len__(self) -> int:
        return len(self.queries)


@dataclass(frozen=True)
class InterpolationQuery:
    """A time t_i inside [t_a, t_b] with its interpolation weight.

    weight = (t_i - t_a) / (t_b - t_a); extrapolation outside the interval is
    rejected at construction.
    """

    t_a: float
    t_b: float
    t_i: float
    weight: float = field(init=False)

    def __post_init__(self):
        if not self.t_a < self.t_b:
            raise ValueError(f"need t_a < t_b, got [{self.t_a}, {self.t_b}]")
        if not self.t_a <= self.t_i <= self.t_b:
            raise ValueError(
                f"t_i={self.t_i} lies outside [{self.t_a}, {self.t_b}]; "
                "extrapolation is not supported"
            )
        object.__setattr__(self, "weight", (self.t_i - self.t_a) / (self.t_b - self.t_a))


def slerp(q0: np.ndarray, q1: np.ndarray, t: float) -> np.ndarray:
    """Spherical interpolation between unit quaternions along the shorter arc.

    Returns the unit quaternion at fraction t of the geodesic from q0 to q1.
    q1 is sign-flipped when the pair straddles the long way around, so the
    result never swings through the far hemisphere.  Near-parallel inputs fall
    back to a normalized linear blend, as do (defensively) exactly antipodal
    ones, which additionally raise a RuntimeWarning because the geodesic is
    ambiguous there.
    """
    q0 = normalize_quaternion(q0)
    q1 = normalize_quaternion(q1)
    dot = float(np.dot(q0, q1))
    if dot <= -1.0 + 1e-9:
        # q1 is q0's sign twin: same rotation, but the arc between the raw
        # quaternions is a half great circle with no preferred path
        warnings.warn("antipodal quaternions; falling back to normalized lerp", RuntimeWarning)
        q1 = -q1
        dot = -dot
    elif dot < 0.0:
        q1 = -q1
        dot = -dot
    if dot > DOT_THRESHOLD:
        return normalize_quaternion(q0 + t * (q1 - q0))
    theta0 = np.arccos(np.clip(dot, -1.0, 1.0))
    theta = theta0 * t
    s1 = np.sin(theta) / np.sin(theta0)
    s0 = np.cos(theta) - dot * s1
    return normalize_quaternion(s0 * q0 + s1 * q1)


def interpolate_pose(pose_a: CameraPose, pose_b: CameraPose, query: InterpolationQuery) -> CameraPose:
    """Camera pose at query.t_i: slerped rotation, lerped translation and
    intrinsics.

    Endpoint weights reproduce the inputs exactly (up to quaternion sign).
    """
    if abs(pose_a.timestamp - query.t_a) > TIME_MATCH_TOL or abs(pose_b.timestamp - query.t_b) > TIME_MATCH_TOL:
        raise ValueError("pose timestamps do not match the interpolation interval")
    w = query.weight
    return CameraPose(
        fx=(1 - w) * pose_a.fx + w * pose_b.fx,
        fy=(1 - w) * pose_a.fy + w * pose_b.fy,
        cx=(1 - w) * pose_a.cx + w * pose_b.cx,
        cy=(1 - w) * pose_a.cy + w * pose_b.cy,
        rotation=slerp(pose_a.rotation, pose_b.rotation, w),
        translation=(1 - w) * pose_a.translation + w * pose_b.translation,
        timestamp=query.t_i,
    )


def interpolate_dynamic(
    map_a: GaussianMap,
    mask_a: DynamicMask,
    motion: MotionField,
    query: InterpolationQuery,
    dropped: np.ndarray | None = None,
) -> DynamicSet:
    """Dynamic Gaussians of frame t_a advanced to query.t_i.

    Only the means move: mean_i = mean_a + weight * displacement.  Rotation,
    scale, color, opacity, and lifespan carry over unchanged; birth_time
    becomes t_i so the result renders fully opaque at the query instant.

    The motion queries must cover frame t_a's dynamic pixels exactly (after
    excluding dropped pixels); anything else is a modeling error and raises.
    """
    if abs(motion.t_a - query.t_a) > TIME_MATCH_TOL or abs(motion.t_b - query.t_b) > TIME_MATCH_TOL:
        raise ValueError(
            f"motion field spans [{motion.t_a}, {motion.t_b}] but the query "
            f"interpolates [{query.t_a}, {query.t_b}]"
        )
    _, dyn = decompose(map_a, mask_a)
    expected = dyn.pixel_indices
    if dropped is not None:
        expected = expected[~np.asarray(dropped, dtype=bool)[expected]]
    flat = motion.queries[:, 0] * map_a.width + motion.queries[:, 1]
    if len(flat) != len(expected) or not np.array_equal(np.sort(flat), expected):
        raise ValueError(
            f"motion queries must cover exactly the {len(expected)} dynamic "
            f"pixels of frame t={map_a.timestamp}, got {len(flat)}"
        )

    base = map_a.gaussians.take(flat)
    means = base.means.astype(np.float64) + query.weight * motion.displacements.astype(np.float64)
    moved = base.replace(
        means=means.astype(np.float32),
        birth_times=np.full(len(flat), query.t_i, dtype=np.float64),
    )
    return DynamicSet(
        timestamp=query.t_i,
        gaussians=moved,
        source_timestamps=np.full(len(flat), map_a.timestamp, dtype=np.float64),
        source_indices=flat,
        instance_ids=map_a.instance_ids[flat],
    )


@dataclass(frozen=True)
class ObjectTrack:
    """World-space trajectory samples for one tracked object."""

    object_id: int
    category: str               # key into the speed threshold table
    times: np.ndarray           # (K,) seconds, strictly increasing
    positions: np.ndarray       # (K, 3) meters

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.float64)
        p = np.asarray(self.positions, dtype=np.float64)
        if p.shape != (len(t), 3):
            raise ValueError("positions must be (K, 3) aligned with times")
        if len(t) > 1 and np.any(np.diff(t) <= 0):
            raise ValueError("track times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "positions", p)

    def max_speed(self) -> float | None:
        """Largest finite-difference speed, or None for single-sample tracks."""
        if len(self.times) < 2:
            return None
        steps = np.diff(self.positions, axis=0)
        dts = np.diff(self.times)
        return float(np.max(np.linalg.norm(steps, axis=1) / dts))


def label_dynamic_from_tracks(
    tracks: Sequence[ObjectTrack],
    thresholds: Mapping[str, float] = SPEED_THRESHOLDS,
) -> dict[int, bool | None]:
    """Classify tracks as dynamic (True) / static (False) by max speed.

    An object is dynamic when its max speed strictly exceeds its category
    threshold.  Single-sample tracks are undetermined and map to None.

    Raises ValueError for categories missing from the threshold table.
    """
    out: dict[int, bool | None] = {}
    for tr in tracks:
        if tr.category not in thresholds:
            raise ValueError(f"no speed threshold for category {tr.category!r}")
        speed = tr.max_speed()
        out[tr.object_id] = None if speed is None else speed > thresholds[tr.category]
    return out
