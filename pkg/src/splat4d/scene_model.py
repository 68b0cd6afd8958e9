"""Core scene representation for the 4D Gaussian engine.

A scene is an ordered sequence of per-frame Gaussian maps (one Gaussian per
pixel), dynamic masks, and camera poses, plus optional sky dome, motion fields
between frames, and inserted instances produced by editing.

Conventions used throughout the package:
  * quaternions are (w, x, y, z), unit length
  * camera frame is +z forward, +x right, +y down; pixel (row i, col j) has
    continuous image coordinates (u, v) = (j, i)
  * world up axis is +z; the first camera of a sequence sits at the world
    origin with identity rotation
  * bulk Gaussian data is float32, timestamps and poses are float64
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Iterable, Mapping, Sequence

import numpy as np

if TYPE_CHECKING:
    from .motion import MotionField
    from .sky import SkyDome

# Per-Gaussian channel layout: color(3) mean(3) quat wxyz(4) scale(3)
# opacity(1) lifespan(1).  Serialization and map payloads rely on this order.
CHANNELS = 15

QUAT_NORM_TOL = 1e-6
TIME_MATCH_TOL = 1e-9


def normalize_quaternion(q: np.ndarray) -> np.ndarray:
    """Return q / |q| as float64 (w, x, y, z).

    Inputs already unit length within 1e-9 pass through bit-for-bit, so
    normalizing is idempotent and serialized poses survive a load/save cycle
    unchanged.  Raises ValueError for zero-length or non-finite input;
    callers that must not raise on malformed data should check beforehand.
    """
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (4,) or not np.all(np.isfinite(q)):
        raise ValueError(f"quaternion must be 4 finite components, got {q!r}")
    n = float(np.linalg.norm(q))
    if n == 0.0:
        raise ValueError("zero-length quaternion")
    if abs(n - 1.0) <= 1e-9:
        return q
    return q / n


def quaternion_to_matrix(q: np.ndarray) -> np.ndarray:
    """Rotation matrix of a unit quaternion (w, x, y, z)."""
    w, x, y, z = np.asarray(q, dtype=np.float64)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def quaternions_to_matrices(quats: np.ndarray) -> np.ndarray:
    """Vectorized quaternion_to_matrix: (N, 4) wxyz -> (N, 3, 3)."""
    q = np.asarray(quats, dtype=np.float64)
    w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    m = np.empty((len(q), 3, 3), dtype=np.float64)
    m[:, 0, 0] = 1 - 2 * (y * y + z * z)
    m[:, 0, 1] = 2 * (x * y - w * z)
    m[:, 0, 2] = 2 * (x * z + w * y)
    m[:, 1, 0] = 2 * (x * y + w * z)
    m[:, 1, 1] = 1 - 2 * (x * x + z * z)
    m[:, 1, 2] = 2 * (y * z - w * x)
    m[:, 2, 0] = 2 * (x * z - w * y)
    m[:, 2, 1] = 2 * (y * z + w * x)
    m[:, 2, 2] = 1 - 2 * (x * x + y * y)
    return m


def _frozen(a: np.ndarray) -> np.ndarray:
    """Mark an array read-only; scene containers are immutable by contract."""
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Gaussian:
    """A single 3D Gaussian primitive.

    Construction validates every field and renormalizes the quaternion, so a
    Gaussian instance is always well formed.  Bulk data lives in GaussianSet,
    which defers validation to validate_sequence.
    """

    color: np.ndarray        # (3,) rgb in [0, 1]
    mean: np.ndarray         # (3,) world position, meters
    rotation: np.ndarray     # (4,) unit quaternion wxyz
    scale: np.ndarray        # (3,) per-axis stddev, meters, > 0
    opacity: float           # [0, 1]
    lifespan: float          # temporal variance, seconds^2, > 0
    birth_time: float        # timestamp the Gaussian was observed at

    def __post_init__(self):
        color = np.asarray(self.color, dtype=np.float64)
        mean = np.asarray(self.mean, dtype=np.float64)
        scale = np.asarray(self.scale, dtype=np.float64)
        if color.shape != (3,) or not np.all(np.isfinite(color)):
            raise ValueError("color must be 3 finite components")
        if np.any(color < 0) or np.any(color > 1):
            raise ValueError(f"color out of [0, 1]: {color}")
        if mean.shape != (3,) or not np.all(np.isfinite(mean)):
            raise ValueError("mean must be 3 finite components")
        if scale.shape != (3,) or not np.all(np.isfinite(scale)) or np.any(scale <= 0):
            raise ValueError(f"scale must be positive and finite: {scale}")
        if not (np.isfinite(self.opacity) and 0.0 <= self.opacity <= 1.0):
            raise ValueError(f"opacity out of [0, 1]: {self.opacity}")
        if not (np.isfinite(self.lifespan) and self.lifespan > 0.0):
            raise ValueError(f"lifespan must be > 0: {self.lifespan}")
        if not np.isfinite(self.birth_time):
            raise ValueError("birth_time must be finite")
        object.__setattr__(self, "color", _frozen(color))
        object.__setattr__(self, "mean", _frozen(mean))
        object.__setattr__(self, "rotation", _frozen(normalize_quaternion(self.rotation)))
        object.__setattr__(self, "scale", _frozen(scale))

    def covariance(self) -> np.ndarray:
        """World-space 3x3 covariance R diag(scale^2) R^T."""
        r = quaternion_to_matrix(self.rotation)
        return r @ np.diag(np.asarray(self.scale) ** 2) @ r.T


@dataclass(frozen=True)
class GaussianSet:
    """Structure-of-arrays container for N Gaussians.

    Arrays are float32 (model output precision) except birth_times, which are
    float64 timestamps.  Arrays are stored read-only; use replace()/take() to
    derive modified sets.  No per-element validation happens here.
    """

    colors: np.ndarray       # (N, 3) float32
    means: np.ndarray        # (N, 3) float32
    rotations: np.ndarray    # (N, 4) float32
    scales: np.ndarray       # (N, 3) float32
    opacities: np.ndarray    # (N,)  float32
    lifespans: np.ndarray    # (N,)  float32
    birth_times: np.ndarray  # (N,)  float64

    def __post_init__(self):
        n = len(np.atleast_2d(self.colors))
        coerce = [
            ("colors", np.float32, (n, 3)),
            ("means", np.float32, (n, 3)),
            ("rotations", np.float32, (n, 4)),
            ("scales", np.float32, (n, 3)),
            ("opacities", np.float32, (n,)),
            ("lifespans", np.float32, (n,)),
            ("birth_times", np.float64, (n,)),
        ]
        for name, dtype, shape in coerce:
            a = np.asarray(getattr(self, name))
            if a.dtype != dtype:
                a = a.astype(dtype)
            if a.shape != shape:
                raise ValueError(f"GaussianSet.{name}: expected shape {shape}, got {a.shape}")
            object.__setattr__(self, name, _frozen(np.ascontiguousarray(a)))

    def __len__(self) -> int:
        return len(self.opacities)

    def __getitem__(self, i: int) -> Gaussian:
        return Gaussian(
            color=np.clip(self.colors[i].astype(np.float64), 0.0, 1.0),
            mean=self.means[i],
            rotation=self.rotations[i],
            scale=self.scales[i],
            opacity=float(np.clip(self.opacities[i], 0.0, 1.0)),
            lifespan=float(self.lifespans[i]),
            birth_time=float(self.birth_times[i]),
        )

    def take(self, indices: np.ndarray) -> "GaussianSet":
        """Subset by index array, preserving order."""
        idx = np.asarray(indices)
        return GaussianSet(
            colors=self.colors[idx],
            means=self.means[idx],
            rotations=self.rotations[idx],
            scales=self.scales[idx],
            opacities=self.opacities[idx],
            lifespans=self.lifespans[idx],
            birth_times=self.birth_times[idx],
        )

    def replace(self, **arrays: np.ndarray) -> "GaussianSet":
        return replace(self, **arrays)

    def channels(self) -> np.ndarray:
        """Interleaved (N, 15) float32 payload in the canonical channel order."""
        out = np.empty((len(self), CHANNELS), dtype=np.float32)
        out[:, 0:3] = self.colors
        out[:, 3:6] = self.means
        out[:, 6:10] = self.rotations
        out[:, 10:13] = self.scales
        out[:, 13] = self.opacities
        out[:, 14] = self.lifespans
        return out

    @classmethod
    def from_channels(cls, channels: np.ndarray, birth_times: np.ndarray) -> "GaussianSet":
        ch = np.asarray(channels, dtype=np.float32)
        if ch.ndim != 2 or ch.shape[1] != CHANNELS:
            raise ValueError(f"expected (N, {CHANNELS}) channel array, got {ch.shape}")
        return cls(
            colors=ch[:, 0:3],
            means=ch[:, 3:6],
            rotations=ch[:, 6:10],
            scales=ch[:, 10:13],
            opacities=ch[:, 13],
            lifespans=ch[:, 14],
            birth_times=np.asarray(birth_times, dtype=np.float64),
        )

    @classmethod
    def empty(cls) -> "GaussianSet":
        return cls(
            colors=np.zeros((0, 3), np.float32),
            means=np.zeros((0, 3), np.float32),
            rotations=np.zeros((0, 4), np.float32),
            scales=np.zeros((0, 3), np.float32),
            opacities=np.zeros(0, np.float32),
            lifespans=np.zeros(0, np.float32),
            birth_times=np.zeros(0, np.float64),
        )

    @classmethod
    def concat(cls, sets: Sequence["GaussianSet"]) -> "GaussianSet":
        if not sets:
            return cls.empty()
        return cls(
            colors=np.concatenate([s.colors for s in sets]),
            means=np.concatenate([s.means for s in sets]),
            rotations=np.concatenate([s.rotations for s in sets]),
            scales=np.concatenate([s.scales for s in sets]),
            opacities=np.concatenate([s.opacities for s in sets]),
            lifespans=np.concatenate([s.lifespans for s in sets]),
            birth_times=np.concatenate([s.birth_times for s in sets]),
        )


@dataclass(frozen=True)
class DynamicMask:
    """Soft per-pixel dynamic probability with its binarization threshold."""

    width: int
    height: int
    values: np.ndarray            # (H, W) float32 in [0, 1]
    threshold: float = 0.5

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float32)
        object.__setattr__(self, "values", _frozen(np.ascontiguousarray(v)))

    def binarize(self) -> np.ndarray:
        """Boolean (H, W): dynamic where value >= threshold (inclusive)."""
        return self.values >= self.threshold


def binarize_mask(mask: DynamicMask) -> np.ndarray:
    return mask.binarize()


@dataclass(frozen=True)
class GaussianMap:
    """Dense pixel-aligned Gaussian map for one input frame.

    gaussians holds width*height Gaussians in row-major pixel order; pixel
    (i, j) maps to index i * width + j.  instance_ids labels dynamic objects
    (0 = unlabeled / background).
    """

    width: int
    height: int
    timestamp: float
    gaussians: GaussianSet
    instance_ids: np.ndarray | None = None   # (H*W,) uint32

    def __post_init__(self):
        ids = self.instance_ids
        if ids is None:
            ids = np.zeros(self.width * self.height, dtype=np.uint32)
        ids = np.asarray(ids, dtype=np.uint32)
        object.__setattr__(self, "instance_ids", _frozen(np.ascontiguousarray(ids)))

    def pixel_index(self, i: int, j: int) -> int:
        return i * self.width + j

    def gaussian_at(self, i: int, j: int) -> Gaussian:
        return self.gaussians[self.pixel_index(i, j)]


@dataclass(frozen=True)
class CameraPose:
    """Pinhole camera: intrinsics plus a camera-to-world rigid transform."""

    fx: float
    fy: float
    cx: float
    cy: float
    rotation: np.ndarray      # (4,) unit quaternion wxyz, camera-to-world
    translation: np.ndarray   # (3,) camera origin in world
    timestamp: float = 0.0

    def __post_init__(self):
        for name in ("fx", "fy", "cx", "cy"):
            v = float(getattr(self, name))
            if not math.isfinite(v) or (name in ("fx", "fy") and v <= 0.0):
                raise ValueError(f"{name} must be positive finite, got {v}")
        object.__setattr__(self, "rotation", _frozen(normalize_quaternion(self.rotation)))
        t = np.asarray(self.translation, dtype=np.float64)
        if t.shape != (3,) or not np.all(np.isfinite(t)):
            raise ValueError("translation must be 3 finite components")
        object.__setattr__(self, "translation", _frozen(t))

    def rotation_matrix(self) -> np.ndarray:
        """Camera-to-world rotation matrix."""
        return quaternion_to_matrix(self.rotation)

    def world_to_camera(self, points: np.ndarray) -> np.ndarray:
        """Transform (N, 3) world points into the camera frame (+z forward)."""
        p = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return (p - self.translation) @ self.rotation_matrix()

    def pixel_from_camera(self, cam_points: np.ndarray) -> np.ndarray:
        """Pinhole projection of (N, 3) camera-frame points to (N, 2) (u, v).

        This is the single projection routine shared by the rasterizer and the
        sky colorizer.  Callers must cull points with non-positive depth first;
        no division guard is applied here.
        """
        p = np.atleast_2d(np.asarray(cam_points, dtype=np.float64))
        z = p[:, 2]
        uv = np.empty((len(p), 2), dtype=np.float64)
        uv[:, 0] = self.fx * p[:, 0] / z + self.cx
        uv[:, 1] = self.fy * p[:, 1] / z + self.cy
        return uv

    def project(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """World points -> ((N, 2) pixel coords, (N,) camera depth)."""
        cam = self.world_to_camera(points)
        return self.pixel_from_camera(cam), cam[:, 2]

    def is_identity(self, tol: float = 1e-6) -> bool:
        return bool(
            abs(abs(float(self.rotation[0])) - 1.0) <= tol
            and np.all(np.abs(self.translation) <= tol)
        )


def identity_pose(fx: float, fy: float, cx: float, cy: float, timestamp: float = 0.0) -> CameraPose:
    return CameraPose(
        fx=fx, fy=fy, cx=cx, cy=cy,
        rotation=np.array([1.0, 0.0, 0.0, 0.0]),
        translation=np.zeros(3),
        timestamp=timestamp,
    )


@dataclass(frozen=True)
class InstanceKeyframe:
    """One timestamped Gaussian snapshot of an inserted instance."""

    timestamp: float
    gaussians: GaussianSet


@dataclass(frozen=True)
class InsertedInstance:
    """A dynamic object grafted into a sequence by an edit.

    Inserted instances keep their own keyframe timeline and motion
    displacements; motion keys (t_a, t_b) index consecutive keyframes and each
    displacement array aligns with the keyframe-a Gaussian order.
    """

    instance_id: int
    keyframes: tuple[InstanceKeyframe, ...]
    motion: Mapping[tuple[float, float], np.ndarray] = field(default_factory=dict)

    def timestamps(self) -> tuple[float, ...]:
        return tuple(k.timestamp for k in self.keyframes)


@dataclass(frozen=True)
class Frame:
    """One input frame: Gaussian map, dynamic mask, camera pose.

    dropped flags pixels whose dynamic Gaussians were removed by an edit; it
    never affects static content.
    """

    map: GaussianMap
    mask: DynamicMask
    pose: CameraPose
    dropped: np.ndarray | None = None     # (H*W,) bool

    def __post_init__(self):
        d = self.dropped
        if d is None:
            d = np.zeros(self.map.width * self.map.height, dtype=bool)
        d = np.asarray(d, dtype=bool)
        object.__setattr__(self, "dropped", _frozen(np.ascontiguousarray(d)))

    @property
    def timestamp(self) -> float:
        return self.map.timestamp


@dataclass(frozen=True)
class SceneSequence:
    """A full 4D scene: frames ordered by strictly increasing timestamp."""

    frames: tuple[Frame, ...]
    sky: "SkyDome | None" = None
    motion_fields: Mapping[tuple[float, float], "MotionField"] = field(default_factory=dict)
    inserted: tuple[InsertedInstance, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))
        object.__setattr__(self, "inserted", tuple(self.inserted))
        object.__setattr__(self, "motion_fields", dict(self.motion_fields))

    @property
    def timestamps(self) -> tuple[float, ...]:
        return tuple(f.timestamp for f in self.frames)

    @property
    def span(self) -> tuple[float, float]:
        ts = self.timestamps
        return (ts[0], ts[-1])

    def frame_index_at(self, t: float, tol: float = TIME_MATCH_TOL) -> int | None:
        """Index of the frame whose timestamp matches t, else None."""
        for i, ft in enumerate(self.timestamps):
            if abs(ft - t) <= tol:
                return i
        return None

    def bracket(self, t: float) -> tuple[int, int]:
        """Adjacent frame indices (a, a+1) with t_a < t < t_b.

        Precondition: t strictly inside the span and not at a keyframe.
        """
        ts = self.timestamps
        for i in range(len(ts) - 1):
            if ts[i] < t < ts[i + 1]:
                return i, i + 1
        raise ValueError(f"time {t} does not fall between two frames of {ts}")


@dataclass(frozen=True)
class Violation:
    """One validation finding; validate_sequence reports these, never raises."""

    frame_index: int | None
    field: str
    rule: str
    detail: str = ""

    def __str__(self) -> str:
        where = "sequence" if self.frame_index is None else f"frame {self.frame_index}"
        msg = f"{where}: {self.field}: {self.rule}"
        return f"{msg} ({self.detail})" if self.detail else msg


def _check_gaussian_arrays(
    out: list[Violation],
    frame_index: int | None,
    prefix: str,
    gs: GaussianSet,
    expected_birth: float | None,
) -> None:
    def bad(field: str, rule: str, detail: str = ""):
        out.append(Violation(frame_index, f"{prefix}{field}", rule, detail))

    arrays = {
        "colors": gs.colors, "means": gs.means, "rotations": gs.rotations,
        "scales": gs.scales, "opacities": gs.opacities, "lifespans": gs.lifespans,
        "birth_times": gs.birth_times,
    }
    for name, a in arrays.items():
        n_bad = int(np.size(a) - np.count_nonzero(np.isfinite(a)))
        if n_bad:
            bad(name, "non-finite values", f"{n_bad} entries")
    with np.errstate(invalid="ignore"):
        if np.any((gs.colors < 0) | (gs.colors > 1)):
            bad("colors", "out of [0, 1]")
        if np.any(~(gs.scales > 0)):
            bad("scales", "must be > 0")
        if np.any((gs.opacities < 0) | (gs.opacities > 1)):
            bad("opacities", "out of [0, 1]")
        if np.any(~(gs.lifespans > 0)):
            bad("lifespans", "must be > 0")
        norms = np.linalg.norm(gs.rotations.astype(np.float64), axis=1)
        if np.any(np.abs(norms - 1.0) > QUAT_NORM_TOL):
            worst = float(np.nanmax(np.abs(norms - 1.0))) if len(norms) else 0.0
            bad("rotations", "not unit quaternions", f"max |norm-1| = {worst:.3g}")
        if expected_birth is not None and np.any(gs.birth_times != expected_birth):
            bad("birth_times", "must equal the frame timestamp")


def validate_sequence(seq: SceneSequence) -> list[Violation]:
    """Structural and numeric validation of a whole sequence.

    Returns all violations found (empty list means valid).  Malformed data is
    reported, never raised, so load-then-inspect flows can surface every
    problem at once.
    """
    out: list[Violation] = []
    if not seq.frames:
        out.append(Violation(None, "frames", "sequence has no frames"))
        return out

    ts = np.array(seq.timestamps)
    if np.any(~np.isfinite(ts)):
        out.append(Violation(None, "timestamps", "non-finite timestamps"))
    elif np.any(np.diff(ts) <= 0):
        out.append(Violation(None, "timestamps", "not strictly increasing", f"{ts.tolist()}"))

    if not seq.frames[0].pose.is_identity():
        out.append(Violation(0, "pose", "first frame pose must be identity at the origin"))

    for i, fr in enumerate(seq.frames):
        m, mask, pose = fr.map, fr.mask, fr.pose
        npix = m.width * m.height
        if m.width <= 0 or m.height <= 0:
            out.append(Violation(i, "map", "non-positive dimensions", f"{m.width}x{m.height}"))
            continue
        if len(m.gaussians) != npix:
            out.append(Violation(i, "map.gaussians", "length must be width*height",
                                 f"{len(m.gaussians)} != {npix}"))
        if m.instance_ids.shape != (npix,):
            out.append(Violation(i, "map.instance_ids", "shape must be (width*height,)"))
        if fr.dropped.shape != (npix,):
            out.append(Violation(i, "dropped", "shape must be (width*height,)"))
        if (mask.width, mask.height) != (m.width, m.height) or mask.values.shape != (m.height, m.width):
            out.append(Violation(i, "mask", "dimensions must match the map"))
        with np.errstate(invalid="ignore"):
            if np.any(~np.isfinite(mask.values)) or np.any((mask.values < 0) | (mask.values > 1)):
                out.append(Violation(i, "mask.values", "must be finite in [0, 1]"))
        if not (0.0 < mask.threshold < 1.0):
            out.append(Violation(i, "mask.threshold", "must lie in (0, 1)", str(mask.threshold)))
        if not (np.isfinite(pose.fx) and np.isfinite(pose.fy) and pose.fx > 0 and pose.fy > 0):
            out.append(Violation(i, "pose", "focal lengths must be positive finite"))
        if abs(pose.timestamp - m.timestamp) > TIME_MATCH_TOL:
            out.append(Violation(i, "pose.timestamp", "must match the map timestamp"))
        if len(m.gaussians) == npix:
            _check_gaussian_arrays(out, i, "map.gaussians.", m.gaussians, m.timestamp)

    timestamps = set(seq.timestamps)
    for key, fld in seq.motion_fields.items():
        ta, tb = key
        name = f"motion_fields[{ta}, {tb}]"
        if not (ta < tb):
            out.append(Violation(None, name, "key must satisfy t_a < t_b"))
        if ta not in timestamps or tb not in timestamps:
            out.append(Violation(None, name, "endpoints must be frame timestamps"))
            continue
        if (fld.t_a, fld.t_b) != (ta, tb):
            out.append(Violation(None, name, "field endpoints disagree with the key"))
        ia = seq.frame_index_at(ta)
        fr = seq.frames[ia]
        h, w = fr.map.height, fr.map.width
        q = np.asarray(fld.queries)
        d = np.asarray(fld.displacements)
        if q.ndim != 2 or q.shape[1] != 2:
            out.append(Violation(None, name, "queries must be (Q, 2) pixel coordinates"))
            continue
        if d.shape != (len(q), 3):
            out.append(Violation(None, name, "displacements must align with queries",
                                 f"{d.shape} vs {len(q)} queries"))
            continue
        if np.any(~np.isfinite(d)):
            out.append(Violation(None, name, "non-finite displacements"))
        if np.any((q[:, 0] < 0) | (q[:, 0] >= h) | (q[:, 1] < 0) | (q[:, 1] >= w)):
            out.append(Violation(None, name, "queries out of the frame bounds"))
            continue
        flat = q[:, 0] * w + q[:, 1]
        if len(np.unique(flat)) != len(flat):
            out.append(Violation(None, name, "duplicate query pixels"))
        dyn = fr.mask.binarize().reshape(-1)
        if np.any(~dyn[flat]):
            out.append(Violation(None, name, "queries must hit dynamic pixels"))
        if np.any(fr.dropped[flat]):
            out.append(Violation(None, name, "queries must not hit dropped pixels"))

    if seq.sky is not None:
        sky = seq.sky
        if not (sky.radius > 0):
            out.append(Violation(None, "sky.radius", "must be > 0"))
        g = sky.gaussians
        if len(g):
            _check_gaussian_arrays(out, None, "sky.gaussians.", g, None)
            if np.any(g.means[:, 2] < -1e-6):
                out.append(Violation(None, "sky.gaussians.means", "up-axis component must be >= 0"))
            if len(np.unique(g.opacities)) > 1:
                out.append(Violation(None, "sky.gaussians.opacities", "must share one fixed value"))
            if np.any(g.rotations != g.rotations[0]):
                out.append(Violation(None, "sky.gaussians.rotations", "must share one fixed rotation"))

    seen_ids: set[int] = set()
    for inst in seq.inserted:
        name = f"inserted[{inst.instance_id}]"
        if inst.instance_id <= 0:
            out.append(Violation(None, name, "instance_id must be positive"))
        if inst.instance_id in seen_ids:
            out.append(Violation(None, name, "duplicate inserted instance_id"))
        seen_ids.add(inst.instance_id)
        kts = inst.timestamps()
        if len(kts) == 0:
            out.append(Violation(None, name, "no keyframes"))
            continue
        if np.any(np.diff(kts) <= 0):
            out.append(Violation(None, name, "keyframe timestamps not strictly increasing"))
        for kf in inst.keyframes:
            _check_gaussian_arrays(out, None, f"{name}.", kf.gaussians, kf.timestamp)
        counts = {k.timestamp: len(k.gaussians) for k in inst.keyframes}
        for (ta, tb), disp in inst.motion.items():
            if ta not in counts or tb not in counts or not ta < tb:
                out.append(Violation(None, f"{name}.motion[{ta}, {tb}]",
                                     "endpoints must be keyframe timestamps with t_a < t_b"))
                continue
            if np.asarray(disp).shape != (counts[ta], 3):
                out.append(Violation(None, f"{name}.motion[{ta}, {tb}]",
                                     "displacements must align with the t_a keyframe"))
    return out
