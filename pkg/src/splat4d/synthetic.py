"""Build small, fully known scenes from a plain-text description.

These scenes are the test bed for everything downstream: geometry is placed
by ray casting, box motion is exactly linear (so motion fields are exact by
construction), masks and instance ids come straight from the hit objects, and
the camera trajectory starts at the world origin with identity rotation.

Grammar (one directive per line, `#` comments):

    scene  width=.. height=.. frames=.. dt=..  [mask_threshold=0.5]
    camera fx=.. fy=.. cx=.. cy=..  [velocity=x,y,z]  [yaw_rate=deg_per_s]
    sky    [radius=1000] [count=512] [seed=0]
    ground axis=y offset=1.5 color=r,g,b
    box    center=x,y,z size=sx,sy,sz color=r,g,b
           [velocity=x,y,z] [instance=K] [name=..]

A box with non-zero velocity is dynamic; its pixels get mask value 1 and an
instance id (explicit or auto-assigned).  Static boxes may still carry an
explicit instance id (a parked car).  Pixels that hit nothing receive an
invisible placeholder Gaussian and mask value 0; the sky dome provides the
background instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .manifest import Directive, ManifestError, parse_manifest
from .motion import MotionField
from .scene_model import (
    CameraPose,
    DynamicMask,
    Frame,
    GaussianMap,
    GaussianSet,
    SceneSequence,
)
from .sky import SkyDome, build_sky

STATIC_LIFESPAN = 1.0e4   # seconds^2: background persists across a sequence
DYNAMIC_LIFESPAN = 1.0
SURFACE_OPACITY = 0.95
MISS_DISTANCE = 600.0     # placeholder depth for rays that hit nothing


@dataclass
class _Box:
    center: np.ndarray
    half: np.ndarray
    color: np.ndarray
    velocity: np.ndarray
    instance: int
    name: str

    @property
    def dynamic(self) -> bool:
        return bool(np.any(self.velocity != 0.0))


@dataclass
class _Plane:
    axis: int
    offset: float
    color: np.ndarray


@dataclass
class _SceneSpec:
    width: int
    height: int
    n_frames: int
    dt: float
    mask_threshold: float
    fx: float
    fy: float
    cx: float
    cy: float
    cam_velocity: np.ndarray
    yaw_rate: float
    sky_radius: float
    sky_count: int
    sky_seed: int
    boxes: list[_Box] = field(default_factory=list)
    planes: list[_Plane] = field(default_factory=list)


_AXES = {"x": 0, "y": 1, "z": 2}


def _parse_spec(text: str) -> _SceneSpec:
    scene_d = camera_d = None
    sky_d: Directive | None = None
    boxes: list[_Box] = []
    planes: list[_Plane] = []
    used_ids: set[int] = set()

    for d in parse_manifest(text):
        if d.name == "scene":
            if scene_d is not None:
                raise ManifestError("duplicate scene directive", d.line)
            scene_d = d
        elif d.name == "camera":
            if camera_d is not None:
                raise ManifestError("duplicate camera directive", d.line)
            camera_d = d
        elif d.name == "sky":
            if sky_d is not None:
                raise ManifestError("duplicate sky directive", d.line)
            sky_d = d
        elif d.name == "ground":
            axis = d.get_str("axis")
            if axis not in _AXES:
                raise ManifestError(f"axis must be x, y, or z, got {axis!r}", d.line)
            planes.append(_Plane(
                axis=_AXES[axis],
                offset=d.get_float("offset"),
                color=np.array(d.get_vec("color", 3)),
            ))
        elif d.name == "box":
            size = np.array(d.get_vec("size", 3))
            if np.any(size <= 0):
                raise ManifestError("box size must be positive", d.line)
            vel = np.array(d.get_vec("velocity", 3, default=(0.0, 0.0, 0.0)))
            inst = d.get_int("instance", 0)
            if inst < 0:
                raise ManifestError("instance id must be positive", d.line)
            if inst and inst in used_ids:
                raise ManifestError(f"instance id {inst} already used", d.line)
            if inst:
                used_ids.add(inst)
            boxes.append(_Box(
                center=np.array(d.get_vec("center", 3)),
                half=size / 2.0,
                color=np.clip(np.array(d.get_vec("color", 3)), 0.0, 1.0),
                velocity=vel,
                instance=inst,
                name=d.get_str("name", ""),
            ))
        else:
            raise ManifestError(f"unknown directive {d.name!r}", d.line)

    if scene_d is None:
        raise ManifestError("missing scene directive", 1)
    if camera_d is None:
        raise ManifestError("missing camera directive", 1)

    # dynamic boxes without an explicit id get the next free one
    next_id = max(used_ids, default=0) + 1
    for b in boxes:
        if b.dynamic and b.instance == 0:
            b.instance = next_id
            used_ids.add(next_id)
            next_id += 1

    width = scene_d.get_int("width")
    height = scene_d.get_int("height")
    n_frames = scene_d.get_int("frames")
    dt = scene_d.get_float("dt")
    if width < 1 or height < 1 or n_frames < 1:
        raise ManifestError("scene dimensions and frame count must be >= 1", scene_d.line)
    if dt <= 0:
        raise ManifestError("dt must be > 0", scene_d.line)

    sky_d = sky_d or Directive("sky", {}, 1)
    return _SceneSpec(
        width=width, height=height, n_frames=n_frames, dt=dt,
        mask_threshold=scene_d.get_float("mask_threshold", 0.5),
        fx=camera_d.get_float("fx"), fy=camera_d.get_float("fy"),
        cx=camera_d.get_float("cx"), cy=camera_d.get_float("cy"),
        cam_velocity=np.array(camera_d.get_vec("velocity", 3, default=(0.0, 0.0, 0.0))),
        yaw_rate=camera_d.get_float("yaw_rate", 0.0),
        sky_radius=sky_d.get_float("radius", 1000.0),
        sky_count=sky_d.get_int("count", 512),
        sky_seed=sky_d.get_int("seed", 0),
        boxes=boxes, planes=planes,
    )


def _camera_at(spec: _SceneSpec, t: float) -> CameraPose:
    half = math.radians(spec.yaw_rate) * t / 2.0
    return CameraPose(
        fx=spec.fx, fy=spec.fy, cx=spec.cx, cy=spec.cy,
        rotation=np.array([math.cos(half), 0.0, math.sin(half), 0.0]),  # yaw about +y
        translation=spec.cam_velocity * t,
        timestamp=t,
    )


def _ray_box(orig: np.ndarray, dirs: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Slab intersection: (N,) entry parameter, inf where the ray misses."""
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = (lo - orig) / dirs
        t2 = (hi - orig) / dirs
    near = np.nanmax(np.minimum(t1, t2), axis=1)
    far = np.nanmin(np.maximum(t1, t2), axis=1)
    hit = (far >= near) & (far > 0)
    entry = np.where(near > 0, near, far)     # inside the box: exit point
    return np.where(hit, entry, np.inf)


def _ray_plane(orig: np.ndarray, dirs: np.ndarray, axis: int, offset: float) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (offset - orig[axis]) / dirs[:, axis]
    return np.where(np.isfinite(t) & (t > 0), t, np.inf)


def _build_frame(spec: _SceneSpec, t: float):
    """Ray cast one frame; returns (Frame arrays, per-pixel velocity)."""
    w, h = spec.width, spec.height
    pose = _camera_at(spec, t)
    jj, ii = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    dirs_cam = np.stack(
        [(jj.ravel() - spec.cx) / spec.fx, (ii.ravel() - spec.cy) / spec.fy, np.ones(w * h)],
        axis=1,
    )
    # dirs keep z = 1 in the camera frame, so the ray parameter is camera depth
    dirs = dirs_cam @ pose.rotation_matrix().T
    orig = pose.translation

    npix = w * h
    best = np.full(npix, np.inf)
    color = np.zeros((npix, 3))
    instance = np.zeros(npix, dtype=np.uint32)
    velocity = np.zeros((npix, 3))
    dynamic = np.zeros(npix, dtype=bool)
    lifespan = np.full(npix, STATIC_LIFESPAN)

    for pl in spec.planes:
        s = _ray_plane(orig, dirs, pl.axis, pl.offset)
        closer = s < best
        best[closer] = s[closer]
        color[closer] = pl.color
        instance[closer] = 0
        velocity[closer] = 0.0
        dynamic[closer] = False
        lifespan[closer] = STATIC_LIFESPAN

    for b in spec.boxes:
        c = b.center + b.velocity * t
        s = _ray_box(orig, dirs, c - b.half, c + b.half)
        closer = s < best
        best[closer] = s[closer]
        color[closer] = b.color
        instance[closer] = b.instance
        velocity[closer] = b.velocity
        dynamic[closer] = b.dynamic
        lifespan[closer] = DYNAMIC_LIFESPAN if b.dynamic else STATIC_LIFESPAN

    hit = np.isfinite(best)
    depth = np.where(hit, best, MISS_DISTANCE)
    means = orig + dirs * depth[:, None]
    # splat radius tracks the pixel footprint at the hit distance
    scales = np.repeat((depth / spec.fx)[:, None], 3, axis=1)

    gaussians = GaussianSet(
        colors=color.astype(np.float32),
        means=means.astype(np.float32),
        rotations=np.tile(np.array([1, 0, 0, 0], np.float32), (npix, 1)),
        scales=scales.astype(np.float32),
        opacities=np.where(hit, SURFACE_OPACITY, 0.0).astype(np.float32),
        lifespans=lifespan.astype(np.float32),
        birth_times=np.full(npix, t),
    )
    gmap = GaussianMap(width=w, height=h, timestamp=t, gaussians=gaussians,
                       instance_ids=instance)
    mask = DynamicMask(
        width=w, height=h,
        values=dynamic.astype(np.float32).reshape(h, w),
        threshold=spec.mask_threshold,
    )
    return Frame(map=gmap, mask=mask, pose=pose), velocity, dynamic


def _procedural_sky(spec: _SceneSpec) -> SkyDome:
    dome = build_sky(radius=spec.sky_radius, count=spec.sky_count, seed=spec.sky_seed)
    if len(dome.gaussians) == 0:
        return dome
    elev = dome.gaussians.means[:, 2].astype(np.float64) / spec.sky_radius
    horizon = np.array([0.66, 0.72, 0.80])
    zenith = np.array([0.32, 0.47, 0.82])
    colors = horizon[None, :] + elev[:, None] * (zenith - horizon)[None, :]
    return replace(dome, gaussians=dome.gaussians.replace(colors=colors.astype(np.float32)))


def import_synthetic(text: str) -> SceneSequence:
    """Parse a scene description and build the full sequence: frames, masks,
    instance planes, exact motion fields between adjacent frames, and a
    procedurally colored sky dome."""
    spec = _parse_spec(text)
    frames = []
    velocities = []
    dyn_flags = []
    for k in range(spec.n_frames):
        fr, vel, dyn = _build_frame(spec, k * spec.dt)
        frames.append(fr)
        velocities.append(vel)
        dyn_flags.append(dyn)

    motion: dict[tuple[float, float], MotionField] = {}
    for k in range(spec.n_frames - 1):
        ta, tb = frames[k].timestamp, frames[k + 1].timestamp
        pix = np.nonzero(dyn_flags[k])[0]
        queries = np.stack([pix // spec.width, pix % spec.width], axis=1)
        disp = velocities[k][pix] * (tb - ta)
        motion[(ta, tb)] = MotionField(
            t_a=ta, t_b=tb, queries=queries, displacements=disp.astype(np.float32)
        )

    return SceneSequence(
        frames=tuple(frames),
        sky=_procedural_sky(spec),
        motion_fields=motion,
    )
