"""Shared builders for randomized but structurally valid test scenes."""

from __future__ import annotations

import numpy as np
import pytest

from splat4d import (
    CameraPose,
    DynamicMask,
    Frame,
    GaussianMap,
    GaussianSet,
    MotionField,
    Provenance,
    ComposedScene,
    SceneSequence,
    build_sky,
    identity_pose,
    normalize_quaternion,
)
from splat4d.temporal import TAG_STATIC


def random_quaternions(rng: np.random.Generator, n: int) -> np.ndarray:
    q = rng.normal(size=(n, 4))
    return (q / np.linalg.norm(q, axis=1, keepdims=True)).astype(np.float32)


def random_gaussian_set(
    rng: np.random.Generator,
    n: int,
    birth_time: float = 0.0,
    center=(0.0, 0.0, 10.0),
    spread: float = 4.0,
    scale_range=(0.05, 0.8),
    lifespan_range=(0.5, 50.0),
) -> GaussianSet:
    return GaussianSet(
        colors=rng.random((n, 3)).astype(np.float32),
        means=(np.asarray(center) + rng.normal(scale=spread, size=(n, 3))).astype(np.float32),
        rotations=random_quaternions(rng, n),
        scales=rng.uniform(*scale_range, size=(n, 3)).astype(np.float32),
        opacities=rng.uniform(0.2, 1.0, size=n).astype(np.float32),
        lifespans=rng.uniform(*lifespan_range, size=n).astype(np.float32),
        birth_times=np.full(n, birth_time, dtype=np.float64),
    )


def random_composed(
    rng: np.random.Generator, n: int, query_time: float = 0.0, **kwargs
) -> ComposedScene:
    """A bare composed scene for renderer tests; provenance is synthetic."""
    gs = random_gaussian_set(rng, n, birth_time=query_time, **kwargs)
    prov = Provenance(
        tags=np.full(n, TAG_STATIC, dtype=np.uint8),
        source_timestamps=np.full(n, query_time, dtype=np.float64),
        source_indices=np.arange(n, dtype=np.int64),
        instance_ids=np.zeros(n, dtype=np.uint32),
    )
    return ComposedScene(query_time=query_time, gaussians=gs, provenance=prov)


def random_map(
    rng: np.random.Generator,
    width: int,
    height: int,
    timestamp: float,
    n_instances: int = 2,
    threshold: float = 0.5,
) -> tuple[GaussianMap, DynamicMask]:
    """A map whose mask marks a few rectangular instance patches as dynamic."""
    n = width * height
    gs = random_gaussian_set(rng, n, birth_time=timestamp)
    values = rng.uniform(0.0, threshold * 0.98, size=(height, width)).astype(np.float32)
    ids = np.zeros((height, width), dtype=np.uint32)
    for k in range(n_instances):
        i0 = int(rng.integers(0, max(1, height - 2)))
        j0 = int(rng.integers(0, max(1, width - 2)))
        i1 = min(height, i0 + int(rng.integers(1, 3)))
        j1 = min(width, j0 + int(rng.integers(1, 3)))
        values[i0:i1, j0:j1] = rng.uniform(threshold, 1.0)
        ids[i0:i1, j0:j1] = k + 1
    ids[values < threshold] = 0
    gmap = GaussianMap(width=width, height=height, timestamp=timestamp,
                       gaussians=gs, instance_ids=ids.reshape(-1))
    mask = DynamicMask(width=width, height=height, values=values, threshold=threshold)
    return gmap, mask


def random_pose(
    rng: np.random.Generator, width: int, height: int, timestamp: float, k: int
) -> CameraPose:
    if k == 0:
        return identity_pose(fx=1.5 * width, fy=1.5 * width,
                             cx=width / 2.0, cy=height / 2.0, timestamp=timestamp)
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    half = 0.5 * rng.uniform(0.0, 0.15)
    quat = np.concatenate([[np.cos(half)], np.sin(half) * axis])
    return CameraPose(
        fx=1.5 * width, fy=1.5 * width, cx=width / 2.0, cy=height / 2.0,
        rotation=normalize_quaternion(quat),
        translation=rng.normal(scale=0.4, size=3) + np.array([0, 0, 0.5 * k]),
        timestamp=timestamp,
    )


def random_sequence(
    rng: np.random.Generator,
    n_frames: int = 3,
    width: int = 6,
    height: int = 5,
    dt: float = 0.5,
    with_sky: bool = True,
    sky_count: int = 16,
) -> SceneSequence:
    """Valid random sequence: per-frame maps/masks/poses plus exact-cover
    motion fields between adjacent frames."""
    frames = []
    for k in range(n_frames):
        t = k * dt
        gmap, mask = random_map(rng, width, height, t)
        frames.append(Frame(map=gmap, mask=mask,
                            pose=random_pose(rng, width, height, t, k)))

    motion = {}
    for k in range(n_frames - 1):
        a, b = frames[k], frames[k + 1]
        flat = np.nonzero(a.mask.binarize().reshape(-1))[0]
        queries = np.stack([flat // width, flat % width], axis=1).astype(np.int64)
        motion[(a.timestamp, b.timestamp)] = MotionField(
            t_a=a.timestamp, t_b=b.timestamp, queries=queries,
            displacements=rng.normal(scale=0.5, size=(len(flat), 3)).astype(np.float32),
        )

    sky = None
    if with_sky:
        sky = build_sky(radius=200.0, count=sky_count, seed=int(rng.integers(1 << 31)))
    return SceneSequence(frames=tuple(frames), sky=sky, motion_fields=motion)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20260822)


SYNTH_SPEC = """
scene width=24 height=18 frames=3 dt=0.5
camera fx=30 fy=30 cx=12 cy=9 velocity=0,0,2
sky radius=500 count=64 seed=7
ground axis=y offset=2 color=0.35,0.33,0.30
box center=0,-1,12 size=2,2,2 color=0.8,0.2,0.2
box center=-3,0,10 size=1.5,1.5,3 color=0.2,0.4,0.9 velocity=1.5,0,0 instance=5
"""


@pytest.fixture
def synth_sequence():
    from splat4d import import_synthetic

    return import_synthetic(SYNTH_SPEC)
