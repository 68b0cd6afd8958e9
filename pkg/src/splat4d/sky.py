"""Sky dome: a fixed hemisphere of far Gaussians standing in for the sky.

The dome is centered on the world origin (the first camera), up axis +z, and
is sampled uniformly by surface area so coverage has no pole clustering.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .scene_model import CameraPose, GaussianSet

DEFAULT_RADIUS = 1000.0          # meters
DEFAULT_COUNT = 4096
DEFAULT_COLOR = (0.5, 0.6, 0.8)  # fallback for dome points no camera sees
SKY_LIFESPAN = 1.0e6             # seconds^2; sky never fades over a sequence
SKY_OPACITY = 0.95


@dataclass(frozen=True)
class SkyDome:
    """Sky Gaussians on a hemisphere of fixed radius.

    All rotations are identity and all opacities share one fixed value; only
    the colors vary (assigned by colorize_sky).
    """

    radius: float
    gaussians: GaussianSet

    def __len__(self) -> int:
        return len(self.gaussians)

    @classmethod
    def empty(cls, radius: float = DEFAULT_RADIUS) -> "SkyDome":
        return cls(radius=radius, gaussians=GaussianSet.empty())


def build_sky(
    radius: float = DEFAULT_RADIUS,
    count: int = DEFAULT_COUNT,
    seed: int = 0,
    opacity: float = SKY_OPACITY,
) -> SkyDome:
    """Sample a sky dome of `count` Gaussians on the upper hemisphere.

    Sampling is uniform by surface area: for a sphere, surface area between
    two heights depends only on the height difference, so drawing z uniformly
    on [0, radius] (and azimuth uniformly) is exact.  Consequently the mean
    height of the samples is radius / 2.

    Each Gaussian gets an isotropic scale of radius * pi / sqrt(count), wide
    enough that neighbouring splats overlap and the dome renders gapless.

    Args:
        radius: hemisphere radius in meters, > 0.
        count: number of Gaussians, >= 0.
        seed: RNG seed; the same seed always yields the same dome.
        opacity: fixed opacity shared by every sky Gaussian.

    Raises:
        ValueError: non-positive radius or negative count.
    """
    if not radius > 0:
        raise ValueError(f"radius must be > 0, got {radius}")
    if count < 0:
        raise ValueError(f"count must be >= 0, got {count}")

    rng = np.random.default_rng(seed)
    z = radius * rng.random(count)
    phi = 2.0 * np.pi * rng.random(count)
    rho = np.sqrt(np.maximum(radius * radius - z * z, 0.0))
    means = np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)

    scale = radius * np.pi / np.sqrt(count) if count else 1.0
    quats = np.zeros((count, 4), dtype=np.float32)
    quats[:, 0] = 1.0
    gaussians = GaussianSet(
        colors=np.tile(np.asarray(DEFAULT_COLOR, np.float32), (count, 1)),
        means=means.astype(np.float32),
        rotations=quats,
        scales=np.full((count, 3), scale, dtype=np.float32),
        opacities=np.full(count, opacity, dtype=np.float32),
        lifespans=np.full(count, SKY_LIFESPAN, dtype=np.float32),
        birth_times=np.zeros(count, dtype=np.float64),
    )
    return SkyDome(radius=float(radius), gaussians=gaussians)


def colorize_sky(
    dome: SkyDome,
    images: Sequence[np.ndarray],
    poses: Sequence[CameraPose],
) -> SkyDome:
    """Assign each sky Gaussian the color of the first image that sees it.

    A dome point is seen by a camera when it lies in front of it (positive
    camera-space depth) and its projection lands inside the image after
    rounding to the nearest pixel.  Projection goes through the same pinhole
    routine the rasterizer uses, so sky placement and rendering agree exactly.
    Points no camera sees keep the default sky color.

    Returns a new dome; the input is left untouched.
    """
    if len(images) != len(poses):
        raise ValueError("images and poses must pair up")
    n = len(dome.gaussians)
    colors = np.tile(np.asarray(DEFAULT_COLOR, np.float32), (n, 1))
    unset = np.ones(n, dtype=bool)
    means = dome.gaussians.means.astype(np.float64)

    for img, pose in zip(images, poses):
        if not np.any(unset):
            break
        img = np.asarray(img)
        if img.ndim != 3 or img.shape[2] != 3:
            raise ValueError(f"expected (H, W, 3) images, got {img.shape}")
        h, w = img.shape[:2]
        cand = np.nonzero(unset)[0]
        cam = pose.world_to_camera(means[cand])
        front = cam[:, 2] > 0.0
        cand = cand[front]
        if not len(cand):
            continue
        uv = pose.pixel_from_camera(cam[front])
        # nearest-pixel sample, valid iff the rounded coordinate is in frame
        col = np.floor(uv[:, 0] + 0.5).astype(np.int64)
        row = np.floor(uv[:, 1] + 0.5).astype(np.int64)
        ok = (col >= 0) & (col < w) & (row >= 0) & (row < h)
        cand, col, row = cand[ok], col[ok], row[ok]
        colors[cand] = img[row, col].astype(np.float32)
        unset[cand] = False

    return replace(dome, gaussians=dome.gaussians.replace(colors=colors))
