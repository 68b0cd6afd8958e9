"""Temporal composition: lifespan opacity falloff, static/dynamic split,
and assembly of the renderable Gaussian soup for one query time."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scene_model import (
    DynamicMask,
    GaussianMap,
    GaussianSet,
    SceneSequence,
    TIME_MATCH_TOL,
)

# Provenance tags for composed Gaussians.
TAG_STATIC = 0
TAG_DYNAMIC = 1
TAG_SKY = 2


def modulate_opacity(opacity: float, lifespan: float, birth_time: float, query_time: float) -> float:
    """Opacity of a Gaussian observed at birth_time when rendered at query_time.

    The falloff is a Gaussian in time: o * exp(-0.5 * (dt)^2 / lifespan), so a
    Gaussian is fully opaque at its birth instant and fades symmetrically on
    both sides, slower for larger lifespans.

    Raises ValueError if lifespan is not positive.
    """
    if not lifespan > 0.0:
        raise ValueError(f"lifespan must be > 0, got {lifespan}")
    dt = query_time - birth_time
    return float(opacity * np.exp(-0.5 * dt * dt / lifespan))


def modulate_opacities(
    opacities: np.ndarray,
    lifespans: np.ndarray,
    birth_times: np.ndarray,
    query_time: float,
) -> np.ndarray:
    """Vectorized modulate_opacity over aligned arrays; returns float64."""
    o = np.asarray(opacities, dtype=np.float64)
    s = np.asarray(lifespans, dtype=np.float64)
    if np.any(~(s > 0.0)):
        raise ValueError("lifespans must be > 0")
    dt = query_time - np.asarray(birth_times, dtype=np.float64)
    return o * np.exp(-0.5 * dt * dt / s)


@dataclass(frozen=True)
class SplitPart:
    """One side of a static/dynamic decomposition of a Gaussian map."""

    pixel_indices: np.ndarray   # (K,) int64, row-major indices into the map
    gaussians: GaussianSet
    instance_ids: np.ndarray    # (K,) uint32

    def __len__(self) -> int:
        return len(self.pixel_indices)


def decompose(gmap: GaussianMap, mask: DynamicMask) -> tuple[SplitPart, SplitPart]:
    """Partition a map's Gaussians into (static, dynamic) by the binarized mask.

    Every pixel lands in exactly one part; mask values at the threshold count
    as dynamic.  Pixel order inside each part is row-major.
    """
    if (mask.height, mask.width) != (gmap.height, gmap.width):
        raise ValueError("mask dimensions must match the map")
    dyn = mask.binarize().reshape(-1)
    if dyn.shape[0] != len(gmap.gaussians):
        raise ValueError("map payload does not match its declared size")
    idx = np.arange(gmap.width * gmap.height, dtype=np.int64)
    parts = []
    for sel in (~dyn, dyn):
        pix = idx[sel]
        parts.append(
            SplitPart(
                pixel_indices=pix,
                gaussians=gmap.gaussians.take(pix),
                instance_ids=gmap.instance_ids[pix],
            )
        )
    return parts[0], parts[1]


@dataclass(frozen=True)
class DynamicSet:
    """Dynamic Gaussians assembled for one query time.

    source_timestamps and source_indices record where each Gaussian came from
    (the keyframe it was observed or interpolated from, and its pixel or
    instance-local index there); the Gaussians themselves carry
    birth_time = timestamp so they render fully opaque at the query instant.
    """

    timestamp: float
    gaussians: GaussianSet
    source_timestamps: np.ndarray   # (N,) float64
    source_indices: np.ndarray      # (N,) int64
    instance_ids: np.ndarray        # (N,) uint32

    def __len__(self) -> int:
        return len(self.gaussians)

    @classmethod
    def empty(cls, timestamp: float) -> "DynamicSet":
        return cls(
            timestamp=timestamp,
            gaussians=GaussianSet.empty(),
            source_timestamps=np.zeros(0, np.float64),
            source_indices=np.zeros(0, np.int64),
            instance_ids=np.zeros(0, np.uint32),
        )

    @classmethod
    def merge(cls, timestamp: float, parts: list["DynamicSet"]) -> "DynamicSet":
        if not parts:
            return cls.empty(timestamp)
        for p in parts:
            if abs(p.timestamp - timestamp) > TIME_MATCH_TOL:
                raise ValueError("cannot merge dynamic sets built for different times")
        return cls(
            timestamp=timestamp,
            gaussians=GaussianSet.concat([p.gaussians for p in parts]),
            source_timestamps=np.concatenate([p.source_timestamps for p in parts]),
            source_indices=np.concatenate([p.source_indices for p in parts]),
            instance_ids=np.concatenate([p.instance_ids for p in parts]),
        )


def dynamic_set_from_frame(
    gmap: GaussianMap,
    mask: DynamicMask,
    dropped: np.ndarray | None = None,
) -> DynamicSet:
    """Dynamic part of a keyframe as a DynamicSet, minus dropped pixels."""
    _, dyn = decompose(gmap, mask)
    keep = np.ones(len(dyn), dtype=bool)
    if dropped is not None:
        keep = ~np.asarray(dropped, dtype=bool)[dyn.pixel_indices]
    pix = dyn.pixel_indices[keep]
    return DynamicSet(
        timestamp=gmap.timestamp,
        gaussians=dyn.gaussians.take(np.nonzero(keep)[0]),
        source_timestamps=np.full(len(pix), gmap.timestamp, dtype=np.float64),
        source_indices=pix,
        instance_ids=dyn.instance_ids[keep],
    )


@dataclass(frozen=True)
class Provenance:
    """Per-Gaussian origin bookkeeping for a composed scene."""

    tags: np.ndarray              # (N,) uint8: TAG_STATIC / TAG_DYNAMIC / TAG_SKY
    source_timestamps: np.ndarray # (N,) float64 (0 for sky)
    source_indices: np.ndarray    # (N,) int64 (pixel index, instance-local index, or sky index)
    instance_ids: np.ndarray      # (N,) uint32 (0 where unlabeled)

    def keys(self) -> list[tuple[int, float, int, int]]:
        """Hashable provenance keys, one per Gaussian, in composed order."""
        return list(
            zip(
                self.tags.tolist(),
                self.source_timestamps.tolist(),
                self.source_indices.tolist(),
                self.instance_ids.tolist(),
            )
        )


@dataclass(frozen=True)
class ComposedScene:
    """Flat renderable Gaussian soup for one query time.

    Order is deterministic: static Gaussians of every frame in time order
    (row-major within a frame), then the dynamic set, then the sky dome.  The
    rasterizer breaks depth ties by this order.
    """

    query_time: float
    gaussians: GaussianSet
    provenance: Provenance

    def __len__(self) -> int:
        return len(self.gaussians)

    def count(self, tag: int) -> int:
        return int(np.count_nonzero(self.provenance.tags == tag))


def aggregate(seq: SceneSequence, query_time: float, dynamic_source: DynamicSet) -> ComposedScene:
    """Union of all frames' static Gaussians, the query-time dynamic set, and
    the sky dome.

    No deduplication happens: overlapping static geometry observed in several
    frames appears once per frame, which is what the count law
    |composed| = sum(|static_f|) + |dynamic| + |sky| asserts.
    """
    if abs(dynamic_source.timestamp - query_time) > TIME_MATCH_TOL:
        raise ValueError(
            f"dynamic source was built for t={dynamic_source.timestamp}, "
            f"aggregate asked for t={query_time}"
        )
    sets: list[GaussianSet] = []
    tags: list[np.ndarray] = []
    stamps: list[np.ndarray] = []
    indices: list[np.ndarray] = []
    iids: list[np.ndarray] = []

    for fr in seq.frames:
        static, _ = decompose(fr.map, fr.mask)
        n = len(static)
        sets.append(static.gaussians)
        tags.append(np.full(n, TAG_STATIC, dtype=np.uint8))
        stamps.append(np.full(n, fr.timestamp, dtype=np.float64))
        indices.append(static.pixel_indices)
        iids.append(static.instance_ids)

    sets.append(dynamic_source.gaussians)
    n = len(dynamic_source)
    tags.append(np.full(n, TAG_DYNAMIC, dtype=np.uint8))
    stamps.append(dynamic_source.source_timestamps)
    indices.append(dynamic_source.source_indices)
    iids.append(dynamic_source.instance_ids)

    if seq.sky is not None and len(seq.sky.gaussians):
        sky = seq.sky.gaussians
        n = len(sky)
        sets.append(sky)
        tags.append(np.full(n, TAG_SKY, dtype=np.uint8))
        stamps.append(np.zeros(n, dtype=np.float64))
        indices.append(np.arange(n, dtype=np.int64))
        iids.append(np.zeros(n, dtype=np.uint32))

    return ComposedScene(
        query_time=query_time,
        gaussians=GaussianSet.concat(sets),
        provenance=Provenance(
            tags=np.concatenate(tags),
            source_timestamps=np.concatenate(stamps),
            source_indices=np.concatenate(indices),
            instance_ids=np.concatenate(iids),
        ),
    )
