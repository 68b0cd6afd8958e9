"""Query-time assembly: everything needed to render a scene at time t.

Resolves whether t is a keyframe or falls between two, interpolates the
dynamic content and the camera, folds in inserted instances, and aggregates
the renderable Gaussian soup.
"""

from __future__ import annotations

import warnings

import numpy as np

from .motion import InterpolationQuery, interpolate_dynamic, interpolate_pose
from .scene_model import CameraPose, InsertedInstance, SceneSequence, TIME_MATCH_TOL
from .temporal import ComposedScene, DynamicSet, aggregate, dynamic_set_from_frame


class QueryTimeError(ValueError):
    """The query time cannot be rendered: outside the sequence span, or no
    motion field covers the enclosing interval."""


def _check_span(seq: SceneSequence, t: float) -> None:
    if not seq.frames:
        raise QueryTimeError("sequence has no frames")
    t0, t1 = seq.span
    if not (t0 - TIME_MATCH_TOL <= t <= t1 + TIME_MATCH_TOL):
        raise QueryTimeError(f"time {t} outside the scene span [{t0}, {t1}]")


def pose_at(seq: SceneSequence, t: float) -> CameraPose:
    """Camera pose at t: the keyframe pose, or interpolated between the two
    enclosing keyframes (slerp rotation, lerp translation/intrinsics)."""
    _check_span(seq, t)
    i = seq.frame_index_at(t)
    if i is not None:
        return seq.frames[i].pose
    ia, ib = seq.bracket(t)
    ta, tb = seq.timestamps[ia], seq.timestamps[ib]
    return interpolate_pose(seq.frames[ia].pose, seq.frames[ib].pose,
                            InterpolationQuery(t_a=ta, t_b=tb, t_i=t))


def _instance_part_at(inst: InsertedInstance, t: float) -> DynamicSet:
    """An inserted instance's Gaussians at time t, on its own timeline.

    Exact keyframe hits return that keyframe; times inside a motion-covered
    pair interpolate; anything else clamps to the nearest keyframe with a
    warning (the instance's timeline need not cover the host's).
    """
    kts = inst.timestamps()
    snap_at = None
    for k, kt in enumerate(kts):
        if abs(kt - t) <= TIME_MATCH_TOL:
            snap_at = k
            break
    if snap_at is None:
        for (ta, tb), disp in inst.motion.items():
            if ta < t < tb:
                ka = kts.index(ta)
                base = inst.keyframes[ka].gaussians
                w = (t - ta) / (tb - ta)
                means = base.means.astype(np.float64) + w * np.asarray(disp, dtype=np.float64)
                moved = base.replace(
                    means=means.astype(np.float32),
                    birth_times=np.full(len(base), t, dtype=np.float64),
                )
                return DynamicSet(
                    timestamp=t,
                    gaussians=moved,
                    source_timestamps=np.full(len(base), ta, dtype=np.float64),
                    source_indices=np.arange(len(base), dtype=np.int64),
                    instance_ids=np.full(len(base), inst.instance_id, dtype=np.uint32),
                )
        snap_at = int(np.argmin(np.abs(np.asarray(kts) - t)))
        warnings.warn(
            f"instance {inst.instance_id}: no keyframe or motion covers t={t}; "
            f"clamping to keyframe t={kts[snap_at]}",
            RuntimeWarning,
        )
    kf = inst.keyframes[snap_at]
    g = kf.gaussians.replace(birth_times=np.full(len(kf.gaussians), t, dtype=np.float64))
    return DynamicSet(
        timestamp=t,
        gaussians=g,
        source_timestamps=np.full(len(g), kf.timestamp, dtype=np.float64),
        source_indices=np.arange(len(g), dtype=np.int64),
        instance_ids=np.full(len(g), inst.instance_id, dtype=np.uint32),
    )


def dynamic_at(seq: SceneSequence, t: float) -> DynamicSet:
    """All dynamic content at time t: the base frames' dynamic Gaussians
    (exact at keyframes, motion-interpolated between them) plus every
    inserted instance."""
    _check_span(seq, t)
    i = seq.frame_index_at(t)
    if i is not None:
        fr = seq.frames[i]
        base = dynamic_set_from_frame(fr.map, fr.mask, fr.dropped)
        base = DynamicSet(
            timestamp=t,
            gaussians=base.gaussians,
            source_timestamps=base.source_timestamps,
            source_indices=base.source_indices,
            instance_ids=base.instance_ids,
        )
    else:
        ia, ib = seq.bracket(t)
        ta, tb = seq.timestamps[ia], seq.timestamps[ib]
        field = seq.motion_fields.get((ta, tb))
        if field is None:
            raise QueryTimeError(
                f"no motion field between frames t={ta} and t={tb}; "
                f"cannot interpolate t={t}"
            )
        fr = seq.frames[ia]
        base = interpolate_dynamic(fr.map, fr.mask, field,
                                   InterpolationQuery(t_a=ta, t_b=tb, t_i=t),
                                   dropped=fr.dropped)
    parts = [base] + [_instance_part_at(inst, t) for inst in seq.inserted]
    return DynamicSet.merge(t, parts)


def compose_at(seq: SceneSequence, t: float) -> ComposedScene:
    """The renderable Gaussian soup for time t."""
    return aggregate(seq, t, dynamic_at(seq, t))


def scene_and_pose_at(seq: SceneSequence, t: float) -> tuple[ComposedScene, CameraPose]:
    return compose_at(seq, t), pose_at(seq, t)
