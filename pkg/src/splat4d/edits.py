"""Instance-level scene editing: remove, translate, insert.

Edits are pure: every operation returns a new SceneSequence and leaves the
input untouched.  Static Gaussians are never modified by any edit; removal
and translation act on dynamic content only, keyed by instance id, and
insertion grafts a self-contained instance (its own keyframes and motion)
into the host scene.

Edit scripts are plain text in the manifest grammar:

    remove    id=3            [from=0.0 to=2.0]
    translate id=2 delta=1,0,0 [from=.. to=..]
    insert    source=<scene-ref> id=5 [as=9] [from=.. to=..]

`source` is resolved by a caller-provided function (a file path for the CLI,
a scene id for the HTTP service).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Iterable, Mapping

import numpy as np

from .manifest import ManifestError, parse_manifest
from .motion import MotionField
from .scene_model import (
    Frame,
    GaussianMap,
    InsertedInstance,
    InstanceKeyframe,
    SceneSequence,
)

ALL_TIME = (-np.inf, np.inf)


class UnknownInstanceError(ValueError):
    """Raised when an edit names an instance id the scene does not contain."""


@dataclass(frozen=True)
class EditOp:
    """One edit.  kind is "remove", "translate", or "insert".

    remove:    instance_id
    translate: instance_id, delta (3,)
    insert:    payload (an InsertedInstance; its instance_id is the requested
               id, auto-remapped on collision)
    time_range restricts the op to frames/keyframes whose timestamp falls in
    the closed interval; None means the whole sequence.
    """

    kind: str
    instance_id: int = 0
    delta: tuple[float, float, float] | None = None
    payload: InsertedInstance | None = None
    time_range: tuple[float, float] | None = None

    def __post_init__(self):
        if self.kind not in ("remove", "translate", "insert"):
            raise ValueError(f"unknown edit kind {self.kind!r}")
        if self.kind == "translate":
            if self.delta is None or len(self.delta) != 3:
                raise ValueError("translate needs a 3-component delta")
            if not np.all(np.isfinite(self.delta)):
                raise ValueError("translate delta must be finite")
        if self.kind == "insert" and self.payload is None:
            raise ValueError("insert needs a payload instance")
        if self.kind in ("remove", "translate") and self.instance_id <= 0:
            raise ValueError("instance_id must be positive")

    def span(self) -> tuple[float, float]:
        return self.time_range if self.time_range is not None else ALL_TIME


@dataclass(frozen=True)
class EditScript:
    ops: tuple[EditOp, ...]


@dataclass(frozen=True)
class EditResult:
    sequence: SceneSequence
    notes: tuple[str, ...] = ()


def scene_instance_ids(seq: SceneSequence) -> set[int]:
    """Every instance id present anywhere: map planes or inserted content."""
    ids: set[int] = set()
    for fr in seq.frames:
        ids.update(int(i) for i in np.unique(fr.map.instance_ids) if i != 0)
    ids.update(inst.instance_id for inst in seq.inserted)
    return ids


@dataclass(frozen=True)
class InstanceInfo:
    """Catalog entry for one instance across the whole sequence."""

    instance_id: int
    frame_counts: dict[float, int]     # timestamp -> live pixel/Gaussian count
    total_count: int
    bbox_min: tuple[float, float, float] | None
    bbox_max: tuple[float, float, float] | None
    dynamic: bool
    inserted: bool


def list_instances(seq: SceneSequence) -> list[InstanceInfo]:
    """Catalog every labeled instance: per-frame counts, world bounding box,
    and whether any of its content is dynamic.

    Pixels dropped by removals no longer count; an instance whose content is
    entirely gone disappears from the catalog.
    """
    counts: dict[int, dict[float, int]] = {}
    boxes: dict[int, list[np.ndarray]] = {}
    dynamic: dict[int, bool] = {}

    for fr in seq.frames:
        ids = fr.map.instance_ids
        live = ~fr.dropped
        dyn = fr.mask.binarize().reshape(-1)
        for iid in np.unique(ids):
            if iid == 0:
                continue
            sel = (ids == iid) & live
            n = int(np.count_nonzero(sel))
            if n == 0:
                continue
            iid = int(iid)
            counts.setdefault(iid, {})[fr.timestamp] = n
            boxes.setdefault(iid, []).append(fr.map.gaussians.means[sel].astype(np.float64))
            dynamic[iid] = dynamic.get(iid, False) or bool(np.any(sel & dyn))

    inserted_ids = set()
    for inst in seq.inserted:
        iid = inst.instance_id
        inserted_ids.add(iid)
        for kf in inst.keyframes:
            counts.setdefault(iid, {})[kf.timestamp] = (
                counts.get(iid, {}).get(kf.timestamp, 0) + len(kf.gaussians)
            )
            if len(kf.gaussians):
                boxes.setdefault(iid, []).append(kf.gaussians.means.astype(np.float64))
        dynamic[iid] = True

    out = []
    for iid in sorted(counts):
        pts = np.concatenate(boxes[iid]) if boxes.get(iid) else None
        out.append(InstanceInfo(
            instance_id=iid,
            frame_counts=dict(sorted(counts[iid].items())),
            total_count=sum(counts[iid].values()),
            bbox_min=tuple(np.min(pts, axis=0)) if pts is not None and len(pts) else None,
            bbox_max=tuple(np.max(pts, axis=0)) if pts is not None and len(pts) else None,
            dynamic=dynamic.get(iid, False),
            inserted=iid in inserted_ids,
        ))
    return out


def extract_instance(seq: SceneSequence, instance_id: int) -> InsertedInstance:
    """Package one instance's dynamic content as a standalone payload.

    Keyframes are the instance's dynamic Gaussians per frame (row-major pixel
    order); motion displacements are the matching rows of the host's motion
    fields.  An instance that was itself inserted is returned as stored.
    """
    for inst in seq.inserted:
        if inst.instance_id == instance_id:
            return inst

    keyframes: list[InstanceKeyframe] = []
    picks: dict[float, np.ndarray] = {}
    for fr in seq.frames:
        dyn = fr.mask.binarize().reshape(-1)
        sel = (fr.map.instance_ids == instance_id) & dyn & ~fr.dropped
        pix = np.nonzero(sel)[0]
        if not len(pix):
            continue
        picks[fr.timestamp] = pix
        keyframes.append(InstanceKeyframe(
            timestamp=fr.timestamp,
            gaussians=fr.map.gaussians.take(pix),
        ))
    if not keyframes:
        raise UnknownInstanceError(f"instance {instance_id} has no dynamic content")

    motion: dict[tuple[float, float], np.ndarray] = {}
    for (ta, tb), fld in seq.motion_fields.items():
        if ta not in picks or tb not in picks:
            continue
        fr = seq.frames[seq.frame_index_at(ta)]
        flat = fld.queries[:, 0] * fr.map.width + fld.queries[:, 1]
        # reorder field rows into the keyframe's row-major pixel order
        row_of = {int(p): i for i, p in enumerate(flat)}
        rows = [row_of[int(p)] for p in picks[ta] if int(p) in row_of]
        if len(rows) != len(picks[ta]):
            continue    # field does not cover the instance; skip the pair
        motion[(ta, tb)] = fld.displacements[rows]
    return InsertedInstance(instance_id=instance_id, keyframes=tuple(keyframes), motion=motion)


def _in_span(t: float, span: tuple[float, float]) -> bool:
    return span[0] <= t <= span[1]


def _filter_motion_for_drops(
    fields: Mapping[tuple[float, float], MotionField],
    frames: tuple[Frame, ...],
    stamps: dict[float, int],
) -> dict[tuple[float, float], MotionField]:
    out = {}
    for (ta, tb), fld in fields.items():
        fr = frames[stamps[ta]]
        flat = fld.queries[:, 0] * fr.map.width + fld.queries[:, 1]
        keep = ~fr.dropped[flat]
        if np.all(keep):
            out[(ta, tb)] = fld
        else:
            out[(ta, tb)] = MotionField(
                t_a=ta, t_b=tb,
                queries=fld.queries[keep],
                displacements=fld.displacements[keep],
            )
    return out


def apply_edit(seq: SceneSequence, op: EditOp) -> EditResult:
    """Apply one edit, returning the edited sequence plus any notes
    (currently only insert-id remaps).  Unknown ids raise
    UnknownInstanceError; static content is never touched."""
    span = op.span()
    known = scene_instance_ids(seq)

    if op.kind == "remove":
        if op.instance_id not in known:
            raise UnknownInstanceError(f"unknown instance id {op.instance_id}")
        frames = []
        for fr in seq.frames:
            if not _in_span(fr.timestamp, span):
                frames.append(fr)
                continue
            dyn = fr.mask.binarize().reshape(-1)
            hit = (fr.map.instance_ids == op.instance_id) & dyn
            frames.append(fr if not np.any(hit) else replace(fr, dropped=fr.dropped | hit))
        frames = tuple(frames)
        stamps = {f.timestamp: i for i, f in enumerate(frames)}
        return EditResult(SceneSequence(
            frames=frames,
            sky=seq.sky,
            motion_fields=_filter_motion_for_drops(seq.motion_fields, frames, stamps),
            inserted=tuple(i for i in seq.inserted if i.instance_id != op.instance_id),
        ))

    if op.kind == "translate":
        if op.instance_id not in known:
            raise UnknownInstanceError(f"unknown instance id {op.instance_id}")
        delta32 = np.asarray(op.delta, dtype=np.float32)
        frames = []
        for fr in seq.frames:
            dyn = fr.mask.binarize().reshape(-1)
            sel = (fr.map.instance_ids == op.instance_id) & dyn & ~fr.dropped
            if not (_in_span(fr.timestamp, span) and np.any(sel)):
                frames.append(fr)
                continue
            means = fr.map.gaussians.means.copy()
            means[sel] += delta32
            frames.append(replace(
                fr, map=replace(fr.map, gaussians=fr.map.gaussians.replace(means=means))
            ))
        inserted = []
        for inst in seq.inserted:
            if inst.instance_id != op.instance_id:
                inserted.append(inst)
                continue
            kfs = tuple(
                kf if not _in_span(kf.timestamp, span) else replace(
                    kf, gaussians=kf.gaussians.replace(means=kf.gaussians.means + delta32)
                )
                for kf in inst.keyframes
            )
            inserted.append(replace(inst, keyframes=kfs))
        return EditResult(SceneSequence(
            frames=tuple(frames), sky=seq.sky,
            motion_fields=seq.motion_fields, inserted=tuple(inserted),
        ))

    # insert
    payload = op.payload
    notes = []
    if op.time_range is not None:
        kfs = tuple(k for k in payload.keyframes if _in_span(k.timestamp, span))
        if not kfs:
            raise ValueError("time_range excludes every keyframe of the payload")
        times = {k.timestamp for k in kfs}
        motion = {k: v for k, v in payload.motion.items() if k[0] in times and k[1] in times}
        payload = replace(payload, keyframes=kfs, motion=motion)
    if payload.instance_id in known or payload.instance_id <= 0:
        new_id = max(known, default=0) + 1
        notes.append(f"instance id {payload.instance_id} already taken; remapped to {new_id}")
        payload = replace(payload, instance_id=new_id)
    return EditResult(
        SceneSequence(
            frames=seq.frames, sky=seq.sky,
            motion_fields=seq.motion_fields,
            inserted=seq.inserted + (payload,),
        ),
        notes=tuple(notes),
    )


def apply_script(seq: SceneSequence, script: EditScript) -> EditResult:
    notes: list[str] = []
    for op in script.ops:
        result = apply_edit(seq, op)
        seq = result.sequence
        notes.extend(result.notes)
    return EditResult(seq, tuple(notes))


def parse_edit_script(
    text: str,
    resolve_scene: Callable[[str], SceneSequence] | None = None,
) -> EditScript:
    """Parse the text form of an edit script.

    Insert ops name a source scene; resolve_scene maps that reference to a
    loaded SceneSequence (insert is rejected when no resolver is given).
    """
    ops: list[EditOp] = []
    for d in parse_manifest(text):
        span = None
        if "from" in d.args or "to" in d.args:
            span = (d.get_float("from", -np.inf), d.get_float("to", np.inf))
        if d.name == "remove":
            ops.append(EditOp(kind="remove", instance_id=d.get_int("id"), time_range=span))
        elif d.name == "translate":
            ops.append(EditOp(
                kind="translate", instance_id=d.get_int("id"),
                delta=tuple(d.get_vec("delta", 3)), time_range=span,
            ))
        elif d.name == "insert":
            if resolve_scene is None:
                raise ManifestError("insert is not available without a scene resolver", d.line)
            ref = d.get_str("source")
            try:
                source = resolve_scene(ref)
            except (KeyError, FileNotFoundError, OSError) as e:
                raise ManifestError(f"cannot resolve source scene {ref!r}: {e}", d.line) from e
            payload = extract_instance(source, d.get_int("id"))
            target_id = d.get_int("as", payload.instance_id)
            ops.append(EditOp(
                kind="insert",
                instance_id=target_id,
                payload=replace(payload, instance_id=target_id),
                time_range=span,
            ))
        else:
            raise ManifestError(f"unknown edit {d.name!r}", d.line)
    return EditScript(ops=tuple(ops))
