"""Binary scene container: a chunked little-endian format with per-chunk
CRCs, so any single corrupted byte is caught on load.

File layout (version 1.0):

    magic           4 bytes  b"DGGT"
    version         u16      (major << 8) | minor; loaders refuse newer
                             majors and newer minors
    byte-order mark u16      0x1234 stored little endian
    up-axis tag     u8       ord('z')
    reserved        u8       0
    chunks          ...      until the terminating "DEND" chunk

Every chunk is `tag(4) | payload_len(u64) | payload | crc32(u32)`.  Chunk
tags: HEAD (counts + absolute frame offsets), FRAM (one input frame: pose,
Gaussian channels, instance plane, mask plane, removed-pixel plane), SKYD
(sky dome), MOTN (one motion field), INST (one inserted instance), DEND
(end marker, empty).  Gaussian payloads are float32 in the canonical channel
order color(3) mean(3) quat(4) scale(3) opacity lifespan; timestamps and
poses are float64.

Writes go to a sibling temp file first and are renamed into place.
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

from .images import _atomic_write
from .motion import MotionField
from .scene_model import (
    CHANNELS,
    CameraPose,
    DynamicMask,
    Frame,
    GaussianMap,
    GaussianSet,
    InsertedInstance,
    InstanceKeyframe,
    SceneSequence,
)
from .sky import SkyDome

MAGIC = b"DGGT"
VERSION_MAJOR = 1
VERSION_MINOR = 0
BYTE_ORDER_MARK = 0x1234
UP_AXIS = ord("z")
FILE_EXTENSION = ".dggt"

_PREAMBLE = struct.Struct("<4sHHBB")
_CHUNK_HEAD = struct.Struct("<4sQ")
_CRC = struct.Struct("<I")


class ContainerError(Exception):
    """Base for container load failures; `code` names the failure class."""

    code = "container-error"


class BadMagicError(ContainerError):
    code = "bad-magic"


class VersionError(ContainerError):
    code = "version-mismatch"


class ChecksumError(ContainerError):
    code = "checksum-mismatch"


class TruncatedError(ContainerError):
    code = "truncated"


class FormatError(ContainerError):
    code = "malformed"


def _f32(a: np.ndarray) -> bytes:
    return np.ascontiguousarray(a, dtype="<f4").tobytes()


def _u32(a: np.ndarray) -> bytes:
    return np.ascontiguousarray(a, dtype="<u4").tobytes()


def _chunk(tag: bytes, payload: bytes) -> bytes:
    return _CHUNK_HEAD.pack(tag, len(payload)) + payload + _CRC.pack(zlib.crc32(payload))


def _pose_bytes(p: CameraPose) -> bytes:
    return struct.pack(
        "<12d",
        p.fx, p.fy, p.cx, p.cy,
        *p.rotation.tolist(), *p.translation.tolist(), p.timestamp,
    )


def _frame_chunk_payload(fr: Frame) -> bytes:
    m = fr.map
    head = struct.pack("<IIdd", m.width, m.height, m.timestamp, fr.mask.threshold)
    return b"".join(
        [
            head,
            _pose_bytes(fr.pose),
            _f32(m.gaussians.channels()),
            _u32(m.instance_ids),
            _f32(fr.mask.values),
            np.ascontiguousarray(fr.dropped, dtype=np.uint8).tobytes(),
        ]
    )


def _sky_chunk_payload(sky: SkyDome) -> bytes:
    return (
        struct.pack("<dI", sky.radius, len(sky.gaussians))
        + _f32(sky.gaussians.channels())
    )


def _motion_chunk_payload(f: MotionField) -> bytes:
    return (
        struct.pack("<ddI", f.t_a, f.t_b, len(f.queries))
        + _u32(f.queries)
        + _f32(f.displacements)
    )


def _instance_chunk_payload(inst: InsertedInstance) -> bytes:
    parts = [struct.pack("<III", inst.instance_id, len(inst.keyframes), len(inst.motion))]
    for kf in inst.keyframes:
        parts.append(struct.pack("<dI", kf.timestamp, len(kf.gaussians)))
        parts.append(_f32(kf.gaussians.channels()))
    for (ta, tb) in sorted(inst.motion.keys()):
        disp = np.asarray(inst.motion[(ta, tb)])
        parts.append(struct.pack("<ddI", ta, tb, len(disp)))
        parts.append(_f32(disp))
    return b"".join(parts)


def scene_to_bytes(seq: SceneSequence) -> bytes:
    """Serialize a sequence; the same sequence always yields the same bytes."""
    frame_payloads = [_frame_chunk_payload(fr) for fr in seq.frames]
    motion_keys = sorted(seq.motion_fields.keys())

    # HEAD carries counts and absolute offsets of every FRAM chunk, which the
    # loader cross-checks, so offset corruption cannot pass silently.
    head_size = struct.calcsize("<IIIB") + 8 * len(frame_payloads)
    preamble = _PREAMBLE.size
    offset = preamble + _CHUNK_HEAD.size + head_size + _CRC.size
    offsets = []
    for p in frame_payloads:
        offsets.append(offset)
        offset += _CHUNK_HEAD.size + len(p) + _CRC.size

    head = struct.pack(
        "<IIIB",
        len(frame_payloads),
        len(motion_keys),
        len(seq.inserted),
        1 if seq.sky is not None else 0,
    ) + struct.pack(f"<{len(offsets)}Q", *offsets)

    out = [
        _PREAMBLE.pack(MAGIC, (VERSION_MAJOR << 8) | VERSION_MINOR, BYTE_ORDER_MARK, UP_AXIS, 0),
        _chunk(b"HEAD", head),
    ]
    out += [_chunk(b"FRAM", p) for p in frame_payloads]
    if seq.sky is not None:
        out.append(_chunk(b"SKYD", _sky_chunk_payload(seq.sky)))
    for key in motion_keys:
        out.append(_chunk(b"MOTN", _motion_chunk_payload(seq.motion_fields[key])))
    for inst in seq.inserted:
        out.append(_chunk(b"INST", _instance_chunk_payload(inst)))
    out.append(_chunk(b"DEND", b""))
    return b"".join(out)


def save_scene(path: str | Path, seq: SceneSequence) -> None:
    _atomic_write(path, scene_to_bytes(seq))


class _Reader:
    """Bounds-checked cursor over a chunk payload."""

    def __init__(self, data: bytes, context: str):
        self.data = data
        self.pos = 0
        self.context = context

    def unpack(self, fmt: str):
        s = struct.Struct(fmt)
        if self.pos + s.size > len(self.data):
            raise TruncatedError(f"{self.context}: payload ended inside {fmt!r}")
        vals = s.unpack_from(self.data, self.pos)
        self.pos += s.size
        return vals

    def array(self, dtype: str, count: int, shape: tuple[int, ...]) -> np.ndarray:
        nbytes = np.dtype(dtype).itemsize * count
        if self.pos + nbytes > len(self.data):
            raise TruncatedError(f"{self.context}: payload ended inside an array")
        a = np.frombuffer(self.data, dtype=dtype, count=count, offset=self.pos)
        self.pos += nbytes
        return a.reshape(shape)

    def done(self) -> None:
        if self.pos != len(self.data):
            raise FormatError(f"{self.context}: {len(self.data) - self.pos} trailing payload bytes")


def _parse_frame(payload: bytes, index: int) -> Frame:
    r = _Reader(payload, f"FRAM[{index}]")
    w, h, timestamp, threshold = r.unpack("<IIdd")
    if w == 0 or h == 0 or w * h > 1 << 24:
        raise FormatError(f"FRAM[{index}]: implausible dimensions {w}x{h}")
    pose_vals = r.unpack("<12d")
    npix = w * h
    channels = r.array("<f4", npix * CHANNELS, (npix, CHANNELS))
    instance_ids = r.array("<u4", npix, (npix,))
    mask_vals = r.array("<f4", npix, (h, w))
    dropped = r.array("u1", npix, (npix,))
    r.done()
    if np.any(dropped > 1):
        raise FormatError(f"FRAM[{index}]: removed-pixel plane must be 0/1")
    pose = CameraPose(
        fx=pose_vals[0], fy=pose_vals[1], cx=pose_vals[2], cy=pose_vals[3],
        rotation=np.array(pose_vals[4:8]), translation=np.array(pose_vals[8:11]),
        timestamp=pose_vals[11],
    )
    gmap = GaussianMap(
        width=w, height=h, timestamp=timestamp,
        gaussians=GaussianSet.from_channels(channels, np.full(npix, timestamp)),
        instance_ids=instance_ids,
    )
    mask = DynamicMask(width=w, height=h, values=mask_vals, threshold=threshold)
    return Frame(map=gmap, mask=mask, pose=pose, dropped=dropped.astype(bool))


def _parse_sky(payload: bytes) -> SkyDome:
    r = _Reader(payload, "SKYD")
    radius, count = r.unpack("<dI")
    channels = r.array("<f4", count * CHANNELS, (count, CHANNELS))
    r.done()
    return SkyDome(
        radius=radius,
        gaussians=GaussianSet.from_channels(channels, np.zeros(count)),
    )


def _parse_motion(payload: bytes, index: int) -> MotionField:
    r = _Reader(payload, f"MOTN[{index}]")
    ta, tb, q = r.unpack("<ddI")
    queries = r.array("<u4", q * 2, (q, 2))
    disp = r.array("<f4", q * 3, (q, 3))
    r.done()
    return MotionField(t_a=ta, t_b=tb, queries=queries.astype(np.int64), displacements=disp)


def _parse_instance(payload: bytes, index: int) -> InsertedInstance:
    r = _Reader(payload, f"INST[{index}]")
    iid, n_kf, n_motion = r.unpack("<III")
    keyframes = []
    for _ in range(n_kf):
        t, count = r.unpack("<dI")
        channels = r.array("<f4", count * CHANNELS, (count, CHANNELS))
        keyframes.append(
            InstanceKeyframe(timestamp=t, gaussians=GaussianSet.from_channels(channels, np.full(count, t)))
        )
    motion = {}
    for _ in range(n_motion):
        ta, tb, q = r.unpack("<ddI")
        motion[(ta, tb)] = r.array("<f4", q * 3, (q, 3))
    r.done()
    return InsertedInstance(instance_id=int(iid), keyframes=tuple(keyframes), motion=motion)


def scene_from_bytes(data: bytes) -> SceneSequence:
    """Parse container bytes, verifying structure and every chunk CRC.

    Raises BadMagicError, VersionError, ChecksumError, TruncatedError, or
    FormatError; each carries a stable `code` and names the offending chunk.
    """
    if len(data) < _PREAMBLE.size:
        raise TruncatedError("file shorter than the preamble")
    magic, version, bom, up_axis, reserved = _PREAMBLE.unpack_from(data, 0)
    if magic != MAGIC:
        raise BadMagicError(f"expected {MAGIC!r}, found {magic!r}")
    major, minor = version >> 8, version & 0xFF
    if major != VERSION_MAJOR:
        raise VersionError(f"unsupported major version {major} (supported: {VERSION_MAJOR})")
    if minor > VERSION_MINOR:
        raise VersionError(f"minor version {minor} is newer than {VERSION_MINOR}")
    if bom != BYTE_ORDER_MARK:
        raise FormatError(f"byte-order mark 0x{bom:04x}; file was not written little endian")
    if up_axis != UP_AXIS:
        raise FormatError(f"unknown up-axis tag {up_axis}")
    if reserved != 0:
        raise FormatError("reserved preamble byte must be 0")

    chunks: list[tuple[bytes, bytes, int]] = []   # (tag, payload, file offset)
    pos = _PREAMBLE.size
    while True:
        if pos == len(data):
            raise TruncatedError("missing DEND end marker")
        if pos + _CHUNK_HEAD.size > len(data):
            raise TruncatedError("file ended inside a chunk header")
        tag, size = _CHUNK_HEAD.unpack_from(data, pos)
        if tag not in (b"HEAD", b"FRAM", b"SKYD", b"MOTN", b"INST", b"DEND"):
            raise FormatError(f"unknown chunk tag {tag!r} at offset {pos}")
        body_start = pos + _CHUNK_HEAD.size
        body_end = body_start + size
        if body_end + _CRC.size > len(data):
            raise TruncatedError(f"chunk {tag.decode()} at offset {pos} overruns the file")
        payload = data[body_start:body_end]
        (stored_crc,) = _CRC.unpack_from(data, body_end)
        if zlib.crc32(payload) != stored_crc:
            raise ChecksumError(f"chunk {tag.decode()} at offset {pos} failed its CRC")
        chunks.append((tag, payload, pos))
        pos = body_end + _CRC.size
        if tag == b"DEND":
            if size != 0:
                raise FormatError("DEND chunk must be empty")
            if pos != len(data):
                raise FormatError(f"{len(data) - pos} trailing bytes after DEND")
            break

    if not chunks or chunks[0][0] != b"HEAD":
        raise FormatError("first chunk must be HEAD")
    r = _Reader(chunks[0][1], "HEAD")
    n_frames, n_motion, n_inserted, sky_flag = r.unpack("<IIIB")
    offsets = list(r.unpack(f"<{n_frames}Q")) if n_frames else []
    r.done()
    if sky_flag not in (0, 1):
        raise FormatError("HEAD sky flag must be 0 or 1")

    frames: list[Frame] = []
    sky: SkyDome | None = None
    motion: dict[tuple[float, float], MotionField] = {}
    inserted: list[InsertedInstance] = []
    for tag, payload, at in chunks[1:-1]:
        try:
            if tag == b"FRAM":
                i = len(frames)
                if i >= n_frames:
                    raise FormatError(f"more FRAM chunks than the {n_frames} declared")
                if offsets[i] != at:
                    raise FormatError(f"FRAM[{i}] at offset {at}, HEAD declared {offsets[i]}")
                frames.append(_parse_frame(payload, i))
            elif tag == b"SKYD":
                if sky is not None:
                    raise FormatError("duplicate SKYD chunk")
                sky = _parse_sky(payload)
            elif tag == b"MOTN":
                f = _parse_motion(payload, len(motion))
                if (f.t_a, f.t_b) in motion:
                    raise FormatError(f"duplicate motion field for ({f.t_a}, {f.t_b})")
                motion[(f.t_a, f.t_b)] = f
            elif tag == b"INST":
                inserted.append(_parse_instance(payload, len(inserted)))
            elif tag == b"HEAD":
                raise FormatError("duplicate HEAD chunk")
        except (ValueError, struct.error) as e:
            # domain-type validation of decoded values, not a container bug
            if isinstance(e, ContainerError):
                raise
            raise FormatError(f"chunk {tag.decode()} at offset {at}: {e}") from e

    if len(frames) != n_frames:
        raise TruncatedError(f"expected {n_frames} frames, found {len(frames)}")
    if len(motion) != n_motion:
        raise TruncatedError(f"expected {n_motion} motion fields, found {len(motion)}")
    if len(inserted) != n_inserted:
        raise TruncatedError(f"expected {n_inserted} inserted instances, found {len(inserted)}")
    if (sky is not None) != bool(sky_flag):
        raise TruncatedError("sky dome presence disagrees with HEAD")

    return SceneSequence(frames=tuple(frames), sky=sky, motion_fields=motion, inserted=tuple(inserted))


def load_scene(path: str | Path) -> SceneSequence:
    return scene_from_bytes(Path(path).read_bytes())
