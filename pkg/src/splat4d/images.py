"""Image I/O: 8-bit sRGB PNG for color, 32-bit float PFM for depth/alpha.

PNG encoding is implemented here rather than delegated so that identical
pixels always produce identical bytes (fixed zlib level, fixed filter, fixed
chunk order); the render service's determinism guarantee rests on that.
Decoding arbitrary PNGs goes through Pillow.
"""

from __future__ import annotations

import os
import struct
import tempfile
import zlib
from pathlib import Path

import numpy as np
from PIL import Image

_PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"


def quantize_u8(img: np.ndarray) -> np.ndarray:
    """Float [0, 1] -> uint8 with round-half-up (0.5 * 255 becomes 128)."""
    v = np.asarray(img, dtype=np.float64)
    return np.clip(np.floor(v * 255.0 + 0.5), 0, 255).astype(np.uint8)


def _chunk(tag: bytes, payload: bytes) -> bytes:
    return (
        struct.pack(">I", len(payload))
        + tag
        + payload
        + struct.pack(">I", zlib.crc32(tag + payload))
    )


def encode_png(img: np.ndarray) -> bytes:
    """Encode an (H, W, 3) float image in [0, 1] as a deterministic sRGB PNG."""
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) image, got {img.shape}")
    data = quantize_u8(img)
    h, w = data.shape[:2]
    # filter byte 0 (None) per scanline; zlib level 9 for stable output
    raw = b"".join(b"\x00" + data[i].tobytes() for i in range(h))
    return (
        _PNG_SIGNATURE
        + _chunk(b"IHDR", struct.pack(">IIBBBBB", w, h, 8, 2, 0, 0, 0))
        + _chunk(b"sRGB", b"\x00")
        + _chunk(b"IDAT", zlib.compress(raw, 9))
        + _chunk(b"IEND", b"")
    )


def _atomic_write(path: str | Path, data: bytes) -> None:
    """Write via a sibling temp file and rename, so readers never see a
    half-written file."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def write_png(path: str | Path, img: np.ndarray) -> None:
    _atomic_write(path, encode_png(img))


def read_png(path: str | Path) -> np.ndarray:
    """Read any PNG as an (H, W, 3) float array in [0, 1]."""
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float64)
    return arr / 255.0


def encode_pfm(arr: np.ndarray) -> bytes:
    """Encode (H, W) or (H, W, 3) float32 as PFM (little endian, bottom-up
    scanlines per the format's convention).  Round-trips float32 exactly."""
    a = np.asarray(arr, dtype=np.float32)
    if a.ndim == 2:
        header = b"Pf\n"
    elif a.ndim == 3 and a.shape[2] == 3:
        header = b"PF\n"
    else:
        raise ValueError(f"expected (H, W) or (H, W, 3), got {a.shape}")
    h, w = a.shape[:2]
    body = np.ascontiguousarray(a[::-1].astype("<f4")).tobytes()
    return header + f"{w} {h}\n".encode() + b"-1.0\n" + body


def write_pfm(path: str | Path, arr: np.ndarray) -> None:
    _atomic_write(path, encode_pfm(arr))


def decode_pfm(data: bytes) -> np.ndarray:
    pos = 0

    def token() -> bytes:
        nonlocal pos
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError("truncated PFM header")
        return data[start:pos]

    kind = token()
    if kind not in (b"Pf", b"PF"):
        raise ValueError(f"not a PFM file (header {kind!r})")
    w = int(token())
    h = int(token())
    scale = float(token())
    pos += 1  # single whitespace after the scale line
    channels = 3 if kind == b"PF" else 1
    dtype = "<f4" if scale < 0 else ">f4"
    count = w * h * channels
    body = np.frombuffer(data, dtype=dtype, count=count, offset=pos)
    if body.size != count:
        raise ValueError("truncated PFM payload")
    shape = (h, w, 3) if channels == 3 else (h, w)
    return body.reshape(shape)[::-1].astype(np.float32)


def read_pfm(path: str | Path) -> np.ndarray:
    return decode_pfm(Path(path).read_bytes())
