"""HTTP render and edit service.

Scenes are ``*.dggt`` files in a directory. Every scene exposes an immutable
version tree: the file itself is the root version, and each applied edit
script creates a child version, stored under ``<dir>/.versions/<scene>/`` so
version ids survive restarts. Version ids are content hashes of the container
bytes, which makes identical edits idempotent and renders reproducible.

Insert sources inside edit scripts are scene ids (root version) or
``<scene>:<version>`` references.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Union

import numpy as np
from fastapi import FastAPI, HTTPException, Response
from pydantic import BaseModel, Field

from .container import scene_from_bytes, scene_to_bytes
from .edits import UnknownInstanceError, apply_script, list_instances, parse_edit_script
from .images import encode_png
from .manifest import ManifestError
from .pipeline import QueryTimeError, scene_and_pose_at
from .renderer import RenderSettings, render
from .scene_model import CameraPose, SceneSequence

SCENE_SUFFIX = ".dggt"


def _version_id(payload: bytes) -> str:
    return "v" + hashlib.sha256(payload).hexdigest()[:12]


@dataclass
class _Version:
    vid: str
    parent: str | None
    label: str | None
    path: Path


class SceneStore:
    """Immutable scene versions on disk plus an in-memory sequence cache."""

    def __init__(self, scene_dir: Path):
        self.scene_dir = Path(scene_dir)
        self.versions_dir = self.scene_dir / ".versions"
        self._lock = threading.Lock()
        self._sequences: dict[tuple[str, str], SceneSequence] = {}
        self._roots: dict[str, str] = {}

    def scene_ids(self) -> list[str]:
        return sorted(p.stem for p in self.scene_dir.glob(f"*{SCENE_SUFFIX}"))

    def _scene_path(self, sid: str) -> Path:
        p = self.scene_dir / f"{sid}{SCENE_SUFFIX}"
        if not p.is_file():
            raise KeyError(f"unknown scene {sid!r}")
        return p

    def root_version(self, sid: str) -> str:
        with self._lock:
            vid = self._roots.get(sid)
        if vid is None:
            vid = _version_id(self._scene_path(sid).read_bytes())
            with self._lock:
                self._roots[sid] = vid
        return vid

    def _meta_path(self, sid: str) -> Path:
        return self.versions_dir / sid / "meta.json"

    def _read_meta(self, sid: str) -> list[dict]:
        path = self._meta_path(sid)
        if not path.is_file():
            return []
        return json.loads(path.read_text())["versions"]

    def _write_meta(self, sid: str, rows: list[dict]):
        path = self._meta_path(sid)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps({"versions": rows}, indent=2) + "\n")
        tmp.replace(path)

    def versions(self, sid: str) -> list[_Version]:
        root = _Version(self.root_version(sid), None, None, self._scene_path(sid))
        out = [root]
        for row in self._read_meta(sid):
            out.append(_Version(row["id"], row["parent"], row.get("label"),
                                self.versions_dir / sid / f"{row['id']}{SCENE_SUFFIX}"))
        return out

    def resolve(self, sid: str, vid: str | None) -> tuple[str, SceneSequence]:
        for v in self.versions(sid):
            if vid is None or v.vid == vid:
                key = (sid, v.vid)
                with self._lock:
                    seq = self._sequences.get(key)
                if seq is None:
                    seq = scene_from_bytes(v.path.read_bytes())
                    with self._lock:
                        self._sequences[key] = seq
                return v.vid, seq
        raise KeyError(f"unknown version {vid!r} of scene {sid!r}")

    def resolve_ref(self, ref: str) -> SceneSequence:
        """Insert-source lookup: a scene id, or ``scene:version``."""
        if ":" in ref:
            sid, vid = ref.split(":", 1)
            return self.resolve(sid, vid)[1]
        return self.resolve(ref, None)[1]

    def create_version(self, sid: str, base: str | None, script_text: str,
                       label: str | None) -> tuple[str, bool]:
        """Apply a script on top of ``base``; returns (version id, created)."""
        base_vid, seq = self.resolve(sid, base)
        script = parse_edit_script(script_text, self.resolve_ref)
        result = apply_script(seq, script)
        payload = scene_to_bytes(result.sequence)
        vid = _version_id(payload)
        root_vid = self.root_version(sid)   # before the lock: it locks too
        with self._lock:
            rows = self._read_meta(sid)
            known = {r["id"] for r in rows} | {root_vid}
            for r in rows:
                if label is not None and r.get("label") == label and r["id"] != vid:
                    raise VersionCollision(
                        f"label {label!r} is already bound to version {r['id']}")
            if vid in known:
                return vid, False
            path = self.versions_dir / sid / f"{vid}{SCENE_SUFFIX}"
            path.parent.mkdir(parents=True, exist_ok=True)
            tmp = path.with_suffix(".tmp")
            tmp.write_bytes(payload)
            tmp.replace(path)
            rows.append({"id": vid, "parent": base_vid, "label": label,
                         "notes": list(result.notes)})
            self._write_meta(sid, rows)
            self._sequences[(sid, vid)] = result.sequence
        return vid, True


class VersionCollision(Exception):
    pass


class CameraOverride(BaseModel):
    fx: float = Field(gt=0)
    fy: float = Field(gt=0)
    cx: float
    cy: float
    rotation: tuple[float, float, float, float] = (1.0, 0.0, 0.0, 0.0)
    translation: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def to_pose(self, timestamp: float) -> CameraPose:
        return CameraPose(fx=self.fx, fy=self.fy, cx=self.cx, cy=self.cy,
                          rotation=np.array(self.rotation, dtype=np.float64),
                          translation=np.array(self.translation, dtype=np.float64),
                          timestamp=timestamp)


class SettingsOverride(BaseModel):
    tile_size: int | None = Field(None, ge=1, le=256)
    gaussian_extent: float | None = Field(None, gt=0)
    alpha_threshold: float | None = Field(None, ge=0, le=1)
    saturation_threshold: float | None = Field(None, ge=0, le=1)
    near_clip: float | None = Field(None, gt=0)
    far_clip: float | None = Field(None, gt=0)

    def to_settings(self, base: RenderSettings) -> RenderSettings:
        overrides = {k: v for k, v in self.model_dump().items() if v is not None}
        return RenderSettings(**{**base.__dict__, **overrides})


class RenderBody(BaseModel):
    time: float
    version: str | None = None
    camera: Union[Literal["interpolated"], CameraOverride] = "interpolated"
    width: int | None = Field(None, ge=1, le=4096)
    height: int | None = Field(None, ge=1, le=4096)
    settings: SettingsOverride | None = None


class EditBody(BaseModel):
    script: str
    base_version: str | None = None
    label: str | None = None


def _field_error(loc: str, msg: str) -> HTTPException:
    return HTTPException(status_code=422,
                         detail=[{"loc": ["body", loc], "msg": msg, "type": "value_error"}])


def create_app(scene_dir: Path, default_settings: RenderSettings | None = None,
               frontend_dir: Path | None = None) -> FastAPI:
    store = SceneStore(scene_dir)
    settings0 = default_settings or RenderSettings()
    app = FastAPI(title="splat4d", docs_url=None, redoc_url=None)

    @app.get("/healthz")
    def healthz():
        return Response(content="ok", media_type="text/plain")

    @app.get("/scenes")
    def scenes():
        out = []
        for sid in store.scene_ids():
            vid, seq = store.resolve(sid, None)
            row = {"id": sid, "root_version": vid, "frames": len(seq.frames)}
            if seq.frames:
                row["width"] = seq.frames[0].map.width
                row["height"] = seq.frames[0].map.height
                row["span"] = list(seq.span)
                row["keyframes"] = list(seq.timestamps)
            out.append(row)
        return {"scenes": out}

    @app.get("/scenes/{sid}/instances")
    def instances(sid: str, version: str | None = None):
        try:
            vid, seq = store.resolve(sid, version)
        except KeyError as e:
            raise HTTPException(status_code=404, detail=str(e))
        rows = []
        for info in list_instances(seq):
            rows.append({
                "instance_id": info.instance_id,
                "total_count": info.total_count,
                "dynamic": info.dynamic,
                "inserted": info.inserted,
                "bbox_min": [float(v) for v in info.bbox_min],
                "bbox_max": [float(v) for v in info.bbox_max],
            })
        return {"version": vid, "instances": rows}

    @app.get("/scenes/{sid}/versions")
    def versions(sid: str):
        try:
            rows = store.versions(sid)
        except KeyError as e:
            raise HTTPException(status_code=404, detail=str(e))
        return {"versions": [{"id": v.vid, "parent": v.parent, "label": v.label}
                             for v in rows]}

    @app.post("/scenes/{sid}/render")
    def render_scene(sid: str, body: RenderBody):
        try:
            vid, seq = store.resolve(sid, body.version)
        except KeyError as e:
            raise HTTPException(status_code=404, detail=str(e))
        if not seq.frames:
            raise _field_error("time", "scene has no frames")
        try:
            scene, pose = scene_and_pose_at(seq, body.time)
        except QueryTimeError as e:
            raise _field_error("time", str(e))
        if isinstance(body.camera, CameraOverride):
            pose = body.camera.to_pose(body.time)
        width = body.width or seq.frames[0].map.width
        height = body.height or seq.frames[0].map.height
        settings = body.settings.to_settings(settings0) if body.settings else settings0

        started = time.perf_counter()
        target = render(scene, pose, width, height, settings)
        millis = (time.perf_counter() - started) * 1000.0
        png = encode_png(target.rgb)
        return Response(content=png, media_type="image/png",
                        headers={"X-Render-Millis": f"{millis:.3f}",
                                 "X-Scene-Version": vid})

    @app.post("/scenes/{sid}/edits")
    def edits(sid: str, body: EditBody):
        try:
            vid, created = store.create_version(sid, body.base_version,
                                                body.script, body.label)
        except KeyError as e:
            raise HTTPException(status_code=404, detail=str(e))
        except VersionCollision as e:
            raise HTTPException(status_code=409, detail=str(e))
        except UnknownInstanceError as e:
            raise _field_error("script", str(e))
        except (ManifestError, ValueError) as e:
            raise _field_error("script", str(e))
        return {"version": vid, "created": created}

    if frontend_dir is not None and Path(frontend_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=frontend_dir, html=True))

    return app
