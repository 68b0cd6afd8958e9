"""Command-line front end.

Exit codes: 0 success, 2 scene/input load failure, 3 invalid query time,
4 unknown instance id.
"""

from __future__ import annotations

import json
import sys
import time
from pathlib import Path

import click
import numpy as np

from .container import ContainerError, load_scene, save_scene
from .edits import UnknownInstanceError, apply_script, list_instances, parse_edit_script
from .images import quantize_u8, read_pfm, read_png, write_pfm, write_png
from .manifest import ManifestError, parse_manifest
from .metrics import SSIM_WINDOW, DepthEvalConfig, d_rmse, flow_metrics, psnr, ssim
from .pipeline import QueryTimeError, scene_and_pose_at
from .renderer import RenderSettings, render, render_sky_mask
from .scene_model import CameraPose, SceneSequence, validate_sequence
from .synthetic import import_synthetic
from .temporal import TAG_DYNAMIC, TAG_SKY, TAG_STATIC

EXIT_LOAD = 2
EXIT_TIME = 3
EXIT_INSTANCE = 4


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _load(path: str) -> SceneSequence:
    try:
        return load_scene(path)
    except (ContainerError, OSError) as e:
        _fail(EXIT_LOAD, f"cannot load {path}: {e}")


def _parse_pose_file(path: str) -> CameraPose:
    directives = parse_manifest(Path(path).read_text())
    for d in directives:
        if d.name == "camera":
            return CameraPose(
                fx=d.get_float("fx"), fy=d.get_float("fy"),
                cx=d.get_float("cx"), cy=d.get_float("cy"),
                rotation=np.array(d.get_vec("rotation", 4, default=(1, 0, 0, 0))),
                translation=np.array(d.get_vec("translation", 3, default=(0, 0, 0))),
            )
    raise ManifestError("pose file needs a camera directive", 1)


def _settings_from_options(tile_size, extent) -> RenderSettings:
    kw = {}
    if tile_size is not None:
        kw["tile_size"] = tile_size
    if extent is not None:
        kw["gaussian_extent"] = extent
    return RenderSettings(**kw)


@click.group()
def main():
    """4D Gaussian scene engine."""


@main.command("synth")
@click.option("--spec", "spec_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def synth_cmd(spec_path: str, out_path: str):
    """Build a synthetic scene container from a text description."""
    try:
        seq = import_synthetic(Path(spec_path).read_text())
    except (ManifestError, OSError) as e:
        _fail(EXIT_LOAD, f"cannot build scene: {e}")
    save_scene(out_path, seq)
    click.echo(f"wrote {out_path}: {len(seq.frames)} frames, "
               f"{len(seq.motion_fields)} motion fields, sky {len(seq.sky or [])}")


@main.command("info")
@click.option("--scene", "scene_path", required=True, type=click.Path(exists=True, dir_okay=False))
def info_cmd(scene_path: str):
    """Validate a scene container and print a summary."""
    seq = _load(scene_path)
    violations = validate_sequence(seq)
    t0, t1 = seq.span
    w, h = seq.frames[0].map.width, seq.frames[0].map.height
    click.echo(f"frames: {len(seq.frames)}  size: {w}x{h}  span: [{t0}, {t1}]")
    click.echo(f"motion fields: {len(seq.motion_fields)}  "
               f"sky: {len(seq.sky or [])}  inserted: {len(seq.inserted)}")
    for info in list_instances(seq):
        kind = "dynamic" if info.dynamic else "static"
        src = " (inserted)" if info.inserted else ""
        click.echo(f"instance {info.instance_id}: {info.total_count} gaussians, {kind}{src}")
    if violations:
        click.echo(f"{len(violations)} violations:", err=True)
        for v in violations:
            click.echo(f"  {v}", err=True)
        sys.exit(1)
    click.echo("valid")


@main.command("render")
@click.option("--scene", "scene_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--time", "query_time", required=True, type=float)
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--pose-file", type=click.Path(exists=True, dir_okay=False))
@click.option("--width", type=int)
@click.option("--height", type=int)
@click.option("--tile-size", type=int)
@click.option("--extent", type=float)
def render_cmd(scene_path, query_time, out_dir, pose_file, width, height, tile_size, extent):
    """Render a scene at a query time: rgb.png, depth.pfm, alpha.pfm, and a
    provenance report."""
    seq = _load(scene_path)
    try:
        scene, pose = scene_and_pose_at(seq, query_time)
    except QueryTimeError as e:
        _fail(EXIT_TIME, str(e))
    if pose_file:
        try:
            pose = _parse_pose_file(pose_file)
        except (ManifestError, OSError, ValueError) as e:
            _fail(EXIT_LOAD, f"bad pose file: {e}")
    w = width or seq.frames[0].map.width
    h = height or seq.frames[0].map.height
    settings = _settings_from_options(tile_size, extent)

    started = time.perf_counter()
    target = render(scene, pose, w, h, settings)
    millis = (time.perf_counter() - started) * 1000.0

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_png(out / "rgb.png", target.rgb)
    write_pfm(out / "depth.pfm", target.depth)
    write_pfm(out / "alpha.pfm", target.alpha)
    diag = target.diagnostics
    lines = [
        f"query_time={query_time}",
        f"width={w}",
        f"height={h}",
        f"gaussians={len(scene)}",
        f"static={scene.count(TAG_STATIC)}",
        f"dynamic={scene.count(TAG_DYNAMIC)}",
        f"sky={scene.count(TAG_SKY)}",
        f"drawn={diag.drawn}",
        f"culled_depth={diag.culled_depth}",
        f"culled_frustum={diag.culled_frustum}",
        f"culled_opacity={diag.culled_opacity}",
        f"degenerate_skipped={diag.degenerate_skipped}",
        f"tile_size={settings.tile_size}",
        f"render_millis={millis:.3f}",
    ]
    (out / "provenance.txt").write_text("\n".join(lines) + "\n")
    click.echo(f"rendered {w}x{h} at t={query_time} in {millis:.1f} ms -> {out_dir}")


@main.command("edit")
@click.option("--scene", "scene_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--script", "script_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def edit_cmd(scene_path, script_path, out_path):
    """Apply an edit script and save the edited scene.

    Insert sources in the script are paths, resolved relative to the script.
    """
    seq = _load(scene_path)
    base = Path(script_path).parent

    def resolve(ref: str) -> SceneSequence:
        p = Path(ref)
        return load_scene(p if p.is_absolute() else base / p)

    try:
        script = parse_edit_script(Path(script_path).read_text(), resolve)
        result = apply_script(seq, script)
    except UnknownInstanceError as e:
        _fail(EXIT_INSTANCE, str(e))
    except (ManifestError, ContainerError, OSError, ValueError) as e:
        _fail(EXIT_LOAD, f"cannot apply script: {e}")
    save_scene(out_path, result.sequence)
    for note in result.notes:
        click.echo(f"note: {note}")
    click.echo(f"wrote {out_path}")


@main.command("eval")
@click.option("--scene", "scene_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--gt", "gt_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
def eval_cmd(scene_path, gt_dir, out_dir):
    """Render every input frame and score it against ground truth.

    Ground truth layout: rgb_0000.png per frame, optional depth_0000.pfm.
    Depth error is computed over non-sky pixels (rendered alpha >= 0.5) with
    positive finite GT, after least-squares affine alignment.
    """
    seq = _load(scene_path)
    gt = Path(gt_dir)
    missing = [f"rgb_{k:04d}.png" for k in range(len(seq.frames))
               if not (gt / f"rgb_{k:04d}.png").exists()]
    if missing:
        _fail(EXIT_LOAD, f"ground truth missing: {', '.join(missing)}")

    rows = []
    for k, fr in enumerate(seq.frames):
        scene, pose = scene_and_pose_at(seq, fr.timestamp)
        target = render(scene, pose, fr.map.width, fr.map.height)
        gt_rgb = read_png(gt / f"rgb_{k:04d}.png")
        if gt_rgb.shape != target.rgb.shape:
            _fail(EXIT_LOAD, f"rgb_{k:04d}.png is {gt_rgb.shape}, expected {target.rgb.shape}")
        # score in the ground truth's space: 8-bit, exactly as the render
        # would be exported, so color scores are not capped by quantization
        pred = quantize_u8(target.rgb).astype(np.float64) / 255.0
        row = {"frame": k, "time": fr.timestamp, "psnr": psnr(pred, gt_rgb)}
        if min(target.rgb.shape[:2]) >= SSIM_WINDOW:   # frames smaller than the window have no score
            row["ssim"] = ssim(pred, gt_rgb)
        depth_path = gt / f"depth_{k:04d}.pfm"
        if depth_path.exists():
            gt_depth = read_pfm(depth_path).astype(np.float64)
            valid = (~render_sky_mask(target)) & np.isfinite(gt_depth) & (gt_depth > 0)
            if np.any(valid):
                pred_depth = target.depth.astype(np.float32).astype(np.float64)
                row["d_rmse"] = d_rmse(pred_depth, gt_depth,
                                       DepthEvalConfig(valid_mask=valid, align=True))
        rows.append(row)

    metrics = [k for k in ("psnr", "ssim", "d_rmse") if any(k in r for r in rows)]
    summary = {m: float(np.mean([r[m] for r in rows if m in r])) for m in metrics}
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lines = []
    for r in rows:
        for key, val in r.items():
            lines.append(f"frame_{r['frame']:04d}.{key}={val}")
    for m, v in summary.items():
        lines.append(f"mean.{m}={v}")
    (out / "report.txt").write_text("\n".join(lines) + "\n")
    (out / "report.json").write_text(json.dumps({"frames": rows, "mean": summary}, indent=2) + "\n")
    click.echo("  ".join(f"mean {m}: {v:.4f}" for m, v in summary.items()))


@main.command("eval-flow")
@click.option("--pred", "pred_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--gt", "gt_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", type=click.Path(dir_okay=False))
def eval_flow_cmd(pred_path, gt_path, out_path):
    """Score predicted scene flow against ground truth (text files, one
    `x y z` vector per line)."""
    try:
        pred = np.loadtxt(pred_path, ndmin=2)
        gt = np.loadtxt(gt_path, ndmin=2)
        m = flow_metrics(pred, gt)
    except ValueError as e:
        _fail(EXIT_LOAD, f"bad flow data: {e}")
    report = {"epe3d": m.epe3d, "acc5": m.acc5, "acc10": m.acc10, "angular": m.angular}
    for k, v in report.items():
        click.echo(f"{k}={v}")
    if out_path:
        Path(out_path).write_text(json.dumps(report, indent=2) + "\n")


@main.command("serve")
@click.option("--scenes", "scene_dir", required=True, envvar="SPLAT4D_SCENES",
              type=click.Path(exists=True, file_okay=False))
@click.option("--host", default="127.0.0.1", show_default=True, envvar="SPLAT4D_HOST")
@click.option("--port", default=8000, show_default=True, type=int, envvar="SPLAT4D_PORT")
@click.option("--tile-size", type=int, envvar="SPLAT4D_TILE_SIZE")
@click.option("--extent", type=float, envvar="SPLAT4D_EXTENT")
@click.option("--frontend", "frontend_dir", envvar="SPLAT4D_FRONTEND",
              type=click.Path(file_okay=False))
def serve_cmd(scene_dir, host, port, tile_size, extent, frontend_dir):
    """Serve scenes over HTTP (render, instances, edits).

    Flags fall back to SPLAT4D_SCENES, SPLAT4D_HOST, SPLAT4D_PORT,
    SPLAT4D_TILE_SIZE, SPLAT4D_EXTENT, and SPLAT4D_FRONTEND.
    """
    import uvicorn

    from .service import create_app

    app = create_app(Path(scene_dir),
                     default_settings=_settings_from_options(tile_size, extent),
                     frontend_dir=Path(frontend_dir) if frontend_dir else None)
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
