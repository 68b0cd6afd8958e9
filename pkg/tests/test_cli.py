"""Command-line surface: every subcommand, every exit code.

Scores in the eval tests are checked against renders the library produced
for the same frames, so the expected numbers (sentinel PSNR, zero depth
error) follow from the metric definitions rather than from the command.
"""

import json
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from splat4d.cli import main
from splat4d.container import load_scene
from splat4d.images import read_pfm, read_png, write_pfm, write_png
from splat4d.pipeline import scene_and_pose_at
from splat4d.renderer import render

SPEC = """\
scene width=11 height=9 frames=3 dt=0.5
camera fx=11 fy=11 cx=5 cy=4
sky count=8
ground axis=y offset=2 color=0.4,0.35,0.3
box center=-1,0,6 size=1.5,1.5,1.5 color=0.9,0.1,0.1 velocity=1.2,0,0 instance=3
box center=2,0,8 size=1.5,1.5,1.5 color=0.1,0.2,0.9 instance=9
"""


@pytest.fixture()
def runner():
    return CliRunner()


@pytest.fixture()
def scene_path(runner, tmp_path):
    spec = tmp_path / "lot.txt"
    spec.write_text(SPEC)
    out = tmp_path / "lot.dggt"
    result = runner.invoke(main, ["synth", "--spec", str(spec), "--out", str(out)])
    assert result.exit_code == 0, result.output
    return out


def provenance_dict(path: Path) -> dict:
    out = {}
    for line in path.read_text().splitlines():
        key, val = line.split("=", 1)
        out[key] = val
    return out


class TestSynth:
    def test_writes_a_loadable_container(self, scene_path):
        seq = load_scene(scene_path)
        assert len(seq.frames) == 3

    def test_reports_what_it_wrote(self, runner, tmp_path):
        spec = tmp_path / "lot.txt"
        spec.write_text(SPEC)
        out = tmp_path / "lot.dggt"
        result = runner.invoke(main, ["synth", "--spec", str(spec), "--out", str(out)])
        assert "3 frames" in result.output
        assert "2 motion fields" in result.output

    def test_bad_spec_exits_2(self, runner, tmp_path):
        spec = tmp_path / "broken.txt"
        spec.write_text("scene width=11\n")   # missing required keys
        result = runner.invoke(main, ["synth", "--spec", str(spec), "--out", str(tmp_path / "x.dggt")])
        assert result.exit_code == 2
        assert "error:" in result.stderr


class TestInfo:
    def test_summary_and_instances(self, runner, scene_path):
        result = runner.invoke(main, ["info", "--scene", str(scene_path)])
        assert result.exit_code == 0, result.output
        assert "frames: 3" in result.output
        assert "size: 11x9" in result.output
        assert "span: [0.0, 1.0]" in result.output
        assert "instance 3" in result.output and "dynamic" in result.output
        assert "instance 9" in result.output and "static" in result.output
        assert "valid" in result.output

    def test_corrupted_container_exits_2(self, runner, scene_path, tmp_path):
        data = bytearray(scene_path.read_bytes())
        data[40] ^= 0xFF
        bad = tmp_path / "bad.dggt"
        bad.write_bytes(bytes(data))
        result = runner.invoke(main, ["info", "--scene", str(bad)])
        assert result.exit_code == 2
        assert "error:" in result.stderr


class TestRender:
    def test_outputs_and_provenance(self, runner, scene_path, tmp_path):
        out = tmp_path / "render"
        result = runner.invoke(main, [
            "render", "--scene", str(scene_path), "--time", "0.0", "--out", str(out),
        ])
        assert result.exit_code == 0, result.output
        rgb = read_png(out / "rgb.png")
        assert rgb.shape == (9, 11, 3)
        assert read_pfm(out / "depth.pfm").shape == (9, 11)
        assert read_pfm(out / "alpha.pfm").shape == (9, 11)
        prov = provenance_dict(out / "provenance.txt")
        parts = [int(prov[k]) for k in ("static", "dynamic", "sky")]
        assert int(prov["gaussians"]) == sum(parts)
        fates = [int(prov[k]) for k in (
            "drawn", "culled_depth", "culled_frustum", "culled_opacity", "degenerate_skipped",
        )]
        assert sum(fates) == int(prov["gaussians"])
        assert int(prov["tile_size"]) == 16

    def test_byte_identical_across_runs(self, runner, scene_path, tmp_path):
        args = ["render", "--scene", str(scene_path), "--time", "0.25"]
        a, b = tmp_path / "a", tmp_path / "b"
        assert runner.invoke(main, args + ["--out", str(a)]).exit_code == 0
        assert runner.invoke(main, args + ["--out", str(b)]).exit_code == 0
        for name in ("rgb.png", "depth.pfm", "alpha.pfm"):
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_matches_library_render(self, runner, scene_path, tmp_path):
        out = tmp_path / "render"
        runner.invoke(main, [
            "render", "--scene", str(scene_path), "--time", "0.5", "--out", str(out),
        ])
        seq = load_scene(scene_path)
        scene, pose = scene_and_pose_at(seq, 0.5)
        target = render(scene, pose, 11, 9)
        # the file stores float32, so compare after the same downcast
        np.testing.assert_array_equal(read_pfm(out / "depth.pfm"), target.depth.astype(np.float32))

    def test_size_override(self, runner, scene_path, tmp_path):
        out = tmp_path / "render"
        result = runner.invoke(main, [
            "render", "--scene", str(scene_path), "--time", "0.0",
            "--out", str(out), "--width", "22", "--height", "18",
        ])
        assert result.exit_code == 0
        assert read_png(out / "rgb.png").shape == (18, 22, 3)

    def test_pose_file_override(self, runner, scene_path, tmp_path):
        pose_file = tmp_path / "pose.txt"
        pose_file.write_text("camera fx=11 fy=11 cx=5 cy=4 translation=0,0,-2\n")
        out = tmp_path / "render"
        result = runner.invoke(main, [
            "render", "--scene", str(scene_path), "--time", "0.0",
            "--out", str(out), "--pose-file", str(pose_file),
        ])
        assert result.exit_code == 0
        # pulled back 2 units: the box face sits 2 deeper than from the rig
        depth = read_pfm(out / "depth.pfm")
        assert abs(float(depth[4, 3]) - 7.25) < 0.5

    def test_bad_pose_file_exits_2(self, runner, scene_path, tmp_path):
        pose_file = tmp_path / "pose.txt"
        pose_file.write_text("nothing here=1\n")
        result = runner.invoke(main, [
            "render", "--scene", str(scene_path), "--time", "0.0",
            "--out", str(tmp_path / "r"), "--pose-file", str(pose_file),
        ])
        assert result.exit_code == 2

    def test_time_outside_span_exits_3(self, runner, scene_path, tmp_path):
        result = runner.invoke(main, [
            "render", "--scene", str(scene_path), "--time", "9.0", "--out", str(tmp_path / "r"),
        ])
        assert result.exit_code == 3
        assert "error:" in result.stderr


class TestEdit:
    def test_remove_script(self, runner, scene_path, tmp_path):
        script = tmp_path / "script.txt"
        script.write_text("remove id=3\n")
        out = tmp_path / "edited.dggt"
        result = runner.invoke(main, [
            "edit", "--scene", str(scene_path), "--script", str(script), "--out", str(out),
        ])
        assert result.exit_code == 0, result.output
        edited = load_scene(out)
        assert edited.frames[0].dropped.any()

    def test_insert_source_resolved_relative_to_script(self, runner, scene_path, tmp_path):
        script = tmp_path / "script.txt"
        # the donor is the scene itself, by bare filename; id 3 collides so
        # the command must echo the remap note
        script.write_text(f"insert source={scene_path.name} id=3\n")
        out = tmp_path / "edited.dggt"
        result = runner.invoke(main, [
            "edit", "--scene", str(scene_path), "--script", str(script), "--out", str(out),
        ])
        assert result.exit_code == 0, result.output
        assert "note:" in result.output and "remapped" in result.output
        edited = load_scene(out)
        assert [i.instance_id for i in edited.inserted] == [10]

    def test_unknown_instance_exits_4(self, runner, scene_path, tmp_path):
        script = tmp_path / "script.txt"
        script.write_text("remove id=42\n")
        result = runner.invoke(main, [
            "edit", "--scene", str(scene_path), "--script", str(script),
            "--out", str(tmp_path / "e.dggt"),
        ])
        assert result.exit_code == 4
        assert "42" in result.stderr

    def test_malformed_script_exits_2(self, runner, scene_path, tmp_path):
        script = tmp_path / "script.txt"
        script.write_text("recolor id=3\n")
        result = runner.invoke(main, [
            "edit", "--scene", str(scene_path), "--script", str(script),
            "--out", str(tmp_path / "e.dggt"),
        ])
        assert result.exit_code == 2


def library_ground_truth(scene_file: Path, into: Path) -> Path:
    """Ground truth produced by the library for the same frames."""
    seq = load_scene(scene_file)
    into.mkdir()
    for k, fr in enumerate(seq.frames):
        scene, pose = scene_and_pose_at(seq, fr.timestamp)
        target = render(scene, pose, fr.map.width, fr.map.height)
        write_png(into / f"rgb_{k:04d}.png", target.rgb)
        write_pfm(into / f"depth_{k:04d}.pfm", target.depth)
    return into


class TestEval:
    # structural similarity needs at least one full 11x11 window
    SPEC_LARGE = SPEC.replace(
        "scene width=11 height=9", "scene width=12 height=12"
    ).replace("camera fx=11 fy=11 cx=5 cy=4", "camera fx=12 fy=12 cx=6 cy=6")

    @pytest.fixture()
    def eval_scene(self, runner, tmp_path):
        spec = tmp_path / "big.txt"
        spec.write_text(self.SPEC_LARGE)
        out = tmp_path / "big.dggt"
        assert runner.invoke(main, ["synth", "--spec", str(spec), "--out", str(out)]).exit_code == 0
        return out

    @pytest.fixture()
    def gt_dir(self, eval_scene, tmp_path):
        return library_ground_truth(eval_scene, tmp_path / "gt")

    def test_self_eval_hits_the_sentinel(self, runner, eval_scene, gt_dir, tmp_path):
        out = tmp_path / "eval"
        result = runner.invoke(main, [
            "eval", "--scene", str(eval_scene), "--gt", str(gt_dir), "--out", str(out),
        ])
        assert result.exit_code == 0, result.output
        report = json.loads((out / "report.json").read_text())
        # renders are quantized to PNG before comparison; identical renders
        # quantize identically, so every frame scores the mse=0 sentinel
        assert report["mean"]["psnr"] == 99.0
        assert report["mean"]["ssim"] == 1.0
        assert report["mean"]["d_rmse"] == pytest.approx(0.0, abs=1e-9)
        assert len(report["frames"]) == 3
        assert "mean.psnr=99.0" in (out / "report.txt").read_text()

    def test_frames_below_the_ssim_window_skip_that_score(self, runner, scene_path, tmp_path):
        gt = library_ground_truth(scene_path, tmp_path / "gt")   # 11x9 frames
        out = tmp_path / "eval"
        result = runner.invoke(main, [
            "eval", "--scene", str(scene_path), "--gt", str(gt), "--out", str(out),
        ])
        assert result.exit_code == 0, result.output
        report = json.loads((out / "report.json").read_text())
        assert report["mean"]["psnr"] == 99.0
        assert "ssim" not in report["mean"]

    def test_missing_ground_truth_exits_2(self, runner, eval_scene, gt_dir, tmp_path):
        (gt_dir / "rgb_0002.png").unlink()
        result = runner.invoke(main, [
            "eval", "--scene", str(eval_scene), "--gt", str(gt_dir), "--out", str(tmp_path / "e"),
        ])
        assert result.exit_code == 2
        assert "rgb_0002.png" in result.stderr

    def test_wrong_size_ground_truth_exits_2(self, runner, eval_scene, gt_dir, tmp_path):
        write_png(gt_dir / "rgb_0000.png", np.zeros((4, 4, 3)))
        result = runner.invoke(main, [
            "eval", "--scene", str(eval_scene), "--gt", str(gt_dir), "--out", str(tmp_path / "e"),
        ])
        assert result.exit_code == 2


class TestEvalFlow:
    def test_exact_prediction(self, runner, tmp_path):
        flow = np.array([[1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.5, 0.5, 0.5]])
        pred, gt = tmp_path / "pred.txt", tmp_path / "gt.txt"
        np.savetxt(pred, flow)
        np.savetxt(gt, flow)
        out = tmp_path / "flow.json"
        result = runner.invoke(main, [
            "eval-flow", "--pred", str(pred), "--gt", str(gt), "--out", str(out),
        ])
        assert result.exit_code == 0, result.output
        report = json.loads(out.read_text())
        assert report == {"epe3d": 0.0, "acc5": 100.0, "acc10": 100.0, "angular": 0.0}
        assert "epe3d=0.0" in result.output

    def test_malformed_flow_exits_2(self, runner, tmp_path):
        pred, gt = tmp_path / "pred.txt", tmp_path / "gt.txt"
        pred.write_text("not a number\n")
        gt.write_text("0 0 0\n")
        result = runner.invoke(main, ["eval-flow", "--pred", str(pred), "--gt", str(gt)])
        assert result.exit_code == 2


class TestServe:
    def test_help_does_not_start_a_server(self, runner):
        result = runner.invoke(main, ["serve", "--help"])
        assert result.exit_code == 0
        assert "SPLAT4D_SCENES" in result.output
