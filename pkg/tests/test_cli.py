"""Command-line front door: payload shapes, exit codes, stream discipline."""

import json
import shutil
import subprocess
from pathlib import Path

import numpy as np
import pytest

from cubeforge import (
    ManifestStore,
    ReductionParams,
    WriteParams,
    downsample,
    parse_cube,
    reduce_cube,
    write_cube,
)
from cubeforge.cli import EXIT_DATA, EXIT_IO, EXIT_OK, EXIT_USAGE, main
from cubeforge.synth import sphere_cube
from conftest import make_doc


@pytest.fixture
def cube_file(tmp_path, rng):
    doc = make_doc(rng, dims=(8, 8, 8))
    path = tmp_path / "input.cube"
    # 17 digits round-trips bitwise, so the file carries doc's exact values
    path.write_bytes(write_cube(doc, WriteParams(sig_digits=17)))
    return path, doc


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestInspect:
    def test_summary_payload(self, capsys, cube_file):
        path, doc = cube_file
        code, out, err = run(capsys, "inspect", path)
        assert code == EXIT_OK
        body = json.loads(out)
        assert body["dims"] == [8, 8, 8]
        assert body["natoms"] == 2
        assert body["nval"] == 1
        assert body["value_count"] == 512
        lo, hi, mean, rms = doc.volume.stats(0)
        got = body["stats"][0]
        assert got["mean"] == pytest.approx(mean, rel=1e-12)
        assert got["min"] == pytest.approx(lo, rel=1e-12)
        assert err == ""

    def test_pretty_mode_is_flat_text(self, capsys, cube_file):
        path, _ = cube_file
        code, out, _ = run(capsys, "--pretty", "inspect", path)
        assert code == EXIT_OK
        with pytest.raises(json.JSONDecodeError):
            json.loads(out)
        assert any(line.startswith("dims.") for line in out.splitlines())


class TestReduce:
    def test_writes_output_and_report(self, capsys, cube_file, tmp_path):
        path, doc = cube_file
        out_path = tmp_path / "small.cube"
        report_path = tmp_path / "report.json"
        code, out, _ = run(
            capsys, "reduce", path, "-o", out_path, "--stride", "2", "--report", report_path
        )
        assert code == EXIT_OK
        payload = json.loads(out)
        assert payload["grid_before"] == [8, 8, 8]
        assert payload["grid_after"] == [4, 4, 4]
        assert payload["size_ratio"] > 1
        assert json.loads(report_path.read_text())["size_ratio"] == payload["size_ratio"]
        reduced = parse_cube(out_path.read_bytes())
        assert reduced.dims == (4, 4, 4)

    def test_report_matches_library(self, capsys, cube_file, tmp_path):
        path, doc = cube_file
        out_path = tmp_path / "small.cube"
        code, out, _ = run(capsys, "reduce", path, "-o", out_path, "--stride", "2,2,2", "--digits", "4")
        _, report = reduce_cube(doc, ReductionParams(stride=2, sig_digits=4))
        payload = json.loads(out)
        assert payload["size_ratio"] == report.size_ratio
        assert payload["retained_point_error"]["max_abs"] == report.retained_point_error.max_abs

    def test_manifest_recording_and_duplicate(self, capsys, cube_file, tmp_path):
        path, _ = cube_file
        out_path = tmp_path / "small.cube"
        manifest = tmp_path / "manifest.jsonl"
        code, out, _ = run(
            capsys, "reduce", path, "-o", out_path, "--manifest", manifest, "--proposal", "p7"
        )
        assert code == EXIT_OK
        first = json.loads(out)
        assert first["duplicate"] is False
        store = ManifestStore(manifest)
        assert store.get_entry(first["entry_id"]).proposal_id == "p7"
        code, out, _ = run(
            capsys, "reduce", path, "-o", out_path, "--manifest", manifest, "--proposal", "p7"
        )
        second = json.loads(out)
        assert second["duplicate"] is True
        assert second["entry_id"] == first["entry_id"]
        assert len(store._raw_lines()) == 1

    def test_manifest_without_proposal_is_usage_error(self, capsys, cube_file, tmp_path):
        path, _ = cube_file
        code, out, err = run(
            capsys, "reduce", path, "-o", tmp_path / "x.cube", "--manifest", tmp_path / "m.jsonl"
        )
        assert code == EXIT_USAGE
        assert out == ""
        assert "error:" in err


class TestDiff:
    def test_zero_metrics_for_identical_files(self, capsys, cube_file, tmp_path):
        path, _ = cube_file
        twin = tmp_path / "twin.cube"
        shutil.copy(path, twin)
        code, out, _ = run(capsys, "diff", path, twin)
        assert code == EXIT_OK
        metrics = json.loads(out)
        assert metrics["max_abs"] == 0.0
        assert metrics["rms"] == 0.0

    def test_reproduces_retained_point_error(self, capsys, cube_file, tmp_path):
        path, doc = cube_file
        params = ReductionParams(stride=2, sig_digits=3)
        out_path = tmp_path / "small.cube"
        code, out, _ = run(capsys, "reduce", path, "-o", out_path, "--stride", "2")
        reported = json.loads(out)["retained_point_error"]
        # rebuild the comparison baseline: kept samples at full precision
        baseline = tmp_path / "kept.cube"
        kept = downsample(doc.volume, (2, 2, 2), "point")
        from cubeforge import CubeDocument

        kept_doc = CubeDocument(
            comment1=doc.comment1,
            comment2=doc.comment2,
            natoms_raw=doc.natoms_raw,
            atoms=doc.atoms,
            volume=kept,
        )
        baseline.write_bytes(write_cube(kept_doc, WriteParams(sig_digits=17)))
        code, out, _ = run(capsys, "diff", baseline, out_path)
        assert code == EXIT_OK
        metrics = json.loads(out)
        assert metrics["max_abs"] == reported["max_abs"]
        assert metrics["max_rel"] == reported["max_rel"]
        assert metrics["rms"] == reported["rms"]

    def test_shape_mismatch_is_data_error(self, capsys, cube_file, tmp_path):
        path, doc = cube_file
        small = tmp_path / "small.cube"
        run(capsys, "reduce", path, "-o", small, "--stride", "2")
        code, out, err = run(capsys, "diff", path, small)
        assert code == EXIT_DATA
        assert out == ""
        assert "error:" in err


class TestRender:
    def test_writes_ppm_and_mesh(self, capsys, tmp_path):
        cube = tmp_path / "sphere.cube"
        cube.write_bytes(write_cube(sphere_cube(n=12, radius=0.6)))
        img = tmp_path / "out.ppm"
        obj = tmp_path / "out.obj"
        code, out, _ = run(
            capsys, "render", cube, "-o", img, "--iso", "0", "--size", "64x48", "--mesh", obj
        )
        assert code == EXIT_OK
        payload = json.loads(out)
        assert payload["triangles"] > 0
        assert payload["empty"] is False
        data = img.read_bytes()
        assert data.startswith(b"P6\n64 48\n255\n")
        assert obj.read_text().startswith("v ")

    def test_camera_flags_change_output(self, capsys, tmp_path):
        cube = tmp_path / "sphere.cube"
        cube.write_bytes(write_cube(sphere_cube(n=12, radius=0.6, bump=0.3)))
        a, b = tmp_path / "a.ppm", tmp_path / "b.ppm"
        run(capsys, "render", cube, "-o", a, "--iso", "0", "--size", "64x64")
        run(capsys, "render", cube, "-o", b, "--iso", "0", "--size", "64x64", "--azimuth", "90")
        assert a.read_bytes() != b.read_bytes()

    def test_repeat_runs_byte_identical(self, capsys, tmp_path):
        cube = tmp_path / "sphere.cube"
        cube.write_bytes(write_cube(sphere_cube(n=10, radius=0.55)))
        a, b = tmp_path / "a.ppm", tmp_path / "b.ppm"
        args = ["--iso", "0", "--size", "80x60", "--azimuth", "37", "--elevation", "-12", "--zoom", "1.5"]
        run(capsys, "render", cube, "-o", a, *args)
        run(capsys, "render", cube, "-o", b, *args)
        assert a.read_bytes() == b.read_bytes()

    def test_oversized_image_is_data_error(self, capsys, tmp_path):
        cube = tmp_path / "sphere.cube"
        cube.write_bytes(write_cube(sphere_cube(n=8)))
        code, out, err = run(
            capsys, "render", cube, "-o", tmp_path / "x.ppm", "--iso", "0", "--size", "9000x9000"
        )
        assert code == EXIT_DATA


class TestStash:
    def write_policy(self, tmp_path, **kw):
        src = tmp_path / "src"
        dst = tmp_path / "dst"
        src.mkdir(exist_ok=True)
        (src / "a.cube").write_bytes(b"alpha")
        policy = {
            "source_root": str(src),
            "dest_root": str(dst),
            "include_globs": ["**/*.cube"],
            **kw,
        }
        path = tmp_path / "policy.json"
        path.write_text(json.dumps(policy))
        return path, src, dst

    def test_dry_run_plans_without_touching(self, capsys, tmp_path):
        policy, src, dst = self.write_policy(tmp_path)
        code, out, _ = run(capsys, "stash", "--policy", policy, "--dry-run")
        assert code == EXIT_OK
        plan = json.loads(out)
        assert len(plan["items"]) == 1
        assert not dst.exists()

    def test_execute_copies(self, capsys, tmp_path):
        policy, src, dst = self.write_policy(tmp_path)
        code, out, _ = run(capsys, "stash", "--policy", policy)
        assert code == EXIT_OK
        report = json.loads(out)
        assert report["totals"] == {"verified": 1}
        assert (dst / "a.cube").read_bytes() == b"alpha"

    def test_missing_source_root_is_io_error(self, capsys, tmp_path):
        policy = tmp_path / "policy.json"
        policy.write_text(
            json.dumps(
                {
                    "source_root": str(tmp_path / "ghost"),
                    "dest_root": str(tmp_path / "dst"),
                    "include_globs": ["*.cube"],
                }
            )
        )
        code, out, err = run(capsys, "stash", "--policy", policy)
        assert code == EXIT_IO
        assert out == ""


class TestVerify:
    def test_statuses_reported_as_data(self, capsys, cube_file, tmp_path):
        path, _ = cube_file
        out_path = tmp_path / "small.cube"
        manifest = tmp_path / "manifest.jsonl"
        _, out, _ = run(
            capsys, "reduce", path, "-o", out_path, "--manifest", manifest, "--proposal", "p1"
        )
        entry_id = json.loads(out)["entry_id"]
        code, out, _ = run(capsys, "verify", "--manifest", manifest)
        assert code == EXIT_OK
        assert json.loads(out)["entries"] == [{"entry_id": entry_id, "status": "ok"}]
        out_path.write_bytes(b"tampered")
        code, out, _ = run(capsys, "verify", "--manifest", manifest, "--entry", entry_id)
        assert code == EXIT_OK  # the finding is data, not a tool failure
        assert json.loads(out)["status"] == "reduced_modified"

    def test_unknown_entry_is_data_error(self, capsys, tmp_path):
        manifest = tmp_path / "manifest.jsonl"
        manifest.write_text("")
        code, out, err = run(capsys, "verify", "--manifest", manifest, "--entry", "nope")
        assert code == EXIT_DATA


class TestExitCodes:
    def test_unknown_subcommand(self, capsys):
        assert run(capsys, "frobnicate")[0] == EXIT_USAGE

    def test_missing_required_argument(self, capsys):
        assert run(capsys, "render", "x.cube")[0] == EXIT_USAGE

    def test_help_exits_zero(self, capsys):
        assert run(capsys, "--help")[0] == EXIT_OK

    def test_bad_stride_text(self, capsys, cube_file, tmp_path):
        path, _ = cube_file
        code, _, err = run(capsys, "reduce", path, "-o", tmp_path / "x.cube", "--stride", "2,2")
        assert code == EXIT_USAGE

    def test_bad_size_text(self, capsys, cube_file, tmp_path):
        path, _ = cube_file
        code, _, _ = run(capsys, "render", path, "-o", tmp_path / "x.ppm", "--iso", "0", "--size", "64")
        assert code == EXIT_USAGE

    def test_malformed_cube_is_data_error(self, capsys, tmp_path):
        bad = tmp_path / "bad.cube"
        bad.write_bytes(b"c1\nc2\n    1    0.0    0.0    0.0\n")
        code, out, err = run(capsys, "inspect", bad)
        assert code == EXIT_DATA
        assert out == ""
        assert "error:" in err

    def test_missing_file_is_io_error(self, capsys, tmp_path):
        code, out, err = run(capsys, "inspect", tmp_path / "ghost.cube")
        assert code == EXIT_IO
        assert out == ""

    def test_unwritable_output_is_io_error(self, capsys, cube_file, tmp_path):
        path, _ = cube_file
        target = tmp_path / "no" / "such" / "dir" / "x.cube"
        code, _, _ = run(capsys, "reduce", path, "-o", target)
        assert code == EXIT_IO

    def test_invalid_digits_is_data_error(self, capsys, cube_file, tmp_path):
        path, _ = cube_file
        code, _, _ = run(capsys, "reduce", path, "-o", tmp_path / "x.cube", "--digits", "0")
        assert code == EXIT_DATA

    def test_incomplete_stash_policy_is_data_error(self, capsys, tmp_path):
        cfg = tmp_path / "policy.json"
        cfg.write_text(json.dumps({"mode": "move"}))
        code, out, err = run(capsys, "stash", "--policy", cfg, "--dry-run")
        assert code == EXIT_DATA
        assert out == ""
        assert "missing required keys" in err

    def test_corrupt_manifest_is_data_error(self, capsys, tmp_path):
        store = tmp_path / "bad.manifest"
        store.write_text("not json\n")
        code, out, _ = run(capsys, "verify", "--manifest", store)
        assert code == EXIT_DATA
        assert out == ""

    def test_serve_without_config_is_usage_error(self, capsys, monkeypatch):
        monkeypatch.delenv("CUBEFORGE_CONFIG", raising=False)
        assert run(capsys, "serve")[0] == EXIT_USAGE


class TestConsoleScript:
    def test_installed_entry_point(self, tmp_path, rng):
        exe = shutil.which("cubeforge")
        assert exe, "console script not installed"
        doc = make_doc(rng, dims=(3, 3, 3))
        cube = tmp_path / "t.cube"
        cube.write_bytes(write_cube(doc))
        proc = subprocess.run([exe, "inspect", str(cube)], capture_output=True, text=True)
        assert proc.returncode == 0
        assert json.loads(proc.stdout)["dims"] == [3, 3, 3]
