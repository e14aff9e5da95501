"""Batch file transfer: planning, verified execution, failure isolation."""

import hashlib
import json
import os
from pathlib import Path

import pytest

from cubeforge import (
    DestinationUnwritable,
    GlobSyntaxError,
    LocalTransport,
    SourceMissing,
    StashError,
    StashPolicy,
    execute_stash,
    plan_stash,
)
from oracles import ref_glob_filter


def seed_tree(root: Path, spec: dict[str, bytes]) -> None:
    for rel, data in spec.items():
        p = root / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_bytes(data)


@pytest.fixture
def roots(tmp_path):
    src = tmp_path / "src"
    dst = tmp_path / "dst"
    src.mkdir()
    return src, dst


def policy(src, dst, globs=("**/*.cube",), **kw):
    return StashPolicy(source_root=str(src), dest_root=str(dst), include_globs=globs, **kw)


class TestPolicy:
    def test_requires_globs(self, roots):
        src, dst = roots
        with pytest.raises(ValueError):
            policy(src, dst, globs=())

    def test_rejects_nested_roots(self, tmp_path):
        outer = tmp_path / "a"
        outer.mkdir()
        with pytest.raises(ValueError):
            policy(outer, outer / "inner")
        with pytest.raises(ValueError):
            policy(outer / "inner", outer)

    def test_move_always_verifies(self, roots):
        src, dst = roots
        assert policy(src, dst, mode="move", verify=False).must_verify
        assert not policy(src, dst, mode="copy", verify=False).must_verify

    def test_dict_round_trip(self, roots):
        src, dst = roots
        p = policy(src, dst, globs=("*.cube", "runs/**/*.dat"), mode="move")
        assert StashPolicy.from_dict(json.loads(json.dumps(p.to_dict()))) == p

    def test_from_file(self, roots, tmp_path):
        src, dst = roots
        p = policy(src, dst)
        cfg = tmp_path / "policy.json"
        cfg.write_text(json.dumps(p.to_dict()))
        assert StashPolicy.from_file(cfg) == p

    def test_from_dict_names_missing_keys(self):
        with pytest.raises(ValueError, match="source_root.*include_globs"):
            StashPolicy.from_dict({"dest_root": "perm", "mode": "move"})


class TestPlan:
    def test_sorted_by_relative_path(self, roots):
        src, dst = roots
        seed_tree(src, {"b.cube": b"b", "a/x.cube": b"x", "a.cube": b"a"})
        plan = plan_stash(policy(src, dst))
        rels = [str(Path(i.source_path).relative_to(src)) for i in plan.items]
        assert rels == sorted(rels) == ["a.cube", "a/x.cube", "b.cube"]

    def test_tree_preserved(self, roots):
        src, dst = roots
        seed_tree(src, {"runs/r1/out.cube": b"x"})
        plan = plan_stash(policy(src, dst))
        assert plan.items[0].dest_path == str(dst / "runs/r1/out.cube")

    def test_flatten_mode_and_collision(self, roots):
        src, dst = roots
        seed_tree(src, {"r1/out.cube": b"1", "r2/other.cube": b"2"})
        plan = plan_stash(policy(src, dst, preserve_tree=False))
        assert sorted(Path(i.dest_path).name for i in plan.items) == ["other.cube", "out.cube"]
        seed_tree(src, {"r2/out.cube": b"3"})
        with pytest.raises(StashError):
            plan_stash(policy(src, dst, preserve_tree=False))

    def test_no_matches_is_empty_plan(self, roots):
        src, dst = roots
        seed_tree(src, {"a.txt": b"x"})
        assert len(plan_stash(policy(src, dst))) == 0

    def test_directories_never_planned(self, roots):
        src, dst = roots
        (src / "dir.cube").mkdir()
        seed_tree(src, {"f.cube": b"x"})
        plan = plan_stash(policy(src, dst, globs=("*.cube",)))
        assert [Path(i.source_path).name for i in plan.items] == ["f.cube"]

    def test_multiple_globs_deduplicate(self, roots):
        src, dst = roots
        seed_tree(src, {"a.cube": b"x"})
        plan = plan_stash(policy(src, dst, globs=("*.cube", "a.*", "**/*.cube")))
        assert len(plan) == 1

    def test_bytes_recorded(self, roots):
        src, dst = roots
        seed_tree(src, {"a.cube": b"12345"})
        assert plan_stash(policy(src, dst)).items[0].bytes == 5

    @pytest.mark.parametrize("bad", ["", "/abs/*.cube", "../escape/*.cube", "a/../../b"])
    def test_bad_globs_rejected(self, roots, bad):
        src, dst = roots
        with pytest.raises(GlobSyntaxError):
            plan_stash(policy(src, dst, globs=(bad,)))

    def test_missing_source_root(self, tmp_path):
        with pytest.raises(SourceMissing):
            plan_stash(policy(tmp_path / "ghost", tmp_path / "dst"))

    def test_matches_reference_matcher_on_random_tree(self, roots, rng):
        src, dst = roots
        names = ["out.cube", "state.dat", "log.txt", "grid.cube"]
        dirs = ["", "r1", "r1/sub", "r2", "deep/a/b"]
        rels = []
        for d in dirs:
            for n in names:
                if rng.random() < 0.8:
                    rel = f"{d}/{n}" if d else n
                    rels.append(rel)
        seed_tree(src, {rel: rel.encode() for rel in rels})
        patterns = ("**/*.cube", "r1/*.dat")
        plan = plan_stash(policy(src, dst, globs=patterns))
        got = sorted(str(Path(i.source_path).relative_to(src)) for i in plan.items)
        assert got == ref_glob_filter(rels, list(patterns))


class TestExecute:
    def test_copy_verified(self, roots):
        src, dst = roots
        seed_tree(src, {"a.cube": b"alpha", "d/b.cube": b"beta"})
        pol = policy(src, dst)
        report = execute_stash(plan_stash(pol), pol)
        assert [r.outcome for r in report.results] == ["verified", "verified"]
        assert (dst / "a.cube").read_bytes() == b"alpha"
        assert (dst / "d/b.cube").read_bytes() == b"beta"
        assert (src / "a.cube").exists()
        assert report.totals == {"verified": 2}

    def test_copy_unverified_status(self, roots):
        src, dst = roots
        seed_tree(src, {"a.cube": b"alpha"})
        pol = policy(src, dst, verify=False)
        report = execute_stash(plan_stash(pol), pol)
        assert report.results[0].outcome == "copied"

    def test_move_removes_source_after_transfer(self, roots):
        src, dst = roots
        seed_tree(src, {"a.cube": b"alpha"})
        pol = policy(src, dst, mode="move")
        report = execute_stash(plan_stash(pol), pol)
        assert report.results[0].outcome == "moved"
        assert not (src / "a.cube").exists()
        assert (dst / "a.cube").read_bytes() == b"alpha"

    def test_copy_rerun_all_skipped(self, roots):
        src, dst = roots
        seed_tree(src, {"a.cube": b"alpha", "b.cube": b"beta"})
        pol = policy(src, dst)
        plan = plan_stash(pol)
        execute_stash(plan, pol)
        rerun = execute_stash(plan, pol)
        assert rerun.totals == {"skipped_exists": 2}

    def test_move_rerun_all_skipped(self, roots):
        src, dst = roots
        seed_tree(src, {"a.cube": b"alpha", "d/b.cube": b"beta"})
        pol = policy(src, dst, mode="move")
        plan = plan_stash(pol)
        execute_stash(plan, pol)
        rerun = execute_stash(plan, pol)  # sources are gone now
        assert rerun.totals == {"skipped_exists": 2}
        assert (dst / "a.cube").read_bytes() == b"alpha"

    def test_conflicting_destination_fails_that_item_only(self, roots):
        src, dst = roots
        seed_tree(src, {"a.cube": b"alpha", "b.cube": b"beta"})
        seed_tree(dst, {"a.cube": b"DIFFERENT"})
        pol = policy(src, dst)
        report = execute_stash(plan_stash(pol), pol)
        by_name = {Path(r.dest_path).name: r.outcome for r in report.results}
        assert by_name == {"a.cube": "failed:conflict", "b.cube": "verified"}
        assert (dst / "a.cube").read_bytes() == b"DIFFERENT"  # never clobbered

    def test_source_vanishing_between_plan_and_execute(self, roots):
        src, dst = roots
        seed_tree(src, {"a.cube": b"alpha"})
        pol = policy(src, dst)
        plan = plan_stash(pol)
        (src / "a.cube").unlink()
        report = execute_stash(plan, pol)
        assert report.results[0].outcome == "failed:source_missing"

    def test_corrupting_transport_detected_and_dest_clean(self, roots):
        src, dst = roots
        seed_tree(src, {"a.cube": b"alpha" * 100})

        class CorruptingTransport(LocalTransport):
            def copy(self, s, d):
                super().copy(s, d)
                data = bytearray(Path(d).read_bytes())
                data[0] ^= 0xFF
                Path(d).write_bytes(bytes(data))

        pol = policy(src, dst)
        report = execute_stash(plan_stash(pol), pol, transport=CorruptingTransport())
        assert report.results[0].outcome == "failed:verify_mismatch"
        assert not (dst / "a.cube").exists()
        assert list(dst.iterdir()) == []  # no temp litter

    def test_unverified_copy_misses_corruption(self, roots):
        src, dst = roots
        seed_tree(src, {"a.cube": b"alpha"})

        class SilentCorruption(LocalTransport):
            def copy(self, s, d):
                Path(d).write_bytes(b"wrong")

        pol = policy(src, dst, verify=False)
        report = execute_stash(plan_stash(pol), pol, transport=SilentCorruption())
        assert report.results[0].outcome == "copied"

    def test_oserror_during_copy_isolated(self, roots):
        src, dst = roots
        seed_tree(src, {"a.cube": b"alpha", "b.cube": b"beta"})

        class FlakyTransport(LocalTransport):
            def copy(self, s, d):
                if Path(s).name == "a.cube":
                    raise OSError("disk on fire")
                super().copy(s, d)

        pol = policy(src, dst)
        report = execute_stash(plan_stash(pol), pol, transport=FlakyTransport())
        by_name = {Path(r.dest_path).name: r.outcome for r in report.results}
        assert by_name["a.cube"].startswith("failed:")
        assert by_name["b.cube"] == "verified"

    def test_unwritable_destination_aborts_before_transfers(self, roots):
        src, dst = roots
        seed_tree(src, {"a.cube": b"alpha"})
        dst.write_bytes(b"not a directory")
        pol = policy(src, dst)
        plan = plan_stash(pol)
        with pytest.raises(DestinationUnwritable):
            execute_stash(plan, pol)
        assert (src / "a.cube").exists()

    def test_hundred_file_move_batch_integrity(self, roots, rng):
        src, dst = roots
        spec = {}
        for i in range(100):
            sub = f"run{i % 7}"
            data = rng.integers(0, 256, size=int(rng.integers(10, 2000)), dtype="u1").tobytes()
            spec[f"{sub}/f{i:03d}.cube"] = data
        seed_tree(src, spec)
        want = {rel: hashlib.sha256(data).hexdigest() for rel, data in spec.items()}
        pol = policy(src, dst, mode="move")
        report = execute_stash(plan_stash(pol), pol)
        assert report.totals == {"moved": 100}
        for rel, digest in want.items():
            assert hashlib.sha256((dst / rel).read_bytes()).hexdigest() == digest
            assert not (src / rel).exists()

    def test_results_sorted_by_dest(self, roots):
        src, dst = roots
        seed_tree(src, {"z.cube": b"1", "a.cube": b"2", "m/m.cube": b"3"})
        pol = policy(src, dst)
        report = execute_stash(plan_stash(pol), pol)
        dests = [r.dest_path for r in report.results]
        assert dests == sorted(dests)

    def test_report_json_serializable(self, roots):
        src, dst = roots
        seed_tree(src, {"a.cube": b"x"})
        pol = policy(src, dst)
        report = execute_stash(plan_stash(pol), pol)
        parsed = json.loads(json.dumps(report.to_dict()))
        assert parsed["totals"] == {"verified": 1}
