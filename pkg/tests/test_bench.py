import json

import pytest

from vstream import EngineConfig
from vstream.bench import (WorkloadSpec, checkpoints, disjoint_ranges, generate, query_model, run, update_model,
                           verify)
from vstream.cli import main

import numpy as np


class TestWorkload:
    def test_seed_determines_workload(self):
        spec = WorkloadSpec(500, "zipf", seed=7)
        assert generate(spec) == generate(spec)
        assert generate(spec) != generate(WorkloadSpec(500, "zipf", seed=8))

    def test_empty(self):
        assert generate(WorkloadSpec(0)) == []

    def test_tombstone_fraction(self):
        ups = generate(WorkloadSpec(20000, tombstones=0.1, seed=3))
        frac = sum(p is None for _, p in ups) / len(ups)
        assert 0.09 < frac < 0.11

    def test_sequential(self):
        assert [k for k, _ in generate(WorkloadSpec(10, "sequential", keyspace=4, tombstones=0))] == \
            [0, 1, 2, 3, 0, 1, 2, 3, 0, 1]

    def test_zipf_is_skewed(self):
        keys = [k for k, _ in generate(WorkloadSpec(20000, "zipf", keyspace=1000, seed=1))]
        top = np.bincount(keys).max()
        assert top > 20000 / 1000 * 20

    @pytest.mark.parametrize("kw", [{"n_updates": -1}, {"n_updates": 5, "dist": "pareto"},
                                    {"n_updates": 5, "tombstones": 1.5}, {"n_updates": 5, "keyspace": -2}])
    def test_validation(self, kw):
        with pytest.raises(ValueError):
            WorkloadSpec(**kw)


def test_checkpoints():
    assert checkpoints(0) == []
    assert checkpoints(8) == [1, 2, 4, 8]
    assert checkpoints(10) == [1, 2, 4, 8, 10]


def test_disjoint_ranges():
    keys = list(range(0, 2000, 2))
    ranges = disjoint_ranges(keys, 8, 16, np.random.default_rng(0))
    assert len(ranges) == 8
    spans = sorted(ranges)
    assert all(a[1] < b[0] for a, b in zip(spans, spans[1:]))
    assert all(sum(lo <= k <= hi for k in keys) == 16 for lo, hi in ranges)


def test_models():
    assert update_model(1024, 64) == 10 / 64
    assert query_model(16, 128, 64) == 16 + 2


class TestRun:
    def test_reports_are_reproducible(self):
        spec = WorkloadSpec(1024, seed=5)
        a, b = run(spec), run(spec)
        assert a.to_json() == b.to_json()
        assert a.to_csv() == b.to_csv()

    def test_empty_report(self):
        rep = run(WorkloadSpec(0))
        assert rep.rows == []
        assert rep.to_csv().count("\n") == 1

    def test_rows(self):
        rep = run(WorkloadSpec(4096, seed=2))
        assert [r.n for r in rep.rows] == checkpoints(4096)
        last = rep.rows[-1]
        assert rep.violations == 0
        assert last.stored >= last.n_v
        assert 1 <= last.space_ratio < 30
        assert last.query.scan_bound_ok
        assert all(r.update_blocks <= s.update_blocks for r, s in zip(rep.rows, rep.rows[1:]))

    def test_write(self, tmp_path):
        rep = run(WorkloadSpec(256))
        rep.write(tmp_path / "r.csv", tmp_path / "r.json")
        assert json.loads((tmp_path / "r.json").read_text())["spec"]["n_updates"] == 256
        assert (tmp_path / "r.csv").read_text().startswith("n,n_v,stored")


class TestVerify:
    def test_clean(self):
        res = verify(WorkloadSpec(1500, seed=4), ranges_per_version=2)
        assert res.ok, res.summary()
        assert res.events["promotion_checks"] == res.events["promotions"] > 0
        assert res.mismatches == 0

    def test_empty(self):
        assert verify(WorkloadSpec(0)).ok

    def test_fault_injection_fails_with_diagnostic(self):
        res = verify(WorkloadSpec(1500, seed=4), EngineConfig(fault="skip_merge_dedup"))
        assert not res.ok
        assert "invariant violation" in res.summary()


class TestCli:
    def test_run_to_stdout(self, capsys):
        assert main(["run", "-n", "64", "-q"]) == 0
        out = capsys.readouterr().out
        assert out.splitlines()[0].startswith("n,n_v,stored")
        assert len(out.splitlines()) == 1 + len(checkpoints(64))

    def test_run_files_and_snapshot_then_query(self, tmp_path, capsys):
        snap = tmp_path / "s.img"
        assert main(["run", "-n", "300", "-q", "--csv", str(tmp_path / "r.csv"),
                     "--json", str(tmp_path / "r.json"), "--save", str(snap), "--mode", "succ"]) == 0
        capsys.readouterr()
        assert main(["query", str(snap), "0", "20", "-v", "150", "--stats"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert "stats" in out
        assert all(0 <= k <= 20 for k, _, _ in out["entries"])

    def test_query_matches_oracle(self, tmp_path, capsys):
        from vstream.bench import generate
        from vstream.oracle import OracleLog

        snap = tmp_path / "s.img"
        main(["run", "-n", "500", "-q", "--seed", "9", "--save", str(snap)])
        capsys.readouterr()
        main(["query", str(snap), "10", "40", "-v", "321", "--compact"])
        got = json.loads(capsys.readouterr().out)["entries"]
        want = OracleLog(generate(WorkloadSpec(500, seed=9))).query(321, 10, 40)
        assert got == [[k, v, p.hex()] for k, v, p in want]

    def test_query_bad_version(self, tmp_path, capsys):
        snap = tmp_path / "s.img"
        main(["run", "-n", "50", "-q", "--save", str(snap)])
        assert main(["query", str(snap), "0", "5", "-v", "51"]) == 1

    def test_verify_exit_codes(self, capsys):
        assert main(["verify", "-n", "400", "--ranges", "1"]) == 0
        assert main(["verify", "-n", "400", "--fault", "skip_merge_dedup"]) == 1
        assert "FAIL" in capsys.readouterr().out

    def test_dump(self, capsys):
        assert main(["dump", "-n", "100", "--mode", "succ"]) == 0
        out = capsys.readouterr().out
        assert out.startswith("version 100") and "level 0" in out

    def test_config_file(self, tmp_path, capsys):
        conf = tmp_path / "e.conf"
        conf.write_text("query_mode=succ\nblock_size=16\n")
        assert main(["dump", "-n", "20", "--config", str(conf)]) == 0
        assert "mode succ" in capsys.readouterr().out

    def test_bad_spec(self, capsys):
        assert main(["run", "-n", "10", "--tombstones", "2"]) == 1
        assert "error" in capsys.readouterr().err
