import csv
import io
import json

import numpy as np
import pytest
import yaml

from genprior.harness import (
    ConfigError,
    derive_seed,
    emit_report,
    load_config,
    parse_config,
    render_report,
    run_experiment,
)
from genprior.harness.cli import SUBCOMMANDS, main
from genprior.harness.config import DEFAULTS, KINDS, default_config
from genprior.harness.runner import OUTPUTS


def cfg(**kw):
    base = {"kind": "collision_demo", "trial_count": 1}
    base.update(kw)
    return parse_config(base)


class TestConfig:
    def test_minimal(self):
        c = cfg(grid={})
        assert c.grid_points() == [{}]
        assert c.resolve({}) == DEFAULTS["collision_demo"]
        assert c.master_seed == 0

    def test_grid_order_and_product(self):
        c = parse_config({"kind": "expansion_phase", "trial_count": 2,
                          "grid": {"ratio": [2, 5], "k": [1, 2, 3]}})
        pts = c.grid_points()
        assert len(pts) == 6
        assert pts[:3] == [{"ratio": 2, "k": 1}, {"ratio": 2, "k": 2}, {"ratio": 2, "k": 3}]

    @pytest.mark.parametrize("bad", [
        {"kind": "nope", "trial_count": 1},
        {"kind": "wdc_sweep"},
        {"kind": "wdc_sweep", "trial_count": 0},
        {"kind": "wdc_sweep", "trial_count": 1, "extra": 1},
        {"kind": "wdc_sweep", "trial_count": 1, "master_seed": -1},
        {"kind": "wdc_sweep", "trial_count": 1, "master_seed": 2**64},
        {"kind": "wdc_sweep", "trial_count": 1, "params": {"pairs": 0}},
        {"kind": "wdc_sweep", "trial_count": 1, "params": {"unknown": 0}},
        {"kind": "wdc_sweep", "trial_count": 1, "grid": {"dims": []}},
        {"kind": "wdc_sweep", "trial_count": 1, "grid": {"dims": [[10, 20, 30]]}},
        {"kind": "collision_demo", "trial_count": 1, "params": {"k": 2, "rows": 4}},
        {"kind": "net_demo", "trial_count": 1, "grid": {"k": [7]}},
        {"kind": "net_demo", "trial_count": 1, "params": {"delta": 1.0}},
        {"kind": "recovery_sweep", "trial_count": 1, "params": {"noise_model": "laplace"}},
        {"kind": "landscape", "trial_count": 1, "params": {"dims": [2]}},
        {"kind": "rric_sweep", "trial_count": 1, "params": {"m": 5}, "grid": {"m": [5, 6]}},
        "not a mapping",
        None,
    ])
    def test_rejections(self, bad):
        with pytest.raises(ConfigError):
            parse_config(bad)

    def test_load_yaml(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text("kind: wdc_sweep\ntrial_count: 2\nmaster_seed: 5\ngrid:\n  dims: [[3, 9], [3, 30]]\n")
        c = load_config(path)
        assert c.kind == "wdc_sweep" and c.master_seed == 5
        assert [p["dims"] for p in c.grid_points()] == [[3, 9], [3, 30]]

    def test_load_errors(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "missing.yaml")
        (tmp_path / "bad.yaml").write_text("kind: [unclosed\n")
        with pytest.raises(ConfigError):
            load_config(tmp_path / "bad.yaml")

    def test_shipped_configs_valid(self):
        from pathlib import Path

        files = sorted((Path(__file__).parents[1] / "configs").glob("*.yaml"))
        assert {load_config(f).kind for f in files} == set(KINDS)

    def test_with_seed(self):
        assert cfg().with_seed(99).master_seed == 99
        with pytest.raises(ConfigError):
            cfg().with_seed(-1)


class TestSeeds:
    def test_stable(self):
        assert derive_seed(1, "wdc_sweep", 0, 0) == derive_seed(1, "wdc_sweep", 0, 0)

    def test_distinct(self):
        seeds = {derive_seed(m, kind, g, t) for m in (0, 1) for kind in KINDS for g in range(5) for t in range(20)}
        assert len(seeds) == 2 * len(KINDS) * 5 * 20


class TestRunExperiment:
    def test_collision_single_trial(self):
        rows = run_experiment(cfg(params={"k": 1}, grid={}, master_seed=3))
        assert len(rows) == 1
        assert rows[0]["collision_verified"] is True
        assert rows[0]["status"] == "ok"

    def test_row_shape(self):
        c = parse_config({"kind": "wdc_sweep", "trial_count": 3, "grid": {"dims": [[2, 4], [2, 8]]},
                          "params": {"pairs": 10}})
        rows = run_experiment(c)
        assert len(rows) == 6
        assert [(r["grid_index"], r["trial"]) for r in rows] == [(g, t) for g in range(2) for t in range(3)]
        assert [r["dims"] for r in rows] == ["2x4"] * 3 + ["2x8"] * 3
        assert len({r["seed"] for r in rows}) == 6
        for r in rows:
            assert set(OUTPUTS["wdc_sweep"]) <= set(r)

    def test_failures_are_recorded(self, monkeypatch):
        from genprior.harness import runner

        def flaky(p, rng):
            if p["k"] == 2:
                raise RuntimeError("boom")
            return {"rows": 1}

        monkeypatch.setitem(runner.TRIALS, "collision_demo", flaky)
        rows = run_experiment(cfg(trial_count=2, grid={"k": [1, 2, 3]}))
        assert len(rows) == 6
        failed = [r for r in rows if r["status"] == "error"]
        assert len(failed) == 2 and all(r["k"] == 2 for r in failed)
        assert failed[0]["error"] == "RuntimeError: boom"
        assert failed[0]["collision_verified"] is None

    def test_rejects_zero_threads(self):
        with pytest.raises(ValueError):
            run_experiment(cfg(), threads=0)

    def test_wdc_trend(self):
        c = parse_config({"kind": "wdc_sweep", "trial_count": 5, "master_seed": 1,
                          "grid": {"dims": [[10, 20], [10, 100], [10, 1000]]}, "params": {"pairs": 100}})
        rows = run_experiment(c)
        med = [np.median([r["max_deviation"] for r in rows if r["grid_index"] == g]) for g in range(3)]
        assert med[0] > med[1] > med[2]

    @pytest.mark.parametrize("kind", KINDS)
    def test_deterministic_across_threads(self, kind):
        c = default_config(kind, trial_count=1, master_seed=4)
        a = render_report(run_experiment(c, threads=1), "csv")
        b = render_report(run_experiment(c, threads=3), "csv")
        assert a == b
        assert "error" not in {r["status"] for r in run_experiment(c)}


class TestReport:
    ROWS = [{"a": 1, "b": 0.1, "c": True, "d": None, "e": "x"}, {"a": 2, "b": 1e-300, "c": False, "d": 3.0, "e": "y"}]

    def test_csv(self):
        text = render_report(self.ROWS[:1], "csv")
        assert text == "a,b,c,d,e\n1,0.1,true,,x\n"

    def test_csv_floats_round_trip(self):
        rows = [{"v": float(x)} for x in np.random.default_rng(0).standard_normal(50)]
        parsed = list(csv.DictReader(io.StringIO(render_report(rows, "csv"))))
        assert [float(r["v"]) for r in parsed] == [r["v"] for r in rows]

    def test_json_round_trip_bytes(self):
        text = render_report(self.ROWS, "json")
        again = render_report(json.loads(text), "json")
        assert text == again
        assert json.loads(text)[1]["b"] == 1e-300

    def test_non_finite_as_null(self):
        assert json.loads(render_report([{"v": float("nan")}], "json")) == [{"v": None}]

    def test_empty_rows(self, tmp_path):
        path = tmp_path / "r.csv"
        with pytest.raises(ValueError):
            emit_report([], "csv", path)
        assert not path.exists()

    def test_unknown_format(self):
        with pytest.raises(ValueError):
            render_report(self.ROWS, "xml")

    def test_unwritable(self, tmp_path):
        with pytest.raises(OSError):
            emit_report(self.ROWS, "csv", tmp_path / "missing" / "r.csv")

    def test_write(self, tmp_path):
        path = tmp_path / "r.json"
        emit_report(self.ROWS, "json", path)
        assert json.loads(path.read_text())[0]["e"] == "x"


class TestCli:
    def test_subcommands(self):
        assert set(SUBCOMMANDS.values()) == set(KINDS)

    def test_success(self, tmp_path):
        out = tmp_path / "r.csv"
        assert main(["collision", "--trials", "1", "--out", str(out)]) == 0
        rows = list(csv.DictReader(out.open()))
        assert len(rows) == 4 and all(r["collision_verified"] == "true" for r in rows)

    def test_config_and_seed(self, tmp_path):
        conf = tmp_path / "c.yaml"
        conf.write_text(yaml.safe_dump({"kind": "rric_sweep", "trial_count": 1, "grid": {"m": [5]},
                                        "params": {"dims": [2, 6, 12], "quadruples": 5}}))
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        assert main(["rric", "--config", str(conf), "--seed", "7", "--format", "json", "--out", str(a)]) == 0
        assert main(["rric", "--config", str(conf), "--seed", "7", "--format", "json", "--out", str(b),
                     "--threads", "2"]) == 0
        assert a.read_bytes() == b.read_bytes()
        assert json.loads(a.read_text())[0]["seed"] == derive_seed(7, "rric_sweep", 0, 0)

    def test_config_error_exit(self, tmp_path, capsys):
        conf = tmp_path / "c.yaml"
        conf.write_text("kind: rric_sweep\ntrial_count: 0\n")
        assert main(["rric", "--config", str(conf)]) == 1
        assert main(["collision", "--config", str(tmp_path / "none.yaml")]) == 1

    def test_kind_mismatch(self, tmp_path):
        conf = tmp_path / "c.yaml"
        conf.write_text("kind: rric_sweep\ntrial_count: 1\n")
        assert main(["collision", "--config", str(conf)]) == 1

    def test_bad_flags(self):
        assert main(["collision", "--format", "xml"]) == 1
        assert main(["collision", "--threads", "0"]) == 1
        assert main(["collision", "--seed", "-3"]) == 1
        assert main([]) == 1

    def test_trial_failures_exit_two(self, tmp_path, monkeypatch):
        from genprior.harness import runner

        def broken(p, rng):
            raise RuntimeError("nope")

        monkeypatch.setitem(runner.TRIALS, "collision_demo", broken)
        out = tmp_path / "r.csv"
        assert main(["collision", "--trials", "1", "--out", str(out)]) == 2
        assert len(out.read_text().splitlines()) == 5

    def test_unwritable_out(self, tmp_path):
        assert main(["collision", "--trials", "1", "--out", str(tmp_path / "no" / "r.csv")]) == 1
