import csv
import json
import os
import subprocess
import sys

import pytest
import yaml

from fractional_korn import cli
from fractional_korn.config import ConfigError, load_config, parse_config

SMALL_EST = {"sample_count": 20000, "target_rel_error": None, "rng_seed": 5}


def write_cfg(path, experiments, **top):
    data = {"estimator": SMALL_EST, "experiments": experiments, **top}
    path.write_text(yaml.safe_dump(data))
    return str(path)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def embedding(name="emb", s=0.4, p=2):
    return {"suite": "monotone_embedding", "name": name,
            "params": {"field": "bump", "domain": "disc", "s": s, "p": p}}


class TestCacheKey:
    def test_same_inputs(self):
        assert cli.cache_key("a", {"s": 0.4, "p": 2}, 1) == cli.cache_key("a", {"s": 0.4, "p": 2}, 1)

    def test_seed_changes_key(self):
        assert cli.cache_key("a", {"s": 0.4}, 1) != cli.cache_key("a", {"s": 0.4}, 2)

    def test_order_irrelevant(self):
        a = cli.cache_key("a", {"s": 0.4, "p": 2, "nested": {"x": 1, "y": 2}}, 1)
        b = cli.cache_key("a", {"nested": {"y": 2, "x": 1}, "p": 2, "s": 0.4}, 1)
        assert a == b and len(a) == 64

    def test_stable_across_processes(self):
        code = "from fractional_korn.cli import cache_key; print(cache_key('a', {'s': 0.4}, 1))"
        out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, check=True)
        assert out.stdout.strip() == cli.cache_key("a", {"s": 0.4}, 1)


class TestConfig:
    def test_empty(self):
        assert parse_config({"experiments": []}).experiments == ()
        assert parse_config(None).experiments == ()

    def test_unknown_keys(self):
        with pytest.raises(ConfigError):
            parse_config({"experiments": [], "colour": 1})
        with pytest.raises(ConfigError):
            parse_config({"experiments": [{**embedding(), "extra": 1}]})
        with pytest.raises(ConfigError):
            parse_config({"estimator": {"samples": 3}, "experiments": []})

    def test_unresolved_tags(self):
        bad = embedding()
        bad["params"]["field"] = "missing"
        with pytest.raises(ConfigError):
            parse_config({"experiments": [bad]})

    def test_duplicate_names(self):
        with pytest.raises(ConfigError):
            parse_config({"experiments": [embedding(), embedding()]})

    def test_sp_one_names_run(self):
        with pytest.raises(ConfigError, match="bad-run"):
            parse_config({"experiments": [embedding("bad-run", s=0.5, p=2)]})
        scan = {"suite": "scan", "name": "bad-scan", "grid": {"s": [0.25, 0.5], "p": [2], "L": [0.1]},
                "suites": ["constants"]}
        with pytest.raises(ConfigError, match="bad-scan"):
            parse_config({"experiments": [scan]})

    def test_seed_precedence(self):
        cfg = parse_config({"estimator": {"rng_seed": 3}, "experiments": [embedding("a"), {**embedding("b"), "seed": 9}]})
        assert [e.seed for e in cfg.experiments] == [3, 9]
        assert {e.seed for e in cfg.with_seed(4).experiments} == {4}

    def test_malformed_yaml(self, tmp_path):
        p = tmp_path / "c.yaml"
        p.write_text("experiments: [\n")
        with pytest.raises(ConfigError):
            load_config(p)

    def test_default_config_validates(self):
        cfg = load_config(cli.default_config_path())
        assert len(cfg.experiments) >= 11


class TestRun:
    def test_empty_experiments(self, tmp_path):
        cfg = write_cfg(tmp_path / "c.yaml", [])
        assert cli.main(["run", "--config", cfg, "--out", str(tmp_path / "out")]) == 0
        assert read_csv(tmp_path / "out" / "summary.csv") == [
            ["experiment", "suite", "report", "passed", "checks", "failed_checks"]]

    def test_sp_one_exit_2(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path / "c.yaml", [embedding("offender", s=0.5, p=2)])
        assert cli.main(["run", "--config", cfg, "--out", str(tmp_path / "out")]) == 2
        assert "offender" in capsys.readouterr().err
        assert not (tmp_path / "out").exists()

    def test_unknown_key_exit_2(self, tmp_path):
        cfg = write_cfg(tmp_path / "c.yaml", [], bogus=1)
        assert cli.main(["run", "--config", cfg, "--out", str(tmp_path / "out")]) == 2

    def test_outputs_and_determinism(self, tmp_path):
        exps = [embedding(), {"suite": "scan", "name": "grid", "grid": {"s": [0.25, 0.4], "p": [2, 3], "L": [0.1]},
                              "suites": ["constants"]}]
        cfg = write_cfg(tmp_path / "c.yaml", exps)
        for out in ("a", "b"):
            assert cli.main(["run", "--config", cfg, "--out", str(tmp_path / out)]) == 0
        for rel in ("reports/emb.json", "reports/grid.json", "summary.csv", "scans/grid.csv"):
            assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()
        rows = read_csv(tmp_path / "a" / "scans" / "grid.csv")
        assert rows[0][:5] == ["suite", "s", "p", "L", "passed"] and len(rows) == 5
        man = json.loads((tmp_path / "a" / "manifest.json").read_text())
        assert man["passed"] and {e["seed"] for e in man["experiments"]} == {5}
        assert "started" in man["timestamps"] and man["backend"] in ("numba", "numpy")

    def test_seed_override(self, tmp_path):
        cfg = write_cfg(tmp_path / "c.yaml", [embedding()])
        cli.main(["run", "--config", cfg, "--out", str(tmp_path / "a")])
        cli.main(["run", "--config", cfg, "--out", str(tmp_path / "b"), "--seed-override", "77"])
        a = json.loads((tmp_path / "a" / "reports" / "emb.json").read_text())
        b = json.loads((tmp_path / "b" / "reports" / "emb.json").read_text())
        assert b["reports"][0]["seed"] == 77 and a["cache_key"] != b["cache_key"]
        assert a["reports"][0]["measurements"] != b["reports"][0]["measurements"]

    def test_cache_reuse(self, tmp_path):
        cfg = write_cfg(tmp_path / "c.yaml", [embedding()], cache="reuse")
        out = tmp_path / "out"
        cli.main(["run", "--config", cfg, "--out", str(out)])
        first = (out / "reports" / "emb.json").read_bytes()
        summary = (out / "summary.csv").read_bytes()
        cli.main(["run", "--config", cfg, "--out", str(out)])
        man = json.loads((out / "manifest.json").read_text())
        assert man["experiments"][0]["cached"]
        assert (out / "reports" / "emb.json").read_bytes() == first
        assert (out / "summary.csv").read_bytes() == summary
        # a changed seed invalidates the entry
        cli.main(["run", "--config", cfg, "--out", str(out), "--seed-override", "6"])
        assert not json.loads((out / "manifest.json").read_text())["experiments"][0]["cached"]

    def test_jobs_pool_matches_sequential(self, tmp_path):
        cfg = write_cfg(tmp_path / "c.yaml", [embedding("a"), embedding("b", s=0.3, p=3)])
        cli.main(["run", "--config", cfg, "--out", str(tmp_path / "seq")])
        cli.main(["run", "--config", cfg, "--out", str(tmp_path / "par"), "--jobs", "2"])
        for n in ("a", "b"):
            assert ((tmp_path / "seq" / "reports" / f"{n}.json").read_bytes()
                    == (tmp_path / "par" / "reports" / f"{n}.json").read_bytes())

    def test_bad_jobs_env(self, tmp_path, monkeypatch):
        cfg = write_cfg(tmp_path / "c.yaml", [])
        monkeypatch.setenv(cli.JOBS_ENV, "many")
        assert cli.main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == 2


class TestReport:
    def test_single_passing(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path / "c.yaml", [embedding()])
        cli.main(["run", "--config", cfg, "--out", str(tmp_path / "o")])
        capsys.readouterr()
        assert cli.main(["report", str(tmp_path / "o")]) == 0
        out = capsys.readouterr().out.splitlines()
        assert out[0] == "1 report(s), 0 failing" and out[1].startswith("PASS  emb")

    def test_failures_first(self, tmp_path, capsys):
        # a hardy_value run with a wrong reference fails its hard check
        bad = {"suite": "hardy_value", "name": "wrong-reference",
               "params": {"field": {"kind": "bump", "radius": 1.0, "power": 1}, "domain": "disc", "s": 0.4, "p": 2,
                          "expected": 3.0}}
        cfg = write_cfg(tmp_path / "c.yaml", [embedding(), bad])
        assert cli.main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == 1
        capsys.readouterr()
        assert cli.main(["report", str(tmp_path / "o")]) == 1
        lines = [l for l in capsys.readouterr().out.splitlines() if not l.startswith(" ")]
        assert lines[1].startswith("FAIL  wrong-reference") and lines[2].startswith("PASS  emb")

    def test_plot_tables(self, tmp_path):
        scan = {"suite": "scan", "name": "c", "grid": {"s": [0.4], "p": [2], "L": [0.05, 0.1, 0.2]},
                "suites": ["constants"]}
        cfg = write_cfg(tmp_path / "c.yaml", [scan, embedding()])
        cli.main(["run", "--config", cfg, "--out", str(tmp_path / "o")])
        cli.report(tmp_path / "o", stream=open(os.devnull, "w"))
        c2 = read_csv(tmp_path / "o" / "plots" / "c2_vs_L.csv")
        assert c2[0] == ["d", "s", "p", "L", "C_K", "c1", "c2"] and len(c2) == 4
        vals = [float(r[-1]) for r in c2[1:]]
        assert vals == sorted(vals)
        assert len(read_csv(tmp_path / "o" / "plots" / "korn_ratio_vs_s.csv")) == 2

    def test_missing_manifest(self, tmp_path, capsys):
        assert cli.main(["report", str(tmp_path)]) == 2
        (tmp_path / "manifest.json").write_text("{not json")
        assert cli.main(["report", str(tmp_path)]) == 2


class TestOneOffCommands:
    def test_constants(self, capsys):
        assert cli.main(["constants", "--s", "0.4", "--p", "2", "--L", "0.1"]) == 0
        rec = json.loads(capsys.readouterr().out)
        assert rec["c1"] == pytest.approx(4.5138, rel=1e-4)
        assert rec["c2"] == pytest.approx(0.045138, rel=1e-4)

    def test_constants_sp_one(self, capsys):
        assert cli.main(["constants", "--s", "0.5", "--p", "2", "--L", "0.1"]) == 2

    def test_seminorm(self, capsys):
        argv = ["seminorm", "--field", '{"kind": "skew"}', "--s", "0.4", "--p", "2", "--samples", "20000"]
        assert cli.main(argv) == 0
        rec = json.loads(capsys.readouterr().out)
        assert rec["projected"]["value"] < 1e-10 < rec["gagliardo"]["value"]

    def test_seminorm_bad_spec(self, capsys):
        assert cli.main(["seminorm", "--field", "nope", "--s", "0.4", "--p", "2"]) == 2
        assert cli.main(["seminorm", "--field", "{bad", "--s", "0.4", "--p", "2"]) == 2

    def test_console_script(self):
        out = subprocess.run([sys.executable, "-m", "fractional_korn.cli", "--version"], capture_output=True,
                             text=True)
        assert out.returncode == 0 and out.stdout.strip() == cli.__version__
