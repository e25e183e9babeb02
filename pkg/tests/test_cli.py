from __future__ import annotations

import argparse
import csv
import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from squeezedjc import cli
from squeezedjc.dynamics import ground_prob_jcm
from squeezedjc.errors import ConfigError


def run(tmp_path: Path, *argv: str, name: str = "out") -> tuple[int, Path]:
    out = tmp_path / name
    return cli.main([*argv, "--out", str(out)]), out


def read_csv(path: Path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


def manifest(out: Path) -> dict:
    return json.loads((out / "manifest.json").read_text())


def args_for(*argv: str) -> argparse.Namespace:
    return cli.build_parser().parse_args(list(argv))


class TestConfig:
    def test_defaults_filled(self, tmp_path):
        f = tmp_path / "c.json"
        f.write_text(json.dumps({"command": "revival", "params": {"b": 2}, "t_max": 30, "t_steps": 3000}))
        cfg = cli.parse_config(args_for("revival", "--config", str(f)))
        p = cfg.model()
        assert (p.a, p.r, p.lam, p.delta, p.b) == (0.0, 0.0, 1.0, 0.0, 2.0)
        assert cfg.t_steps == 3000 and cfg.t_max == 30.0
        assert cfg.snapshot()["params"]["lambda"] == 1.0

    def test_unknown_key_named(self, tmp_path):
        f = tmp_path / "c.json"
        f.write_text(json.dumps({"command": "revival", "betta": 2}))
        with pytest.raises(ConfigError, match="betta"):
            cli.parse_config(args_for("revival", "--config", str(f)))

    def test_unknown_param_named(self):
        with pytest.raises(ConfigError, match="gamma"):
            cli.config_from_dict({"params": {"gamma": 1}})

    def test_flag_overrides_file(self, tmp_path):
        f = tmp_path / "c.json"
        f.write_text(json.dumps({"params": {"b": 2, "r": 0.1}}))
        cfg = cli.parse_config(args_for("revival", "--config", str(f), "--b", "5"))
        assert cfg.params == {"b": 5.0, "r": 0.1}

    @pytest.mark.parametrize(
        "data",
        [{"t_steps": 1}, {"t_steps": 2.5}, {"tail_target": 0.5}, {"params": {"b": -1}}, {"params": {"b": "two"}},
         {"truncation": {"retained": 64, "buffer": 32}}, {"emit_svg": "yes"}, {"hamiltonian": "rwa"}],
    )
    def test_invalid_values(self, data):
        with pytest.raises(ConfigError):
            cli.validate_config(cli.RunConfig(command="revival", **cli.config_from_dict(data)))

    def test_axes_forms(self):
        kw = cli.config_from_dict({"sweep_axes": [{"field": "r", "values": [0, 0.1]}]})
        assert kw["sweep_axes"] == (("r", (0.0, 0.1)),)
        with pytest.raises(ConfigError):
            cli.config_from_dict({"sweep_axes": [{"field": "q", "values": [1]}]})
        with pytest.raises(ConfigError):
            cli.config_from_dict({"sweep_axes": [{"field": "r", "values": []}]})

    def test_bad_json(self, tmp_path):
        f = tmp_path / "c.json"
        f.write_text("{not json")
        assert cli.main(["bn", "--config", str(f), "--out", str(tmp_path / "o")]) == cli.EXIT_CONFIG


class TestBn:
    def test_poisson_row(self, tmp_path):
        code, out = run(tmp_path, "bn", "--b", "2", "--r", "0")
        assert code == 0
        header, rows = read_csv(out / "bn.csv")
        assert header == ["n", "re_bn", "im_bn", "abs2_bn"]
        assert rows[1, 3] == pytest.approx(4 * math.exp(-4), rel=1e-12)

    def test_normalised(self, tmp_path):
        code, out = run(tmp_path, "bn", "--a", "10", "--b", "2", "--r", "0.1")
        assert code == 0
        _, rows = read_csv(out / "bn.csv")
        assert abs(math.fsum(rows[:, 3]) - 1) < 1e-6

    def test_degenerate_even_support(self, tmp_path):
        a = 2 * math.exp(0.5)
        code, out = run(tmp_path, "bn", "--a", repr(a), "--b", "2", "--r", "0.5")
        assert code == 0
        _, rows = read_csv(out / "bn.csv")
        assert np.all(rows[1::2, 3] == 0.0)
        assert np.any(rows[2::2, 3] > 0)

    def test_round_trip_is_exact(self, tmp_path):
        from squeezedjc.states import ModelParams, build_series

        code, out = run(tmp_path, "bn", "--a", "3", "--b", "2", "--r", "0.3", "--chi", "0.7", "--theta", "0.7", "--phi", "1.4")
        assert code == 0
        _, rows = read_csv(out / "bn.csv")
        s = build_series(ModelParams(a=3, theta=0.7, r=0.3, phi=1.4, b=2, chi=0.7))
        assert np.array_equal(rows[:, 1] + 1j * rows[:, 2], s.coefficients)

    def test_convergence_failure(self, tmp_path):
        code, out = run(tmp_path, "bn", "--a", "9.5", "--b", "2", "--r", "2.8")
        assert code == cli.EXIT_CONVERGENCE
        m = manifest(out)
        assert m["status"] == "failed" and "achieved_mass" in m["diagnostics"]


class TestRevival:
    def test_coherent_curve(self, tmp_path):
        code, out = run(tmp_path, "revival", "--b", "2", "--t-max", "30", "--t-steps", "3001")
        assert code == 0
        _, rows = read_csv(out / "p_scoh.csv")
        assert rows[0, 1] == pytest.approx(1.0, abs=1e-8)
        t, p = rows[:, 0], rows[:, 1]
        win = (t > 4 * math.pi - 3) & (t < 4 * math.pi + 3)
        assert abs(t[win][np.argmax(p[win])] - 4 * math.pi) < 2

    def test_comparison_and_plots(self, tmp_path):
        code, out = run(tmp_path, "revival", "--a", "15", "--b", "5", "--compare-jcm", "--svg", "--t-steps", "601")
        assert code == 0
        for name in ("p_scoh.csv", "p_coh.csv", "p_scoh.svg", "p_coh.svg"):
            assert name in manifest(out)["files"]
        _, a = read_csv(out / "p_scoh.csv")
        _, b = read_csv(out / "p_coh.csv")
        assert np.max(np.abs(a[:, 1] - b[:, 1])) > 0.1
        assert manifest(out)["diagnostics"]["max_abs_difference"] > 0.1

    def test_vacuum(self, tmp_path):
        code, out = run(tmp_path, "revival", "--b", "0", "--t-steps", "11")
        assert code == 0
        _, rows = read_csv(out / "p_scoh.csv")
        assert np.all(rows[:, 1] == 1.0)


class TestEvolve:
    def test_two_rows(self, tmp_path):
        code, out = run(tmp_path, "evolve", "--b", "2", "--t-steps", "2", "--t-max", "1", "--retained", "64")
        assert code == 0
        _, rows = read_csv(out / "p_evolve.csv")
        assert rows.shape == (2, 2)
        assert rows[0, 1] == pytest.approx(1.0, abs=1e-12)

    def test_matches_jcm(self, tmp_path):
        code, out = run(tmp_path, "evolve", "--b", "2", "--t-max", "10", "--t-steps", "1001", "--retained", "128")
        assert code == 0
        _, rows = read_csv(out / "p_evolve.csv")
        ref = ground_prob_jcm(2.0, 1.0, rows[:, 0]).values
        assert np.max(np.abs(rows[:, 1] - ref)) < 1e-6

    def test_escalation_recorded(self, tmp_path):
        code, out = run(tmp_path, "evolve", "--b", "1", "--r", "2.3", "--t-max", "5", "--t-steps", "51", "--retained", "128")
        assert code == 0
        d = manifest(out)["diagnostics"]
        assert d["retained_used"] > 128 and len(d["escalations"]) >= 1

    def test_ceiling_exit(self, tmp_path):
        code, out = run(tmp_path, "evolve", "--b", "1", "--r", "2.3", "--t-max", "20", "--t-steps", "21", "--retained", "1024")
        assert code == cli.EXIT_TRUNCATION
        assert manifest(out)["status"] == "failed"

    def test_quadrature_route(self, tmp_path):
        code, out = run(tmp_path, "evolve", "--b", "1", "--r", "2.3", "--phi", "3.141592653589793",
                        "--hamiltonian", "ultrastrong-quadrature", "--t-max", "10", "--t-steps", "101")
        assert code == 0
        _, rows = read_csv(out / "p_evolve.csv")
        assert rows[0, 1] == pytest.approx(1.0)


class TestValidateCommand:
    def test_fast_suite_passes(self, tmp_path):
        code, out = run(tmp_path, "validate", "--suite", "fast")
        assert code == 0
        report = json.loads((out / "validate.json").read_text())
        assert report and all(v["pass"] for v in report.values())

    def test_mutation_detected(self, tmp_path):
        code, out = run(tmp_path, "validate", "--suite", "fast", "--inject-mutation", "drop_chi_phase")
        assert code == cli.EXIT_VALIDATION
        assert manifest(out)["diagnostics"]["injected_mutations"] == ["drop_chi_phase"]

    def test_unknown_mutation(self, tmp_path):
        code, _ = run(tmp_path, "validate", "--inject-mutation", "nothing")
        assert code == cli.EXIT_CONFIG


class TestSweep:
    def test_grid(self, tmp_path):
        code, out = run(tmp_path, "sweep", "--axis", "r=0,0.1,0.9", "--axis", "b=2,5", "--t-steps", "101", "--t-max", "10")
        assert code == 0
        subdirs = sorted(p.name for p in out.iterdir() if p.is_dir())
        assert len(subdirs) == 6
        assert "r=0.1_b=2.0" in subdirs
        m = manifest(out)
        assert m["diagnostics"]["points"] == 6
        assert all(f"{d}/p_scoh.csv" in m["files"] for d in subdirs)

    def test_parallel_matches_serial(self, tmp_path):
        axes = ("--axis", "r=0,0.2", "--axis", "a=0,1", "--t-steps", "51", "--t-max", "5")
        c1, o1 = run(tmp_path, "sweep", *axes, name="serial")
        c2, o2 = run(tmp_path, "sweep", *axes, "--jobs", "2", name="parallel")
        assert c1 == c2 == 0
        assert manifest(o1)["files"] == manifest(o2)["files"]

    def test_empty_axes(self, tmp_path):
        code, _ = run(tmp_path, "sweep")
        assert code == cli.EXIT_CONFIG

    def test_failing_point_sets_exit(self, tmp_path):
        code, out = run(tmp_path, "sweep", "--sweep-command", "bn", "--axis", "r=0,2.8", "--a", "9.5", "--b", "2")
        assert code == cli.EXIT_CONVERGENCE
        runs = manifest(out)["diagnostics"]["runs"]
        assert [r["status"] for r in runs] == ["ok", "failed"]


class TestArtifacts:
    def test_deterministic_bytes(self, tmp_path):
        argv = ("revival", "--a", "10", "--b", "2", "--r", "0.1", "--t-steps", "301", "--compare-jcm", "--svg")
        _, o1 = run(tmp_path, *argv, name="one")
        _, o2 = run(tmp_path, *argv, name="two")
        for name in ("p_scoh.csv", "p_coh.csv", "p_scoh.svg"):
            assert (o1 / name).read_bytes() == (o2 / name).read_bytes()
        assert manifest(o1)["files"] == manifest(o2)["files"]

    def test_manifest_complete(self, tmp_path):
        code, out = run(tmp_path, "revival", "--b", "2", "--t-steps", "11", "--svg")
        m = manifest(out)
        for key in ("version", "backend", "status", "config", "files", "diagnostics", "duration_seconds"):
            assert key in m
        on_disk = {p.name for p in out.iterdir() if p.name != "manifest.json"}
        assert set(m["files"]) == on_disk
        for name, entry in m["files"].items():
            assert entry["sha256"] == cli.sha256(out / name)

    def test_csv_full_precision(self, tmp_path):
        path = tmp_path / "x.csv"
        vals = np.array([0.1, 1 / 3, 2.0**-60])
        cli.write_csv(path, ["k", "v"], [np.arange(3), vals])
        raw = path.read_bytes()
        assert b"\r" not in raw
        _, rows = read_csv(path)
        assert np.array_equal(rows[:, 1], vals)


def test_console_script(tmp_path):
    out = subprocess.run(
        [sys.executable, "-m", "squeezedjc", "bn", "--b", "1", "--out", str(tmp_path / "o")],
        capture_output=True, text=True,
    )
    assert out.returncode == 0
    assert (tmp_path / "o" / "bn.csv").exists()


def test_version_flag(capsys):
    with pytest.raises(SystemExit):
        cli.build_parser().parse_args(["--version"])
    assert "squeezedjc" in capsys.readouterr().out
