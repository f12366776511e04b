import json

import numpy as np
import pytest

from gossipavg.cli import main, parse_graph_spec, parse_grid
from gossipavg.graphs import build_named_graph


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestSpecParsing:
    def test_graph_shorthands(self):
        assert parse_graph_spec("ring:10").n == 10
        assert parse_graph_spec("torus:3,4").n == 12
        assert parse_graph_spec("hypercube:3").n == 8
        g = parse_graph_spec("cayley:5:1|4")
        assert np.array_equal(g.adjacency, build_named_graph("ring", [5]).adjacency)
        g2 = parse_graph_spec("cayley:3x3:1,0|2,0|0,1|0,2")
        assert g2.n == 9 and np.all(g2.in_degrees == 4)
        rgg = parse_graph_spec("rgg:20:auto:7")
        assert rgg.n == 20 and rgg.meta["family"] == "rgg"

    def test_graph_file(self, tmp_path):
        g = build_named_graph("ring", [7])
        path = tmp_path / "g.json"
        g.save(path)
        g2 = parse_graph_spec(str(path))
        assert np.array_equal(g.adjacency, g2.adjacency)

    def test_bad_specs(self):
        with pytest.raises(ValueError):
            parse_graph_spec("smallworld:10")
        with pytest.raises(ValueError):
            parse_graph_spec("ring")
        with pytest.raises(ValueError):
            parse_graph_spec("rgg:20")

    def test_grids(self):
        assert np.allclose(parse_grid("0.1,0.2,0.5"), [0.1, 0.2, 0.5])
        assert np.allclose(parse_grid("0.1:0.9:9"), np.linspace(0.1, 0.9, 9))
        assert parse_grid("10:1000:3:log", integer=True) == [10, 100, 1000]
        with pytest.raises(ValueError):
            parse_grid("0.1:0.9")


class TestAnalyze:
    def test_complete30_closed_forms(self, capsys, tmp_path):
        code, out, _ = run_cli(
            capsys, "analyze", "--graph", "complete:30", "--algo", "bga", "--q", "0.5",
            "--out", str(tmp_path),
        )
        assert code == 0
        assert "R=0.25" in out
        assert "trB=0.322222222222" in out
        payload = json.loads((tmp_path / "summary.json").read_text())
        assert payload["rate"] == pytest.approx(0.25, abs=1e-12)
        assert payload["trB"] == pytest.approx((1 / 3) * (29 / 30), abs=1e-12)
        assert payload["method"] == "closed_form"

    def test_cbga_ring_sandwich_and_flags(self, capsys, tmp_path):
        code, out, _ = run_cli(
            capsys, "analyze", "--graph", "ring:30", "--algo", "cbga", "--q", "0.5",
            "--p", "0.3333", "--out", str(tmp_path),
        )
        assert code == 0
        payload = json.loads((tmp_path / "summary.json").read_text())
        assert payload["lower"] - 1e-10 <= payload["rate"] <= payload["upper"] + 1e-10
        assert any("8*pi" in f for f in payload["discrepancy_flags"])
        assert "note:" in out

    def test_validation_error_exit_two(self, capsys, tmp_path):
        code, _, err = run_cli(
            capsys, "analyze", "--graph", "ring:30", "--algo", "bga", "--q", "1.5",
            "--out", str(tmp_path),
        )
        assert code == 2
        assert "q must lie in" in err


class TestSimulate:
    def test_deterministic_bytes(self, capsys, tmp_path):
        outs = []
        for sub in ("a", "b"):
            out = tmp_path / sub
            code, _, _ = run_cli(
                capsys, "simulate", "--graph", "ring:10", "--algo", "bga", "--q", "0.5",
                "--seed", "7", "--x0", "random-normal", "--out", str(out), "--no-plots",
            )
            assert code == 0
            outs.append((out / "trajectory.csv").read_bytes())
        assert outs[0] == outs[1]

    def test_constant_start(self, capsys, tmp_path):
        code, out, _ = run_cli(
            capsys, "simulate", "--graph", "ring:8", "--algo", "bga", "--q", "0.5",
            "--x0", "constant:3", "--out", str(tmp_path), "--no-plots",
        )
        assert code == 0
        assert "stop=consensus steps=0" in out

    def test_full_record_and_figure(self, capsys, tmp_path):
        code, _, _ = run_cli(
            capsys, "simulate", "--graph", "ring:6", "--algo", "cbga", "--q", "0.5",
            "--p", "0.3", "--record", "full", "--max-steps", "5000", "--out", str(tmp_path),
        )
        assert code == 0
        header = (tmp_path / "trajectory.csv").read_text().splitlines()[1]
        assert header.endswith("x_5")
        assert (tmp_path / "trajectory.svg").exists()
        meta = json.loads((tmp_path / "trajectory_meta.json").read_text())
        assert meta["record"] == "full"


class TestManifest:
    def test_rerun_from_manifest_identical(self, capsys, tmp_path):
        first = tmp_path / "first"
        code, _, _ = run_cli(
            capsys, "sweep", "--graph", "ring:12", "--algo", "bga",
            "--q-grid", "0.2,0.5,0.8", "--out", str(first), "--no-plots",
        )
        assert code == 0
        second = tmp_path / "second"
        code, _, _ = run_cli(
            capsys, "--from-manifest", str(first / "manifest.json"), "--out", str(second)
        )
        assert code == 0
        assert (first / "sweep.csv").read_bytes() == (second / "sweep.csv").read_bytes()

    def test_manifest_content(self, capsys, tmp_path):
        run_cli(
            capsys, "analyze", "--graph", "ring:8", "--algo", "bga", "--q", "0.3",
            "--out", str(tmp_path), "--no-plots",
        )
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["tool"] == "gossipavg"
        assert manifest["command"] == "analyze"
        assert manifest["options"]["q"] == 0.3


class TestGraphCommand:
    def test_export_and_inspect(self, capsys, tmp_path):
        code, out, _ = run_cli(capsys, "graph", "--graph", "torus:3,3", "--out", str(tmp_path))
        assert code == 0
        assert "connected=true" in out and "symmetric=true" in out
        payload = json.loads((tmp_path / "graph.json").read_text())
        assert payload["n"] == 9 and len(payload["edges"]) == 36
        assert payload["cayley"]["moduli"] == [3, 3]


class TestExperimentsCommands:
    def test_sweep_csv_schema(self, capsys, tmp_path):
        code, _, _ = run_cli(
            capsys, "sweep", "--graph", "complete:12", "--algo", "cbga",
            "--q-grid", "0.5", "--p-grid", "0.1,0.2", "--out", str(tmp_path),
        )
        assert code == 0
        lines = (tmp_path / "sweep.csv").read_text().splitlines()
        assert lines[0] == "# schema: gossipavg.sweep.v1"
        assert lines[1] == "q,p,rate,lower,upper,trB,method"
        assert len(lines) == 4
        assert (tmp_path / "sweep.svg").exists() and (tmp_path / "tradeoff.svg").exists()

    def test_scaling_command(self, capsys, tmp_path):
        code, out, _ = run_cli(
            capsys, "scaling", "--family", "ring", "--algo", "bga", "--q", "0.5",
            "--sizes", "32,64,128", "--out", str(tmp_path), "--no-plots",
        )
        assert code == 0
        assert "slopes" in out
        lines = (tmp_path / "scaling.csv").read_text().splitlines()
        assert lines[1] == "N,R,one_minus_R,trB,pi0,esr_C,esr_gap"
        summary = json.loads((tmp_path / "scaling_summary.json").read_text())
        assert summary["fits"]["one_minus_R"]["slope"] == pytest.approx(-3.0, abs=0.3)

    def test_optimal_p_command(self, capsys, tmp_path):
        code, out, _ = run_cli(
            capsys, "optimal-p", "--family", "complete", "--n", "20", "--q", "0.5",
            "--out", str(tmp_path), "--no-plots",
        )
        assert code == 0
        summary = json.loads((tmp_path / "optimal_p_summary.json").read_text())
        assert abs(summary["p_argmin"] - 0.05) <= 0.011

    def test_democracy_command(self, capsys, tmp_path):
        code, out, _ = run_cli(
            capsys, "democracy", "--family", "ring", "--algo", "bga", "--q", "0.5",
            "--sizes", "17,33,65,129", "--out", str(tmp_path), "--no-plots",
        )
        assert code == 0
        assert "verdict=vanishing" in out

    def test_rgg_bias_command(self, capsys, tmp_path):
        code, out, _ = run_cli(
            capsys, "rgg-bias", "--n-list", "30,50", "--runs", "30", "--algo", "bga",
            "--q", "0.5", "--seed", "3", "--out", str(tmp_path), "--no-plots",
        )
        assert code == 0
        lines = (tmp_path / "rgg_bias.csv").read_text().splitlines()
        assert lines[1] == "family,N,mean_beta,se,runs,discards"
        assert any(line.startswith("complete,") for line in lines)

    def test_verify_command(self, capsys, tmp_path):
        code, out, _ = run_cli(
            capsys, "verify", "--graph", "ring:10", "--algo", "cbga", "--q", "0.5",
            "--p", "0.3", "--samples", "800", "--out", str(tmp_path), "--no-plots",
        )
        assert code == 0
        assert "[PASS]" in out and "[FAIL]" not in out

    def test_unknown_command_exits_2(self, capsys, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2


class TestEnvOutdir:
    def test_default_outdir_env(self, capsys, tmp_path, monkeypatch):
        monkeypatch.setenv("GOSSIPAVG_OUTDIR", str(tmp_path / "envout"))
        code, _, _ = run_cli(capsys, "graph", "--graph", "ring:5")
        assert code == 0
        assert (tmp_path / "envout" / "graph.json").exists()
