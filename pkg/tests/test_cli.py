"""Command-line surface: exit codes, files, determinism, replay."""

import json
import os

import numpy as np
import pytest

from gneforge.cli import main, EXIT_OK, EXIT_INVALID, EXIT_NONCONV


def run_cli(*argv):
    return main(list(argv))


@pytest.fixture
def game_file(tmp_path):
    path = tmp_path / "game.json"
    assert run_cli("generate", "--seed", "9", "--out", str(path)) == EXIT_OK
    return path


# ---------------------------------------------------------------------------
# generate
# ---------------------------------------------------------------------------

def test_generate_writes_instance(tmp_path, capsys):
    out = tmp_path / "g.json"
    assert run_cli("generate", "--seed", "3", "--out", str(out)) == EXIT_OK
    said = capsys.readouterr().out
    assert "N=8" in said and "m=3" in said
    doc = json.loads(out.read_text())
    assert len(doc["agents"]) == 8


def test_generate_is_byte_deterministic(tmp_path):
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    run_cli("generate", "--seed", "5", "--out", str(a))
    run_cli("generate", "--seed", "5", "--out", str(b))
    assert a.read_bytes() == b.read_bytes()
    c = tmp_path / "c.json"
    run_cli("generate", "--seed", "6", "--out", str(c))
    assert a.read_bytes() != c.read_bytes()


def test_generate_rejects_degenerate_sizes(capsys):
    assert run_cli("generate", "--n", "1", "--m", "0") == EXIT_INVALID
    assert "error:" in capsys.readouterr().err


def test_env_seed_wins(tmp_path, monkeypatch):
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    monkeypatch.setenv("GNE_FORGE_SEED", "11")
    run_cli("generate", "--seed", "1", "--out", str(a))
    run_cli("generate", "--seed", "2", "--out", str(b))
    assert a.read_bytes() == b.read_bytes()
    monkeypatch.setenv("GNE_FORGE_SEED", "oops")
    assert run_cli("generate", "--out", str(a)) == EXIT_INVALID


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------

def test_solve_sync_writes_everything(tmp_path, game_file, capsys):
    trace = tmp_path / "trace.csv"
    summary = tmp_path / "summary.json"
    plot = tmp_path / "plot.svg"
    code = run_cli("solve", "--game", str(game_file), "--algorithm",
                   "sd-geno", "--tol", "1e-6", "--trace", str(trace),
                   "--summary", str(summary), "--plot", str(plot))
    assert code == EXIT_OK
    doc = json.loads(summary.read_text())
    assert doc["algorithm"] == "sd-geno"
    assert doc["converged"] is True
    assert max(doc["residuals"].values()) <= 1e-6
    assert doc["iterations"] >= 1
    assert doc["steps"]["rho"] == 1.0
    # stdout carries the same JSON
    assert json.loads(capsys.readouterr().out)["converged"] is True
    header = trace.read_text().splitlines()[0]
    assert header == ("iter,rel_dist_to_opt,disagreement,violation,"
                      "kkt_primal,kkt_dual")
    svg = plot.read_text()
    assert svg.startswith("<svg") and "dual disagreement" in svg


@pytest.mark.parametrize("algorithm", ["ad-geed", "ad-geno"])
def test_solve_async_summary(tmp_path, game_file, algorithm, capsys):
    summary = tmp_path / "s.json"
    code = run_cli("solve", "--game", str(game_file), "--algorithm",
                   algorithm, "--tol", "1e-5", "--scenario", "A",
                   "--summary", str(summary))
    assert code == EXIT_OK
    capsys.readouterr()
    doc = json.loads(summary.read_text())
    assert doc["algorithm"] == algorithm
    assert doc["epochs"] >= 1
    assert doc["activations"] >= doc["epochs"]
    assert doc["backend"] in ("python", "cython")
    assert doc["max_realized_delay"] == 0


def test_solve_nonconvergence_exit_code(game_file, capsys):
    code = run_cli("solve", "--game", str(game_file), "--algorithm",
                   "sd-geno", "--tol", "1e-12", "--max-iter", "50")
    assert code == EXIT_NONCONV
    assert json.loads(capsys.readouterr().out)["converged"] is False


def test_solve_trace_bytes_reproducible(tmp_path, game_file, capsys):
    t1 = tmp_path / "t1.csv"
    t2 = tmp_path / "t2.csv"
    for t in (t1, t2):
        code = run_cli("solve", "--game", str(game_file), "--algorithm",
                       "ad-geno", "--scenario", "B", "--seed", "4",
                       "--tol", "1e-4", "--trace", str(t))
        assert code == EXIT_OK
    capsys.readouterr()
    assert t1.read_bytes() == t2.read_bytes()


def test_eta_gate_and_unsafe(game_file, capsys):
    # synchronous bound is exclusive: asking for eta at the bound is refused
    code = run_cli("solve", "--game", str(game_file), "--algorithm",
                   "sd-geno", "--eta", "5.0")
    assert code == EXIT_INVALID
    assert "eta" in capsys.readouterr().err
    # ...unless forced, which is allowed to end in non-convergence
    code = run_cli("solve", "--game", str(game_file), "--algorithm",
                   "sd-geno", "--eta", "5.0", "--unsafe", "--max-iter", "200")
    assert code in (EXIT_OK, EXIT_NONCONV)
    capsys.readouterr()


def test_scenario_and_custom_validation(game_file, capsys):
    code = run_cli("solve", "--game", str(game_file), "--scenario", "Z")
    assert code == EXIT_INVALID
    code = run_cli("solve", "--game", str(game_file), "--algorithm",
                   "ad-geno", "--scenario", "custom", "--probs",
                   "0.5,0.5,0.5", "--tol", "1e-3")
    assert code == EXIT_INVALID  # probabilities must sum to one (8 agents)
    capsys.readouterr()


def test_custom_scenario_round_robin(game_file, capsys):
    code = run_cli("solve", "--game", str(game_file), "--algorithm",
                   "ad-geno", "--scenario", "custom", "--round-robin",
                   "--delay-mode", "fixed", "--phi", "1", "--tol", "1e-4")
    assert code == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["max_realized_delay"] == 1


def test_config_file_with_flag_precedence(tmp_path, game_file, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"algorithm": "ad-geed", "tol": 1e-3,
                               "scenario": "A"}))
    code = run_cli("solve", "--game", str(game_file), "--config", str(cfg),
                   "--algorithm", "sd-geno")
    assert code == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["algorithm"] == "sd-geno"  # flag beats config
    assert doc["tol"] == 1e-3             # config beats default
    assert run_cli("solve", "--game", str(game_file), "--config",
                   str(tmp_path / "missing.json")) == EXIT_INVALID
    capsys.readouterr()


def test_oracle_dist_populates_trace(tmp_path, game_file, capsys):
    trace = tmp_path / "t.csv"
    code = run_cli("solve", "--game", str(game_file), "--algorithm",
                   "sd-geno", "--tol", "1e-6", "--oracle-dist",
                   "--trace", str(trace))
    assert code == EXIT_OK
    capsys.readouterr()
    lines = trace.read_text().splitlines()
    last = lines[-1].split(",")
    rel = float(last[1])
    assert np.isfinite(rel) and rel <= 1e-4


# ---------------------------------------------------------------------------
# replay
# ---------------------------------------------------------------------------

def test_replay_reproduces_solution(tmp_path, game_file, capsys):
    sched = tmp_path / "sched.csv"
    s1 = tmp_path / "s1.json"
    s2 = tmp_path / "s2.json"
    code = run_cli("solve", "--game", str(game_file), "--algorithm",
                   "ad-geno", "--scenario", "B", "--tol", "1e-4",
                   "--dump-schedule", str(sched), "--summary", str(s1))
    assert code == EXIT_OK
    code = run_cli("replay", "--game", str(game_file), "--replay",
                   str(sched), "--tol", "1e-4", "--summary", str(s2))
    assert code == EXIT_OK
    capsys.readouterr()
    d1 = json.loads(s1.read_text())
    d2 = json.loads(s2.read_text())
    assert d2["algorithm"] == "ad-geno"
    assert d1["x"] == d2["x"]
    assert d1["lam"] == d2["lam"]
    assert d1["activations"] == d2["activations"]


def test_replay_requires_schedule_and_async(game_file, capsys):
    assert run_cli("replay", "--game", str(game_file)) == EXIT_INVALID
    assert run_cli("replay", "--game", str(game_file), "--algorithm",
                   "sd-geno") == EXIT_INVALID
    capsys.readouterr()


# ---------------------------------------------------------------------------
# oracle and compare
# ---------------------------------------------------------------------------

def test_oracle_subcommand(tmp_path, game_file, capsys):
    out = tmp_path / "oracle.json"
    code = run_cli("oracle", "--game", str(game_file), "--out", str(out))
    assert code == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc == json.loads(out.read_text())
    assert len(doc["x"]) > 0 and len(doc["lam"]) == 3
    assert max(doc["residual"].values()) <= 1e-6
    assert doc["iterations"] >= 1


def test_compare_subcommand(tmp_path, capsys):
    out = tmp_path / "cmp.csv"
    code = run_cli("compare", "--n", "6", "--m", "2", "--degrees", "2,5",
                   "--seeds", "1", "--seed", "9", "--tol", "1e-3",
                   "--max-activations", "60000", "--out", str(out))
    assert code == EXIT_OK
    capsys.readouterr()
    lines = out.read_text().strip().splitlines()
    assert lines[0] == ("avg_degree,time_geed,time_geno,epochs_geed,"
                       "epochs_geno,speedup_percent")
    assert len(lines) == 3
    for ln in lines[1:]:
        parts = ln.split(",")
        assert len(parts) == 6
        float(parts[5])


def test_compare_rejects_other_algorithms(capsys):
    assert run_cli("compare", "--algorithms", "sd-geno,ad-geno") == \
        EXIT_INVALID
    capsys.readouterr()


def test_unknown_game_file_is_invalid(tmp_path, capsys):
    assert run_cli("solve", "--game", str(tmp_path / "nope.json")) == \
        EXIT_INVALID
    capsys.readouterr()


def test_cli_help_smoke(capsys):
    with pytest.raises(SystemExit) as exc:
        run_cli("--help")
    assert exc.value.code == 0
    assert "generate" in capsys.readouterr().out
