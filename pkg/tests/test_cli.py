import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
import yaml

import spectral_search.cli as cli
from spectral_search import __version__
from spectral_search.fourier import enumerate_basis
from spectral_search.recovery import build_sampling_matrix, save_matrix_text, save_vector_text

DEMOS = Path(__file__).resolve().parent.parent / "demos" / "configs"

SPACE = [
    {"name": "lr", "exponent_bits": 3, "exponent_offset": -6, "mantissa_bits": 2},
    {"name": "wd", "exponent_bits": 3, "exponent_offset": -6, "mantissa_bits": 2},
]


def write_cfg(tmp_path, cfg, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(cfg))
    return str(p)


def hpo_cfg(**over):
    cfg = {
        "run": {"seed": 1},
        "space": SPACE,
        "scheduler": {"R": 27, "eta": 3, "cycles": 1},
        "pgsr": {"sparsity": 13, "min_obs": 25, "lam": 0.01},
        "evaluator": {"kind": "planted", "sigma": 0.05,
                      "basin": {"targets": {"lr": -3, "wd": -5}, "weight": 0.1}},
    }
    cfg.update(over)
    return cfg


def run(*argv):
    return cli.main([str(a) for a in argv])


def assert_meta(out: Path, command: str, seed: int):
    for f in sorted(out.iterdir()):
        text = f.read_text()
        if f.suffix == ".json":
            meta = json.loads(text)["meta"]
            assert meta["tool_version"] == __version__ and meta["seed"] == seed
            assert meta["command"] == command and len(meta["config_hash"]) == 64
        else:
            assert f"tool_version: {__version__}" in text, f.name
            assert f"seed: {seed}" in text and "config_hash: " in text, f.name


# --- hpo -----------------------------------------------------------------------

@pytest.mark.parametrize("mode", ["pgsr", "hyperband", "sh"])
def test_hpo_modes(tmp_path, capsys, mode):
    out = tmp_path / "out"
    assert run("hpo", "--config", write_cfg(tmp_path, hpo_cfg()), "--out", out, "--mode", mode) == 0
    assert "best loss" in capsys.readouterr().out
    assert {p.name for p in out.iterdir()} == {"report.txt", "history.jsonl", "rounds.csv", "summary.json"}
    summary = json.loads((out / "summary.json").read_text())
    assert summary["mode"] == mode and set(summary["best_config"]) == {"lr", "wd"}
    assert_meta(out, "hpo", 1)


def test_hpo_missing_R_names_field(tmp_path, capsys):
    cfg = hpo_cfg(scheduler={"eta": 3})
    assert run("hpo", "--config", write_cfg(tmp_path, cfg), "--out", tmp_path / "o") == 1
    assert "scheduler.R" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


@pytest.mark.parametrize("patch,needle", [
    ({"pgsr": {"rho": 2}}, "pgsr"),
    ({"pgsr": {"bogus": 1}}, "pgsr.bogus"),
    ({"space": [{"name": "lr"}]}, "exponent_bits"),
    ({"evaluator": {"kind": "planted"}}, "evaluator"),
    ({"evaluator": {"kind": "magic"}}, "evaluator.kind"),
    ({"scheduler": {"R": "lots"}}, "scheduler.R"),
    ({"run": {"workers": 0}}, "run.workers"),
    ({"run": {"mode": "argmin"}}, "run.mode"),
])
def test_hpo_validation_errors(tmp_path, capsys, patch, needle):
    assert run("hpo", "--config", write_cfg(tmp_path, hpo_cfg(**patch)), "--out", tmp_path / "o") == 1
    assert needle in capsys.readouterr().err


def test_seed_flag_overrides_file(tmp_path):
    out = tmp_path / "o"
    assert run("hpo", "--config", write_cfg(tmp_path, hpo_cfg()), "--out", out, "--seed", 9, "--mode", "sh") == 0
    assert json.loads((out / "summary.json").read_text())["meta"]["seed"] == 9


def test_hpo_resume(tmp_path):
    first = tmp_path / "first"
    assert run("hpo", "--config", write_cfg(tmp_path, hpo_cfg()), "--out", first) == 0
    cfg = hpo_cfg(resume={"history": str(first / "history.jsonl")})
    cfg["scheduler"] = {"R": 27, "cycles": 1, "start_cycle": 1}
    second = tmp_path / "second"
    assert run("hpo", "--config", write_cfg(tmp_path, cfg, "c2.yaml"), "--out", second) == 0
    n_first = sum(1 for l in (first / "history.jsonl").read_text().splitlines() if not l.startswith("#"))
    n_second = sum(1 for l in (second / "history.jsonl").read_text().splitlines() if not l.startswith("#"))
    assert n_second == 2 * n_first


# --- nas -------------------------------------------------------------------------

def test_nas_planted_emits_cells(tmp_path):
    cfg = {"run": {"seed": 2}, "architecture": {"intermediate_nodes": 2},
           "search": {"m": 200, "t": 1, "s": 6, "d": 2, "lam": 0.05},
           "evaluator": {"kind": "planted", "sigma": 0.01, "random": {"sparsity": 4, "seed": 3}}}
    out = tmp_path / "o"
    assert run("nas", "--config", write_cfg(tmp_path, cfg), "--out", out) == 0
    assert "cell normal" in (out / "cells.txt").read_text()
    assert_meta(out, "nas", 2)


def test_nas_t4_accepted(tmp_path):
    cfg = {"search": {"n": 20, "m": 100, "t": 4, "s": 4, "d": 1, "lam": 0.05},
           "evaluator": {"kind": "planted", "random": {"degree": 1, "sparsity": 6, "seed": 0}}}
    assert run("nas", "--config", write_cfg(tmp_path, cfg), "--out", tmp_path / "o") == 0


def test_nas_external_echo(tmp_path):
    out = tmp_path / "o"
    assert run("nas", "--config", DEMOS / "nas_echo.yaml", "--out", out) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["alpha_star"] == "-" * 12


def test_nas_protocol_failure_exit_3(tmp_path, capsys):
    cfg = {"search": {"n": 6, "m": 10, "s": 2, "d": 1},
           "evaluator": {"kind": "external",
                         "command": ["{python}", "-m", "spectral_search.echo_evaluator", "--n", "6", "--garbage"]}}
    assert run("nas", "--config", write_cfg(tmp_path, cfg), "--out", tmp_path / "o") == 3
    assert "this is not json" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_nas_dimension_mismatch_exit_3(tmp_path):
    cfg = {"search": {"n": 6, "m": 10, "s": 2, "d": 1},
           "evaluator": {"kind": "external",
                         "command": ["{python}", "-m", "spectral_search.echo_evaluator", "--n", "7"]}}
    assert run("nas", "--config", write_cfg(tmp_path, cfg), "--out", tmp_path / "o") == 3


# --- phase / lambda -----------------------------------------------------------------

def phase_cfg(**over):
    phase = {"n": 12, "d": 2, "s_star": 3, "m_grid": [10, 30, 60], "trials": 5}
    phase.update(over)
    return {"run": {"seed": 4}, "phase": phase}


def test_phase_identical_seed_identical_files(tmp_path):
    cfg = write_cfg(tmp_path, phase_cfg())
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("phase", "--config", cfg, "--out", a) == 0
    assert run("phase", "--config", cfg, "--out", b, "--workers", 2) == 0
    for f in a.iterdir():
        assert f.read_bytes() == (b / f.name).read_bytes()
    assert_meta(a, "phase", 4)
    c = tmp_path / "c"
    assert run("phase", "--config", cfg, "--out", c, "--seed", 5) == 0
    assert (c / "phase.csv").read_bytes() != (a / "phase.csv").read_bytes()


def test_phase_empty_grid(tmp_path, capsys):
    assert run("phase", "--config", write_cfg(tmp_path, phase_cfg(m_grid=[])), "--out", tmp_path / "o") == 1
    assert "m_grid" in capsys.readouterr().err


def test_phase_infeasible_basis(tmp_path, capsys):
    assert run("phase", "--config", write_cfg(tmp_path, phase_cfg(n=300, d=3)), "--out", tmp_path / "o") == 1
    assert "columns" in capsys.readouterr().err


def test_phase_argmin_mode(tmp_path):
    out = tmp_path / "o"
    assert run("phase", "--config", write_cfg(tmp_path, phase_cfg()), "--out", out, "--mode", "argmin") == 0
    assert json.loads((out / "summary.json").read_text())["config"]["criterion"] == "argmin"


def test_lambda_demo(tmp_path):
    out = tmp_path / "o"
    assert run("lambda", "--config", DEMOS / "lambda.yaml", "--out", out) == 0
    rows = json.loads((out / "summary.json").read_text())["rows"]
    assert [r["hamming"] for r in rows] == [0, 0, 0]
    assert_meta(out, "lambda", 5)


# --- recover ------------------------------------------------------------------------

@pytest.fixture
def dump(tmp_path):
    rng = np.random.default_rng(0)
    basis = enumerate_basis(10, 2)
    X = (2 * rng.integers(0, 2, (60, 10)) - 1).astype(np.int8)
    A = build_sampling_matrix(X, basis)
    y = 2.0 * A.entries[:, basis.position((1,))] - 1.5 * A.entries[:, basis.position((0, 5))]
    save_matrix_text(tmp_path / "A.txt", A)
    save_vector_text(tmp_path / "y.txt", y)
    return tmp_path


@pytest.mark.parametrize("mode,extra", [
    ("lasso", {}),
    ("group", {"groups": [0] * 11 + [1] * 45}),
])
def test_recover(dump, mode, extra):
    cfg = {"recover": {"matrix": "A.txt", "y": "y.txt", "lam": 0.01, "basis": {"n": 10, "d": 2},
                       "sparsity": 2, **extra}}
    out = dump / "o"
    assert run("recover", "--config", write_cfg(dump, cfg), "--out", out, "--mode", mode) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["converged"]
    if mode == "lasso":
        terms = {line.split(":")[0].strip() for line in summary["polynomial"].splitlines()}
        assert terms == {"2", "1,6"}
    assert np.loadtxt(out / "coefficients.txt").shape == (56,)
    assert_meta(out, "recover", 0)


def test_recover_group_from_space(dump):
    cfg = {"space": [{"name": "a", "exponent_bits": 3, "mantissa_bits": 2},
                     {"name": "b", "exponent_bits": 3, "mantissa_bits": 2}],
           "recover": {"matrix": "A.txt", "y": "y.txt", "lam": 0.01, "basis": {"n": 10, "d": 2}}}
    assert run("recover", "--config", write_cfg(dump, cfg), "--out", dump / "o", "--mode", "group") == 0


def test_recover_bad_inputs(dump, capsys):
    cfg = {"recover": {"matrix": "A.txt", "y": "missing.txt", "lam": 0.1}}
    assert run("recover", "--config", write_cfg(dump, cfg), "--out", dump / "o") == 1
    cfg = {"recover": {"matrix": "A.txt", "y": "y.txt", "lam": 0.1, "basis": {"n": 10, "d": 1}}}
    assert run("recover", "--config", write_cfg(dump, cfg), "--out", dump / "o") == 1
    assert "basis" in capsys.readouterr().err


# --- plumbing ------------------------------------------------------------------------

def test_out_dir_must_be_empty(tmp_path):
    out = tmp_path / "o"
    out.mkdir()
    (out / "keep").write_text("x")
    assert run("phase", "--config", write_cfg(tmp_path, phase_cfg()), "--out", out) == 1
    assert (out / "keep").read_text() == "x"
    empty = tmp_path / "empty"
    empty.mkdir()
    assert run("phase", "--config", write_cfg(tmp_path, phase_cfg()), "--out", empty) == 0


def test_runtime_failure_exit_2_leaves_nothing(tmp_path, monkeypatch):
    def boom(*a, **k):
        raise RuntimeError("disk on fire")

    monkeypatch.setattr(cli, "phase_transition", boom)
    assert run("phase", "--config", write_cfg(tmp_path, phase_cfg()), "--out", tmp_path / "o") == 2
    assert [p.name for p in tmp_path.iterdir()] == ["cfg.yaml"]


def test_bad_usage_and_bad_yaml(tmp_path):
    assert run("frobnicate") == 1
    bad = tmp_path / "bad.yaml"
    bad.write_text("run: [unclosed\n")
    assert run("phase", "--config", bad, "--out", tmp_path / "o") == 1
    assert run("phase", "--config", tmp_path / "nope.yaml", "--out", tmp_path / "o") == 1


def test_json_config_accepted(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps(phase_cfg()))
    assert run("phase", "--config", p, "--out", tmp_path / "o") == 0


def test_module_entry_point_and_log_env(tmp_path):
    cfg = write_cfg(tmp_path, phase_cfg(m_grid=[30], trials=2))
    env = {"SPECTRAL_SEARCH_LOG": "DEBUG", "PATH": "/usr/bin:/bin"}
    proc = subprocess.run([sys.executable, "-m", "spectral_search", "phase", "--config", cfg,
                           "--out", str(tmp_path / "o")], capture_output=True, text=True, env=env)
    assert proc.returncode == 0, proc.stderr
    assert "outputs written to" in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "spectral_search", "--version"], capture_output=True, text=True)
    assert __version__ in proc.stdout
