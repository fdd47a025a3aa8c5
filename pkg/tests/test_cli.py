"""Config ingestion, subcommand artifacts, exit codes, determinism."""

import json

import numpy as np
import pytest

from parastab.cli import ConfigError, main, manifest_hash, parse_config

MINIMAL_HEAT = """
problem:
  pair: {preset: identity}
  flux: {kind: linear-hetero, p: 2.0, lambda: 1.0}
  source: {kind: zero}
  initial: {kind: sine}
  horizon: 0.02
mesh: {cells: 32}
time: {tau: 2.0e-3}
"""


def write_cfg(tmp_path, text, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_parse_minimal_fills_defaults(tmp_path):
    cfg = parse_config(write_cfg(tmp_path, MINIMAL_HEAT))
    assert cfg["solver"]["newton_tol"] == 1e-10
    assert cfg["seed"] == 42
    assert cfg["sweep"]["indices"] == [2, 4, 8, 16, 32]


def test_parse_rejects_small_exponent(tmp_path):
    path = write_cfg(tmp_path, "problem:\n  flux: {kind: p-laplace, p: 0.5}\n")
    with pytest.raises(ConfigError, match="exceed 1"):
        parse_config(path)


def test_parse_rejects_unknown_keys(tmp_path):
    path = write_cfg(tmp_path, "problem:\n  pair: {preset: identity}\nbogus: 1\n")
    with pytest.raises(ConfigError, match="unknown key bogus"):
        parse_config(path)
    path = write_cfg(tmp_path, "problem:\n  pair: {preset: identity, typo: 2}\n")
    with pytest.raises(ConfigError, match="problem.pair.typo"):
        parse_config(path)


def test_parse_json_variant(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"problem": {"pair": {"preset": "stefan"}}}))
    cfg = parse_config(str(path))
    assert cfg["problem"]["pair"]["preset"] == "stefan"


def test_sweep_config_echoed_in_manifest(tmp_path):
    text = MINIMAL_HEAT + "sweep: {kind: delta-nonlinearity, indices: [2, 4, 8]}\n"
    out = tmp_path / "out"
    assert main(["sweep", "--config", write_cfg(tmp_path, text), "--out", str(out), "--no-plots"]) == 0
    man = json.loads((out / "manifest.json").read_text())
    assert man["indices"] == [2, 4, 8]
    assert man["family"] == "delta-nonlinearity"


def test_solve_artifacts_and_format(tmp_path):
    out = tmp_path / "out"
    rc = main(["solve", "--config", write_cfg(tmp_path, MINIMAL_HEAT), "--out", str(out), "--no-plots"])
    assert rc == 0
    for name in ("u.txt", "beta_u.txt", "zeta_u.txt", "nu_u.txt", "energy_audit.csv", "manifest.json"):
        assert (out / name).exists()
    lines = (out / "u.txt").read_text().splitlines()
    header = [l for l in lines if not l.startswith("#")][0]
    assert header.split() == ["t"] + [f"x{i}" for i in range(33)]
    # 17-significant-digit dump round-trips exactly
    row = [l for l in lines if not l.startswith("#")][1].split()
    assert float(row[0]) == 0.0 and len(row) == 34


def test_csv_carries_manifest_hash(tmp_path):
    cfg_path = write_cfg(tmp_path, MINIMAL_HEAT)
    out = tmp_path / "out"
    assert main(["solve", "--config", cfg_path, "--out", str(out), "--no-plots"]) == 0
    cfg = parse_config(cfg_path)
    expected = manifest_hash(cfg, 42)
    assert f"# manifest {expected}" in (out / "energy_audit.csv").read_text()


def test_determinism_byte_identical(tmp_path):
    text = MINIMAL_HEAT + "sweep: {kind: delta-nonlinearity, indices: [2, 4]}\n"
    cfg_path = write_cfg(tmp_path, text)
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    assert main(["sweep", "--config", cfg_path, "--out", str(out1), "--no-plots"]) == 0
    assert main(["sweep", "--config", cfg_path, "--out", str(out2), "--no-plots"]) == 0
    assert (out1 / "sweep.csv").read_bytes() == (out2 / "sweep.csv").read_bytes()


def test_verify_toolkit_exit_zero(tmp_path):
    out = tmp_path / "out"
    rc = main(["verify-toolkit", "--config", write_cfg(tmp_path, MINIMAL_HEAT), "--out", str(out), "--no-plots"])
    assert rc == 0
    rows = [l.split(",") for l in (out / "toolkit.csv").read_text().splitlines()
            if l and not l.startswith("#")][1:]
    assert any(r[0] == "roundtrip" for r in rows)
    assert all(r[2] == "1" for r in rows)


def test_convergence_orders(tmp_path):
    text = """
problem:
  pair: {preset: identity}
  flux: {kind: linear-hetero, p: 2.0, lambda: 1.0}
  source: {kind: zero}
  initial: {kind: sine}
  horizon: 0.1
mesh: {cells: 16}
time: {tau: 4.0e-3}
convergence: {cells: [16, 32, 64], min_order: 1.8}
"""
    out = tmp_path / "out"
    rc = main(["convergence", "--config", write_cfg(tmp_path, text), "--out", str(out), "--no-plots"])
    assert rc == 0
    rows = [l.split(",") for l in (out / "convergence.csv").read_text().splitlines()
            if l and not l.startswith("#")][1:]
    orders = [float(r[5]) for r in rows[1:]]
    assert all(o >= 1.8 for o in orders)


def test_convergence_requires_oracle(tmp_path):
    text = MINIMAL_HEAT.replace("preset: identity", "preset: stefan")
    rc = main(["convergence", "--config", write_cfg(tmp_path, text), "--out", str(tmp_path / "o"), "--no-plots"])
    assert rc == 2


def test_nonuniform_family_exits_two(tmp_path):
    text = MINIMAL_HEAT + "sweep: {kind: slope-blowup, indices: [2, 4]}\n"
    rc = main(["sweep", "--config", write_cfg(tmp_path, text), "--out", str(tmp_path / "o"), "--no-plots"])
    assert rc == 2


def test_bad_config_exits_two(tmp_path):
    path = write_cfg(tmp_path, "problem:\n  flux: {kind: p-laplace, p: 0.5}\n")
    assert main(["solve", "--config", path, "--out", str(tmp_path / "o")]) == 2


def test_dual_check_requires_linear_flux(tmp_path):
    text = MINIMAL_HEAT.replace("kind: linear-hetero, p: 2.0, lambda: 1.0",
                                "kind: mobility, p: 2.0")
    rc = main(["dual-check", "--config", write_cfg(tmp_path, text), "--out", str(tmp_path / "o"), "--no-plots"])
    assert rc == 2


def test_dual_check_runs(tmp_path):
    text = """
problem:
  pair: {preset: stefan}
  flux: {kind: linear-hetero, p: 2.0, lambda: 1.0}
  source: {kind: zero}
  initial: {kind: sine, amplitude: 1.5, offset: 0.5}
  horizon: 0.02
mesh: {cells: 32}
time: {tau: 2.0e-3}
dual: {eps_ladder: [0.2, 0.1], guess_shift: -0.8}
"""
    out = tmp_path / "out"
    rc = main(["dual-check", "--config", write_cfg(tmp_path, text), "--out", str(out), "--no-plots"])
    assert rc == 0
    body = (out / "dual.csv").read_text().splitlines()
    header = [l for l in body if not l.startswith("#")][0]
    assert header == "eps,witness,bound,energy_lhs,energy_rhs"
    assert (out / "dual_energy.csv").exists()


def test_plots_rendered(tmp_path):
    out = tmp_path / "out"
    assert main(["solve", "--config", write_cfg(tmp_path, MINIMAL_HEAT), "--out", str(out)]) == 0
    assert (out / "solution.png").exists() and (out / "pair.png").exists()


def test_explicit_breakpoint_pair(tmp_path):
    text = """
problem:
  pair:
    beta: {knots: [0.0, 1.0], values: [0.0, 1.0], left_slope: 1.0, right_slope: 0.0}
    zeta: {knots: [0.0], values: [0.0], left_slope: 1.0, right_slope: 1.0}
    constants: {m1: 1.0, m2: 0.0}
    case: I
  flux: {kind: linear-hetero, p: 2.0, lambda: 1.0}
  source: {kind: zero}
  initial: {kind: sine, amplitude: 2.0}
  horizon: 0.02
mesh: {cells: 32}
time: {tau: 2.0e-3}
"""
    out = tmp_path / "out"
    assert main(["solve", "--config", write_cfg(tmp_path, text), "--out", str(out), "--no-plots"]) == 0


def test_solver_failure_exits_three(tmp_path):
    text = MINIMAL_HEAT + "solver: {newton_tol: 1.0e-30, max_newton: 1, max_picard: 1}\n"
    rc = main(["solve", "--config", write_cfg(tmp_path, text), "--out", str(tmp_path / "o"), "--no-plots"])
    assert rc == 3


def test_sweep_jobs_matches_sequential(tmp_path):
    text = MINIMAL_HEAT + "sweep: {kind: delta-nonlinearity, indices: [2, 4]}\n"
    cfg_path = write_cfg(tmp_path, text)
    out1, out2 = tmp_path / "j1", tmp_path / "j2"
    assert main(["sweep", "--config", cfg_path, "--out", str(out1), "--no-plots"]) == 0
    assert main(["sweep", "--config", cfg_path, "--out", str(out2), "--no-plots", "--jobs", "2"]) == 0
    assert (out1 / "sweep.csv").read_bytes() == (out2 / "sweep.csv").read_bytes()


def test_preset_with_tables_rejected(tmp_path):
    text = """
problem:
  pair:
    preset: identity
    beta: {knots: [0.0], values: [0.0], left_slope: 1.0, right_slope: 1.0}
"""
    with pytest.raises(ConfigError, match="cannot be combined"):
        parse_config(write_cfg(tmp_path, text))
