"""Command-line orchestration: config ingestion, experiment dispatch, and
report emission.

Subcommands: solve, sweep, verify-toolkit, dual-check, convergence.
Outputs are CSVs with #-prefixed comment headers carrying the manifest
hash (plus plain-text trajectory dumps for solve, and PNG figures next to
each CSV unless --no-plots).  Exit codes: 0 success, 2 assertion or
validation failure, 3 solver failure.

Config files are YAML or JSON; the schema (documented in the README) is
normative, not the syntax.  Unknown keys are rejected with their path;
syntax errors carry the parser's own line references.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .discretization import build_mesh, linear_heterogeneous, mobility_flux, p_laplace_flux
from .dual import (
    DualProblemSpec,
    dual_energy_check,
    regularize_q,
    sine_bump,
    solve_dual_backward,
    uniqueness_witness,
)
from .metrics import Trajectory, time_translate_profile
from .monotone import (
    GRAPH_PRESETS,
    NonlinearityPair,
    PAIR_PRESETS,
    PiecewiseLinear,
    graph_hausdorff,
    preset_graph,
    preset_pair,
    recompose_graph,
    resolvent_decompose,
    verify_pair_hypotheses,
)
from .solver import (
    ProblemSpec,
    SolverConfig,
    SolverError,
    apriori_bounds,
    check_apriori,
    energy_audit,
    manufactured_error,
    solve,
)
from .stability import FAMILY_KINDS, make_family, run_sweep

EXIT_OK = 0
EXIT_ASSERTION = 2
EXIT_SOLVER = 3


class ConfigError(Exception):
    def __init__(self, errors):
        self.errors = errors if isinstance(errors, list) else [errors]
        super().__init__("; ".join(self.errors))


# ---------------------------------------------------------------------------
# config schema
# ---------------------------------------------------------------------------

_DEFAULTS = {
    "problem": {
        "pair": {"preset": "identity"},
        "flux": {"kind": "linear-hetero", "p": 2.0},
        "source": {"kind": "zero"},
        "initial": {"kind": "sine", "amplitude": 1.0, "frequency": 1, "offset": 0.0},
        "horizon": 0.1,
    },
    "mesh": {"cells": 64},
    "time": {"tau": 1e-3},
    "solver": {
        "delta_reg": 0.0,
        "newton_tol": 1e-10,
        "max_newton": 50,
        "max_picard": 200,
    },
    "sweep": {"kind": "delta-nonlinearity", "indices": [2, 4, 8, 16, 32], "span": 5.0},
    "dual": {
        "eps_ladder": [0.2, 0.1, 0.05],
        "g_min": 1e-3,
        "bump": {"kx": 1, "kt": 1},
        "guess_shift": -0.8,
        "g_configs": [
            {"kind": "constant", "value": 0.5},
            {"kind": "affine-x", "lo": 0.2, "hi": 0.8},
            {"kind": "constant", "value": 1e-3},
        ],
    },
    "convergence": {"cells": [16, 32, 64], "min_order": None},
    "verify": {"grid_span": 3.0, "grid_points": 201, "n_pairs": 2000},
    "output": {"directory": "out"},
    "seed": 42,
}

_ALLOWED = {
    "": {"problem", "mesh", "time", "solver", "sweep", "dual", "convergence", "verify", "output", "seed"},
    "problem": {"pair", "flux", "source", "initial", "horizon"},
    "problem.pair": {"preset", "beta", "zeta", "constants", "case"},
    "problem.pair.beta": {"knots", "values", "left_slope", "right_slope"},
    "problem.pair.zeta": {"knots", "values", "left_slope", "right_slope"},
    "problem.pair.constants": {"m1", "m2", "m3", "m4"},
    "problem.flux": {"kind", "p", "lambda", "k0", "gain", "eps_grad"},
    "problem.source": {"kind", "amplitude", "frequency", "value"},
    "problem.initial": {"kind", "amplitude", "frequency", "offset", "value"},
    "mesh": {"cells"},
    "time": {"tau"},
    "solver": {"delta_reg", "newton_tol", "max_newton", "max_picard"},
    "sweep": {"kind", "indices", "span"},
    "dual": {"eps_ladder", "g_min", "bump", "guess_shift", "g_configs"},
    "dual.bump": {"kx", "kt"},
    "convergence": {"cells", "min_order"},
    "verify": {"grid_span", "grid_points", "n_pairs"},
    "output": {"directory"},
}


def _check_keys(tree, path, errors):
    if not isinstance(tree, dict):
        return
    allowed = _ALLOWED.get(path)
    if allowed is not None:
        for key in tree:
            if key not in allowed:
                errors.append(f"unknown key {path + '.' if path else ''}{key}")
    for key, val in tree.items():
        sub = f"{path}.{key}" if path else key
        if sub in _ALLOWED:
            _check_keys(val, sub, errors)


def _merge(default, user):
    if not isinstance(user, dict):
        return user
    out = dict(default)
    for key, val in user.items():
        if key in out and isinstance(out[key], dict) and isinstance(val, dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = val
    return out


def parse_config(path) -> dict:
    """Load and validate a YAML or JSON experiment config.

    Returns the config dict with defaults filled; raises ConfigError with
    the full list of schema violations (key paths) otherwise."""
    p = Path(path)
    if not p.exists():
        raise ConfigError([f"config file {path} not found"])
    text = p.read_text(encoding="utf-8")
    if p.suffix in (".json",):
        try:
            user = json.loads(text)
        except json.JSONDecodeError as err:
            raise ConfigError([f"JSON syntax error: {err}"]) from err
    else:
        import yaml

        try:
            user = yaml.safe_load(text)
        except yaml.YAMLError as err:
            raise ConfigError([f"YAML syntax error: {err}"]) from err
    if user is None:
        user = {}
    if not isinstance(user, dict):
        raise ConfigError(["config root must be a mapping"])
    errors = []
    _check_keys(user, "", errors)
    cfg = _merge(_DEFAULTS, user)
    # the pair block is a variant choice (preset vs explicit tables), so a
    # user-specified block replaces the default instead of merging into it
    if isinstance(user.get("problem"), dict) and "pair" in user["problem"]:
        cfg["problem"]["pair"] = user["problem"]["pair"]
    _validate(cfg, errors)
    if errors:
        raise ConfigError(errors)
    return cfg


def _validate(cfg, errors):
    flux = cfg["problem"]["flux"]
    p = flux.get("p", 2.0)
    if not isinstance(p, (int, float)) or p <= 1.0:
        errors.append("problem.flux.p: exponent p must exceed 1")
    if flux.get("kind") not in ("linear-hetero", "mobility", "p-laplace"):
        errors.append(f"problem.flux.kind: unknown kind {flux.get('kind')!r}")
    if flux.get("kind") in ("linear-hetero", "mobility") and p != 2.0:
        errors.append("problem.flux.p: linear and mobility fluxes require p = 2")
    pair = cfg["problem"]["pair"]
    if "preset" in pair and pair["preset"] not in PAIR_PRESETS:
        errors.append(f"problem.pair.preset: unknown preset {pair['preset']!r}")
    if "preset" in pair and any(k in pair for k in ("beta", "zeta", "constants", "case")):
        errors.append("problem.pair: a preset cannot be combined with explicit tables")
    if "preset" not in pair and ("beta" not in pair or "zeta" not in pair):
        errors.append("problem.pair: need a preset or explicit beta and zeta tables")
    if cfg["problem"]["horizon"] <= 0:
        errors.append("problem.horizon: must be positive")
    if cfg["mesh"]["cells"] < 2:
        errors.append("mesh.cells: need at least 2 cells")
    tau = cfg["time"]["tau"]
    T = cfg["problem"]["horizon"]
    if tau <= 0:
        errors.append("time.tau: must be positive")
    elif abs(round(T / tau) * tau - T) > 1e-9 * max(1.0, T):
        errors.append("time.tau: horizon must be an integer multiple of tau")
    if cfg["sweep"]["kind"] not in FAMILY_KINDS:
        errors.append(f"sweep.kind: unknown kind {cfg['sweep']['kind']!r}")
    if not cfg["sweep"]["indices"]:
        errors.append("sweep.indices: must be nonempty")


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------

def build_pair(cfg_pair) -> NonlinearityPair:
    if "preset" in cfg_pair:
        return preset_pair(cfg_pair["preset"])
    consts = cfg_pair.get("constants", {}) or {}

    def mk(tab):
        return PiecewiseLinear(
            np.asarray(tab["knots"], dtype=float),
            np.asarray(tab["values"], dtype=float),
            float(tab.get("left_slope", 0.0)),
            float(tab.get("right_slope", 0.0)),
        )

    return NonlinearityPair(
        beta=mk(cfg_pair["beta"]),
        zeta=mk(cfg_pair["zeta"]),
        m1=consts.get("m1"),
        m2=consts.get("m2"),
        m3=consts.get("m3"),
        m4=consts.get("m4"),
        exponent_case=cfg_pair.get("case", "I"),
        name="explicit",
    )


def build_flux(cfg_flux):
    kind = cfg_flux["kind"]
    if kind == "linear-hetero":
        lam = cfg_flux.get("lambda", 1.0)
        if isinstance(lam, dict):
            base, slope = float(lam.get("base", 1.0)), float(lam.get("slope", 0.0))
            fn = lambda x: base + slope * np.asarray(x, dtype=float)
            lo = min(base, base + slope)
            hi = max(base, base + slope)
            return linear_heterogeneous(fn, (lo, hi))
        return linear_heterogeneous(float(lam))
    if kind == "mobility":
        return mobility_flux(float(cfg_flux.get("k0", 1.0)), float(cfg_flux.get("gain", 0.5)))
    return p_laplace_flux(float(cfg_flux["p"]), cfg_flux.get("eps_grad"))


def build_scalar_profile(cfg, time_dependent):
    kind = cfg["kind"]
    if kind == "zero":
        if time_dependent:
            return lambda x, t: np.zeros_like(np.asarray(x, dtype=float))
        return lambda x: np.zeros_like(np.asarray(x, dtype=float))
    if kind == "constant":
        c = float(cfg.get("value", 0.0))
        if time_dependent:
            return lambda x, t: np.full_like(np.asarray(x, dtype=float), c)
        return lambda x: np.full_like(np.asarray(x, dtype=float), c)
    if kind == "sine":
        a = float(cfg.get("amplitude", 1.0))
        k = int(cfg.get("frequency", 1))
        off = float(cfg.get("offset", 0.0))
        if time_dependent:
            return lambda x, t: a * np.sin(k * np.pi * np.asarray(x, dtype=float))
        return lambda x: off + a * np.sin(k * np.pi * np.asarray(x, dtype=float))
    raise ConfigError([f"unknown profile kind {kind!r}"])


def build_problem(cfg) -> ProblemSpec:
    prob = cfg["problem"]
    return ProblemSpec(
        pair=build_pair(prob["pair"]),
        flux=build_flux(prob["flux"]),
        source=build_scalar_profile(prob["source"], time_dependent=True),
        initial=build_scalar_profile(prob["initial"], time_dependent=False),
        horizon=float(prob["horizon"]),
    )


def build_solver_config(cfg, **overrides) -> SolverConfig:
    s = cfg["solver"]
    kw = dict(
        delta_reg=float(s["delta_reg"]),
        newton_tol=float(s["newton_tol"]),
        max_newton=int(s["max_newton"]),
        max_picard=int(s["max_picard"]),
    )
    kw.update(overrides)
    return SolverConfig(**kw)


def build_timegrid(cfg):
    T = float(cfg["problem"]["horizon"])
    tau = float(cfg["time"]["tau"])
    K = int(round(T / tau))
    return np.linspace(0.0, T, K + 1)


def build_g_field(gcfg, horizon):
    kind = gcfg["kind"]
    if kind == "constant":
        c = float(gcfg["value"])
        return lambda x, t: np.full_like(np.asarray(x, dtype=float), c), f"constant {c:g}"
    if kind == "affine-x":
        lo, hi = float(gcfg["lo"]), float(gcfg["hi"])
        return (lambda x, t: lo + (hi - lo) * np.asarray(x, dtype=float)), f"affine-x [{lo:g},{hi:g}]"
    if kind == "product-xt":
        lo, hi = float(gcfg["lo"]), float(gcfg["hi"])
        return (
            lambda x, t: lo + (hi - lo) * np.asarray(x, dtype=float) * (t / horizon),
            f"product-xt [{lo:g},{hi:g}]",
        )
    raise ConfigError([f"unknown dual g kind {kind!r}"])


# ---------------------------------------------------------------------------
# manifest + output helpers
# ---------------------------------------------------------------------------

def manifest_hash(cfg, seed) -> str:
    canon = json.dumps({"config": cfg, "seed": seed}, sort_keys=True, default=str)
    return hashlib.sha256(canon.encode()).hexdigest()[:12]


def write_manifest(outdir: Path, cfg, seed, extra=None):
    spec = build_problem(cfg)
    man = {
        "manifest_hash": manifest_hash(cfg, seed),
        "tool_version": __version__,
        "seed": seed,
        "pair": spec.pair.name,
        "flux": spec.flux.name,
        "constants": {
            "L_beta": spec.pair.L_beta,
            "L_zeta": spec.pair.L_zeta,
            "m1": spec.pair.m1,
            "m2": spec.pair.m2,
            "a_lower": spec.flux.a_lower,
            "mu": spec.flux.mu,
            "p": spec.flux.p,
        },
        "wall_clock": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    if extra:
        man.update(extra)
    (outdir / "manifest.json").write_text(json.dumps(man, indent=2, default=str) + "\n")
    return man


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def write_csv(path: Path, comments, header, rows):
    lines = [f"# {c}" for c in comments]
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def dump_trajectory(path: Path, sol_field, times, mesh, comments):
    lines = [f"# {c}" for c in comments]
    lines.append("t " + " ".join(f"x{i}" for i in range(mesh.nodes.size)))
    for k, t in enumerate(times):
        lines.append(" ".join(f"{v:.17g}" for v in np.concatenate([[t], sol_field[k]])))
    path.write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_solve(cfg, outdir: Path, seed: int, jobs: int, plots: bool) -> int:
    spec = build_problem(cfg)
    mesh = build_mesh(int(cfg["mesh"]["cells"]))
    times = build_timegrid(cfg)
    sconf = build_solver_config(cfg)
    mhash = manifest_hash(cfg, seed)
    sol = solve(spec, mesh, times, sconf)
    audit = energy_audit(sol, spec)
    bounds = apriori_bounds(spec, mesh, times)
    computed, bound, apriori_ok = check_apriori(sol, spec, bounds)
    translate_line = "translate_exponent undefined (fewer than 12 slices)"
    if times.size >= 13:
        tau = float(times[1] - times[0])
        prof = time_translate_profile(Trajectory(times, sol.nuU, mesh), [2 * tau, 4 * tau, 8 * tau])
        translate_line = (
            f"translate_exponent {prof.exponent:.17g}" if prof.defined
            else "translate_exponent undefined (all translates vanish)"
        )

    comments = [f"parastab solve v{__version__}", f"manifest {mhash}"]
    for name, field in (("u", sol.U), ("beta_u", sol.betaU), ("zeta_u", sol.zetaU), ("nu_u", sol.nuU)):
        dump_trajectory(outdir / f"{name}.txt", field, times, mesh, comments)
    write_csv(
        outdir / "energy_audit.csv",
        comments
        + [
            f"global_slack {audit.global_slack:.17g}",
            f"dissipation {audit.dissipation:.17g}",
            f"source_work {audit.source_work:.17g}",
            f"sup_potential {audit.sup_potential:.17g}",
            f"grad_zeta_norm {audit.grad_zeta_norm:.17g}",
            f"sup_beta_l2 {audit.sup_beta_l2:.17g}",
            f"dt_beta_dual_bound {audit.dt_beta_dual_bound:.17g}",
            f"mass_balance_slack {audit.mass_balance_slack:.17g}",
            f"apriori_computed {computed:.17g}",
            f"apriori_bound {bound:.17g}",
            f"delta_used {sol.delta_used:.17g}",
            translate_line,
        ],
        ["k", "t", "b_integral", "step_convexity_slack", "newton_iters"],
        [
            (k, sol.times[k], audit.b_trajectory[k],
             audit.per_step_convexity_slack[k - 1] if k >= 1 else 0.0,
             sol.newton_iters[k - 1] if k >= 1 else 0)
            for k in range(sol.times.size)
        ],
    )
    write_manifest(outdir, cfg, seed, {"subcommand": "solve"})
    if plots:
        from . import report

        report.fig_solution(sol, audit, outdir / "solution.png")
        report.fig_pair(spec.pair, outdir / "pair.png")
    ok = audit.per_step_ok and audit.global_ok and apriori_ok
    if not ok:
        print("solve: energy or a-priori audit failed", file=sys.stderr)
        return EXIT_ASSERTION
    print(f"solve: ok (global slack {audit.global_slack:.3e}, outputs in {outdir})")
    return EXIT_OK


def cmd_sweep(cfg, outdir: Path, seed: int, jobs: int, plots: bool) -> int:
    spec = build_problem(cfg)
    mesh = build_mesh(int(cfg["mesh"]["cells"]))
    times = build_timegrid(cfg)
    sconf = build_solver_config(cfg)
    mhash = manifest_hash(cfg, seed)
    family = make_family(spec, cfg["sweep"]["kind"], cfg["sweep"]["indices"], span=float(cfg["sweep"]["span"]))
    weak_count = min(20, mesh.n_cells - 1)
    rep = run_sweep(family, mesh, times, sconf, weak_count=weak_count, jobs=jobs)

    comments = [
        f"parastab sweep v{__version__}",
        f"manifest {mhash}",
        f"kind {family.kind}",
        f"weak metric: truncated orthonormal sine family, L={weak_count}, weights 2^-l",
        "reference: base problem solved on the same grid",
    ]
    if family.kind == "source-shift":
        comments.append("source perturbations are measured in L2(space-time), "
                        "an upper proxy for the dual-space norm")
    for n in family.indices:
        dist = " ".join(f"{k}={v:.6g}" for k, v in family.local_uniform_distance[n].items())
        comments.append(f"perturbation distance n={n}: {dist}")
    for name, tr in rep.trends.items():
        comments.append(
            f"trend {name}: nonincreasing_within_noise={int(tr['nonincreasing_within_noise'])} "
            f"last_le_half_first={int(tr['last_le_half_first'])}"
        )
    write_csv(
        outdir / "sweep.csv",
        comments,
        ["n", "sup_l2_nu", "weak_unif_beta", "w1p_gap_zeta", "energy_slack", "newton_iters_mean"],
        [
            (r.n, r.sup_l2_nu, r.weak_unif_beta, r.w1p_gap_zeta, r.energy_slack, r.newton_iters_mean)
            for r in rep.rows
        ],
    )
    write_csv(
        outdir / "uniformity.csv",
        [f"parastab sweep uniformity", f"manifest {mhash}"],
        ["n", "constant", "value", "envelope_lo", "envelope_hi", "ok"],
        [
            (n, key, val, *rep.uniformity.envelope.get(key, (math.nan, math.nan)),
             not any(v[0] == n and v[1] == key for v in rep.uniformity.violations))
            for n, consts in rep.uniformity.rows
            for key, val in consts.items()
        ],
    )
    write_manifest(outdir, cfg, seed, {"subcommand": "sweep", "family": family.kind,
                                       "indices": family.indices})
    if plots:
        from . import report

        report.fig_sweep(rep.rows, outdir / "sweep.png")
    if not rep.uniformity.passed:
        viols = ", ".join(f"n={n} {k}={v:.3g} outside [{lo:.3g},{hi:.3g}]"
                          for n, k, v, (lo, hi) in rep.uniformity.violations[:4])
        print(f"sweep: hypothesis-uniformity violation: {viols}", file=sys.stderr)
        return EXIT_ASSERTION
    failed = [r for r in rep.rows if not r.ok]
    if failed:
        print(f"sweep: {len(failed)} member solves failed", file=sys.stderr)
        return EXIT_SOLVER
    print(f"sweep: ok ({len(rep.rows)} members, outputs in {outdir})")
    return EXIT_OK


def cmd_verify_toolkit(cfg, outdir: Path, seed: int, jobs: int, plots: bool) -> int:
    pair = build_pair(cfg["problem"]["pair"])
    vc = cfg["verify"]
    span = float(vc["grid_span"])
    grid = np.linspace(-span, span, int(vc["grid_points"]))
    rep = verify_pair_hypotheses(pair, grid, n_pairs=int(vc["n_pairs"]), seed=seed)
    mhash = manifest_hash(cfg, seed)

    rows = [("hypotheses", c.name, c.passed, c.detail) for c in rep.checks]
    for gname in GRAPH_PRESETS:
        g = preset_graph(gname)
        zeta, beta = resolvent_decompose(g)
        slopes_ok = bool(
            np.all(zeta._ext_slopes >= 0) and np.all(zeta._ext_slopes <= 1)
            and np.all(beta._ext_slopes >= 0) and np.all(beta._ext_slopes <= 1)
        )
        pr = NonlinearityPair(beta, zeta, m1=1.0 / (1.0 + g.t1), m2=g.t2 / (1.0 + g.t1), name=gname)
        dist = graph_hausdorff(g, recompose_graph(pr))
        rows.append(("roundtrip", gname, dist < 1e-12 and slopes_ok, f"hausdorff={dist:.3e}"))

    write_csv(
        outdir / "toolkit.csv",
        [
            f"parastab verify-toolkit v{__version__}",
            f"manifest {mhash}",
            f"pair {pair.name}",
            f"fitted growth constants k1={rep.k1:.17g} k2={rep.k2:.17g} k3={rep.k3:.17g}",
        ],
        ["section", "check", "passed", "detail"],
        rows,
    )
    write_manifest(outdir, cfg, seed, {"subcommand": "verify-toolkit"})
    if plots:
        from . import report

        report.fig_pair(pair, outdir / "pair.png")
    bad = [r for r in rows if not r[2]]
    if bad:
        print(f"verify-toolkit: {len(bad)} checks failed: {[r[1] for r in bad]}", file=sys.stderr)
        return EXIT_ASSERTION
    print(f"verify-toolkit: all {len(rows)} checks passed (outputs in {outdir})")
    return EXIT_OK


def cmd_dual_check(cfg, outdir: Path, seed: int, jobs: int, plots: bool) -> int:
    spec = build_problem(cfg)
    if spec.flux.kind != "linear-hetero" or spec.flux.p != 2.0:
        print("dual-check: requires the linear heterogeneous flux with p = 2", file=sys.stderr)
        return EXIT_ASSERTION
    mesh = build_mesh(int(cfg["mesh"]["cells"]))
    times = build_timegrid(cfg)
    mhash = manifest_hash(cfg, seed)
    dc = cfg["dual"]
    eps_ladder = [float(e) for e in dc["eps_ladder"]]
    bump = sine_bump(spec.horizon, int(dc["bump"]["kx"]), int(dc["bump"]["kt"]))

    # pointwise regularization inequalities on a fixed q grid
    qgrid = np.linspace(0.0, 1.0, 1000)
    for eps in eps_ladder:
        regularize_q(qgrid, eps)  # raises on violation

    # two solves of identical data from different Newton initializations
    shift = float(dc["guess_shift"])
    tight = build_solver_config(cfg, newton_tol=min(1e-12, float(cfg["solver"]["newton_tol"])))
    try:
        sol1 = solve(spec, mesh, times, tight)
        sol2 = solve(
            spec, mesh, times,
            SolverConfig(
                delta_reg=tight.delta_reg, newton_tol=tight.newton_tol,
                max_newton=tight.max_newton, max_picard=tight.max_picard,
                newton_guess=lambda prev, t: prev + shift,
            ),
        )
    except SolverError as err:
        print(f"dual-check: solver failure: {err}", file=sys.stderr)
        return EXIT_SOLVER
    beta_gap = float(np.abs(sol1.betaU - sol2.betaU).max())
    zeta_gap = float(np.abs(sol1.zetaU - sol2.zetaU).max())
    rows = uniqueness_witness(sol1, sol2, spec, bump, eps_ladder, g_min_floor=float(dc["g_min"]))

    write_csv(
        outdir / "dual.csv",
        [
            f"parastab dual-check v{__version__}",
            f"manifest {mhash}",
            f"bump {bump.name}",
            "discrete divergence: lumped weak divergence -M^-1 A psi (summation-by-parts "
            "then holds with a nonnegative extra dissipation term)",
            f"beta_gap {beta_gap:.17g}",
            f"zeta_gap {zeta_gap:.17g}",
        ],
        ["eps", "witness", "bound", "energy_lhs", "energy_rhs"],
        [(r.eps, r.witness, r.bound, r.energy_lhs, r.energy_rhs) for r in rows],
    )

    energy_rows = []
    for gcfg in dc["g_configs"]:
        gfn, glabel = build_g_field(gcfg, spec.horizon)
        gmin = float(dc["g_min"])
        dspec = DualProblemSpec(g=gfn, lam=spec.flux.lam, lam_bounds=spec.flux.lam_bounds,
                                w=bump, g_min=gmin)
        chk = dual_energy_check(solve_dual_backward(dspec, mesh, times), dspec)
        energy_rows.append((glabel, chk.lhs, chk.rhs, chk.slack, chk.ok))
    write_csv(
        outdir / "dual_energy.csv",
        [f"parastab dual-check energy v{__version__}", f"manifest {mhash}"],
        ["g_config", "energy_lhs", "energy_rhs", "slack", "ok"],
        energy_rows,
    )
    write_manifest(outdir, cfg, seed, {"subcommand": "dual-check"})
    if plots:
        from . import report

        report.fig_dual(rows, outdir / "dual.png")

    failures = [r for r in rows if r.witness > r.bound + 1e-15]
    energy_bad = [row for row in energy_rows if not row[4]]
    if failures or energy_bad or beta_gap > 1e-8 or zeta_gap > 1e-8:
        print("dual-check: witness/bound or energy assertion failed", file=sys.stderr)
        return EXIT_ASSERTION
    print(f"dual-check: ok (beta gap {beta_gap:.2e}, outputs in {outdir})")
    return EXIT_OK


def cmd_convergence(cfg, outdir: Path, seed: int, jobs: int, plots: bool) -> int:
    prob = cfg["problem"]
    oracle_ok = (
        prob["pair"].get("preset") == "identity"
        and prob["flux"]["kind"] == "linear-hetero"
        and not isinstance(prob["flux"].get("lambda", 1.0), dict)
        and float(prob["flux"].get("lambda", 1.0)) == 1.0
        and prob["source"]["kind"] == "zero"
        and prob["initial"]["kind"] == "sine"
        and float(prob["initial"].get("offset", 0.0)) == 0.0
    )
    if not oracle_ok:
        print("convergence: analytic oracle needs the identity pair, unit linear flux, "
              "zero source and a sine initial datum", file=sys.stderr)
        return EXIT_ASSERTION
    amp = float(prob["initial"].get("amplitude", 1.0))
    k = int(prob["initial"].get("frequency", 1))
    T = float(prob["horizon"])
    lam_decay = (k * np.pi) ** 2

    def exact(x, t):
        return amp * math.exp(-lam_decay * t) * np.sin(k * np.pi * np.asarray(x, dtype=float))

    spec = build_problem(cfg)
    cells_list = [int(c) for c in cfg["convergence"]["cells"]]
    tau0 = float(cfg["time"]["tau"])
    n0 = cells_list[0]
    sconf = build_solver_config(cfg)
    mhash = manifest_hash(cfg, seed)

    def one(n):
        tau = tau0 * (n0 / n) ** 2
        K = max(1, int(round(T / tau)))
        times = np.linspace(0.0, T, K + 1)
        mesh = build_mesh(n)
        sol = solve(spec, mesh, times, sconf)
        sup, l2 = manufactured_error(sol, exact, "u")
        return T / K, sup, l2

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(one, cells_list))
    else:
        results = [one(n) for n in cells_list]

    rows = []
    orders = []
    for i, (n, (tau, sup, l2)) in enumerate(zip(cells_list, results)):
        order = math.nan
        if i >= 1:
            prev_n, prev_sup = cells_list[i - 1], results[i - 1][1]
            order = math.log(prev_sup / sup) / math.log(n / prev_n)
            orders.append(order)
        rows.append((n, 1.0 / n, tau, sup, l2, order))
    write_csv(
        outdir / "convergence.csv",
        [
            f"parastab convergence v{__version__}",
            f"manifest {mhash}",
            "tau scaled with h^2 so the spatial order is observable",
        ],
        ["cells", "h", "tau", "sup_l2_error", "l2l2_error", "observed_order"],
        rows,
    )
    write_manifest(outdir, cfg, seed, {"subcommand": "convergence"})
    if plots:
        from . import report

        report.fig_convergence(cells_list, [r[3] for r in rows], outdir / "convergence.png")
    min_order = cfg["convergence"]["min_order"]
    if min_order is not None and (not orders or min(orders) < float(min_order)):
        print(f"convergence: observed order below {min_order}", file=sys.stderr)
        return EXIT_ASSERTION
    print(f"convergence: ok (orders {[f'{o:.2f}' for o in orders]}, outputs in {outdir})")
    return EXIT_OK


_COMMANDS = {
    "solve": cmd_solve,
    "sweep": cmd_sweep,
    "verify-toolkit": cmd_verify_toolkit,
    "dual-check": cmd_dual_check,
    "convergence": cmd_convergence,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="parastab",
        description="Degenerate parabolic solver with stability sweeps and energy audits.",
    )
    parser.add_argument("subcommand", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True, help="YAML or JSON experiment config")
    parser.add_argument("--out", default=None, help="output directory (overrides config)")
    parser.add_argument("--seed", type=int, default=None, help="RNG seed (overrides config)")
    parser.add_argument("--jobs", type=int, default=1, help="concurrent solves where applicable")
    parser.add_argument("--no-plots", action="store_true", help="skip figure rendering")
    args = parser.parse_args(argv)

    try:
        cfg = parse_config(args.config)
    except ConfigError as err:
        for e in err.errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_ASSERTION
    seed = args.seed if args.seed is not None else int(cfg["seed"])
    outdir = Path(args.out if args.out is not None else cfg["output"]["directory"])
    outdir.mkdir(parents=True, exist_ok=True)
    try:
        return _COMMANDS[args.subcommand](cfg, outdir, seed, max(1, args.jobs), not args.no_plots)
    except SolverError as err:
        print(f"{args.subcommand}: solver failure: {err}", file=sys.stderr)
        return EXIT_SOLVER
    except ConfigError as err:
        for e in err.errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_ASSERTION
    except AssertionError as err:
        print(f"{args.subcommand}: assertion failed: {err}", file=sys.stderr)
        return EXIT_ASSERTION


if __name__ == "__main__":
    sys.exit(main())
