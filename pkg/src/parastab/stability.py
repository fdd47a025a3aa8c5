"""Perturbation families and stability sweeps.

A family perturbs one ingredient of a base problem with magnitude 1/n:
nonlinearities shifted by (1/n) Id or mollified at radius 1/n, the flux
scaled by (1+1/n), the source or initial datum shifted by (1/n) times a
fixed profile. Every member keeps its structure constants inside a single
envelope independent of n.  A sweep solves every member and measures the
three convergence-mode distances against a reference solve of the base
problem, normally on the same grid so that data perturbation is isolated
from discretization error.

``slope-blowup`` is a deliberate negative control (beta_n = n beta) whose
constants leave any fixed envelope; it exists so validation pipelines can
confirm the uniformity check actually rejects.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .discretization import Mesh1D
from .metrics import Trajectory, lp_w1p_gap, sup_time_l2, weak_uniform_metric
from .monotone import NonlinearityPair
from .solver import DiscreteSolution, ProblemSpec, SolverConfig, SolverError, energy_audit, solve

FAMILY_KINDS = (
    "delta-nonlinearity",
    "mollified-nonlinearity",
    "flux-scale",
    "source-shift",
    "initial-shift",
    "slope-blowup",
)


def _default_profile(x):
    return np.sin(np.pi * np.asarray(x, dtype=float))


@dataclass
class PerturbationFamily:
    base: ProblemSpec
    kind: str
    indices: list
    members: list            # ProblemSpec per index
    member_constants: list   # dict per index
    envelope: dict           # constant name -> (lo, hi)
    local_uniform_distance: dict  # index -> reported sup distances


def make_family(base: ProblemSpec, kind: str, indices, span: float = 5.0,
                source_profile: Callable = None, initial_profile: Callable = None) -> PerturbationFamily:
    """Construct the perturbed problems for each index n.

    ``span`` is the half-width S of the window on which the local-uniform
    nonlinearity distances are reported.  Profile callables default to
    sin(pi x) for the source and initial shifts.
    """
    if kind not in FAMILY_KINDS:
        raise ValueError(f"unknown family kind {kind!r}")
    indices = [int(n) for n in indices]
    if any(n < 1 for n in indices):
        raise ValueError("family indices must be positive integers")
    g = source_profile or _default_profile
    w = initial_profile or _default_profile
    members, consts, dists = [], [], {}
    sgrid = np.linspace(-span, span, 2001)

    for n in indices:
        eps = 1.0 / n
        if kind == "delta-nonlinearity":
            pair_n = base.pair.regularized(eps)
            spec_n = replace(base, pair=pair_n)
        elif kind == "mollified-nonlinearity":
            pair_n = _mollified_pair(base.pair, eps)
            spec_n = replace(base, pair=pair_n)
        elif kind == "flux-scale":
            spec_n = replace(base, flux=base.flux.scale(1.0 + eps))
        elif kind == "source-shift":
            base_f = base.source
            spec_n = replace(
                base,
                source=(lambda x, t, _e=eps, _f=base_f: np.asarray(_f(x, t), dtype=float) + _e * g(x)),
            )
        elif kind == "initial-shift":
            base_u0 = base.initial
            spec_n = replace(
                base,
                initial=(lambda x, _e=eps, _u=base_u0: np.asarray(_u(x), dtype=float) + _e * w(x)),
            )
        else:  # slope-blowup: negative control violating the envelope
            beta_n = base.pair.beta.scale(float(n))
            pair_n = NonlinearityPair(
                beta=beta_n, zeta=base.pair.zeta,
                m1=base.pair.m1, m2=base.pair.m2, m3=base.pair.m3, m4=base.pair.m4,
                exponent_case=base.pair.exponent_case, name=f"{base.pair.name}*blowup{n}",
            )
            spec_n = replace(base, pair=pair_n)
        members.append(spec_n)
        consts.append(_member_constants(spec_n, sgrid))
        dists[n] = _member_distance(base, spec_n, kind, sgrid)

    return PerturbationFamily(
        base=base,
        kind=kind,
        indices=indices,
        members=members,
        member_constants=consts,
        envelope=_declared_envelope(base, kind, min(indices), sgrid),
        local_uniform_distance=dists,
    )


def _mollified_pair(pair: NonlinearityPair, radius: float) -> NonlinearityPair:
    if not pair.is_piecewise_linear:
        raise ValueError("mollified family needs a piecewise-linear base pair")
    m2 = pair.m2
    if m2 is not None:
        m2 = m2 + pair.L_zeta * radius
    m4 = pair.m4
    if m4 is not None:
        m4 = m4 + pair.L_beta * radius
    return NonlinearityPair(
        beta=pair.beta.mollify(radius),
        zeta=pair.zeta.mollify(radius),
        m1=pair.m1,
        m2=m2,
        m3=pair.m3,
        m4=m4,
        exponent_case=pair.exponent_case,
        name=f"{pair.name}~moll{radius:g}",
    )


def _member_constants(spec: ProblemSpec, sgrid) -> dict:
    pair, flux = spec.pair, spec.flux
    out = {
        "L_beta": pair.L_beta,
        "L_zeta": pair.L_zeta,
        "a_lower": flux.a_lower,
        "mu": flux.mu,
    }
    if pair.m1 is not None and pair.m2 is not None:
        deficit = pair.m1 * np.abs(sgrid) - pair.m2 - np.abs(np.asarray(pair.zeta(sgrid)))
        out["m1"] = pair.m1
        out["m2"] = pair.m2
        out["m_coercivity_deficit"] = float(deficit.max(initial=0.0))
    return out


def _member_distance(base: ProblemSpec, member: ProblemSpec, kind: str, sgrid) -> dict:
    out = {}
    if kind in ("delta-nonlinearity", "mollified-nonlinearity", "slope-blowup"):
        for label in ("beta", "zeta", "nu"):
            f0 = getattr(base.pair, label) if label != "nu" else base.pair.nu
            f1 = getattr(member.pair, label) if label != "nu" else member.pair.nu
            out[label] = float(np.abs(np.asarray(f1(sgrid)) - np.asarray(f0(sgrid))).max())
    elif kind == "flux-scale":
        xs = np.linspace(0.0, 1.0, 11)
        ss = np.linspace(-2.0, 2.0, 9)
        xis = np.linspace(-3.0, 3.0, 13)
        X, S, XI = np.meshgrid(xs, ss, xis, indexing="ij")
        out["a"] = float(np.abs(
            np.asarray(member.flux.a(X, S, XI)) - np.asarray(base.flux.a(X, S, XI))
        ).max())
    elif kind == "source-shift":
        xs = np.linspace(0.0, 1.0, 101)
        out["f"] = float(np.abs(
            np.asarray(member.source(xs, 0.0)) - np.asarray(base.source(xs, 0.0))
        ).max())
    elif kind == "initial-shift":
        xs = np.linspace(0.0, 1.0, 101)
        out["u0"] = float(np.abs(
            np.asarray(member.initial(xs)) - np.asarray(base.initial(xs))
        ).max())
    return out


def _declared_envelope(base: ProblemSpec, kind: str, n_min: int, sgrid) -> dict:
    Lb, Lz = base.pair.L_beta, base.pair.L_zeta
    al, mu = base.flux.a_lower, base.flux.mu
    eps = 1.0 / n_min
    env = {
        "L_beta": (0.0, Lb),
        "L_zeta": (0.0, Lz),
        "a_lower": (al, math.inf),
        "mu": (0.0, mu),
    }
    if kind == "delta-nonlinearity":
        env["L_beta"] = (Lb, Lb + eps)
        env["L_zeta"] = (Lz, Lz + eps)
    elif kind == "mollified-nonlinearity":
        env["L_beta"] = (0.0, Lb)
        env["L_zeta"] = (0.0, Lz)
    elif kind == "flux-scale":
        env["mu"] = (mu, 2.0 * mu)
    elif kind == "slope-blowup":
        # same envelope as the delta kind: the control is built to leave it
        env["L_beta"] = (Lb, Lb + eps)
        env["L_zeta"] = (Lz, Lz + eps)
    if base.pair.m1 is not None and base.pair.m2 is not None:
        env["m1"] = (base.pair.m1, base.pair.m1)
        env["m2"] = (base.pair.m2, base.pair.m2 + max(Lb, Lz) * eps)
    return env


@dataclass
class UniformityReport:
    kind: str
    envelope: dict
    rows: list            # (n, constants dict)
    violations: list      # (n, constant, value, (lo, hi))
    max_constants: dict

    @property
    def passed(self) -> bool:
        return not self.violations


def check_hypothesis_uniformity(family: PerturbationFamily) -> UniformityReport:
    """Verify every member's structure constants sit inside the family's
    declared n-independent envelope."""
    rows, violations = [], []
    maxima = {}
    for n, consts in zip(family.indices, family.member_constants):
        rows.append((n, consts))
        for key, val in consts.items():
            if key == "m_coercivity_deficit":
                if val > 1e-9:
                    violations.append((n, key, val, (0.0, 0.0)))
                continue
            maxima[key] = max(maxima.get(key, -math.inf), val)
            if key in family.envelope:
                lo, hi = family.envelope[key]
                if val < lo - 1e-12 or val > hi + 1e-12:
                    violations.append((n, key, val, (lo, hi)))
    return UniformityReport(
        kind=family.kind,
        envelope=family.envelope,
        rows=rows,
        violations=violations,
        max_constants=maxima,
    )


@dataclass
class SweepRow:
    n: int
    sup_l2_nu: float = math.nan
    weak_unif_beta: float = math.nan
    w1p_gap_zeta: float = math.nan
    energy_slack: float = math.nan
    newton_iters_mean: float = math.nan
    ok: bool = False
    message: str = ""


@dataclass
class SweepReport:
    kind: str
    rows: list
    uniformity: UniformityReport
    trends: dict = field(default_factory=dict)
    noise_floor: float = 0.0

    def metric_series(self, name):
        return [getattr(r, name) for r in self.rows if r.ok]


def run_sweep(family: PerturbationFamily, mesh: Mesh1D, timegrid,
              config: SolverConfig = SolverConfig(),
              reference: Optional[DiscreteSolution] = None,
              weak_count: int = 20, jobs: int = 1) -> SweepReport:
    """Solve every family member and measure the three distances against the
    reference (base solved on the same grid unless one is supplied).

    Member solve failures are recorded per row; the sweep continues.  Trend
    flags mark, per metric, whether the series is nonincreasing within noise
    and whether the last value is at most half the first (or under the
    Newton-noise floor).  Member solves are independent; ``jobs`` > 1 runs
    them in a thread pool, report assembly stays single-writer."""
    uniformity = check_hypothesis_uniformity(family)
    if reference is None:
        reference = solve(family.base, mesh, timegrid, config)
    ref_nu = Trajectory(reference.times, reference.nuU, reference.mesh)
    ref_beta = Trajectory(reference.times, reference.betaU, reference.mesh)
    ref_zeta = Trajectory(reference.times, reference.zetaU, reference.mesh)

    def solve_member(member):
        try:
            return solve(member, mesh, timegrid, config), ""
        except (SolverError, ValueError) as err:
            return None, str(err)

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            solved = list(pool.map(solve_member, family.members))
    else:
        solved = [solve_member(m) for m in family.members]

    rows = []
    for (n, member), (sol, message) in zip(zip(family.indices, family.members), solved):
        row = SweepRow(n=n, message=message)
        if sol is not None:
            row.sup_l2_nu = sup_time_l2(Trajectory(sol.times, sol.nuU, mesh), ref_nu)
            row.weak_unif_beta = weak_uniform_metric(
                Trajectory(sol.times, sol.betaU, mesh), ref_beta, count=weak_count
            )
            row.w1p_gap_zeta = lp_w1p_gap(
                Trajectory(sol.times, sol.zetaU, mesh), ref_zeta, family.base.flux.p
            )
            audit = energy_audit(sol, member)
            row.energy_slack = audit.global_slack
            row.newton_iters_mean = float(sol.newton_iters.mean())
            row.ok = True
        rows.append(row)

    floor = 10.0 * config.newton_tol
    trends = {}
    for name in ("sup_l2_nu", "weak_unif_beta", "w1p_gap_zeta"):
        series = [getattr(r, name) for r in rows if r.ok]
        if len(series) >= 2:
            noninc = all(b <= a * 1.05 + floor for a, b in zip(series, series[1:]))
            halved = series[-1] <= max(0.5 * series[0], floor)
        else:
            noninc = halved = False
        trends[name] = {"nonincreasing_within_noise": noninc, "last_le_half_first": halved}
    return SweepReport(kind=family.kind, rows=rows, uniformity=uniformity,
                       trends=trends, noise_floor=floor)
