"""Implicit Euler time stepping for d/dt beta(u) - div a(x, nu(u), d/dx zeta(u)) = f.

Each step solves the lumped-mass nodal system

    M (beta(U) - beta(U_prev)) + tau * FluxResidual(nu(U), zeta(U)) = tau * M f

by damped Newton with a backtracking line search on ||R||^2, falling back to
damped Picard sweeps when Newton stalls.  Degenerate pairs whose beta and
zeta plateau on a common interval get a small delta-regularization
(beta + delta*Id, zeta + delta*Id), mirroring the construction that makes
the continuous problem solvable; delta is recorded on the solution.

The audits check the discrete counterparts of the energy structure: a
per-step convexity inequality (testing the mass term with zeta(U) dominates
the increment of the convex potential), a global energy inequality, and an
a-priori bound on the dissipation integral.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np
from scipy.linalg import solve_banded

from .discretization import (
    FluxLaw,
    Mesh1D,
    assemble_flux_residual,
    cell_gradients,
    flux_quadratic_form,
    lumped_mass,
)
from .monotone import B_of_beta_eval, NonlinearityPair, fit_growth_constants


class SolverError(RuntimeError):
    """Newton and the Picard fallback both failed to reach the tolerance."""

    def __init__(self, message, residual_norm=math.nan, history=None, step_index=None):
        self.residual_norm = residual_norm
        self.history = history or []
        self.step_index = step_index
        super().__init__(message)


@dataclass(frozen=True)
class ProblemSpec:
    """Continuous problem data: nonlinearity pair, flux law, source f(x, t),
    initial datum u0(x), and the time horizon."""

    pair: NonlinearityPair
    flux: FluxLaw
    source: Callable
    initial: Callable
    horizon: float

    def __post_init__(self):
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")


@dataclass(frozen=True)
class SolverConfig:
    delta_reg: float = 0.0
    newton_tol: float = 1e-10
    max_newton: int = 50
    damping_factor: float = 0.5
    max_halvings: int = 30
    max_picard: int = 200
    auto_delta: float = 1e-8
    newton_guess: Optional[Callable] = None  # (U_prev, t_next) -> initial iterate

    def __post_init__(self):
        if self.newton_tol <= 0 or self.max_newton <= 0 or self.delta_reg < 0:
            raise ValueError("invalid solver configuration")
        if not (0 < self.damping_factor < 1):
            raise ValueError("damping factor must lie in (0, 1)")


@dataclass
class DiscreteSolution:
    mesh: Mesh1D
    times: np.ndarray
    U: np.ndarray       # (K+1, N+1)
    betaU: np.ndarray
    zetaU: np.ndarray
    nuU: np.ndarray
    newton_iters: np.ndarray
    delta_used: float = 0.0

    def check_invariants(self, pair: NonlinearityPair, tol=1e-12):
        assert np.abs(self.betaU - np.asarray(pair.beta(self.U))).max() <= tol
        assert np.abs(self.zetaU - np.asarray(pair.zeta(self.U))).max() <= tol
        assert np.abs(self.nuU - np.asarray(pair.nu(self.U))).max() <= tol
        assert np.abs(self.zetaU[:, 0]).max() == 0.0 and np.abs(self.zetaU[:, -1]).max() == 0.0


@dataclass
class EnergyAudit:
    per_step_convexity_slack: np.ndarray
    global_slack: float
    b_trajectory: np.ndarray
    dissipation: float
    source_work: float
    sup_potential: float          # max_k of the integrated potential
    grad_zeta_norm: float         # ||d/dx zeta(U)||_{L^p(L^p)}
    sup_beta_l2: float            # max_k lumped-L2 norm of beta(U)
    dt_beta_dual_bound: float     # constructive bound on the dual norm of dt beta(U)
    mass_balance_slack: float
    tolerance: float

    @property
    def per_step_ok(self) -> bool:
        return bool(self.per_step_convexity_slack.min(initial=0.0) >= -self.tolerance)

    @property
    def global_ok(self) -> bool:
        return self.global_slack >= -self.tolerance


def _effective_delta(pair: NonlinearityPair, U_prev: np.ndarray, config: SolverConfig) -> float:
    if config.delta_reg > 0:
        return config.delta_reg
    for lo, hi in pair.common_flat_intervals():
        if np.any((U_prev >= lo) & (U_prev <= hi)):
            return config.auto_delta
    return 0.0


class _StepSystem:
    """Residual and tridiagonal Jacobian of one implicit Euler step."""

    def __init__(self, mesh, flux, pair, masses, tau, beta_prev_int, f_int):
        self.mesh = mesh
        self.flux = flux
        self.pair = pair
        self.m = masses
        self.tau = tau
        self.beta_prev_int = beta_prev_int
        self.f_int = f_int

    def full(self, U_int):
        U = np.zeros(self.mesh.nodes.size)
        U[1:-1] = U_int
        return U

    def residual(self, U_int):
        U = self.full(U_int)
        beta = np.asarray(self.pair.beta(U))
        zeta = np.asarray(self.pair.zeta(U))
        nu = np.asarray(self.pair.nu(U))
        fres = assemble_flux_residual(self.mesh, self.flux, nu, zeta)
        r = self.m[1:-1] * (beta[1:-1] - self.beta_prev_int)
        r += self.tau * fres[1:-1]
        r -= self.tau * self.m[1:-1] * self.f_int
        return r

    def jacobian_banded(self, U_int, floor_beta=0.0, floor_zeta=0.0, secant=False):
        """Banded (3, n) tridiagonal Jacobian on the interior unknowns.

        With ``secant`` the xi-derivative of the flux is replaced by the
        secant coefficient a(xi)/xi and the s-coupling is dropped (the
        Picard matrix); slope floors keep it invertible on plateaus.
        """
        mesh, flux, pair, tau = self.mesh, self.flux, self.pair, self.tau
        U = self.full(U_int)
        h = mesh.h
        grad = cell_gradients(mesh, np.asarray(pair.zeta(U)))
        nu = np.asarray(pair.nu(U))
        s_mid = 0.5 * (nu[1:] + nu[:-1])
        xm = mesh.midpoints
        if secant:
            with np.errstate(divide="ignore", invalid="ignore"):
                aval = np.asarray(flux.a(xm, s_mid, grad))
                dxi = np.where(np.abs(grad) > 1e-12, aval / np.where(grad == 0, 1.0, grad),
                               np.asarray(flux.da_dxi(xm, s_mid, np.zeros_like(grad))))
            dxi = np.maximum(dxi, 0.0)
            ds = np.zeros_like(grad)
        else:
            dxi = np.asarray(flux.da_dxi(xm, s_mid, grad))
            ds = np.asarray(flux.da_ds(xm, s_mid, grad))
        bpr = np.maximum(np.asarray(pair.beta.derivative(U)), floor_beta)
        zpr = np.maximum(np.asarray(pair.zeta.derivative(U)), floor_zeta)
        npr = np.asarray(pair.nu.derivative(U))

        n = U.size
        diag = np.zeros(n)
        upper = np.zeros(n)  # J[i, i+1] stored at i+1 (solve_banded layout)
        lower = np.zeros(n)  # J[i, i-1] stored at i-1
        diag += self.m * bpr
        w = dxi / h
        # d a_{j+1/2} / d U_j = -w_j zeta'_j + ds_j nu'_j / 2
        # d a_{j+1/2} / d U_{j+1} = +w_j zeta'_{j+1} + ds_j nu'_{j+1} / 2
        # residual_i = a_{i-1/2} - a_{i+1/2}
        diag[1:] += tau * (w * zpr[1:] + 0.5 * ds * npr[1:])      # from a_{i-1/2} wrt U_i
        diag[:-1] += tau * (w * zpr[:-1] - 0.5 * ds * npr[:-1])   # from -a_{i+1/2} wrt U_i
        upper[1:] = tau * (-w * zpr[1:] - 0.5 * ds * npr[1:])     # -a_{i+1/2} wrt U_{i+1}
        lower[:-1] = tau * (-w * zpr[:-1] + 0.5 * ds * npr[:-1])  # a_{i-1/2} wrt U_{i-1}

        ab = np.zeros((3, n - 2))
        ab[1] = diag[1:-1]
        ab[0, 1:] = upper[2:-1]
        ab[2, :-1] = lower[1:-2]
        return ab

    def jacobian_dense(self, U_int):
        ab = self.jacobian_banded(U_int)
        n = ab.shape[1]
        J = np.zeros((n, n))
        J[np.arange(n), np.arange(n)] = ab[1]
        J[np.arange(n - 1), np.arange(1, n)] = ab[0, 1:]
        J[np.arange(1, n), np.arange(n - 1)] = ab[2, :-1]
        return J


def step(prev, tau, spec, mesh, config, t_next=None, pair_override=None):
    """Advance one implicit Euler step from the full nodal slice ``prev``.

    Returns (U_next, newton_iterations).  Raises SolverError with the last
    residual norm and the damping history when both Newton and the Picard
    fallback diverge.
    """
    prev = np.asarray(prev, dtype=float)
    if t_next is None:
        t_next = tau
    pair = pair_override
    if pair is None:
        delta = _effective_delta(spec.pair, prev, config)
        pair = spec.pair.regularized(delta)
    masses = lumped_mass(mesh)
    f_int = np.asarray(spec.source(mesh.nodes[1:-1], t_next), dtype=float)
    beta_prev = np.asarray(pair.beta(prev))
    sys = _StepSystem(mesh, spec.flux, pair, masses, tau, beta_prev[1:-1], f_int)

    guess = prev.copy()
    if config.newton_guess is not None:
        guess = np.asarray(config.newton_guess(prev, t_next), dtype=float)
    U_int = guess[1:-1].copy()
    history = []

    U_int, iters, converged = _newton(sys, U_int, config, history)
    if not converged:
        U_int, extra, converged = _picard(sys, U_int, config, history)
        iters += extra
    rounds = 0
    while not converged and rounds < 40:
        # common plateaus leave every line-search direction with a locally
        # constant residual; nodewise monotone bisection sweeps hop the
        # iterate across the flat region, then Newton finishes
        U_int = _gauss_seidel_sweeps(sys, U_int, n_sweeps=3)
        U_int, extra, converged = _newton(sys, U_int, config, history)
        iters += extra + 1
        rounds += 1
    if not converged:
        raise SolverError(
            "step did not converge", residual_norm=history[-1] if history else math.nan,
            history=history,
        )
    return sys.full(U_int), iters


def _newton(sys, U_int, config, history):
    for it in range(config.max_newton):
        R = sys.residual(U_int)
        nr = float(np.linalg.norm(R))
        history.append(nr)
        if nr <= config.newton_tol:
            return U_int, it, True
        ab = sys.jacobian_banded(U_int)
        try:
            dU = solve_banded((1, 1), ab, -R)
        except Exception:
            return U_int, it, False
        if not np.all(np.isfinite(dU)):
            return U_int, it, False
        lam = 1.0
        accepted = False
        for _ in range(config.max_halvings):
            Rn = sys.residual(U_int + lam * dU)
            nn = float(np.linalg.norm(Rn))
            if np.isfinite(nn) and nn <= (1.0 - 1e-4 * lam) * nr:
                U_int = U_int + lam * dU
                accepted = True
                break
            lam *= config.damping_factor
        if not accepted:
            return U_int, it, False
    R = sys.residual(U_int)
    nr = float(np.linalg.norm(R))
    history.append(nr)
    return U_int, config.max_newton, nr <= config.newton_tol


def _picard(sys, U_int, config, history):
    """Damped Picard sweeps: frozen secant flux coefficient, floored slopes.

    The floor keeps the iteration matrix uniformly invertible across
    plateaus; correctness is still gated by the true residual, the floor
    only shapes the quasi-Newton direction."""
    floor = 1e-3 * max(1.0, sys.pair.L_beta, sys.pair.L_zeta)
    for it in range(config.max_picard):
        R = sys.residual(U_int)
        nr = float(np.linalg.norm(R))
        history.append(nr)
        if nr <= config.newton_tol:
            return U_int, it, True
        ab = sys.jacobian_banded(U_int, floor_beta=floor, floor_zeta=floor, secant=True)
        try:
            dU = solve_banded((1, 1), ab, -R)
        except Exception:
            return U_int, it, False
        lam = 1.0
        accepted = False
        for _ in range(config.max_halvings):
            Rn = sys.residual(U_int + lam * dU)
            nn = float(np.linalg.norm(Rn))
            if np.isfinite(nn) and nn < nr:
                U_int = U_int + lam * dU
                accepted = True
                break
            lam *= config.damping_factor
        if not accepted:
            return U_int, it, False
    R = sys.residual(U_int)
    nr = float(np.linalg.norm(R))
    history.append(nr)
    return U_int, config.max_picard, nr <= config.newton_tol


def _scalar_eval(f):
    """Fast scalar evaluator for the nodal bisection loops."""
    if hasattr(f, "knots") and hasattr(f, "slopes"):
        knots = f.knots.tolist()
        values = f.values.tolist()
        slopes = f.slopes.tolist()
        ls, rs = f.left_slope, f.right_slope
        from bisect import bisect_right

        def ev(x):
            i = bisect_right(knots, x)
            if i == 0:
                return values[0] + ls * (x - knots[0])
            if i == len(knots):
                return values[-1] + rs * (x - knots[-1])
            return values[i - 1] + slopes[i - 1] * (x - knots[i - 1])

        return ev
    return lambda x: float(f(x))


def _gauss_seidel_sweeps(sys, U_int, n_sweeps=3, bisect_iters=60):
    """Nonlinear Gauss-Seidel sweeps: each nodal equation is monotone
    nondecreasing in its own unknown, so a bracketing bisection crosses
    plateaus that defeat line searches.  Used as a globalizer only; Newton
    polishes afterwards."""
    mesh, flux, pair, tau = sys.mesh, sys.flux, sys.pair, sys.tau
    h = mesh.h.tolist()
    xm = mesh.midpoints.tolist()
    m = sys.m.tolist()
    beta = _scalar_eval(pair.beta)
    zeta = _scalar_eval(pair.zeta)
    nu = _scalar_eval(pair.nu)
    a = flux.a
    U = sys.full(U_int)
    n = U.size
    span = max(1.0, float(np.abs(U).max()))

    for _ in range(n_sweeps):
        z = [zeta(u) for u in U]
        s = [nu(u) for u in U]
        for i in range(1, n - 1):
            bp = sys.beta_prev_int[i - 1]
            fi = sys.f_int[i - 1]

            def r(ui):
                zi, si = zeta(ui), nu(ui)
                a_lo = float(a(xm[i - 1], 0.5 * (s[i - 1] + si), (zi - z[i - 1]) / h[i - 1]))
                a_hi = float(a(xm[i], 0.5 * (si + s[i + 1]), (z[i + 1] - zi) / h[i]))
                return m[i] * (beta(ui) - bp) + tau * (a_lo - a_hi) - tau * m[i] * fi

            r0 = r(U[i])
            if r0 == 0.0:
                continue
            lo = hi = U[i]
            out = 0.25 * span
            if r0 > 0:
                while r(lo) > 0:
                    lo -= out
                    out *= 2.0
            else:
                while r(hi) < 0:
                    hi += out
                    out *= 2.0
            for _b in range(bisect_iters):
                mid = 0.5 * (lo + hi)
                if r(mid) >= 0:
                    hi = mid
                else:
                    lo = mid
            U[i] = 0.5 * (lo + hi)
            z[i] = zeta(U[i])
            s[i] = nu(U[i])
    return U[1:-1]


def solve(spec: ProblemSpec, mesh: Mesh1D, timegrid, config: SolverConfig = SolverConfig()) -> DiscreteSolution:
    """March the implicit Euler scheme over the whole time grid.

    The boundary condition zeta(u) = 0 is enforced by pinning u = 0 at both
    end nodes (zeta(0) = 0).  Step failures propagate with the step index.
    """
    times = np.asarray(timegrid, dtype=float)
    if times[0] != 0.0 or abs(times[-1] - spec.horizon) > 1e-12 or np.any(np.diff(times) <= 0):
        raise ValueError("time grid must increase from 0 to the horizon")
    n = mesh.nodes.size
    K = times.size - 1
    U = np.zeros((K + 1, n))
    U[0] = np.asarray(spec.initial(mesh.nodes), dtype=float)
    U[0, 0] = 0.0
    U[0, -1] = 0.0
    iters = np.zeros(K, dtype=int)
    delta_used = 0.0
    pair_cache = {}
    for k in range(K):
        tau = times[k + 1] - times[k]
        delta = _effective_delta(spec.pair, U[k], config)
        delta_used = max(delta_used, delta)
        if delta not in pair_cache:
            pair_cache[delta] = spec.pair.regularized(delta)
        try:
            U[k + 1], iters[k] = step(
                U[k], tau, spec, mesh, config, t_next=times[k + 1], pair_override=pair_cache[delta]
            )
        except SolverError as err:
            raise SolverError(
                f"step {k + 1}/{K} failed: {err}", residual_norm=err.residual_norm,
                history=err.history, step_index=k + 1,
            ) from err
    pair = spec.pair
    return DiscreteSolution(
        mesh=mesh,
        times=times,
        U=U,
        betaU=np.asarray(pair.beta(U)),
        zetaU=np.asarray(pair.zeta(U)),
        nuU=np.asarray(pair.nu(U)),
        newton_iters=iters,
        delta_used=delta_used,
    )


def energy_audit(sol: DiscreteSolution, spec: ProblemSpec, tolerance=1e-9) -> EnergyAudit:
    """Discrete energy structure checks on a solved trajectory.

    Audits use the pair the stepping actually saw (delta-regularized when
    the solver enabled it), so the inequalities hold up to Newton residuals:

      * per step k: sum_i m_i zeta(U^{k+1}) (beta(U^{k+1}) - beta(U^k))
        dominates the increment of the integrated potential (convexity);
      * globally: final potential + dissipation <= initial potential +
        source work.
    """
    pair = spec.pair.regularized(sol.delta_used)
    mesh, times = sol.mesh, sol.times
    m = lumped_mass(mesh)
    U = sol.U
    beta = np.asarray(pair.beta(U))
    zeta = np.asarray(pair.zeta(U))
    nu = np.asarray(pair.nu(U))
    G = np.asarray(B_of_beta_eval(pair, U))
    b_traj = (m[None, :] * G).sum(axis=1)

    taus = np.diff(times)
    K = taus.size
    pairing = (m[None, :] * zeta[1:] * (beta[1:] - beta[:-1])).sum(axis=1)
    slack = pairing - np.diff(b_traj)

    dissipation = 0.0
    source_work = 0.0
    grad_pow = 0.0
    bflux_cum = 0.0
    for k in range(1, K + 1):
        tau = taus[k - 1]
        dissipation += tau * flux_quadratic_form(mesh, spec.flux, nu[k], zeta[k])
        f_k = np.asarray(spec.source(mesh.nodes, times[k]), dtype=float)
        source_work += tau * float((m * f_k * zeta[k]).sum())
        grad = cell_gradients(mesh, zeta[k])
        grad_pow += tau * float((np.abs(grad) ** spec.flux.p * mesh.h).sum())
        s_mid = 0.5 * (nu[k][1:] + nu[k][:-1])
        a_val = np.asarray(spec.flux.a(mesh.midpoints, s_mid, cell_gradients(mesh, zeta[k])))
        bflux_cum += tau * (a_val[-1] - a_val[0])

    global_slack = (b_traj[0] + source_work) - (b_traj[-1] + dissipation)

    mass = (m[None, :] * beta).sum(axis=1)
    source_mass = sum(
        float(np.diff(times)[k - 1] * (m[1:-1] * np.asarray(spec.source(mesh.nodes[1:-1], times[k]))).sum())
        for k in range(1, K + 1)
    )
    mass_slack = abs(mass[-1] - mass[0] - bflux_cum - source_mass)

    ab = np.asarray(spec.flux.a_bar(mesh.midpoints))
    abar_norm = float((np.abs(ab) ** spec.flux.p_conj * mesh.h).sum()) ** (1.0 / spec.flux.p_conj)
    f_norm = _source_norm(spec, mesh, times)
    dt_beta_bound = abar_norm + spec.flux.mu * grad_pow ** ((spec.flux.p - 1.0) / spec.flux.p) + f_norm

    scale = max(1.0, abs(b_traj).max(initial=0.0), abs(dissipation), abs(source_work))
    return EnergyAudit(
        per_step_convexity_slack=slack,
        global_slack=float(global_slack),
        b_trajectory=b_traj,
        dissipation=float(dissipation),
        source_work=float(source_work),
        sup_potential=float(b_traj.max(initial=0.0)),
        grad_zeta_norm=float(grad_pow ** (1.0 / spec.flux.p)),
        sup_beta_l2=float(np.sqrt((m[None, :] * beta * beta).sum(axis=1)).max(initial=0.0)),
        dt_beta_dual_bound=float(dt_beta_bound),
        mass_balance_slack=float(mass_slack),
        tolerance=tolerance * scale,
    )


def _source_norm(spec, mesh, times):
    """Discrete L^{p'}(space-time) norm of f; upper-bounds the dual norm the
    energy chain needs (Poincare constant 1 on the unit interval)."""
    m = lumped_mass(mesh)
    pc = spec.flux.p_conj
    total = 0.0
    for k in range(1, times.size):
        f_k = np.asarray(spec.source(mesh.nodes, times[k]), dtype=float)
        total += (times[k] - times[k - 1]) * float((m * np.abs(f_k) ** pc).sum())
    return total ** (1.0 / pc)


@dataclass
class AprioriBounds:
    k3: float
    u0_l2_sq: float
    f_norm: float
    grad_zeta_p_bound: float   # bound on the p-th power of the L^p(L^p) gradient norm
    slack_factor: float = 1.1


def apriori_bounds(spec: ProblemSpec, mesh: Mesh1D, timegrid) -> AprioriBounds:
    """Explicit a-priori bound on the dissipation seminorm:

        ||d/dx zeta(u)||_{L^p(L^p)}^p
            <= (2/a_lower) (k3 ||u0||^2 + (1/p') (2/(a_lower p))^{p'/p} ||f||^{p'})

    with k3 the quadratic growth constant of the composed potential, fitted
    on a grid that includes the nodal initial values."""
    times = np.asarray(timegrid, dtype=float)
    m = lumped_mass(mesh)
    u0 = np.array(spec.initial(mesh.nodes), dtype=float, copy=True)
    u0[0] = 0.0
    u0[-1] = 0.0
    span = max(1.0, float(np.abs(u0).max()))
    grid = np.unique(np.concatenate([np.linspace(-2 * span, 2 * span, 401), u0]))
    _, _, k3 = fit_growth_constants(spec.pair, grid)
    u0_sq = float((m * u0 * u0).sum())
    f_norm = _source_norm(spec, mesh, times)
    p, pc, al = spec.flux.p, spec.flux.p_conj, spec.flux.a_lower
    bound = (2.0 / al) * (k3 * u0_sq + (1.0 / pc) * (2.0 / (al * p)) ** (pc / p) * f_norm ** pc)
    bound += (2.0 / al) * spec.flux.coercivity_offset * float(times[-1])
    return AprioriBounds(k3=k3, u0_l2_sq=u0_sq, f_norm=f_norm, grad_zeta_p_bound=float(bound))


def check_apriori(sol: DiscreteSolution, spec: ProblemSpec, bounds: AprioriBounds):
    """(computed p-th power, bound, within bound * slack_factor?)"""
    taus = np.diff(sol.times)
    total = 0.0
    for k in range(1, sol.times.size):
        grad = cell_gradients(sol.mesh, sol.zetaU[k])
        total += taus[k - 1] * float((np.abs(grad) ** spec.flux.p * sol.mesh.h).sum())
    ok = total <= bounds.grad_zeta_p_bound * bounds.slack_factor + 1e-14
    return total, bounds.grad_zeta_p_bound, ok


def lumped_l2(mesh: Mesh1D, v: np.ndarray) -> float:
    m = lumped_mass(mesh)
    return float(np.sqrt((m * v * v).sum()))


def manufactured_error(sol: DiscreteSolution, exact: Callable, which: str = "u"):
    """(sup-time lumped-L2 error, L2(L2) error) against exact(x, t)."""
    traj = {"u": sol.U, "nu": sol.nuU, "zeta": sol.zetaU, "beta": sol.betaU}[which]
    m = lumped_mass(sol.mesh)
    sup_err = 0.0
    acc = 0.0
    taus = np.diff(sol.times)
    for k, t in enumerate(sol.times):
        diff = traj[k] - np.asarray(exact(sol.mesh.nodes, t), dtype=float)
        e = float((m * diff * diff).sum())
        sup_err = max(sup_err, e)
        if k >= 1:
            acc += taus[k - 1] * e
    return math.sqrt(sup_err), math.sqrt(acc)


def jacobian_fd_check(spec: ProblemSpec, mesh: Mesh1D, tau: float, config: SolverConfig,
                      n_states: int = 10, seed: int = 42, delta: float = 0.0) -> float:
    """Max relative mismatch between the analytic Jacobian action and a
    central finite difference of the step residual, over seeded random
    states kept away from slope breakpoints and flux kinks."""
    rng = np.random.default_rng(seed)
    pair = spec.pair.regularized(delta)
    masses = lumped_mass(mesh)
    n = mesh.nodes.size
    knots = np.unique(np.concatenate([
        pair.beta.knots if hasattr(pair.beta, "knots") else pair.beta.knots_hint,
        pair.zeta.knots if hasattr(pair.zeta, "knots") else pair.zeta.knots_hint,
    ]))
    worst = 0.0
    produced = 0
    attempts = 0
    while produced < n_states:
        attempts += 1
        if attempts > 200 * n_states:
            raise RuntimeError("could not sample smooth states away from kinks")
        amp = rng.uniform(0.5, 2.0)
        U = amp * np.sin(np.pi * rng.integers(1, 4) * mesh.nodes)
        U += rng.normal(0.0, 0.15, size=n)
        U[0] = 0.0
        U[-1] = 0.0
        dist = np.abs(U[:, None] - knots[None, :]).min(axis=1)
        if dist[1:-1].min() < 1e-3:
            continue
        grad = np.abs(cell_gradients(mesh, np.asarray(pair.zeta(U))))
        # exactly-flat cells differentiate consistently; only near-zero
        # gradients under the p-Laplace kink spoil the finite difference
        if spec.flux.kind == "p-laplace" and np.any((grad > 1e-12) & (grad < 5e-2)):
            continue
        produced += 1
        f_int = np.asarray(spec.source(mesh.nodes[1:-1], tau), dtype=float)
        sys = _StepSystem(mesh, spec.flux, pair, masses, tau, np.asarray(pair.beta(U))[1:-1], f_int)
        U_int = U[1:-1]
        J = sys.jacobian_dense(U_int)
        d = rng.normal(size=U_int.size)
        d /= np.linalg.norm(d)
        eps = 1e-7 * max(1.0, np.abs(U_int).max())
        fd = (sys.residual(U_int + eps * d) - sys.residual(U_int - eps * d)) / (2 * eps)
        Jd = J @ d
        rel = np.linalg.norm(fd - Jd) / max(np.linalg.norm(Jd), 1e-14)
        worst = max(worst, float(rel))
    return worst


def newton_iteration_profile(spec, mesh, timegrid, deltas, config=SolverConfig()):
    """Mean Newton iterations per step for each regularization level; a
    diagnostic for the delta-monotonicity trend."""
    out = {}
    for d in deltas:
        cfg = replace(config, delta_reg=d) if d > 0 else config
        sol = solve(spec, mesh, timegrid, cfg)
        out[d] = float(sol.newton_iters.mean())
    return out
