"""Backward dual solves and the duality-based uniqueness witness for the
linear flux a = lambda(x) d/dx zeta(u) with p = 2.

Two solutions of the same problem satisfy, for the combined difference
u_d = beta(u1)+zeta(u1)-beta(u2)-zeta(u2) and the ratio field
q = (zeta(u1)-zeta(u2))/u_d in [0, 1],

    int int u_d [ (1-q) dt(psi) + q div(lambda dx psi) ] = 0

for any test function psi with psi(T) = 0.  Solving the backward problem
(1-g) dt(psi) + g div(lambda dx psi) = w with the regularized coefficient
g = q_eps = (1-2 eps) q + eps turns this into a bound on |int int u_d w|
that vanishes like sqrt(eps), which is the uniqueness argument made
quantitative.  All of it is discretized compatibly with the primal scheme
(lumped masses, backward differences, lumped weak divergence), so the
identities hold up to Newton residuals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
from scipy.linalg import solve_banded

from .discretization import Mesh1D, cell_gradients, lumped_mass
from .solver import DiscreteSolution, ProblemSpec


@dataclass(frozen=True)
class SpaceTimeBump:
    """Smooth compactly supported space-time test profile with its exact
    time derivative."""

    fn: Callable       # (x, t) -> array
    dt_fn: Callable
    name: str = "bump"


def sine_bump(horizon: float, kx: int = 1, kt: int = 1) -> SpaceTimeBump:
    """w(x, t) = sin(kx pi x)^2 sin(kt pi t / T)^2; vanishes with its first
    derivatives on the whole parabolic boundary."""

    def fn(x, t):
        x = np.asarray(x, dtype=float)
        return np.sin(kx * np.pi * x) ** 2 * math.sin(kt * math.pi * t / horizon) ** 2

    def dt_fn(x, t):
        x = np.asarray(x, dtype=float)
        s = math.sin(kt * math.pi * t / horizon)
        c = math.cos(kt * math.pi * t / horizon)
        return np.sin(kx * np.pi * x) ** 2 * 2.0 * s * c * (kt * math.pi / horizon)

    return SpaceTimeBump(fn, dt_fn, name=f"sine-bump-kx{kx}-kt{kt}")


@dataclass(frozen=True)
class DualProblemSpec:
    """Data of the backward problem: coefficient g with values in
    [g_min, 1-g_min], conductivity lambda(x) in [lam_lo, lam_hi], source
    bump w.  ``g`` is a callable (x, t) or a precomputed (K+1, N+1) array."""

    g: Union[Callable, np.ndarray]
    lam: Callable
    lam_bounds: tuple
    w: SpaceTimeBump
    g_min: float

    def __post_init__(self):
        if not (0.0 < self.g_min < 0.5):
            raise ValueError("g_min must lie in (0, 1/2)")
        lo, hi = self.lam_bounds
        if lo <= 0 or hi < lo:
            raise ValueError("lambda bounds must satisfy 0 < lower <= upper")

    def g_slice(self, nodes: np.ndarray, k: int, t: float) -> np.ndarray:
        if callable(self.g):
            vals = np.asarray(self.g(nodes, t), dtype=float)
        else:
            vals = np.asarray(self.g[k], dtype=float)
        if vals.min() < self.g_min - 1e-12 or vals.max() > 1.0 - self.g_min + 1e-12:
            raise ValueError("g leaves [g_min, 1 - g_min] on the grid")
        return vals


@dataclass
class DualSolution:
    psi: np.ndarray     # (K+1, N+1), psi[K] = 0
    times: np.ndarray
    mesh: Mesh1D
    max_step_residual: float


def compute_ud_q(sol1: DiscreteSolution, sol2: DiscreteSolution, threshold: float = 1e-14):
    """Difference field u_d = beta(u1)+zeta(u1)-beta(u2)-zeta(u2) and the
    ratio q = (zeta(u1)-zeta(u2))/u_d (0 where u_d vanishes); q in [0, 1]."""
    if sol1.U.shape != sol2.U.shape or not np.array_equal(sol1.times, sol2.times):
        raise ValueError("solutions must share the space-time grid")
    dz = sol1.zetaU - sol2.zetaU
    ud = sol1.betaU - sol2.betaU + dz
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(np.abs(ud) > threshold, dz / np.where(ud == 0, 1.0, ud), 0.0)
    if q.min(initial=0.0) < -1e-12 or q.max(initial=0.0) > 1.0 + 1e-12:
        raise AssertionError("monotonicity violated: q left [0, 1]")
    return ud, np.clip(q, 0.0, 1.0)


def regularize_q(q: np.ndarray, eps: float) -> np.ndarray:
    """q_eps = (1 - 2 eps) q + eps, pushed into [eps, 1-eps]; asserts the two
    pointwise regularization inequalities (q_eps - q)^2 / q_eps <= eps and
    (q_eps - q)^2 / (1 - q_eps) <= eps."""
    if not (0.0 < eps < 0.5):
        raise ValueError("eps must lie in (0, 1/2)")
    q = np.asarray(q, dtype=float)
    if q.min(initial=0.0) < 0.0 or q.max(initial=0.0) > 1.0:
        raise ValueError("q must take values in [0, 1]")
    qe = (1.0 - 2.0 * eps) * q + eps
    d2 = (qe - q) ** 2
    tol = eps * (1.0 + 1e-12) + 1e-15
    assert np.all(d2 / qe <= tol), "regularization inequality (lower) failed"
    assert np.all(d2 / (1.0 - qe) <= tol), "regularization inequality (upper) failed"
    return qe


def solve_dual_backward(spec: DualProblemSpec, mesh: Mesh1D, timegrid) -> DualSolution:
    """Backward Euler from psi(T) = 0: at each reversed step solve

        [(1-g)/tau M + g A_lambda] psi^k = (1-g)/tau M psi^{k+1} - M w^k

    (tridiagonal; g and w frozen nodally per slice).  The matrix is strictly
    diagonally dominant for g in [g_min, 1-g_min] and lambda >= lam_lo > 0,
    hence never singular; the discrete residual is verified per step."""
    times = np.asarray(timegrid, dtype=float)
    n = mesh.nodes.size
    K = times.size - 1
    m = lumped_mass(mesh)
    lam_cells = np.asarray(spec.lam(mesh.midpoints), dtype=float)
    wc = lam_cells / mesh.h
    psi = np.zeros((K + 1, n))
    worst = 0.0
    for k in range(K - 1, -1, -1):
        tau = times[k + 1] - times[k]
        g = spec.g_slice(mesh.nodes, k, times[k])
        wk = np.asarray(spec.w.fn(mesh.nodes, times[k]), dtype=float)
        gi = g[1:-1]
        mi = m[1:-1]
        diag = (1.0 - gi) * mi / tau + gi * (wc[:-1] + wc[1:])
        ab = np.zeros((3, n - 2))
        ab[1] = diag
        ab[0, 1:] = -gi[:-1] * wc[1:-1]   # row j couples col j+1 through cell j+1
        ab[2, :-1] = -gi[1:] * wc[1:-1]   # row j+1 couples col j through cell j+1
        rhs = (1.0 - gi) * mi / tau * psi[k + 1, 1:-1] - mi * wk[1:-1]
        psi[k, 1:-1] = solve_banded((1, 1), ab, rhs)
        res = _dual_step_residual(mesh, m, wc, g, psi[k + 1], psi[k], tau, wk)
        worst = max(worst, res)
        scale = max(1.0, float(np.abs(rhs).max()))
        if res > 1e-10 * scale:
            raise AssertionError(f"dual step residual {res:.2e} exceeds tolerance")
    return DualSolution(psi=psi, times=times, mesh=mesh, max_step_residual=worst)


def _dual_step_residual(mesh, m, wc, g, psi_next, psi_cur, tau, wk):
    div = _lumped_divergence(mesh, m, wc, psi_cur)
    r = (1.0 - g) * (psi_next - psi_cur) / tau + g * div - wk
    return float(np.abs(r[1:-1]).max())


def _lumped_divergence(mesh, m, wc, psi):
    """Lumped weak divergence: (div lambda dx psi)_i = -(A psi)_i / m_i."""
    flux = wc * np.diff(psi)
    out = np.zeros_like(psi)
    out[1:-1] = (flux[1:] - flux[:-1]) / m[1:-1]
    return out


@dataclass
class DualEnergyCheck:
    lhs: float
    rhs: float
    c0: float
    w_norms_sq: float
    sbp_dissipation: float = 0.0   # extra nonnegative term in the discrete
                                   # summation-by-parts identity
    grad_psi_norm: float = 0.0
    grad_psi_bound: float = 0.0

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def ok(self) -> bool:
        return (
            self.slack >= 0.0
            and self.sbp_dissipation >= -1e-12 * max(1.0, abs(self.lhs))
            and self.grad_psi_norm <= self.grad_psi_bound * (1.0 + 1e-12) + 1e-14
        )


def dual_energy_constant(lam_bounds, horizon: float, diam: float = 1.0) -> float:
    """C0 of the backward energy bound, assembled from the explicit chain
    (Cauchy-Schwarz on the two factors of the gradient bound):

        C0 = (2/lam_lo) sqrt((lam_hi^2 + D^2)(T^2 lam_hi^2 + D^2 + T^2 D^2)).

    Depends only on the horizon, the domain diameter and the lambda bounds,
    not on g_min."""
    lo, hi = lam_bounds
    T = horizon
    return (2.0 / lo) * math.sqrt((hi * hi + diam * diam) * (T * T * hi * hi + diam * diam + T * T * diam * diam))


def dual_energy_check(dual: DualSolution, spec: DualProblemSpec) -> DualEnergyCheck:
    """Discrete check of

        int int [(1-g)(dt psi)^2 + g (div lambda dx psi)^2]
            <= C0 (||dx w||^2 + ||w||^2 + ||dt w||^2).

    dt psi is the backward difference of the stepping scheme and the
    divergence the lumped weak one.  Two backward-regularity facts are
    verified alongside: the summation-by-parts identity

        sum_k tau <dt psi, div(lambda dx psi)> = (1/2)||dx psi(0)||_lambda^2
                                                    + dissipation,

    whose extra dissipation term must be nonnegative, and the gradient
    bound (lam_lo/2) ||dx psi||_{L2L2} <= T lam_hi ||dx w|| +
    diam (||w|| + T ||dt w||)."""
    mesh, times, psi = dual.mesh, dual.times, dual.psi
    m = lumped_mass(mesh)
    lam_cells = np.asarray(spec.lam(mesh.midpoints), dtype=float)
    wc = lam_cells / mesh.h
    T = float(times[-1])
    lhs = 0.0
    wn_grad = 0.0
    wn_val = 0.0
    wn_dt = 0.0
    sbp_product = 0.0
    grad_psi_sq = 0.0
    for k in range(times.size - 1):
        tau = times[k + 1] - times[k]
        g = spec.g_slice(mesh.nodes, k, times[k])
        dt_psi = (psi[k + 1] - psi[k]) / tau
        div = _lumped_divergence(mesh, m, wc, psi[k])
        lhs += tau * float((m * ((1.0 - g) * dt_psi ** 2 + g * div ** 2)).sum())
        sbp_product += tau * float((m * dt_psi * div).sum())
        grad_psi_sq += tau * float((lam_cells * cell_gradients(mesh, psi[k]) ** 2 * mesh.h).sum())
        wk = np.asarray(spec.w.fn(mesh.nodes, times[k]), dtype=float)
        dwk = np.asarray(spec.w.dt_fn(mesh.nodes, times[k]), dtype=float)
        wn_grad += tau * float((cell_gradients(mesh, wk) ** 2 * mesh.h).sum())
        wn_val += tau * float((m * wk * wk).sum())
        wn_dt += tau * float((m * dwk * dwk).sum())
    grad0_sq = float((lam_cells * cell_gradients(mesh, psi[0]) ** 2 * mesh.h).sum())
    sbp_dissipation = sbp_product - 0.5 * grad0_sq
    lam_lo, lam_hi = spec.lam_bounds
    diam = 1.0
    grad_psi_bound = (2.0 / lam_lo) * (
        T * lam_hi * math.sqrt(wn_grad) + diam * (math.sqrt(wn_val) + T * math.sqrt(wn_dt))
    )
    c0 = dual_energy_constant(spec.lam_bounds, T)
    wsq = wn_grad + wn_val + wn_dt
    return DualEnergyCheck(
        lhs=float(lhs), rhs=float(c0 * wsq), c0=c0, w_norms_sq=float(wsq),
        sbp_dissipation=float(sbp_dissipation),
        grad_psi_norm=float(math.sqrt(grad_psi_sq)),
        grad_psi_bound=float(grad_psi_bound),
    )


@dataclass
class WitnessRow:
    eps: float
    witness: float
    bound: float
    energy_lhs: float
    energy_rhs: float


def uniqueness_witness(sol1: DiscreteSolution, sol2: DiscreteSolution, spec: ProblemSpec,
                       w: Optional[SpaceTimeBump] = None, eps_ladder=(0.2, 0.1, 0.05),
                       g_min_floor: float = 1e-12):
    """Per-eps evaluation of |int int u_d w| against the duality bound
    sqrt(2 eps C0 (||dx w||^2 + ||w||^2 + ||dt w||^2) ||u_d||^2).

    Requires the linear heterogeneous flux with p = 2 (the dual problem is
    linear only there).  For solutions of identical data the witness is
    Newton noise and sits below the bound for every eps."""
    if spec.flux.kind != "linear-hetero" or spec.flux.p != 2.0:
        raise ValueError("uniqueness witness requires the linear flux with p = 2")
    if w is None:
        w = sine_bump(spec.horizon)
    ud, q = compute_ud_q(sol1, sol2)
    mesh, times = sol1.mesh, sol1.times
    m = lumped_mass(mesh)
    taus = np.diff(times)
    K = taus.size

    w_nodal = np.vstack([np.asarray(w.fn(mesh.nodes, t), dtype=float) for t in times])
    # the summation-by-parts identity pairs interior slices k = 1..K-1
    wit_sum = 0.0
    ud_sq = 0.0
    for k in range(1, K):
        wit_sum += taus[k - 1] * float((m * ud[k] * w_nodal[k]).sum())
        ud_sq += taus[k - 1] * float((m * ud[k] * ud[k]).sum())
    witness = abs(wit_sum)

    rows = []
    for eps in eps_ladder:
        qe = regularize_q(q, eps)
        dspec = DualProblemSpec(
            g=qe, lam=spec.flux.lam, lam_bounds=spec.flux.lam_bounds, w=w,
            g_min=max(eps * (1.0 - 1e-9), g_min_floor),
        )
        dual = solve_dual_backward(dspec, mesh, times)
        chk = dual_energy_check(dual, dspec)
        bound = math.sqrt(2.0 * eps * chk.rhs * ud_sq)
        rows.append(WitnessRow(eps=float(eps), witness=witness, bound=float(bound),
                               energy_lhs=chk.lhs, energy_rhs=chk.rhs))
    return rows
