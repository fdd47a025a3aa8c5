"""Computable distances for the three convergence modes tracked by the
stability sweeps, plus the time-translate decay diagnostic.

* sup-time lumped-L2 distance (uniform-in-time strong L2),
* weak-uniform distance pairing against a weighted orthonormal sine family
  (metrizes uniform-in-time weak-L2 convergence),
* the L^p-in-time W^{1,p} gradient gap.

Cross-mesh comparisons interpolate nodal data linearly onto the finer mesh,
which is P1-consistent and introduces no new extrema.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .discretization import Mesh1D, cell_gradients, lumped_mass


class GridMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class TestFunctionFamily:
    """phi_l(x) = sqrt(2) sin(l pi x), l = 1..count, with weights 2^-l.

    On a uniform mesh with N cells the lumped pairing reproduces exact L2
    orthonormality for l, m <= N-1; the constructor enforces count < N so
    the declared orthonormality tolerance actually holds.
    """

    mesh: Mesh1D
    count: int = 20

    __test__ = False  # name collides with pytest's collector prefix

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("family needs at least one function")
        if self.count >= self.mesh.n_cells:
            raise ValueError(
                f"family of size {self.count} aliases on a mesh with "
                f"{self.mesh.n_cells} cells; need count <= cells - 1"
            )
        gram = self.gram()
        if np.abs(gram - np.eye(self.count)).max() > 1e-10:
            raise ValueError("family is not orthonormal on the evaluation mesh")

    @cached_property
    def table(self) -> np.ndarray:
        ls = np.arange(1, self.count + 1)
        return math.sqrt(2.0) * np.sin(np.pi * ls[:, None] * self.mesh.nodes[None, :])

    @cached_property
    def weights(self) -> np.ndarray:
        return 0.5 ** np.arange(1, self.count + 1)

    def gram(self) -> np.ndarray:
        m = lumped_mass(self.mesh)
        t = self.table
        return (t * m[None, :]) @ t.T

    def pairings(self, v: np.ndarray) -> np.ndarray:
        """Lumped inner products <v, phi_l>; v may carry leading axes."""
        m = lumped_mass(self.mesh)
        return np.tensordot(np.asarray(v) * m, self.table, axes=([-1], [-1]))


@dataclass(frozen=True)
class Trajectory:
    """A time-indexed nodal field on a mesh."""

    times: np.ndarray
    values: np.ndarray  # (K+1, N+1)
    mesh: Mesh1D

    def __post_init__(self):
        if self.values.shape != (self.times.size, self.mesh.nodes.size):
            raise GridMismatchError("trajectory shape does not match grid")


def align_trajectories(a: Trajectory, b: Trajectory):
    """Interpolate both trajectories onto the finer mesh and the shared time
    slices; returns (times, A, B, mesh)."""
    fine = a.mesh if a.mesh.n_cells >= b.mesh.n_cells else b.mesh

    def on_fine(tr):
        if tr.mesh.n_cells == fine.n_cells and np.array_equal(tr.mesh.nodes, fine.nodes):
            return tr.values
        return np.vstack([np.interp(fine.nodes, tr.mesh.nodes, row) for row in tr.values])

    ia, ib = [], []
    j = 0
    for i, t in enumerate(a.times):
        while j < b.times.size and b.times[j] < t - 1e-12:
            j += 1
        if j < b.times.size and abs(b.times[j] - t) <= 1e-12:
            ia.append(i)
            ib.append(j)
    if not ia:
        raise GridMismatchError("no shared time slices")
    return a.times[np.asarray(ia)], on_fine(a)[np.asarray(ia)], on_fine(b)[np.asarray(ib)], fine


def sup_time_l2(a: Trajectory, b: Trajectory) -> float:
    """Max over shared time slices of the lumped-L2 distance."""
    _, A, B, mesh = align_trajectories(a, b)
    m = lumped_mass(mesh)
    d = A - B
    return float(np.sqrt((m[None, :] * d * d).sum(axis=1)).max())


def weak_uniform_metric(a: Trajectory, b: Trajectory, fam: TestFunctionFamily = None, count=20) -> float:
    """Max over time slices of sum_l 2^-l min(1, |<A(t)-B(t), phi_l>|).

    Bounded by sum_l 2^-l < 1 regardless of the fields."""
    _, A, B, mesh = align_trajectories(a, b)
    if fam is None or fam.mesh is not mesh:
        fam = TestFunctionFamily(mesh, count)
    pr = np.abs(fam.pairings(A - B))
    per_slice = (fam.weights[None, :] * np.minimum(1.0, pr)).sum(axis=1)
    return float(per_slice.max())


def lp_w1p_gap(zeta_a: Trajectory, zeta_b: Trajectory, p: float) -> float:
    """(sum_k tau_k sum_cells |d/dx (zeta_A - zeta_B)|^p h)^{1/p} over shared
    slices (left endpoints of the shared grid carry no weight)."""
    times, A, B, mesh = align_trajectories(zeta_a, zeta_b)
    taus = np.diff(times)
    total = 0.0
    for k in range(1, times.size):
        g = cell_gradients(mesh, A[k] - B[k])
        total += taus[k - 1] * float((np.abs(g) ** p * mesh.h).sum())
    return total ** (1.0 / p)


@dataclass
class TranslateProfile:
    taus: np.ndarray
    norms: np.ndarray
    exponent: float  # nan when undefined (all translates vanish)

    @property
    def defined(self) -> bool:
        return math.isfinite(self.exponent)


def time_translate_profile(traj: Trajectory, taus) -> TranslateProfile:
    """L2(0, T - tau; L2) norms of t -> v(t + tau) - v(t) and the fitted
    log-log decay exponent.

    Translate offsets snap to the nearest multiple of the time step.  A
    constant-in-time trajectory gives identically zero norms and an
    undefined (nan) exponent, flagged through ``defined``.
    """
    taus = np.asarray(taus, dtype=float)
    if taus.size < 3:
        raise ValueError("need at least 3 translate values to fit a decay exponent")
    times = traj.times
    dt = float(times[1] - times[0])
    if not np.allclose(np.diff(times), dt):
        raise ValueError("translate profile requires a uniform time grid")
    T = float(times[-1])
    if np.any(taus <= 0) or np.any(taus >= T):
        raise ValueError("translate offsets must lie inside (0, T)")
    m = lumped_mass(traj.mesh)
    norms = np.zeros(taus.size)
    snapped = np.zeros(taus.size)
    for i, tau in enumerate(taus):
        j = max(1, int(round(tau / dt)))
        snapped[i] = j * dt
        d = traj.values[j:] - traj.values[:-j]
        sq = (m[None, :] * d * d).sum(axis=1)
        # rectangle rule over the overlap window (0, T - tau)
        norms[i] = math.sqrt(dt * float(sq[:-1].sum())) if sq.size > 1 else math.sqrt(dt * float(sq.sum()))
    pos = norms > 0
    if pos.sum() < 3:
        return TranslateProfile(snapped, norms, math.nan)
    slope = np.polyfit(np.log(snapped[pos]), np.log(norms[pos]), 1)[0]
    return TranslateProfile(snapped, norms, float(slope))
