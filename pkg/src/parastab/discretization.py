"""1D mesh, lumped-mass P1 elements, and the nonlinear flux laws.

The flux a(x, s, xi) is coercive (a . xi >= a_lower |xi|^p, possibly minus a
tiny declared offset for regularized kinds), polynomially bounded and
monotone in xi.  Assembly uses midpoint quadrature per cell, exact for the
piecewise-constant gradients of P1 hats.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional

import numpy as np


@dataclass(frozen=True)
class Mesh1D:
    """Nodes 0 = x_0 < ... < x_N = 1 on the unit interval."""

    nodes: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        if nodes.ndim != 1 or nodes.size < 3:
            raise ValueError("mesh needs at least 3 nodes (2 cells)")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("nodes must be strictly increasing")
        if nodes[0] != 0.0 or nodes[-1] != 1.0:
            raise ValueError("mesh endpoints must be exactly 0 and 1")

    @property
    def n_cells(self) -> int:
        return self.nodes.size - 1

    @cached_property
    def h(self) -> np.ndarray:
        return np.diff(self.nodes)

    @cached_property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.nodes[1:] + self.nodes[:-1])


def build_mesh(n_cells: int) -> Mesh1D:
    """Uniform mesh with n_cells >= 2 cells."""
    if n_cells < 2:
        raise ValueError("need at least 2 cells")
    return Mesh1D(np.linspace(0.0, 1.0, n_cells + 1))


def lumped_mass(mesh: Mesh1D) -> np.ndarray:
    """Diagonal mass weights: half the adjacent cell lengths per node.

    The weights sum to the domain length 1."""
    h = mesh.h
    m = np.zeros(mesh.nodes.size)
    m[:-1] += 0.5 * h
    m[1:] += 0.5 * h
    return m


@dataclass(frozen=True)
class NodalField:
    values: np.ndarray
    mesh: Mesh1D

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if values.shape != mesh_shape(self.mesh):
            raise ValueError("field length must equal the node count")


def mesh_shape(mesh: Mesh1D):
    return (mesh.nodes.size,)


@dataclass(frozen=True)
class FluxLaw:
    """Leray-Lions flux a(x, s, xi) with its structure constants.

    ``a`` and the partial derivatives ``da_dxi``, ``da_ds`` are vectorized
    over cell arrays.  ``a_lower`` is the coercivity constant, ``mu`` the
    growth coefficient, ``a_bar`` the x-dependent growth offset.
    ``coercivity_offset`` is the additive slack Theta in
    a . xi >= a_lower |xi|^p - Theta (zero except for regularized p < 2).
    """

    p: float
    kind: str
    a: Callable
    da_dxi: Callable
    da_ds: Callable
    a_lower: float
    mu: float
    a_bar: Callable
    strict_monotone: bool = True
    eps_grad: float = 0.0
    coercivity_offset: float = 0.0
    lam: Optional[Callable] = None
    lam_bounds: Optional[tuple] = None
    name: str = "custom"

    def __post_init__(self):
        if self.p <= 1.0:
            raise ValueError("exponent p must exceed 1")
        if self.a_lower <= 0 or self.mu <= 0:
            raise ValueError("coercivity and growth constants must be positive")
        if self.lam_bounds is not None:
            lo, hi = self.lam_bounds
            if lo <= 0 or hi < lo:
                raise ValueError("lambda bounds must satisfy 0 < lower <= upper")

    @property
    def p_conj(self) -> float:
        return self.p / (self.p - 1.0)

    def scale(self, factor: float) -> "FluxLaw":
        """The flux factor * a; coercivity constant is unchanged (factor >= 1
        expected), growth scales."""
        if factor < 1.0:
            raise ValueError("scaling below 1 would weaken coercivity")
        base_a, base_dxi, base_ds, base_bar = self.a, self.da_dxi, self.da_ds, self.a_bar
        return FluxLaw(
            p=self.p,
            kind=self.kind,
            a=lambda x, s, xi: factor * base_a(x, s, xi),
            da_dxi=lambda x, s, xi: factor * base_dxi(x, s, xi),
            da_ds=lambda x, s, xi: factor * base_ds(x, s, xi),
            a_lower=self.a_lower,
            mu=factor * self.mu,
            a_bar=lambda x: factor * base_bar(x),
            strict_monotone=self.strict_monotone,
            eps_grad=self.eps_grad,
            coercivity_offset=factor * self.coercivity_offset,
            lam=(lambda x: factor * self.lam(x)) if self.lam is not None else None,
            lam_bounds=tuple(factor * v for v in self.lam_bounds) if self.lam_bounds else None,
            name=f"{self.name}*{factor:g}",
        )


def linear_heterogeneous(lam=None, lam_bounds=None, name="linear-hetero") -> FluxLaw:
    """a(x, s, xi) = lambda(x) xi with lambda in [lam_lo, lam_hi]; p = 2."""
    if lam is None:
        lam_fn = lambda x: np.ones_like(np.asarray(x, dtype=float))
        bounds = (1.0, 1.0)
    elif np.isscalar(lam):
        c = float(lam)
        lam_fn = lambda x: np.full_like(np.asarray(x, dtype=float), c)
        bounds = (c, c)
    else:
        lam_fn = lam
        if lam_bounds is None:
            xs = np.linspace(0, 1, 2001)
            v = np.asarray(lam_fn(xs))
            bounds = (float(v.min()), float(v.max()))
        else:
            bounds = lam_bounds
    if bounds[0] <= 0:
        raise ValueError("lambda must be uniformly positive")
    return FluxLaw(
        p=2.0,
        kind="linear-hetero",
        a=lambda x, s, xi: lam_fn(x) * xi,
        da_dxi=lambda x, s, xi: lam_fn(x) * np.ones_like(xi),
        da_ds=lambda x, s, xi: np.zeros_like(xi),
        a_lower=bounds[0],
        mu=bounds[1],
        a_bar=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        strict_monotone=True,
        lam=lam_fn,
        lam_bounds=bounds,
        name=name,
    )


def mobility_flux(k0=1.0, gain=0.5, name="mobility") -> FluxLaw:
    """a(x, s, xi) = K(x, s) xi with K = k0 (1 + gain s^2/(1+s^2)).

    K is bounded in [k0, k0 (1+gain)] and smooth in s, so the Newton
    Jacobian picks up a bounded da/ds term."""
    if k0 <= 0 or gain < 0:
        raise ValueError("mobility needs k0 > 0 and gain >= 0")

    def K(x, s):
        s = np.asarray(s, dtype=float)
        return k0 * (1.0 + gain * s * s / (1.0 + s * s))

    def dK_ds(x, s):
        s = np.asarray(s, dtype=float)
        return k0 * gain * 2.0 * s / (1.0 + s * s) ** 2

    return FluxLaw(
        p=2.0,
        kind="mobility",
        a=lambda x, s, xi: K(x, s) * xi,
        da_dxi=lambda x, s, xi: K(x, s) * np.ones_like(xi),
        da_ds=lambda x, s, xi: dK_ds(x, s) * xi,
        a_lower=k0,
        mu=k0 * (1.0 + gain),
        a_bar=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        strict_monotone=True,
        name=name,
    )


def p_laplace_flux(p: float, eps_grad: Optional[float] = None, name=None) -> FluxLaw:
    """a(xi) = (|xi|^2 + eps^2)^{(p-2)/2} xi.

    For p < 2 the default eps_grad = 1e-6 keeps the flux differentiable at
    xi = 0; coercivity then holds with constant 2^{(p-2)/2} up to the
    additive offset a_lower * eps^p, which the audits account for.
    """
    if p <= 1.0:
        raise ValueError("exponent p must exceed 1")
    if eps_grad is None:
        eps_grad = 1e-6 if p < 2.0 else 0.0
    eps2 = eps_grad * eps_grad

    def a(x, s, xi):
        xi = np.asarray(xi, dtype=float)
        return (xi * xi + eps2) ** ((p - 2.0) / 2.0) * xi

    def da_dxi(x, s, xi):
        xi = np.asarray(xi, dtype=float)
        base = xi * xi + eps2
        return base ** ((p - 2.0) / 2.0) + (p - 2.0) * xi * xi * base ** ((p - 4.0) / 2.0)

    if p >= 2.0 and eps_grad == 0.0:
        a_lower, offset = 1.0, 0.0
    elif p >= 2.0:
        a_lower, offset = 1.0, 0.0  # (xi^2+eps^2)^{(p-2)/2} >= |xi|^{p-2}
    else:
        a_lower = 2.0 ** ((p - 2.0) / 2.0)
        offset = a_lower * eps_grad ** p

    return FluxLaw(
        p=p,
        kind="p-laplace",
        a=a,
        da_dxi=da_dxi,
        da_ds=lambda x, s, xi: np.zeros_like(np.asarray(xi, dtype=float)),
        a_lower=a_lower,
        mu=2.0 ** max(0.0, (p - 2.0) / 2.0) if p < 2 else 2.0 ** ((p - 2.0) / 2.0),
        a_bar=lambda x: np.full_like(np.asarray(x, dtype=float), eps_grad ** (p - 1.0)),
        strict_monotone=True,
        eps_grad=eps_grad,
        coercivity_offset=offset,
        name=name or f"p-laplace-p{p:g}",
    )


FLUX_PRESETS = ("linear-hetero", "mobility", "p-laplace")


def cell_gradients(mesh: Mesh1D, z: np.ndarray) -> np.ndarray:
    return np.diff(z) / mesh.h


def assemble_flux_residual(mesh: Mesh1D, flux: FluxLaw, s_field: np.ndarray, z_field: np.ndarray) -> np.ndarray:
    """Nodal residual of -div a(x, s, grad z) against the P1 hats.

    Entry i receives a(.)*dphi_i*h from each adjacent cell, with the flux
    evaluated at the cell midpoint (x, s, grad z); boundary rows are zeroed
    because the test space vanishes on the boundary.
    """
    s_field = np.asarray(s_field, dtype=float)
    z_field = np.asarray(z_field, dtype=float)
    if s_field.shape != mesh_shape(mesh) or z_field.shape != mesh_shape(mesh):
        raise ValueError("fields must live on the given mesh")
    grad = cell_gradients(mesh, z_field)
    s_mid = 0.5 * (s_field[1:] + s_field[:-1])
    a_val = np.asarray(flux.a(mesh.midpoints, s_mid, grad))
    out = np.zeros_like(z_field)
    out[:-1] -= a_val
    out[1:] += a_val
    out[0] = 0.0
    out[-1] = 0.0
    return out


def flux_quadratic_form(mesh: Mesh1D, flux: FluxLaw, s_field, z_field) -> float:
    """Sum over cells of a(x, s, grad z) . grad z * h, the discrete
    dissipation integral paired with the residual."""
    grad = cell_gradients(mesh, np.asarray(z_field, dtype=float))
    s_mid = 0.5 * (np.asarray(s_field)[1:] + np.asarray(s_field)[:-1])
    a_val = np.asarray(flux.a(mesh.midpoints, s_mid, grad))
    return float(np.sum(a_val * grad * mesh.h))


def flux_monotonicity_probe(flux: FluxLaw, samples) -> float:
    """Minimum of (a(x,s,xi) - a(x,s,chi)) (xi - chi) over the samples.

    samples: iterable of (x, s, xi, chi) or arrays of shape (4, n)."""
    arr = np.asarray(samples, dtype=float)
    if arr.ndim == 2 and arr.shape[0] != 4:
        arr = arr.T
    x, s, xi, chi = arr
    prod = (np.asarray(flux.a(x, s, xi)) - np.asarray(flux.a(x, s, chi))) * (xi - chi)
    return float(prod.min())


def coercivity_slack(mesh: Mesh1D, flux: FluxLaw, s_field, z_field) -> float:
    """Integrated coercivity audit: a.grad z integral minus
    a_lower * |grad z|^p integral (plus the declared offset)."""
    grad = cell_gradients(mesh, np.asarray(z_field, dtype=float))
    lhs = flux_quadratic_form(mesh, flux, s_field, z_field)
    rhs = flux.a_lower * float(np.sum(np.abs(grad) ** flux.p * mesh.h))
    return lhs - rhs + flux.coercivity_offset


def stiffness_matrix_banded(mesh: Mesh1D, lam_cells: np.ndarray) -> np.ndarray:
    """Banded (3, N+1) representation of the P1 stiffness with cellwise
    coefficient lam; rows follow scipy.linalg.solve_banded layout."""
    n = mesh.nodes.size
    w = lam_cells / mesh.h
    ab = np.zeros((3, n))
    ab[1, :-1] += w
    ab[1, 1:] += w
    ab[0, 1:] = -w
    ab[2, :-1] = -w
    return ab


def apply_banded(ab: np.ndarray, v: np.ndarray) -> np.ndarray:
    out = ab[1] * v
    out[:-1] += ab[0, 1:] * v[1:]
    out[1:] += ab[2, :-1] * v[:-1]
    return out
