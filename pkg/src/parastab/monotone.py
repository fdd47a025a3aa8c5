"""Exact calculus for monotone scalar nonlinearities and their convex potentials.

The model couples two nondecreasing Lipschitz functions beta and zeta (both
vanishing at 0) through nu(s) = int_0^s zeta'(q) beta'(q) dq and the convex
potential B(z) = int_0^z zeta(beta_r(sigma)) dsigma, where beta_r is the
right inverse of beta (the level-set point closest to 0).  In the canonical
piecewise-linear mode every one of these objects has a closed form: nu is
piecewise linear, B is piecewise quadratic, and all the inequalities tying
them together can be checked to machine precision.  A quadrature-backed
smooth mode covers mollified nonlinearities.

The same data admits a maximal monotone operator view: the curve
{(zeta(s), beta(s)) : s in R} is the graph of a sublinear maximal monotone
operator, and conversely any such graph splits through its resolvent into a
(zeta, beta) pair.  Both directions are implemented here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional, Sequence, Union

import numpy as np
from numpy.polynomial.legendre import leggauss


class OutsideRangeError(ValueError):
    """Requested value lies outside the closure of the range of beta."""


class NonMaximalGraphError(ValueError):
    """Input curve has a gap or violates monotonicity, so it cannot be the
    graph of a maximal monotone operator."""


class QuadratureError(RuntimeError):
    def __init__(self, achieved, requested):
        self.achieved = achieved
        self.requested = requested
        super().__init__(
            f"quadrature did not converge: achieved {achieved:.3e}, "
            f"requested {requested:.3e}"
        )


def truncate(k: float, s):
    """Clip s to [-k, k].  1-Lipschitz, odd, identity on [-k, k]."""
    if k <= 0:
        raise ValueError("truncation level k must be positive")
    return np.clip(s, -k, k)


# ---------------------------------------------------------------------------
# scalar nonlinearities
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PiecewiseLinear:
    """Nondecreasing piecewise-linear function with linear tails.

    ``knots`` must be strictly increasing and contain 0; ``values`` are the
    function values at the knots with value 0 at knot 0.  ``left_slope`` and
    ``right_slope`` extend the function linearly beyond the first and last
    knot.  All slopes must be nonnegative.
    """

    knots: np.ndarray
    values: np.ndarray
    left_slope: float
    right_slope: float

    def __post_init__(self):
        knots = np.atleast_1d(np.asarray(self.knots, dtype=float))
        values = np.atleast_1d(np.asarray(self.values, dtype=float))
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "values", values)
        if knots.ndim != 1 or knots.shape != values.shape:
            raise ValueError("knots and values must be 1d arrays of equal length")
        if knots.size == 0:
            raise ValueError("need at least one knot")
        if np.any(np.diff(knots) <= 0):
            raise ValueError("knots must be strictly increasing")
        i0 = np.searchsorted(knots, 0.0)
        if i0 >= knots.size or knots[i0] != 0.0:
            raise ValueError("knot set must contain 0")
        if values[i0] != 0.0:
            raise ValueError("function must vanish at 0")
        if self.left_slope < 0 or self.right_slope < 0:
            raise ValueError("tail slopes must be nonnegative")
        if np.any(np.diff(values) < -1e-12 * max(1.0, np.abs(values).max())):
            raise ValueError("values must be nondecreasing")

    mode = "piecewise-linear"

    @classmethod
    def identity(cls):
        return cls(np.array([0.0]), np.array([0.0]), 1.0, 1.0)

    @cached_property
    def slopes(self) -> np.ndarray:
        return np.diff(self.values) / np.diff(self.knots)

    @cached_property
    def _ext_slopes(self) -> np.ndarray:
        return np.concatenate(([self.left_slope], self.slopes, [self.right_slope]))

    @cached_property
    def lipschitz_const(self) -> float:
        return float(self._ext_slopes.max(initial=0.0))

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        out = np.interp(s, self.knots, self.values)
        lo = s < self.knots[0]
        hi = s > self.knots[-1]
        if np.any(lo):
            out = np.where(lo, self.values[0] + self.left_slope * (s - self.knots[0]), out)
        if np.any(hi):
            out = np.where(hi, self.values[-1] + self.right_slope * (s - self.knots[-1]), out)
        return out if out.ndim else float(out)

    def derivative(self, s):
        """Slope at s; at a knot the slope of the interval to its right."""
        s = np.asarray(s, dtype=float)
        idx = np.searchsorted(self.knots, s, side="right")
        out = self._ext_slopes[idx]
        return out if out.ndim else float(out)

    def antiderivative(self, s):
        """Integral of the function from 0 to s (piecewise quadratic)."""
        s = np.asarray(s, dtype=float)
        k, v = self.knots, self.values
        seg = 0.5 * (v[1:] + v[:-1]) * np.diff(k)
        cum = np.concatenate(([0.0], np.cumsum(seg)))
        i0 = int(np.searchsorted(k, 0.0))
        cum -= cum[i0]
        idx = np.searchsorted(k, s, side="right")
        base = np.clip(idx - 1, 0, k.size - 1)
        ds = s - k[base]
        slope = self._ext_slopes[idx]
        out = cum[base] + v[base] * ds + 0.5 * slope * ds * ds
        return out if out.ndim else float(out)

    def add_identity(self, delta: float) -> "PiecewiseLinear":
        return PiecewiseLinear(
            self.knots,
            self.values + delta * self.knots,
            self.left_slope + delta,
            self.right_slope + delta,
        )

    def scale(self, c: float) -> "PiecewiseLinear":
        if c < 0:
            raise ValueError("scale factor must be nonnegative")
        return PiecewiseLinear(self.knots, c * self.values, c * self.left_slope, c * self.right_slope)

    def flat_intervals(self):
        """Closed intervals (lo, hi) on which the slope vanishes; tails give
        semi-infinite intervals."""
        out = []
        if self.left_slope == 0.0:
            out.append((-math.inf, float(self.knots[0])))
        for j, sl in enumerate(self.slopes):
            if sl == 0.0:
                out.append((float(self.knots[j]), float(self.knots[j + 1])))
        if self.right_slope == 0.0:
            out.append((float(self.knots[-1]), math.inf))
        return out

    def mirrored(self) -> "PiecewiseLinear":
        """The function s -> -f(-s); swaps tails and reverses knots."""
        return PiecewiseLinear(
            -self.knots[::-1], -self.values[::-1], self.right_slope, self.left_slope
        )

    def range_bounds(self):
        """(inf, sup) of the range; infinite when the matching tail grows."""
        lo = -math.inf if self.left_slope > 0 else float(self.values[0])
        hi = math.inf if self.right_slope > 0 else float(self.values[-1])
        return lo, hi

    def mollify(self, radius: float) -> "SmoothFunction":
        """Average over a sliding window of half-width ``radius`` and re-pin
        the origin.  Keeps monotonicity and the Lipschitz constant; the sup
        distance to the original is at most lipschitz * radius."""
        if radius <= 0:
            raise ValueError("mollification radius must be positive")
        gaps = np.diff(self.knots)
        if gaps.size and radius > 0.5 * gaps.min():
            raise ValueError(
                f"mollification radius {radius} exceeds half the smallest "
                f"breakpoint spacing {gaps.min()}"
            )
        r = float(radius)
        offset = (self.antiderivative(r) - self.antiderivative(-r)) / (2 * r)

        def fn(s, _self=self, _r=r, _c=offset):
            s = np.asarray(s, dtype=float)
            return (_self.antiderivative(s + _r) - _self.antiderivative(s - _r)) / (2 * _r) - _c

        def dfn(s, _self=self, _r=r):
            s = np.asarray(s, dtype=float)
            return (_self(s + _r) - _self(s - _r)) / (2 * _r)

        hints = np.unique(np.concatenate([self.knots - r, self.knots + r, [0.0]]))
        return SmoothFunction(
            fn=fn,
            dfn=dfn,
            lipschitz_const=self.lipschitz_const,
            knots_hint=hints,
            tail_slopes=(self.left_slope, self.right_slope),
        )


@dataclass(frozen=True)
class SmoothFunction:
    """Quadrature-backed nondecreasing nonlinearity.

    ``knots_hint`` lists the points where the function (or its derivative)
    has kinks; integrals split there so that Gauss panels stay spectrally
    accurate.  ``tail_slopes`` give the exact slopes beyond the outermost
    hints, which lets integrals extend past the hinted window.
    """

    fn: Callable
    dfn: Callable
    lipschitz_const: float
    knots_hint: np.ndarray
    tail_slopes: tuple = (None, None)
    tol: float = 1e-10

    mode = "quadrature-backed-smooth"

    def __call__(self, s):
        return self.fn(np.asarray(s, dtype=float))

    def derivative(self, s):
        return self.dfn(np.asarray(s, dtype=float))

    def flat_intervals(self):
        out = []
        if self.tail_slopes[0] == 0.0:
            out.append((-math.inf, float(self.knots_hint[0])))
        if self.tail_slopes[1] == 0.0:
            out.append((float(self.knots_hint[-1]), math.inf))
        return out

    def range_bounds(self):
        lo = float(self(self.knots_hint[0])) if self.tail_slopes[0] == 0.0 else -math.inf
        hi = float(self(self.knots_hint[-1])) if self.tail_slopes[1] == 0.0 else math.inf
        return lo, hi


ScalarNonlinearity = Union[PiecewiseLinear, SmoothFunction]


def merged_knots(f: ScalarNonlinearity, g: ScalarNonlinearity) -> np.ndarray:
    ka = f.knots if isinstance(f, PiecewiseLinear) else f.knots_hint
    kb = g.knots if isinstance(g, PiecewiseLinear) else g.knots_hint
    return np.unique(np.concatenate([ka, kb, [0.0]]))


class CumulativeIntegral:
    """s -> int_0^s w(q) dq for a piecewise-smooth integrand w.

    Knot-to-knot panels are precomputed with Gauss-Legendre quadrature and a
    higher-order panel is used as an error estimate; evaluation adds a
    partial panel from the nearest knot.  Exact for piecewise polynomials of
    degree < 2*order between knots.
    """

    def __init__(self, integrand, knots, order=10, tol=1e-10):
        self.w = integrand
        self.knots = np.asarray(knots, dtype=float)
        if 0.0 not in self.knots:
            raise ValueError("knot set must contain 0")
        self.tol = tol
        self._xg, self._wg = leggauss(order)
        xg2, wg2 = leggauss(2 * order)
        seg = self._panels(self._xg, self._wg)
        seg2 = self._panels(xg2, wg2)
        achieved = float(np.abs(seg - seg2).sum())
        if achieved > tol:
            raise QuadratureError(achieved, tol)
        cum = np.concatenate(([0.0], np.cumsum(seg2)))
        i0 = int(np.searchsorted(self.knots, 0.0))
        self._cum = cum - cum[i0]

    def _panels(self, xg, wg):
        a, b = self.knots[:-1], self.knots[1:]
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        nodes = mid[None, :] + half[None, :] * xg[:, None]
        return half * (wg[:, None] * self.w(nodes)).sum(axis=0)

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        shape = s.shape
        s = np.atleast_1d(s).ravel()
        idx = np.searchsorted(self.knots, s, side="right")
        base_i = np.clip(idx - 1, 0, self.knots.size - 1)
        base = self.knots[base_i]
        half = 0.5 * (s - base)
        nodes = (base + half)[None, :] + half[None, :] * self._xg[:, None]
        tail = half * (self._wg[:, None] * self.w(nodes)).sum(axis=0)
        out = self._cum[base_i] + tail
        return float(out[0]) if shape == () else out.reshape(shape)


# ---------------------------------------------------------------------------
# the (beta, zeta) pair and its derived objects
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NonlinearityPair:
    """A (beta, zeta) pair with its coercivity constants and exponent case.

    ``exponent_case`` is "I" (p >= 2, no extra requirement), "II" (needs
    |beta(s)| >= m3|s| - m4) or "III" (additionally beta strictly
    increasing).  nu, the composed potential and the range potential are
    derived lazily and cached; instances are immutable and safe to share.
    """

    beta: ScalarNonlinearity
    zeta: ScalarNonlinearity
    m1: Optional[float] = None
    m2: Optional[float] = None
    m3: Optional[float] = None
    m4: Optional[float] = None
    exponent_case: str = "I"
    name: str = "custom"

    def __post_init__(self):
        if self.exponent_case not in ("I", "II", "III"):
            raise ValueError("exponent_case must be one of I, II, III")
        for f in (self.beta, self.zeta):
            if abs(float(f(0.0))) > 0.0:
                raise ValueError("beta and zeta must vanish at 0")
        if self.exponent_case in ("II", "III") and (self.m3 is None or self.m4 is None):
            raise ValueError("cases II and III require the (m3, m4) coercivity constants")
        if self.exponent_case == "III" and isinstance(self.beta, PiecewiseLinear):
            if self.beta.lipschitz_const == 0 or np.any(self.beta._ext_slopes <= 0):
                raise ValueError("case III requires beta strictly increasing")
        lo, hi = self.beta.range_bounds()
        if lo == 0.0 and hi == 0.0:
            # beta identically zero: the right inverse collapses and the
            # potential carries no information; rejected rather than guessed.
            raise ValueError("beta range degenerates to {0}; pair rejected")
        # populate the derived-object caches before the instance is shared
        self.nu
        self._composed_potential
        self._potential

    @property
    def is_piecewise_linear(self) -> bool:
        return isinstance(self.beta, PiecewiseLinear) and isinstance(self.zeta, PiecewiseLinear)

    @cached_property
    def L_beta(self) -> float:
        return float(self.beta.lipschitz_const)

    @cached_property
    def L_zeta(self) -> float:
        return float(self.zeta.lipschitz_const)

    @cached_property
    def nu(self):
        """Antiderivative of beta' * zeta'; piecewise linear in PL mode."""
        if self.is_piecewise_linear:
            knots = merged_knots(self.beta, self.zeta)
            bs = self.beta.derivative(0.5 * (knots[1:] + knots[:-1]))
            zs = self.zeta.derivative(0.5 * (knots[1:] + knots[:-1]))
            prod = np.atleast_1d(bs * zs)
            i0 = int(np.searchsorted(knots, 0.0))
            vals = np.concatenate(([0.0], np.cumsum(prod * np.diff(knots))))
            vals -= vals[i0]
            return PiecewiseLinear(
                knots,
                vals,
                self.beta.left_slope * self.zeta.left_slope,
                self.beta.right_slope * self.zeta.right_slope,
            )
        knots = merged_knots(self.beta, self.zeta)
        integral = CumulativeIntegral(
            lambda q: self.beta.derivative(q) * self.zeta.derivative(q), knots
        )

        def dfn(s):
            return self.beta.derivative(s) * self.zeta.derivative(s)

        return SmoothFunction(
            fn=integral,
            dfn=dfn,
            lipschitz_const=self.L_beta * self.L_zeta,
            knots_hint=knots,
            tail_slopes=(
                _mul_or_none(_tail(self.beta, 0), _tail(self.zeta, 0)),
                _mul_or_none(_tail(self.beta, 1), _tail(self.zeta, 1)),
            ),
        )

    @cached_property
    def _composed_potential(self):
        """s -> B(beta(s)) computed in s-space as int_0^s zeta(q) beta'(q) dq."""
        knots = merged_knots(self.beta, self.zeta)
        if self.is_piecewise_linear:
            return _PLComposedPotential(self.beta, self.zeta, knots)
        return CumulativeIntegral(lambda q: self.zeta(q) * self.beta.derivative(q), knots)

    @cached_property
    def _potential(self):
        """z -> B(z) built in z-space from the right inverse of beta."""
        if self.is_piecewise_linear:
            pos = _OneSidedPotential(self.beta, self.zeta)
            neg = _OneSidedPotential(self.beta.mirrored(), self.zeta.mirrored())
            return pos, neg
        return None

    def regularized(self, delta: float) -> "NonlinearityPair":
        """Replace beta, zeta by beta + delta*Id, zeta + delta*Id."""
        if delta == 0.0:
            return self
        if not self.is_piecewise_linear:
            raise NotImplementedError("regularization implemented for piecewise-linear pairs")
        return NonlinearityPair(
            beta=self.beta.add_identity(delta),
            zeta=self.zeta.add_identity(delta),
            m1=self.m1,
            m2=self.m2,
            m3=self.m3,
            m4=self.m4,
            exponent_case=self.exponent_case,
            name=f"{self.name}+delta{delta:g}",
        )

    def common_flat_intervals(self):
        """Intervals where beta and zeta are simultaneously flat (the Newton
        Jacobian loses its diagonal there without regularization)."""
        out = []
        for alo, ahi in self.beta.flat_intervals():
            for blo, bhi in self.zeta.flat_intervals():
                lo, hi = max(alo, blo), min(ahi, bhi)
                if lo < hi:
                    out.append((lo, hi))
        return out


def _tail(f, side):
    if isinstance(f, PiecewiseLinear):
        return f.left_slope if side == 0 else f.right_slope
    return f.tail_slopes[side]


def _mul_or_none(a, b):
    return None if a is None or b is None else a * b


class _PLComposedPotential:
    """Exact piecewise-quadratic evaluation of s -> int_0^s zeta beta'."""

    def __init__(self, beta, zeta, knots):
        self.knots = knots
        mids = 0.5 * (knots[1:] + knots[:-1])
        b = np.atleast_1d(beta.derivative(mids))
        z0 = np.atleast_1d(zeta(knots[:-1]))
        c = np.atleast_1d(zeta.derivative(mids))
        dt = np.diff(knots)
        seg = b * (z0 * dt + 0.5 * c * dt * dt)
        cum = np.concatenate(([0.0], np.cumsum(seg)))
        i0 = int(np.searchsorted(knots, 0.0))
        self._cum = cum - cum[i0]
        # region r in [0, len(knots)] has base knot max(r-1, 0)
        self._b = np.concatenate(([beta.left_slope], b, [beta.right_slope]))
        self._c = np.concatenate(([zeta.left_slope], c, [zeta.right_slope]))
        self._zk = np.atleast_1d(zeta(knots))

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        r = np.searchsorted(self.knots, s, side="right")
        base = np.clip(r - 1, 0, self.knots.size - 1)
        ds = s - self.knots[base]
        out = self._cum[base] + self._b[r] * (self._zk[base] * ds + 0.5 * self._c[r] * ds * ds)
        return out if out.ndim else float(out)


class _OneSidedPotential:
    """B on the nonnegative side of the range, as cumulative quadratics over
    the images of the beta intervals (plateaus contribute kinks, not mass)."""

    def __init__(self, beta: PiecewiseLinear, zeta: PiecewiseLinear):
        knots = merged_knots(beta, zeta)
        i0 = int(np.searchsorted(knots, 0.0))
        zk, glo, ghi = [0.0], [], []
        bvals = np.atleast_1d(beta(knots))
        zvals = np.atleast_1d(zeta(knots))
        for j in range(i0, knots.size - 1):
            if bvals[j + 1] > bvals[j]:
                zk.append(float(bvals[j + 1]))
                glo.append(float(zvals[j]))
                ghi.append(float(zvals[j + 1]))
        if beta.right_slope > 0:
            self.open_tail = True
            self.tail_g = float(zvals[-1])
            self.tail_dgdz = zeta.right_slope / beta.right_slope
        else:
            self.open_tail = False
        self.zk = np.asarray(zk)
        self.glo = np.asarray(glo)
        self.ghi = np.asarray(ghi)
        seg = 0.5 * (self.glo + self.ghi) * np.diff(self.zk)
        self.Bk = np.concatenate(([0.0], np.cumsum(seg)))

    def right_inverse_of_level(self, z):
        raise NotImplementedError

    def __call__(self, z: float) -> float:
        if z < 0:
            raise ValueError("one-sided potential takes z >= 0")
        if z <= self.zk[-1]:
            i = int(np.searchsorted(self.zk, z, side="right")) - 1
            i = min(max(i, 0), self.zk.size - 2) if self.zk.size > 1 else 0
            if self.zk.size == 1:
                return 0.0
            dz = z - self.zk[i]
            width = self.zk[i + 1] - self.zk[i]
            slope = (self.ghi[i] - self.glo[i]) / width
            return float(self.Bk[i] + self.glo[i] * dz + 0.5 * slope * dz * dz)
        if self.open_tail:
            dz = z - self.zk[-1]
            return float(self.Bk[-1] + self.tail_g * dz + 0.5 * self.tail_dgdz * dz * dz)
        return math.inf


# ---------------------------------------------------------------------------
# pair operations
# ---------------------------------------------------------------------------

def nu_eval(pair: NonlinearityPair, s):
    """nu(s) = int_0^s zeta' beta'; exact in piecewise-linear mode."""
    return pair.nu(s)


def beta_right_inverse(pair: NonlinearityPair, z: float) -> float:
    """The point of the beta level set at height z closest to 0.

    Nondecreasing in z, nonnegative for z > 0, nonpositive for z < 0.
    Raises OutsideRangeError beyond the closure of the range; returns +-inf
    at a non-attained closure endpoint (smooth mode only).
    """
    z = float(z)
    if z == 0.0:
        return 0.0
    beta = pair.beta
    if isinstance(beta, PiecewiseLinear):
        if z < 0:
            return -_pl_right_inverse_pos(beta.mirrored(), -z)
        return _pl_right_inverse_pos(beta, z)
    return _smooth_right_inverse(beta, z)


def _pl_right_inverse_pos(beta: PiecewiseLinear, z: float) -> float:
    k, v = beta.knots, beta.values
    idx = int(np.searchsorted(v, z, side="left"))
    if idx >= v.size:
        if beta.right_slope > 0:
            return float(k[-1] + (z - v[-1]) / beta.right_slope)
        raise OutsideRangeError(f"{z} above sup range {v[-1]}")
    if idx == 0:
        # cannot happen for z > 0 since v contains 0, kept as a guard
        raise OutsideRangeError(f"{z} below the positive branch")
    b = (v[idx] - v[idx - 1]) / (k[idx] - k[idx - 1])
    return float(k[idx - 1] + (z - v[idx - 1]) / b)


def _smooth_right_inverse(beta: SmoothFunction, z: float) -> float:
    sign = 1.0 if z > 0 else -1.0
    za = abs(z)
    f = (lambda t: float(beta(t))) if sign > 0 else (lambda t: -float(beta(-t)))
    hi = 1.0
    while f(hi) < za:
        hi *= 2.0
        if hi > 1e18:
            lo_r, hi_r = beta.range_bounds()
            bound = hi_r if sign > 0 else -lo_r
            if math.isfinite(bound) and abs(za - bound) <= beta.tol:
                return sign * math.inf
            raise OutsideRangeError(f"{z} outside the closure of the range")
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) >= za:
            hi = mid
        else:
            lo = mid
    return sign * hi


def B_eval(pair: NonlinearityPair, z: float) -> float:
    """B(z) = int_0^z zeta(beta_r); +inf outside the closure of range(beta)."""
    z = float(z)
    if pair.is_piecewise_linear:
        pos, neg = pair._potential
        return pos(z) if z >= 0 else neg(-z)
    try:
        from scipy.integrate import quad
    except ImportError:  # pragma: no cover
        raise RuntimeError("smooth-mode B_eval requires scipy")
    lo, hi = pair.beta.range_bounds()
    if z > hi or z < lo:
        return math.inf

    def g(sig):
        t = beta_right_inverse(pair, sig)
        if not math.isfinite(t):
            return math.copysign(pair.zeta.lipschitz_const * 1e18, sig)
        return float(pair.zeta(t))

    val, _ = quad(g, 0.0, z, limit=200, epsabs=pair.beta.tol)
    return float(val)


def B_of_beta_eval(pair: NonlinearityPair, s):
    """B(beta(s)) evaluated directly as int_0^s zeta(q) beta'(q) dq.

    This is an independent computation path from B_eval(beta(s)); agreement
    of the two is the central consistency check of this module.
    """
    return pair._composed_potential(np.asarray(s, dtype=float))


def convexity_gap(pair: NonlinearityPair, a, b):
    """Slack of the uniform-convexity bound

        4 L_beta L_zeta [B(beta(a)) + B(beta(b)) - 2 B((beta(a)+beta(b))/2)]
            - [nu(a) - nu(b)]^2

    which is nonnegative for every a, b.  Vectorized over a, b."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    Ba = B_of_beta_eval(pair, a)
    Bb = B_of_beta_eval(pair, b)
    zmid = 0.5 * (np.asarray(pair.beta(a)) + np.asarray(pair.beta(b)))
    Bmid = np.vectorize(lambda z: B_eval(pair, z))(zmid)
    dnu = np.asarray(pair.nu(a)) - np.asarray(pair.nu(b))
    out = 4.0 * pair.L_beta * pair.L_zeta * (Ba + Bb - 2.0 * Bmid) - dnu * dnu
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# maximal monotone graphs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MonotoneGraph:
    """Curve of a sublinear maximal monotone operator on R.

    ``vertices`` is an (m, 2) array tracing the curve; consecutive vertices
    are joined by straight segments (horizontal = plateau, vertical =
    multivalued jump, sloped = regular).  ``left_dir``/``right_dir`` are the
    outgoing ray directions (dx, dy) with dx > 0, so the operator domain is
    all of R.  The curve must pass through (0, 0).
    """

    vertices: np.ndarray
    left_dir: tuple = (1.0, 0.0)
    right_dir: tuple = (1.0, 0.0)
    t1: Optional[float] = None
    t2: Optional[float] = None

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.vertices, dtype=float))
        object.__setattr__(self, "vertices", v)
        if v.shape[1] != 2:
            raise ValueError("vertices must be an (m, 2) array")
        d = np.diff(v, axis=0)
        if np.any(d < -1e-14):
            raise NonMaximalGraphError("curve is not monotone")
        if np.any(np.all(d == 0, axis=1)):
            raise NonMaximalGraphError("repeated vertex")
        for dx, dy in (self.left_dir, self.right_dir):
            if dx < 0 or dy < 0 or (dx == 0 and dy == 0):
                raise ValueError("tail directions must be nonnegative and nonzero")
            if dx == 0:
                raise NonMaximalGraphError(
                    "vertical tail: operator domain would not be all of R"
                )
        if not self._contains_origin():
            raise NonMaximalGraphError("curve does not pass through (0, 0)")
        if self.t1 is None:
            object.__setattr__(self, "t1", self._fit_t1())
        if self.t2 is None:
            x, y = np.abs(v[:, 0]), np.abs(v[:, 1])
            object.__setattr__(self, "t2", float(max(0.0, (y - self.t1 * x).max())))

    def _contains_origin(self) -> bool:
        v = self.vertices
        for i in range(v.shape[0] - 1):
            if _on_segment((0.0, 0.0), v[i], v[i + 1]):
                return True
        if np.all(v[0] == 0) or np.all(v[-1] == 0):
            return True
        return False

    def _fit_t1(self) -> float:
        slopes = []
        for dx, dy in (self.left_dir, self.right_dir):
            slopes.append(dy / dx)
        return float(max(slopes))

    @classmethod
    def from_segments(cls, segments: Sequence, left_dir=(1.0, 0.0), right_dir=(1.0, 0.0)):
        """Build from an ordered list of ((x0,y0),(x1,y1)) segments; raises
        NonMaximalGraphError when consecutive segments do not connect."""
        verts = [np.asarray(segments[0][0], dtype=float)]
        for seg in segments:
            a, b = (np.asarray(p, dtype=float) for p in seg)
            if not np.allclose(a, verts[-1], rtol=0, atol=1e-14):
                raise NonMaximalGraphError(
                    f"gap in the curve between {tuple(verts[-1])} and {tuple(a)}"
                )
            verts.append(b)
        return cls(np.array(verts), left_dir, right_dir)

    def polyline(self, s_extent: float) -> np.ndarray:
        """Vertices with tails clipped at parameter distance s_extent, where
        the parameter is s = x + y."""
        v = self.vertices
        dlx, dly = self.left_dir
        drx, dry = self.right_dir
        s_lo = v[0, 0] + v[0, 1]
        s_hi = v[-1, 0] + v[-1, 1]
        tl = max(0.0, (s_lo + s_extent)) / (dlx + dly)
        tr = max(0.0, (s_extent - s_hi)) / (drx + dry)
        first = v[0] - tl * np.array([dlx, dly])
        last = v[-1] + tr * np.array([drx, dry])
        return np.vstack([first, v, last])


def _on_segment(p, a, b, tol=1e-14):
    p, a, b = (np.asarray(u, dtype=float) for u in (p, a, b))
    d = b - a
    L2 = float(d @ d)
    if L2 == 0.0:
        return bool(np.all(np.abs(p - a) <= tol))
    t = float((p - a) @ d) / L2
    if t < -tol or t > 1 + tol:
        return False
    proj = a + np.clip(t, 0, 1) * d
    return bool(np.all(np.abs(p - proj) <= tol))


def resolvent_decompose(graph: MonotoneGraph):
    """Split a maximal monotone graph through its resolvent.

    Returns (zeta, beta) with zeta = (Id + T)^{-1} and beta = Id - zeta, both
    nondecreasing, 1-Lipschitz and vanishing at 0; the curve
    {(zeta(s), beta(s))} reproduces the input graph.
    """
    v = graph.vertices
    s = v[:, 0] + v[:, 1]
    if np.any(np.diff(s) <= 0):
        raise NonMaximalGraphError("degenerate parametrization (repeated points)")
    xs, ys = list(v[:, 0]), list(v[:, 1])
    ss = list(s)
    if 0.0 not in ss:
        # the origin lies inside a segment; insert it so the knot set has 0
        i = int(np.searchsorted(ss, 0.0))
        ss.insert(i, 0.0)
        xs.insert(i, 0.0)
        ys.insert(i, 0.0)
    dlx, dly = graph.left_dir
    drx, dry = graph.right_dir
    zeta = PiecewiseLinear(
        np.array(ss), np.array(xs), dlx / (dlx + dly), drx / (drx + dry)
    )
    beta = PiecewiseLinear(
        np.array(ss), np.array(ys), dly / (dlx + dly), dry / (drx + dry)
    )
    return zeta, beta


def recompose_graph(pair: NonlinearityPair) -> MonotoneGraph:
    """Trace {(zeta(s), beta(s))} back into a maximal monotone graph, with
    sublinearity constants from L_beta and the zeta coercivity pair."""
    if pair.m1 is None or pair.m2 is None:
        raise ValueError("recompose_graph needs the zeta coercivity constants (m1, m2)")
    if not pair.is_piecewise_linear:
        raise NotImplementedError("graph recomposition implemented for piecewise-linear pairs")
    knots = merged_knots(pair.beta, pair.zeta)
    pts = np.column_stack([np.atleast_1d(pair.zeta(knots)), np.atleast_1d(pair.beta(knots))])
    keep = np.ones(len(pts), dtype=bool)
    keep[1:] = np.any(np.abs(np.diff(pts, axis=0)) > 0, axis=1)
    pts = pts[keep]
    t1 = pair.L_beta / pair.m1
    t2 = pair.L_beta * pair.m2 / pair.m1
    return MonotoneGraph(
        pts,
        left_dir=(pair.zeta.left_slope, pair.beta.left_slope),
        right_dir=(pair.zeta.right_slope, pair.beta.right_slope),
        t1=t1,
        t2=t2,
    )


def graph_hausdorff(g1: MonotoneGraph, g2: MonotoneGraph, samples_per_segment=33) -> float:
    """Symmetric Hausdorff distance between sampled curves, tails clipped at
    a common parameter extent."""
    extent = 1.0
    for g in (g1, g2):
        s = g.vertices.sum(axis=1)
        extent = max(extent, float(np.abs(s).max()) + 1.0)
    extent *= 2.0
    p1 = g1.polyline(extent)
    p2 = g2.polyline(extent)

    def directed(pa, pb):
        ts = np.linspace(0.0, 1.0, samples_per_segment)
        pts = np.concatenate(
            [pa[i] + ts[:, None] * (pa[i + 1] - pa[i]) for i in range(len(pa) - 1)]
        )
        a, b = pb[:-1], pb[1:]
        d = b - a
        L2 = np.maximum((d * d).sum(axis=1), 1e-300)
        t = ((pts[:, None, :] - a[None, :, :]) * d[None, :, :]).sum(axis=2) / L2[None, :]
        t = np.clip(t, 0.0, 1.0)
        proj = a[None, :, :] + t[:, :, None] * d[None, :, :]
        dist = np.sqrt(((pts[:, None, :] - proj) ** 2).sum(axis=2)).min(axis=1)
        return float(dist.max())

    return max(directed(p1, p2), directed(p2, p1))


# ---------------------------------------------------------------------------
# hypothesis verification
# ---------------------------------------------------------------------------

@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""
    witness: Optional[dict] = None


@dataclass
class ValidationReport:
    checks: list = field(default_factory=list)
    k1: float = math.nan
    k2: float = math.nan
    k3: float = math.nan

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name, passed, detail="", witness=None):
        self.checks.append(CheckResult(name, bool(passed), detail, witness))

    def failures(self):
        return [c for c in self.checks if not c.passed]


def fit_growth_constants(pair: NonlinearityPair, grid: np.ndarray):
    """Admissible (k1, k2, k3) for k1*beta(s)^2 - k2 <= B(beta(s)) <= k3*s^2
    on the grid.  k3 is the tight ratio; k1 falls back to 1/2 with a
    compensating k2 whenever the composed potential vanishes on part of the
    grid (plateau pairs)."""
    s = np.asarray(grid, dtype=float)
    s = s[s != 0.0]
    G = np.asarray(B_of_beta_eval(pair, s))
    bs = np.asarray(pair.beta(s))
    k3 = float(max(1e-12, (G / (s * s)).max(initial=0.0)))
    mask = np.abs(bs) >= 0.5 * np.abs(bs).max(initial=0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(bs[mask] != 0.0, G[mask] / (bs[mask] ** 2), np.inf)
    cand = float(min(0.5, ratios.min(initial=0.5)))
    k1 = cand if cand > 1e-12 else 0.5
    k2 = float(max(0.0, (k1 * bs * bs - G).max(initial=0.0)))
    return k1, k2, k3


def verify_pair_hypotheses(
    pair: NonlinearityPair,
    sample_grid,
    n_pairs: int = 2000,
    seed: int = 42,
    tol: float = 1e-10,
) -> ValidationReport:
    """Check the structural hypotheses and the derived inequality suite on a
    sample grid; failures carry witnesses instead of raising."""
    grid = np.unique(np.asarray(sample_grid, dtype=float))
    if grid.size == 0:
        raise ValueError("sample grid must be nonempty")
    rng = np.random.default_rng(seed)
    rep = ValidationReport()
    span = max(1.0, float(np.abs(grid).max()))

    for label, f, L in (("beta", pair.beta, pair.L_beta), ("zeta", pair.zeta, pair.L_zeta)):
        vals = np.asarray(f(grid))
        mono_ok = np.all(np.diff(vals) >= -tol * span)
        rep.add(f"{label}-nondecreasing", mono_ok)
        rep.add(f"{label}-origin", abs(float(f(0.0))) <= tol)
        a = rng.uniform(-span, span, size=n_pairs)
        b = rng.uniform(-span, span, size=n_pairs)
        gap = np.abs(np.asarray(f(a)) - np.asarray(f(b))) - L * np.abs(a - b)
        worst = int(np.argmax(gap))
        rep.add(
            f"{label}-lipschitz",
            gap[worst] <= tol * span,
            detail=f"L={L:g}",
            witness=None if gap[worst] <= tol * span else {"a": a[worst], "b": b[worst]},
        )

    # zeta coercivity |zeta(s)| >= m1 |s| - m2
    if pair.m1 is not None and pair.m2 is not None:
        m1, m2 = pair.m1, pair.m2
        deficiency = m1 * np.abs(grid) - m2 - np.abs(np.asarray(pair.zeta(grid)))
        worst = int(np.argmax(deficiency))
        ok = deficiency[worst] <= tol * span
        rep.add(
            "zeta-coercivity",
            ok,
            detail=f"m1={m1:g} m2={m2:g}",
            witness=None if ok else {"s": float(grid[worst]), "deficit": float(deficiency[worst])},
        )
    else:
        outer = grid[np.abs(grid) >= 0.5 * span]
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.abs(np.asarray(pair.zeta(outer))) / np.abs(outer)
        m1_fit = float(np.nanmin(ratio)) if outer.size else 0.0
        ok = m1_fit > 1e-12
        rep.add(
            "zeta-coercivity",
            ok,
            detail=f"fitted m1={m1_fit:g}" if ok else "no admissible m1 on the grid",
            witness=None if ok else {"s": float(outer[int(np.nanargmin(ratio))])} if outer.size else None,
        )

    # exponent case consistency
    if pair.exponent_case in ("II", "III"):
        m3, m4 = pair.m3, pair.m4
        deficiency = m3 * np.abs(grid) - m4 - np.abs(np.asarray(pair.beta(grid)))
        worst = int(np.argmax(deficiency))
        rep.add(
            "beta-coercivity",
            deficiency[worst] <= tol * span,
            detail=f"m3={m3:g} m4={m4:g}",
            witness=None if deficiency[worst] <= tol * span else {"s": float(grid[worst])},
        )
        if pair.exponent_case == "III":
            if isinstance(pair.beta, PiecewiseLinear):
                strict = bool(np.all(pair.beta._ext_slopes > 0))
            else:
                strict = bool(np.all(np.diff(np.asarray(pair.beta(grid))) > 0))
            rep.add("beta-strictly-increasing", strict)
    else:
        rep.add("exponent-case", True, detail="case I: no beta coercivity required")

    a = rng.uniform(-span, span, size=n_pairs)
    b = rng.uniform(-span, span, size=n_pairs)
    na, nb = np.asarray(pair.nu(a)), np.asarray(pair.nu(b))
    za, zb = np.asarray(pair.zeta(a)), np.asarray(pair.zeta(b))
    ba, bb = np.asarray(pair.beta(a)), np.asarray(pair.beta(b))

    lhs = np.abs(na - nb) - pair.L_beta * np.abs(za - zb)
    worst = int(np.argmax(lhs))
    rep.add(
        "nu-lipschitz-transfer",
        lhs[worst] <= tol * span,
        witness=None if lhs[worst] <= tol * span else {"a": a[worst], "b": b[worst]},
    )

    lhs2 = (na - nb) ** 2 - pair.L_beta * pair.L_zeta * (za - zb) * (ba - bb)
    worst = int(np.argmax(lhs2))
    rep.add(
        "nu-squared-transfer",
        lhs2[worst] <= tol * span * span,
        witness=None if lhs2[worst] <= tol * span * span else {"a": a[worst], "b": b[worst]},
    )

    rep.k1, rep.k2, rep.k3 = fit_growth_constants(pair, grid)
    G = np.asarray(B_of_beta_eval(pair, grid))
    bg = np.asarray(pair.beta(grid))
    low = rep.k1 * bg * bg - rep.k2 - G
    high = G - rep.k3 * grid * grid
    rep.add("growth-lower", low.max(initial=0.0) <= tol * span * span, detail=f"k1={rep.k1:g} k2={rep.k2:g}")
    rep.add("growth-upper", high.max(initial=0.0) <= tol * span * span, detail=f"k3={rep.k3:g}")

    gap = np.asarray(convexity_gap(pair, a, b))
    worst = int(np.argmin(gap))
    rep.add(
        "uniform-convexity",
        gap[worst] >= -tol,
        witness=None if gap[worst] >= -tol else {"a": a[worst], "b": b[worst], "gap": float(gap[worst])},
    )

    if pair.is_piecewise_linear:
        bvals = np.asarray(pair.beta(grid))
        direct = np.array([B_eval(pair, z) for z in bvals])
        mism = np.abs(direct - G).max(initial=0.0)
        rep.add("potential-consistency", mism <= tol, detail=f"max |B(beta(s)) - composed| = {mism:.2e}")

    # subgradient inequality: B(beta(s) + h) - B(beta(s)) >= zeta(s) * h
    sub_ok, sub_witness = True, None
    hs = rng.uniform(-span, span, size=min(200, n_pairs))
    ss = rng.choice(grid, size=hs.size)
    for s_i, h_i in zip(ss, hs):
        z0 = float(pair.beta(s_i))
        B1 = B_eval(pair, z0 + h_i)
        if not math.isfinite(B1):
            continue
        slack = B1 - B_eval(pair, z0) - float(pair.zeta(s_i)) * h_i
        if slack < -tol * span:
            sub_ok, sub_witness = False, {"s": float(s_i), "h": float(h_i), "slack": float(slack)}
            break
    rep.add("subgradient", sub_ok, witness=sub_witness)
    return rep


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------

def _identity_pl():
    return PiecewiseLinear.identity()


def preset_pair(name: str) -> NonlinearityPair:
    """Named nonlinearity pairs: identity, stefan, richards-saturation,
    step-graph."""
    if name == "identity":
        return NonlinearityPair(_identity_pl(), _identity_pl(), m1=1.0, m2=0.0, name=name)
    if name == "stefan":
        zeta = PiecewiseLinear(np.array([0.0, 1.0]), np.array([0.0, 0.0]), 1.0, 1.0)
        return NonlinearityPair(_identity_pl(), zeta, m1=1.0, m2=1.0, name=name)
    if name == "richards-saturation":
        beta = PiecewiseLinear(np.array([0.0, 1.0]), np.array([0.0, 1.0]), 1.0, 0.0)
        return NonlinearityPair(beta, _identity_pl(), m1=1.0, m2=0.0, name=name)
    if name == "step-graph":
        zeta = PiecewiseLinear(np.array([0.0, 1.0]), np.array([0.0, 0.0]), 1.0, 1.0)
        beta = PiecewiseLinear(np.array([0.0, 1.0]), np.array([0.0, 1.0]), 0.0, 0.0)
        return NonlinearityPair(beta, zeta, m1=1.0, m2=1.0, name=name)
    raise ValueError(f"unknown pair preset {name!r}")


PAIR_PRESETS = ("identity", "stefan", "richards-saturation", "step-graph")


def preset_graph(name: str) -> MonotoneGraph:
    """Monotone graph presets used by the resolvent round-trip checks."""
    if name == "identity":
        return MonotoneGraph(np.array([[0.0, 0.0]]), (1.0, 1.0), (1.0, 1.0))
    if name == "double-slope":
        return MonotoneGraph(np.array([[0.0, 0.0]]), (1.0, 2.0), (1.0, 2.0))
    if name == "step":
        return MonotoneGraph(np.array([[0.0, 0.0], [0.0, 1.0]]), (1.0, 0.0), (1.0, 0.0))
    if name == "deadzone":
        return MonotoneGraph(np.array([[-1.0, 0.0], [1.0, 0.0]]), (1.0, 1.0), (1.0, 1.0))
    if name == "staircase":
        return MonotoneGraph(
            np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 2.0]]),
            (1.0, 0.0),
            (1.0, 0.0),
        )
    raise ValueError(f"unknown graph preset {name!r}")


GRAPH_PRESETS = ("identity", "double-slope", "step", "deadzone", "staircase")
