"""Exact-calculus checks: resolvent splitting, potentials, inequality suite."""

import math

import numpy as np
import pytest

from parastab.monotone import (
    GRAPH_PRESETS,
    PAIR_PRESETS,
    B_eval,
    B_of_beta_eval,
    MonotoneGraph,
    NonlinearityPair,
    NonMaximalGraphError,
    OutsideRangeError,
    PiecewiseLinear,
    beta_right_inverse,
    convexity_gap,
    fit_growth_constants,
    graph_hausdorff,
    nu_eval,
    preset_graph,
    preset_pair,
    recompose_graph,
    resolvent_decompose,
    truncate,
    verify_pair_hypotheses,
)

RNG = np.random.default_rng(42)


# ---------------------------------------------------------------------------
# piecewise-linear scaffolding
# ---------------------------------------------------------------------------

def test_piecewise_linear_requires_origin():
    with pytest.raises(ValueError):
        PiecewiseLinear(np.array([1.0, 2.0]), np.array([0.0, 1.0]), 1.0, 1.0)
    with pytest.raises(ValueError):
        PiecewiseLinear(np.array([0.0]), np.array([0.5]), 1.0, 1.0)


def test_piecewise_linear_eval_and_derivative():
    f = PiecewiseLinear(np.array([0.0, 1.0]), np.array([0.0, 2.0]), 0.5, 3.0)
    assert f(0.5) == 1.0
    assert f(-2.0) == -1.0
    assert f(2.0) == 5.0
    assert f.derivative(-1.0) == 0.5
    assert f.derivative(0.5) == 2.0
    assert f.derivative(1.5) == 3.0
    assert f.lipschitz_const == 3.0


def test_lipschitz_sampled():
    for name in PAIR_PRESETS:
        pair = preset_pair(name)
        a = RNG.uniform(-10, 10, 500)
        b = RNG.uniform(-10, 10, 500)
        for f, L in ((pair.beta, pair.L_beta), (pair.zeta, pair.L_zeta)):
            gap = np.abs(np.asarray(f(a)) - np.asarray(f(b))) - L * np.abs(a - b)
            assert gap.max() <= 1e-12


def test_degenerate_pair_rejected():
    flat = PiecewiseLinear(np.array([0.0]), np.array([0.0]), 0.0, 0.0)
    with pytest.raises(ValueError, match="degenerates"):
        NonlinearityPair(beta=flat, zeta=PiecewiseLinear.identity())


def test_truncate():
    assert truncate(1.0, 3.0) == 1.0
    assert truncate(1.0, 0.5) == 0.5
    assert truncate(2.0, -5.0) == -2.0
    with pytest.raises(ValueError):
        truncate(0.0, 1.0)
    s = RNG.uniform(-4, 4, 100)
    # 1-Lipschitz and odd
    assert np.abs(np.diff(truncate(1.3, np.sort(s)))).max() <= np.diff(np.sort(s)).max() + 1e-15
    assert np.allclose(truncate(1.3, -s), -truncate(1.3, s))


# ---------------------------------------------------------------------------
# resolvent decomposition / graph recomposition
# ---------------------------------------------------------------------------

def test_resolvent_identity_graph():
    zeta, beta = resolvent_decompose(preset_graph("identity"))
    s = RNG.uniform(-3, 3, 50)
    assert np.allclose(zeta(s), s / 2.0)
    assert np.allclose(beta(s), s / 2.0)


def test_resolvent_linear_graph():
    zeta, beta = resolvent_decompose(preset_graph("double-slope"))
    s = RNG.uniform(-3, 3, 50)
    assert np.allclose(zeta(s), s / 3.0)
    assert np.allclose(beta(s), 2.0 * s / 3.0)


def test_resolvent_step_graph():
    # pointwise solve of x + T(x) = s over the three regimes
    zeta, beta = resolvent_decompose(preset_graph("step"))
    assert zeta(-1.0) == -1.0
    assert zeta(0.5) == 0.0
    assert zeta(2.0) == 1.0
    s = RNG.uniform(-3, 3, 50)
    assert np.allclose(np.asarray(zeta(s)) + np.asarray(beta(s)), s)


def test_resolvent_slopes_in_unit_interval():
    for name in GRAPH_PRESETS:
        zeta, beta = resolvent_decompose(preset_graph(name))
        for f in (zeta, beta):
            assert np.all(f._ext_slopes >= 0.0)
            assert np.all(f._ext_slopes <= 1.0)


def test_recompose_identity_pair_gives_identity_graph():
    pair = preset_pair("identity")
    g = recompose_graph(pair)
    # vertices on the diagonal, tails in direction (1, 1)
    assert np.allclose(g.vertices[:, 0], g.vertices[:, 1])
    assert g.left_dir == (1.0, 1.0) and g.right_dir == (1.0, 1.0)


def test_recompose_stefan_like_pair_gives_step_graph():
    # beta = clamp(s, 0, 1), zeta = Id - beta traces the vertical-jump graph
    pair = preset_pair("step-graph")
    g = recompose_graph(pair)
    assert graph_hausdorff(g, preset_graph("step")) < 1e-12


def test_roundtrip_all_graph_presets():
    for name in GRAPH_PRESETS:
        g = preset_graph(name)
        zeta, beta = resolvent_decompose(g)
        pair = NonlinearityPair(beta, zeta, m1=1.0 / (1.0 + g.t1), m2=g.t2 / (1.0 + g.t1), name=name)
        assert graph_hausdorff(g, recompose_graph(pair)) < 1e-12, name


def test_graph_gap_rejected():
    with pytest.raises(NonMaximalGraphError):
        MonotoneGraph.from_segments([((0.0, 0.0), (1.0, 1.0)), ((2.0, 2.0), (3.0, 3.0))])


def test_graph_must_contain_origin():
    with pytest.raises(NonMaximalGraphError):
        MonotoneGraph(np.array([[1.0, 1.0], [2.0, 2.0]]))


def test_graph_vertical_tail_rejected():
    with pytest.raises(NonMaximalGraphError):
        MonotoneGraph(np.array([[0.0, 0.0]]), left_dir=(0.0, 1.0))


def test_recompose_needs_coercivity_constants():
    pair = NonlinearityPair(PiecewiseLinear.identity(), PiecewiseLinear.identity())
    with pytest.raises(ValueError, match="m1"):
        recompose_graph(pair)


# ---------------------------------------------------------------------------
# nu, right inverse, potentials
# ---------------------------------------------------------------------------

def test_nu_eval_examples():
    assert nu_eval(preset_pair("identity"), 2.0) == 2.0
    assert nu_eval(preset_pair("stefan"), 2.0) == 1.0
    s = RNG.uniform(-5, 5, 50)
    assert np.abs(np.asarray(nu_eval(preset_pair("step-graph"), s))).max() == 0.0


def test_beta_right_inverse_examples():
    assert beta_right_inverse(preset_pair("identity"), 0.5) == 0.5
    richards = preset_pair("richards-saturation")
    assert beta_right_inverse(richards, 1.0) == 1.0  # infimum of the plateau
    with pytest.raises(OutsideRangeError):
        beta_right_inverse(richards, 1.5)
    assert beta_right_inverse(richards, 0.0) == 0.0
    # nondecreasing, signed
    zs = np.linspace(-2.0, 1.0, 40)
    vals = [beta_right_inverse(richards, z) for z in zs]
    assert np.all(np.diff(vals) >= 0)
    assert all(v <= 0 for z, v in zip(zs, vals) if z < 0)


def test_B_eval_examples():
    assert B_eval(preset_pair("identity"), 2.0) == 2.0
    assert B_eval(preset_pair("stefan"), 2.0) == 0.5
    assert B_eval(preset_pair("richards-saturation"), 1.5) == math.inf


def test_B_of_beta_examples():
    assert B_of_beta_eval(preset_pair("identity"), 2.0) == 2.0
    assert B_of_beta_eval(preset_pair("stefan"), 2.0) == 0.5
    assert B_of_beta_eval(preset_pair("richards-saturation"), 3.0) == 0.5


def test_B_properties_sampled():
    for name in PAIR_PRESETS:
        pair = preset_pair(name)
        s = np.sort(RNG.uniform(-4, 4, 200))
        G = np.asarray(B_of_beta_eval(pair, s))
        assert G.min() >= 0.0
        # convexity of B along sampled midpoints of beta values
        b = np.asarray(pair.beta(s))
        for i in range(0, 180, 20):
            z1, z2 = b[i], b[i + 10]
            mid = B_eval(pair, 0.5 * (z1 + z2))
            assert mid <= 0.5 * (B_eval(pair, z1) + B_eval(pair, z2)) + 1e-12


def test_potential_cross_consistency():
    for name in PAIR_PRESETS:
        pair = preset_pair(name)
        s = RNG.uniform(-6, 6, 2000)
        G = np.asarray(B_of_beta_eval(pair, s))
        direct = np.array([B_eval(pair, z) for z in np.asarray(pair.beta(s))])
        assert np.abs(direct - G).max() <= 1e-10


def test_convexity_gap_examples():
    pair = preset_pair("identity")
    assert abs(convexity_gap(pair, 1.0, 0.0)) <= 1e-12  # saturates the bound
    assert convexity_gap(pair, 0.7, 0.7) == 0.0
    assert convexity_gap(preset_pair("stefan"), 2.0, -1.0) >= 0.0


def test_convexity_gap_nonnegative_sampled():
    for name in PAIR_PRESETS:
        pair = preset_pair(name)
        a = RNG.uniform(-8, 8, 2000)
        b = RNG.uniform(-8, 8, 2000)
        assert np.asarray(convexity_gap(pair, a, b)).min() >= -1e-10


def test_nu_squared_transfer_sampled():
    for name in PAIR_PRESETS:
        pair = preset_pair(name)
        a = RNG.uniform(-8, 8, 2000)
        b = RNG.uniform(-8, 8, 2000)
        lhs = (np.asarray(pair.nu(a)) - np.asarray(pair.nu(b))) ** 2
        rhs = pair.L_beta * pair.L_zeta * (np.asarray(pair.zeta(a)) - np.asarray(pair.zeta(b))) * (
            np.asarray(pair.beta(a)) - np.asarray(pair.beta(b))
        )
        assert (lhs - rhs).max() <= 1e-10


def test_subgradient_inequality_sampled():
    for name in PAIR_PRESETS:
        pair = preset_pair(name)
        for _ in range(50):
            s = float(RNG.uniform(-3, 3))
            h = float(RNG.uniform(-2, 2))
            z0 = float(pair.beta(s))
            B1 = B_eval(pair, z0 + h)
            if not math.isfinite(B1):
                continue
            assert B1 - B_eval(pair, z0) >= float(pair.zeta(s)) * h - 1e-10


# ---------------------------------------------------------------------------
# hypothesis verification
# ---------------------------------------------------------------------------

def test_verify_identity_fits_reference_constants():
    rep = verify_pair_hypotheses(preset_pair("identity"), np.linspace(-2, 2, 41))
    assert rep.passed
    assert abs(rep.k1 - 0.5) <= 1e-12
    assert rep.k2 == 0.0
    assert abs(rep.k3 - 0.5) <= 1e-12


def test_verify_detects_missing_coercivity():
    # zeta with zero tail slopes cannot satisfy |zeta(s)| >= m1 |s| - m2
    zeta = PiecewiseLinear(np.array([0.0, 1.0]), np.array([0.0, 1.0]), 0.0, 0.0)
    pair = NonlinearityPair(PiecewiseLinear.identity(), zeta, m1=1.0, m2=0.1)
    rep = verify_pair_hypotheses(pair, np.linspace(-5, 5, 101))
    failed = [c.name for c in rep.failures()]
    assert "zeta-coercivity" in failed
    witness = [c for c in rep.checks if c.name == "zeta-coercivity"][0].witness
    assert witness is not None


def test_verify_stefan_case_I():
    rep = verify_pair_hypotheses(preset_pair("stefan"), np.linspace(-3, 3, 61))
    assert rep.passed
    assert any(c.name == "exponent-case" and c.passed for c in rep.checks)


def test_case_III_requires_strictly_increasing_beta():
    richards = preset_pair("richards-saturation")
    with pytest.raises(ValueError, match="strictly increasing"):
        NonlinearityPair(richards.beta, richards.zeta, m1=1.0, m2=0.0, m3=0.5, m4=1.0,
                         exponent_case="III")
    with pytest.raises(ValueError, match="m3"):
        NonlinearityPair(richards.beta, richards.zeta, m1=1.0, m2=0.0, exponent_case="II")


def test_fit_growth_constants_admissible():
    for name in PAIR_PRESETS:
        pair = preset_pair(name)
        grid = np.linspace(-4, 4, 81)
        k1, k2, k3 = fit_growth_constants(pair, grid)
        assert k1 > 0 and k2 >= 0 and k3 > 0
        G = np.asarray(B_of_beta_eval(pair, grid))
        b = np.asarray(pair.beta(grid))
        assert (k1 * b * b - k2 - G).max() <= 1e-10
        assert (G - k3 * grid * grid).max() <= 1e-10


# ---------------------------------------------------------------------------
# smooth (mollified) mode
# ---------------------------------------------------------------------------

def test_mollify_distance_and_lipschitz():
    zeta = preset_pair("stefan").zeta
    sm = zeta.mollify(0.25)
    s = np.linspace(-4, 4, 801)
    assert np.abs(np.asarray(sm(s)) - np.asarray(zeta(s))).max() <= zeta.lipschitz_const * 0.25
    assert abs(float(sm(0.0))) == 0.0
    d = np.diff(np.asarray(sm(s)))
    assert d.min() >= -1e-14


def test_mollify_radius_guard():
    zeta = preset_pair("stefan").zeta
    with pytest.raises(ValueError, match="radius"):
        zeta.mollify(0.6)


def test_smooth_pair_quadrature_consistency():
    from scipy.integrate import quad

    base = preset_pair("stefan")
    pair = NonlinearityPair(base.beta.mollify(0.2), base.zeta.mollify(0.2), m1=1.0, m2=1.2,
                            name="stefan-moll")
    for s in (-1.4, 0.33, 0.9, 2.6):
        ref, _ = quad(lambda q: float(pair.zeta(q)) * float(pair.beta.derivative(q)),
                      0.0, s, limit=300, epsabs=1e-12)
        assert abs(float(B_of_beta_eval(pair, s)) - ref) <= 1e-9
        # z-space route agrees with the s-space route in smooth mode too
        z = float(pair.beta(s))
        assert abs(B_eval(pair, z) - float(B_of_beta_eval(pair, s))) <= 1e-7


# ---------------------------------------------------------------------------
# randomized pairs (seeded): shake out plateau/tail edge combinations
# ---------------------------------------------------------------------------

def random_monotone_pl(rng):
    n_knots = int(rng.integers(1, 6))
    knots = np.unique(np.concatenate([[0.0], rng.uniform(-3, 3, n_knots)]))
    slopes = np.where(rng.random(knots.size - 1) < 0.35, 0.0, rng.uniform(0.1, 2.0, knots.size - 1))
    vals = np.concatenate([[0.0], np.cumsum(slopes * np.diff(knots))])
    i0 = int(np.searchsorted(knots, 0.0))
    vals -= vals[i0]
    left = 0.0 if rng.random() < 0.3 else float(rng.uniform(0.1, 2.0))
    right = 0.0 if rng.random() < 0.3 else float(rng.uniform(0.1, 2.0))
    return PiecewiseLinear(knots, vals, left, right)


def test_random_pairs_calculus_consistent():
    rng = np.random.default_rng(7)
    built = 0
    while built < 25:
        beta = random_monotone_pl(rng)
        zeta = random_monotone_pl(rng)
        try:
            pair = NonlinearityPair(beta, zeta, name="fuzz")
        except ValueError:
            continue  # fully degenerate beta
        built += 1
        s = rng.uniform(-5, 5, 400)
        G = np.asarray(B_of_beta_eval(pair, s))
        direct = np.array([B_eval(pair, z) for z in np.asarray(pair.beta(s))])
        assert np.abs(direct - G).max() <= 1e-10
        a = rng.uniform(-5, 5, 400)
        b = rng.uniform(-5, 5, 400)
        assert np.asarray(convexity_gap(pair, a, b)).min() >= -1e-10
        # right inverse stays on the correct side and inverts beta
        for z in np.asarray(pair.beta(rng.uniform(-4, 4, 20))):
            t = beta_right_inverse(pair, z)
            assert abs(float(pair.beta(t)) - z) <= 1e-10
            assert t * z >= 0.0 or z == 0.0
