"""Distance functions: metric axioms, reference values, translate decay."""

import math

import numpy as np
import pytest

from parastab.discretization import build_mesh
from parastab.metrics import (
    TestFunctionFamily,
    Trajectory,
    lp_w1p_gap,
    sup_time_l2,
    time_translate_profile,
    weak_uniform_metric,
)
from parastab.solver import solve

RNG = np.random.default_rng(42)


def make_traj(mesh, times, values):
    return Trajectory(times, values, mesh)


@pytest.fixture
def heat_traj(heat_spec, mesh64, times100):
    sol = solve(heat_spec, mesh64, times100)
    return make_traj(mesh64, times100, sol.nuU)


def test_family_orthonormal(mesh64):
    fam = TestFunctionFamily(mesh64, 20)
    assert np.abs(fam.gram() - np.eye(20)).max() <= 1e-10


def test_family_aliasing_guard():
    with pytest.raises(ValueError, match="alias"):
        TestFunctionFamily(build_mesh(16), 20)


def test_identical_inputs_vanish(heat_traj):
    assert sup_time_l2(heat_traj, heat_traj) == 0.0
    assert weak_uniform_metric(heat_traj, heat_traj) == 0.0
    assert lp_w1p_gap(heat_traj, heat_traj, 2.0) == 0.0


def test_constant_shift_value(heat_traj, mesh64, times100):
    shifted = make_traj(mesh64, times100, heat_traj.values + 0.3)
    assert sup_time_l2(heat_traj, shifted) == pytest.approx(0.3, rel=1e-12)


def test_weak_metric_unit_mode(heat_traj, mesh64, times100):
    phi1 = math.sqrt(2.0) * np.sin(np.pi * mesh64.nodes)
    shifted = make_traj(mesh64, times100, heat_traj.values + phi1[None, :])
    assert weak_uniform_metric(heat_traj, shifted) == pytest.approx(0.5, abs=1e-12)
    phi20 = math.sqrt(2.0) * np.sin(20 * np.pi * mesh64.nodes)
    tail = make_traj(mesh64, times100, heat_traj.values + phi20[None, :])
    assert weak_uniform_metric(heat_traj, tail) <= 2.0 ** -20 + 1e-12


def test_weak_bounded_by_strong(heat_traj, mesh64, times100):
    noisy = make_traj(mesh64, times100, heat_traj.values + 0.01 * RNG.normal(size=heat_traj.values.shape))
    L = 20
    assert weak_uniform_metric(heat_traj, noisy, count=L) <= (1 - 2.0 ** -L) * sup_time_l2(heat_traj, noisy) + 1e-12


def test_gap_hat_closed_form(heat_traj, mesh64, times100):
    hat = np.zeros(65)
    hat[32] = 1.0
    shifted = make_traj(mesh64, times100, heat_traj.values + times100[:, None] * hat[None, :])
    h = 1.0 / 64
    expected = math.sqrt(sum(
        (times100[k] - times100[k - 1]) * times100[k] ** 2 * (2.0 / h)
        for k in range(1, times100.size)
    ))
    assert lp_w1p_gap(heat_traj, shifted, 2.0) == pytest.approx(expected, rel=1e-12)


def test_metric_axioms_sampled(mesh64, times100):
    fields = [RNG.normal(size=(times100.size, 65)) for _ in range(3)]
    for f in fields:
        f[:, 0] = f[:, -1] = 0.0
    trs = [make_traj(mesh64, times100, f) for f in fields]
    for dist in (sup_time_l2, lambda a, b: weak_uniform_metric(a, b), lambda a, b: lp_w1p_gap(a, b, 2.0)):
        d01, d10 = dist(trs[0], trs[1]), dist(trs[1], trs[0])
        assert d01 == pytest.approx(d10, rel=1e-12)
        assert dist(trs[0], trs[2]) <= d01 + dist(trs[1], trs[2]) + 1e-12


def test_cross_mesh_refinement(heat_spec):
    # coarse vs fine-interpolated reference: positive, decreasing under refinement
    fine = build_mesh(128)
    tfine = np.linspace(0, 0.1, 101)
    ref = solve(heat_spec, fine, tfine)
    ref_tr = make_traj(fine, tfine, ref.nuU)
    vals = []
    for n in (16, 32):
        mesh = build_mesh(n)
        sol = solve(heat_spec, mesh, tfine)
        vals.append(sup_time_l2(make_traj(mesh, tfine, sol.nuU), ref_tr))
    assert vals[0] > vals[1] > 0.0


def test_translate_profile_heat(heat_traj):
    prof = time_translate_profile(heat_traj, [0.005, 0.01, 0.02, 0.04])
    assert prof.defined and prof.exponent >= 0.45


def test_translate_profile_flags_constant(mesh64, times100):
    const = make_traj(mesh64, times100, np.ones((times100.size, 65)))
    prof = time_translate_profile(const, [0.005, 0.01, 0.02])
    assert not prof.defined
    assert np.abs(prof.norms).max() == 0.0


def test_translate_profile_zero_pair(mesh64, times100, stefan_spec):
    # the alternating-plateau pair has nu identically zero
    from parastab.monotone import preset_pair
    from parastab.solver import ProblemSpec

    import conftest

    spec = ProblemSpec(pair=preset_pair("step-graph"), flux=stefan_spec.flux,
                       source=conftest.zero_source, initial=lambda x: 2.0 * conftest.sine(x),
                       horizon=0.1)
    sol = solve(spec, mesh64, times100)
    prof = time_translate_profile(make_traj(mesh64, times100, sol.nuU), [0.01, 0.02, 0.04])
    assert np.abs(prof.norms).max() == 0.0 and not prof.defined


def test_translate_profile_needs_three_offsets(heat_traj):
    with pytest.raises(ValueError):
        time_translate_profile(heat_traj, [0.01, 0.02])
