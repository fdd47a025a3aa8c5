"""Perturbation families, uniformity envelopes, and sweep behavior."""

import numpy as np
import pytest

from parastab.solver import SolverConfig, solve
from parastab.stability import check_hypothesis_uniformity, make_family, run_sweep

from conftest import sine


def test_delta_family_formula(heat_spec):
    fam = make_family(heat_spec, "delta-nonlinearity", [4])
    assert float(fam.members[0].pair.beta(1.0)) == 1.25
    assert float(fam.members[0].pair.zeta(-2.0)) == -2.5


def test_mollified_family_distance(stefan_spec):
    fam = make_family(stefan_spec, "mollified-nonlinearity", [10])
    assert fam.local_uniform_distance[10]["zeta"] <= 0.1


def test_source_shift_formula(heat_spec):
    fam = make_family(heat_spec, "source-shift", [2])
    assert float(fam.members[0].source(0.5, 0.0)) == pytest.approx(0.5, abs=1e-14)


def test_initial_shift_formula(heat_spec):
    fam = make_family(heat_spec, "initial-shift", [5])
    gap = np.asarray(fam.members[0].initial(np.array([0.5]))) - np.asarray(heat_spec.initial(np.array([0.5])))
    assert gap[0] == pytest.approx(0.2, abs=1e-14)


def test_mollify_radius_incompatibility(stefan_spec):
    with pytest.raises(ValueError, match="radius"):
        make_family(stefan_spec, "mollified-nonlinearity", [1])


def test_uniformity_envelopes(heat_spec):
    fam = make_family(heat_spec, "delta-nonlinearity", [2, 4, 8])
    rep = check_hypothesis_uniformity(fam)
    assert rep.passed
    assert rep.envelope["L_beta"] == (1.0, 1.5)
    assert rep.max_constants["L_beta"] == 1.5

    fam = make_family(heat_spec, "flux-scale", [2, 4])
    rep = check_hypothesis_uniformity(fam)
    assert rep.passed
    assert rep.envelope["mu"] == (1.0, 2.0)
    assert all(c["a_lower"] == heat_spec.flux.a_lower for _, c in rep.rows)


def test_uniformity_violation_flagged(heat_spec):
    fam = make_family(heat_spec, "slope-blowup", [2, 4])
    rep = check_hypothesis_uniformity(fam)
    assert not rep.passed
    assert any(key == "L_beta" for _, key, _, _ in rep.violations)


def test_reference_consistency(heat_spec, mesh64):
    # members identical to the base: all metrics at the Newton-noise floor
    times = np.linspace(0, 0.1, 51)
    fam = make_family(heat_spec, "source-shift", [2, 4],
                      source_profile=lambda x: np.zeros_like(np.asarray(x, dtype=float)))
    rep = run_sweep(fam, mesh64, times)
    for row in rep.rows:
        assert row.ok
        assert row.sup_l2_nu <= rep.noise_floor
        assert row.weak_unif_beta <= rep.noise_floor
        assert row.w1p_gap_zeta <= rep.noise_floor


def test_sweep_decay_heat_delta(heat_spec, mesh64):
    times = np.linspace(0, 0.1, 51)
    fam = make_family(heat_spec, "delta-nonlinearity", [2, 4, 8])
    rep = run_sweep(fam, mesh64, times)
    series = rep.metric_series("sup_l2_nu")
    assert series[0] > series[1] > series[2] > 0
    assert rep.trends["sup_l2_nu"]["nonincreasing_within_noise"]


def test_sweep_continues_after_member_failure(heat_spec, mesh64):
    times = np.linspace(0, 0.1, 51)
    fam = make_family(heat_spec, "delta-nonlinearity", [2, 4])
    cfg = SolverConfig(newton_tol=1e-30, max_newton=2, max_picard=2)
    ref = solve(heat_spec, mesh64, times)  # reference with a sane config
    rep = run_sweep(fam, mesh64, times, cfg, reference=ref)
    assert all(not r.ok and r.message for r in rep.rows)


def test_flux_scale_distance(heat_spec):
    fam = make_family(heat_spec, "flux-scale", [4])
    # |a_n - a| = (1/4) sup |xi| over the probe grid (|xi| <= 3)
    assert fam.local_uniform_distance[4]["a"] == pytest.approx(0.75, rel=1e-12)


def test_unknown_kind_rejected(heat_spec):
    with pytest.raises(ValueError, match="kind"):
        make_family(heat_spec, "bogus", [2])
