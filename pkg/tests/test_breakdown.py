"""Tests for analytic breakdown times and reachability predicates."""

import math

import numpy as np
import pytest

from qpp.core.breakdown import (
    bitflip_closed_form,
    coherence_breakdown_quadrature,
    coherence_closed_form,
    coherence_stable_reachability,
    fidelity_breakdown_quadrature,
    fidelity_frame,
    fidelity_g,
    fixed_p_stable_reachability,
    tb_coherence,
    tb_fidelity,
)
from qpp.core.channels import ChannelSpec, builtin_dissipator
from qpp.core.dynamics import simulate_tracked
from qpp.core.exceptions import BreakdownPoint, InvalidReference, OutsideDomain, UnsupportedScenario
from qpp.core.operator_space import StateVector
from qpp.core.properties import coherence_property, fidelity_property
from qpp.core.types import IntegratorConfig, SynthesisPolicy

V0 = StateVector.bloch(0.5, 0.5, 0.70710678118654752)
SQRT_HALF = math.sqrt(0.5)

DEPHASING = ChannelSpec(kind="dephasing", gamma=1.0)
BIT_FLIP = ChannelSpec(kind="bit_flip", gamma=1.0)
DEPOLARIZING = ChannelSpec(kind="depolarizing", gamma=1.0)
RELAXATION = ChannelSpec(kind="relaxation", gamma=1.0, beta_delta=2.0)


# -- coherence -----------------------------------------------------------------


def test_dephasing_coherence_breakdown():
    """Test t_b = vz^2 / (4 gamma f0) for dephasing."""
    prediction = tb_coherence(DEPHASING, V0)
    assert prediction.reachability == "finite_breakdown"
    assert prediction.formula_id == "dephasing_coherence"
    assert prediction.t_b == pytest.approx(0.25, rel=1e-12)
    assert prediction.inputs["v0"] == pytest.approx([0.5, 0.5, 0.70710678118654752])
    assert prediction.inputs["gamma"] == 1.0


def test_bit_flip_coherence_breakdown():
    """Test the bit-flip breakdown time ln(2e - 1) / 4."""
    prediction = tb_coherence(BIT_FLIP, V0)
    assert prediction.formula_id == "bit_flip_coherence"
    assert prediction.t_b == pytest.approx(0.372470, abs=1e-6)
    assert prediction.t_b == pytest.approx(0.25 * math.log(2.0 * math.e - 1.0), rel=1e-12)


def test_bit_flip_coherence_limits():
    """Test the vx = 0 limit, its continuity, and the stable vy = 0 case."""
    limit = tb_coherence(BIT_FLIP, StateVector.bloch(0.0, 0.6, 0.5))
    assert limit.formula_id == "bit_flip_coherence_limit"
    assert limit.t_b == pytest.approx(0.25 * math.log1p(0.25 / 0.36), rel=1e-12)
    near = tb_coherence(BIT_FLIP, StateVector.bloch(1e-4, 0.6, 0.5))
    assert near.t_b == pytest.approx(limit.t_b, rel=1e-6)

    stable = tb_coherence(BIT_FLIP, StateVector.bloch(0.6, 0.0, 0.5))
    assert stable.reachability == "stable_reachable"
    assert stable.label == "x_axis_decay"
    assert stable.t_b is None


def test_depolarizing_coherence_breakdown():
    """Test the depolarizing breakdown time (3/8) ln 2."""
    prediction = tb_coherence(DEPOLARIZING, V0)
    assert prediction.t_b == pytest.approx(0.259930, abs=1e-6)


def test_z_axis_is_trivially_stable():
    """Test that states without coherence never break down."""
    prediction = tb_coherence(DEPHASING, StateVector.bloch(0.0, 0.0, 0.5))
    assert prediction.reachability == "trivially_stable"
    assert prediction.formula_id == "z_axis"
    assert not prediction.is_finite


@pytest.mark.parametrize("spec", [DEPHASING, DEPOLARIZING], ids=lambda s: s.kind)
def test_closed_forms_match_quadrature(spec):
    """Test the closed-form breakdown times against the quadrature."""
    for coords in [(0.5, 0.5, 0.70710678118654752), (0.2, -0.3, -0.6), (0.7, 0.1, 0.1)]:
        v0 = StateVector.bloch(*coords)
        assert tb_coherence(spec, v0).t_b == pytest.approx(coherence_breakdown_quadrature(spec, v0).t_b, rel=1e-9)


@pytest.mark.parametrize(
    "coords, formula_id",
    [
        ((0.6, 0.0, 0.5), "relaxation_above_threshold"),
        ((0.0, 0.6, -0.4), "relaxation_above_threshold"),
        ((math.sqrt(0.2), 0.0, 0.05), "relaxation_below_ellipsoid"),
        ((0.0, math.sqrt(0.2), -0.3), "relaxation_below_ellipsoid"),
    ],
)
def test_relaxation_coherence_matches_quadrature(coords, formula_id):
    """Test both relaxation closed forms against the quadrature."""
    v0 = StateVector.bloch(*coords)
    prediction = tb_coherence(RELAXATION, v0)
    assert prediction.reachability == "finite_breakdown"
    assert prediction.formula_id == formula_id
    oracle = coherence_breakdown_quadrature(RELAXATION, v0)
    assert prediction.t_b == pytest.approx(oracle.t_b, rel=1e-8)


@pytest.mark.parametrize(
    "coords, region",
    [
        ((math.sqrt(0.2), 0.0, 0.8), "above_ellipsoid"),
        ((math.sqrt(0.1), 0.0, 0.4), "inside_ellipsoid"),
    ],
)
def test_relaxation_stable_regions(coords, region):
    """Test the relaxation regions that reach the stable ellipsoid."""
    v0 = StateVector.bloch(*coords)
    prediction = tb_coherence(RELAXATION, v0)
    assert prediction.reachability == "stable_reachable"
    assert prediction.label == region
    assert coherence_stable_reachability(RELAXATION, v0).region == region
    assert coherence_breakdown_quadrature(RELAXATION, v0).reachability == "stable_reachable"


def test_relaxation_dephasing_threshold():
    """Test that added dephasing moves states outside the threshold."""
    spec = ChannelSpec(kind="relaxation_dephasing", gamma1=1.0, gamma_d=1.0, beta_delta=2.0)
    v0 = StateVector.bloch(math.sqrt(0.2), 0.0, 0.05)
    prediction = tb_coherence(spec, v0)
    assert prediction.formula_id == "relaxation_above_threshold"
    assert prediction.t_b == pytest.approx(coherence_breakdown_quadrature(spec, v0).t_b, rel=1e-8)
    assert not coherence_stable_reachability(spec, v0).reachable


def test_unsupported_coherence_scenarios():
    """Test channels without a closed-form coherence breakdown time."""
    with pytest.raises(UnsupportedScenario):
        tb_coherence(ChannelSpec(kind="bit_phase_flip", gamma=1.0), V0)
    with pytest.raises(UnsupportedScenario):
        tb_coherence(ChannelSpec(kind="qudit_dephasing", gamma=1.0, dim=3, levels=(0, 1)), StateVector(dim=3, coords=np.zeros(8)))
    with pytest.raises(UnsupportedScenario):
        coherence_breakdown_quadrature(BIT_FLIP, V0)


def test_coherence_stable_reachability():
    """Test the coherence reachability predicate per channel."""
    assert not coherence_stable_reachability(DEPHASING, V0).reachable
    assert coherence_stable_reachability(DEPHASING, StateVector.bloch(0.0, 0.0, 0.3)).region == "z_axis"
    steering = coherence_stable_reachability(BIT_FLIP, V0)
    assert steering.reachable and steering.region == "alpha2_steering"
    outside = coherence_stable_reachability(RELAXATION, StateVector.bloch(0.6, 0.0, 0.5))
    assert not outside.reachable
    assert outside.region == "outside_threshold"


def test_dephasing_closed_form():
    """Test the tracked dephasing state and its domain."""
    v = coherence_closed_form(DEPHASING, V0, 0.1)
    np.testing.assert_allclose(v.coords, [0.5, 0.5, math.sqrt(0.3)], atol=1e-12)
    with pytest.raises(OutsideDomain):
        coherence_closed_form(DEPHASING, V0, 0.3)
    with pytest.raises(OutsideDomain):
        coherence_closed_form(DEPHASING, V0, -0.1)
    with pytest.raises(UnsupportedScenario):
        coherence_closed_form(RELAXATION, V0, 0.1)


def test_bitflip_closed_form_matches_simulation():
    """Test the bit-flip closed form against a tracked run."""
    t_eval = [0.1, 0.2, 0.3]
    result = simulate_tracked(
        coherence_property(), builtin_dissipator(BIT_FLIP), V0, cfg=IntegratorConfig(t_max=0.3), t_eval=t_eval
    )
    for t, coords in zip(result.times[1:], result.states[1:]):
        expected = bitflip_closed_form(V0, 1.0, float(t)).coords
        np.testing.assert_allclose(coords, expected, atol=1e-6)
        assert expected[0] ** 2 + expected[1] ** 2 == pytest.approx(0.5)
    np.testing.assert_allclose(bitflip_closed_form(V0, 1.0, 0.0).coords, V0.coords, atol=1e-15)
    with pytest.raises(OutsideDomain):
        bitflip_closed_form(V0, 1.0, 0.38)


def test_bitflip_closed_form_z_axis():
    """Test that states on the z-axis decay freely."""
    v = bitflip_closed_form(StateVector.bloch(0.0, 0.0, 0.8), 1.0, 0.5)
    np.testing.assert_allclose(v.coords, [0.0, 0.0, 0.8 * math.exp(-1.0)])


# -- fidelity ------------------------------------------------------------------


def test_fidelity_axis_case():
    """Test the fixed-p breakdown time when p is along the channel axis."""
    prediction = tb_fidelity(DEPHASING, StateVector.bloch(0.0, 0.5, 0.6), [0.0, 1.0, 0.0])
    assert prediction.formula_id == "fidelity_pauli_axis"
    assert prediction.t_b == pytest.approx(0.36, rel=1e-12)


def test_fidelity_depolarizing():
    """Test the depolarizing fidelity breakdown time (3/8) ln 4."""
    v0 = StateVector.bloch(0.3 * math.sqrt(3.0), 0.0, 0.3)
    prediction = tb_fidelity(DEPOLARIZING, v0, [0.0, 0.0, 1.0])
    assert prediction.formula_id == "fidelity_depolarizing"
    assert prediction.t_b == pytest.approx(0.519860, abs=1e-6)
    assert prediction.t_b == pytest.approx(fidelity_breakdown_quadrature(DEPOLARIZING, v0, [0.0, 0.0, 1.0]).t_b, rel=1e-9)


@pytest.mark.parametrize(
    "spec, coords, w",
    [
        (DEPHASING, (0.3, 0.5, 0.4), (0.0, 1.0, 0.0)),
        (DEPHASING, (0.141421356237, 0.0, 0.565685424949), (SQRT_HALF, 0.0, SQRT_HALF)),
        (BIT_FLIP, (0.2, 0.3, -0.5), (0.0, 0.6, 0.8)),
        (ChannelSpec(kind="bit_phase_flip", gamma=0.5), (0.4, 0.1, 0.3), (SQRT_HALF, SQRT_HALF, 0.0)),
        (DEPHASING, (0.5, 0.2, 0.1), (0.0, 0.6, -0.8)),
    ],
)
def test_pauli_fidelity_matches_quadrature(spec, coords, w):
    """Test the closed-form Pauli fidelity breakdown time against the quadrature."""
    v0 = StateVector.bloch(*coords)
    prediction = tb_fidelity(spec, v0, np.array(w))
    oracle = fidelity_breakdown_quadrature(spec, v0, np.array(w))
    assert prediction.reachability == oracle.reachability == "finite_breakdown"
    assert prediction.t_b == pytest.approx(oracle.t_b, rel=1e-8)


def test_pauli_fidelity_spot_values():
    """Test the non-coplanar and coplanar dephasing examples."""
    skew = tb_fidelity(DEPHASING, StateVector.bloch(0.3, 0.5, 0.4), [0.0, 1.0, 0.0])
    assert skew.t_b == pytest.approx(math.log(1.36) / 1.44, rel=1e-10)
    coplanar = tb_fidelity(DEPHASING, StateVector.bloch(0.141421356237, 0.0, 0.565685424949), [SQRT_HALF, 0.0, SQRT_HALF])
    assert coplanar.t_b == pytest.approx(1.5 + math.log(0.4), rel=1e-8)


def test_fidelity_stable_outcomes():
    """Test the stable fixed-p outcomes under dephasing."""
    w = [SQRT_HALF, 0.0, SQRT_HALF]
    segment = tb_fidelity(DEPHASING, StateVector.bloch(-0.141421356237, 0.0, 0.848528137424), w)
    assert segment.reachability == "stable_reachable"
    assert segment.label == "fixed_p_segment"
    point = tb_fidelity(DEPHASING, StateVector.bloch(0.0, 0.0, 0.70710678118654752), w)
    assert point.reachability == "trivially_stable"
    assert point.label == "stable_point"
    on_axis = tb_fidelity(DEPHASING, StateVector.bloch(0.0, 0.0, 0.5), [1.0, 0.0, 0.0])
    assert on_axis.label == "on_axis"
    orthogonal = tb_fidelity(DEPHASING, StateVector.bloch(0.0, 0.5, 0.0), [1.0, 0.0, 0.0])
    assert orthogonal.label == "alpha_w_zero"


def test_fidelity_errors():
    """Test reference and collinearity errors."""
    with pytest.raises(InvalidReference):
        tb_fidelity(DEPHASING, V0, [0.0, 0.0, 1.5])
    with pytest.raises(UnsupportedScenario):
        tb_fidelity(DEPHASING, V0, [0.0, 0.0, 0.5])
    with pytest.raises(BreakdownPoint):
        tb_fidelity(DEPHASING, StateVector.bloch(0.0, 0.0, 0.5), [0.0, 0.0, 1.0])


def test_relaxation_fidelity_matches_quadrature():
    """Test the relaxation fidelity ODE against the quadrature."""
    v0 = StateVector.bloch(0.3, 0.5, 0.4)
    prediction = tb_fidelity(RELAXATION, v0, [0.0, 1.0, 0.0])
    assert prediction.formula_id == "fidelity_relaxation_ode"
    assert prediction.t_b == pytest.approx(fidelity_breakdown_quadrature(RELAXATION, v0, [0.0, 1.0, 0.0]).t_b, rel=1e-7)


def test_relaxation_fidelity_purity_increasing():
    """Test that a purity-increasing start is stable-reachable."""
    prediction = tb_fidelity(RELAXATION, StateVector.bloch(0.0, 0.1, 0.3), [0.0, 1.0, 0.0])
    assert prediction.reachability == "stable_reachable"
    assert prediction.label == "purity_increasing"


def test_fidelity_frame():
    """Test the decomposition v = alpha_w w + alpha_p p and its angles."""
    frame = fidelity_frame(StateVector.bloch(0.3, 0.5, 0.4), [0.0, 1.0, 0.0])
    assert frame.alpha_w == pytest.approx(0.5)
    assert frame.alpha_p == pytest.approx(0.5)
    np.testing.assert_allclose(frame.p, [0.6, 0.0, 0.8])
    assert frame.theta_w == pytest.approx(0.5 * math.pi)
    assert frame.coplanarity == pytest.approx(0.6)
    assert frame.c1 == pytest.approx(0.0)
    assert frame.c2 == pytest.approx(-0.25 * 0.36 / 0.36**2)


def test_fidelity_g_is_continuous_across_branches():
    """Test that g(alpha0) - g(0) is continuous in c2 for c1 < 0."""
    c1, alpha0 = -0.4, 0.5
    expected = fidelity_g(alpha0, c1, 0.0) - fidelity_g(0.0, c1, 0.0)
    for c2 in (-1e-8, 1e-8):
        assert fidelity_g(alpha0, c1, c2) - fidelity_g(0.0, c1, c2) == pytest.approx(expected, rel=1e-4)


# -- fixed-p stable reachability -----------------------------------------------


def test_fixed_p_reachable():
    """Test the three stable-point conditions on a reachable dephasing example."""
    w = np.array([SQRT_HALF, 0.0, SQRT_HALF])
    result = fixed_p_stable_reachability(StateVector.bloch(-0.141421356237, 0.0, 0.848528137424), w, DEPHASING)
    assert result.coplanar and result.between and result.above_threshold
    assert result.reachable
    assert result.threshold == pytest.approx(0.5)
    assert result.angle_sum == pytest.approx(0.5 * math.pi)

    flipped = fixed_p_stable_reachability(StateVector.bloch(-0.141421356237, 0.0, 0.848528137424), -w, DEPHASING)
    assert flipped.reachable


def test_fixed_p_below_threshold():
    """Test that alpha_p below alpha_w tan(theta_w) is not reachable."""
    w = np.array([SQRT_HALF, 0.0, SQRT_HALF])
    result = fixed_p_stable_reachability(StateVector.bloch(0.141421356237, 0.0, 0.565685424949), w, DEPHASING)
    assert result.coplanar and result.between
    assert not result.above_threshold
    assert not result.reachable


def test_fixed_p_not_coplanar():
    """Test that a non-coplanar configuration is not reachable."""
    result = fixed_p_stable_reachability(StateVector.bloch(0.3, 0.5, 0.4), [0.0, 1.0, 0.0], DEPHASING)
    assert not result.coplanar
    assert not result.reachable


def test_fixed_p_bit_flip_axis():
    """Test that the bit-flip channel uses the x-axis."""
    w = np.array([SQRT_HALF, SQRT_HALF, 0.0])
    v0 = StateVector.bloch(0.848528137424, -0.141421356237, 0.0)
    assert fixed_p_stable_reachability(v0, w, BIT_FLIP).reachable
    with pytest.raises(UnsupportedScenario):
        fixed_p_stable_reachability(v0, w, DEPOLARIZING)


# -- simulated against predicted -----------------------------------------------

FIXED_P = SynthesisPolicy(mode="fixed_p")
LONG_RUN = IntegratorConfig(t_max=50.0)
RELAXATION_DEPHASING = ChannelSpec(kind="relaxation_dephasing", gamma1=1.0, gamma_d=0.3, beta_delta=2.0)


def coherence_sweep_states(rng, n=100):
    """States with f0 in [0.05, 0.6] and vz in [0.1, 0.8], with a random rate."""
    states = []
    while len(states) < n:
        f0, vz = rng.uniform(0.05, 0.6), rng.uniform(0.1, 0.8)
        if f0 + vz**2 > 0.98:
            continue
        phi = rng.uniform(0.1, 0.5 * math.pi - 0.1) + 0.5 * math.pi * rng.integers(4)
        r = math.sqrt(f0)
        states.append((float(rng.choice([0.5, 1.0, 2.0])), StateVector.bloch(r * math.cos(phi), r * math.sin(phi), vz)))
    return states


@pytest.mark.parametrize("kind", ["dephasing", "bit_flip", "depolarizing"])
def test_tracked_coherence_sweep_matches_closed_forms(kind):
    """Test simulated coherence breakdown times against the closed forms over 100 states."""
    f = coherence_property()
    for gamma, v0 in coherence_sweep_states(np.random.default_rng(2024)):
        spec = ChannelSpec(kind=kind, gamma=gamma)
        expected = tb_coherence(spec, v0).t_b
        result = simulate_tracked(f, builtin_dissipator(spec), v0, cfg=LONG_RUN)
        assert result.termination.kind == "breakdown"
        assert result.t_b == pytest.approx(expected, rel=1e-4)
        assert result.max_f_drift() < 1e-6


@pytest.mark.parametrize("coords", [(0.5, 0.3, 0.5), (0.3, 0.0, 0.1), (0.2, 0.4, -0.3)])
def test_relaxation_dephasing_coherence_matches_simulation(coords):
    """Test the relaxation+dephasing breakdown time against a tracked run on both branches."""
    v0 = StateVector.bloch(*coords)
    prediction = tb_coherence(RELAXATION_DEPHASING, v0)
    assert prediction.reachability == "finite_breakdown"
    result = simulate_tracked(coherence_property(), builtin_dissipator(RELAXATION_DEPHASING), v0, cfg=LONG_RUN)
    assert result.termination.kind == "breakdown"
    assert result.t_b == pytest.approx(prediction.t_b, rel=1e-4)
    assert result.max_f_drift() < 1e-6


@pytest.mark.parametrize("coords", [(0.5, 0.3, 0.5), (0.0, 0.6, -0.4), (math.sqrt(0.2), 0.0, 0.05)])
def test_relaxation_dephasing_without_dephasing_reduces_to_relaxation(coords):
    """Test that gamma_d = 0 reproduces the pure relaxation breakdown time."""
    v0 = StateVector.bloch(*coords)
    reduced = tb_coherence(ChannelSpec(kind="relaxation_dephasing", gamma1=1.0, gamma_d=0.0, beta_delta=2.0), v0)
    pure = tb_coherence(RELAXATION, v0)
    assert reduced.t_b == pytest.approx(pure.t_b, abs=1e-6)
    assert reduced.t_b == pytest.approx(coherence_breakdown_quadrature(RELAXATION, v0).t_b, abs=1e-6)


@pytest.mark.parametrize(
    "spec, coords, w",
    [
        (DEPHASING, (0.3, 0.5, 0.4), (0.0, 1.0, 0.0)),
        (DEPHASING, (0.141421356237, 0.0, 0.565685424949), (SQRT_HALF, 0.0, SQRT_HALF)),
        (BIT_FLIP, (0.2, 0.3, -0.5), (0.0, 0.6, 0.8)),
        (DEPOLARIZING, (0.3 * math.sqrt(3.0), 0.0, 0.3), (0.0, 0.0, 1.0)),
    ],
    ids=["dephasing-skew", "dephasing-coplanar", "bit-flip", "depolarizing"],
)
def test_fixed_p_fidelity_matches_simulation(spec, coords, w):
    """Test fixed-p fidelity breakdown times against tracked runs."""
    v0 = StateVector.bloch(*coords)
    prediction = tb_fidelity(spec, v0, np.array(w))
    result = simulate_tracked(fidelity_property(w), builtin_dissipator(spec), v0, FIXED_P, LONG_RUN)
    assert result.termination.kind == "breakdown"
    assert result.t_b == pytest.approx(prediction.t_b, rel=1e-4)
    assert result.max_f_drift() < 1e-6


def relaxation_level_set_state(fidelity_sq, alpha_p, phi):
    """State with F^2 = fidelity_sq to w = (1, 0, 1)/sqrt(2), offset alpha_p along p(phi) orthogonal to w."""
    w = np.array([SQRT_HALF, 0.0, SQRT_HALF])
    p = math.cos(phi) * np.array([-SQRT_HALF, 0.0, SQRT_HALF]) + math.sin(phi) * np.array([0.0, 1.0, 0.0])
    return w, StateVector.bloch(*((2.0 * fidelity_sq - 1.0) * w + alpha_p * p))


@pytest.mark.parametrize("alpha_p, phi", [(0.8, 0.3), (0.5, 2.0), (0.1, 4.0)])
def test_relaxation_fidelity_level_set_reaches_stable_point(alpha_p, phi):
    """Test that the F^2 = 0.75 level set crosses the stability ellipsoid and is reached."""
    w, v0 = relaxation_level_set_state(0.75, alpha_p, phi)
    prediction = tb_fidelity(RELAXATION, v0, w)
    assert prediction.reachability == "stable_reachable"
    assert prediction.t_b is None
    result = simulate_tracked(fidelity_property(w), builtin_dissipator(RELAXATION), v0, FIXED_P, LONG_RUN)
    assert result.termination.kind == "stable"
    assert result.termination.t < 50.0
    assert result.max_f_drift() < 1e-6


@pytest.mark.parametrize("alpha_p, phi", [(0.55, 0.3), (0.4, 2.0), (0.25, 4.0)])
def test_relaxation_fidelity_level_set_breaks_down(alpha_p, phi):
    """Test that every state on the F^2 = 0.9 level set breaks down at the predicted time."""
    w, v0 = relaxation_level_set_state(0.9, alpha_p, phi)
    prediction = tb_fidelity(RELAXATION, v0, w)
    assert prediction.reachability == "finite_breakdown"
    result = simulate_tracked(fidelity_property(w), builtin_dissipator(RELAXATION), v0, FIXED_P, LONG_RUN)
    assert result.termination.kind == "breakdown"
    assert result.t_b == pytest.approx(prediction.t_b, rel=1e-4)
    assert result.max_f_drift() < 1e-6
