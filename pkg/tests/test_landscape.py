"""Tests for stable loci, breakdown sets and trajectory realizability."""

import numpy as np
import pytest

from qpp.core.channels import ChannelSpec, builtin_dissipator
from qpp.core.control import alpha2_steering
from qpp.core.exceptions import DimensionMismatch, InvalidTrajectory, NotAStablePoint, NotRealizable
from qpp.core.landscape import (
    ParamTrajectory,
    breakdown_membership,
    check_realizability,
    bitflip_steering_path,
    is_stable_point,
    purity_rate,
    reparameterize,
    scan_grid,
    stable_locus,
    stabilizing_control,
)
from qpp.core.operator_space import DensityMatrix, StateVector, state_matrix
from qpp.core.properties import coherence_property


def test_purity_rate_is_convention_independent(dephasing):
    """Test that the purity rate is the same in both conventions."""
    v = StateVector.bloch(0.5, 0.5, 0.7)
    assert purity_rate(dephasing, v) == pytest.approx(-1.0)
    assert purity_rate(dephasing.to_convention("coherence"), v) == pytest.approx(-1.0)
    with pytest.raises(DimensionMismatch):
        purity_rate(dephasing, StateVector(dim=3, coords=np.zeros(8)))


@pytest.mark.parametrize(
    "spec, kind",
    [
        (ChannelSpec(kind="dephasing", gamma=1.0), "line"),
        (ChannelSpec(kind="bit_flip", gamma=1.0), "line"),
        (ChannelSpec(kind="depolarizing", gamma=1.0), "origin"),
        (ChannelSpec(kind="relaxation", gamma=1.0, beta_delta=2.0), "ellipsoid"),
        (ChannelSpec(kind="relaxation_dephasing", gamma1=1.0, gamma_d=0.5, beta_delta=1.0), "ellipsoid"),
    ],
    ids=lambda x: x.kind if isinstance(x, ChannelSpec) else x,
)
def test_stable_locus_kind(spec, kind):
    """Test the classification of the qubit stable set."""
    assert stable_locus(builtin_dissipator(spec)).kind == kind


def test_relaxation_ellipsoid_geometry(relaxation):
    """Test the center and semi-axes of the relaxation stable ellipsoid."""
    a = ChannelSpec(kind="relaxation", gamma=1.0, beta_delta=2.0).a
    locus = stable_locus(relaxation)
    np.testing.assert_allclose(locus.center, [0.0, 0.0, a], atol=1e-12)
    np.testing.assert_allclose(sorted(locus.semi_axes), [a, np.sqrt(2.0) * a, np.sqrt(2.0) * a], rtol=1e-12)
    assert locus.level == pytest.approx(a * a)
    for point in ([0.0, 0.0, 0.0], [0.0, 0.0, 2.0 * a], [np.sqrt(2.0) * a, 0.0, a]):
        assert locus.contains(np.array(point))
    assert not locus.contains(np.array([0.0, 0.0, a]))


def test_stable_locus_samples_lie_on_the_locus(relaxation, rng):
    """Test that sampled locus points are stable and inside the Bloch ball."""
    locus = stable_locus(relaxation)
    points = locus.sample(20, rng)
    assert len(points) == 20
    for v in points:
        assert v.norm <= 1.0
        assert locus.contains(v, tol=1e-9)
        assert is_stable_point(relaxation, v, tol=1e-9)


def test_is_stable_point(dephasing, relaxation):
    """Test the purity and spectral stability tests."""
    assert is_stable_point(dephasing, StateVector.bloch(0.0, 0.0, 0.6))
    assert not is_stable_point(dephasing, StateVector.bloch(0.3, 0.0, 0.0))
    assert is_stable_point(dephasing, StateVector.bloch(0.0, 0.0, 0.0))
    assert not is_stable_point(relaxation, StateVector.bloch(0.0, 0.0, 0.0))

    a = ChannelSpec(kind="relaxation", gamma=1.0, beta_delta=2.0).a
    on_ellipsoid = StateVector.bloch(np.sqrt(2.0) * a, 0.0, a)
    assert is_stable_point(relaxation, on_ellipsoid)
    assert is_stable_point(relaxation, on_ellipsoid, method="spectral")
    assert is_stable_point(relaxation.source, DensityMatrix.from_matrix(state_matrix(on_ellipsoid)))
    assert not is_stable_point(relaxation, StateVector.bloch(0.0, 0.0, a), method="spectral")


def test_stabilizing_control_holds_the_state(relaxation):
    """Test that the stabilizing control cancels the drift."""
    a = ChannelSpec(kind="relaxation", gamma=1.0, beta_delta=2.0).a
    v = StateVector.bloch(np.sqrt(2.0) * a, 0.0, a)
    control = stabilizing_control(relaxation, v)
    coords = v.coords
    velocity = 2.0 * np.cross(control.h, coords) + relaxation.apply(coords)
    np.testing.assert_allclose(velocity, 0.0, atol=1e-12)
    with pytest.raises(NotAStablePoint):
        stabilizing_control(relaxation, StateVector.bloch(0.0, 0.0, 0.0))


def test_stabilizing_control_qutrit():
    """Test the matrix-form stabilizing control for a qutrit stable point."""
    D = builtin_dissipator(ChannelSpec(kind="qudit_dephasing", gamma=1.0, dim=3, levels=(0, 1)))
    rho = DensityMatrix.from_matrix(np.diag([0.5, 0.3, 0.2]))
    control = stabilizing_control(D, rho)
    np.testing.assert_allclose(control.H, 0.0, atol=1e-12)


def test_breakdown_membership(dephasing):
    """Test breakdown points of coherence under dephasing."""
    f = coherence_property()
    assert breakdown_membership(f, dephasing, StateVector.bloch(0.5, 0.0, 0.0))
    assert not breakdown_membership(f, dephasing, StateVector.bloch(0.5, 0.5, 0.7))
    assert not breakdown_membership(f, dephasing, StateVector.bloch(0.0, 0.0, 0.7))


@pytest.mark.parametrize(
    "u",
    [[0.0], [0.0, 0.5, 0.4], [-0.1, 0.5], [0.0, 1.2]],
)
def test_param_trajectory_validation(u):
    """Test that malformed parameter grids are rejected."""
    with pytest.raises(InvalidTrajectory):
        ParamTrajectory(u=np.asarray(u), coords=np.zeros((len(u), 3)))


def _free_dephasing_path(horizon, reverse=False, n=201):
    u = np.linspace(0.0, 1.0, n)
    s = (1.0 - u) if reverse else u
    decay = np.exp(-2.0 * horizon * s)
    coords = np.stack([0.5 * decay, 0.5 * decay, np.full_like(u, 0.7)], axis=1)
    sign = 1.0 if reverse else -1.0
    derivatives = np.stack([sign * 2.0 * horizon * coords[:, 0], sign * 2.0 * horizon * coords[:, 1], 0.0 * u], axis=1)
    return ParamTrajectory(u=u, coords=coords, derivatives=derivatives)


def test_free_evolution_path_is_realizable(dephasing):
    """Test that a free-evolution path is realizable with c(u) equal to the horizon."""
    path = _free_dephasing_path(0.8)
    report = check_realizability(path, dephasing)
    assert report.realizable
    assert report.first_violation is None
    np.testing.assert_allclose(report.c_values, 0.8, rtol=1e-6)
    timed = reparameterize(path, report)
    assert timed.final_time == pytest.approx(0.8, rel=1e-6)
    assert len(report.c_samples) == len(report.u_grid)


def test_purifying_path_is_not_realizable(dephasing):
    """Test that a path gaining coherence under dephasing is rejected at its start."""
    path = _free_dephasing_path(0.8, reverse=True)
    report = check_realizability(path, dephasing)
    assert not report.realizable
    u, reason = report.first_violation
    assert reason == "c_nonpositive"
    assert u == pytest.approx(0.0, abs=1e-9)
    with pytest.raises(NotRealizable):
        reparameterize(path, report)


def test_level_set_violation(dephasing):
    """Test that a path leaving the property's level set is reported."""
    report = check_realizability(_free_dephasing_path(0.8), dephasing, f=coherence_property())
    assert not report.realizable
    assert report.first_violation[1] == "off_level_set"


def test_bitflip_steering_path_is_realizable(bit_flip):
    """Test that the designed bit-flip steering path preserves coherence and is realizable."""
    v0 = StateVector.bloch(0.5, 0.5, 0.70710678118654752)
    path = bitflip_steering_path(v0, gamma=1.0)
    report = check_realizability(path, bit_flip, f=coherence_property())
    assert report.realizable
    law = alpha2_steering(v0, bit_flip)
    np.testing.assert_allclose(report.c_values, law.rate(report.u_grid), rtol=1e-4)
    np.testing.assert_allclose(path(path.bounds[1])[:2], law.path(0.99)[:2], atol=1e-12)
    with pytest.raises(InvalidTrajectory):
        bitflip_steering_path(v0, gamma=1.0, u_end=1.0)


def test_scan_grid(dephasing):
    """Test the landscape grid on a coarse grid."""
    frame = scan_grid(coherence_property(), dephasing, StateVector.bloch(0.5, 0.0, 0.0), 5)
    assert list(frame.columns) == ["vx", "vy", "vz", "stable", "breakdown", "on_level_set", "reachability"]
    assert len(frame) == 33
    origin = frame[(frame.vx == 0) & (frame.vy == 0) & (frame.vz == 0)].iloc[0]
    assert origin.stable == 1
    assert origin.breakdown == 0
    edge = frame[(frame.vx == 1.0) & (frame.vy == 0) & (frame.vz == 0)].iloc[0]
    assert edge.stable == 0
    assert edge.breakdown == 1
    assert edge.on_level_set == 0
    reference = frame[(frame.vx == 0.5) & (frame.vy == 0) & (frame.vz == 0)].iloc[0]
    assert reference.on_level_set == 1
    assert (frame.reachability == "").all()
    with pytest.raises(ValueError):
        scan_grid(coherence_property(), dephasing, StateVector.bloch(0.5, 0.0, 0.0), 1)
