"""Tests for qpp.core.types module."""

import math

import pytest
from pydantic import ValidationError

from qpp.core.types import BreakdownPrediction, IntegratorConfig, RunSummary, SynthesisPolicy


class TestSynthesisPolicy:
    """Tests for SynthesisPolicy model."""

    def test_defaults(self):
        """Test the default policy."""
        policy = SynthesisPolicy()
        assert policy.mode == "minimal_alpha3"
        assert policy.h_max is None

    def test_invalid_mode(self):
        """Test that unknown modes are rejected."""
        with pytest.raises(ValidationError):
            SynthesisPolicy(mode="greedy")

    def test_invalid_cap(self):
        """Test that the control cap must be positive and finite."""
        with pytest.raises(ValidationError):
            SynthesisPolicy(h_max=0.0)
        with pytest.raises(ValidationError):
            SynthesisPolicy(h_max=math.inf)


class TestIntegratorConfig:
    """Tests for IntegratorConfig model."""

    def test_defaults(self):
        """Test the integrator defaults."""
        cfg = IntegratorConfig()
        assert cfg.rtol == 1e-10
        assert cfg.atol == 1e-12
        assert cfg.method == "DOP853"
        assert cfg.resolved_event_tol == pytest.approx(1e-9 * cfg.t_max)

    def test_event_tol_override(self):
        """Test an explicit event tolerance."""
        assert IntegratorConfig(event_tol=1e-6).resolved_event_tol == 1e-6

    def test_extra_fields_forbidden(self):
        """Test that unknown fields are rejected."""
        with pytest.raises(ValidationError):
            IntegratorConfig(steps=10)

    def test_string_values_are_coerced(self):
        """Test that scenario strings validate as numbers."""
        cfg = IntegratorConfig.model_validate({"t_max": "2.5", "method": "RK45"})
        assert cfg.t_max == 2.5
        assert cfg.method == "RK45"


class TestBreakdownPrediction:
    """Tests for BreakdownPrediction model."""

    def test_finite(self):
        """Test a finite prediction."""
        prediction = BreakdownPrediction(reachability="finite_breakdown", t_b=0.25, formula_id="dephasing_coherence")
        assert prediction.is_finite
        assert prediction.label is None
        assert prediction.inputs == {}

    def test_stable(self):
        """Test a stable prediction without a breakdown time."""
        prediction = BreakdownPrediction(reachability="stable_reachable", formula_id="relaxation_region")
        assert not prediction.is_finite

    @pytest.mark.parametrize(
        "reachability, t_b",
        [("finite_breakdown", None), ("stable_reachable", 1.0), ("finite_breakdown", math.inf), ("finite_breakdown", -1.0)],
    )
    def test_invalid(self, reachability, t_b):
        """Test that t_b is set iff the breakdown is finite."""
        with pytest.raises(ValidationError):
            BreakdownPrediction(reachability=reachability, t_b=t_b, formula_id="x")


class TestRunSummary:
    """Tests for RunSummary model."""

    def test_relative_gap(self):
        """Test that the relative gap is derived from both breakdown times."""
        summary = RunSummary(
            termination="breakdown",
            t_end=0.25,
            t_b_simulated=0.2501,
            t_b_analytic=0.25,
            max_f_drift=1e-9,
            final_state=[0.5, 0.5, 0.0],
            samples=10,
            wall_time=0.1,
        )
        assert summary.relative_gap == pytest.approx(4e-4)

    def test_to_records(self):
        """Test the key=value record format."""
        summary = RunSummary(
            termination="horizon",
            t_end=2.0,
            max_f_drift=0.0,
            final_state=[0.5, 0.25, 0.0],
            samples=3,
            wall_time=0.5,
        )
        text = summary.to_records()
        assert text.endswith("\n")
        lines = text.splitlines()
        assert lines[0] == "termination=horizon"
        assert "t_end=2" in lines
        assert "final_state=0.5,0.25,0" in lines
        assert "samples=3" in lines
        assert not any(line.startswith("t_b_simulated=") for line in lines)
