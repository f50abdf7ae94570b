import numpy as np
import pytest

from phaseseg.core import PhaseDynamics
from phaseseg.exceptions import ValidationError
from phaseseg.policy import DEFAULT_POLICY, NumericPolicy
from phaseseg.policy_context import get_active_policy, get_policy, use_policy


class TestGetPolicy:
    """Test get_policy and get_active_policy."""

    def test_none_without_context(self):
        assert get_policy() is None

    def test_active_falls_back_to_default(self):
        assert get_active_policy() is DEFAULT_POLICY

    def test_context_value(self):
        custom = NumericPolicy(sigma_floor=1e-6)
        with use_policy(custom):
            assert get_policy() is custom
            assert get_active_policy().sigma_floor == 1e-6
        assert get_policy() is None


class TestUsePolicy:
    """Test the use_policy context manager."""

    def test_nested(self):
        outer = NumericPolicy(min_phase_mass=5.0)
        inner = NumericPolicy(min_phase_mass=1.0)
        with use_policy(outer):
            with use_policy(inner):
                assert get_active_policy().min_phase_mass == 1.0
            assert get_active_policy().min_phase_mass == 5.0

    def test_restored_after_exception(self):
        with pytest.raises(RuntimeError):
            with use_policy(NumericPolicy(min_phase_mass=2.0)):
                raise RuntimeError("boom")
        assert get_policy() is None

    def test_sigma_floor_reaches_validation(self):
        """Test that PhaseDynamics checks Sigma against the ambient floor."""
        sigma = 1e-7 * np.eye(2)
        PhaseDynamics(np.eye(2), np.zeros((2, 1)), sigma)
        with use_policy(NumericPolicy(sigma_floor=1e-6)):
            with pytest.raises(ValidationError, match="positive definite"):
                PhaseDynamics(np.eye(2), np.zeros((2, 1)), sigma)
