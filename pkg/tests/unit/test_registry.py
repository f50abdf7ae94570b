"""Tests for the transition-feature registry."""

from threading import Thread

import numpy as np
import pytest

from phaseseg.exceptions import ValidationError
from phaseseg.registry import (
    apply,
    feature_fn,
    get,
    is_registered,
    list_feature_fns,
    unregister,
)


@pytest.fixture(autouse=True)
def clean_registry():
    """Save and restore the registry around each test."""
    from phaseseg.registry import _registry

    original = _registry.copy()
    yield
    _registry.clear()
    _registry.update(original)


def _block():
    states = np.arange(6.0).reshape(3, 2)
    interactions = np.array([[1.0, -1.0, 1.0], [2.0, 0.5, 1.0], [0.0, 0.0, 1.0]])
    return states, interactions


class TestFeatureFnDecorator:
    """Test the @feature_fn decorator."""

    def test_registers_function(self):
        """Test that @feature_fn registers a function under its name."""

        @feature_fn("test_features")
        def features(states, interactions, params):
            return interactions

        assert is_registered("test_features")
        assert get("test_features") is features
        assert features._feature_name == "test_features"

    def test_duplicate_name(self):
        @feature_fn("dup")
        def first(states, interactions, params):
            return interactions

        with pytest.raises(ValidationError, match="already registered"):

            @feature_fn("dup")
            def second(states, interactions, params):
                return interactions

    @pytest.mark.parametrize("name", ["", "   ", None])
    def test_invalid_name(self, name):
        with pytest.raises(ValidationError, match="non-empty"):
            feature_fn(name)


class TestLookup:
    """Test get, list and unregister."""

    def test_builtins_present(self):
        names = list_feature_fns()
        assert "identity" in names
        assert "relative_position" in names
        assert names == sorted(names)

    def test_get_missing(self):
        with pytest.raises(KeyError, match="not found"):
            get("no_such_features")

    def test_unregister(self):
        @feature_fn("temporary")
        def features(states, interactions, params):
            return interactions

        unregister("temporary")
        assert not is_registered("temporary")
        unregister("temporary")  # missing names are ignored

    def test_concurrent_registration(self):
        """Test that concurrent registrations of distinct names all land."""

        def register(k):
            feature_fn(f"threaded_{k}")(lambda s, a, p: a)

        threads = [Thread(target=register, args=(k,)) for k in range(20)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert all(is_registered(f"threaded_{k}") for k in range(20))


class TestApply:
    """Test the output contract checked by apply."""

    def test_identity(self):
        states, interactions = _block()
        np.testing.assert_array_equal(apply("identity", states, interactions, {}), interactions)

    def test_relative_position(self):
        states, interactions = _block()
        out = apply("relative_position", states, interactions, {"target": [1.0, 1.0]})
        np.testing.assert_array_equal(out[:, :2], states - 1.0)
        np.testing.assert_array_equal(out[:, 2], 1.0)

    def test_wrong_rows(self):
        feature_fn("short")(lambda s, a, p: a[:1])
        states, interactions = _block()
        with pytest.raises(ValidationError, match="shape"):
            apply("short", states, interactions, {})

    def test_non_finite(self):
        feature_fn("nan")(lambda s, a, p: np.full_like(a, np.nan))
        states, interactions = _block()
        with pytest.raises(ValidationError, match="non-finite"):
            apply("nan", states, interactions, {})

    def test_missing_bias_column(self):
        feature_fn("no_bias")(lambda s, a, p: s)
        states, interactions = _block()
        with pytest.raises(ValidationError, match="constant-one"):
            apply("no_bias", states, interactions, {})
