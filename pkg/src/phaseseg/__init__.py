"""phaseseg public API.

Segmentation of contact-rich demonstrations into phases with an
autoregressive hidden Markov model whose transitions depend on the measured
wrench, plus the tools around it.

Key Features:
- Exact forward-backward inference and an online phase filter
- EM learning with k-means initialisation and BIC order selection
- Pluggable transition-feature functions via entry points
- Quasi-static contact worlds and an impedance controller for synthetic
  demonstrations and closed-loop reproduction
"""

from importlib.metadata import PackageNotFoundError, version
from typing import Optional

__version__ = "0.1.0"

try:
    _installed_version = version("phaseseg")
    if _installed_version != __version__:
        __version__ = _installed_version
except PackageNotFoundError:
    pass

# Integrations (internal)
from . import integrations as _integrations

# Domain types
from .core import (
    Demonstration,
    FeatureFn,
    HmmModel,
    PhaseDynamics,
    PosteriorMarginals,
    TrajectoryPoint,
    TransitionWeights,
    ensure_valid,
    feature,
    validate_demo,
)

# Exceptions
from .exceptions import (
    ConfigError,
    DivergenceError,
    FitError,
    InstabilityError,
    NumericalError,
    PhaseSegError,
    SchemaError,
    ValidationError,
)

# Inference
from .inference import (
    ForwardState,
    emission_loglik,
    filter_init,
    filter_step,
    forward_backward,
    segmentation_accuracy,
    transition_matrix,
)

# Learning and selection
from .learning import EmConfig, EmReport, em_fit, kmeans_init, segment
from .selection import BicResult, SweepResult, bic_sweep, param_count

# Policy and configuration
from .policy import DEFAULT_POLICY, NumericPolicy
from .policy_context import get_policy, use_policy

# Registry
from .registry import feature_fn, is_registered, list_feature_fns


def load_plugins(group: Optional[str] = None) -> int:
    """Register feature functions from installed plugins; returns the count loaded."""
    return _integrations.load_plugins(group)


__all__ = [
    "BicResult",
    "ConfigError",
    "DEFAULT_POLICY",
    "Demonstration",
    "DivergenceError",
    "EmConfig",
    "EmReport",
    "FeatureFn",
    "FitError",
    "ForwardState",
    "HmmModel",
    "InstabilityError",
    "NumericPolicy",
    "NumericalError",
    "PhaseDynamics",
    "PhaseSegError",
    "PosteriorMarginals",
    "SchemaError",
    "SweepResult",
    "TrajectoryPoint",
    "TransitionWeights",
    "ValidationError",
    "__version__",
    "bic_sweep",
    "em_fit",
    "emission_loglik",
    "ensure_valid",
    "feature",
    "feature_fn",
    "filter_init",
    "filter_step",
    "forward_backward",
    "get_policy",
    "is_registered",
    "kmeans_init",
    "list_feature_fns",
    "load_plugins",
    "param_count",
    "segment",
    "segmentation_accuracy",
    "transition_matrix",
    "use_policy",
    "validate_demo",
]
