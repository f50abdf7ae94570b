"""Contact worlds, the impedance controller and closed-loop reproduction."""

from .compare import ComparisonReport, ModeReport, compare_feature_modes
from .controller import ControllerDefaults, ImpedanceStep, PhasePrimitive, impedance_step
from .generate import (
    DEFAULT_DT,
    LabeledDemo,
    ScriptSegment,
    default_script,
    default_start,
    free_script,
    generate_demo,
    hose_script,
    sample_from_model,
    valley_script,
)
from .primitives import extract_primitives, principal_direction
from .reproduce import DEFAULT_DWELL, ReproductionTrace, TraceStep, reproduce
from .world import Contact, ContactWorld, Scenario, WorldGeometry

__all__ = [
    "ComparisonReport",
    "Contact",
    "ContactWorld",
    "ControllerDefaults",
    "DEFAULT_DT",
    "DEFAULT_DWELL",
    "ImpedanceStep",
    "LabeledDemo",
    "ModeReport",
    "PhasePrimitive",
    "ReproductionTrace",
    "Scenario",
    "ScriptSegment",
    "TraceStep",
    "WorldGeometry",
    "compare_feature_modes",
    "default_script",
    "default_start",
    "extract_primitives",
    "free_script",
    "generate_demo",
    "hose_script",
    "impedance_step",
    "principal_direction",
    "reproduce",
    "sample_from_model",
    "valley_script",
]
