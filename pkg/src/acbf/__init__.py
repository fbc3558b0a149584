"""Adaptive control-barrier-function controllers with closed-form safe inputs,
data-driven bound tightening and a closed-loop simulator."""

from .controller import (
    AdaptiveCBFController,
    AdaptiveState,
    ControllerModel,
    GainConfig,
    GeneralAdaptiveCBFController,
    NominalSelection,
    compute_bound_constants,
)
from .model import Barrier, ConfigurationError, UncertainSystem, UncertaintyPrior, UncertaintyTruth
from .nlp import Branch, closed_form_solve
from .scenarios import PRESETS, load_scenario
from .sim import SimConfig, run_closed_loop

__all__ = [
    "AdaptiveCBFController", "AdaptiveState", "Barrier", "Branch", "ConfigurationError", "ControllerModel",
    "GainConfig", "GeneralAdaptiveCBFController", "NominalSelection", "PRESETS", "SimConfig",
    "UncertainSystem", "UncertaintyPrior", "UncertaintyTruth", "closed_form_solve",
    "compute_bound_constants", "load_scenario", "run_closed_loop",
]
