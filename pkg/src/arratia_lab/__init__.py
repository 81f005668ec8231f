"""Simulation and numerical laboratory for the Arratia flow and the shift
operators it induces on L2(R)."""

from arratia_lab.flow import (
    FlowConfig,
    FlowRealization,
    FreeWienerFamily,
    coalescence_cdf,
    simulate_flow,
    simulate_free_wieners,
    snapshot,
)
from arratia_lab.steps import (
    JumpMeasure,
    StepMap,
    dual_snapshot,
    growth_constant,
    pushforward_integral,
    stieltjes_integral,
)

__version__ = "0.1.0"

__all__ = [
    "FlowConfig",
    "FlowRealization",
    "FreeWienerFamily",
    "JumpMeasure",
    "StepMap",
    "coalescence_cdf",
    "dual_snapshot",
    "growth_constant",
    "pushforward_integral",
    "simulate_flow",
    "simulate_free_wieners",
    "snapshot",
    "stieltjes_integral",
]
