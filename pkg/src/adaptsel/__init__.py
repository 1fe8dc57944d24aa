"""Adaptive selection-technique engine.

Scores pointing techniques (RayCasting, StickyRay, RayCursor) against speed,
accuracy, comfort and familiarity for every selectable target near the
pointing axis, and switches to the best technique under a hysteresis rule.
"""

from .adapter import (
    AdapterConfig,
    AdapterState,
    FrameDecision,
    application_preset,
    step,
    study_preset,
)
from .scene import ArmModel, ContextFrame, PointerState, Scene, Target, extract_context
from .techniques import TECHNIQUES, TechniqueState, highlight, regions_for

__all__ = [
    "AdapterConfig",
    "AdapterState",
    "ArmModel",
    "ContextFrame",
    "FrameDecision",
    "PointerState",
    "Scene",
    "TECHNIQUES",
    "Target",
    "TechniqueState",
    "application_preset",
    "extract_context",
    "highlight",
    "regions_for",
    "step",
    "study_preset",
]

__version__ = "0.1.0"
