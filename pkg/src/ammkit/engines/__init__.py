"""Iteration engines and algorithm presets."""

from .base import AmmState, Engine, NodeProgram, Phase, check_dual_sum
from .damm import DammEngine
from .damm_sc import DammScEngine
from .damm_sq import DammSqEngine
from .presets import Preset, make_preset, preset_names, validate_preset
from .reference import ReferenceEngine, SplitProxEngine

__all__ = [
    "AmmState", "Engine", "NodeProgram", "Phase", "check_dual_sum", "DammEngine", "DammScEngine",
    "DammSqEngine", "ReferenceEngine", "SplitProxEngine", "Preset", "make_preset", "preset_names",
    "validate_preset",
]
