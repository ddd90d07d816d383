"""Longitudinal and circumferential co-registration of IVUS and OCT pullbacks."""

__version__ = "0.1.0"

from .config import EngineConfig
from .pipeline import RegistrationResult, register
from .pullback import Modality, Pullback, RawFrame, SideBranch, parse_pullback, validate

__all__ = [
    "EngineConfig", "Modality", "Pullback", "RawFrame", "RegistrationResult", "SideBranch",
    "parse_pullback", "register", "validate",
]
