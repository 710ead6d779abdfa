"""SMT-LIB2 emission, solver backends, and deferred-theorem export."""

from .emit import script_for, obligation_logic
from .drive import (
    BACKENDS,
    SolverConfig,
    Verdict,
    available_backends,
    discharge,
    discharge_all,
    parse_model,
)
from .export import export_deferred

__all__ = [
    "BACKENDS",
    "SolverConfig",
    "Verdict",
    "available_backends",
    "discharge",
    "discharge_all",
    "export_deferred",
    "obligation_logic",
    "parse_model",
    "script_for",
]
