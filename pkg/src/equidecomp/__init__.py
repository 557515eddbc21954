"""Constructive equidecomposition engine on finite windows of torus lattice
actions: exact dyadic flows, toast layers, integer rounding and Voronoi
matching, with verification harnesses for every stage."""

from .errors import (BudgetExceededError, CompletionError, ConfigError,
                     CoverageAuditError, EquidecompError, FreenessError,
                     GateViolationError, ScheduleError, WindowTooSmallError)
from .fixedpoint import DEFAULT_BITS, TorusPoint, from_float, from_fraction
from .generators import GeneratorSet, sample_generators, is_window_free
from .regions import Box, Disk, Region, Strip, Union, Difference
from .window import Window, directions, canonical_directions, lex_compare, lex_key, neighborhood

__all__ = [
    "BudgetExceededError", "CompletionError", "ConfigError",
    "CoverageAuditError", "EquidecompError", "FreenessError",
    "GateViolationError", "ScheduleError", "WindowTooSmallError",
    "DEFAULT_BITS", "TorusPoint", "from_float", "from_fraction",
    "GeneratorSet", "sample_generators", "is_window_free",
    "Box", "Disk", "Region", "Strip", "Union", "Difference",
    "Window", "directions", "canonical_directions", "lex_compare", "lex_key",
    "neighborhood",
]

__version__ = "0.1.0"
