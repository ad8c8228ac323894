"""Weighted (v, w) extremal toric geometry: slopes, Futaki invariants, test configurations
and admissible P^1-bundle profiles, with exact rational and floating pipelines."""

from .errors import ComputationError, ValidationError, VWError
from .geometry import Polytope, box, interval, lattice_points, polytope_from_halfspaces, standard_simplex
from .invariants import PLConvex, futaki, relative_futaki, slope, solve_w_ext
from .weights import WeightExpr, parse_weight

__all__ = [
    "ComputationError", "ValidationError", "VWError",
    "Polytope", "box", "interval", "lattice_points", "polytope_from_halfspaces", "standard_simplex",
    "PLConvex", "futaki", "relative_futaki", "slope", "solve_w_ext",
    "WeightExpr", "parse_weight",
]

__version__ = "0.1.0"
