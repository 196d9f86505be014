"""Combiners that preserve metric-like properties on product spaces.

The submodules are ``core`` (conditions, triplets, combiners), ``expr``
(the expression language), ``spaces`` (finite semimetric spaces),
``checkers`` (falsifiers and class reports), ``topsis`` and ``cli``.
"""

from .core import (
    M,
    TOL,
    U,
    Combiner,
    Kind,
    Mode,
    SemiTriangleCondition,
    Triplet1D,
    TripletND,
    is_triplet_1d,
    is_triplet_nd,
    parse_combiner,
    parse_condition,
    parse_conditions,
)
from .spaces import FiniteSemimetricSpace, min_relaxation, validate

__version__ = "0.1.0"

__all__ = [
    "Combiner",
    "FiniteSemimetricSpace",
    "Kind",
    "M",
    "Mode",
    "SemiTriangleCondition",
    "TOL",
    "Triplet1D",
    "TripletND",
    "U",
    "is_triplet_1d",
    "is_triplet_nd",
    "min_relaxation",
    "parse_combiner",
    "parse_condition",
    "parse_conditions",
    "validate",
]
