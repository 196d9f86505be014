"""Sampling-based and closed-form checks of combiner properties and classes."""

from .classify import (
    CLASS_NAMES,
    ClassificationReport,
    ClassSpec,
    check_lattice,
    classify,
    included,
    qsa_scaling,
    s_prime,
)
from .config import SearchConfig
from .falsify import RequiredK, condition_implies, estimate_required_K, falsify, required_k
from .functional import (
    BoundedRange,
    NotBounded,
    QSAEstimate,
    check_amenable,
    check_bounded_range,
    check_monotone,
    estimate_quasi_subadditive,
)
from .sampling import boundary_triplet, c_bounds, probe_triplets, sample_triplet, zero_triplet
from .verdicts import (
    GeneratorWitness,
    PairWitness,
    PointWitness,
    Status,
    TripletWitness,
    Verdict,
)

__all__ = [
    "BoundedRange",
    "CLASS_NAMES",
    "ClassSpec",
    "ClassificationReport",
    "GeneratorWitness",
    "NotBounded",
    "PairWitness",
    "PointWitness",
    "QSAEstimate",
    "RequiredK",
    "SearchConfig",
    "Status",
    "TripletWitness",
    "Verdict",
    "boundary_triplet",
    "c_bounds",
    "check_amenable",
    "check_bounded_range",
    "check_lattice",
    "check_monotone",
    "classify",
    "condition_implies",
    "estimate_quasi_subadditive",
    "estimate_required_K",
    "falsify",
    "included",
    "probe_triplets",
    "qsa_scaling",
    "required_k",
    "s_prime",
    "sample_triplet",
    "zero_triplet",
]
