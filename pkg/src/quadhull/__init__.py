"""Convex hulls of a quadric surface intersected with a polytope.

Given ``S = {x : x'Qx + alpha'x = g, A x <= b}`` with a bounded polytope,
:func:`build_hull` returns an extended formulation of ``conv(S)`` built from
linear and second-order cone constraints; :func:`flatten` turns it into a
single conic program for optimization and membership tests, and
:mod:`quadhull.oracle` provides an independent brute-force check.
"""

from .config import DEFAULT, Config
from .corpus import load_instance, random_instance
from .errors import (
    BudgetExceeded,
    CapacityError,
    InfeasibleError,
    InternalInconsistency,
    InvalidInputError,
    QuadHullError,
    SolverError,
    UnboundedPolytopeError,
)
from .hullcore import build_hull, build_hull_report, classify
from .polytope import HPolytope
from .reduction import AffineMap, QuadInstance, canonicalize
from .socmodel import flatten, membership, optimize, support_per_leaf

__version__ = "0.1.0"

__all__ = [
    "AffineMap",
    "BudgetExceeded",
    "CapacityError",
    "Config",
    "DEFAULT",
    "HPolytope",
    "InfeasibleError",
    "InternalInconsistency",
    "InvalidInputError",
    "QuadHullError",
    "QuadInstance",
    "SolverError",
    "UnboundedPolytopeError",
    "build_hull",
    "build_hull_report",
    "canonicalize",
    "classify",
    "flatten",
    "load_instance",
    "membership",
    "optimize",
    "random_instance",
    "support_per_leaf",
]
