"""Tree representation of an SOC-representable convex set.

A hull is an immutable tree.  Leaves are convex sets described directly
(linear plus second-order cone constraints, or a list of vertices); inner
nodes take the convex hull of a union (:class:`Disjunction`), intersect
(:class:`Intersection`) or push forward through an affine map
(:class:`AffineImage`).  Every node lives in its own coordinate space of
dimension ``node.dim``; the affine maps on the way to the root carry it into
the original variables.
"""

from dataclasses import dataclass

import numpy as np

from .affine import AffineMap


class HullNode:
    """Base class; subclasses are frozen dataclasses."""

    note: str = ""

    @property
    def children(self):
        return ()


@dataclass(frozen=True)
class EmptySet(HullNode):
    dim: int
    note: str = ""


@dataclass(frozen=True)
class ConvexSocLeaf(HullNode):
    """``{v : G v <= h, E v = e, ||A v + b|| <= c @ v + d for each SOC}``.

    The polytope rows are always included so the set is compact.
    """

    dim: int
    G: np.ndarray
    h: np.ndarray
    E: np.ndarray = None
    e: np.ndarray = None
    socs: tuple = ()
    note: str = ""

    def __post_init__(self):
        G = np.asarray(self.G, dtype=float).reshape(-1, self.dim)
        E = np.zeros((0, self.dim)) if self.E is None else np.asarray(self.E, dtype=float).reshape(-1, self.dim)
        e = np.zeros(0) if self.e is None else np.asarray(self.e, dtype=float).reshape(-1)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "h", np.asarray(self.h, dtype=float).reshape(-1))
        object.__setattr__(self, "E", E)
        object.__setattr__(self, "e", e)
        object.__setattr__(self, "socs", tuple(self.socs))

    def contains(self, v, tol=1e-7):
        v = np.asarray(v, dtype=float)
        ok = np.all(self.G @ v <= self.h + tol) and np.all(np.abs(self.E @ v - self.e) <= tol)
        return bool(ok and all(s.violation(v) <= tol for s in self.socs))


@dataclass(frozen=True)
class VPolyLeaf(HullNode):
    """Convex hull of the rows of ``vertices``."""

    vertices: np.ndarray
    note: str = ""

    def __post_init__(self):
        V = np.asarray(self.vertices, dtype=float)
        object.__setattr__(self, "vertices", V.reshape(V.shape[0], -1) if V.ndim != 2 else V)

    @property
    def dim(self):
        return self.vertices.shape[1]


@dataclass(frozen=True)
class Disjunction(HullNode):
    """Closed convex hull of the union of the children."""

    parts: tuple
    note: str = ""

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple(self.parts))

    @property
    def dim(self):
        return self.parts[0].dim

    @property
    def children(self):
        return self.parts


@dataclass(frozen=True)
class Intersection(HullNode):
    parts: tuple
    note: str = ""

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple(self.parts))

    @property
    def dim(self):
        return self.parts[0].dim

    @property
    def children(self):
        return self.parts


@dataclass(frozen=True)
class AffineImage(HullNode):
    """``{L v + t : v in child}``."""

    map: AffineMap
    child: HullNode
    note: str = ""

    def __post_init__(self):
        if self.map.n_in != self.child.dim:
            raise ValueError(f"map expects dimension {self.map.n_in}, child has {self.child.dim}")

    @property
    def dim(self):
        return self.map.n_out

    @property
    def children(self):
        return (self.child,)


LEAF_TYPES = (ConvexSocLeaf, VPolyLeaf, EmptySet)


def is_empty(node):
    return isinstance(node, EmptySet)


def walk(node, path=()):
    """Yield ``(path, node)`` in depth-first pre-order; ``path`` is the child-index chain."""
    yield path, node
    for i, child in enumerate(node.children):
        yield from walk(child, path + (i,))


def leaves(node):
    return [n for _, n in walk(node) if isinstance(n, LEAF_TYPES)]


def count_leaves(node):
    return len(leaves(node))


def disjunction_depth(node):
    """Number of nested disjunction levels, counting a lone leaf as depth 1."""
    if isinstance(node, LEAF_TYPES):
        return 1
    inner = max(disjunction_depth(c) for c in node.children)
    return inner + 1 if isinstance(node, Disjunction) else inner


__all__ = [
    "HullNode",
    "EmptySet",
    "ConvexSocLeaf",
    "VPolyLeaf",
    "Disjunction",
    "Intersection",
    "AffineImage",
    "is_empty",
    "walk",
    "leaves",
    "count_leaves",
    "disjunction_depth",
]
