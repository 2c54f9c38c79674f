"""Convex hull of a quadric surface inside a polytope.

The construction follows an induction on dimension.  After reduction to
canonical form ``sum w^2 - sum x^2 + sum y = g`` (``g >= 0``) with ``z``
coordinates absent, each set is classified by its block sizes
``(n_qp, n_qm, n_l, n_o)``:

* In the *ruled* cases every point of ``S`` in the interior of ``P`` lies on
  a segment inside ``S`` (a free ``z`` direction, a trade-off between two
  linear coordinates, or a straight line through a one-sheet hyperboloid),
  so all extreme points of ``conv(S)`` lie on the boundary of ``P``.  The
  hull is the convex hull of the union of the hulls over the facets.
* In the *base* cases the hull is written down directly from two pieces: a
  convex SOC-representable part and a reverse-convex part whose hull is a
  polytope with vertices on the edges of ``P``; the hull of ``S`` is the
  intersection of the two hulls.

The result is a :mod:`quadhull.hullrep` tree in the instance's coordinates.
"""

import enum
import logging
from dataclasses import dataclass

import numpy as np

from . import conicsolve
from . import oracle
from .affine import AffineMap
from .config import DEFAULT
from .errors import BudgetExceeded, InfeasibleError, InternalInconsistency, InvalidInputError
from .hullrep import (
    AffineImage,
    ConvexSocLeaf,
    Disjunction,
    EmptySet,
    Intersection,
    VPolyLeaf,
    is_empty,
    leaves,
)
from .polytope import HPolytope, VPolytope, chebyshev_center, facets, is_empty as polytope_is_empty, lp, vertices_and_edges
from .reduction import QuadInstance, apply_map, canonicalize, drop_to_fulldim

log = logging.getLogger(__name__)


class CaseTag(str, enum.Enum):
    EMPTY = "Empty"
    BASE_POINT = "BasePoint"
    BASE_LINEAR = "BaseLinear"
    BASE_ONE_SIDED = "BaseOneSided"
    BASE_SINGLE_SQUARE = "BaseSingleSquare"
    RECURSE_FACETS = "RecurseFacets"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class Case:
    """A classification: the tag, the rule of the decision table that fired and its lemma."""

    tag: CaseTag
    rule: str
    lemma: str

    @property
    def is_base(self):
        return self.tag not in (CaseTag.EMPTY, CaseTag.RECURSE_FACETS)


LEMMAS = {
    "a": "empty polytope",
    "b": "constant equation",
    "c": "linear equation",
    "d": "absent-variable lemma",
    "e": "two-linear-variable lemma",
    "f": "mixed-square linear lemma",
    "g": "one-sided base lemma",
    "h": "single-square base lemma",
    "i": "ruled-surface lemma",
}


def classify_counts(n_qp, n_qm, n_l, n_o, g, p_empty=False):
    """Decision table on the block sizes of a canonical set (evaluated top-down)."""
    if min(n_qp, n_qm, n_l, n_o) < 0:
        raise InvalidInputError("block sizes must be nonnegative")
    if g < 0:
        raise InvalidInputError("canonical right-hand side must be nonnegative")

    def case(tag, rule):
        return Case(tag, rule, LEMMAS[rule])

    if p_empty:
        return case(CaseTag.EMPTY, "a")
    if n_qp == n_qm == n_l == 0:
        if g != 0:
            return case(CaseTag.EMPTY, "b")
        return case(CaseTag.BASE_POINT if n_o == 0 else CaseTag.BASE_LINEAR, "b")
    if n_qp == n_qm == 0 and n_l == 1:
        return case(CaseTag.BASE_LINEAR, "c")
    if n_o >= 1:
        return case(CaseTag.RECURSE_FACETS, "d")
    if n_l >= 2:
        return case(CaseTag.RECURSE_FACETS, "e")
    if n_l == 1 and n_qp >= 1 and n_qm >= 1:
        return case(CaseTag.RECURSE_FACETS, "f")
    if n_qp == 0 or n_qm == 0:
        return case(CaseTag.BASE_ONE_SIDED, "g")
    if n_qp == 1:
        return case(CaseTag.BASE_SINGLE_SQUARE, "h")
    return case(CaseTag.RECURSE_FACETS, "i")


def classify(c, config=DEFAULT):
    """Classify a :class:`~quadhull.reduction.CanonicalSet`."""
    return classify_counts(c.n_qp, c.n_qm, c.n_l, c.n_o, c.g, polytope_is_empty(c.P, config))


# --- emptiness ------------------------------------------------------------------


def leaf_is_empty(leaf, config=DEFAULT):
    """Phase-1 test for a :class:`ConvexSocLeaf`.

    Solves ``min t`` with every inequality and cone constraint relaxed by
    ``t`` (and ``t >= -1``); the leaf is empty when the problem is
    infeasible (inconsistent equalities) or ``t* > feas_tol``.
    """
    n = leaf.dim
    G = np.hstack([leaf.G, -np.ones((leaf.G.shape[0], 1))])
    G = np.vstack([G, np.r_[np.zeros(n), -1.0]])
    h = np.r_[leaf.h, 1.0]
    E = np.hstack([leaf.E, np.zeros((leaf.E.shape[0], 1))])
    socs = [conicsolve.Soc.make(np.hstack([s.A, np.zeros((s.A.shape[0], 1))]), s.b, np.r_[s.c, 1.0], s.d)
            for s in leaf.socs]
    prob = conicsolve.ConeProblem(c=np.r_[np.zeros(n), 1.0], G=G, h=h, E=E, e=leaf.e, socs=socs)
    sol = conicsolve.solve(prob, tol=config.solver_tol, max_iter=config.max_iter)
    if sol.status == conicsolve.Status.INFEASIBLE:
        return True
    if sol.status == conicsolve.Status.UNBOUNDED:
        raise InternalInconsistency("phase-1 problem unbounded; the leaf polytope is not bounded")
    if sol.status != conicsolve.Status.OPTIMAL:
        # fall back to the best iterate; a clearly negative value still certifies a point
        if sol.x is None:
            raise InternalInconsistency("phase-1 solve failed", {"status": sol.status})
    return float(sol.x[-1]) > config.feas_tol


# --- reverse-convex hulls -------------------------------------------------------


def reverse_convex_hull_via_edges(P, soc, config=DEFAULT, tol=1e-9):
    """Hull of ``{v in P : ||A v + b|| >= c'v + d}`` as a vertex list.

    Candidates are the vertices of ``P`` outside (or on) the cone constraint
    and the points where an edge of ``P`` crosses its boundary.  On a line
    the cone-feasible set is an interval, so each edge contributes at most
    two crossings.  Candidates inside the hull of the others are pruned.
    """
    VE = vertices_and_edges(P, config)
    V = VE.vertices
    if V.shape[0] == 0:
        return VPolytope(np.zeros((0, P.dim)))

    def gap(x):
        return np.linalg.norm(x @ soc.A.T + soc.b, axis=-1) - (x @ soc.c + soc.d)

    scale = 1.0 + np.max(np.abs(V))
    cand = [v for v in V if gap(v[None, :])[0] >= -tol * scale]
    for i, j in VE.edges:
        p, d = V[i], V[j] - V[i]
        u, ud = soc.A @ p + soc.b, soc.A @ d
        s0, sd = soc.c @ p + soc.d, soc.c @ d
        qa = ud @ ud - sd * sd
        qb = 2.0 * (u @ ud - s0 * sd)
        qc = u @ u - s0 * s0
        roots = []
        if abs(qa) > 1e-12 * (1.0 + abs(qb) + abs(qc)):
            disc = qb * qb - 4.0 * qa * qc
            if disc >= 0:
                sq = np.sqrt(disc)
                q = -0.5 * (qb + (sq if qb >= 0 else -sq))
                roots = [q / qa] + ([qc / q] if q != 0 else [])
        elif abs(qb) > 1e-12 * (1.0 + abs(qc)):
            roots = [-qc / qb]
        for t in roots:
            if -1e-12 <= t <= 1.0 + 1e-12 and s0 + t * sd >= -tol * scale:
                cand.append(p + min(max(t, 0.0), 1.0) * d)
    if not cand:
        return VPolytope(np.zeros((0, P.dim)))
    return VPolytope(extreme_points(np.array(cand), config))


def extreme_points(X, config=DEFAULT, tol=1e-9):
    """Rows of ``X`` that are not convex combinations of the other rows."""
    scale = 1.0 + float(np.max(np.abs(X)))
    pts = []
    for x in X:
        if not any(np.max(np.abs(x - q)) <= tol * scale for q in pts):
            pts.append(x)
    pts = np.array(pts)
    keep = list(range(len(pts)))
    for i in range(len(pts)):
        others = [j for j in keep if j != i]
        if not others:
            continue
        # feasibility: x_i = sum mu_j x_j, sum mu = 1, mu >= 0
        k = len(others)
        A_eq = np.vstack([pts[others].T, np.ones((1, k))])
        b_eq = np.r_[pts[i], 1.0]
        st, _, _ = lp(np.zeros(k), -np.eye(k), np.zeros(k), A_eq, b_eq, backend=config.lp_backend)
        if st == "optimal":
            keep.remove(i)
    return pts[keep]


# --- base builders -----------------------------------------------------------------


def _box_leaf(c, note):
    return ConvexSocLeaf(c.dim, c.P.A, c.P.b, note=note)


def base_linear(c, config=DEFAULT):
    """``y = g`` intersected with ``P`` (or all of ``P`` for the trivial equation)."""
    n = c.dim
    if c.n_l == 0:
        return _box_leaf(c, "constant equation: all of P")
    E = np.zeros((1, n))
    E[0, c.blocks()[2]] = 1.0
    leaf = ConvexSocLeaf(n, c.P.A, c.P.b, E, [c.g], note="linear equation: hyperplane of P")
    st, _, _ = lp(np.zeros(n), c.P.A, c.P.b, E, [c.g], backend=config.lp_backend)
    return leaf if st in ("optimal", "unbounded") else EmptySet(n)


def _origin_leaf(c, note):
    n = c.dim
    if np.all(c.P.b >= -1e-9):
        return VPolyLeaf(np.zeros((1, n)), note=note)
    return EmptySet(n)


def base_one_sided(c, config=DEFAULT):
    """Hull when only one sign of squares appears and at most one linear coordinate.

    Writing ``t = ((t+1)^2 - (t-1)^2) / 4`` turns ``sum w^2 = g - y`` into the
    cone constraint ``||(2w, g-y-1)|| <= g-y+1`` (convex part) and its
    reverse (reverse-convex part).  The mirror form with the ``x`` block is
    used when ``n_qp = 0``.
    """
    n = c.dim
    wb, xb, yb, _ = c.blocks()
    if c.n_o != 0 or c.n_l > 1 or (c.n_qp and c.n_qm):
        raise InvalidInputError(f"counts {c.counts} are not a one-sided base case")
    squares = wb if c.n_qm == 0 else xb
    k = squares.stop - squares.start
    if c.n_l == 0 and c.g == 0:
        return _origin_leaf(c, "one-sided base lemma: the origin")
    if c.n_l == 0 and c.n_qp == 0:
        # -sum x^2 = g > 0 has no solution
        return EmptySet(n)
    A = np.zeros((k + 1, n))
    A[np.arange(k), np.arange(squares.start, squares.stop)] = 2.0
    cy = np.zeros(n)
    if c.n_l:
        cy[yb.start] = 1.0
    if c.n_qm == 0:  # ||(2w, g - y - 1)|| <= g - y + 1
        A[k] = -cy
        soc = conicsolve.Soc.make(A, np.r_[np.zeros(k), c.g - 1.0], -cy, c.g + 1.0)
    else:  # ||(2x, y - g - 1)|| <= y - g + 1
        A[k] = cy
        soc = conicsolve.Soc.make(A, np.r_[np.zeros(k), -c.g - 1.0], cy, 1.0 - c.g)
    convex = ConvexSocLeaf(n, c.P.A, c.P.b, socs=[soc], note="one-sided base lemma: convex part")
    if leaf_is_empty(convex, config):
        return EmptySet(n)
    V = reverse_convex_hull_via_edges(c.P, soc, config)
    if V.empty:
        return EmptySet(n)
    rev = VPolyLeaf(V.vertices, note="one-sided base lemma: reverse-convex part")
    return Intersection([convex, rev], note="one-sided base lemma")


def base_single_square(c, config=DEFAULT):
    """Hull of ``w^2 - sum x^2 = g`` (one positive square, no linear or absent coordinates).

    ``S`` splits by the sign of ``w`` into ``w >= sqrt(g + |x|^2)`` pieces
    (convex) and ``|w| <= sqrt(g + |x|^2)`` pieces (reverse convex); the
    hull is the intersection of the hull of the convex pieces with the hull
    of the reverse-convex pieces.
    """
    n = c.dim
    if c.n_l or c.n_o or c.n_qp > 1:
        raise InvalidInputError(f"counts {c.counts} are not a single-square base case")
    if c.n_qp == 0:
        if c.g > 0:
            return EmptySet(n)
        return _origin_leaf(c, "single-square base lemma: the origin")
    k = c.n_qm
    rows = ([np.r_[0.0, np.zeros(k)]] if c.g > 0 else []) + [np.r_[0.0, e] for e in np.eye(k)]
    A = np.array(rows)
    b = np.r_[[np.sqrt(c.g)] if c.g > 0 else [], np.zeros(k)]
    convex, reverse = [], []
    for sign, label in ((1.0, "+"), (-1.0, "-")):
        cw = np.zeros(n)
        cw[0] = sign
        soc = conicsolve.Soc.make(A, b, cw, 0.0)
        Ps = c.P.with_rows(-cw, 0.0)  # sign * w >= 0
        if polytope_is_empty(Ps, config):
            continue
        leaf = ConvexSocLeaf(n, Ps.A, Ps.b, socs=[soc], note=f"single-square base lemma: convex part w{label}")
        if leaf_is_empty(leaf, config):
            continue
        V = reverse_convex_hull_via_edges(Ps, soc, config)
        if V.empty:
            continue
        convex.append(leaf)
        reverse.append(VPolyLeaf(V.vertices, note=f"single-square base lemma: reverse-convex part w{label}"))
    if not convex:
        return EmptySet(n)
    return Intersection(
        [Disjunction(convex, note="single-square base lemma: convex pieces"),
         Disjunction(reverse, note="single-square base lemma: reverse-convex pieces")],
        note="single-square base lemma",
    )


def univariate_leaf(c, config=DEFAULT):
    """Exact solution set of a one-dimensional canonical equation on an interval."""
    n_qp, n_qm, n_l, n_o = c.counts
    if n_qp:
        pts = [np.sqrt(c.g), -np.sqrt(c.g)] if c.g > 0 else [0.0]
    elif n_qm:
        pts = [0.0] if c.g == 0 else []
    elif n_l:
        pts = [c.g]
    else:
        if c.g != 0:
            return EmptySet(1)
        st, _, lo = lp([1.0], c.P.A, c.P.b, backend=config.lp_backend)
        st2, _, hi = lp([-1.0], c.P.A, c.P.b, backend=config.lp_backend)
        return VPolyLeaf(np.array([[lo], [-hi]]), note="univariate: whole interval")
    tol = 1e-9 * (1.0 + np.max(np.abs(c.P.b)))
    pts = [p for p in dict.fromkeys(pts) if np.all(c.P.A[:, 0] * p <= c.P.b + tol)]
    if not pts:
        return EmptySet(1)
    return VPolyLeaf(np.array(pts)[:, None], note="univariate: roots")


def disjunct_union(children, dim=None, note=""):
    """Convex hull of the union; empty children are dropped."""
    parts = [ch for ch in children if not is_empty(ch)]
    if not parts:
        if dim is None:
            dim = children[0].dim if children else 0
        return EmptySet(dim)
    return Disjunction(parts, note=note)


# --- facet restriction and the ruling witness -------------------------------------------


def facet_restrict(inst, P, i, config=DEFAULT):
    """Restrict ``inst`` to the facet ``P.A[i] x = P.b[i]`` of ``P``.

    The coordinate with the largest ``|P.A[i, j]|`` is solved for and
    substituted into the quadratic and every other row of ``P``.

    Returns
    -------
    child : QuadInstance
        Instance in the remaining ``n - 1`` coordinates.
    embedding : AffineMap
        ``x = embedding(u)`` maps child coordinates onto the facet.
    """
    a, f = P.A[i], P.b[i]
    n = a.shape[0]
    j0 = int(np.argmax(np.abs(a)))
    if abs(a[j0]) <= config.pivot_tol:
        raise InvalidInputError(f"row {i} is zero; not a facet")
    others = [j for j in range(n) if j != j0]
    E = np.zeros((n, n - 1))
    e = np.zeros(n)
    E[others, np.arange(n - 1)] = 1.0
    E[j0, :] = -a[others] / a[j0]
    e[j0] = f / a[j0]
    F = AffineMap(E, e)
    rest = P.without_row(i)
    Pc = HPolytope(rest.A @ E, rest.b - rest.A @ e).normalized(tol=1e-10)
    return inst.substitute(F, P=Pc), F


def ruled_line_witness(c, p, tol=1e-8):
    """Direction ``(u, v)`` of a line through ``p`` contained in the canonical surface.

    For ``sum w^2 - sum x^2 = g`` with at least two positive squares, take
    ``v = e_1`` and ``u`` a unit vector with ``a'u = b_1`` where
    ``p = (a, b)``; then ``|u| = |v|`` and ``a'u = b'v`` make the quadratic
    constant along ``p + t (u, v)``.  At the origin with ``g = 0`` the pair
    of first axes is returned.

    Returns
    -------
    u, v : ndarray
        Components of the direction in the ``w`` and ``x`` blocks.
    """
    if c.n_l or c.n_o or c.n_qp < 2 or c.n_qm < 1:
        raise InvalidInputError(f"counts {c.counts} do not describe a ruled quadric")
    p = np.asarray(p, dtype=float)
    if abs(c.residual(p)) > tol * (1.0 + abs(c.g)):
        raise InvalidInputError(f"point is off the surface (residual {c.residual(p):.3g})")
    a, b = p[: c.n_qp], p[c.n_qp:]
    v = np.zeros(c.n_qm)
    v[0] = 1.0
    na2 = float(a @ a)
    if na2 <= tol * tol:
        u = np.zeros(c.n_qp)
        u[0] = 1.0
        return u, v
    ratio = b[0] / na2
    j = int(np.argmin(np.abs(a)))
    q = np.zeros(c.n_qp)
    q[j] = 1.0
    q -= (q @ a) / na2 * a
    q /= np.linalg.norm(q)
    u = ratio * a + np.sqrt(max(0.0, 1.0 - ratio * ratio * na2)) * q
    return u, v


# --- the recursion -------------------------------------------------------------


@dataclass
class BuildReport:
    hull: object
    trace: list
    leaves: int
    nodes: int


class _Duplicate:
    """Marker for a face already built elsewhere in the recursion."""


DUPLICATE = _Duplicate()


class _Builder:
    def __init__(self, root, config):
        self.config = config
        self.trace = []
        self.leaves = 0
        self.nodes = 0
        self.root_P = root.P.normalized()
        self.max_depth = config.max_depth if config.max_depth is not None else root.n
        self.seen_faces = set()

    def line(self, depth, text):
        self.trace.append("  " * depth + text)

    def count_leaves(self, node):
        self.leaves += len([x for x in leaves(node) if not is_empty(x)])
        if self.leaves > self.config.max_leaves:
            raise BudgetExceeded(f"leaf budget {self.config.max_leaves} exceeded")

    def face_key(self, inst, to_root):
        x, _ = chebyshev_center(inst.P, self.config)
        xr = to_root(x)
        slack = self.root_P.b - self.root_P.A @ xr
        return frozenset(np.flatnonzero(slack <= 1e-7 * (1.0 + np.abs(self.root_P.b))).tolist())

    def build(self, inst, depth, to_root):
        if depth > self.max_depth:
            raise BudgetExceeded(f"recursion depth {depth} exceeds {self.max_depth}")
        self.nodes += 1
        n0 = inst.n
        reduced, emb = drop_to_fulldim(inst, self.config)
        if reduced.n != n0:
            self.line(depth, f"affine hull: dimension {n0} -> {reduced.n}")
        to_root = to_root.compose(emb)
        if depth > 0 and self.config.dedup_faces and reduced.n > 0:
            key = self.face_key(reduced, to_root)
            if key in self.seen_faces:
                self.line(depth, f"dim {reduced.n} duplicate face, skipped")
                return DUPLICATE
            self.seen_faces.add(key)
        if reduced.n == 0:
            ok = abs(reduced.g) <= self.config.g_snap * (1.0 + abs(inst.data_norm()))
            tag = CaseTag.BASE_POINT if ok else CaseTag.EMPTY
            self.line(depth, f"dim 0 (0,0,0,0) {tag} {LEMMAS['b']}")
            node = VPolyLeaf(np.zeros((1, 0)), note="point") if ok else EmptySet(0)
            self.count_leaves(node)
            return apply_map(emb, node)
        c = canonicalize(reduced, self.config)
        case = classify(c, self.config)
        self.line(depth, f"dim {c.dim} ({c.n_qp},{c.n_qm},{c.n_l},{c.n_o}) {case.tag} {case.lemma}")
        for msg in c.log:
            log.debug("%s", msg)
        if case.tag == CaseTag.EMPTY:
            node = EmptySet(c.dim)
        elif c.dim == 1:
            node = univariate_leaf(c, self.config)
        elif case.tag == CaseTag.BASE_POINT:
            node = _origin_leaf(c, "constant equation: point")
        elif case.tag == CaseTag.BASE_LINEAR:
            node = base_linear(c, self.config)
        elif case.tag == CaseTag.BASE_ONE_SIDED:
            node = base_one_sided(c, self.config)
        elif case.tag == CaseTag.BASE_SINGLE_SQUARE:
            node = base_single_square(c, self.config)
        else:
            node = self.recurse(c, depth, to_root.compose(c.to_original))
            if node is DUPLICATE:
                return DUPLICATE
        if case.tag != CaseTag.RECURSE_FACETS:
            self.count_leaves(node)
        if is_empty(node):
            self.cross_check(c, depth)
            return EmptySet(n0)
        return apply_map(emb, apply_map(c.to_original, node))

    def recurse(self, c, depth, to_root):
        F = facets(c.P, self.config)
        inst = c.as_instance()
        children = []
        skipped = 0
        for i in range(F.m):
            child_inst, emb = facet_restrict(inst, F, i, self.config)
            child = self.build(child_inst, depth + 1, to_root.compose(emb))
            if child is DUPLICATE:
                skipped += 1
                continue
            if not is_empty(child):
                children.append(AffineImage(emb, child, note=f"facet {i}"))
        if not children and skipped:
            return DUPLICATE
        return disjunct_union(children, c.dim, note=f"facets of a {c.dim}-dimensional face")

    def cross_check(self, c, depth):
        if not self.config.cross_check_empty:
            return
        sample = oracle.sample_surface(c.as_instance(), density=16, seed=0)
        if not sample.empty:
            raise InternalInconsistency(
                "construction declared a set empty but the sampling oracle found points on it",
                {"counts": c.counts, "g": c.g, "depth": depth, "points": sample.points[:5].tolist()},
            )


def build_hull_report(inst, config=DEFAULT):
    """Build the hull and return it with the classification trace and counters."""
    b = _Builder(inst, config)
    hull = b.build(inst, 0, AffineMap.identity(inst.n))
    if is_empty(hull):
        raise InfeasibleError("the quadric does not meet the polytope (S is empty)")
    return BuildReport(hull, b.trace, b.leaves, b.nodes)


def build_hull(inst, config=DEFAULT):
    """SOC-representable description of ``conv(S)`` as a hull tree.

    Raises
    ------
    InfeasibleError
        When ``S`` is empty.
    BudgetExceeded
        When the leaf budget or depth limit is exceeded.
    """
    return build_hull_report(inst, config).hull
