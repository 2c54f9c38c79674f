"""Polytopes in inequality (H) and vertex (V) form.

LPs go through :func:`lp`, which dispatches either to HiGHS via
``scipy.optimize.linprog`` or to the in-house interior-point solver.
"""

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from . import conicsolve
from .affine import AffineMap
from .config import DEFAULT
from .densela import row_reduce
from .errors import (
    CapacityError,
    InfeasibleError,
    InternalInconsistency,
    InvalidInputError,
    UnboundedPolytopeError,
)


@dataclass(frozen=True)
class HPolytope:
    """``{x : A x <= b}``."""

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        b = np.asarray(self.b, dtype=float).reshape(-1)
        if A.ndim != 2:
            A = A.reshape(b.shape[0], -1)
        if A.shape[0] != b.shape[0]:
            raise InvalidInputError(f"A has {A.shape[0]} rows but b has {b.shape[0]}")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise InvalidInputError("polytope data has non-finite entries")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def dim(self):
        return self.A.shape[1]

    @property
    def m(self):
        return self.A.shape[0]

    def slack(self, x):
        x = np.asarray(x, dtype=float)
        return self.b - x @ self.A.T if x.ndim == 2 else self.b - self.A @ x

    def contains(self, x, tol=1e-9):
        s = self.slack(x)
        return np.all(s >= -tol, axis=-1)

    def normalized(self, tol=1e-12):
        """Rows scaled to unit norm; all-zero rows dropped (or flagged infeasible)."""
        norms = np.linalg.norm(self.A, axis=1)
        keep = norms > tol
        if np.any(self.b[~keep] < -tol):
            raise InfeasibleError("a zero row has a negative right-hand side")
        return HPolytope(self.A[keep] / norms[keep, None], self.b[keep] / norms[keep])

    def map_preimage(self, F):
        """``{u : F(u) in P}`` for an affine map ``F``."""
        return HPolytope(self.A @ F.L, self.b - self.A @ F.t)

    def with_rows(self, A, b):
        return HPolytope(np.vstack([self.A, np.atleast_2d(A)]), np.concatenate([self.b, np.atleast_1d(b)]))

    def without_row(self, i):
        keep = np.arange(self.m) != i
        return HPolytope(self.A[keep], self.b[keep])


@dataclass(frozen=True)
class VPolytope:
    vertices: np.ndarray
    edges: tuple = field(default=())

    @property
    def empty(self):
        return self.vertices.shape[0] == 0


# --- linear programming ------------------------------------------------------


def lp(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, backend=None):
    """Minimize ``c @ x``; returns ``(status, x, value)`` with status in
    ``{"optimal", "infeasible", "unbounded", "error"}``."""
    backend = backend or DEFAULT.lp_backend
    c = np.asarray(c, dtype=float)
    if backend == "highs":
        res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=(None, None), method="highs")
        status = {0: "optimal", 2: "infeasible", 3: "unbounded"}.get(res.status, "error")
        return status, (res.x if res.x is not None else None), (res.fun if status == "optimal" else None)
    if backend == "conic":
        sol = conicsolve.solve(conicsolve.ConeProblem(c=c, G=A_ub, h=b_ub, E=A_eq, e=b_eq))
        status = {
            conicsolve.Status.OPTIMAL: "optimal",
            conicsolve.Status.INFEASIBLE: "infeasible",
            conicsolve.Status.UNBOUNDED: "unbounded",
        }.get(sol.status, "error")
        return status, (sol.x if status == "optimal" else None), (sol.objective if status == "optimal" else None)
    raise InvalidInputError(f"unknown LP backend {backend!r}")


def _check(status, what):
    if status == "infeasible":
        raise InfeasibleError(f"{what}: polytope is empty")
    if status == "unbounded":
        raise UnboundedPolytopeError(f"{what}: polytope is unbounded")
    if status != "optimal":
        raise InternalInconsistency(f"{what}: LP failed")


def bounding_box(P, config=DEFAULT):
    """Per-coordinate ``(lo, hi)`` from ``2 n`` LPs."""
    n = P.dim
    lo, hi = np.empty(n), np.empty(n)
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        st, _, v = lp(e, P.A, P.b, backend=config.lp_backend)
        _check(st, "bounding box")
        lo[i] = v
        st, _, v = lp(-e, P.A, P.b, backend=config.lp_backend)
        _check(st, "bounding box")
        hi[i] = -v
    return lo, hi


def is_bounded(P, config=DEFAULT):
    """True iff ``P`` is bounded; raises :class:`InfeasibleError` when empty."""
    try:
        bounding_box(P, config)
    except UnboundedPolytopeError:
        return False
    return True


def is_empty(P, config=DEFAULT):
    st, _, _ = lp(np.zeros(P.dim), P.A, P.b, backend=config.lp_backend)
    if st == "unbounded":
        return False
    return st != "optimal"


def chebyshev_center(P, config=DEFAULT, cap=1e6):
    """Center and radius of the largest inscribed ball (radius capped at ``cap``).

    The radius is a free LP variable, so a negative optimum certifies that
    ``P`` is empty; that case raises :class:`InfeasibleError`.
    """
    n = P.dim
    norms = np.linalg.norm(P.A, axis=1)
    A = np.hstack([P.A, norms[:, None]])
    A = np.vstack([A, np.r_[np.zeros(n), 1.0]])
    b = np.r_[P.b, cap]
    c = np.r_[np.zeros(n), -1.0]
    st, x, _ = lp(c, A, b, backend=config.lp_backend)
    if st == "infeasible":
        raise InfeasibleError("polytope is empty")
    if st != "optimal":
        raise InternalInconsistency("Chebyshev LP failed")
    if x[n] < -config.slack_tol:
        raise InfeasibleError("polytope is empty")
    return x[:n], float(x[n])


def interior_point(P, config=DEFAULT):
    """A point with slack at least the Chebyshev radius ``r* > tol`` on every row."""
    x, r = chebyshev_center(P, config)
    if r <= config.slack_tol:
        raise InternalInconsistency(f"polytope is not full-dimensional (radius {r:.3g})", {"center": x})
    return x, r


@dataclass(frozen=True)
class AffineHull:
    """Implicit equalities ``M x = f`` and the full-dimensional reduction."""

    M: np.ndarray
    f: np.ndarray
    reduced: HPolytope
    embedding: AffineMap

    @property
    def dim(self):
        return self.embedding.n_in


def affine_hull(P, config=DEFAULT):
    """Detect implicit equalities and re-coordinatize ``P`` on its affine hull.

    A row is an implicit equality when its slack maximum over ``P`` is at
    most ``config.slack_tol``; each such decision is one LP.
    """
    P = P.normalized()
    n = P.dim
    embedding = AffineMap.identity(n)
    current = P
    while True:
        _, r = chebyshev_center(current, config)
        if r > config.slack_tol or current.dim == 0:
            break
        eq = []
        for i in range(current.m):
            st, _, v = lp(current.A[i], current.A, current.b, backend=config.lp_backend)
            _check(st, "affine hull")
            if current.b[i] - v <= config.slack_tol:
                eq.append(i)
        if not eq:
            # thin but full-dimensional; nothing to remove
            break
        M, f = current.A[eq], current.b[eq]
        red = row_reduce(M, f, tol=config.pivot_tol, consistency_tol=1e3 * config.slack_tol)
        E, e = red.embed()
        step = AffineMap(E, e)
        rest = [i for i in range(current.m) if i not in eq]
        A2 = current.A[rest] @ E
        b2 = current.b[rest] - current.A[rest] @ e
        embedding = embedding.compose(step)
        if E.shape[1] == 0:
            if np.any(b2 < -1e3 * config.slack_tol):
                raise InfeasibleError("affine hull reduction left an inconsistent point")
            current = HPolytope(np.zeros((0, 0)), np.zeros(0))
            break
        current = HPolytope(A2, b2).normalized(tol=1e-9)
        if current.m == 0:
            raise UnboundedPolytopeError("reduced polytope has no inequalities")
    # Equalities over the original coordinates: the rows annihilated by the embedding.
    eq_rows = [i for i in range(P.m) if np.linalg.norm(P.A[i] @ embedding.L) <= 1e-9]
    M = P.A[eq_rows] if eq_rows else np.zeros((0, n))
    f = P.b[eq_rows] if eq_rows else np.zeros(0)
    return AffineHull(M, f, current, embedding)


def irredundant_rows(P, config=DEFAULT):
    """Indices of the rows of a full-dimensional ``P`` that define facets.

    Rows are tested in index order; a row is dropped when maximizing it over
    the remaining kept rows cannot exceed its right-hand side.
    """
    Pn = P.normalized()
    norms = np.linalg.norm(P.A, axis=1)
    index = np.flatnonzero(norms > 1e-12)
    keep = list(range(Pn.m))
    for i in range(Pn.m):
        others = [j for j in keep if j != i]
        A = np.vstack([Pn.A[others], Pn.A[i]])
        b = np.r_[Pn.b[others], Pn.b[i] + 1.0]
        st, _, v = lp(-Pn.A[i], A, b, backend=config.lp_backend)
        _check(st, "facets")
        if -v <= Pn.b[i] + config.slack_tol:
            keep.remove(i)
    return [int(index[i]) for i in keep]


def facets(P, config=DEFAULT):
    """Irredundant (normalized) inequality description of a full-dimensional ``P``."""
    rows = irredundant_rows(P, config)
    return HPolytope(P.A[rows], P.b[rows]).normalized()


# --- vertex enumeration -------------------------------------------------------


def _initial_basis(R, tol):
    chosen = []
    for i in range(R.shape[0]):
        trial = chosen + [i]
        if np.linalg.matrix_rank(R[trial], tol=tol) == len(trial):
            chosen = trial
        if len(chosen) == R.shape[1]:
            break
    return chosen


def _double_description(R, eps=1e-10):
    """Extreme rays of the pointed cone ``{r : R r <= 0}``.

    Constraints are inserted in row order after an initial simplicial cone
    built from the first linearly independent rows.
    """
    m, d = R.shape
    basis = _initial_basis(R, 1e-10)
    if len(basis) < d:
        raise InternalInconsistency("cone is not pointed; polytope unbounded?")
    K = R[basis]
    rays = -np.linalg.inv(K).T  # row j is -K^{-1} e_j
    rays /= np.linalg.norm(rays, axis=1, keepdims=True)
    processed = list(basis)
    zero = np.ones((d, d), dtype=bool)
    np.fill_diagonal(zero, False)  # ray j is tight on every basis row except j
    for i in range(m):
        if i in basis:
            continue
        a = R[i]
        v = rays @ a
        pos = np.flatnonzero(v > eps)
        neg = np.flatnonzero(v < -eps)
        zer = np.flatnonzero(np.abs(v) <= eps)
        new_rays, new_zero = [], []
        for p in pos:
            for q in neg:
                Z = zero[p] & zero[q]
                if Z.sum() < d - 2:
                    continue
                # combinatorial adjacency: no third ray is tight on all of Z
                cover = np.all(zero[:, Z], axis=1)
                cover[p] = cover[q] = False
                if np.any(cover):
                    continue
                r = v[p] * rays[q] - v[q] * rays[p]
                nr = np.linalg.norm(r)
                if nr <= 1e-14:
                    continue
                new_rays.append(r / nr)
                new_zero.append(np.r_[Z, True])
        keep = np.r_[neg, zer].astype(int)
        keep.sort()
        tight_col = np.zeros(len(rays), dtype=bool)
        tight_col[zer] = True
        zero = np.hstack([zero, tight_col[:, None]])[keep]
        rays = rays[keep]
        if new_rays:
            rays = np.vstack([rays, np.array(new_rays)])
            zero = np.vstack([zero, np.array(new_zero)])
        processed.append(i)
    return rays


def _dedup(points, tol):
    out = []
    for p in points:
        if not any(np.max(np.abs(p - q)) <= tol for q in out):
            out.append(p)
    return np.array(out).reshape(len(out), points.shape[1] if points.ndim == 2 else 0)


def vertices_and_edges(P, config=DEFAULT, active_tol=1e-9):
    """Exact vertex set (double description) and 1-skeleton of a bounded ``P``."""
    n = P.dim
    if n > config.dim_cap:
        raise CapacityError(f"dimension {n} exceeds the vertex-enumeration cap {config.dim_cap}; "
                            "lower the instance size or raise dim_cap")
    Pn = P.normalized()
    if n == 0:
        ok = np.all(Pn.b >= -active_tol)
        return VPolytope(np.zeros((1 if ok else 0, 0)), ())
    R = np.hstack([Pn.A, -Pn.b[:, None]])
    R = np.vstack([np.r_[np.zeros(n), -1.0], R])
    rays = _double_description(R)
    t = rays[:, n]
    pts = rays[t > 1e-9, :n] / t[t > 1e-9, None]
    if pts.shape[0]:
        scale = max(1.0, float(np.max(np.abs(pts))))
        pts = pts[Pn.contains(pts, 1e-7 * scale)]
        pts = _dedup(pts, 1e-9 * scale)
        order = np.lexsort(pts.T[::-1])
        pts = pts[order]
    else:
        pts = np.zeros((0, n))
    return VPolytope(pts, _edges(Pn, pts, active_tol))


def _edges(P, pts, active_tol):
    n = P.dim
    if pts.shape[0] < 2:
        return ()
    scale = max(1.0, float(np.max(np.abs(pts))))
    active = np.abs(P.slack(pts)) <= active_tol * scale * 10
    edges = []
    for i, j in itertools.combinations(range(pts.shape[0]), 2):
        common = active[i] & active[j]
        if common.sum() < n - 1:
            continue
        if np.linalg.matrix_rank(P.A[common], tol=1e-8) == n - 1:
            edges.append((i, j))
    return tuple(edges)


def brute_force_vertices(P, tol=1e-9):
    """All basic feasible points, by solving every n-subset of rows."""
    n = P.dim
    Pn = P.normalized()
    pts = []
    for rows in itertools.combinations(range(Pn.m), n):
        A = Pn.A[list(rows)]
        if abs(np.linalg.det(A)) < 1e-12:
            continue
        x = np.linalg.solve(A, Pn.b[list(rows)])
        if np.all(Pn.slack(x) >= -tol):
            pts.append(x)
    if not pts:
        return np.zeros((0, n))
    return _dedup(np.array(pts), 1e-8)
