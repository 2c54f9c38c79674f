"""Flattened second-order cone programs built from hull trees.

:func:`flatten` turns a :mod:`quadhull.hullrep` tree into one conic
program over the original variables plus auxiliary copies.  A disjunction
``conv(K_1 u ... u K_m)`` of compact convex sets uses the perspective
construction: fresh copies ``z_i`` and weights ``lam_i >= 0`` with
``x = sum z_i``, ``sum lam_i = s`` and ``z_i in lam_i K_i``, where ``s`` is
the scale of the enclosing node (1 at the root).  Constraints of a leaf are
homogenized by that scale, which is exact because every leaf is bounded.
"""

import io
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import conicsolve
from .config import DEFAULT
from .errors import InvalidInputError, SolverError
from .hullrep import (
    AffineImage,
    ConvexSocLeaf,
    Disjunction,
    EmptySet,
    Intersection,
    VPolyLeaf,
    count_leaves,
    disjunction_depth,
)

CONST = -1  # key of the constant term in an affine expression

log = logging.getLogger(__name__)


@dataclass
class SocProgram:
    """Linear and second-order cone constraints over ``n_vars`` variables.

    Attributes
    ----------
    names : list of str
        One name per variable; names encode the tree path of the node that
        introduced the variable.
    original : list of int
        Indices of the original variables, in order.
    A_eq, b_eq : ndarray
        ``A_eq @ v == b_eq``.
    A_in, b_in : ndarray
        ``A_in @ v <= b_in``.
    socs : list of conicsolve.Soc
        ``||A v + b|| <= c @ v + d``.
    eq_notes, in_notes, soc_notes : list of str
        Provenance of each constraint.
    leaves, depth : int
        Leaf count and disjunction depth of the tree that was flattened.
    """

    names: list
    original: list
    A_eq: np.ndarray
    b_eq: np.ndarray
    A_in: np.ndarray
    b_in: np.ndarray
    socs: list = field(default_factory=list)
    eq_notes: list = field(default_factory=list)
    in_notes: list = field(default_factory=list)
    soc_notes: list = field(default_factory=list)
    leaves: int = 0
    depth: int = 0

    @property
    def n_vars(self):
        return len(self.names)

    @property
    def n_original(self):
        return len(self.original)

    def cone_problem(self, c):
        return conicsolve.ConeProblem(c=c, G=self.A_in, h=self.b_in, E=self.A_eq, e=self.b_eq, socs=list(self.socs))

    def same_data(self, other, tol=0.0):
        """True when both programs carry identical constraint data."""
        if self.names != other.names or self.original != other.original or len(self.socs) != len(other.socs):
            return False
        pairs = [(self.A_eq, other.A_eq), (self.b_eq, other.b_eq), (self.A_in, other.A_in), (self.b_in, other.b_in)]
        for s, o in zip(self.socs, other.socs):
            pairs += [(s.A, o.A), (s.b, o.b), (s.c, o.c), (np.atleast_1d(s.d), np.atleast_1d(o.d))]
        return all(a.shape == b.shape and np.all(np.abs(a - b) <= tol) for a, b in pairs)


# --- flattening ------------------------------------------------------------------


class _Emitter:
    def __init__(self):
        self.names = []
        self.eqs, self.ins, self.socs = [], [], []
        self.eq_notes, self.in_notes, self.soc_notes = [], [], []

    def var(self, name):
        self.names.append(name)
        return {len(self.names) - 1: 1.0}

    def vars(self, prefix, k):
        return [self.var(f"{prefix}[{i}]") for i in range(k)]

    @staticmethod
    def comb(terms):
        """Linear combination ``sum coef * expr`` of affine expressions."""
        out = {}
        for coef, expr in terms:
            if coef == 0.0:
                continue
            for k, v in expr.items():
                out[k] = out.get(k, 0.0) + coef * v
        return {k: v for k, v in out.items() if v != 0.0}

    def linear_rows(self, M, X, rhs, s):
        """Expressions ``M @ X - rhs * s`` row by row."""
        return [self.comb([(M[i, j], X[j]) for j in range(M.shape[1])] + [(-rhs[i], s)]) for i in range(M.shape[0])]

    def eq(self, expr, note):
        self.eqs.append(expr)
        self.eq_notes.append(note)

    def le(self, expr, note):
        self.ins.append(expr)
        self.in_notes.append(note)

    def soc(self, norm_exprs, rhs_expr, note):
        self.socs.append((norm_exprs, rhs_expr))
        self.soc_notes.append(note)

    def emit(self, node, X, s, path):
        tag = "n" + ".".join(["0"] + [str(p) for p in path])
        note = f"{tag} {node.note}".strip()
        if isinstance(node, ConvexSocLeaf):
            for r in self.linear_rows(node.G, X, node.h, s):
                self.le(r, note)
            for r in self.linear_rows(node.E, X, node.e, s):
                self.eq(r, note)
            for soc in node.socs:
                norm = [self.comb([(soc.A[i, j], X[j]) for j in range(node.dim)] + [(soc.b[i], s)])
                        for i in range(soc.A.shape[0])]
                rhs = self.comb([(soc.c[j], X[j]) for j in range(node.dim)] + [(soc.d, s)])
                self.soc(norm, rhs, note)
        elif isinstance(node, VPolyLeaf):
            V = node.vertices
            mu = self.vars(f"{tag}/mu", V.shape[0])
            for m in mu:
                self.le(self.comb([(-1.0, m)]), note)
            for j in range(node.dim):
                self.eq(self.comb([(1.0, X[j])] + [(-V[k, j], mu[k]) for k in range(V.shape[0])]), note)
            self.eq(self.comb([(1.0, m) for m in mu] + [(-1.0, s)]), note)
        elif isinstance(node, Intersection):
            for i, child in enumerate(node.parts):
                self.emit(child, X, s, path + (i,))
        elif isinstance(node, Disjunction):
            if len(node.parts) == 1:
                self.emit(node.parts[0], X, s, path + (0,))
                return
            lams, zs = [], []
            for i, child in enumerate(node.parts):
                lam = self.var(f"{tag}.{i}/lam")
                self.le(self.comb([(-1.0, lam)]), note)
                lams.append(lam)
                zs.append(self.vars(f"{tag}.{i}/z", node.dim))
            for j in range(node.dim):
                self.eq(self.comb([(1.0, X[j])] + [(-1.0, z[j]) for z in zs]), note)
            self.eq(self.comb([(1.0, lam) for lam in lams] + [(-1.0, s)]), note)
            for i, child in enumerate(node.parts):
                self.emit(child, zs[i], lams[i], path + (i,))
        elif isinstance(node, AffineImage):
            F = node.map
            if F.is_invertible():
                Linv = np.linalg.inv(F.L)
                shifted = [self.comb([(1.0, X[i]), (-F.t[i], s)]) for i in range(F.n_out)]
                Y = [self.comb([(Linv[j, i], shifted[i]) for i in range(F.n_out)]) for j in range(F.n_in)]
            else:
                Y = self.vars(f"{tag}/y", F.n_in)
                for i in range(F.n_out):
                    self.eq(self.comb([(1.0, X[i])] + [(-F.L[i, j], Y[j]) for j in range(F.n_in)] + [(-F.t[i], s)]),
                            note)
            self.emit(node.child, Y, s, path + (0,))
        elif isinstance(node, EmptySet):
            for j in range(node.dim):
                self.eq(X[j], note)
            self.eq(s, note)
        else:
            raise InvalidInputError(f"unknown hull node {type(node).__name__}")

    def matrices(self, rows):
        n = len(self.names)
        A = np.zeros((len(rows), n))
        b = np.zeros(len(rows))
        for i, r in enumerate(rows):
            for k, v in r.items():
                if k == CONST:
                    b[i] = -v
                else:
                    A[i, k] = v
        return A, b


def flatten(h):
    """Flatten a hull tree into a :class:`SocProgram` over its root coordinates."""
    em = _Emitter()
    X = em.vars("x", h.dim)
    em.emit(h, X, {CONST: 1.0}, ())
    A_eq, b_eq = em.matrices(em.eqs)
    A_in, b_in = em.matrices(em.ins)
    socs = []
    for norm, rhs in em.socs:
        An, bn = em.matrices(norm)
        cr, dr = em.matrices([rhs])
        socs.append(conicsolve.Soc.make(An, -bn, cr[0], -dr[0]))
    return SocProgram(em.names, list(range(h.dim)), A_eq, b_eq, A_in, b_in, socs,
                      em.eq_notes, em.in_notes, em.soc_notes, count_leaves(h), disjunction_depth(h))


# --- optimization and membership ----------------------------------------------------


@dataclass
class OptimizeResult:
    value: float
    point: np.ndarray
    iterations: int = 0


def _solve(prob, config, what):
    sol = conicsolve.solve(prob, tol=config.solver_tol, max_iter=config.max_iter)
    if sol.status == conicsolve.Status.NUMERIC_FAILURE and np.all(np.isfinite(sol.x)):
        # degenerate optima (a cone apex, a vanishing disjunct) can stall the
        # iteration just short of full accuracy; the best iterate is kept
        worst = max(sol.primal_res, sol.dual_res, sol.gap / (1.0 + abs(sol.objective)))
        if worst <= config.inaccurate_tol:
            log.debug("%s: accepted stalled solve with residual %.2e", what, worst)
            return sol
    if sol.status != conicsolve.Status.OPTIMAL:
        raise SolverError(f"{what}: solver returned {sol.status.value}", sol.status)
    return sol


def optimize(p, c, config=DEFAULT):
    """Maximize ``c @ x`` over the program; ``x`` are the original variables."""
    c = np.asarray(c, dtype=float).reshape(-1)
    if c.shape[0] != p.n_original or not np.all(np.isfinite(c)):
        raise InvalidInputError(f"objective must be a finite vector of length {p.n_original}")
    obj = np.zeros(p.n_vars)
    obj[p.original] = -c
    sol = _solve(p.cone_problem(obj), config, "optimize")
    x = sol.x[p.original]
    return OptimizeResult(float(c @ x), x, sol.iterations)


def support_per_leaf(h, c, config=DEFAULT, threads=1):
    """Maximize ``c @ x`` over a hull tree without flattening the disjunctions.

    Over a disjunction the maximum of a linear function is the largest of
    the children's maxima; affine images pull the direction back.
    Intersections are solved as flattened subtrees.
    """
    c = np.asarray(c, dtype=float).reshape(-1)
    if isinstance(h, Disjunction):
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as ex:
                results = list(ex.map(lambda ch: support_per_leaf(ch, c, config, 1), h.parts))
        else:
            results = [support_per_leaf(ch, c, config, threads) for ch in h.parts]
        return max(results, key=lambda r: r.value)
    if isinstance(h, AffineImage):
        r = support_per_leaf(h.child, h.map.L.T @ c, config, threads)
        x = h.map(r.point)
        return OptimizeResult(float(c @ x), x, r.iterations)
    if isinstance(h, VPolyLeaf):
        vals = h.vertices @ c
        k = int(np.argmax(vals))
        return OptimizeResult(float(vals[k]), h.vertices[k].copy())
    if isinstance(h, EmptySet):
        return OptimizeResult(-np.inf, np.full(h.dim, np.nan))
    return optimize(flatten(h), c, config)


@dataclass
class MembershipResult:
    member: bool
    violation: float
    nearest: np.ndarray


def membership(p, x, tol=None, config=DEFAULT):
    """Decide whether ``x`` lies in the projection of the program.

    Minimizes the max-norm distance from the original-variable block to
    ``x``; ``violation`` is that distance and ``member`` means it is at most
    ``tol`` (``config.member_tol`` by default).  The max-norm keeps the
    distance bound linear: a Euclidean distance cone would sit at its apex
    for every member and stall the interior-point iterations.
    """
    tol = config.member_tol if tol is None else tol
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != p.n_original or not np.all(np.isfinite(x)):
        raise InvalidInputError(f"point must be a finite vector of length {p.n_original}")
    n = p.n_vars
    N = n + 1  # extra variable r: distance bound
    pad = lambda M: np.hstack([M, np.zeros((M.shape[0], 1))])
    k = p.n_original
    D = np.zeros((k, N))
    D[np.arange(k), p.original] = 1.0
    D[:, n] = -1.0  # x_orig - r <= x
    D2 = -D
    D2[:, n] = -1.0  # -x_orig - r <= -x
    r = np.zeros(N)
    r[n] = 1.0
    socs = [conicsolve.Soc.make(pad(s.A), s.b, np.r_[s.c, 0.0], s.d) for s in p.socs]
    prob = conicsolve.ConeProblem(
        c=r, G=np.vstack([pad(p.A_in), D, D2]), h=np.r_[p.b_in, x, -x], E=pad(p.A_eq), e=p.b_eq, socs=socs
    )
    sol = _solve(prob, config, "membership")
    dist = max(0.0, float(sol.x[n]))
    return MembershipResult(dist <= tol, dist, sol.x[p.original])


# --- statistics ----------------------------------------------------------------


def stats(p):
    """Sizes of the program and of the tree it came from."""
    return {
        "variables": p.n_vars,
        "original_variables": p.n_original,
        "equalities": int(p.A_eq.shape[0]),
        "inequalities": int(p.A_in.shape[0]),
        "soc_blocks": len(p.socs),
        "soc_rows": int(sum(s.A.shape[0] + 1 for s in p.socs)),
        "leaves": p.leaves,
        "depth": p.depth,
    }


# --- text export ---------------------------------------------------------------------


def _num(v):
    v = float(v)
    if v == 0.0:
        return "0"
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def export_text(p, format="cbf", objective=None):
    """Serialize a program.

    ``format="cbf"`` writes the conic benchmark layout: cone constraints
    are expressed through slack variables in ``Q`` domains linked by
    equality rows; variable names, provenance notes and tree statistics are
    kept in ``#`` comments so :func:`import_cbf` can rebuild the program
    exactly.  ``format="text"`` is a human-readable listing.
    """
    if format == "cbf":
        return _export_cbf(p, objective)
    if format == "text":
        return _export_human(p, objective)
    raise InvalidInputError(f"unknown export format {format!r}")


def _export_cbf(p, objective):
    out = io.StringIO()
    w = out.write
    n = p.n_vars
    w("# quadhull conic model\n")
    w(f"# stats leaves {p.leaves} depth {p.depth}\n")
    w("# original " + " ".join(str(i) for i in p.original) + "\n")
    for i, name in enumerate(p.names):
        w(f"# var {i} {name}\n")
    for kind, notes in (("eq", p.eq_notes), ("in", p.in_notes), ("soc", p.soc_notes)):
        for i, note in enumerate(notes):
            w(f"# note {kind} {i} {note}\n")
    w("VER\n3\n\n")
    w("OBJSENSE\nMAX\n\n")
    sizes = [s.A.shape[0] + 1 for s in p.socs]
    total = n + sum(sizes)
    domains = ([("F", n)] if n else []) + [("Q", k) for k in sizes]
    w(f"VAR\n{total} {len(domains)}\n")
    for name, k in domains:
        w(f"{name} {k}\n")
    w("\n")
    # constraint rows: equalities, slack links, then inequalities
    rows_A, rows_b = [], []
    for i in range(p.A_eq.shape[0]):
        rows_A.append({j: v for j, v in enumerate(p.A_eq[i]) if v != 0.0})
        rows_b.append(-p.b_eq[i])
    offset = n
    for s in p.socs:
        # slack[0] = c v + d, slack[1:] = A v + b
        rows = [(s.c, s.d)] + [(s.A[r], s.b[r]) for r in range(s.A.shape[0])]
        for k, (coef, const) in enumerate(rows):
            row = {offset + k: 1.0}
            for j, v in enumerate(coef):
                if v != 0.0:
                    row[j] = -v
            rows_A.append(row)
            rows_b.append(-const)
        offset += len(rows)
    n_eq_total = len(rows_A)
    for i in range(p.A_in.shape[0]):
        rows_A.append({j: v for j, v in enumerate(p.A_in[i]) if v != 0.0})
        rows_b.append(-p.b_in[i])
    n_in = p.A_in.shape[0]
    groups = [g for g in (("L=", n_eq_total), ("L-", n_in)) if g[1] > 0]
    w(f"CON\n{len(rows_A)} {len(groups)}\n")
    for name, k in groups:
        w(f"{name} {k}\n")
    w("\n")
    if objective is not None:
        obj = np.asarray(objective, dtype=float).reshape(-1)
        entries = [(p.original[i], v) for i, v in enumerate(obj) if v != 0.0]
        w(f"OBJACOORD\n{len(entries)}\n")
        for j, v in entries:
            w(f"{j} {_num(v)}\n")
        w("\n")
    entries = [(i, j, v) for i, row in enumerate(rows_A) for j, v in sorted(row.items())]
    w(f"ACOORD\n{len(entries)}\n")
    for i, j, v in entries:
        w(f"{i} {j} {_num(v)}\n")
    w("\n")
    bentries = [(i, v) for i, v in enumerate(rows_b) if v != 0.0]
    w(f"BCOORD\n{len(bentries)}\n")
    for i, v in bentries:
        w(f"{i} {_num(v)}\n")
    return out.getvalue()


def _expr(coefs, const, names):
    parts = [f"{_num(v)}*{names[j]}" for j, v in enumerate(coefs) if v != 0.0]
    if const != 0.0 or not parts:
        parts.append(_num(const))
    return " + ".join(parts)


def _export_human(p, objective):
    out = io.StringIO()
    w = out.write
    w("quadhull SOC program\n")
    for k, v in stats(p).items():
        w(f"  {k}: {v}\n")
    w("original variables: " + ", ".join(p.names[i] for i in p.original) + "\n")
    if objective is not None:
        obj = np.zeros(p.n_vars)
        obj[p.original] = np.asarray(objective, dtype=float)
        w(f"maximize {_expr(obj, 0.0, p.names)}\n")
    w("equalities:\n")
    for i in range(p.A_eq.shape[0]):
        w(f"  [{p.eq_notes[i]}] {_expr(p.A_eq[i], 0.0, p.names)} == {_num(p.b_eq[i])}\n")
    w("inequalities:\n")
    for i in range(p.A_in.shape[0]):
        w(f"  [{p.in_notes[i]}] {_expr(p.A_in[i], 0.0, p.names)} <= {_num(p.b_in[i])}\n")
    w("cones:\n")
    for i, s in enumerate(p.socs):
        norm = "; ".join(_expr(s.A[r], s.b[r], p.names) for r in range(s.A.shape[0]))
        w(f"  [{p.soc_notes[i]}] || {norm} || <= {_expr(s.c, s.d, p.names)}\n")
    return out.getvalue()


def import_cbf(text):
    """Rebuild a :class:`SocProgram` from :func:`export_text` CBF output."""
    names, original, notes = {}, [], {"eq": {}, "in": {}, "soc": {}}
    leaves = depth = 0
    body = []
    for line in text.splitlines():
        if line.startswith("#"):
            parts = line[1:].strip().split(" ", 3)
            if parts[0] == "var":
                names[int(parts[1])] = " ".join(parts[2:])
            elif parts[0] == "original":
                original = [int(t) for t in line[1:].split()[1:]]
            elif parts[0] == "note":
                notes[parts[1]][int(parts[2])] = parts[3] if len(parts) > 3 else ""
            elif parts[0] == "stats":
                toks = line[1:].split()
                leaves, depth = int(toks[2]), int(toks[4])
            continue
        body.append(line.strip())
    it = iter([b for b in body if b])
    sections = {}
    try:
        for tok in it:
            if tok == "VER":
                sections["VER"] = int(next(it))
            elif tok == "OBJSENSE":
                sections["OBJSENSE"] = next(it)
            elif tok == "VAR":
                total, k = map(int, next(it).split())
                sections["VAR"] = (total, [next(it).split() for _ in range(k)])
            elif tok == "CON":
                m, k = map(int, next(it).split())
                sections["CON"] = (m, [next(it).split() for _ in range(k)])
            elif tok in ("ACOORD", "OBJACOORD"):
                k = int(next(it))
                sections[tok] = [next(it).split() for _ in range(k)]
            elif tok == "BCOORD":
                k = int(next(it))
                sections[tok] = [next(it).split() for _ in range(k)]
            else:
                raise InvalidInputError(f"unexpected CBF token {tok!r}")
    except StopIteration:
        raise InvalidInputError("truncated CBF document") from None
    if sections.get("VER") != 3:
        raise InvalidInputError("unsupported CBF version")
    total, domains = sections.get("VAR", (0, []))
    m, groups = sections.get("CON", (0, []))
    n = int(domains[0][1]) if domains and domains[0][0] == "F" else 0
    qsizes = [int(d[1]) for d in domains[1:]]
    A = np.zeros((m, total))
    for i, j, v in sections.get("ACOORD", []):
        A[int(i), int(j)] = float(v)
    b = np.zeros(m)
    for i, v in sections.get("BCOORD", []):
        b[int(i)] = float(v)
    counts = {g[0]: int(g[1]) for g in groups}
    n_eq_total, n_in = counts.get("L=", 0), counts.get("L-", 0)
    n_links = sum(qsizes)
    n_eq = n_eq_total - n_links
    A_eq, b_eq = A[:n_eq, :n], -b[:n_eq]
    socs = []
    r = n_eq
    for k in qsizes:
        block = -A[r:r + k, :n]
        const = -b[r:r + k]
        socs.append(conicsolve.Soc.make(block[1:], const[1:], block[0], const[0]))
        r += k
    A_in, b_in = A[r:r + n_in, :n], -b[r:r + n_in]
    return SocProgram(
        [names.get(i, f"v{i}") for i in range(n)], original, A_eq, b_eq, A_in, b_in, socs,
        [notes["eq"].get(i, "") for i in range(n_eq)],
        [notes["in"].get(i, "") for i in range(n_in)],
        [notes["soc"].get(i, "") for i in range(len(socs))],
        leaves, depth,
    )
