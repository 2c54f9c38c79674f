"""Reduction of a quadric-in-polytope instance to canonical form.

An instance is ``S = {x : x'Qx + alpha'x = g, A x <= b}``.  Two steps bring
it into the shape the hull construction works with:

1. :func:`drop_to_fulldim` removes implicit equalities of the polytope by
   solving for basic variables and substituting into the quadratic.
2. :func:`canonicalize` diagonalizes ``Q``, completes squares and permutes
   coordinates so that the equation reads

   .. math:: \\sum_i w_i^2 - \\sum_j x_j^2 + \\sum_k y_k = g, \\qquad g \\ge 0,

   with some further coordinates ``z`` absent from the equation.

Both steps are invertible affine changes of variables (or embeddings), and
convex hulls commute with them, so hulls built in the reduced coordinates
are pushed back with :class:`~quadhull.hullrep.AffineImage`.
"""

from dataclasses import dataclass

import numpy as np

from .affine import AffineMap
from .config import DEFAULT
from .densela import sym_eigen
from .errors import InvalidInputError
from .hullrep import AffineImage
from .polytope import HPolytope, affine_hull, bounding_box


@dataclass(frozen=True)
class QuadInstance:
    """``{x : x'Qx + alpha'x = g, x in P}``; ``Q`` is symmetrized on construction."""

    Q: np.ndarray
    alpha: np.ndarray
    g: float
    P: HPolytope
    name: str = ""

    def __post_init__(self):
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        n = self.P.dim
        if Q.shape != (n, n):
            raise InvalidInputError(f"Q has shape {Q.shape}, polytope lives in dimension {n}")
        alpha = np.asarray(self.alpha, dtype=float).reshape(-1)
        if alpha.shape != (n,):
            raise InvalidInputError(f"alpha has length {alpha.shape[0]}, expected {n}")
        if not (np.all(np.isfinite(Q)) and np.all(np.isfinite(alpha)) and np.isfinite(self.g)):
            raise InvalidInputError("instance data has non-finite entries")
        object.__setattr__(self, "Q", 0.5 * (Q + Q.T))
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "g", float(self.g))

    @property
    def n(self):
        return self.P.dim

    def value(self, x):
        """``x'Qx + alpha'x`` for one point or a batch of rows."""
        x = np.asarray(x, dtype=float)
        if x.ndim == 2:
            return np.einsum("ij,jk,ik->i", x, self.Q, x) + x @ self.alpha
        return float(x @ self.Q @ x + self.alpha @ x)

    def residual(self, x):
        return self.value(x) - self.g

    def data_norm(self):
        return float(np.linalg.norm(self.Q) + np.linalg.norm(self.alpha) + abs(self.g))

    def validate(self, config=DEFAULT):
        """Reject empty or unbounded polytopes (raises the matching error)."""
        bounding_box(self.P, config)
        return self

    def substitute(self, F, P=None):
        """Instance in coordinates ``u`` with ``x = F(u)``; ``P`` defaults to the preimage."""
        E, e = F.L, F.t
        Qt = E.T @ self.Q @ E
        at = 2.0 * E.T @ self.Q @ e + E.T @ self.alpha
        gt = self.g - e @ self.Q @ e - self.alpha @ e
        return QuadInstance(Qt, at, gt, self.P.map_preimage(F) if P is None else P, self.name)


def drop_to_fulldim(inst, config=DEFAULT):
    """Restrict ``inst`` to the affine hull of its polytope.

    Returns
    -------
    reduced : QuadInstance
        Instance over a full-dimensional polytope in the nonbasic coordinates.
    embedding : AffineMap
        ``x = embedding(u)``; the identity when ``P`` is already full-dimensional.
    """
    hull = affine_hull(inst.P, config)
    if hull.dim == inst.n and hull.embedding.is_identity():
        return inst, AffineMap.identity(inst.n)
    F = hull.embedding
    reduced = inst.substitute(F, P=hull.reduced)
    return reduced, F


@dataclass(frozen=True)
class CanonicalSet:
    """Canonical form ``sum w^2 - sum x^2 + sum y = g`` over a polytope.

    Coordinates are ordered ``(w, x, y, z)`` with block sizes
    ``(n_qp, n_qm, n_l, n_o)``; ``to_original`` maps canonical coordinates to
    the coordinates of the instance that was canonicalized.
    """

    n_qp: int
    n_qm: int
    n_l: int
    n_o: int
    g: float
    P: HPolytope
    to_original: AffineMap
    flipped: bool = False
    log: tuple = ()

    @property
    def counts(self):
        return (self.n_qp, self.n_qm, self.n_l, self.n_o)

    @property
    def dim(self):
        return self.n_qp + self.n_qm + self.n_l + self.n_o

    def blocks(self):
        a, b, c = self.n_qp, self.n_qp + self.n_qm, self.n_qp + self.n_qm + self.n_l
        return slice(0, a), slice(a, b), slice(b, c), slice(c, self.dim)

    def coefficients(self):
        """``(Q, alpha)`` of the canonical equation as a plain quadratic."""
        d = np.r_[np.ones(self.n_qp), -np.ones(self.n_qm), np.zeros(self.n_l + self.n_o)]
        alpha = np.r_[np.zeros(self.n_qp + self.n_qm), np.ones(self.n_l), np.zeros(self.n_o)]
        return np.diag(d), alpha

    def as_instance(self, name=""):
        Q, alpha = self.coefficients()
        return QuadInstance(Q, alpha, self.g, self.P, name)

    def residual(self, v):
        w, x, y, _ = self.blocks()
        v = np.asarray(v, dtype=float)
        return np.sum(v[..., w] ** 2, -1) - np.sum(v[..., x] ** 2, -1) + np.sum(v[..., y], -1) - self.g


def canonicalize(inst, config=DEFAULT):
    """Bring a full-dimensional instance into canonical form.

    The chain is: eigenbasis rotation ``r = V x``; square completion
    ``u = sqrt|s| (r + beta / (2 s))`` on nonzero eigenvalues; scaling
    ``y = beta_k r_k`` on zero eigenvalues with a linear term; a sign flip of
    the whole equation when the right-hand side is negative; and a block
    permutation.  All steps compose to ``c = M x + m0`` with ``M`` invertible.
    """
    n = inst.n
    log = []
    sigma, V = sym_eigen(inst.Q, tol=config.jacobi_tol)
    beta = V @ inst.alpha
    qscale = max(1.0, float(np.max(np.abs(inst.Q)))) if n else 1.0
    ascale = max(1.0, float(np.max(np.abs(inst.alpha)))) if n else 1.0
    pos = [i for i in range(n) if sigma[i] > config.eig_tol * qscale]
    neg = [i for i in range(n) if sigma[i] < -config.eig_tol * qscale]
    zero = [i for i in range(n) if i not in pos and i not in neg]
    lin = [i for i in zero if abs(beta[i]) >= config.lin_tol * ascale]
    absent = [i for i in zero if i not in lin]
    for i in lin:
        if abs(beta[i]) == config.lin_tol * ascale:
            log.append(f"linear coefficient of eigen-direction {i} sits on the threshold; kept as linear")
    dropped = [abs(sigma[i]) for i in zero if sigma[i] != 0.0] + [abs(beta[i]) for i in absent if beta[i] != 0.0]
    if dropped:
        log.append(f"dropped coefficients below tolerance (max {max(dropped):.3g})")

    g = inst.g + sum(beta[i] ** 2 / (4.0 * sigma[i]) for i in pos + neg)
    if abs(g) <= config.g_snap * (1.0 + inst.data_norm()):
        g = 0.0

    rows = {}
    offs = {}
    for i in pos + neg:
        s = np.sqrt(abs(sigma[i]))
        rows[i] = s * V[i]
        offs[i] = s * beta[i] / (2.0 * sigma[i])
    for i in absent:
        rows[i] = V[i].copy()
        offs[i] = 0.0

    flipped = g < 0
    sign = -1.0 if flipped else 1.0
    if flipped:
        g = -g
        pos, neg = neg, pos
        log.append("equation negated so that the right-hand side is nonnegative")
    pos.sort(key=lambda i: -abs(sigma[i]))
    neg.sort(key=lambda i: -abs(sigma[i]))

    M_lin, m_lin = [], []
    if config.aggregate_linear and len(lin) >= 2:
        bvec = beta[lin]
        Vl = V[lin]
        M_lin.append(sign * bvec @ Vl)
        m_lin.append(0.0)
        # orthonormal complement of bvec inside the linear eigen-directions
        _, _, Wt = np.linalg.svd(bvec[None, :])
        comp = Wt[1:] @ Vl
        log.append(f"{len(lin)} linear coordinates aggregated into one")
        extra_absent = list(comp)
        lin_count = 1
    else:
        for i in lin:
            M_lin.append(sign * beta[i] * V[i])
            m_lin.append(0.0)
        extra_absent = []
        lin_count = len(lin)

    M = np.array([rows[i] for i in pos] + [rows[i] for i in neg] + M_lin
                 + [rows[i] for i in absent] + extra_absent).reshape(n, n)
    m0 = np.array([offs[i] for i in pos] + [offs[i] for i in neg] + m_lin
                  + [offs[i] for i in absent] + [0.0] * len(extra_absent))
    Minv = np.linalg.inv(M)
    to_original = AffineMap(Minv, -Minv @ m0)
    Pc = HPolytope(inst.P.A @ Minv, inst.P.b + inst.P.A @ Minv @ m0).normalized()
    return CanonicalSet(len(pos), len(neg), lin_count, n - len(pos) - len(neg) - lin_count,
                        float(g), Pc, to_original, flipped, tuple(log))


def apply_map(F, H):
    """Image of the hull ``H`` under ``F`` (identity maps are dropped)."""
    if F.n_in == F.n_out and F.is_identity():
        return H
    return AffineImage(F, H)


__all__ = [
    "AffineMap",
    "QuadInstance",
    "CanonicalSet",
    "drop_to_fulldim",
    "canonicalize",
    "apply_map",
]
