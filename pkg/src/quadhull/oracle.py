"""Brute-force ground truth for ``S = {x : x'Qx + alpha'x = g, A x <= b}``.

Nothing here touches the hull construction: the oracle works directly from
``(Q, alpha, g, A, b)`` with ``numpy`` and ``scipy.optimize.linprog``.  Points
of ``S`` are produced by exact root solving along grid lines: for every face
of ``P`` (``P`` itself, its facets, ..., its edges) and every axis of a
coordinate system on that face, the quadratic restricted to a line is a
univariate quadratic whose roots are computed in closed form and polished by
one Newton step.  Vertices of ``P`` lying on the quadric are included too.

Because every returned point lies on ``S`` (to ``1e-9``), the maximum of a
linear function over the sample is a lower bound on its maximum over
``conv(S)``.
"""

import csv
import io
import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import linprog

EVAL_CAP = 1_000_000
RESIDUAL_TOL = 1e-9


@dataclass
class SurfaceSample:
    """Points on the quadric inside the polytope.

    Attributes
    ----------
    points : ndarray, shape (k, n)
    residuals : ndarray, shape (k,)
        ``x'Qx + alpha'x - g`` at each point.
    residual_bound : float
        ``max |residuals|`` (0 for an empty sample).
    density : int
        Grid lines per coordinate on each face.
    seed : int
    evaluations : int
        Number of grid lines solved.
    """

    points: np.ndarray
    residuals: np.ndarray
    density: int
    seed: int
    evaluations: int = 0
    residual_bound: float = field(init=False)

    def __post_init__(self):
        self.residual_bound = float(np.max(np.abs(self.residuals))) if len(self.residuals) else 0.0

    @property
    def empty(self):
        return self.points.shape[0] == 0

    def __len__(self):
        return self.points.shape[0]


@dataclass
class BruteMax:
    value: float
    point: np.ndarray
    trace: list
    empty: bool = False


# --- polytope geometry, kept independent of quadhull.polytope ---------------------


def _lp_max(c, A, b):
    res = linprog(-c, A_ub=A, b_ub=b, bounds=(None, None), method="highs")
    if res.status != 0:
        return None, None
    return -res.fun, res.x


def _affine_frame(A, b, tol=1e-9):
    """Point ``x0`` and orthonormal ``N`` with ``aff(P) = x0 + range(N)``; None if empty."""
    n = A.shape[1]
    eq = []
    x0 = None
    for i in range(A.shape[0]):
        v, x = _lp_max(-A[i], A, b)  # v = -min(a_i x)
        if v is None:
            return None
        if x0 is None:
            x0 = x
        if b[i] + v <= tol * max(1.0, abs(b[i])):
            eq.append(i)
    if x0 is None:  # no rows at all
        return np.zeros(n), np.eye(n)
    if not eq:
        return x0, np.eye(n)
    N = null_space(A[eq])
    return x0, N


def _vertices(A, b, tol=1e-9):
    """All vertices of a full-dimensional ``{u : A u <= b}`` by subset enumeration."""
    m, d = A.shape
    if d == 0:
        return np.zeros((1, 0)) if np.all(b >= -tol) else np.zeros((0, 0))
    pts = []
    for rows in itertools.combinations(range(m), d):
        M = A[list(rows)]
        if abs(np.linalg.det(M)) < 1e-12 * max(1.0, np.max(np.abs(M))) ** d:
            continue
        u = np.linalg.solve(M, b[list(rows)])
        if np.all(A @ u <= b + tol * (1.0 + np.abs(b))):
            if not any(np.max(np.abs(u - q)) <= 1e-9 * (1 + np.max(np.abs(q))) for q in pts):
                pts.append(u)
    return np.array(pts).reshape(len(pts), d)


def _faces(A, b, V, tol=1e-8):
    """All nonempty faces as sorted tuples of vertex indices, with their dimensions."""
    slack = b[None, :] - V @ A.T
    tight = [frozenset(np.flatnonzero(np.abs(slack[:, i]) <= tol * (1.0 + abs(b[i])))) for i in range(A.shape[0])]
    everything = frozenset(range(V.shape[0]))
    seen = {everything}
    frontier = [everything]
    while frontier:
        nxt = []
        for F in frontier:
            for T in tight:
                G = F & T
                if G and G not in seen:
                    seen.add(G)
                    nxt.append(G)
        frontier = nxt
    out = []
    for F in seen:
        idx = sorted(F)
        W = V[idx] - V[idx].mean(axis=0)
        dim = int(np.linalg.matrix_rank(W, tol=1e-9)) if len(idx) > 1 else 0
        out.append((tuple(idx), dim))
    out.sort(key=lambda f: (-f[1], f[0]))
    return out


# --- root finding along lines --------------------------------------------------


def _line_points(Q, alpha, g, A, b, X0, d, tol=1e-12):
    """Exact intersections of lines ``X0[i] + t d`` with ``S``.

    Returns an array of points (possibly empty).  Lines along which the
    quadratic vanishes identically contribute the endpoints and midpoint of
    their chord inside ``P``.
    """
    if X0.shape[0] == 0:
        return np.zeros((0, X0.shape[1]))
    Ad = A @ d
    s0 = b[None, :] - X0 @ A.T  # slack at t = 0
    tlo = np.full(X0.shape[0], -np.inf)
    thi = np.full(X0.shape[0], np.inf)
    ok = np.ones(X0.shape[0], dtype=bool)
    for j in range(A.shape[0]):
        if Ad[j] > 1e-14:
            thi = np.minimum(thi, s0[:, j] / Ad[j])
        elif Ad[j] < -1e-14:
            tlo = np.maximum(tlo, s0[:, j] / Ad[j])
        else:
            ok &= s0[:, j] >= -1e-12
    ok &= tlo <= thi + 1e-12
    X0, tlo, thi = X0[ok], tlo[ok], thi[ok]
    Qd = Q @ d
    qa = float(d @ Qd)
    qb = 2.0 * X0 @ Qd + alpha @ d
    qc = np.einsum("ij,jk,ik->i", X0, Q, X0) + X0 @ alpha - g
    scale = 1.0 + np.abs(qc) + np.abs(qb) * np.maximum(np.abs(tlo), np.abs(thi)) + abs(qa)
    ts, idx = [], []
    if abs(qa) > tol:
        disc = qb * qb - 4.0 * qa * qc
        has = disc >= 0
        sq = np.sqrt(np.where(has, disc, 0.0))
        qq = -0.5 * (qb + np.where(qb >= 0, sq, -sq))
        with np.errstate(divide="ignore", invalid="ignore"):
            r1 = qq / qa
            r2 = np.where(qq != 0, qc / qq, r1)
        for r in (r1, r2):
            ts.append(r[has])
            idx.append(np.flatnonzero(has))
    else:
        lin = np.abs(qb) > tol
        with np.errstate(divide="ignore", invalid="ignore"):
            r = -qc / np.where(lin, qb, 1.0)
        ts.append(r[lin])
        idx.append(np.flatnonzero(lin))
        flat = (~lin) & (np.abs(qc) <= 1e-12 * scale)
        for frac in (0.0, 0.5, 1.0):
            ts.append(tlo[flat] + frac * (thi[flat] - tlo[flat]))
            idx.append(np.flatnonzero(flat))
    if not ts:
        return np.zeros((0, d.shape[0]))
    t = np.concatenate(ts)
    k = np.concatenate(idx).astype(int)
    # one Newton polish on the univariate quadratic
    f = (qa * t + qb[k]) * t + qc[k]
    fp = 2.0 * qa * t + qb[k]
    step = np.where(np.abs(fp) > 1e-12, f / np.where(np.abs(fp) > 1e-12, fp, 1.0), 0.0)
    t = t - step
    width = 1e-9 * (1.0 + np.abs(thi[k] - tlo[k]))
    keep = (t >= tlo[k] - width) & (t <= thi[k] + width)
    t = np.clip(t[keep], tlo[k][keep], thi[k][keep])
    k = k[keep]
    return X0[k] + t[:, None] * d[None, :]


# --- public API ---------------------------------------------------------------------


def _data(inst):
    return (np.asarray(inst.Q, float), np.asarray(inst.alpha, float), float(inst.g),
            np.asarray(inst.P.A, float), np.asarray(inst.P.b, float))


def _sample(Q, alpha, g, A, b, density, seed, cap=EVAL_CAP):
    n = A.shape[1]
    frame = _affine_frame(A, b)
    if frame is None:
        return np.zeros((0, n)), 0
    x0, N = frame
    d = N.shape[1]
    Au, bu = A @ N, b - A @ x0
    V = _vertices(Au, bu)
    if V.shape[0] == 0:
        return np.zeros((0, n)), 0
    faces = _faces(Au, bu, V)
    rng = np.random.default_rng(seed)
    chunks = []
    evals = 0
    # budget: split the cap evenly between faces of positive dimension
    big = [f for f in faces if f[1] >= 2]
    for idx, k in faces:
        Vf = V[list(idx)]
        if k == 0:
            u = Vf[0]
            x = x0 + N @ u
            chunks.append(x[None, :])
            evals += 1
            continue
        c0 = Vf.mean(axis=0)
        _, _, Wt = np.linalg.svd(Vf - c0)
        B = Wt[:k].T  # d x k orthonormal frame of the face
        coords = (Vf - c0) @ B
        lo, hi = coords.min(axis=0), coords.max(axis=0)
        dens = density
        if k >= 2:
            per_face = cap / max(1, len(big)) / k
            dens = int(max(2, min(density, np.floor(per_face ** (1.0 / (k - 1))))))
        offset = rng.random(k)
        origin = x0 + N @ c0
        Nf = N @ B  # n x k
        for axis in range(k):
            others = [j for j in range(k) if j != axis]
            grids = [lo[j] + (np.arange(dens) + offset[j]) * (hi[j] - lo[j]) / dens for j in others]
            if grids:
                mesh = np.stack(np.meshgrid(*grids, indexing="ij"), axis=-1).reshape(-1, k - 1)
            else:
                mesh = np.zeros((1, 0))
            X0 = origin[None, :] + mesh @ Nf[:, others].T
            pts = _line_points(Q, alpha, g, A, b, X0, Nf[:, axis])
            evals += X0.shape[0]
            chunks.append(pts)
    pts = np.vstack(chunks) if chunks else np.zeros((0, n))
    res = np.einsum("ij,jk,ik->i", pts, Q, pts) + pts @ alpha - g
    magnitude = np.einsum("ij,jk,ik->i", np.abs(pts), np.abs(Q), np.abs(pts)) + np.abs(pts) @ np.abs(alpha)
    tol = RESIDUAL_TOL * np.maximum(1.0, np.maximum(magnitude, abs(g)))
    feas = np.all(pts @ A.T <= b + 1e-9, axis=1) & (np.abs(res) <= tol)
    return pts[feas], evals


def sample_surface(inst, density=100, seed=0):
    """Sample ``S`` by exact root solving on axis grids over every face of ``P``.

    Parameters
    ----------
    inst : QuadInstance
    density : int
        Grid lines per coordinate on each face (reduced automatically on
        high-dimensional faces so the total stays below ``EVAL_CAP``).
    seed : int
        Sets the random offset of each grid; identical seeds give identical samples.

    Returns
    -------
    SurfaceSample
    """
    Q, alpha, g, A, b = _data(inst)
    pts, evals = _sample(Q, alpha, g, A, b, int(density), int(seed))
    res = np.einsum("ij,jk,ik->i", pts, Q, pts) + pts @ alpha - g
    return SurfaceSample(pts, res, int(density), int(seed), evals)


def subsample(sample, k, seed=0):
    """``k`` points drawn without replacement (all of them if fewer)."""
    if len(sample) <= k:
        return sample.points
    rng = np.random.default_rng(seed)
    pick = np.sort(rng.choice(len(sample), size=k, replace=False))
    return sample.points[pick]


def brute_max(inst, c, densities=None, seed=0, agree_tol=1e-4, zoom_rounds=3, zoom_factor=10.0, cap=EVAL_CAP):
    """Lower-bound estimate of ``max c'x`` over ``S`` by refinement.

    The grid density doubles (``densities`` defaults to 100, 200, 400, ...)
    until two consecutive estimates agree within ``agree_tol * (1 + |v|)`` or
    the evaluation cap is reached; then the grid is zoomed around the
    incumbent ``zoom_rounds`` times, shrinking the window by ``zoom_factor``
    each round.  ``trace`` holds the running maximum after every refinement
    and is therefore nondecreasing.
    """
    Q, alpha, g, A, b = _data(inst)
    c = np.asarray(c, dtype=float)
    n = A.shape[1]
    densities = list(densities) if densities is not None else [100 * 2**k for k in range(12)]
    best, arg = -np.inf, None
    trace = []
    used = 0
    prev = None
    for dens in densities:
        pts, ev = _sample(Q, alpha, g, A, b, dens, seed, cap=max(1, cap - used))
        used += ev
        if pts.shape[0]:
            vals = pts @ c
            i = int(np.argmax(vals))
            if vals[i] > best:
                best, arg = float(vals[i]), pts[i]
        trace.append(best)
        if used >= cap:
            break
        if prev is not None:
            if not np.isfinite(best) and not np.isfinite(prev):
                break  # nothing found twice in a row: report S as empty
            if abs(best - prev) <= agree_tol * (1.0 + abs(best)):
                break
        prev = best
    if arg is None:
        return BruteMax(-np.inf, None, trace, empty=True)
    lo = np.array([_lp_max(-e, A, b)[0] for e in np.eye(n)]) * -1.0
    hi = np.array([_lp_max(e, A, b)[0] for e in np.eye(n)])
    radius = (hi - lo) / zoom_factor
    for _ in range(zoom_rounds):
        Az = np.vstack([A, np.eye(n), -np.eye(n)])
        bz = np.r_[b, arg + radius, -(arg - radius)]
        pts, ev = _sample(Q, alpha, g, Az, bz, densities[0], seed)
        used += ev
        if pts.shape[0]:
            vals = pts @ c
            i = int(np.argmax(vals))
            if vals[i] > best:
                best, arg = float(vals[i]), pts[i]
        trace.append(best)
        radius = radius / zoom_factor
    return BruteMax(best, arg, trace)


def to_csv(sample):
    """CSV text with one row per point: coordinates then residual."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    n = sample.points.shape[1] if sample.points.ndim == 2 else 0
    w.writerow([f"x{i + 1}" for i in range(n)] + ["residual"])
    for p, r in zip(sample.points, sample.residuals):
        w.writerow([repr(float(v)) for v in p] + [repr(float(r))])
    return buf.getvalue()
