"""Dense primal-dual interior-point solver for LPs and SOCPs.

Problems are posed as::

    minimize    c^T x
    subject to  G x <= h
                E x == e
                ||A_j x + b_j||_2 <= c_j^T x + d_j     for each cone j

Internally everything is stacked into the standard conic form
``G x + s = h, s in K`` with ``K`` a product of a nonnegative orthant and
second-order cones, and solved with a homogeneous self-dual embedding,
Nesterov-Todd scaling and Mehrotra predictor-corrector steps.
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import linalg

from .errors import InvalidInputError


class Status(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    NUMERIC_FAILURE = "numeric_failure"


@dataclass(frozen=True)
class Soc:
    """Second-order cone constraint ``||A x + b|| <= c^T x + d``."""

    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: float

    @classmethod
    def make(cls, A, b, c, d):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        return cls(A, np.asarray(b, dtype=float).reshape(-1), np.asarray(c, dtype=float).reshape(-1), float(d))

    def violation(self, x):
        return float(np.linalg.norm(self.A @ x + self.b) - (self.c @ x + self.d))


def _mat(a, ncols):
    if a is None:
        return np.zeros((0, ncols))
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return np.zeros((0, ncols))
    return np.atleast_2d(a)


def _vec(a):
    if a is None:
        return np.zeros(0)
    return np.asarray(a, dtype=float).reshape(-1)


@dataclass
class ConeProblem:
    c: np.ndarray
    G: np.ndarray = None
    h: np.ndarray = None
    E: np.ndarray = None
    e: np.ndarray = None
    socs: list = field(default_factory=list)

    def __post_init__(self):
        self.c = _vec(self.c)
        n = self.c.shape[0]
        if n == 0:
            raise InvalidInputError("problem has no variables")
        self.G, self.h = _mat(self.G, n), _vec(self.h)
        self.E, self.e = _mat(self.E, n), _vec(self.e)
        self.socs = [s if isinstance(s, Soc) else Soc.make(*s) for s in self.socs]
        if self.G.shape != (self.h.shape[0], n) or self.E.shape != (self.e.shape[0], n):
            raise InvalidInputError("inconsistent linear constraint dimensions")
        for s in self.socs:
            if s.A.shape[1] != n or s.c.shape[0] != n or s.A.shape[0] != s.b.shape[0]:
                raise InvalidInputError("inconsistent cone dimensions")
        arrays = [self.c, self.G, self.h, self.E, self.e]
        arrays += [a for s in self.socs for a in (s.A, s.b, s.c)]
        if not all(np.all(np.isfinite(a)) for a in arrays) or not all(np.isfinite(s.d) for s in self.socs):
            raise InvalidInputError("problem data has non-finite entries")

    @property
    def n(self):
        return self.c.shape[0]

    def stacked(self):
        """Return ``(Gs, hs, n_lin, cone_dims)`` for the form ``Gs x + s = hs``."""
        blocks_G, blocks_h, dims = [self.G], [self.h], []
        for s in self.socs:
            blocks_G.append(-np.vstack([s.c[None, :], s.A]))
            blocks_h.append(np.concatenate([[s.d], s.b]))
            dims.append(1 + s.A.shape[0])
        return np.vstack(blocks_G), np.concatenate(blocks_h), self.G.shape[0], dims


@dataclass
class ConeSolution:
    status: Status
    x: np.ndarray
    objective: float
    primal_res: float
    dual_res: float
    gap: float
    y: np.ndarray = None
    z: np.ndarray = None
    s: np.ndarray = None
    iterations: int = 0
    trace: list = None


# --- cone arithmetic over the product K = R^l_+ x Q^{q_1} x ... ---------------


class _Cones:
    def __init__(self, n_lin, dims):
        self.l = n_lin
        self.dims = list(dims)
        self.starts = []
        pos = n_lin
        for q in self.dims:
            self.starts.append(pos)
            pos += q
        self.m = pos
        self.degree = n_lin + len(self.dims)

    def blocks(self):
        for k, q in zip(self.starts, self.dims):
            yield slice(k, k + q)

    def identity(self):
        e = np.zeros(self.m)
        e[: self.l] = 1.0
        for k in self.starts:
            e[k] = 1.0
        return e

    def max_violation(self, u):
        """Smallest ``a`` such that ``u + a e`` lies in the closed cone."""
        worst = -np.inf
        if self.l:
            worst = max(worst, float(np.max(-u[: self.l])))
        for b in self.blocks():
            v = u[b]
            worst = max(worst, float(np.linalg.norm(v[1:]) - v[0]))
        return worst

    def prod(self, u, v):
        out = np.empty(self.m)
        out[: self.l] = u[: self.l] * v[: self.l]
        for b in self.blocks():
            uu, vv = u[b], v[b]
            out[b.start] = uu @ vv
            out[b.start + 1 : b.stop] = uu[0] * vv[1:] + vv[0] * uu[1:]
        return out

    def div(self, lam, v):
        """Solve ``lam o u = v`` for ``u``."""
        out = np.empty(self.m)
        out[: self.l] = v[: self.l] / lam[: self.l]
        for b in self.blocks():
            ll, vv = lam[b], v[b]
            det = ll[0] ** 2 - ll[1:] @ ll[1:]
            u0 = (ll[0] * vv[0] - ll[1:] @ vv[1:]) / det
            out[b.start] = u0
            out[b.start + 1 : b.stop] = (vv[1:] - u0 * ll[1:]) / ll[0]
        return out

    def step_to_boundary(self, u, du):
        """Largest ``a`` (capped at a large number) with ``u + a du`` in the cone."""
        amax = np.inf
        if self.l:
            neg = du[: self.l] < 0
            if np.any(neg):
                amax = min(amax, float(np.min(-u[: self.l][neg] / du[: self.l][neg])))
        for b in self.blocks():
            amax = min(amax, _soc_step(u[b], du[b]))
        return amax


def _soc_step(u, du):
    # largest a >= 0 with u0 + a du0 >= ||u1 + a du1|| (u strictly interior)
    a = du[0] ** 2 - du[1:] @ du[1:]
    b = u[0] * du[0] - u[1:] @ du[1:]
    c = u[0] ** 2 - u[1:] @ u[1:]
    c = max(c, 0.0)
    disc = b * b - a * c
    if a == 0.0:
        root = -c / (2.0 * b) if b < 0 else np.inf
    elif a > 0 and (disc < 0.0 or b >= 0):
        root = np.inf
    else:
        # smallest positive root, written to avoid cancellation
        root = c / (-b + np.sqrt(max(disc, 0.0)))
    if du[0] < 0:
        root = min(root, -u[0] / du[0])
    return root


class _Scaling:
    """Nesterov-Todd scaling ``W`` with ``W z = W^{-1} s = lam`` (W symmetric)."""

    def __init__(self, cones, s, z):
        self.cones = cones
        l = cones.l
        self.d = np.sqrt(s[:l] / z[:l])
        self.soc = []
        lam = np.empty(cones.m)
        lam[:l] = np.sqrt(s[:l] * z[:l])
        for b in cones.blocks():
            sb, zb = s[b], z[b]
            sn = np.sqrt(max(sb[0] ** 2 - sb[1:] @ sb[1:], 1e-300))
            zn = np.sqrt(max(zb[0] ** 2 - zb[1:] @ zb[1:], 1e-300))
            sbar, zbar = sb / sn, zb / zn
            gamma = np.sqrt(max((1.0 + sbar @ zbar) / 2.0, 1e-300))
            w = sbar.copy()
            w[0] += zbar[0]
            w[1:] -= zbar[1:]
            w /= 2.0 * gamma
            # W is the quadratic representation of the square root of w
            w[0] += 1.0
            w /= np.sqrt(2.0 * w[0])
            beta = np.sqrt(sn / zn)
            self.soc.append((beta, w))
            lam[b] = self.apply(zb, beta, w)
        self.lam = lam
        self._assemble()

    @staticmethod
    def apply(v, beta, w):
        # beta (2 w w^T - J) v
        out = 2.0 * w * (w @ v)
        out[0] -= v[0]
        out[1:] += v[1:]
        return beta * out

    def _assemble(self):
        # dense block-diagonal W and W^{-1}; blocks are small, so matvecs beat Python loops
        m, l = self.cones.m, self.cones.l
        Wm = np.zeros((m, m))
        Wi = np.zeros((m, m))
        idx = np.arange(l)
        Wm[idx, idx] = self.d
        Wi[idx, idx] = 1.0 / self.d
        for b, (beta, w) in zip(self.cones.blocks(), self.soc):
            q = b.stop - b.start
            J = np.eye(q)
            J[0, 0] = -1.0
            jw = w.copy()
            jw[1:] = -jw[1:]
            Wm[b, b] = beta * (2.0 * np.outer(w, w) + J)
            Wi[b, b] = (2.0 * np.outer(jw, jw) + J) / beta
        self.Wm, self.Wi = Wm, Wi

    def W(self, v):
        return self.Wm @ v

    def Winv(self, v):
        return self.Wi @ v


class _KKT:
    """Factorization of ``[[0, E^T, G^T], [E, 0, 0], [G, 0, -W^2]]``."""

    def __init__(self, G, E, scaling, reg=1e-13):
        self.G, self.E, self.scaling = G, E, scaling
        Gb = scaling.Winv(G)
        self.Gb = Gb
        n = Gb.shape[1]
        if not np.all(np.isfinite(Gb)):
            raise FloatingPointError("non-finite scaling")
        # Jacobi equilibration of H = Gb' Gb: near the cone boundary its diagonal
        # spans many orders of magnitude, and a regularization relative to the
        # largest entry would swamp the small pivots.
        dH = np.linalg.norm(Gb, axis=0)
        dH[~(dH > 1e-150)] = 1.0
        self.dH = dH
        Gs = Gb / dH
        p = E.shape[0]
        for attempt in range(6):
            self.delta = reg * 100.0**attempt
            # R'R = Gs'Gs + delta I from a QR factorization, without forming the
            # normal matrix (which would square its condition number)
            R = linalg.qr(np.vstack([Gs, np.sqrt(self.delta) * np.eye(n)]), mode="r", check_finite=False)[0][:n]
            if not np.all(np.abs(np.diag(R)) > 0):
                continue
            self.R = R
            if p:
                self.HiEt = self._hsolve(E.T)
                S = E @ self.HiEt
                dS = np.sqrt(np.abs(np.diag(S)))
                dS[~(dS > 1e-150)] = 1.0
                self.dS = dS
                try:
                    self.cho_S = linalg.cho_factor(S / np.outer(dS, dS) + self.delta * np.eye(p), check_finite=False)
                except linalg.LinAlgError:
                    continue
            break
        else:
            raise linalg.LinAlgError("KKT system could not be factored")

    def _hsolve(self, r):
        d = self.dH if r.ndim == 1 else self.dH[:, None]
        t = linalg.solve_triangular(self.R, r / d, trans="T", check_finite=False)
        return linalg.solve_triangular(self.R, t, check_finite=False) / d

    def _ssolve(self, r):
        return linalg.cho_solve(self.cho_S, r / self.dS, check_finite=False) / self.dS

    def _solve_reg(self, rx, ry, rz):
        # regularized reduced system
        Winv = self.scaling.Winv
        rhs = rx + self.Gb.T @ Winv(rz)
        if self.E.shape[0]:
            Hi_rhs = self._hsolve(rhs)
            dy = self._ssolve(self.E @ Hi_rhs - ry)
            dx = Hi_rhs - self.HiEt @ dy
        else:
            dx = self._hsolve(rhs)
            dy = np.zeros(0)
        dz = Winv(self.Gb @ dx - Winv(rz))
        return dx, dy, dz

    def _residual(self, rx, ry, rz, dx, dy, dz):
        W = self.scaling.W
        ex = rx - (self.E.T @ dy + self.G.T @ dz)
        ey = ry - self.E @ dx
        ez = rz - (self.G @ dx - W(W(dz)))
        err = max(np.max(np.abs(ex), initial=0), np.max(np.abs(ey), initial=0),
                  np.max(np.abs(self.scaling.Winv(ez)), initial=0))
        return ex, ey, ez, err

    def solve(self, rx, ry, rz, refine=6):
        dx, dy, dz = self._solve_reg(rx, ry, rz)
        ex, ey, ez, err = self._residual(rx, ry, rz, dx, dy, dz)
        for _ in range(refine):
            if err < 1e-15:
                break
            cx, cy, cz = self._solve_reg(ex, ey, ez)
            nx, ny, nz = dx + cx, dy + cy, dz + cz
            fx, fy, fz, ferr = self._residual(rx, ry, rz, nx, ny, nz)
            if not ferr < err:
                break
            dx, dy, dz, ex, ey, ez, err = nx, ny, nz, fx, fy, fz, ferr
        return dx, dy, dz


class _IdentityScaling:
    def __init__(self, cones):
        self.cones = cones

    def W(self, v):
        return v

    def Winv(self, v):
        return v


def _independent_rows(E, e, tol=1e-10):
    """Drop linearly dependent equality rows; None if inconsistent."""
    if E.shape[0] == 0:
        return E, e, np.arange(0)
    q, r, piv = linalg.qr(E.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    scale = max(1.0, float(diag[0])) if diag.size else 1.0
    rank = int(np.sum(diag > tol * scale))
    keep = np.sort(piv[:rank])
    Ek, ek = E[keep], e[keep]
    if rank < E.shape[0]:
        x, *_ = linalg.lstsq(Ek, ek) if rank else (np.zeros(E.shape[1]),)
        if np.max(np.abs(E @ x - e)) > 1e-8 * max(1.0, float(np.max(np.abs(e)))):
            return None
    return Ek, ek, keep


def solve(p, tol=1e-8, max_iter=200, debug=False):
    """Solve a :class:`ConeProblem`.

    Returns a :class:`ConeSolution`; for ``Optimal`` the relative primal and
    dual residuals are below ``tol`` and the duality gap is below
    ``tol * (1 + |obj|)``.  ``NumericFailure`` carries the best iterate
    seen and its residuals.  With ``debug`` the per-iteration trace is kept.
    """
    # iterates approaching the cone boundary can overflow the scaling; every
    # such case is caught by the finiteness checks in the loop
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        return _solve(p, tol, max_iter, debug)


def _solve(p, tol, max_iter, debug):
    Gs, hs, n_lin, dims = p.stacked()
    cones = _Cones(n_lin, dims)
    c = p.c
    n = p.n
    reduced = _independent_rows(p.E, p.e)
    if reduced is None:
        return ConeSolution(Status.INFEASIBLE, np.full(n, np.nan), np.inf, np.inf, 0.0, np.inf, iterations=0)
    E, e, keep = reduced
    m = cones.m
    trace = [] if debug else None

    resx0 = max(1.0, np.linalg.norm(c))
    resy0 = max(1.0, np.linalg.norm(e))
    resz0 = max(1.0, np.linalg.norm(hs))

    ident = cones.identity()
    if m == 0:
        # Pure equality problem: either c lies in the row space or it is unbounded.
        kkt0 = _KKT(Gs, E, _IdentityScaling(cones))
        x, y, _ = kkt0.solve(np.zeros(n), e, np.zeros(0))
        ydual, *_ = linalg.lstsq(E.T, -c) if E.shape[0] else (np.zeros(0),)
        dres = np.linalg.norm(c + E.T @ ydual) / resx0
        pres = np.linalg.norm(E @ x - e) / resy0 if E.shape[0] else 0.0
        if pres > tol:
            return ConeSolution(Status.INFEASIBLE, x, np.inf, pres, dres, np.inf)
        if dres > tol:
            return ConeSolution(Status.UNBOUNDED, x, -np.inf, pres, dres, np.inf)
        return ConeSolution(Status.OPTIMAL, x, float(c @ x), pres, dres, 0.0, y=ydual, z=np.zeros(0), s=np.zeros(0))

    kkt0 = _KKT(Gs, E, _IdentityScaling(cones))
    x, y, zt = kkt0.solve(np.zeros(n), e, hs)
    s = -zt
    _, y, z = kkt0.solve(-c, np.zeros(E.shape[0]), np.zeros(m))
    a = cones.max_violation(s)
    if a >= -1e-8:
        s = s + (1.0 + max(a, 0.0)) * ident
    a = cones.max_violation(z)
    if a >= -1e-8:
        z = z + (1.0 + max(a, 0.0)) * ident
    tau, kappa = 1.0, 1.0

    status = Status.NUMERIC_FAILURE
    best = None
    it = 0
    for it in range(max_iter + 1):
        # residuals of the embedding
        rx = E.T @ y + Gs.T @ z + c * tau
        ry = E @ x - e * tau
        rz = Gs @ x + s - hs * tau
        rt = c @ x + e @ y + hs @ z + kappa
        gap = s @ z
        mu = (gap + tau * kappa) / (cones.degree + 1)
        cx, by_hz = c @ x, e @ y + hs @ z
        pcost, dcost = cx / tau, -by_hz / tau
        pres = max(np.linalg.norm(E @ x - e * tau) / resy0, np.linalg.norm(Gs @ x + s - hs * tau) / resz0) / tau
        dres = np.linalg.norm(E.T @ y + Gs.T @ z + c * tau) / resx0 / tau
        rgap = gap / tau**2
        if debug:
            trace.append(dict(it=it, pcost=pcost, dcost=dcost, gap=rgap, pres=pres, dres=dres,
                              tau=tau, kappa=kappa, resid_term=(x @ rx - y @ ry - z @ rz) / tau**2))
        if pres <= tol and dres <= tol and (rgap <= tol * (1 + abs(pcost)) or abs(pcost - dcost) <= tol * (1 + abs(pcost))):
            status = Status.OPTIMAL
            break
        if by_hz < 0:
            pinf = np.linalg.norm(E.T @ y + Gs.T @ z) / resx0 / (-by_hz)
            if pinf <= tol:
                status = Status.INFEASIBLE
                break
        if cx < 0:
            dinf = max(np.linalg.norm(E @ x) / resy0, np.linalg.norm(Gs @ x + s) / resz0) / (-cx)
            if dinf <= tol:
                status = Status.UNBOUNDED
                break
        score = max(pres, dres, rgap / (1 + abs(pcost)))
        if best is None or score < best[0]:
            best = (score, x / tau, y / tau, z / tau, s / tau, pcost, pres, dres, rgap)
        elif best[0] <= 100.0 * tol and score > 100.0 * best[0]:
            # stalled next to a degenerate optimum; further steps only lose accuracy
            break
        if it == max_iter:
            break

        try:
            W = _Scaling(cones, s, z)
            kkt = _KKT(Gs, E, W)
        except (linalg.LinAlgError, FloatingPointError, ValueError):
            break
        lam = W.lam
        x1, y1, z1 = kkt.solve(-c, e, hs)
        coef = c @ x1 + e @ y1 + hs @ z1 - kappa / tau

        def direction(eta, ds_rhs, dk_rhs):
            r3 = -eta * rz - W.W(cones.div(lam, ds_rhs))
            x0, y0, z0 = kkt.solve(-eta * rx, -eta * ry, r3)
            dtau = (-eta * rt - dk_rhs / tau - (c @ x0 + e @ y0 + hs @ z0)) / coef
            dx, dy, dz = x0 + dtau * x1, y0 + dtau * y1, z0 + dtau * z1
            ds = W.W(cones.div(lam, ds_rhs) - W.W(dz))
            dkappa = (dk_rhs - kappa * dtau) / tau
            return dx, dy, dz, ds, dtau, dkappa

        def max_step(dz, ds, dtau, dkappa):
            amax = min(cones.step_to_boundary(s, ds), cones.step_to_boundary(z, dz))
            if dtau < 0:
                amax = min(amax, -tau / dtau)
            if dkappa < 0:
                amax = min(amax, -kappa / dkappa)
            return amax

        lamsq = cones.prod(lam, lam)
        dxa, dya, dza, dsa, dta, dka = direction(1.0, -lamsq, -tau * kappa)
        alpha_a = min(1.0, max_step(dza, dsa, dta, dka))
        sigma = (1.0 - alpha_a) ** 3
        corr = cones.prod(W.Winv(dsa), W.W(dza))
        dx, dy, dz, ds, dtau, dkappa = direction(
            1.0 - sigma, -lamsq - corr + sigma * mu * ident, -tau * kappa - dta * dka + sigma * mu
        )
        alpha = min(1.0, 0.99 * max_step(dz, ds, dtau, dkappa))
        if debug:
            trace[-1].update(step=alpha, sigma=sigma)
        if not np.isfinite(alpha) or alpha <= 1e-14:
            break
        x, y, z, s = x + alpha * dx, y + alpha * dy, z + alpha * dz, s + alpha * ds
        tau, kappa = tau + alpha * dtau, kappa + alpha * dkappa
        if not (np.all(np.isfinite(x)) and np.isfinite(tau)):
            break

    if status == Status.OPTIMAL:
        xs, ys, zs, ss = x / tau, y / tau, z / tau, s / tau
        yfull = _expand_duals(p, keep, ys)
        return ConeSolution(status, xs, float(c @ xs), pres, dres, rgap, y=yfull, z=zs, s=ss, iterations=it, trace=trace)
    if status == Status.INFEASIBLE:
        yfull = _expand_duals(p, keep, y / -by_hz)
        return ConeSolution(status, np.full(n, np.nan), np.inf, pres, dres, np.inf, y=yfull, z=z / -by_hz,
                            iterations=it, trace=trace)
    if status == Status.UNBOUNDED:
        return ConeSolution(status, x / -cx, -np.inf, pres, dres, np.inf, s=s / -cx, iterations=it, trace=trace)
    if best is None:
        return ConeSolution(status, np.full(n, np.nan), np.nan, np.inf, np.inf, np.inf, iterations=it, trace=trace)
    _, xs, ys, zs, ss, pcost, pres, dres, rgap = best
    return ConeSolution(status, xs, float(pcost), pres, dres, rgap, y=_expand_duals(p, keep, ys), z=zs, s=ss,
                        iterations=it, trace=trace)


def _expand_duals(p, keep, y):
    """Scatter duals of the independent equality rows onto all rows of ``p.E``."""
    out = np.zeros(p.E.shape[0])
    out[keep] = y
    return out


@dataclass(frozen=True)
class KKTReport:
    primal: float
    dual: float
    dual_cone: float
    complementarity: float
    gap: float

    def worst(self):
        return max(self.primal, self.dual, self.dual_cone, self.complementarity, self.gap)


def check_kkt(p, sol):
    """Recompute KKT residuals of ``sol`` for ``p`` from the raw problem data.

    Feasibility residuals are absolute infinity-norm quantities;
    ``complementarity`` and ``gap`` are relative to ``1 + |objective|``.
    """
    x = sol.x
    primal = 0.0
    if p.G.shape[0]:
        primal = max(primal, float(np.max(p.G @ x - p.h)))
    if p.E.shape[0]:
        primal = max(primal, float(np.max(np.abs(p.E @ x - p.e))))
    for soc in p.socs:
        primal = max(primal, soc.violation(x))
    primal = max(primal, 0.0)

    Gs, hs, n_lin, dims = p.stacked()
    cones = _Cones(n_lin, dims)
    z = sol.z if sol.z is not None else np.zeros(cones.m)
    y = sol.y if sol.y is not None else np.zeros(p.E.shape[0])
    grad = p.c + Gs.T @ z + p.E.T @ y
    dual = float(np.max(np.abs(grad))) if grad.size else 0.0
    dual_cone = max(0.0, cones.max_violation(z)) if cones.m else 0.0
    slack = hs - Gs @ x
    pobj = float(p.c @ x)
    complementarity = abs(float(slack @ z)) / (1.0 + abs(pobj)) if cones.m else 0.0
    dobj = float(-hs @ z - p.e @ y)
    gap = abs(pobj - dobj) / (1.0 + abs(pobj))
    return KKTReport(primal, dual, dual_cone, complementarity, gap)
