"""Small dense linear algebra: Jacobi eigensolver and rank-revealing elimination.

Matrices are plain 2-D ``numpy`` float arrays; the routines here are written
for the handful-of-rows problems that come out of quadric reduction, not for
speed on large inputs.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InconsistentSystemError, InvalidInputError


def _as_matrix(m):
    m = np.asarray(m, dtype=float)
    if m.ndim != 2:
        raise InvalidInputError("expected a 2-D array")
    if not np.all(np.isfinite(m)):
        raise InvalidInputError("matrix has non-finite entries")
    return m


def sym_eigen(m, tol=1e-12, sym_tol=1e-9, max_sweeps=100):
    """Eigendecomposition of a real symmetric matrix by cyclic Jacobi rotations.

    Parameters
    ----------
    m : array_like, shape (n, n)
        Symmetric input.
    tol : float
        Sweeps stop once the off-diagonal Frobenius norm is at most
        ``tol * ||m||_F``.
    sym_tol : float
        Allowed asymmetry, relative to ``max(1, max|m|)``.

    Returns
    -------
    sigma : ndarray, shape (n,)
        Eigenvalues in descending order.
    V : ndarray, shape (n, n)
        Orthogonal matrix whose *rows* are the eigenvectors, so that
        ``V.T @ diag(sigma) @ V == m``.
    """
    a = _as_matrix(m)
    n, k = a.shape
    if n != k:
        raise InvalidInputError(f"matrix is not square: {a.shape}")
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    if a.size and np.max(np.abs(a - a.T)) > sym_tol * scale:
        raise InvalidInputError("matrix is not symmetric")
    a = 0.5 * (a + a.T)
    U = np.eye(n)
    fro = np.linalg.norm(a)
    threshold = tol * fro
    for _ in range(max_sweeps):
        off = np.sqrt(2.0) * np.linalg.norm(a[np.triu_indices(n, 1)])
        if off <= threshold:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                diff = a[q, q] - a[p, p]
                if abs(diff) > 1e150 * abs(apq):
                    # rotation angle underflows; the entry is negligible
                    a[p, q] = a[q, p] = 0.0
                    continue
                theta = diff / (2.0 * apq)
                if theta == 0.0:
                    t = 1.0
                else:
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                # a <- R^T a R with R the (p, q) Givens rotation
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap = a[p, :].copy()
                aq = a[q, :].copy()
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                a[p, q] = a[q, p] = 0.0
                up = U[:, p].copy()
                uq = U[:, q].copy()
                U[:, p] = c * up - s * uq
                U[:, q] = s * up + c * uq
    sigma = np.diag(a).copy()
    order = np.argsort(-sigma, kind="stable")
    return sigma[order], U[:, order].T.copy()


@dataclass(frozen=True)
class RowReduction:
    """Parametrization ``x[basic] = C @ x[nonbasic] + h`` of ``M x = f``."""

    rank: int
    basic: tuple
    nonbasic: tuple
    C: np.ndarray
    h: np.ndarray
    pivot_rows: tuple

    def embed(self):
        """Return ``(E, e)`` with ``x = E @ x_N + e`` over the full coordinates."""
        n = len(self.basic) + len(self.nonbasic)
        E = np.zeros((n, len(self.nonbasic)))
        e = np.zeros(n)
        for r, j in enumerate(self.basic):
            E[j, :] = self.C[r]
            e[j] = self.h[r]
        for r, j in enumerate(self.nonbasic):
            E[j, r] = 1.0
        return E, e


def row_reduce(m, rhs, tol=1e-10, consistency_tol=1e-8):
    """Gauss-Jordan elimination with complete pivoting.

    The pivot at each step is the largest remaining entry in absolute value;
    entries at or below ``tol * max(1, max|m|)`` count as zero.  Raises
    :class:`InconsistentSystemError` when a zero row meets a right-hand side
    larger than ``consistency_tol * max(1, max|f|)``.
    """
    M = _as_matrix(m).copy()
    f = np.asarray(rhs, dtype=float).reshape(-1).copy()
    rows, n = M.shape
    if f.shape[0] != rows:
        raise InvalidInputError("rhs length does not match the row count")
    scale = max(1.0, float(np.max(np.abs(M)))) if M.size else 1.0
    zero = tol * scale
    row_ids = list(range(rows))
    free_rows = list(range(rows))
    free_cols = list(range(n))
    pivots = []
    while free_rows and free_cols:
        sub = np.abs(M[np.ix_(free_rows, free_cols)])
        flat = int(np.argmax(sub))
        i, j = divmod(flat, len(free_cols))
        if sub[i, j] <= zero:
            break
        r, c = free_rows[i], free_cols[j]
        f[r] /= M[r, c]
        M[r] /= M[r, c]
        for other in range(rows):
            if other != r and M[other, c] != 0.0:
                factor = M[other, c]
                M[other] -= factor * M[r]
                f[other] -= factor * f[r]
                M[other, c] = 0.0
        pivots.append((r, c))
        free_rows.remove(r)
        free_cols.remove(c)
    fscale = max(1.0, float(np.max(np.abs(f)))) if f.size else 1.0
    for r in free_rows:
        if abs(f[r]) > consistency_tol * fscale:
            raise InconsistentSystemError(f"row {row_ids[r]} reduces to 0 = {f[r]:.3g}")
    pivots.sort(key=lambda rc: rc[1])
    basic = tuple(c for _, c in pivots)
    nonbasic = tuple(c for c in range(n) if c not in basic)
    C = np.zeros((len(basic), len(nonbasic)))
    h = np.zeros(len(basic))
    for k, (r, _) in enumerate(pivots):
        C[k] = -M[r, list(nonbasic)]
        h[k] = f[r]
    return RowReduction(len(basic), basic, nonbasic, C, h, tuple(sorted(r for r, _ in pivots)))
