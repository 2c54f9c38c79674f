"""Affine maps ``x -> L x + t``."""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class AffineMap:
    L: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        L = np.atleast_2d(np.asarray(self.L, dtype=float))
        t = np.asarray(self.t, dtype=float).reshape(-1)
        if L.shape[0] != t.shape[0]:
            raise ValueError(f"map shapes disagree: L {L.shape}, t {t.shape}")
        if not (np.all(np.isfinite(L)) and np.all(np.isfinite(t))):
            raise ValueError("affine map has non-finite entries")
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "t", t)

    @classmethod
    def identity(cls, n):
        return cls(np.eye(n), np.zeros(n))

    @property
    def n_in(self):
        return self.L.shape[1]

    @property
    def n_out(self):
        return self.L.shape[0]

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 2:
            return x @ self.L.T + self.t
        return self.L @ x + self.t

    def compose(self, inner):
        """``self o inner``: apply ``inner`` first."""
        return AffineMap(self.L @ inner.L, self.L @ inner.t + self.t)

    def is_identity(self, tol=0.0):
        return (
            self.n_in == self.n_out
            and np.max(np.abs(self.L - np.eye(self.n_in)), initial=0.0) <= tol
            and np.max(np.abs(self.t), initial=0.0) <= tol
        )

    def is_invertible(self, tol=1e-12):
        if self.n_in != self.n_out:
            return False
        s = np.linalg.svd(self.L, compute_uv=False)
        return s.size == 0 or s[-1] > tol * max(1.0, s[0])

    def inverse(self):
        Li = np.linalg.inv(self.L)
        return AffineMap(Li, -Li @ self.t)
