"""Tolerances and limits shared by every stage of the pipeline."""

from dataclasses import dataclass, fields, replace

from .errors import InvalidInputError


@dataclass(frozen=True)
class Config:
    # densela
    jacobi_tol: float = 1e-12
    eig_tol: float = 1e-9
    pivot_tol: float = 1e-10
    # reduction
    lin_tol: float = 1e-9
    g_snap: float = 1e-12
    aggregate_linear: bool = False
    # polytope
    slack_tol: float = 1e-7
    dim_cap: int = 8
    lp_backend: str = "highs"
    # conicsolve
    solver_tol: float = 1e-8
    max_iter: int = 200
    # a stalled solve is still used when all its residuals are below this
    inaccurate_tol: float = 1e-6
    # hullcore
    max_leaves: int = 5000
    max_depth: int | None = None
    dedup_faces: bool = True
    cross_check_empty: bool = True
    feas_tol: float = 1e-7
    # socmodel
    member_tol: float = 1e-6

    def with_overrides(self, overrides: dict | None) -> "Config":
        if not overrides:
            return self
        known = {f.name for f in fields(self)}
        unknown = set(overrides) - known
        if unknown:
            raise InvalidInputError(f"unknown tolerance keys: {sorted(unknown)}")
        return replace(self, **overrides)


DEFAULT = Config()
