import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from quadhull.config import Config
from quadhull.corpus import box
from quadhull.errors import CapacityError, InfeasibleError, InternalInconsistency, UnboundedPolytopeError
from quadhull.polytope import (
    HPolytope,
    affine_hull,
    bounding_box,
    brute_force_vertices,
    chebyshev_center,
    facets,
    interior_point,
    irredundant_rows,
    is_bounded,
    is_empty,
    lp,
    vertices_and_edges,
)


def random_cut_box(seed, n):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, 4))
    cuts = rng.normal(size=(k, n))
    cuts /= np.linalg.norm(cuts, axis=1, keepdims=True)
    P = box(n)
    return P.with_rows(cuts, rng.uniform(0.2, 0.8, size=k))


def simplex(n):
    return HPolytope(np.vstack([-np.eye(n), np.ones((1, n))]), np.r_[np.zeros(n), 1.0])


def test_square_bounded(square):
    assert is_bounded(square)


def test_ray_unbounded():
    assert not is_bounded(HPolytope([[-1.0]], [0.0]))
    with pytest.raises(UnboundedPolytopeError):
        bounding_box(HPolytope([[-1.0]], [0.0]))


@pytest.mark.parametrize("seed", range(5))
def test_cut_box_bounded(seed):
    assert is_bounded(random_cut_box(seed, 3))


def test_empty_polytope():
    P = HPolytope([[1.0], [-1.0]], [-1.0, 0.0])
    assert is_empty(P)
    with pytest.raises(InfeasibleError):
        bounding_box(P)
    with pytest.raises(InfeasibleError):
        chebyshev_center(P)


def test_zero_row_negative_rhs_is_infeasible():
    with pytest.raises(InfeasibleError):
        HPolytope([[0.0, 0.0]], [-1.0]).normalized()


def test_lp_conic_backend_matches_highs():
    P = random_cut_box(2, 3)
    c = np.array([0.3, -1.0, 0.5])
    a = lp(c, P.A, P.b, backend="highs")
    b = lp(c, P.A, P.b, backend="conic")
    assert a[0] == b[0] == "optimal"
    assert abs(a[2] - b[2]) < 1e-7


def test_affine_hull_sandwich():
    A = np.array([[1.0, 1.0], [-1.0, -1.0], [-1, 0], [1, 0], [0, -1], [0, 1]])
    b = np.array([1.0, -1.0, 0, 1, 0, 1])
    h = affine_hull(HPolytope(A, b))
    assert h.dim == 1
    assert h.M.shape[0] == 2  # both halves of the sandwich
    # the reduced polytope is a segment whose endpoints map to (1,0) and (0,1)
    lo, hi = bounding_box(h.reduced)
    ends = np.sort(h.embedding(np.array([lo, hi])), axis=0)
    np.testing.assert_allclose(ends, [[0, 0], [1, 1]], atol=1e-9)
    np.testing.assert_allclose(h.embedding(np.array([lo, hi])).sum(axis=1), 1.0, atol=1e-12)


def test_affine_hull_full_dimensional(square):
    h = affine_hull(square)
    assert h.dim == 2 and h.M.shape[0] == 0
    assert h.embedding.is_identity()


def test_affine_hull_simplex_face():
    A = np.vstack([-np.eye(3), np.ones((1, 3)), -np.ones((1, 3))])
    P = HPolytope(A, np.r_[np.zeros(3), 1.0, -1.0])
    h = affine_hull(P)
    assert h.dim == 2
    V = vertices_and_edges(h.reduced).vertices
    mapped = h.embedding(V)
    assert len(mapped) == 3
    np.testing.assert_allclose(mapped[np.lexsort(mapped.T)], np.eye(3)[::-1][np.lexsort(np.eye(3)[::-1].T)], atol=1e-9)


def test_affine_hull_point():
    P = HPolytope(np.vstack([np.eye(2), -np.eye(2)]), [1.0, 2.0, -1.0, -2.0])
    h = affine_hull(P)
    assert h.dim == 0
    np.testing.assert_allclose(h.embedding(np.zeros(0)), [1, 2])


def test_duplicate_row_removed(square):
    P = square.with_rows([[1.0, 0.0]], [1.0])
    assert facets(P).m == 4


def test_slack_cut_removed(square):
    P = square.with_rows([[1.0, 1.0]], [5.0])
    assert facets(P).m == 4
    assert irredundant_rows(P) == [0, 1, 2, 3]


@pytest.mark.parametrize("seed", range(4))
def test_facets_have_relative_interior(seed):
    P = random_cut_box(seed, 3)
    F = facets(P)
    for i in range(F.m):
        # largest ball, within facet i, that keeps away from every other facet
        others = [j for j in range(F.m) if j != i]
        A_ub = np.hstack([F.A[others], np.ones((len(others), 1))])
        A_eq = np.hstack([F.A[i:i + 1], [[0.0]]])
        st, _, v = lp(np.r_[np.zeros(3), -1.0], A_ub, F.b[others], A_eq, F.b[i:i + 1])
        assert st == "optimal" and -v > 1e-7


@pytest.mark.parametrize("seed", range(4))
def test_facets_are_minimal(seed):
    P = random_cut_box(seed, 3)
    F = facets(P)
    for i in range(F.m):
        # dropping row i must let its value exceed b_i
        rest = F.without_row(i)
        st, _, v = lp(-F.A[i], rest.A, rest.b)
        assert st == "unbounded" or -v > F.b[i] + 1e-7


@pytest.mark.parametrize("n,nv,ne", [(1, 2, 1), (2, 4, 4), (3, 8, 12), (4, 16, 32)])
def test_box_vertices_and_edges(n, nv, ne):
    V = vertices_and_edges(box(n))
    assert V.vertices.shape == (nv, n)
    assert len(V.edges) == ne


def test_simplex_vertices_and_edges():
    V = vertices_and_edges(simplex(3))
    assert V.vertices.shape[0] == 4 and len(V.edges) == 6


def test_dimension_cap():
    with pytest.raises(CapacityError):
        vertices_and_edges(box(3), Config(dim_cap=2))


def test_degenerate_apex():
    # square pyramid: the apex lies on four facets
    A = np.array([[0, 0, -1.0], [1, 0, 1], [-1, 0, 1], [0, 1, 1], [0, -1, 1]])
    V = vertices_and_edges(HPolytope(A, [0.0, 1, 1, 1, 1]))
    assert V.vertices.shape[0] == 5 and len(V.edges) == 8


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(2, 4))
def test_vertices_match_brute_force(seed, n):
    P = random_cut_box(seed, n)
    V = vertices_and_edges(P).vertices
    W = brute_force_vertices(P)
    assert V.shape == W.shape
    d = np.linalg.norm(V[:, None, :] - W[None, :, :], axis=2)
    assert np.all(d.min(axis=1) < 1e-7)
    # every vertex is feasible and has n independent active rows
    Pn = P.normalized()
    for v in V:
        assert np.all(Pn.A @ v <= Pn.b + 1e-8)
        act = np.abs(Pn.slack(v)) <= 1e-8
        assert np.linalg.matrix_rank(Pn.A[act]) == n


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_representations_agree(seed):
    # LP maxima over the H-representation equal maxima over the vertices
    P = random_cut_box(seed, 3)
    V = vertices_and_edges(P).vertices
    rng = np.random.default_rng(seed)
    for c in rng.normal(size=(5, 3)):
        _, _, v = lp(-c, P.A, P.b)
        assert abs(-v - np.max(V @ c)) < 1e-7


def test_edges_join_adjacent_vertices():
    P = random_cut_box(11, 3)
    VP = vertices_and_edges(P)
    Pn = P.normalized()
    for i, j in VP.edges:
        mid = 0.5 * (VP.vertices[i] + VP.vertices[j])
        act = np.abs(Pn.slack(mid)) <= 1e-8
        assert np.linalg.matrix_rank(Pn.A[act]) == 2


def test_interior_point_square():
    unit = HPolytope(np.vstack([np.eye(2), -np.eye(2)]), [1.0, 1.0, 0.0, 0.0])
    x, r = interior_point(unit)
    np.testing.assert_allclose(x, [0.5, 0.5], atol=1e-9)
    assert abs(r - 0.5) < 1e-9


def test_interior_point_segment_in_plane():
    A = np.array([[1.0, 0], [-1, 0], [0, 1], [0, -1]])
    with pytest.raises(InternalInconsistency):
        interior_point(HPolytope(A, [1.0, 1.0, 0.0, 0.0]))


@pytest.mark.parametrize("seed", range(5))
def test_interior_point_slacks(seed):
    P = random_cut_box(seed, 3).normalized()
    x, r = interior_point(P)
    assert np.all(P.slack(x) >= r - 1e-9)
