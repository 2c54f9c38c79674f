import itertools

import numpy as np
import pytest

from quadhull.affine import AffineMap
from quadhull.conicsolve import Soc
from quadhull.config import Config
from quadhull.corpus import box, hyperboloid_family
from quadhull.errors import BudgetExceeded, InfeasibleError, InternalInconsistency, InvalidInputError
from quadhull.hullcore import (
    CaseTag,
    _Builder,
    base_one_sided,
    base_single_square,
    build_hull,
    build_hull_report,
    classify,
    classify_counts,
    disjunct_union,
    facet_restrict,
    reverse_convex_hull_via_edges,
    ruled_line_witness,
)
from quadhull.hullrep import ConvexSocLeaf, Disjunction, EmptySet, Intersection, VPolyLeaf, count_leaves
from quadhull.oracle import brute_max, sample_surface
from quadhull.polytope import HPolytope, facets
from quadhull.reduction import CanonicalSet, QuadInstance, canonicalize
from quadhull.socmodel import flatten, optimize


def canonical(counts, g, P):
    return CanonicalSet(*counts, float(g), P, AffineMap.identity(sum(counts)))


def support(h, c):
    return optimize(flatten(h), np.asarray(c, dtype=float)).value


def directions(k=16):
    t = np.linspace(0, 2 * np.pi, k, endpoint=False)
    return np.c_[np.cos(t), np.sin(t)]


# --- classification --------------------------------------------------------------


@pytest.mark.parametrize("counts,tag", [
    ((2, 0, 1, 0), CaseTag.BASE_ONE_SIDED),
    ((1, 1, 1, 0), CaseTag.RECURSE_FACETS),
    ((2, 1, 0, 0), CaseTag.RECURSE_FACETS),
    ((1, 2, 0, 0), CaseTag.BASE_SINGLE_SQUARE),
    ((0, 0, 0, 0), CaseTag.BASE_POINT),
    ((0, 0, 1, 3), CaseTag.BASE_LINEAR),
    ((0, 0, 2, 0), CaseTag.RECURSE_FACETS),
    ((1, 0, 0, 1), CaseTag.RECURSE_FACETS),
    ((0, 3, 0, 0), CaseTag.BASE_ONE_SIDED),
])
def test_classification_examples(counts, tag):
    assert classify_counts(*counts, g=1.0 if counts != (0, 0, 0, 0) else 0.0).tag == tag


def test_constant_equation():
    assert classify_counts(0, 0, 0, 2, g=1.0).tag == CaseTag.EMPTY
    assert classify_counts(0, 0, 0, 2, g=0.0).tag == CaseTag.BASE_LINEAR
    assert classify_counts(0, 0, 0, 0, g=0.0).tag == CaseTag.BASE_POINT


def test_empty_polytope_first():
    assert classify_counts(2, 1, 0, 0, 1.0, p_empty=True).tag == CaseTag.EMPTY


def test_classify_rejects_negative_g():
    with pytest.raises(InvalidInputError):
        classify_counts(1, 0, 0, 0, -1.0)


def test_classify_empty_canonical_polytope():
    c = canonical((2, 0, 0, 0), 1.0, HPolytope([[1.0, 0], [-1.0, 0]], [-1.0, 0.0]))
    assert classify(c).tag == CaseTag.EMPTY


def test_table_is_total():
    for counts in itertools.product(range(6), repeat=4):
        if sum(counts) > 5:
            continue
        for g in (0.0, 1.0):
            case = classify_counts(*counts, g)
            assert isinstance(case.tag, CaseTag)
            if case.tag == CaseTag.RECURSE_FACETS:
                # every recursing case is ruled: a free, a trade-off or a line direction exists
                n_qp, n_qm, n_l, n_o = counts
                assert n_o >= 1 or n_l >= 2 or (n_l == 1 and n_qp and n_qm) or (n_qp >= 2 and n_qm >= 1)


# --- base cases --------------------------------------------------------------------


def test_one_sided_interval():
    c = canonical((1, 0, 0, 0), 4.0, HPolytope([[1.0], [-1.0]], [5.0, 5.0]))
    h = base_one_sided(c)
    assert isinstance(h, Intersection)
    rev = h.parts[1]
    np.testing.assert_allclose(np.sort(rev.vertices[:, 0]), [-5, 5])
    assert abs(support(h, [1.0]) - 2) < 1e-7
    assert abs(support(h, [-1.0]) - 2) < 1e-7


def test_one_sided_empty_when_rhs_negative():
    # w^2 + y = 0 with y in [1, 2]: sum of squares would be negative
    P = HPolytope([[1.0, 0], [-1, 0], [0, 1], [0, -1]], [1.0, 1.0, 2.0, -1.0])
    assert isinstance(base_one_sided(canonical((1, 0, 1, 0), 0.0, P)), EmptySet)


def test_one_sided_negative_squares_positive_rhs_empty():
    assert isinstance(base_one_sided(canonical((0, 2, 0, 0), 1.0, box(2))), EmptySet)


def test_one_sided_origin():
    h = base_one_sided(canonical((2, 0, 0, 0), 0.0, box(2)))
    assert isinstance(h, VPolyLeaf) and np.all(h.vertices == 0)


def test_paraboloid_matches_oracle():
    # w1^2 + w2^2 + y = 1 on [-1, 1]^3
    inst = QuadInstance(np.diag([1.0, 1.0, 0.0]), [0, 0, 1.0], 1.0, box(3))
    assert build_hull_report(inst).trace[0].split()[3] == "BaseOneSided"
    p = flatten(build_hull(inst))
    rng = np.random.default_rng(5)
    for c in rng.normal(size=(16, 3)):
        c /= np.linalg.norm(c)
        ref = brute_max(inst, c).value
        assert abs(optimize(p, c).value - ref) <= 1e-4


def test_single_square_hyperbola():
    h = base_single_square(canonical((1, 1, 0, 0), 1.0, box(2, 2)))
    assert abs(support(h, [1, 0]) - 2) < 1e-6
    assert abs(support(h, [0, 1]) - np.sqrt(3)) < 1e-6


def test_single_square_cross_lines():
    h = base_single_square(canonical((1, 1, 0, 0), 0.0, box(2)))
    for c in ([1, 1], [1, -1], [-1, 1], [-1, -1]):
        assert abs(support(h, c) - 2) < 1e-6


def test_single_square_no_positive_square():
    assert isinstance(base_single_square(canonical((0, 2, 0, 0), 1.0, box(2))), EmptySet)


def test_base_builders_reject_other_counts():
    with pytest.raises(InvalidInputError):
        base_single_square(canonical((2, 1, 0, 0), 1.0, box(3)))
    with pytest.raises(InvalidInputError):
        base_one_sided(canonical((1, 1, 1, 0), 1.0, box(3)))


# --- reverse-convex hulls ---------------------------------------------------------


def test_reverse_convex_1d():
    soc = Soc.make([[1.0]], [0.0], [0.0], 1.0)
    V = reverse_convex_hull_via_edges(HPolytope([[1.0], [-1.0]], [2.0, 0.0]), soc)
    np.testing.assert_allclose(np.sort(V.vertices[:, 0]), [1, 2])


def test_reverse_convex_square_corners_dominate():
    soc = Soc.make(np.eye(2), [0.0, 0.0], [0.0, 0.0], 1.2)
    V = reverse_convex_hull_via_edges(box(2), soc)
    assert V.vertices.shape[0] == 4
    np.testing.assert_allclose(np.abs(V.vertices), 1.0)


def test_reverse_convex_crossings():
    # disk of radius 1.2 removed from the square [0, 2]^2 around the origin
    P = HPolytope([[1.0, 0], [-1, 0], [0, 1], [0, -1]], [2.0, 0.0, 2.0, 0.0])
    soc = Soc.make(np.eye(2), [0.0, 0.0], [0.0, 0.0], 1.2)
    V = reverse_convex_hull_via_edges(P, soc)
    got = {tuple(np.round(v, 9)) for v in V.vertices}
    assert got == {(1.2, 0.0), (0.0, 1.2), (2.0, 0.0), (0.0, 2.0), (2.0, 2.0)}


def test_reverse_convex_nowhere_violated():
    soc = Soc.make(np.eye(2), [0.0, 0.0], [0.0, 0.0], 5.0)
    assert reverse_convex_hull_via_edges(box(2), soc).empty


# --- disjunctions ------------------------------------------------------------------


def test_union_of_points():
    h = disjunct_union([VPolyLeaf(np.array([[0.0]])), VPolyLeaf(np.array([[1.0]])), EmptySet(1)])
    assert isinstance(h, Disjunction) and len(h.parts) == 2
    assert abs(support(h, [1.0]) - 1) < 1e-7 and abs(support(h, [-1.0])) < 1e-7


def test_union_of_touching_segments():
    h = disjunct_union([VPolyLeaf(np.array([[0.0], [1.0]])), VPolyLeaf(np.array([[1.0], [2.0]]))])
    assert abs(support(h, [1.0]) - 2) < 1e-7 and abs(support(h, [-1.0])) < 1e-7


def test_stadium():
    def disk(cx):
        P = HPolytope(np.vstack([np.eye(2), -np.eye(2)]), [cx + 1, 1, 1 - cx, 1])
        return ConvexSocLeaf(2, P.A, P.b, socs=[Soc.make(np.eye(2), [-cx, 0.0], [0.0, 0.0], 1.0)])
    h = disjunct_union([disk(-2.0), disk(2.0)])
    assert abs(support(h, [1, 0]) - 3) < 1e-7
    assert abs(support(h, [0, 1]) - 1) < 1e-7
    assert abs(support(h, [1, 1]) - (2 + np.sqrt(2))) < 1e-7


def test_union_of_nothing():
    assert isinstance(disjunct_union([EmptySet(2)]), EmptySet)


# --- facet restriction -------------------------------------------------------------


def test_facet_of_square():
    inst = QuadInstance(np.eye(2), [0, 0], 2.0, box(2))
    F = facets(inst.P)
    i = next(k for k in range(F.m) if np.allclose(F.A[k], [1, 0]))
    child, emb = facet_restrict(inst, F, i)
    assert child.n == 1
    np.testing.assert_allclose(child.Q, [[1.0]])
    assert abs(child.g - 1) < 1e-15
    np.testing.assert_allclose(emb(np.array([0.3])), [1.0, 0.3])


def test_facet_pivot():
    inst = QuadInstance(np.eye(2), [0, 0], 1.0, box(2))
    P = HPolytope([[0.0, 2.0], [0.0, -1.0], [1.0, 0.0], [-1.0, 0.0]], [2.0, 1.0, 1.0, 1.0])
    _, emb = facet_restrict(inst, P, 0)
    np.testing.assert_allclose(emb.L, [[1.0], [0.0]])
    np.testing.assert_allclose(emb.t, [0.0, 1.0])


def test_hyperboloid_facet_values():
    inst = hyperboloid_family(3)
    F = facets(inst.P)
    rng = np.random.default_rng(1)
    for i in range(F.m):
        child, emb = facet_restrict(inst, F, i)
        U = rng.uniform(-2, 2, size=(50, 2))
        X = emb(U)
        np.testing.assert_allclose(F.A[i] @ X.T, F.b[i], atol=1e-12)
        np.testing.assert_allclose(inst.residual(X), child.residual(U), atol=1e-12)


# --- ruled-surface witness ---------------------------------------------------------


def _line_residuals(c, p, u, v):
    d = np.r_[u, v]
    return [c.residual(p + t * d) for t in (-10, -1, 1, 10)]


def test_classic_ruling():
    c = canonical((2, 1, 0, 0), 1.0, box(3, 2))
    u, v = ruled_line_witness(c, np.array([1.0, 0.0, 0.0]))
    np.testing.assert_allclose(np.r_[u, v], [0, 1, 1], atol=1e-15)


def test_ruling_at_origin():
    c = canonical((2, 1, 0, 0), 0.0, box(3))
    u, v = ruled_line_witness(c, np.zeros(3))
    np.testing.assert_array_equal(np.r_[u, v], [1, 0, 1])
    assert max(abs(r) for r in _line_residuals(c, np.zeros(3), u, v)) == 0


def test_ruling_random_points():
    c = canonical((2, 1, 0, 0), 1.0, box(3, 2))
    for p in sample_surface(c.as_instance(), density=20).points[::7]:
        u, v = ruled_line_witness(c, p)
        assert abs(np.linalg.norm(u) - 1) < 1e-12
        assert max(abs(r) for r in _line_residuals(c, p, u, v)) <= 1e-8


def test_ruling_off_surface():
    c = canonical((2, 1, 0, 0), 1.0, box(3, 2))
    with pytest.raises(InvalidInputError):
        ruled_line_witness(c, np.array([0.5, 0.0, 0.0]))
    with pytest.raises(InvalidInputError):
        ruled_line_witness(canonical((1, 1, 0, 0), 1.0, box(2)), np.array([1.0, 0.0]))


# --- the recursion -----------------------------------------------------------------


def test_circle_build():
    inst = QuadInstance(np.eye(2), [0, 0], 1.0, box(2))
    rep = build_hull_report(inst)
    assert rep.trace == ["dim 2 (2,0,0,0) BaseOneSided one-sided base lemma"]
    assert abs(support(rep.hull, [1, 0]) - 1) < 1e-7


def test_hyperbola_rectangle():
    h = build_hull(QuadInstance(np.diag([1.0, -1.0]), [0, 0], 1.0, box(2, 2)))
    assert abs(support(h, [0, 1]) - np.sqrt(3)) < 1e-6
    assert abs(support(h, [1, 1]) - (2 + np.sqrt(3))) < 1e-6


def test_hyperboloid_recurses_on_six_facets():
    rep = build_hull_report(hyperboloid_family(3))
    assert rep.trace[0].split()[3] == "RecurseFacets"
    assert sum(1 for line in rep.trace if line.startswith("  dim")) == 6
    assert isinstance(rep.hull, Disjunction) and len(rep.hull.parts) == 6


def test_lowdim_reports_affine_hull():
    inst = QuadInstance(np.eye(3), [0, 0, 0], 1.0,
                        box(3).with_rows([[-0.5, 0, 1], [0.5, 0, -1]], [0.2, -0.2]))
    rep = build_hull_report(inst)
    assert rep.trace[0] == "affine hull: dimension 3 -> 2"


def test_empty_surface_raises():
    with pytest.raises(InfeasibleError):
        build_hull(QuadInstance(np.eye(2), [0, 0], 5.0, box(2)))


def test_leaf_budget():
    with pytest.raises(BudgetExceeded):
        build_hull(hyperboloid_family(3), Config(max_leaves=3))


def test_depth_budget():
    with pytest.raises(BudgetExceeded):
        build_hull(hyperboloid_family(3), Config(max_depth=0))


def test_depth_bounded_by_dimension():
    rep = build_hull_report(hyperboloid_family(4))
    depth = max((len(line) - len(line.lstrip())) // 2 for line in rep.trace)
    assert depth <= 4


def test_face_dedup_keeps_supports():
    # (2,2) signature: facets are ruled again, so two-dimensional faces are reached twice
    inst = QuadInstance(np.diag([1.0, 1.0, -1.0, -1.0]), np.zeros(4), 1.0, box(4, 2))
    a = build_hull_report(inst)
    b = build_hull_report(inst, Config(dedup_faces=False))
    assert a.leaves < b.leaves
    assert any("duplicate face" in line for line in a.trace)
    pa, pb = flatten(a.hull), flatten(b.hull)
    for c in np.random.default_rng(0).normal(size=(4, 4)):
        assert abs(optimize(pa, c).value - optimize(pb, c).value) < 1e-6


def test_cross_check_detects_false_emptiness():
    inst = QuadInstance(np.eye(2), [0, 0], 1.0, box(2))
    b = _Builder(inst, Config())
    with pytest.raises(InternalInconsistency) as err:
        b.cross_check(canonicalize(inst), 0)
    assert err.value.diagnostics["counts"] == (2, 0, 0, 0)


def test_build_is_deterministic():
    a = build_hull_report(hyperboloid_family(3))
    b = build_hull_report(hyperboloid_family(3))
    assert a.trace == b.trace
    assert flatten(a.hull).same_data(flatten(b.hull))


def test_aggregate_linear_agrees():
    inst = QuadInstance(np.zeros((2, 2)), [1.0, 2.0], 0.5, box(2))
    plain = build_hull_report(inst)
    agg = build_hull_report(inst, Config(aggregate_linear=True))
    assert plain.trace[0].split()[3] == "RecurseFacets"
    assert agg.trace[0].split()[3] == "BaseLinear"
    for c in directions(8):
        assert abs(support(plain.hull, c) - support(agg.hull, c)) < 1e-6


def test_intersection_matches_monolithic_hull():
    # compare the two-piece description with the hull of dense surface samples
    inst = QuadInstance(np.diag([1.0, -1.0]), [0.3, 0.0], 1.0, box(2, 2))
    h = build_hull(inst)
    pts = sample_surface(inst, density=2000).points
    for c in directions():
        assert abs(support(h, c) - np.max(pts @ c)) <= 1e-5
