import numpy as np
import pytest

from quadhull.conicsolve import Soc
from quadhull.corpus import box
from quadhull.hullcore import build_hull, disjunct_union
from quadhull.hullrep import ConvexSocLeaf, Disjunction, VPolyLeaf
from quadhull.oracle import sample_surface, subsample
from quadhull.reduction import QuadInstance
from quadhull.socmodel import (
    SocProgram,
    export_text,
    flatten,
    import_cbf,
    membership,
    optimize,
    stats,
    support_per_leaf,
)


@pytest.fixture(scope="module")
def disk():
    return flatten(build_hull(QuadInstance(np.eye(2), [0, 0], 1.0, box(2))))


@pytest.fixture(scope="module")
def hyperbola_hull():
    return build_hull(QuadInstance(np.diag([1.0, -1.0]), [0, 0], 1.0, box(2, 2)))


def test_square_vertices_leaf():
    p = flatten(VPolyLeaf(np.array([[0.0, 0], [1, 0], [0, 1], [1, 1]])))
    mus = [name for name in p.names if "mu" in name]
    assert len(mus) == 4
    # x = sum mu_k v_k (2 rows) and sum mu = 1
    assert p.A_eq.shape[0] == 3 and p.A_in.shape[0] == 4
    assert abs(optimize(p, [1, 1]).value - 2) < 1e-7


def test_two_point_disjunction():
    h = Disjunction([VPolyLeaf(np.array([[0.0]])), VPolyLeaf(np.array([[1.0]]))])
    p = flatten(h)
    assert sum("lam" in name for name in p.names) == 2
    assert abs(optimize(p, [1.0]).value - 1) < 1e-7
    assert abs(optimize(p, [-1.0]).value) < 1e-7
    assert membership(p, [0.5]).member and not membership(p, [1.5]).member


def test_disk_supports(disk):
    assert abs(optimize(disk, [1, 0]).value - 1) < 1e-6
    assert abs(optimize(disk, [1, 1]).value - np.sqrt(2)) < 1e-6


def test_hyperbola_rectangle(hyperbola_hull):
    p = flatten(hyperbola_hull)
    assert abs(optimize(p, [0, 1]).value - np.sqrt(3)) < 1e-6
    r = optimize(p, [1, 0])
    assert abs(r.value - 2) < 1e-6 and abs(r.point[0] - 2) < 1e-6


def test_rejects_bad_objective(disk):
    from quadhull.errors import InvalidInputError
    with pytest.raises(InvalidInputError):
        optimize(disk, [1, 0, 0])
    with pytest.raises(InvalidInputError):
        membership(disk, [np.nan, 0])


def test_membership(disk):
    assert membership(disk, [0.0, 0.0]).member
    out = membership(disk, [1.1, 0.0])
    assert not out.member and abs(out.violation - 0.1) < 1e-6
    np.testing.assert_allclose(out.nearest, [1, 0], atol=1e-6)


def test_membership_violation_is_max_norm_distance(disk):
    out = membership(disk, [1.0, 1.0])
    assert abs(out.violation - (1 - np.sqrt(0.5))) < 1e-6


def test_membership_on_cone_apex():
    # a degenerate member: the only feasible point of its leaf is the apex
    h = build_hull(QuadInstance(np.diag([1.0, -1.0]), [0, 0], 0.0, box(2)))
    assert membership(flatten(h), [0.0, 0.0]).member


def test_samples_are_members(disk):
    inst = QuadInstance(np.eye(2), [0, 0], 1.0, box(2))
    for x in subsample(sample_surface(inst), 40, seed=1):
        assert membership(disk, x).member


def test_optimizers_are_members(hyperbola_hull):
    p = flatten(hyperbola_hull)
    for c in np.random.default_rng(2).normal(size=(10, 2)):
        assert membership(p, optimize(p, c).point).member


def test_per_leaf_matches_flat(hyperbola_hull):
    p = flatten(hyperbola_hull)
    for c in np.random.default_rng(3).normal(size=(8, 2)):
        a = optimize(p, c).value
        assert abs(support_per_leaf(hyperbola_hull, c).value - a) < 1e-6
        assert abs(support_per_leaf(hyperbola_hull, c, threads=2).value - a) < 1e-6


def test_adding_disjuncts_is_monotone():
    rng = np.random.default_rng(4)
    parts = [VPolyLeaf(rng.normal(size=(3, 2)))]
    c = rng.normal(size=2)
    last = optimize(flatten(parts[0]), c).value
    for _ in range(4):
        parts.append(VPolyLeaf(rng.normal(size=(3, 2))))
        v = optimize(flatten(disjunct_union(parts)), c).value
        assert v >= last - 1e-7
        last = v


def test_stats():
    assert stats(flatten(VPolyLeaf(np.zeros((1, 2)))))["depth"] == 1
    h = build_hull(QuadInstance(np.diag([1.0, 1.0, -1.0]), np.zeros(3), 1.0, box(3, 2)))
    st = stats(flatten(h))
    assert st["original_variables"] == 3 and st["leaves"] <= 6 * 4
    assert st["soc_rows"] == sum(s.A.shape[0] + 1 for s in flatten(h).socs)


def test_names_encode_tree_path(hyperbola_hull):
    p = flatten(hyperbola_hull)
    assert [p.names[i] for i in p.original] == ["x[0]", "x[1]"]
    assert len(set(p.names)) == len(p.names)
    assert all("/" in n for i, n in enumerate(p.names) if i not in p.original)
    assert any("single-square" in note for note in p.soc_notes)


def test_empty_program_export():
    p = SocProgram([], [], np.zeros((0, 0)), np.zeros(0), np.zeros((0, 0)), np.zeros(0))
    text = export_text(p)
    assert "VER\n3\n" in text and "ACOORD\n0\n" in text
    q = import_cbf(text)
    assert q.n_vars == 0


def test_round_trip(disk, hyperbola_hull):
    for p in (disk, flatten(hyperbola_hull)):
        text = export_text(p)
        q = import_cbf(text)
        assert q.same_data(p)
        assert export_text(q) == text


def test_export_is_deterministic(hyperbola_hull):
    assert export_text(flatten(hyperbola_hull)) == export_text(flatten(hyperbola_hull))


def test_human_readable(hyperbola_hull):
    text = export_text(flatten(hyperbola_hull), "text", objective=[0, 1])
    assert text.startswith("quadhull SOC program")
    assert "maximize" in text and "cones:" in text
    assert "single-square base lemma: convex part w+] ||" in text


def _solve_cbf_externally(text, c):
    """Independent reader for the subset of CBF we write, solved with cvxpy."""
    cp = pytest.importorskip("cvxpy")
    lines = [line for line in text.splitlines() if line and not line.startswith("#")]
    it = iter(lines)
    doms, cons, A, b, obj = [], [], {}, {}, {}
    for key in it:
        if key == "VAR":
            total, k = map(int, next(it).split())
            doms = [next(it).split() for _ in range(k)]
        elif key == "CON":
            total_c, k = map(int, next(it).split())
            cons = [next(it).split() for _ in range(k)]
        elif key == "ACOORD":
            for _ in range(int(next(it))):
                i, j, v = next(it).split()
                A[int(i), int(j)] = float(v)
        elif key == "BCOORD":
            for _ in range(int(next(it))):
                i, v = next(it).split()
                b[int(i)] = float(v)
        elif key in ("VER", "OBJSENSE"):
            next(it)
    x = cp.Variable(total)
    Am = np.zeros((total_c, total))
    for (i, j), v in A.items():
        Am[i, j] = v
    bv = np.array([b.get(i, 0.0) for i in range(total_c)])
    expr = Am @ x + bv
    constraints, start = [], 0
    for kind, k in cons:
        k = int(k)
        rows = expr[start:start + k]
        constraints.append(rows == 0 if kind == "L=" else rows <= 0)
        start += k
    start = 0
    for kind, k in doms:
        k = int(k)
        if kind == "Q":
            constraints.append(cp.SOC(x[start], x[start + 1:start + k]))
        start += k
    names = {}
    for line in text.splitlines():
        if line.startswith("# original"):
            names = [int(t) for t in line.split()[2:]]
    prob = cp.Problem(cp.Maximize(np.asarray(c) @ x[names]), constraints)
    prob.solve(solver="CLARABEL")
    return prob.value


def test_external_solver_reads_export(hyperbola_hull):
    text = export_text(flatten(hyperbola_hull), objective=[0, 1])
    assert abs(_solve_cbf_externally(text, [0, 1]) - np.sqrt(3)) < 1e-6


def test_stadium_leaves():
    def disk(cx):
        A = np.vstack([np.eye(2), -np.eye(2)])
        return ConvexSocLeaf(2, A, [cx + 1, 1, 1 - cx, 1], socs=[Soc.make(np.eye(2), [-cx, 0.0], [0.0, 0.0], 1.0)])
    p = flatten(Disjunction([disk(-2.0), disk(2.0)]))
    assert membership(p, [0.0, 0.9]).member
    assert not membership(p, [0.0, 1.1]).member
