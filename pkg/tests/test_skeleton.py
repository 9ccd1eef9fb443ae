import math

import numpy as np
import pytest

from hopfsurf import groups as G
from hopfsurf import skeleton as S
from hopfsurf.hopf import RADIUS, BasePointMismatch, fibre_direction, hopf_project
from hopfsurf.quaternion import Rotation4
from hopfsurf.sphere2 import E_I, E_K, equator_point

pi = math.pi
acos = math.acos
r3, r5, r6 = math.sqrt(3), math.sqrt(5), math.sqrt(6)
MU = (r5 + 1) / (2 * r3)
NU = math.sqrt(10 + 2 * r5) / (2 * r5)
KAPPA = math.sqrt(1 - NU**2)
SIGMA = math.sqrt(1 - MU**2)

# lengths KL, LM, MN, NK and angles at K, L, M, N, transcribed independently
TABLE = {
    "T2": ((acos(1 / 3), acos(-1 / 3), acos(1 / 3), acos(-1 / 3)), (pi / 3,) * 4),
    "T3": ((acos(1 / r3), acos(-1 / r3), acos(1 / r3), acos(-1 / r3)), (pi / 2, pi / 3, pi / 2, pi / 3)),
    "O2": ((pi / 2, acos(1 / r3), acos(1 / 3), acos(1 / r3)), (pi / 4, pi / 4, pi / 3, pi / 3)),
    "O3": ((pi / 4, pi / 2, pi / 4, pi / 2), (pi / 4, pi / 2, pi / 4, pi / 2)),
    "O4": ((acos(2 / r6), acos(-1 / 3), acos(2 / r6), pi / 2), (pi / 2, pi / 3, pi / 3, pi / 2)),
    "I2": ((acos(MU * NU), acos(1 / r5), acos(MU * NU), acos(r5 / 3)), (pi / 3, pi / 5, pi / 5, pi / 3)),
    "I3": ((acos(KAPPA), acos(NU), acos(KAPPA), acos(NU)), (pi / 2, pi / 5, pi / 2, pi / 5)),
    "I5": ((acos(MU), acos(SIGMA), acos(MU), acos(SIGMA)), (pi / 2, pi / 3, pi / 2, pi / 3)),
}


def table_row(spec):
    f = spec.family
    if f == "C":
        return (pi,) * 4, (pi / spec.m, pi / spec.n, pi / spec.m, pi / spec.n)
    if f == "D":
        l = spec.l
        return (pi / l, pi, pi / l, pi), (pi / 2,) * 4
    if f == "Dh":
        l = spec.l
        return (pi / 2, 2 * pi / l, pi / 2, pi), (pi / l, pi / 2, pi / 2, pi / l)
    return TABLE[f]


GENUS = {"T2": 25, "T3": 9, "O2": 121, "O3": 49, "O4": 25, "I2": 841, "I3": 361, "I5": 121}


def expected_genus(spec):
    if spec.family == "C":
        return (spec.m - 1) * (spec.n - 1)
    if spec.family == "D":
        return 1
    if spec.family == "Dh":
        return (spec.l - 1) ** 2
    return GENUS[spec.family]


TABLE_SPECS = [G.C(m, n) for m in range(1, 7) for n in range(1, 7)]
TABLE_SPECS += [G.D(l) for l in range(2, 7)] + [G.D(l, True) for l in range(2, 7)]
TABLE_SPECS += list(G.SPECIAL_SPECS)


# ---------------------------------------------------------------- constants


def test_table_constants():
    assert math.isclose(S.MU, MU) and math.isclose(S.NU, NU)
    assert math.isclose(S.KAPPA, KAPPA) and math.isclose(S.SIGMA, SIGMA)
    assert S.psi(1.0) == 0.0 and math.isclose(S.psi(-1.0), pi)
    # clamping keeps values that round past +-1 in range
    assert S.psi(1 + 1e-15) == 0.0


# ---------------------------------------------------------------- routes


def test_c_route_waypoints():
    m, n = 3, 4
    rt = S.route(G.C(m, n))
    want = [
        E_I,
        E_K,
        -E_I,
        equator_point(-pi / n),
        E_I,
        equator_point(-pi / m - pi / n),
        -E_I,
        equator_point(-pi / m),
        E_I,
    ]
    assert len(rt.points) == len(want)
    for a, b in zip(rt.points, want):
        assert np.allclose(a, b, atol=1e-14)


def test_equator_point_is_rotated_k():
    # the equator point at angle a is (0, -sin a, cos a) in ijk coordinates
    assert np.allclose(equator_point(0.0), E_K)
    assert np.allclose(equator_point(pi / 2), [0, -1, 0])


@pytest.mark.parametrize("spec", TABLE_SPECS, ids=str)
def test_routes_start_and_end_at_i(spec):
    rt = S.route(spec)
    assert np.allclose(rt.points[0], E_I) and np.allclose(rt.points[-1], E_I)


@pytest.mark.parametrize("spec", G.SPECIAL_SPECS, ids=str)
def test_figure_eight_goes_straight_at_crossing(spec):
    rt = S.route(spec)
    poly = rt.polygon()
    u = rt.crossing
    visits = [k for k, a in enumerate(poly.arcs) if np.linalg.norm(a.start - u) < 1e-12]
    assert len(visits) == 2
    for k in visits:
        incoming = poly.arcs[k - 1].end_tangent
        assert np.allclose(incoming, poly.arcs[k].tangent, atol=1e-12)


# ---------------------------------------------------------------- fundamental quadrilaterals


@pytest.mark.parametrize("spec", TABLE_SPECS, ids=str)
def test_quadrilateral_table(spec):
    q = S.fundamental_quadrilateral(spec)
    lengths, angles = S.quad_metrics(q)
    want_l, want_a = table_row(spec)
    assert np.max(np.abs(np.array(lengths) - want_l)) <= 1e-9
    assert np.max(np.abs(np.array(angles) - want_a)) <= 1e-9
    assert max(S.closure_gaps(q)) < 1e-9
    if min(G.angle_labels(spec)) >= 2:
        assert all(0 < a <= pi / 2 + 1e-9 for a in angles)


def test_quadrilateral_chain():
    q = S.fundamental_quadrilateral(G.O3)
    for t in range(4):
        assert np.allclose(q.edges[t].end, q.vertices[(t + 1) % 4], atol=1e-12)
    assert np.allclose(q.K, [2, 0, 0, 0])
    assert q.angle_labels == (4, 2)


def test_quadrilateral_edges_lie_over_the_route():
    spec = G.T3
    q = S.fundamental_quadrilateral(spec)
    poly = S.route(spec).polygon()
    base = np.concatenate([a.point(np.linspace(0, a.length, 200)) for a in poly.arcs])
    pts = hopf_project(q.sample(32))
    dist = np.min(np.linalg.norm(pts[:, None] - base[None], axis=2), axis=1)
    assert np.max(dist) < 0.02


def test_quadrilateral_from_other_point_of_the_fibre_closes():
    # holonomy does not depend on where on the fibre over i the lift starts
    start = 2 * np.array([math.cos(0.4), math.sin(0.4), 0, 0])
    q = S.fundamental_quadrilateral(G.T3, start=start)
    assert max(S.closure_gaps(q)) < 1e-9


def test_quadrilateral_start_must_lie_over_i():
    with pytest.raises(BasePointMismatch):
        S.fundamental_quadrilateral(G.T3, start=(0.0, 0.0, 2.0, 0.0))


# ---------------------------------------------------------------- skeleton


def test_degenerate_skeleton_is_one_circle():
    # mn = 1: the skeleton is the quadrilateral itself, a single great circle
    assert len(S.build_skeleton(G.C(1, 1))) == 1
    assert len(S.build_skeleton(G.C(1, 2))) == 2


@pytest.mark.parametrize("spec", [G.C(2, 2), G.D(3), G.T3, G.O4], ids=str)
def test_skeleton_invariant_under_its_half_turns(spec):
    sk = S.build_skeleton(spec)
    for P in sk.projectors():
        w, v = np.linalg.eigh(P)
        a, b = v[:, -1], v[:, -2]
        circle = S.GreatCircle32(RADIUS * a, b)
        assert sk.invariant_under(circle.half_turn())


def test_skeleton_contains_quadrilateral_edges():
    spec = G.O3
    sk = S.build_skeleton(spec)
    q = S.fundamental_quadrilateral(spec)
    for e in q.edges:
        assert sk.contains_circle(S.circle_projector(e.start, e.tangent))


def test_great_circle_equality_is_basis_independent():
    a = np.array([2.0, 0, 0, 0])
    c1 = S.GreatCircle32(a, np.array([0, 0, 1.0, 0]))
    c2 = S.GreatCircle32(2 * np.array([0, 0, 1.0, 0]), np.array([-1.0, 0, 0, 0]))
    c3 = S.GreatCircle32(a, np.array([0, 0, 0, 1.0]))
    assert c1 == c2
    assert c1 != c3


@pytest.mark.parametrize("spec", [G.C(2, 3), G.T3, G.O3], ids=str)
def test_fibre_count_is_constant(spec):
    sk = S.build_skeleton(spec)
    rng = np.random.default_rng(4)
    poly = S.route(spec).polygon()
    counts = set()
    for _ in range(20):
        arc = poly.arcs[rng.integers(len(poly.arcs))]
        u = arc.point(arc.length * rng.uniform(0.1, 0.9))
        counts.add(len(sk.fibre_intersections(u)))
    assert len(counts) == 1


def test_fibre_intersections_lie_over_the_point():
    sk = S.build_skeleton(G.T3)
    u = S.route(G.T3).polygon().arcs[0].point(0.3)
    pts = sk.fibre_intersections(u)
    assert len(pts) > 0
    assert np.allclose(hopf_project(pts), u, atol=1e-9)


# ---------------------------------------------------------------- orbits and counts


def test_orbit_sizes():
    assert len(S.quad_orbit(G.T3)) == 96
    assert len(S.quad_orbit(G.C(2, 2))) == 8
    with pytest.raises(S.DegenerateSpec):
        S.quad_orbit(G.C(1, 1))


def test_stabilizer_is_trivial():
    q = S.fundamental_quadrilateral(G.O4)
    assert len(S.stabilizer(q, G.build_group(G.O4))) == 1


@pytest.mark.parametrize(
    "spec,counts",
    [(G.T3, (80, 192, 96)), (G.C(2, 2), (8, 16, 8)), (G.I2, (1920, 7200, 3600))],
    ids=str,
)
def test_complex_counts_examples(spec, counts):
    cc = S.complex_counts(spec)
    assert (cc.V, cc.E, cc.F) == counts


def test_complex_counts_values():
    cc = S.complex_counts(G.T3)
    assert cc.euler == -16 and cc.genus == 9


GENUS_SPECS = [G.C(m, n) for m in range(2, 7) for n in range(2, 7)]
GENUS_SPECS += [G.D(l) for l in range(2, 7)] + [G.D(l, True) for l in range(2, 7)]
GENUS_SPECS += list(G.SPECIAL_SPECS)


@pytest.mark.parametrize("spec", GENUS_SPECS, ids=str)
def test_genus(spec):
    assert S.genus(spec) == S.complex_counts(spec).genus == expected_genus(spec)


@pytest.mark.parametrize("spec", [G.C(2, 3), G.C(3, 3), G.D(3), G.D(3, True), G.T3, G.O3, G.I5], ids=str)
def test_geometric_counts_agree(spec):
    geo, comb = S.geometric_counts(spec), S.complex_counts(spec)
    assert (geo.V, geo.E, geo.F) == (comb.V, comb.E, comb.F)


# ---------------------------------------------------------------- convex hull


def test_hull_tetrahedron():
    q = S.fundamental_quadrilateral(G.O3)
    cell = S.convex_hull(q)
    assert cell.kind == "tetrahedron"
    assert not cell.boundary_contact
    assert np.all(S.pairwise_distances(q) < pi)
    assert np.all(cell.contains(q.vertices))
    assert np.all(cell.contains(q.sample(16), tol=1e-9))
    assert np.all(q.vertices @ cell.centre > 0)


def test_hull_circle_and_boundary_contact():
    assert S.convex_hull(S.fundamental_quadrilateral(G.C(1, 1))).kind == "circle"
    cell = S.convex_hull(S.fundamental_quadrilateral(G.C(2, 2)))
    assert cell.kind == "tetrahedron" and cell.boundary_contact


def test_hull_interiors_are_disjoint():
    spec = G.T3
    group = G.build_group(spec)
    q = S.fundamental_quadrilateral(spec)
    cells = [S.convex_hull(q.transformed(g)) for g in group]
    normals = np.stack([c.face_normals for c in cells])  # (96, 4, 4)
    rng = np.random.default_rng(5)
    for c in cells:
        w = rng.dirichlet(np.ones(4), size=100)
        x = w @ c.vertices
        x = RADIUS * x / np.linalg.norm(x, axis=1, keepdims=True)
        inside = np.all(np.einsum("cfk,pk->pcf", normals, x) > 1e-9, axis=2)
        assert np.all(inside.sum(axis=1) == 1)


# ---------------------------------------------------------------- properness


@pytest.mark.parametrize("spec", G.representative_specs(), ids=str)
def test_fundamental_quadrilaterals_are_proper(spec):
    report = S.check_proper(S.fundamental_quadrilateral(spec))
    assert all(r.proper for r in report)


def test_sheared_counterexample_is_not_proper():
    q = S.sheared_quadrilateral(S.fundamental_quadrilateral(G.O3), vertex=1, amount=0.3)
    assert not S.is_proper(q)
    assert not S.is_proper(q, per_edge=640)
    assert not S.check_proper(q)[1].proper


def test_fibre_shift_keeps_properness():
    q = S.sheared_quadrilateral(S.fundamental_quadrilateral(G.O3), vertex=0, amount=0.3, direction="fibre")
    assert S.is_proper(q)


def test_shear_rejects_unknown_direction():
    with pytest.raises(ValueError):
        S.sheared_quadrilateral(S.fundamental_quadrilateral(G.O3), direction="sideways")


def test_small_angle_vertex_bounding_spheres():
    q = S.normalized_quadrilateral(S.fundamental_quadrilateral(G.T2), 0)
    v0 = S.check_proper(q)[0]
    assert v0.bounded_by_incoming
    assert not v0.bounded_by_outgoing


# ---------------------------------------------------------------- common perpendicular


def test_perpendicular_midpoint_construction():
    q = S.fundamental_quadrilateral(G.T3)
    perp = S.common_perpendicular(q)
    assert perp.construction == "midpoint"
    assert max(perp.residuals) < 1e-10


@pytest.mark.parametrize("spec", [G.D(3, True), G.O2, G.O4, G.I2], ids=str)
def test_perpendicular_fibre_construction(spec):
    perp = S.common_perpendicular(S.fundamental_quadrilateral(spec))
    assert perp.construction == "fibre"
    assert max(perp.residuals) < 1e-6


def test_perpendicular_symmetric_under_relabeling():
    q = S.fundamental_quadrilateral(G.O3)
    v = q.vertices
    relabeled = S.Quadrilateral32.from_vertices(v[[2, 1, 0, 3]], q.angle_denominators, q.spec)
    a = S.common_perpendicular(q).length
    b = S.common_perpendicular(relabeled).length
    assert math.isclose(a, b, abs_tol=1e-12)


@pytest.mark.parametrize("spec", G.representative_specs(), ids=str)
def test_quad_symmetry_preserves_quadrilateral(spec):
    q = S.fundamental_quadrilateral(spec)
    assert S.maps_quad_to_itself(q, S.quad_symmetry(q))


# ---------------------------------------------------------------- normalisation


@pytest.mark.parametrize("spec", [G.T2, G.O3, G.I5, G.D(3, True)], ids=str)
@pytest.mark.parametrize("vertex", range(4))
def test_normalize_position(spec, vertex):
    q = S.fundamental_quadrilateral(spec)
    eta = S.normalize_position(q, vertex)
    assert eta.preserves_fibration()
    nq = S.normalized_quadrilateral(q, vertex)
    assert np.allclose(nq.vertices[0], [2, 0, 0, 0], atol=1e-10)
    assert nq.edges[0].length >= nq.edges[3].length - 1e-12
    angle = S.vertex_angles(nq)[0]
    assert np.allclose(nq.edges[0].tangent, [0, 0, 1, 0], atol=1e-9)
    second = -nq.edges[3].end_tangent
    assert np.allclose(second, [0, 0, math.cos(angle), math.sin(angle)], atol=1e-9)
    # idempotent
    assert S.normalize_position(nq, 0) == Rotation4.identity()


def test_normalization_factors_through_s2():
    q = S.fundamental_quadrilateral(G.O3)
    eta = S.normalize_position(q, 1)
    pts = q.sample(8)
    base = hopf_project(pts)
    moved = hopf_project(eta.apply(pts))
    # distances on the base are preserved, so eta induces an isometry of S2
    d0 = base @ base.T
    d1 = moved @ moved.T
    assert np.allclose(d0, d1, atol=1e-9)
    assert np.allclose(np.linalg.norm(fibre_direction(eta.apply(pts)), axis=1), 1)
