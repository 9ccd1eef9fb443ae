import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hopfsurf.hopf import (
    RADIUS,
    BasePointMismatch,
    Fibre,
    arc32_between,
    conjugator_to,
    fiber_through,
    fibre_direction,
    fibre_length,
    fibre_offset,
    hopf_project,
    horizontal_lift_vector,
    lift_arc,
    lift_displacement,
    lift_path,
    push_forward,
    uts2_identify,
)
from hopfsurf.quaternion import Quaternion, Rotation4, exp_i, qexp_i, qmul
from hopfsurf.sphere2 import (
    E_I,
    E_J,
    E_K,
    GeodesicArc2,
    GeodesicPolygon2,
    ReflectionGroupSpec,
    polygon_area,
    typical_piece_polygon,
)

seeds = st.integers(0, 2**31 - 1)


def random_s32(rng):
    v = rng.normal(size=4)
    return RADIUS * v / np.linalg.norm(v)


def random_unit3(rng):
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


def random_triangle(rng, spread=0.6):
    c = random_unit3(rng)
    pts = []
    for _ in range(3):
        p = c + spread * rng.normal(size=3)
        pts.append(p / np.linalg.norm(p))
    if np.dot(pts[0], np.cross(pts[1], pts[2])) < 0:
        pts = [pts[0], pts[2], pts[1]]
    return pts


# ---------------------------------------------------------------- projection and fibres


def test_projection_examples():
    assert np.allclose(hopf_project([2, 0, 0, 0]), E_I)
    assert np.allclose(hopf_project([0, 0, 2, 0]), -E_I)
    for theta in (0.3, 1.7, 5.0):
        assert np.allclose(hopf_project(2 * qexp_i(theta / 2)), E_I, atol=1e-14)


@settings(max_examples=50)
@given(seeds, st.floats(-10, 10))
def test_fibres_project_to_one_point(seed, theta):
    r = random_s32(np.random.default_rng(seed))
    f = Fibre(r)
    assert np.allclose(hopf_project(f.point(theta)), hopf_project(r), atol=1e-12)
    # offsets are only defined modulo 4 pi
    diff = (fibre_offset(f.point(theta), r) - theta) / (4 * math.pi)
    assert abs(diff - round(diff)) < 1e-9


@pytest.mark.parametrize("u", [E_I, -E_I, E_J, (E_I + E_K) / math.sqrt(2)])
def test_fibre_through_point(u):
    f = fiber_through(u)
    assert np.allclose(hopf_project(f.base), u, atol=1e-12)
    assert abs(fibre_length(f) - 4 * math.pi) < 1e-10
    assert f.circumference == 4 * math.pi


def test_fibre_length_against_chord_polyline():
    # an inscribed polygon with n sides has perimeter 4 n sin(pi / n), below 4 pi
    f = fiber_through(E_J)
    n = 4096
    pts = f.point(np.linspace(0, 4 * math.pi, n + 1))
    chords = np.sum(np.linalg.norm(np.diff(pts, axis=0), axis=1))
    assert math.isclose(chords, 4 * n * math.sin(math.pi / n), rel_tol=1e-12)
    assert abs(fibre_length(f) - 4 * math.pi) < 1e-10


@settings(max_examples=50)
@given(seeds)
def test_conjugator_to(seed):
    u = random_unit3(np.random.default_rng(seed))
    p = conjugator_to(u)
    assert abs(np.linalg.norm(p) - 1) < 1e-12
    assert np.allclose(hopf_project(RADIUS * p), u, atol=1e-12)


# ---------------------------------------------------------------- horizontal lift


def test_lift_from_two_is_the_j_geodesic():
    # the horizontal lift of the S2 tangent k at i is j at 2
    arc = GeodesicArc2(E_I, E_K, 1.2)
    lifted = lift_arc(arc, [2, 0, 0, 0])
    for s in (0.0, 0.4, 1.2):
        assert np.allclose(lifted.point(s), 2 * np.array([math.cos(s / 2), 0, math.sin(s / 2), 0]), atol=1e-14)


@settings(max_examples=50)
@given(seeds)
def test_lift_is_horizontal_and_covers_the_arc(seed):
    rng = np.random.default_rng(seed)
    u = random_unit3(rng)
    t = np.cross(u, rng.normal(size=3))
    t /= np.linalg.norm(t)
    arc = GeodesicArc2(u, t, float(rng.uniform(0.1, 3.0)))
    r0 = qmul(qexp_i(rng.uniform(0, 2 * math.pi)), RADIUS * conjugator_to(u))
    lifted = lift_arc(arc, r0)
    s = np.linspace(0, arc.length, 17)
    assert np.allclose(hopf_project(lifted.point(s)), arc.point(s), atol=1e-10)
    tang = lifted.tangent_at(s)
    vert = fibre_direction(lifted.point(s))
    assert np.max(np.abs(np.sum(tang * vert, axis=1))) < 1e-12
    assert np.allclose(np.linalg.norm(lifted.point(s), axis=1), RADIUS)


@settings(max_examples=50)
@given(seeds)
def test_push_forward_inverts_horizontal_lift(seed):
    rng = np.random.default_rng(seed)
    r = random_s32(rng)
    u = hopf_project(r)
    w = np.cross(u, rng.normal(size=3))
    wt = horizontal_lift_vector(r, w)
    assert np.allclose(push_forward(r, wt), w, atol=1e-12)
    assert math.isclose(np.linalg.norm(wt), np.linalg.norm(w), rel_tol=1e-12)


def test_lift_rejects_wrong_base_point():
    with pytest.raises(BasePointMismatch):
        lift_arc(GeodesicArc2(E_J, E_K, 1.0), [2, 0, 0, 0])
    with pytest.raises(BasePointMismatch):
        lift_path(GeodesicPolygon2.from_vertices([E_J, E_K, E_I]), [2, 0, 0, 0])


@settings(max_examples=30)
@given(seeds)
def test_lift_is_equivariant(seed):
    rng = np.random.default_rng(seed)
    tri = random_triangle(rng)
    poly = GeodesicPolygon2.from_vertices(tri)
    start = RADIUS * conjugator_to(tri[0])
    p = exp_i(rng.uniform(0, 2 * math.pi)) if rng.uniform() < 0.5 else exp_i(rng.uniform(0, 2 * math.pi)) * Quaternion(0, 0, 1, 0)
    v = rng.normal(size=4)
    g = Rotation4(p, Quaternion.from_array(v / np.linalg.norm(v)))
    base = lift_path(poly, start)
    image = GeodesicPolygon2.from_vertices([hopf_project(g.apply(RADIUS * conjugator_to(x))) for x in tri])
    moved = lift_path(image, g.apply(start))
    s = np.linspace(0, 1, 5)
    for a, b in zip(base.arcs, moved.arcs):
        assert np.allclose(g.apply(a.point(s * a.length)), b.point(s * b.length), atol=1e-9)


def test_rotation_lift_moves_along_the_fibre():
    rng = np.random.default_rng(5)
    for _ in range(10):
        r = random_s32(rng)
        u = hopf_project(r)
        phi = rng.uniform(-3, 3)
        q = Quaternion(math.cos(phi / 2), *(math.sin(phi / 2) * u))
        moved = Rotation4(Quaternion(1), q).apply(r)
        assert np.allclose(moved, qmul(qexp_i(phi / 2), r), atol=1e-12)


def test_fibre_translation_shifts_parameter():
    tau = 0.7
    f = fiber_through(E_J)
    g = Rotation4(exp_i(tau / 2), Quaternion(1))
    for theta in (0.0, 1.0, 4.0):
        assert np.allclose(g.apply(f.point(theta)), f.point(theta - tau), atol=1e-12)


# ---------------------------------------------------------------- holonomy


def test_octant_displacement():
    poly = GeodesicPolygon2.from_vertices([E_I, E_J, E_K])
    assert math.isclose(lift_displacement(poly, [2, 0, 0, 0]), -math.pi / 2, abs_tol=1e-12)


def test_octant_displacement_by_hand():
    # the three lifted arcs assembled by hand from the horizontal lift formula
    r = np.array([2.0, 0, 0, 0])
    for a, b in ((E_I, E_J), (E_J, E_K), (E_K, E_I)):
        arc = GeodesicArc2.between(a, b)
        w = -qmul([0.0, 1, 0, 0], qmul(r, np.concatenate([[0.0], arc.tangent]))) / 2
        s = arc.length
        r = math.cos(s / 2) * r + RADIUS * math.sin(s / 2) * w
    assert np.allclose(r, 2 * qexp_i(-math.pi / 4), atol=1e-12)


def test_back_and_forth_has_zero_displacement():
    arc = GeodesicArc2(E_I, E_J, 1.0)
    lifted = lift_path([arc, arc.reversed()], [2, 0, 0, 0])
    assert abs(fibre_offset(lifted.end, lifted.start)) < 1e-12


def test_lune_displacement():
    lune = typical_piece_polygon(ReflectionGroupSpec("C", 2))
    start = RADIUS * conjugator_to(lune.arcs[0].start)
    assert math.isclose(abs(lift_displacement(lune, start)), math.pi, abs_tol=1e-12)


@settings(max_examples=100)
@given(seeds)
def test_displacement_equals_enclosed_area(seed):
    rng = np.random.default_rng(seed)
    tri = random_triangle(rng)
    poly = GeodesicPolygon2.from_vertices(tri)
    start = qmul(qexp_i(rng.uniform(0, 6)), RADIUS * conjugator_to(tri[0]))
    area = polygon_area(poly)
    assert abs(lift_displacement(poly, start) + area) < 1e-8
    # reversing the path puts the region on the right and flips the sign
    back = GeodesicPolygon2.from_vertices([tri[0], tri[2], tri[1]])
    assert abs(lift_displacement(back, start) - area) < 1e-8


def test_arc32_between():
    a = np.array([2.0, 0, 0, 0])
    b = np.array([0.0, 0, 2, 0])
    arc = arc32_between(a, b)
    assert math.isclose(arc.length, math.pi)
    assert np.allclose(arc.end, b, atol=1e-14)
    assert np.allclose(arc.reversed().end, a, atol=1e-14)


# ---------------------------------------------------------------- unit tangent bundle


def test_uts2_identify_examples():
    u, v = uts2_identify(Quaternion(1))
    assert np.allclose(u, E_I) and np.allclose(v, E_J)
    for theta in (0.2, 1.1, 3.0):
        u, v = uts2_identify(exp_i(theta / 2))
        assert np.allclose(u, E_I, atol=1e-14)
        assert np.allclose(v, E_J * math.cos(-theta) + E_K * math.sin(-theta), atol=1e-14)


@settings(max_examples=50)
@given(seeds)
def test_uts2_identify_gives_unit_tangent(seed):
    v = np.random.default_rng(seed).normal(size=4)
    u, w = uts2_identify(Quaternion.from_array(v / np.linalg.norm(v)))
    assert abs(np.dot(u, w)) < 1e-12
    assert abs(np.linalg.norm(w) - 1) < 1e-12
