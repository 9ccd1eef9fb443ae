"""Fundamental quadrilaterals, lifted skeletons and the geometric checks on them.

Each quadrilateral is the horizontal lift, starting at ``2``, of a closed
figure-eight route on S2.  Routes are stored as explicit waypoint lists; the
waypoints flagged as corners become the quadrilateral vertices K, L, M, N in
that order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .groups import (
    GroupSpec,
    SymmetryGroup,
    angle_denominators,
    angle_labels,
    build_group,
    group_order,
)
from .hopf import (
    RADIUS,
    GeodesicArc32,
    arc32_between,
    fibre_direction,
    hopf_project,
    lift_path,
    push_forward,
)
from .quaternion import GROUP_TOL, UNIT_TOL, Quaternion, Rotation4, pi_rotation_about_plane, qconj, qexp_i, qmul
from .sphere2 import (
    E_I,
    E_K,
    U_I,
    U_I2,
    U_O,
    U_T,
    U_T2,
    GeodesicArc2,
    GeodesicPolygon2,
    distance,
    equator_point,
)

PI = math.pi


class LiftNotClosed(RuntimeError):
    pass


class DegenerateSpec(ValueError):
    pass


class NoPerpendicular(RuntimeError):
    pass


# ---------------------------------------------------------------- table values


def psi(t: float) -> float:
    return math.acos(max(-1.0, min(1.0, t)))


MU = (math.sqrt(5) + 1) / (2 * math.sqrt(3))
NU = math.sqrt(10 + 2 * math.sqrt(5)) / (2 * math.sqrt(5))
KAPPA = math.sqrt(1 - NU**2)
SIGMA = math.sqrt(1 - MU**2)


def table_lengths(spec: GroupSpec) -> tuple[float, float, float, float]:
    """Edge lengths KL, LM, MN, NK as tabulated for the fundamental quadrilateral."""
    f = spec.family
    s3, s6 = math.sqrt(3), math.sqrt(6)
    if f == "C":
        return (PI, PI, PI, PI)
    if f == "D":
        return (PI / spec.l, PI, PI / spec.l, PI)
    if f == "Dh":
        return (PI / 2, 2 * PI / spec.l, PI / 2, PI)
    return {
        "T2": (psi(1 / 3), psi(-1 / 3), psi(1 / 3), psi(-1 / 3)),
        "T3": (psi(1 / s3), psi(-1 / s3), psi(1 / s3), psi(-1 / s3)),
        "O2": (PI / 2, psi(1 / s3), psi(1 / 3), psi(1 / s3)),
        "O3": (PI / 4, PI / 2, PI / 4, PI / 2),
        "O4": (psi(2 / s6), psi(-1 / 3), psi(2 / s6), PI / 2),
        "I2": (psi(MU * NU), psi(1 / math.sqrt(5)), psi(MU * NU), psi(math.sqrt(5) / 3)),
        "I3": (psi(KAPPA), psi(NU), psi(KAPPA), psi(NU)),
        "I5": (psi(MU), psi(SIGMA), psi(MU), psi(SIGMA)),
    }[f]


def table_angles(spec: GroupSpec) -> tuple[float, float, float, float]:
    return tuple(PI / a for a in angle_denominators(spec))


# ---------------------------------------------------------------- routes


@dataclass(frozen=True, eq=False)
class Route:
    points: tuple  # S2 waypoints, closed (last == first)
    corners: tuple  # flags, one per waypoint (the last mirrors the first)
    crossing: np.ndarray | None = None  # self-intersection of the figure eight

    def polygon(self) -> GeodesicPolygon2:
        arcs = [GeodesicArc2.between(a, b) for a, b in zip(self.points, self.points[1:])]
        return GeodesicPolygon2(tuple(arcs))

    @property
    def corner_points(self) -> list[np.ndarray]:
        return [p for p, c in zip(self.points[:-1], self.corners[:-1]) if c]


def _equator_run(a0: float, a1: float) -> list[np.ndarray]:
    """Waypoints ``e^{i a} k`` from angle ``a0`` to ``a1`` in steps below pi/2."""
    steps = max(1, int(math.ceil(abs(a1 - a0) / (PI / 2) - 1e-12)))
    if abs(a1 - a0) / steps >= PI / 2 - 1e-12:
        steps += 1
    return [equator_point(a0 + (a1 - a0) * s / steps) for s in range(steps + 1)]


def _figure_eight(v, a, b, k_v: int, reverse: bool, start) -> Route:
    """Boundary of the piece ``(v, a, b)`` and of its opposite piece at ``v``, run straight through ``v``."""

    def beyond(toward, dist):
        t = toward - np.dot(toward, v) * v
        t /= np.linalg.norm(t)
        return v * math.cos(dist) - t * math.sin(dist)

    da, db = distance(v, a), distance(v, b)
    a_opp = beyond(a, da if k_v % 2 == 0 else db)
    b_opp = beyond(b, db if k_v % 2 == 0 else da)
    seq = [(v, False), (a, True), (b, True), (v, False), (b_opp, True), (a_opp, True)]
    if reverse:
        seq = [seq[0]] + seq[:0:-1]
    idx = next(i for i, (p, _) in enumerate(seq) if np.linalg.norm(p - start) < 1e-12)
    seq = seq[idx:] + seq[:idx]
    seq.append(seq[0])
    return Route(tuple(p for p, _ in seq), tuple(c for _, c in seq), np.array(v))


_SPECIAL_ROUTES = {
    # family: (crossing vertex, a, b, angle denominator at crossing, reversed)
    "T2": (E_I, U_T, U_T2, 2, False),
    "T3": (U_T2, E_I, U_T, 3, False),
    "O2": (U_O, E_I, U_T, 2, True),
    "O3": (U_T, E_I, U_O, 3, False),
    "O4": (E_I, U_O, U_T, 4, False),
    "I2": (E_I, U_I, U_I2, 2, False),
    "I3": (U_I, E_I, U_I2, 3, True),
    "I5": (U_I2, E_I, U_I, 5, False),
}


def route(spec: GroupSpec) -> Route:
    f = spec.family
    if f == "C":
        m, n = spec.m, spec.n
        pts = [
            (E_I, True),
            (E_K, False),
            (-E_I, True),
            (equator_point(-PI / n), False),
            (E_I, True),
            (equator_point(-PI / m - PI / n), False),
            (-E_I, True),
            (equator_point(-PI / m), False),
            (E_I, True),
        ]
        return Route(tuple(p for p, _ in pts), tuple(c for _, c in pts), None)
    if f == "D":
        l = spec.l
        run1 = _equator_run(0.0, -PI / l)
        run2 = _equator_run(PI - PI / l, PI)
        pts = [(E_I, False)]
        pts += [(p, s == 0 or s == len(run1) - 1) for s, p in enumerate(run1)]
        pts += [(E_I, False)]
        pts += [(p, s == 0 or s == len(run2) - 1) for s, p in enumerate(run2)]
        pts += [(E_I, False)]
        return Route(tuple(p for p, _ in pts), tuple(c for _, c in pts), E_I.copy())
    if f == "Dh":
        l = spec.l
        run = _equator_run(0.0, -2 * PI / l)
        pts = [(E_I, True)]
        pts += [(p, s == 0 or s == len(run) - 1) for s, p in enumerate(run)]
        pts += [(-E_I, True), (equator_point(-PI / l), False), (E_I, True)]
        return Route(tuple(p for p, _ in pts), tuple(c for _, c in pts), equator_point(-PI / l))
    v, a, b, k_v, rev = _SPECIAL_ROUTES[f]
    return _figure_eight(v, a, b, k_v, rev, E_I)


def self_intersection(spec: GroupSpec) -> np.ndarray | None:
    return route(spec).crossing


# ---------------------------------------------------------------- quadrilaterals


@dataclass(frozen=True, eq=False)
class Quadrilateral32:
    vertices: np.ndarray  # (4, 4): K, L, M, N
    edges: tuple  # four GeodesicArc32: KL, LM, MN, NK
    angle_denominators: tuple
    spec: GroupSpec | None = None

    @property
    def K(self):
        return self.vertices[0]

    @property
    def L(self):
        return self.vertices[1]

    @property
    def M(self):
        return self.vertices[2]

    @property
    def N(self):
        return self.vertices[3]

    @property
    def angle_labels(self) -> tuple[int, int]:
        a = self.angle_denominators
        vals = sorted(set(a), key=a.index)
        return (vals[0], vals[-1])

    def transformed(self, rot: Rotation4) -> "Quadrilateral32":
        return Quadrilateral32(
            rot.apply(self.vertices),
            tuple(e.transformed(rot) for e in self.edges),
            self.angle_denominators,
            self.spec,
        )

    def sample(self, per_edge: int = 64) -> np.ndarray:
        return np.concatenate([e.point(np.linspace(0, e.length, per_edge + 1)) for e in self.edges])

    def edge_points(self, per_edge: int) -> np.ndarray:
        """``(4, per_edge + 1, 4)`` equally spaced points along each edge."""
        return np.stack([e.point(np.linspace(0, e.length, per_edge + 1)) for e in self.edges])

    @classmethod
    def from_vertices(cls, vertices, angle_denominators=(2, 2, 2, 2), spec=None) -> "Quadrilateral32":
        """Quadrilateral with minor geodesic edges between consecutive vertices."""
        v = np.asarray(vertices, dtype=float)
        edges = tuple(arc32_between(v[i], v[(i + 1) % 4]) for i in range(4))
        return cls(v, edges, tuple(angle_denominators), spec)


def fundamental_quadrilateral(spec: GroupSpec, start=(RADIUS, 0.0, 0.0, 0.0)) -> Quadrilateral32:
    rt = route(spec)
    lifted = lift_path(rt.polygon(), np.asarray(start, dtype=float))
    gap = float(np.linalg.norm(lifted.end - lifted.start))
    if gap > 1e-7:
        raise LiftNotClosed(f"lift of the {spec} route misses its start by {gap:.3g}")
    flags = rt.corners[:-1]
    arcs = lifted.arcs
    first = flags.index(True)
    order = list(range(first, len(arcs))) + list(range(first))
    edges, current = [], None
    for idx in order:
        arc = arcs[idx]
        if flags[idx]:
            if current is not None:
                edges.append(current)
            current = GeodesicArc32(arc.start, arc.tangent, arc.length)
        else:
            current = GeodesicArc32(current.start, current.tangent, current.length + arc.length)
    edges.append(current)
    if len(edges) != 4:
        raise DegenerateSpec(f"route for {spec} has {len(edges)} corners, not 4")
    vertices = np.array([e.start for e in edges])
    return Quadrilateral32(vertices, tuple(edges), angle_denominators(spec), spec)


def vertex_angles(q: Quadrilateral32) -> list[float]:
    out = []
    for t in range(4):
        t_in = q.edges[t - 1].end_tangent
        t_out = q.edges[t].tangent
        c = float(np.dot(-t_in, t_out))
        out.append(math.acos(max(-1.0, min(1.0, c))))
    return out


def quad_metrics(q: Quadrilateral32) -> tuple[list[float], list[float]]:
    return [e.length for e in q.edges], vertex_angles(q)


def closure_gaps(q: Quadrilateral32) -> list[float]:
    """Distance between each edge's end and the next vertex."""
    return [float(np.linalg.norm(q.edges[t].end - q.vertices[(t + 1) % 4])) for t in range(4)]


# ---------------------------------------------------------------- great circles and skeletons


def circle_projector(a, b) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a = a / np.linalg.norm(a)
    b = b - np.dot(a, b) * a
    b = b / np.linalg.norm(b)
    return np.outer(a, a) + np.outer(b, b)


@dataclass(frozen=True, eq=False)
class GreatCircle32:
    through: np.ndarray
    tangent: np.ndarray

    def point(self, s):
        s = np.asarray(s, dtype=float)[..., None]
        return RADIUS * (np.cos(s / 2) * self.through / RADIUS + np.sin(s / 2) * self.tangent)

    @property
    def projector(self) -> np.ndarray:
        return circle_projector(self.through, self.tangent)

    def __eq__(self, other) -> bool:
        if not isinstance(other, GreatCircle32):
            return NotImplemented
        return bool(np.max(np.abs(self.projector - other.projector)) <= GROUP_TOL)

    __hash__ = None

    def half_turn(self) -> Rotation4:
        return pi_rotation_about_plane(self.through, self.tangent)


def _proj_key(P: np.ndarray) -> bytes:
    iu = np.triu_indices(4)
    return (np.round(P[iu], 6) + 0.0).tobytes()


@dataclass(eq=False)
class Skeleton:
    spec: GroupSpec
    circles: list

    def __len__(self) -> int:
        return len(self.circles)

    def projectors(self) -> np.ndarray:
        return np.array([c.projector for c in self.circles])

    def contains_circle(self, P: np.ndarray) -> bool:
        d = np.max(np.abs(self.projectors() - P), axis=(1, 2))
        return bool(np.min(d) <= GROUP_TOL)

    def invariant_under(self, rot: Rotation4) -> bool:
        A = rot.matrix()
        return all(self.contains_circle(A.T @ P @ A) for P in self.projectors())

    def fibre_intersections(self, u) -> np.ndarray:
        """Distinct points where skeleton circles meet the fibre over ``u``."""
        u = np.asarray(u, dtype=float)
        pts = []
        for c in self.circles:
            a = c.through / RADIUS
            pa = hopf_project(a)
            w = push_forward(c.through, c.tangent)
            # P(c(s)) = pa cos s + w sin s, a great circle of S2
            normal = np.cross(pa, w)
            if abs(float(np.dot(normal, u))) > 1e-9:
                continue
            s = math.atan2(float(np.dot(u, w)), float(np.dot(u, pa)))
            for ss in (s, s + 2 * PI):
                pts.append(c.point(ss))
        return _dedup_points(np.array(pts).reshape(-1, 4))


def _dedup_points(pts: np.ndarray, tol: float = 1e-6) -> np.ndarray:
    out: list[np.ndarray] = []
    for p in pts:
        if not any(np.linalg.norm(p - o) <= tol for o in out):
            out.append(p)
    return np.array(out).reshape(-1, 4)


def build_skeleton(spec: GroupSpec, group: SymmetryGroup | None = None) -> Skeleton:
    q = fundamental_quadrilateral(spec)
    group = group or build_group(spec)
    circles: list[GreatCircle32] = []
    seen: set[bytes] = set()
    starts = group.apply(np.array([e.start for e in q.edges]))
    tangents = group.apply(np.array([e.tangent for e in q.edges]))
    for s_row, t_row in zip(starts.reshape(-1, 4), tangents.reshape(-1, 4)):
        P = circle_projector(s_row, t_row)
        key = _proj_key(P)
        if key in seen:
            continue
        if circles and np.min(np.max(np.abs(np.array([c.projector for c in circles[-64:]]) - P), axis=(1, 2))) <= GROUP_TOL:
            continue
        seen.add(key)
        circles.append(GreatCircle32(s_row, t_row / np.linalg.norm(t_row)))
    return Skeleton(spec, circles)


def fibre_count(spec: GroupSpec, skeleton: Skeleton | None = None, where: float = 0.37) -> int:
    """Number of skeleton points over a generic point of the base graph."""
    skeleton = skeleton or build_skeleton(spec)
    rt = route(spec)
    arc = rt.polygon().arcs[0]
    u = arc.point(where * arc.length)
    return len(skeleton.fibre_intersections(u))


# ---------------------------------------------------------------- orbits and counts


def _quad_key(v: np.ndarray) -> bytes:
    r = np.round(v, 5) + 0.0
    order = np.lexsort(r.T[::-1])
    return r[order].tobytes()


def orbit_vertices(spec: GroupSpec, group: SymmetryGroup | None = None) -> np.ndarray:
    """``(|G|, 4, 4)`` images of K, L, M, N under every element."""
    q = fundamental_quadrilateral(spec)
    group = group or build_group(spec)
    return group.apply(q.vertices)


def quad_orbit(spec: GroupSpec, group: SymmetryGroup | None = None) -> list[Quadrilateral32]:
    m, n = angle_labels(spec)
    if m * n == 1:
        raise DegenerateSpec(f"{spec} has mn = 1; the skeleton is the quadrilateral itself")
    q = fundamental_quadrilateral(spec)
    group = group or build_group(spec)
    quads, seen = [], set()
    for g in group:
        img = q.transformed(g)
        key = _quad_key(img.vertices)
        if key in seen:
            continue
        seen.add(key)
        quads.append(img)
    return quads


def stabilizer(q: Quadrilateral32, group: SymmetryGroup) -> list[int]:
    """Indices of group elements mapping the vertex set of ``q`` to itself."""
    imgs = group.apply(q.vertices)
    key = _quad_key(q.vertices)
    return [i for i, v in enumerate(imgs) if _quad_key(v) == key]


@dataclass(frozen=True)
class ComplexCounts:
    V: int
    E: int
    F: int

    @property
    def euler(self) -> int:
        return self.V - self.E + self.F

    @property
    def genus(self) -> int:
        return 1 - self.euler // 2


def complex_counts(spec: GroupSpec) -> ComplexCounts:
    """Closed-form V, E, F of the quadrilateral complex."""
    m, n = angle_labels(spec)
    if m < 2 or n < 2:
        raise DegenerateSpec("complex counts need m, n >= 2")
    g = group_order(spec)
    return ComplexCounts(g // m + g // n, 2 * g, g)


def geometric_counts(spec: GroupSpec, group: SymmetryGroup | None = None) -> ComplexCounts:
    """V, E, F by deduplicating the orbit's vertices, edges (by midpoint) and faces."""
    group = group or build_group(spec)
    q = fundamental_quadrilateral(spec)
    verts = group.apply(q.vertices).reshape(-1, 4)
    mids = group.apply(np.array([e.point(e.length / 2) for e in q.edges])).reshape(-1, 4)
    faces = group.apply(q.vertices)
    nv = len({(np.round(p, 5) + 0.0).tobytes() for p in verts})
    ne = len({(np.round(p, 5) + 0.0).tobytes() for p in mids})
    nf = len({_quad_key(f) for f in faces})
    return ComplexCounts(nv, ne, nf)


def genus(spec: GroupSpec) -> int:
    m, n = angle_labels(spec)
    if m < 2 or n < 2:
        raise DegenerateSpec("genus formula needs m, n >= 2")
    num = 2 * m * n + (m * n - m - n) * group_order(spec)
    assert num % (2 * m * n) == 0
    return num // (2 * m * n)


# ---------------------------------------------------------------- convex hull


@dataclass(frozen=True, eq=False)
class ConvexHullCell:
    kind: str  # "tetrahedron", "bigon" or "circle"
    vertices: np.ndarray
    face_normals: np.ndarray  # (k, 4), inward
    centre: np.ndarray | None  # witness of an open hemisphere
    boundary_contact: bool = False

    def contains(self, x, tol: float = UNIT_TOL) -> np.ndarray:
        x = np.atleast_2d(x)
        return np.all(x @ self.face_normals.T >= -tol, axis=1)

    def strictly_contains(self, x, tol: float = 1e-9) -> np.ndarray:
        x = np.atleast_2d(x)
        return np.all(x @ self.face_normals.T > tol, axis=1)


def _normal_to(vectors: np.ndarray) -> np.ndarray:
    _, _, vt = np.linalg.svd(np.atleast_2d(vectors))
    n = vt[-1]
    return n / np.linalg.norm(n)


def convex_hull(q: Quadrilateral32) -> ConvexHullCell:
    m, n = q.angle_labels
    v = q.vertices
    if m * n == 1:
        return ConvexHullCell("circle", v, np.zeros((0, 4)), None)
    normals = []
    for drop in range(4):
        tri = np.delete(v, drop, axis=0)
        nrm = _normal_to(tri)
        if np.dot(nrm, v[drop]) < 0:
            nrm = -nrm
        normals.append(nrm)
    normals = np.array(normals)
    kind = "tetrahedron" if min(m, n) >= 2 else "bigon"
    centre = _hemisphere_centre(np.concatenate([v, q.sample(16)]))
    gram = v @ v.T / RADIUS**2
    contact = bool(np.any(np.abs(gram[np.triu_indices(4, 1)]) < 1e-9))
    return ConvexHullCell(kind, v, normals, centre, contact)


def _hemisphere_centre(points: np.ndarray) -> np.ndarray | None:
    """A unit vector with positive inner product against every point, if one exists."""
    x = points / np.linalg.norm(points, axis=1, keepdims=True)
    # maximise s subject to x_i . c >= s, -1 <= c <= 1
    res = linprog(
        c=[0, 0, 0, 0, -1],
        A_ub=np.hstack([-x, np.ones((len(x), 1))]),
        b_ub=np.zeros(len(x)),
        bounds=[(-1, 1)] * 4 + [(None, 1)],
        method="highs",
    )
    if not res.success or -res.fun <= 1e-12:
        return None
    c = res.x[:4]
    return c / np.linalg.norm(c)


def pairwise_distances(q: Quadrilateral32) -> np.ndarray:
    v = q.vertices / RADIUS
    return 2 * np.arccos(np.clip(v @ v.T, -1.0, 1.0))


# ---------------------------------------------------------------- properness


@dataclass(frozen=True)
class VertexProperness:
    vertex: int
    bounded_by_incoming: bool  # S(gamma_{t-1}, N_t)
    bounded_by_outgoing: bool  # S(gamma_t, N_t)

    @property
    def proper(self) -> bool:
        return self.bounded_by_incoming or self.bounded_by_outgoing


def _one_side(values: np.ndarray, tol: float) -> bool:
    return bool(np.all(values >= -tol) or np.all(values <= tol))


def check_proper(q: Quadrilateral32, per_edge: int = 64, tol: float = UNIT_TOL) -> list[VertexProperness]:
    pts = np.concatenate([q.vertices, q.sample(per_edge)])
    out = []
    for t in range(4):
        v = q.vertices[t] / RADIUS
        e_in = -q.edges[t - 1].end_tangent  # along gamma_{t-1}, pointing away from v
        e_out = q.edges[t].tangent
        n_t = _normal_to(np.array([v, e_in, e_out]))  # direction of N_t
        nrm_in = _normal_to(np.array([v, e_in, n_t]))
        nrm_out = _normal_to(np.array([v, e_out, n_t]))
        out.append(
            VertexProperness(
                t,
                _one_side(pts @ nrm_in, tol * RADIUS),
                _one_side(pts @ nrm_out, tol * RADIUS),
            )
        )
    return out


def is_proper(q: Quadrilateral32, per_edge: int = 64) -> bool:
    return all(r.proper for r in check_proper(q, per_edge))


def sheared_quadrilateral(
    q: Quadrilateral32, vertex: int = 1, amount: float = 0.3, direction: str = "bisector"
) -> Quadrilateral32:
    """Move one vertex by ``amount`` radians and reconnect with minor geodesics.

    ``direction="bisector"`` pulls the vertex into the quadrilateral along its
    angle bisector, which opens the angle there; ``direction="fibre"`` slides
    it along its Hopf fibre instead.
    """
    v = q.vertices.copy()
    x = v[vertex] / RADIUS
    if direction == "fibre":
        v[vertex] = qmul(qexp_i(amount), v[vertex])
    elif direction == "bisector":
        d = q.edges[vertex].tangent - q.edges[vertex - 1].end_tangent
        d = d - np.dot(d, x) * x
        d /= np.linalg.norm(d)
        v[vertex] = RADIUS * (math.cos(amount) * x + math.sin(amount) * d)
    else:
        raise ValueError(f"unknown shear direction {direction!r}")
    return Quadrilateral32.from_vertices(v, q.angle_denominators, q.spec)


# ---------------------------------------------------------------- common perpendicular


@dataclass(frozen=True)
class Perpendicular:
    o1: np.ndarray
    o2: np.ndarray
    length: float
    residuals: tuple  # |<segment tangent, diagonal tangent>| at o1 and o2
    construction: str


FIBRE_SPLIT = ("Dh", "O2", "O4", "I2")


def _arc_midpoint(a, b) -> np.ndarray:
    m = a + b
    return RADIUS * m / np.linalg.norm(m)


def _segment_residuals(o1, o2, d1, d2) -> tuple[float, float]:
    seg = arc32_between(o1, o2)
    t1, t2 = seg.tangent, seg.end_tangent
    r1 = abs(float(np.dot(t1, _unit_dir(o1, d1))))
    r2 = abs(float(np.dot(t2, _unit_dir(o2, d2))))
    return r1, r2


def _unit_dir(x, toward) -> np.ndarray:
    u = x / np.linalg.norm(x)
    t = toward - np.dot(toward, u) * u
    return t / np.linalg.norm(t)


def _closest_on_circles(P1: np.ndarray, P2: np.ndarray):
    """Principal pairs between two 2-planes: list of (x, y, cos) with x in plane 1, y in plane 2."""
    w1, v1 = np.linalg.eigh(P1)
    w2, v2 = np.linalg.eigh(P2)
    A = v1[:, -2:]
    B = v2[:, -2:]
    U, S, Vt = np.linalg.svd(A.T @ B)
    return [(A @ U[:, k], B @ Vt[k], S[k]) for k in range(2)]


def common_perpendicular(q: Quadrilateral32) -> Perpendicular:
    K, L, M, N = q.vertices
    spec = q.spec
    if spec is not None and spec.family in FIBRE_SPLIT:
        u = self_intersection(spec)
        fibre_pt = None
        for e in q.edges:
            s = np.linspace(0, e.length, 2001)
            d = np.linalg.norm(hopf_project(e.point(s)) - u, axis=1)
            k = int(np.argmin(d))
            if d[k] < 1e-2:
                fibre_pt = e.point(s[k])
                break
        if fibre_pt is None:
            raise NoPerpendicular("route crossing not found on the quadrilateral")
        P_f = circle_projector(fibre_pt, fibre_direction(fibre_pt))
        P_d = circle_projector(K, M - np.dot(M, K) * K / RADIUS**2)
        mid_km = _arc_midpoint(K, M)
        best = None
        for x, y, c in _closest_on_circles(P_d, P_f):
            for sx in (1, -1):
                xx = sx * RADIUS * x
                if np.dot(xx, mid_km) <= 0:
                    continue
                yy = RADIUS * y * (1 if np.dot(y, xx) >= 0 else -1)
                if best is None or np.dot(xx, mid_km) > np.dot(best[0], mid_km):
                    best = (xx, yy)
        if best is None:
            raise NoPerpendicular("no perpendicular between KM and the crossing fibre")
        x, y = best
        turn = pi_rotation_about_plane(fibre_pt, fibre_direction(fibre_pt))
        o1, o2 = x, turn.apply(x)
        construction = "fibre"
    else:
        o1, o2 = _arc_midpoint(K, M), _arc_midpoint(L, N)
        construction = "midpoint"
    r1, r2 = _segment_residuals(o1, o2, M, N)
    if max(r1, r2) > 1e-6:
        raise NoPerpendicular(f"orthogonality residual {max(r1, r2):.3g}")
    length = arc32_between(o1, o2).length
    return Perpendicular(o1, o2, length, (r1, r2), construction)


def quad_symmetry(q: Quadrilateral32) -> Rotation4:
    """The half-turn preserving ``q``: about the line o1o2, or about the crossing fibre."""
    spec = q.spec
    if spec is not None and spec.family in FIBRE_SPLIT:
        perp = common_perpendicular(q)
        mid = arc32_between(perp.o1, perp.o2).point(perp.length / 2)
        return pi_rotation_about_plane(mid, fibre_direction(mid))
    perp = common_perpendicular(q)
    return pi_rotation_about_plane(perp.o1, perp.o2)


def maps_quad_to_itself(q: Quadrilateral32, rot: Rotation4, tol: float = 1e-8) -> bool:
    return _quad_key(rot.apply(q.vertices)) == _quad_key(q.vertices) and bool(
        np.max(np.min(np.linalg.norm(rot.apply(q.sample(8))[:, None] - q.sample(8)[None], axis=2), axis=1)) < tol
    )


# ---------------------------------------------------------------- normalisation


def normalize_position(q: Quadrilateral32, vertex: int) -> Rotation4:
    """Fibration-preserving ``eta`` with ``eta(v) = 2`` and the longer edge at ``v`` along ``j``."""
    v = q.vertices[vertex] / RADIUS
    e_out = q.edges[vertex]
    e_in = q.edges[vertex - 1]
    t_out, t_in = e_out.tangent, -e_in.end_tangent
    first, second = (t_out, t_in) if e_out.length >= e_in.length else (t_in, t_out)
    x1 = qmul(first, qconj(v))  # in span(j, k)
    x2 = qmul(second, qconj(v))
    alpha = math.atan2(x1[3], x1[2])  # x = e^{i alpha} j = (0, 0, cos, sin)
    beta = math.atan2(x2[3], x2[2])
    turn = (beta - alpha + PI) % (2 * PI) - PI
    if turn >= 0:
        p = qexp_i(alpha / 2)
    else:
        p = qmul(qexp_i(alpha / 2), np.array([0.0, 0.0, 1.0, 0.0]))
    qq = qmul(qconj(v), p)
    return Rotation4(Quaternion.from_array(p), Quaternion.from_array(qq))


def normalized_quadrilateral(q: Quadrilateral32, vertex: int) -> Quadrilateral32:
    """``eta(q)`` relabelled so that ``v0`` is ``eta(vertex) = 2`` and ``gamma_0`` leaves along ``j``."""
    eta = normalize_position(q, vertex)
    img = q.transformed(eta)
    forward = q.edges[vertex].length >= q.edges[vertex - 1].length
    if forward:
        order = [(vertex + s) % 4 for s in range(4)]
        verts = img.vertices[order]
    else:
        order = [(vertex - s) % 4 for s in range(4)]
        verts = img.vertices[order]
    denoms = tuple(q.angle_denominators[i] for i in order)
    return Quadrilateral32.from_vertices(verts, denoms, q.spec)
