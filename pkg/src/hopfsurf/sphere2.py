"""Geometry on the unit 2-sphere of the ijk-space.

Points and tangent vectors are 3-arrays holding the i, j, k coefficients.
Orientation convention everywhere: i, j, k right handed, the sphere viewed
from outside, so a polygon has its region on the *left* when it runs
counter-clockwise around the outward normal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .quaternion import UNIT_TOL, GROUP_TOL, Quaternion, axis_angle, qconj, qmul

SQ3 = math.sqrt(3.0)
SQ5 = math.sqrt(5.0)


class NotTangent(ValueError):
    pass


class DegeneratePolygon(ValueError):
    pass


class ClosureOverflow(RuntimeError):
    pass


def e3(v) -> np.ndarray:
    """Coerce a pure-imaginary quaternion or a 3-vector to a 3-array."""
    if isinstance(v, Quaternion):
        if abs(v.t) > UNIT_TOL:
            raise ValueError("point is not in E3")
        return np.array([v.x, v.y, v.z])
    a = np.asarray(v, dtype=float)
    if a.shape[-1] == 4:
        return a[..., 1:]
    return a


def as_quat(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return np.concatenate([np.zeros(v.shape[:-1] + (1,)), v], axis=-1)


def s2_point(v) -> np.ndarray:
    a = e3(v)
    n = np.linalg.norm(a)
    if abs(n - 1.0) > UNIT_TOL:
        raise ValueError(f"|v| = {n!r} is not 1")
    return a / n


def distance(a, b) -> float:
    a, b = e3(a), e3(b)
    return math.atan2(np.linalg.norm(np.cross(a, b)), float(np.dot(a, b)))


def rotate3(v, p) -> np.ndarray:
    """``p^-1 v p`` on 3-vectors."""
    out = qmul(qmul(qconj(p), as_quat(e3(v))), p)
    return out[..., 1:]


# ---------------------------------------------------------------- special points

U_T = np.array([1.0, 1.0, 1.0]) / SQ3
U_T2 = np.array([1.0, 1.0, -1.0]) / SQ3
U_O = np.array([1.0, 1.0, 0.0]) / math.sqrt(2.0)
U_I = np.array([SQ5 + 1.0, SQ5 - 1.0, 0.0]) / (2.0 * SQ3)
U_I2 = np.array([math.sqrt(10.0 + 2.0 * SQ5), 0.0, -math.sqrt(10.0 - 2.0 * SQ5)]) / (2.0 * SQ5)

E_I = np.array([1.0, 0.0, 0.0])
E_J = np.array([0.0, 1.0, 0.0])
E_K = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True)
class SpecialPoints:
    u_T: np.ndarray = U_T
    u_T2: np.ndarray = U_T2
    u_O: np.ndarray = U_O
    u_I: np.ndarray = U_I
    u_I2: np.ndarray = U_I2


def equator_point(angle: float) -> np.ndarray:
    """``e^{i angle} k`` as a 3-vector."""
    return np.array([0.0, -math.sin(angle), math.cos(angle)])


# ---------------------------------------------------------------- arcs and polygons


@dataclass(frozen=True, eq=False)
class GeodesicArc2:
    start: np.ndarray
    tangent: np.ndarray
    length: float

    def __post_init__(self):
        s = s2_point(self.start)
        t = e3(self.tangent)
        if abs(float(np.dot(s, t))) > 1e-8:
            raise NotTangent("arc tangent is not orthogonal to its start point")
        t = t - np.dot(s, t) * s
        object.__setattr__(self, "start", s)
        object.__setattr__(self, "tangent", t / np.linalg.norm(t))

    @classmethod
    def between(cls, a, b) -> "GeodesicArc2":
        """Minor arc from ``a`` to ``b`` (rejects antipodal pairs)."""
        a, b = s2_point(a), s2_point(b)
        t = b - np.dot(a, b) * a
        nt = np.linalg.norm(t)
        if nt < 1e-12:
            raise DegeneratePolygon("endpoints coincide or are antipodal")
        return cls(a, t / nt, distance(a, b))

    def point(self, s):
        s = np.asarray(s, dtype=float)[..., None]
        return self.start * np.cos(s) + self.tangent * np.sin(s)

    def tangent_at(self, s):
        s = np.asarray(s, dtype=float)[..., None]
        return -self.start * np.sin(s) + self.tangent * np.cos(s)

    @property
    def end(self) -> np.ndarray:
        return self.point(self.length)

    @property
    def end_tangent(self) -> np.ndarray:
        return self.tangent_at(self.length)

    @property
    def binormal(self) -> np.ndarray:
        return np.cross(self.start, self.tangent)

    def reversed(self) -> "GeodesicArc2":
        return GeodesicArc2(self.end, -self.end_tangent, self.length)


@dataclass(frozen=True, eq=False)
class GeodesicPolygon2:
    arcs: tuple

    def __post_init__(self):
        arcs = tuple(self.arcs)
        object.__setattr__(self, "arcs", arcs)
        for a, b in zip(arcs, arcs[1:]):
            if np.linalg.norm(a.end - b.start) > 1e-8:
                raise DegeneratePolygon("consecutive arcs do not chain")

    @classmethod
    def from_vertices(cls, vertices: Iterable, closed: bool = True) -> "GeodesicPolygon2":
        vs = [s2_point(v) for v in vertices]
        if closed and np.linalg.norm(vs[0] - vs[-1]) > 1e-12:
            vs.append(vs[0])
        return cls(tuple(GeodesicArc2.between(a, b) for a, b in zip(vs, vs[1:])))

    @property
    def closed(self) -> bool:
        return bool(np.linalg.norm(self.arcs[-1].end - self.arcs[0].start) <= 1e-8)

    @property
    def vertices(self) -> list[np.ndarray]:
        return [a.start for a in self.arcs]

    @property
    def length(self) -> float:
        return sum(a.length for a in self.arcs)


def parallel_transport(v, arc: GeodesicArc2) -> np.ndarray:
    """Transport the tangent vector ``v`` at ``arc.start`` to ``arc.end``."""
    v = e3(v)
    if abs(float(np.dot(v, arc.start))) > UNIT_TOL:
        raise NotTangent("vector is not tangent at the arc start")
    along = float(np.dot(v, arc.tangent))
    across = float(np.dot(v, arc.binormal))
    return along * arc.end_tangent + across * arc.binormal


def transport_ode(v, arc: GeodesicArc2, step: float = 1e-4) -> np.ndarray:
    """RK4 integration of ``dv/ds = -<P'(s), v> P(s)``; an independent check on :func:`parallel_transport`."""
    v = np.array(e3(v), dtype=float)
    n = max(1, int(math.ceil(arc.length / step)))
    h = arc.length / n

    def f(s, w):
        return -float(np.dot(arc.tangent_at(s), w)) * arc.point(s)

    s = 0.0
    for _ in range(n):
        k1 = f(s, v)
        k2 = f(s + h / 2, v + h / 2 * k1)
        k3 = f(s + h / 2, v + h / 2 * k2)
        k4 = f(s + h, v + h * k3)
        v = v + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        s += h
    return v


def signed_angle(a, b, axis) -> float:
    """Counter-clockwise angle from ``a`` to ``b`` about ``axis``."""
    return math.atan2(float(np.dot(axis, np.cross(a, b))), float(np.dot(a, b)))


def turning_angles(poly: GeodesicPolygon2) -> list[float]:
    """Signed turning angle at each vertex (left turns positive)."""
    arcs = poly.arcs
    turns = []
    for prev, nxt in zip(arcs[-1:] + arcs[:-1], arcs):
        t_in = prev.end_tangent
        t_out = nxt.tangent
        turn = signed_angle(t_in, t_out, nxt.start)
        if abs(abs(turn) - math.pi) < 1e-12:
            raise DegeneratePolygon("consecutive arcs are anti-parallel")
        turns.append(turn)
    return turns


def interior_angles(poly: GeodesicPolygon2, side: str = "left") -> list[float]:
    sign = _side_sign(side)
    return [math.pi - sign * t for t in turning_angles(poly)]


def polygon_area(poly: GeodesicPolygon2, side: str = "left") -> float:
    """Spherical excess of the region on ``side`` of the closed polygon."""
    if not poly.closed:
        raise DegeneratePolygon("polygon is not closed")
    angles = interior_angles(poly, side)
    return sum(angles) - (len(angles) - 2) * math.pi


def holonomy_angle(poly: GeodesicPolygon2, side: str = "left") -> float:
    """Rotation angle in (0, 2pi] accumulated by transporting a vector once around ``poly``.

    The sense is right handed about the outward normal when the region is on
    the left, left handed when it is on the right.
    """
    if not poly.closed:
        raise DegeneratePolygon("polygon is not closed")
    turning_angles(poly)  # rejects anti-parallel corners
    v0 = poly.arcs[0].tangent
    v = v0
    for arc in poly.arcs:
        v = parallel_transport(v - np.dot(v, arc.start) * arc.start, arc)
    phi = signed_angle(v0, v, poly.arcs[0].start)
    theta = (_side_sign(side) * phi) % (2 * math.pi)
    return 2 * math.pi if theta < 1e-13 else theta


def _side_sign(side: str) -> int:
    if side == "left":
        return 1
    if side == "right":
        return -1
    raise ValueError(f"side must be 'left' or 'right', not {side!r}")


def arcs_intersect(a: GeodesicArc2, b: GeodesicArc2, tol: float = 1e-12) -> bool:
    """Whether two arcs share a point other than a common endpoint."""
    na, nb = a.binormal, b.binormal
    line = np.cross(na, nb)
    if np.linalg.norm(line) < tol:
        return False  # same great circle, treated as touching only at endpoints
    line /= np.linalg.norm(line)
    for x in (line, -line):
        sa = math.atan2(float(np.dot(x, a.tangent)), float(np.dot(x, a.start))) % (2 * math.pi)
        sb = math.atan2(float(np.dot(x, b.tangent)), float(np.dot(x, b.start))) % (2 * math.pi)
        if tol < sa < a.length - tol and tol < sb < b.length - tol:
            return True
    return False


def is_simple(poly: GeodesicPolygon2) -> bool:
    arcs = poly.arcs
    n = len(arcs)
    for i in range(n):
        for j in range(i + 1, n):
            if arcs_intersect(arcs[i], arcs[j]):
                return False
    return True


# ---------------------------------------------------------------- reflection groups


@dataclass(frozen=True)
class ReflectionGroupSpec:
    symbol: str
    l: int = 1

    def __post_init__(self):
        if self.symbol not in "CDTOI" or len(self.symbol) != 1:
            raise ValueError(f"unknown reflection group {self.symbol!r}")
        if self.l < 1:
            raise ValueError("l must be at least 1")


@dataclass(frozen=True, eq=False)
class O3Element:
    """``sign * [p]``: sign -1 composes the rotation with the antipodal map."""

    sign: int
    p: np.ndarray

    @property
    def matrix(self) -> np.ndarray:
        # rows are images of i, j, k under v -> sign * p^-1 v p
        return self.sign * rotate3(np.eye(3), self.p)

    @property
    def is_reflection(self) -> bool:
        m = self.matrix
        return self.sign < 0 and abs(np.trace(m) - 1.0) < 1e-9


def _rot(axis, angle) -> np.ndarray:
    return axis_angle(np.asarray(axis, dtype=float), angle)


def reflection_group_generators(spec: ReflectionGroupSpec) -> list[O3Element]:
    l = spec.l
    if spec.symbol == "C":
        return [O3Element(1, _rot(E_I, 2 * math.pi / l)), O3Element(-1, _rot(E_J, math.pi))]
    if spec.symbol == "D":
        return [
            O3Element(1, _rot(E_I, 2 * math.pi / l)),
            O3Element(1, _rot(E_K, math.pi)),
            O3Element(-1, _rot(E_J, math.pi)),
        ]
    if spec.symbol == "T":
        return [
            O3Element(1, _rot(E_I, math.pi)),
            O3Element(1, _rot(U_T, 2 * math.pi / 3)),
            O3Element(-1, _rot(equator_point(math.pi / 4), math.pi)),
        ]
    if spec.symbol == "O":
        return [
            O3Element(1, _rot(E_I, math.pi / 2)),
            O3Element(1, _rot(U_T, 2 * math.pi / 3)),
            O3Element(-1, _rot(E_K, math.pi)),
        ]
    return [
        O3Element(1, _rot(E_I, math.pi)),
        O3Element(1, _rot(U_I, 2 * math.pi / 3)),
        O3Element(-1, _rot(E_K, math.pi)),
    ]


def reflection_group_2d(spec: ReflectionGroupSpec, limit: int = 10**5) -> list[np.ndarray]:
    """All elements of the reflection group as 3x3 matrices acting on row vectors."""
    gens = [g.matrix for g in reflection_group_generators(spec)]
    elems = [np.eye(3)]
    seen = {_mkey(elems[0])}
    frontier = list(elems)
    while frontier:
        nxt = []
        for a in frontier:
            for g in gens:
                b = a @ g
                key = _mkey(b)
                if key not in seen:
                    seen.add(key)
                    elems.append(b)
                    nxt.append(b)
                    if len(elems) > limit:
                        raise ClosureOverflow(f"more than {limit} elements")
        frontier = nxt
    return elems


def _mkey(m: np.ndarray) -> tuple:
    return tuple(np.round(m, 6).ravel() + 0.0)


def reflection_normal(m: np.ndarray) -> np.ndarray | None:
    """Unit normal of the mirror if ``m`` is a reflection, else ``None``."""
    if abs(np.linalg.det(m) + 1.0) > 1e-9 or abs(np.trace(m) - 1.0) > 1e-9:
        return None
    w, v = np.linalg.eigh((m + m.T) / 2)
    n = v[:, np.argmin(w)]
    return n / np.linalg.norm(n)


def tessellation_graph(spec: ReflectionGroupSpec) -> list[np.ndarray]:
    """Mirror circles of the group, as unit normals (one per ``+-`` pair)."""
    normals: list[np.ndarray] = []
    for m in reflection_group_2d(spec):
        n = reflection_normal(m)
        if n is None:
            continue
        if not any(min(np.linalg.norm(n - o), np.linalg.norm(n + o)) < GROUP_TOL for o in normals):
            normals.append(_canonical_sign(n))
    return normals


def _canonical_sign(n: np.ndarray) -> np.ndarray:
    for c in n:
        if abs(c) > UNIT_TOL:
            return n if c > 0 else -n
    return n


def typical_piece(spec: ReflectionGroupSpec) -> list[np.ndarray]:
    """Vertices of the typical piece, in the order listed with its angles."""
    l = spec.l
    if spec.symbol == "C":
        raise ValueError("the C piece is a bigon; use typical_piece_polygon")
    if spec.symbol == "D":
        return [E_I, E_K, equator_point(-math.pi / l)]
    if spec.symbol == "T":
        return [E_I, U_T, U_T2]
    if spec.symbol == "O":
        return [E_I, U_T, U_O]
    return [E_I, U_I, U_I2]


def typical_piece_polygon(spec: ReflectionGroupSpec) -> GeodesicPolygon2:
    if spec.symbol == "C":
        a = GeodesicArc2(E_I, E_K, math.pi)
        b = GeodesicArc2(-E_I, equator_point(-math.pi / spec.l), math.pi)
        return GeodesicPolygon2((a, b))
    return GeodesicPolygon2.from_vertices(typical_piece(spec))
