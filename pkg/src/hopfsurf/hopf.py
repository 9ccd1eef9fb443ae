"""The enlarged Hopf fibration ``P(r) = r^-1 i r`` of the radius-2 sphere and horizontal lifting.

Geodesics of the radius-2 sphere are parametrised by arc length as
``c(s) = 2(cos(s/2) r/2 + sin(s/2) w)`` with ``w`` a unit tangent, so an arc of
length ``s`` in S3_2 covers an arc of length ``s`` in S2 under ``P``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .quaternion import UNIT_TOL, Quaternion, Rotation3, qconj, qmul
from .sphere2 import GeodesicArc2, GeodesicPolygon2, as_quat, e3, rotate3

RADIUS = 2.0
QI = np.array([0.0, 1.0, 0.0, 0.0])


class BasePointMismatch(ValueError):
    pass


def _r(r) -> np.ndarray:
    a = r.array if isinstance(r, Quaternion) else np.asarray(r, dtype=float)
    return a


def s32_point(r) -> np.ndarray:
    a = _r(r)
    n = float(np.linalg.norm(a))
    if abs(n - RADIUS) > UNIT_TOL:
        raise ValueError(f"|r| = {n!r} is not 2")
    return a * (RADIUS / n)


def hopf_project(r) -> np.ndarray:
    """``r^-1 i r`` as an ijk 3-vector (vectorised over leading axes)."""
    a = _r(r)
    u = a / np.linalg.norm(a, axis=-1, keepdims=True)
    return qmul(qmul(qconj(u), QI), u)[..., 1:]


def fibre_direction(r) -> np.ndarray:
    """Unit tangent ``i r / 2`` of the fibre through ``r`` (theta increasing)."""
    return qmul(QI, _r(r)) / RADIUS


def horizontal_lift_vector(r, w) -> np.ndarray:
    """The horizontal unit 4-vector at ``r`` pushed forward by ``dP`` to the S2 tangent ``w``."""
    r = _r(r)
    u = hopf_project(r)
    w = e3(w)
    w = w - np.dot(w, u) * u
    return -qmul(QI, qmul(r, as_quat(w))) / RADIUS


def push_forward(r, tangent) -> np.ndarray:
    """``dP`` of a tangent 4-vector at ``r`` (inverse of :func:`horizontal_lift_vector` on horizontals)."""
    r = _r(r)
    # horizontal part: tangent = -i r w / 2  =>  w = r^-1 (i tangent) * 2 / |r|^2 * 2 / 2
    w = qmul(qconj(r), qmul(QI, _r(tangent))) * (RADIUS / float(np.dot(r, r)))
    return w[1:]


@dataclass(frozen=True)
class Fibre:
    base: np.ndarray

    def point(self, theta):
        """``e^{i theta/2} base``."""
        theta = np.asarray(theta, dtype=float)
        z = np.zeros_like(theta)
        e = np.stack([np.cos(theta / 2), np.sin(theta / 2), z, z], axis=-1)
        return qmul(e, self.base)

    @property
    def circumference(self) -> float:
        return 4 * math.pi


def conjugator_to(u) -> np.ndarray:
    """A unit quaternion ``p`` with ``p^-1 i p = u``."""
    u = e3(u)
    c = float(u[0])
    if c < -1 + 1e-12:
        return np.array([0.0, 0.0, 1.0, 0.0])
    # q rotates i to u under v -> q v q^-1; p = q^-1
    axis = np.cross([1.0, 0.0, 0.0], u)
    q = np.concatenate([[1.0 + c], axis])
    q /= np.linalg.norm(q)
    return qconj(q)


def fiber_through(u) -> Fibre:
    return Fibre(RADIUS * conjugator_to(u))


def fibre_length(fibre: Fibre, samples: int = 4096) -> float:
    """Arc length of the fibre by the periodic trapezoid rule on its speed."""
    theta = np.linspace(0.0, 4 * math.pi, samples, endpoint=False)
    z = np.zeros_like(theta)
    de = np.stack([-np.sin(theta / 2), np.cos(theta / 2), z, z], axis=-1) / 2
    speed = np.linalg.norm(qmul(de, fibre.base), axis=-1)
    return float(np.sum(speed) * 4 * math.pi / samples)


# ---------------------------------------------------------------- arcs in S3_2


@dataclass(frozen=True, eq=False)
class GeodesicArc32:
    start: np.ndarray
    tangent: np.ndarray
    length: float

    def point(self, s):
        s = np.asarray(s, dtype=float)[..., None]
        return np.cos(s / 2) * self.start + RADIUS * np.sin(s / 2) * self.tangent

    def tangent_at(self, s):
        s = np.asarray(s, dtype=float)[..., None]
        return -np.sin(s / 2) * self.start / RADIUS + np.cos(s / 2) * self.tangent

    @property
    def end(self) -> np.ndarray:
        return self.point(self.length)

    @property
    def end_tangent(self) -> np.ndarray:
        return self.tangent_at(self.length)

    def reversed(self) -> "GeodesicArc32":
        return GeodesicArc32(self.end, -self.end_tangent, self.length)

    def transformed(self, rot) -> "GeodesicArc32":
        return GeodesicArc32(rot.apply(self.start), rot.apply(self.tangent), self.length)


def arc32_between(a, b) -> GeodesicArc32:
    """Minor geodesic arc of S3_2 from ``a`` to ``b``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ua = a / RADIUS
    t = b / RADIUS - np.dot(ua, b / RADIUS) * ua
    ang = math.atan2(float(np.linalg.norm(t)), float(np.dot(ua, b / RADIUS)))
    return GeodesicArc32(a, t / np.linalg.norm(t), 2 * ang)


@dataclass(frozen=True)
class LiftedPath:
    arcs: tuple

    @property
    def start(self) -> np.ndarray:
        return self.arcs[0].start

    @property
    def end(self) -> np.ndarray:
        return self.arcs[-1].end

    @property
    def length(self) -> float:
        return sum(a.length for a in self.arcs)

    def sample(self, per_arc: int = 32) -> np.ndarray:
        pts = [a.point(np.linspace(0, a.length, per_arc + 1)) for a in self.arcs]
        return np.concatenate(pts)


def lift_arc(arc: GeodesicArc2, start) -> GeodesicArc32:
    r = _r(start)
    if np.linalg.norm(hopf_project(r) - arc.start) > 1e-7:
        raise BasePointMismatch("lift start does not lie over the arc start")
    w = horizontal_lift_vector(r, arc.tangent)
    return GeodesicArc32(np.array(r, dtype=float), w / np.linalg.norm(w), arc.length)


def lift_path(path, start) -> LiftedPath:
    """Horizontal lift of a piecewise geodesic (polygon or arc sequence) starting at ``start``."""
    arcs: Sequence[GeodesicArc2] = path.arcs if isinstance(path, GeodesicPolygon2) else tuple(path)
    r = s32_point(start)
    if np.linalg.norm(hopf_project(r) - arcs[0].start) > UNIT_TOL * 10:
        raise BasePointMismatch("start does not lie over the first point of the path")
    out = []
    for arc in arcs:
        lifted = lift_arc(arc, r)
        out.append(lifted)
        r = lifted.end
    return LiftedPath(tuple(out))


def fibre_offset(r_end, r_start) -> float:
    """The ``theta`` in (-2pi, 2pi] with ``r_end = e^{i theta/2} r_start``."""
    q = qmul(_r(r_end), qconj(_r(r_start))) / RADIUS**2
    if abs(q[2]) + abs(q[3]) > 1e-7:
        raise BasePointMismatch("points are not on the same fibre")
    return 2 * math.atan2(float(q[1]), float(q[0]))


def lift_displacement(poly: GeodesicPolygon2, start) -> float:
    """Signed fibre displacement of the horizontal lift of a closed polygon.

    Negative when the enclosed region lies on the left of the path, with
    magnitude equal to the enclosed area.
    """
    lifted = lift_path(poly, start)
    return fibre_offset(lifted.end, lifted.start)


def uts2_identify(p) -> tuple[np.ndarray, np.ndarray]:
    """``[p] -> (p^-1 i p, p^-1 j p)``."""
    if isinstance(p, Rotation3):
        p = p.p.array
    elif isinstance(p, Quaternion):
        p = p.array
    return rotate3([1.0, 0.0, 0.0], p), rotate3([0.0, 1.0, 0.0], p)
