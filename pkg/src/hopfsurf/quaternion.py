"""Quaternion algebra and the double covers S3 x S3 -> SO(4), S3 -> SO(3).

Quaternions are stored as ``(t, x, y, z)`` for ``t + xi + yj + zk``.  The
scalar :class:`Quaternion` type is used at API boundaries; the ``q*`` array
functions operate on ``(..., 4)`` arrays and are what the heavy code paths use.

Rotations act on the right: ``h ** [p, q] = p^-1 h q`` and
``[p1, q1][p2, q2] = [p1 p2, q1 q2]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

UNIT_TOL = 1e-9
GROUP_TOL = 1e-7


class NotUnit(ValueError):
    pass


class NotInE3(ValueError):
    pass


# ---------------------------------------------------------------- array layer


def qmul(a, b) -> np.ndarray:
    """Hamilton product of broadcastable ``(..., 4)`` arrays."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    at, ax, ay, az = np.moveaxis(a, -1, 0)
    bt, bx, by, bz = np.moveaxis(b, -1, 0)
    return np.stack(
        [
            at * bt - ax * bx - ay * by - az * bz,
            at * bx + ax * bt + ay * bz - az * by,
            at * by - ax * bz + ay * bt + az * bx,
            at * bz + ax * by - ay * bx + az * bt,
        ],
        axis=-1,
    )


def qconj(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a[..., 1:] *= -1.0
    return a


def qinv(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    return qconj(a) / np.sum(a * a, axis=-1, keepdims=True)


def qexp_i(angle) -> np.ndarray:
    """``e^{i angle}`` as an array (broadcasts over ``angle``)."""
    angle = np.asarray(angle, dtype=float)
    z = np.zeros_like(angle)
    return np.stack([np.cos(angle), np.sin(angle), z, z], axis=-1)


def axis_angle(u, phi: float) -> np.ndarray:
    """``cos(phi/2) + u sin(phi/2)`` for a unit imaginary ``u`` (3- or 4-vector)."""
    u = np.asarray(u, dtype=float)
    if u.shape[-1] == 4:
        u = u[..., 1:]
    return np.concatenate([[math.cos(phi / 2)], math.sin(phi / 2) * u])


def rot4_apply(h, p, q) -> np.ndarray:
    """``p^-1 h q`` for unit ``p``, ``q``; broadcasts over ``h``."""
    return qmul(qmul(qconj(p), h), q)


def reflect_array(h, p) -> np.ndarray:
    """Reflection in the hyperplane through 0 orthogonal to ``p``: ``-conj(h p^-1) p``."""
    return -qmul(qconj(qmul(h, qinv(p))), p)


def canonical_pair(p, q) -> tuple[np.ndarray, np.ndarray]:
    """Pick the representative of ``{(p, q), (-p, -q)}`` whose first sizeable p entry is positive."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    for c in p:
        if abs(c) > UNIT_TOL:
            if c < 0:
                return -p, -q
            break
    return p, q


def canonical_rows(pq: np.ndarray) -> np.ndarray:
    """Vectorised :func:`canonical_pair` on ``(N, 8)`` rows ``[p | q]``."""
    pq = np.array(pq, dtype=float)
    p = pq[:, :4]
    big = np.abs(p) > UNIT_TOL
    first = np.argmax(big, axis=1)
    lead = p[np.arange(len(p)), first]
    pq[lead < 0] *= -1.0
    return pq


# ---------------------------------------------------------------- value types


@dataclass(frozen=True)
class Quaternion:
    t: float = 0.0
    x: float = 0.0
    y: float = 0.0
    z: float = 0.0

    @classmethod
    def from_array(cls, a) -> "Quaternion":
        t, x, y, z = (float(c) for c in np.asarray(a, dtype=float).reshape(4))
        return cls(t, x, y, z)

    @property
    def array(self) -> np.ndarray:
        return np.array([self.t, self.x, self.y, self.z])

    def __mul__(self, other):
        if isinstance(other, Quaternion):
            return Quaternion.from_array(qmul(self.array, other.array))
        return Quaternion(self.t * other, self.x * other, self.y * other, self.z * other)

    def __rmul__(self, other):
        return Quaternion(self.t * other, self.x * other, self.y * other, self.z * other)

    def __add__(self, other: "Quaternion") -> "Quaternion":
        return Quaternion(self.t + other.t, self.x + other.x, self.y + other.y, self.z + other.z)

    def __sub__(self, other: "Quaternion") -> "Quaternion":
        return Quaternion(self.t - other.t, self.x - other.x, self.y - other.y, self.z - other.z)

    def __neg__(self) -> "Quaternion":
        return Quaternion(-self.t, -self.x, -self.y, -self.z)

    def conj(self) -> "Quaternion":
        return Quaternion(self.t, -self.x, -self.y, -self.z)

    def norm(self) -> float:
        return math.sqrt(self.t**2 + self.x**2 + self.y**2 + self.z**2)

    def inverse(self) -> "Quaternion":
        n2 = self.t**2 + self.x**2 + self.y**2 + self.z**2
        return self.conj() * (1.0 / n2)

    def isclose(self, other: "Quaternion", tol: float = 1e-12) -> bool:
        return bool(np.max(np.abs(self.array - other.array)) <= tol)


ONE = Quaternion(1.0)
I = Quaternion(0.0, 1.0)
J = Quaternion(0.0, 0.0, 1.0)
K = Quaternion(0.0, 0.0, 0.0, 1.0)


def exp_i(angle: float) -> Quaternion:
    return Quaternion(math.cos(angle), math.sin(angle))


def unit(q, tol: float = UNIT_TOL) -> Quaternion:
    """Validate ``q`` as a unit quaternion, renormalising tiny drift.

    Raises :class:`NotUnit` when ``| |q| - 1 | > tol``.
    """
    a = q.array if isinstance(q, Quaternion) else np.asarray(q, dtype=float)
    n = float(np.linalg.norm(a))
    if abs(n - 1.0) > tol:
        raise NotUnit(f"|q| = {n!r} is not 1 within {tol}")
    return Quaternion.from_array(a / n)


def _as_array(q) -> np.ndarray:
    return q.array if isinstance(q, Quaternion) else np.asarray(q, dtype=float)


@dataclass(frozen=True, eq=False)
class Rotation4:
    """The element ``[p, q]`` of SO(4), stored as its canonical sign representative."""

    p: Quaternion
    q: Quaternion

    def __post_init__(self):
        p, q = canonical_pair(unit(self.p).array, unit(self.q).array)
        object.__setattr__(self, "p", Quaternion.from_array(p))
        object.__setattr__(self, "q", Quaternion.from_array(q))

    @classmethod
    def from_row(cls, row) -> "Rotation4":
        row = np.asarray(row, dtype=float)
        return cls(Quaternion.from_array(row[:4]), Quaternion.from_array(row[4:]))

    @classmethod
    def identity(cls) -> "Rotation4":
        return cls(ONE, ONE)

    @property
    def row(self) -> np.ndarray:
        return np.concatenate([self.p.array, self.q.array])

    def canon(self) -> "Rotation4":
        return Rotation4(self.p, self.q)

    def __matmul__(self, other: "Rotation4") -> "Rotation4":
        return compose(self, other)

    def inverse(self) -> "Rotation4":
        return Rotation4(self.p.conj(), self.q.conj())

    def __eq__(self, other) -> bool:
        if not isinstance(other, Rotation4):
            return NotImplemented
        return bool(np.max(np.abs(self.row - other.row)) <= GROUP_TOL)

    __hash__ = None

    def apply(self, h) -> np.ndarray:
        """Apply to an array of points ``(..., 4)``."""
        return rot4_apply(h, self.p.array, self.q.array)

    def matrix(self) -> np.ndarray:
        """4x4 matrix ``A`` with ``apply(h) == h @ A`` for row vectors."""
        return self.apply(np.eye(4))

    def preserves_fibration(self, tol: float = GROUP_TOL) -> bool:
        """True when ``p`` has the form ``e^{i tau}`` or ``e^{i tau} j``."""
        p = self.p.array
        return bool(abs(p[2]) + abs(p[3]) <= tol or abs(p[0]) + abs(p[1]) <= tol)

    def flips_fibres(self, tol: float = GROUP_TOL) -> bool:
        """True for ``p = e^{i tau} j`` (the induced map on S2 is orientation reversing)."""
        p = self.p.array
        return bool(abs(p[0]) + abs(p[1]) <= tol)


@dataclass(frozen=True, eq=False)
class Rotation3:
    """The element ``[p]`` of SO(3)."""

    p: Quaternion

    def __post_init__(self):
        p, _ = canonical_pair(unit(self.p).array, np.zeros(4))
        object.__setattr__(self, "p", Quaternion.from_array(p))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Rotation3):
            return NotImplemented
        return bool(np.max(np.abs(self.p.array - other.p.array)) <= GROUP_TOL)

    __hash__ = None


# ---------------------------------------------------------------- operations


def quat_mul(a: Quaternion, b: Quaternion) -> Quaternion:
    return a * b


def compose(r1: Rotation4, r2: Rotation4) -> Rotation4:
    """First ``r1`` then ``r2`` (right action)."""
    return Rotation4(r1.p * r2.p, r1.q * r2.q)


def apply_rotation4(h, r: Rotation4) -> Quaternion:
    return Quaternion.from_array(r.apply(_as_array(h)))


def apply_rotation3(v, r: Rotation3) -> Quaternion:
    a = _as_array(v)
    if abs(a[0]) > UNIT_TOL:
        raise NotInE3(f"t-component {a[0]!r} is not zero")
    p = r.p.array
    out = rot4_apply(a, p, p)
    if abs(out[0]) > UNIT_TOL:
        raise NotInE3(f"image left E3 (t = {out[0]!r})")
    out[0] = 0.0
    return Quaternion.from_array(out)


def reflect_hyperplane(h, p) -> Quaternion:
    return Quaternion.from_array(reflect_array(_as_array(h), unit(p).array))


def pi_rotation_about_geodesic(tau: float) -> Rotation4:
    """``[e^{i tau} j, e^{i tau} j]``: the half-turn about ``2(cos(s/2) + e^{i tau} j sin(s/2))``."""
    u = exp_i(tau) * J
    return Rotation4(u, u)


def pi_rotation_about_plane(a, b) -> Rotation4:
    """Half-turn of R^4 fixing ``span(a, b)`` pointwise (any independent pair)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a = a / np.linalg.norm(a)
    b = b - np.dot(a, b) * a
    b = b / np.linalg.norm(b)
    u = qmul(qconj(a), b)  # purely imaginary since a is orthogonal to b
    u[0] = 0.0
    u /= np.linalg.norm(u)
    p = qmul(qmul(a, u), qconj(a))
    return Rotation4(Quaternion.from_array(p), Quaternion.from_array(u))


def rotation4_fixes_some_point(r: Rotation4, tol: float = GROUP_TOL) -> bool:
    """``[p, q]`` has a fixed point on the sphere iff ``p`` and ``q`` are conjugate (equal real parts)."""
    return abs(r.p.t - r.q.t) <= tol
