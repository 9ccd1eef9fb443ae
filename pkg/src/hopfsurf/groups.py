"""The lifted symmetry groups ``G_R`` as finite sets of quaternion pairs.

Elements are kept as ``(N, 8)`` float arrays of canonical rows ``[p | q]``;
:class:`SymmetryGroup` wraps such an array together with a hash index so
membership tests are O(1).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .quaternion import (
    GROUP_TOL,
    Quaternion,
    Rotation4,
    axis_angle,
    canonical_rows,
    qconj,
    qexp_i,
    qmul,
)
from .sphere2 import E_I, E_K, U_I, U_I2, U_O, U_T, U_T2, equator_point

CLOSURE_LIMIT = 10**4

FAMILIES = ("C", "D", "Dh", "T2", "T3", "O2", "O3", "O4", "I2", "I3", "I5")

# the eleven rows in the order the quadrilateral table lists them
_ANGLE_NAME = {"2": "pi/2", "3": "pi/3", "4": "pi/4", "5": "pi/5"}


class ClosureOverflow(RuntimeError):
    pass


class OutOfTableDomain(ValueError):
    pass


@dataclass(frozen=True)
class GroupSpec:
    family: str
    m: int = 0
    n: int = 0
    l: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.family == "C" and (self.m < 1 or self.n < 1):
            raise ValueError("C(m, n) needs m, n >= 1")
        if self.family in ("D", "Dh") and self.l < 1:
            raise ValueError("D needs l >= 1")

    @property
    def name(self) -> str:
        f = self.family
        if f == "C":
            return f"C({self.m},{self.n})"
        if f == "D":
            return f"D({self.l})"
        if f == "Dh":
            return f"D({self.l},pi/2)"
        return f"{f[0]}({_ANGLE_NAME[f[1]]})"

    def __str__(self) -> str:
        return self.name

    @property
    def slug(self) -> str:
        return re.sub(r"[^A-Za-z0-9]+", "_", self.name).strip("_")

    @property
    def is_minimal_surface_case(self) -> bool:
        m, n = angle_labels(self)
        return m >= 2 and n >= 2


def C(m: int, n: int) -> GroupSpec:
    return GroupSpec("C", m=m, n=n)


def D(l: int, half: bool = False) -> GroupSpec:
    return GroupSpec("Dh" if half else "D", l=l)


T2, T3 = GroupSpec("T2"), GroupSpec("T3")
O2, O3, O4 = GroupSpec("O2"), GroupSpec("O3"), GroupSpec("O4")
I2, I3, I5 = GroupSpec("I2"), GroupSpec("I3"), GroupSpec("I5")
SPECIAL_SPECS = (T2, T3, O2, O3, O4, I2, I3, I5)


def parse_spec(text: str) -> GroupSpec:
    """Parse names like ``C(2,3)``, ``D(4)``, ``D(3,pi/2)``, ``O(pi/3)`` or ``I(π/5)``."""
    s = text.replace(" ", "").replace("π", "pi")
    m = re.fullmatch(r"([CDTOI])\((.*)\)", s)
    if not m:
        raise ValueError(f"cannot parse group spec {text!r}")
    fam, args = m.group(1), m.group(2).split(",")
    if fam == "C":
        if len(args) != 2:
            raise ValueError("C takes two integers")
        return C(int(args[0]), int(args[1]))
    if fam == "D":
        if len(args) == 1:
            return D(int(args[0]))
        if len(args) == 2 and args[1] == "pi/2":
            return D(int(args[0]), half=True)
        raise ValueError(f"cannot parse {text!r}")
    a = re.fullmatch(r"pi/(\d)", args[0]) if len(args) == 1 else None
    if not a:
        raise ValueError(f"cannot parse {text!r}")
    spec_family = fam + a.group(1)
    if spec_family not in FAMILIES:
        raise ValueError(f"{text!r} is not one of the listed groups")
    return GroupSpec(spec_family)


def all_specs(params=range(2, 5)) -> list[GroupSpec]:
    """The eleven families with small parameter choices."""
    out = [C(m, n) for m in params for n in params]
    out += [D(l) for l in params] + [D(l, half=True) for l in params]
    return out + list(SPECIAL_SPECS)


def representative_specs() -> list[GroupSpec]:
    """One member per table row."""
    return [C(2, 3), D(3), D(3, half=True), *SPECIAL_SPECS]


# ---------------------------------------------------------------- generators


def _pair(p, q) -> Rotation4:
    return Rotation4(Quaternion.from_array(p), Quaternion.from_array(q))


def _e(angle: float) -> np.ndarray:
    return qexp_i(angle)


def _rot(axis, angle_half: float) -> np.ndarray:
    """``cos(angle_half) + axis sin(angle_half)``."""
    return axis_angle(axis, 2 * angle_half)


def _halfturn(axis) -> Rotation4:
    u = np.concatenate([[0.0], np.asarray(axis, dtype=float)])
    return _pair(u, u)


def generators(spec: GroupSpec) -> list[Rotation4]:
    f, pi = spec.family, math.pi
    if f == "C":
        m, n = spec.m, spec.n
        return [
            _pair(_e(pi / m), _rot(E_I, pi / m)),
            _pair(_e(pi / n), _rot(-E_I, pi / n)),
            _halfturn([0.0, 1.0, 0.0]),
        ]
    if f == "D":
        l = spec.l
        return [
            _pair(_e(pi / 2), _rot(E_K, pi / 2)),
            _pair(_e(pi / 2), _rot(equator_point(-pi / l), pi / 2)),
            _halfturn([0.0, 1.0, 0.0]),
        ]
    if f == "Dh":
        l = spec.l
        return [
            _pair(_e(pi / l), _rot(E_I, pi / l)),
            _pair(_e(pi / 2), _rot(E_K, pi / 2)),
            _halfturn([0.0, 1.0, 0.0]),
        ]
    kk = _halfturn(E_K)
    table = {
        "T2": [(3, U_T, 3), (3, U_T2, 3)],
        "T3": [(2, E_I, 2), (3, U_T, 3)],
        "O2": [(3, U_T, 3), (4, E_I, 4)],
        "O3": [(2, U_O, 2), (4, E_I, 4)],
        "O4": [(2, U_O, 2), (3, U_T, 3)],
        "I2": [(3, U_I, 3), (5, U_I2, 5)],
        "I3": [(2, E_I, 2), (5, U_I2, 5)],
        "I5": [(2, E_I, 2), (3, U_I, 3)],
    }
    gens = [_pair(_e(pi / a), _rot(u, pi / b)) for a, u, b in table[f]]
    if f[0] == "T":
        gens.append(_halfturn(equator_point(pi / 4)))
    else:
        gens.append(kk)
    return gens


# ---------------------------------------------------------------- closure


def _keys(rows: np.ndarray) -> list[bytes]:
    r = np.round(rows, 6) + 0.0
    return [row.tobytes() for row in r]


def _mul_rows(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise composition ``a`` then ``b`` of ``(N, 8)`` arrays (``b`` broadcasts)."""
    return np.concatenate([qmul(a[..., :4], b[..., :4]), qmul(a[..., 4:], b[..., 4:])], axis=-1)


@dataclass(eq=False)
class SymmetryGroup:
    generators: list
    rows: np.ndarray
    spec: GroupSpec | None = None
    _index: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self._index:
            self._index = {k: i for i, k in enumerate(_keys(self.rows))}

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def order(self) -> int:
        return len(self.rows)

    def __iter__(self):
        return (Rotation4.from_row(r) for r in self.rows)

    def element(self, i: int) -> Rotation4:
        return Rotation4.from_row(self.rows[i])

    def index_of(self, rows) -> np.ndarray:
        """Index of each canonical row in the group, -1 when absent."""
        rows = canonical_rows(np.atleast_2d(rows))
        out = np.full(len(rows), -1, dtype=int)
        for j, (k, row) in enumerate(zip(_keys(rows), rows)):
            i = self._index.get(k)
            if i is None:
                i = self._slow_find(row)
            out[j] = i
        return out

    def _slow_find(self, row) -> int:
        # rounding may split near a grid boundary; fall back to a tolerance scan
        d = np.max(np.abs(self.rows - row), axis=1)
        i = int(np.argmin(d))
        return i if d[i] <= GROUP_TOL else -1

    def contains(self, r) -> bool:
        row = r.row if isinstance(r, Rotation4) else np.asarray(r)
        return bool(self.index_of(row)[0] >= 0)

    def is_subgroup_of(self, other: "SymmetryGroup") -> bool:
        return bool(np.all(other.index_of(self.rows) >= 0))

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Images of ``points`` (``(..., 4)``) under every element: shape ``(|G|, ..., 4)``."""
        pts = np.asarray(points, dtype=float)
        p = self.rows[:, :4].reshape((-1,) + (1,) * (pts.ndim - 1) + (4,))
        q = self.rows[:, 4:].reshape(p.shape)
        return qmul(qmul(qconj(p), pts[None]), q)

    def is_closed(self) -> bool:
        for g in self.generators:
            prod = _mul_rows(self.rows, g.row)
            if np.any(self.index_of(prod) < 0):
                return False
        inv = self.rows.copy()
        inv[:, 1:4] *= -1
        inv[:, 5:8] *= -1
        return bool(np.all(self.index_of(inv) >= 0))

    def orientation_signs(self) -> np.ndarray:
        """+1 where ``p = e^{i tau}``, -1 where ``p = e^{i tau} j``."""
        p = self.rows[:, :4]
        flips = np.abs(p[:, 0]) + np.abs(p[:, 1]) <= GROUP_TOL
        return np.where(flips, -1, 1)

    def kernel_rows(self) -> np.ndarray:
        """Elements inducing the identity on S2: ``q = +-1`` and ``p = e^{i tau}``."""
        q = self.rows[:, 4:]
        mask = (np.abs(np.abs(q[:, 0]) - 1.0) <= GROUP_TOL) & (self.orientation_signs() > 0)
        return self.rows[mask]

    def conjugate(self, w: Rotation4) -> "SymmetryGroup":
        """The group ``w^-1 G w``."""
        winv = w.inverse().row
        rows = _mul_rows(_mul_rows(np.broadcast_to(winv, self.rows.shape), self.rows), w.row)
        gens = [w.inverse() @ g @ w for g in self.generators]
        return SymmetryGroup(gens, canonical_rows(rows), self.spec)

    def intersection(self, other: "SymmetryGroup") -> np.ndarray:
        return self.rows[other.index_of(self.rows) >= 0]

    def to_json(self) -> dict:
        return {
            "spec": str(self.spec) if self.spec else None,
            "order": self.order,
            "generators": [[round(float(c), 15) for c in g.row] for g in self.generators],
            "kernel_order": int(len(self.kernel_rows())),
        }


def closure(gens, limit: int = CLOSURE_LIMIT, spec: GroupSpec | None = None) -> SymmetryGroup:
    """Breadth-first saturation of the generated group with canonical-form dedup."""
    gens = list(gens)
    ident = Rotation4.identity().row
    rows = [ident]
    index = {_keys(ident[None])[0]: 0}
    frontier = ident[None]
    while len(frontier):
        new = []
        for g in gens:
            prod = canonical_rows(_mul_rows(frontier, g.row))
            for k, row in zip(_keys(prod), prod):
                if k in index:
                    continue
                index[k] = len(rows)
                rows.append(row)
                new.append(row)
                if len(rows) > limit:
                    raise ClosureOverflow(f"closure exceeded {limit} elements")
        frontier = np.array(new).reshape(-1, 8)
    return SymmetryGroup(gens, np.array(rows), spec, index)


_GROUP_CACHE: dict[GroupSpec, SymmetryGroup] = {}


def build_group(spec: GroupSpec) -> SymmetryGroup:
    if spec not in _GROUP_CACHE:
        _GROUP_CACHE[spec] = closure(generators(spec), spec=spec)
    return _GROUP_CACHE[spec]


def group_order(spec: GroupSpec) -> int:
    f = spec.family
    if f == "C":
        return 2 * spec.m * spec.n
    if f == "D":
        return 8 * spec.l
    if f == "Dh":
        return 4 * spec.l**2
    return {"T2": 144, "T3": 96, "O2": 576, "O3": 384, "O4": 288, "I2": 3600, "I3": 2400, "I5": 1440}[f]


def angle_denominators(spec: GroupSpec) -> tuple[int, int, int, int]:
    """Vertex angles of the fundamental quadrilateral as ``pi/a`` for K, L, M, N."""
    f = spec.family
    if f == "C":
        return (spec.m, spec.n, spec.m, spec.n)
    if f == "D":
        return (2, 2, 2, 2)
    if f == "Dh":
        return (spec.l, 2, 2, spec.l)
    return {
        "T2": (3, 3, 3, 3),
        "T3": (2, 3, 2, 3),
        "O2": (4, 4, 3, 3),
        "O3": (4, 2, 4, 2),
        "O4": (2, 3, 3, 2),
        "I2": (3, 5, 5, 3),
        "I3": (2, 5, 2, 5),
        "I5": (2, 3, 2, 3),
    }[f]


def angle_labels(spec: GroupSpec) -> tuple[int, int]:
    """The two angle denominators ``(m, n)``; each occurs at two vertices."""
    a = angle_denominators(spec)
    vals = sorted(set(a), key=a.index)
    if len(vals) == 1:
        return (vals[0], vals[0])
    return (vals[0], vals[1])


# ---------------------------------------------------------------- special subgroups


def poincare_generators() -> list[Rotation4]:
    one = np.array([1.0, 0.0, 0.0, 0.0])
    return [_pair(one, _rot(E_I, math.pi / 2)), _pair(one, _rot(U_I, math.pi / 3))]


def poincare_subgroup() -> SymmetryGroup:
    return closure(poincare_generators())


def acts_freely(group: SymmetryGroup, tol: float = GROUP_TOL) -> bool:
    """No non-identity element has a fixed point (``[p, q]`` fixes a point iff Re p = Re q)."""
    p, q = group.rows[:, :4], group.rows[:, 4:]
    ident = (np.max(np.abs(p - [1, 0, 0, 0]), axis=1) <= tol) & (np.max(np.abs(q - [1, 0, 0, 0]), axis=1) <= tol)
    fixes = np.abs(p[:, 0] - q[:, 0]) <= tol
    return bool(not np.any(fixes & ~ident))


_ISO_TABLE = {"T3": 192, "O2": 1152, "O3": 768, "O4": 576, "I2": 7200, "I3": 4800, "I5": 2880}


def isometry_group_order(spec: GroupSpec) -> int:
    f = spec.family
    if f == "C":
        m, n = spec.m, spec.n
        if m == n:
            if m >= 3:
                return 16 * m * m
        elif (m - 1) * (n - 1) >= 2:
            return 8 * m * n
        raise OutOfTableDomain(f"{spec} is outside the tabulated range")
    if f in _ISO_TABLE:
        return _ISO_TABLE[f]
    raise OutOfTableDomain(f"no tabulated isometry group order for {spec}")


def conjugation_witness(spec: GroupSpec, t: int) -> Rotation4:
    """``[e^{pi i / t}, 1]``."""
    if t < 1:
        raise ValueError("t must be positive")
    return _pair(_e(math.pi / t), np.array([1.0, 0.0, 0.0, 0.0]))


def conjugation_index(group: SymmetryGroup, w: Rotation4) -> tuple[int, int]:
    """``(|G|, |G cap w^-1 G w|)``."""
    conj = group.conjugate(w)
    return group.order, len(group.intersection(conj))
