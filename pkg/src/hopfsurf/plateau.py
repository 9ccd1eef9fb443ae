"""Discrete minimal disks spanning fundamental quadrilaterals and their closed extensions.

Surfaces are piecewise-flat triangle meshes in R4 whose vertices lie on the
radius-2 sphere.  The area functional is the sum of flat triangle areas; the
optimiser moves interior vertices by projected gradient descent and retracts
them onto the sphere by renormalisation.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .groups import GroupSpec, SymmetryGroup, acts_freely, build_group, group_order
from .hopf import RADIUS
from .quaternion import UNIT_TOL, Rotation4
from .skeleton import (
    Quadrilateral32,
    complex_counts,
    convex_hull,
    fundamental_quadrilateral,
    genus,
    quad_symmetry,
)

log = logging.getLogger(__name__)

INTERIOR = -1
CORNER_BASE = 4  # tags 4..7 are the corners K, L, M, N; 0..3 are the open edges KL, LM, MN, NK
WELD_TOL = 1e-6
DEFAULT_BUDGET = 2_000_000


class NoConvergence(RuntimeError):
    def __init__(self, message, mesh=None, diagnostics=None):
        super().__init__(message)
        self.mesh = mesh
        self.diagnostics = diagnostics or {}


class WeldFailure(RuntimeError):
    pass


class NonManifold(RuntimeError):
    pass


class NotFree(ValueError):
    pass


class NotInvariant(ValueError):
    pass


class BudgetExceeded(ValueError):
    pass


# ---------------------------------------------------------------- mesh type


@dataclass(eq=False)
class SurfaceMesh:
    vertices: np.ndarray  # (V, 4)
    faces: np.ndarray  # (F, 3) int
    tags: np.ndarray  # (V,) int

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def copy(self) -> "SurfaceMesh":
        return SurfaceMesh(self.vertices.copy(), self.faces.copy(), self.tags.copy())

    @property
    def interior(self) -> np.ndarray:
        return np.flatnonzero(self.tags == INTERIOR)

    @property
    def boundary(self) -> np.ndarray:
        return np.flatnonzero(self.tags != INTERIOR)

    def directed_edges(self) -> np.ndarray:
        f = self.faces
        return np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])

    def edges(self) -> np.ndarray:
        return np.unique(np.sort(self.directed_edges(), axis=1), axis=0)

    def edge_face_counts(self) -> tuple[np.ndarray, np.ndarray]:
        und = np.sort(self.directed_edges(), axis=1)
        return np.unique(und, axis=0, return_counts=True)

    def boundary_edges(self) -> np.ndarray:
        e, c = self.edge_face_counts()
        return e[c == 1]

    def euler_characteristic(self) -> int:
        used = np.unique(self.faces)
        return int(len(used) - len(self.edges()) + len(self.faces))

    def genus(self) -> int:
        chi = self.euler_characteristic()
        return 1 - chi // 2

    def area(self) -> float:
        return float(np.sum(triangle_areas(self.vertices, self.faces)))

    def is_closed(self) -> bool:
        return len(self.boundary_edges()) == 0

    def is_oriented_manifold(self) -> bool:
        """Every edge in exactly two faces, traversed once in each direction."""
        d = self.directed_edges()
        if len(np.unique(d, axis=0)) != len(d):
            return False
        _, counts = self.edge_face_counts()
        if np.any(counts != 2):
            return False
        fwd = {tuple(x) for x in d.tolist()}
        return all((b, a) in fwd for a, b in d.tolist())

    def norm_error(self) -> float:
        return float(np.max(np.abs(np.linalg.norm(self.vertices, axis=1) - RADIUS)))


# ---------------------------------------------------------------- area and gradient


def triangle_areas(x: np.ndarray, faces: np.ndarray) -> np.ndarray:
    a, b, c = x[faces[:, 0]], x[faces[:, 1]], x[faces[:, 2]]
    u, v = b - a, c - a
    uu = np.einsum("ij,ij->i", u, u)
    vv = np.einsum("ij,ij->i", v, v)
    uv = np.einsum("ij,ij->i", u, v)
    return 0.5 * np.sqrt(np.maximum(uu * vv - uv * uv, 0.0))


def area_gradient(x: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """Gradient of the total flat-triangle area with respect to every vertex."""
    a, b, c = x[faces[:, 0]], x[faces[:, 1]], x[faces[:, 2]]
    u, v = b - a, c - a
    uu = np.einsum("ij,ij->i", u, u)
    vv = np.einsum("ij,ij->i", v, v)
    uv = np.einsum("ij,ij->i", u, v)
    A = 0.5 * np.sqrt(np.maximum(uu * vv - uv * uv, 0.0))
    A = np.where(A > 0, A, np.inf)[:, None]
    gb = (vv[:, None] * u - uv[:, None] * v) / (4 * A)
    gc = (uu[:, None] * v - uv[:, None] * u) / (4 * A)
    ga = -(gb + gc)
    g = np.zeros_like(x)
    for col, part in ((0, ga), (1, gb), (2, gc)):
        np.add.at(g, faces[:, col], part)
    return g


def project_tangent(x: np.ndarray, g: np.ndarray) -> np.ndarray:
    xn = x / np.linalg.norm(x, axis=1, keepdims=True)
    return g - np.einsum("ij,ij->i", g, xn)[:, None] * xn


def retract(x: np.ndarray) -> np.ndarray:
    return RADIUS * x / np.linalg.norm(x, axis=1, keepdims=True)


def dual_areas(x: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """Barycentric dual-cell area of each vertex."""
    A = triangle_areas(x, faces) / 3
    out = np.zeros(len(x))
    for col in range(3):
        np.add.at(out, faces[:, col], A)
    return out


def cross4(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Generalised cross product in R4: orthogonal to ``a``, ``b``, ``c``, with norm their 3-volume."""
    m = np.stack([a, b, c], axis=-2)  # (..., 3, 4)
    out = np.empty(a.shape)
    for k in range(4):
        cols = [c_ for c_ in range(4) if c_ != k]
        out[..., k] = (-1) ** (k + 1) * np.linalg.det(m[..., cols])
    return out


def face_normals(x: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """Per-face normals inside the sphere, scaled by twice the face area times the radius."""
    a, b, c = x[faces[:, 0]], x[faces[:, 1]], x[faces[:, 2]]
    centre = (a + b + c) / 3
    centre = RADIUS * centre / np.linalg.norm(centre, axis=1, keepdims=True)
    return cross4(centre, b - a, c - a)


def vertex_normals(x: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """Unit normal of the surface inside the sphere at each vertex.

    Area-weighted sum of the adjacent face normals, made orthogonal to the
    position vector.  Consistently oriented faces give consistently oriented
    normals.
    """
    fn = face_normals(x, faces)
    out = np.zeros_like(x)
    for col in range(3):
        np.add.at(out, faces[:, col], fn)
    xn = x / np.linalg.norm(x, axis=1, keepdims=True)
    out -= np.einsum("ij,ij->i", out, xn)[:, None] * xn
    nrm = np.linalg.norm(out, axis=1, keepdims=True)
    return np.divide(out, nrm, out=np.zeros_like(out), where=nrm > 0)


def normal_gradient(x: np.ndarray, faces: np.ndarray, free: np.ndarray) -> np.ndarray:
    """Area gradient of the free vertices projected onto the surface normal inside the sphere."""
    g = area_gradient(x, faces)[free]
    n = vertex_normals(x, faces)[free]
    return np.einsum("ij,ij->i", g, n)[:, None] * n


def mean_curvature_residual(mesh: SurfaceMesh, which=None) -> float:
    """Max over interior vertices of |normal component of the area gradient| / dual area."""
    idx = mesh.interior if which is None else np.asarray(which)
    if len(idx) == 0:
        return 0.0
    g = area_gradient(mesh.vertices, mesh.faces)
    n = vertex_normals(mesh.vertices, mesh.faces)
    da = dual_areas(mesh.vertices, mesh.faces)
    comp = np.abs(np.einsum("ij,ij->i", g[idx], n[idx])) / da[idx]
    return float(np.max(comp))


def projected_gradient_norm(mesh: SurfaceMesh) -> float:
    """Max over interior vertices of the normal component of the area gradient."""
    idx = mesh.interior
    if len(idx) == 0:
        return 0.0
    g = normal_gradient(mesh.vertices, mesh.faces, idx)
    return float(np.max(np.linalg.norm(g, axis=1)))


# ---------------------------------------------------------------- initial disk


def grid_index(i: int, j: int, refinement: int) -> int:
    return j * (refinement + 1) + i


def init_disk(q: Quadrilateral32, refinement: int = 16) -> SurfaceMesh:
    """Coons patch over the quadrilateral on a ``(R+1)^2`` grid, projected to the sphere.

    Grid row ``j = 0`` runs along KL, column ``i = R`` along LM, row ``j = R``
    along NM (MN reversed) and column ``i = 0`` along KN (NK reversed).
    """
    R = int(refinement)
    if R < 2:
        raise ValueError("refinement must be at least 2")
    pts = q.edge_points(R)  # (4, R+1, 4)
    bottom = pts[0]
    right = pts[1]
    top = pts[2][::-1]
    left = pts[3][::-1]
    s = np.linspace(0.0, 1.0, R + 1)
    U, W = np.meshgrid(s, s)  # U[j, i] = s_i, W[j, i] = s_j
    U = U[..., None]
    W = W[..., None]
    K, L, M, N = q.vertices
    P = (
        (1 - W) * bottom[None, :, :]
        + W * top[None, :, :]
        + (1 - U) * left[:, None, :]
        + U * right[:, None, :]
        - ((1 - U) * (1 - W) * K + U * (1 - W) * L + U * W * M + (1 - U) * W * N)
    )
    norms = np.linalg.norm(P, axis=-1)
    if np.min(norms) < 1e-6:
        raise ValueError("Coons patch passes through the origin; cannot project")
    P = RADIUS * P / norms[..., None]
    # exact boundary
    P[0, :] = bottom
    P[:, R] = right
    P[R, :] = top
    P[:, 0] = left
    tags = np.full((R + 1, R + 1), INTERIOR, dtype=int)
    tags[0, :] = 0
    tags[:, R] = 1
    tags[R, :] = 2
    tags[:, 0] = 3
    tags[0, 0] = CORNER_BASE + 0
    tags[0, R] = CORNER_BASE + 1
    tags[R, R] = CORNER_BASE + 2
    tags[R, 0] = CORNER_BASE + 3
    X = P.reshape(-1, 4)
    faces = []
    for j in range(R):
        for i in range(R):
            a = grid_index(i, j, R)
            b = grid_index(i + 1, j, R)
            c = grid_index(i + 1, j + 1, R)
            d = grid_index(i, j + 1, R)
            if np.linalg.norm(X[a] - X[c]) <= np.linalg.norm(X[b] - X[d]):
                faces += [(a, b, c), (a, c, d)]
            else:
                faces += [(a, b, d), (b, c, d)]
    return SurfaceMesh(X, np.array(faces, dtype=int), tags.reshape(-1))


def boundary_deviation(mesh: SurfaceMesh, q: Quadrilateral32) -> float:
    """Largest distance from a tagged boundary vertex to its quadrilateral edge arc."""
    worst = 0.0
    for t in range(4):
        e = q.edges[t]
        sel = np.flatnonzero((mesh.tags == t) | (mesh.tags == CORNER_BASE + t) | (mesh.tags == CORNER_BASE + (t + 1) % 4))
        if len(sel) == 0:
            continue
        x = mesh.vertices[sel]
        a = e.start / RADIUS
        b = e.tangent
        ca, cb = x @ a, x @ b
        s = 2 * np.arctan2(cb, ca)
        s = np.clip(s, 0.0, e.length)
        worst = max(worst, float(np.max(np.linalg.norm(x - e.point(s), axis=1))))
    return worst


# ---------------------------------------------------------------- optimiser


@dataclass
class SolverOptions:
    refinement: int = 16
    max_iterations: int = 20000
    gradient_tol: float = 1e-8
    armijo: float = 1e-4
    shrink: float = 0.5
    max_backtracks: int = 40
    initial_step: float = 0.05
    symmetrize: bool = True

    def __post_init__(self):
        if self.refinement < 2:
            raise ValueError("refinement must be at least 2")
        if self.gradient_tol <= 0 or self.armijo <= 0:
            raise ValueError("tolerances must be positive")


@dataclass
class SolveResult:
    mesh: SurfaceMesh
    iterations: int
    area: float
    gradient_norm: float
    residual: float
    converged: bool
    areas: list = field(default_factory=list)
    symmetry_deviation: float | None = None
    seconds: float = 0.0


def symmetry_permutation(mesh: SurfaceMesh, rot: Rotation4, tol: float = 1e-8) -> np.ndarray | None:
    """``perm`` with ``rot(x[i]) == x[perm[i]]``, or None when the grid is not invariant."""
    img = rot.apply(mesh.vertices)
    d, perm = cKDTree(mesh.vertices).query(img)
    if np.max(d) > tol or len(np.unique(perm)) != len(perm):
        return None
    return perm


def symmetry_deviation(mesh: SurfaceMesh, rot: Rotation4) -> float:
    """Hausdorff distance between the vertex set and its image."""
    img = rot.apply(mesh.vertices)
    tree = cKDTree(mesh.vertices)
    d1, _ = tree.query(img)
    d2, _ = cKDTree(img).query(mesh.vertices)
    return float(max(np.max(d1), np.max(d2)))


def _symmetrize(x: np.ndarray, rot: Rotation4, perm: np.ndarray, free: np.ndarray) -> np.ndarray:
    img = np.empty_like(x)
    img[perm] = rot.apply(x)
    y = x.copy()
    y[free] = retract(0.5 * (x[free] + img[free]))
    return y


def minimize_area(
    mesh: SurfaceMesh,
    opts: SolverOptions | None = None,
    symmetry: Rotation4 | None = None,
    raise_on_failure: bool = True,
) -> SolveResult:
    """Projected gradient descent on the interior vertices with backtracking line search.

    The area gradient is projected onto the surface normal inside the sphere:
    its tangential part only reshuffles vertices along the surface and, left
    in, collapses triangles.  Each iteration starts from a Barzilai-Borwein step estimate and halves it
    until the Armijo condition holds, so accepted areas never increase.
    """
    opts = opts or SolverOptions()
    t0 = time.perf_counter()
    m = mesh.copy()
    free = m.interior
    faces = m.faces
    perm = None
    if opts.symmetrize and symmetry is not None:
        perm = symmetry_permutation(m, symmetry)
        if perm is None:
            log.warning("grid is not invariant under the symmetry; skipping symmetrisation")
    x = m.vertices
    face_area = triangle_areas(x, faces)
    area = float(np.sum(face_area))
    areas = [area]
    step = opts.initial_step
    prev_x = prev_g = None
    gnorm = math.inf
    it = 0
    converged = False
    for it in range(1, opts.max_iterations + 1):
        g = np.zeros_like(x)
        g[free] = normal_gradient(x, faces, free)
        gnorm = float(np.max(np.linalg.norm(g[free], axis=1))) if len(free) else 0.0
        if gnorm <= opts.gradient_tol:
            converged = True
            it -= 1
            break
        if prev_g is not None:
            s = (x - prev_x)[free].ravel()
            y = (g - prev_g)[free].ravel()
            sy = float(s @ y)
            if sy > 0:
                step = float(s @ s) / sy
        gg = float(np.sum(g[free] ** 2))
        accepted = False
        for _ in range(opts.max_backtracks):
            trial = x.copy()
            trial[free] = retract(x[free] - step * g[free])
            if perm is not None:
                trial = _symmetrize(trial, symmetry, perm, free)
            trial_area = triangle_areas(trial, faces)
            # summing per-face differences keeps the decrease test accurate far below
            # the rounding error of the total area
            decrease = float(np.sum(face_area - trial_area))
            noise = 64 * np.finfo(float).eps * area
            if abs(decrease) <= noise:
                # the measured change is rounding noise: estimate it by the trapezoid
                # rule on the directional derivatives, which has no cancellation
                g_trial = np.zeros_like(x)
                g_trial[free] = normal_gradient(trial, faces, free)
                disp = (x - trial)[free].ravel()
                decrease = 0.5 * float(disp @ (g[free].ravel() + g_trial[free].ravel()))
            if decrease >= opts.armijo * step * gg and decrease > 0:
                accepted = True
                break
            step *= opts.shrink
        if not accepted:
            # no further decrease representable in floating point
            break
        prev_x, prev_g = x, g
        x, face_area = trial, trial_area
        area = float(np.sum(face_area))
        areas.append(area)
    m.vertices = x
    # final gradient check when the loop exits on the iteration cap or a stalled search
    if not converged:
        g = normal_gradient(x, faces, free) if len(free) else np.zeros((0, 4))
        gnorm = float(np.max(np.linalg.norm(g, axis=1))) if len(free) else 0.0
        converged = gnorm <= opts.gradient_tol
    res = SolveResult(
        mesh=m,
        iterations=it,
        area=area,
        gradient_norm=gnorm,
        residual=mean_curvature_residual(m),
        converged=converged,
        areas=areas,
        symmetry_deviation=symmetry_deviation(m, symmetry) if symmetry is not None else None,
        seconds=time.perf_counter() - t0,
    )
    if not converged and raise_on_failure:
        raise NoConvergence(
            f"gradient {gnorm:.3g} above {opts.gradient_tol:g} after {it} iterations",
            mesh=m,
            diagnostics={"iterations": it, "gradient_norm": gnorm, "area": area, "result": res},
        )
    return res


def solve_disk(spec: GroupSpec, opts: SolverOptions | None = None, raise_on_failure: bool = True) -> SolveResult:
    opts = opts or SolverOptions()
    q = fundamental_quadrilateral(spec)
    disk = init_disk(q, opts.refinement)
    sym = quad_symmetry(q) if opts.symmetrize else None
    return minimize_area(disk, opts, symmetry=sym, raise_on_failure=raise_on_failure)


def containment_violation(mesh: SurfaceMesh, q: Quadrilateral32) -> float:
    """Largest amount by which an interior vertex sits outside the quadrilateral's convex hull."""
    hull = convex_hull(q)
    if len(hull.face_normals) == 0 or len(mesh.interior) == 0:
        return 0.0
    vals = (mesh.vertices[mesh.interior] / RADIUS) @ hull.face_normals.T
    return float(max(0.0, -np.min(vals)))


# ---------------------------------------------------------------- extension by the group


class _UnionFind:
    def __init__(self, n: int):
        self.parent = np.arange(n)

    def find(self, a: int) -> int:
        p = self.parent
        root = a
        while p[root] != root:
            root = p[root]
        while p[a] != root:
            p[a], a = root, p[a]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def extend_by_group(disk: SurfaceMesh, group: SymmetryGroup, weld_tol: float = WELD_TOL) -> SurfaceMesh:
    """Union of the images of ``disk`` under every element, welded into one closed mesh.

    Images under elements that reverse the fibre direction carry the opposite
    orientation, so their faces are flipped before welding.
    """
    nG, V = group.order, disk.n_vertices
    pts = group.apply(disk.vertices).reshape(-1, 4)
    signs = group.orientation_signs()
    faces = []
    for g in range(nG):
        f = disk.faces + g * V
        faces.append(f if signs[g] > 0 else f[:, ::-1])
    faces = np.concatenate(faces)
    tags = np.tile(disk.tags, nG)

    bidx = np.flatnonzero(tags != INTERIOR)
    uf = _UnionFind(len(pts))
    pairs = cKDTree(pts[bidx]).query_pairs(weld_tol, output_type="ndarray")
    for a, b in pairs:
        uf.union(int(bidx[a]), int(bidx[b]))
    partners = np.zeros(len(pts), dtype=int)
    for a, b in pairs:
        partners[bidx[a]] += 1
        partners[bidx[b]] += 1
    lonely = bidx[partners[bidx] == 0]
    if len(lonely):
        raise WeldFailure(f"{len(lonely)} boundary vertices have no partner within {weld_tol:g}")
    edge_only = bidx[tags[bidx] < CORNER_BASE]
    if np.any(partners[edge_only] != 1):
        raise WeldFailure("an edge vertex is shared by more than two disks")

    roots = np.array([uf.find(i) for i in range(len(pts))])
    uniq, inverse = np.unique(roots, return_inverse=True)
    verts = pts[uniq]
    new_faces = inverse[faces]
    new_tags = tags[uniq]
    out = SurfaceMesh(verts, new_faces, new_tags)
    if not out.is_closed():
        raise NonManifold(f"{len(out.boundary_edges())} boundary edges remain after welding")
    if not out.is_oriented_manifold():
        raise NonManifold("welded mesh is not a consistently oriented 2-manifold")
    return out


def triangle_budget(spec: GroupSpec, refinement: int) -> int:
    return 2 * refinement * refinement * group_order(spec)


def affordable_refinement(spec: GroupSpec, requested: int, budget: int = DEFAULT_BUDGET) -> int:
    """Largest refinement not above ``requested`` whose closed mesh fits the triangle budget."""
    r = requested
    while r > 2 and triangle_budget(spec, r) > budget:
        r -= 1
    if triangle_budget(spec, r) > budget:
        raise BudgetExceeded(f"{spec} does not fit {budget} triangles even at refinement 2")
    return r


# ---------------------------------------------------------------- self intersection


def _triangle_pair_intersects(t1: np.ndarray, t2: np.ndarray, tol: float = 1e-12) -> bool:
    """Transversal intersection of two flat triangles in R4 (generic position)."""
    a, b, c = t1
    d, e, f = t2
    A = np.column_stack([b - a, c - a, -(e - d), -(f - d)])
    if abs(np.linalg.det(A)) < 1e-14:
        return False
    s, t, u, v = np.linalg.solve(A, d - a)
    return s >= -tol and t >= -tol and s + t <= 1 + tol and u >= -tol and v >= -tol and u + v <= 1 + tol


def self_intersection_spot_check(mesh: SurfaceMesh, fraction: float = 0.01, seed: int = 0, max_pairs: int = 200_000) -> int:
    """Count intersecting pairs among a random sample of non-adjacent faces plus all near pairs."""
    rng = np.random.default_rng(seed)
    F = mesh.n_faces
    total_pairs = F * (F - 1) // 2
    n = int(min(max_pairs, max(1, fraction * total_pairs)))
    i = rng.integers(0, F, n)
    j = rng.integers(0, F, n)
    cand = {(min(a, b), max(a, b)) for a, b in zip(i.tolist(), j.tolist()) if a != b}
    cent = mesh.vertices[mesh.faces].mean(axis=1)
    span = np.max(np.linalg.norm(mesh.vertices[mesh.faces] - cent[:, None], axis=2))
    near = cKDTree(cent).query_pairs(2 * span, output_type="ndarray")
    if len(near) > max_pairs:
        near = near[rng.choice(len(near), max_pairs, replace=False)]
    cand |= {(int(a), int(b)) for a, b in near}
    hits = 0
    fv = mesh.faces
    for a, b in cand:
        if set(fv[a].tolist()) & set(fv[b].tolist()):
            continue
        if _triangle_pair_intersects(mesh.vertices[fv[a]], mesh.vertices[fv[b]]):
            hits += 1
    return hits


# ---------------------------------------------------------------- quotients


def quotient_genus(spec: GroupSpec, subgroup: SymmetryGroup, group: SymmetryGroup | None = None) -> int:
    """Genus of the surface's image in the quotient of S3_2 by a freely acting subgroup."""
    if not acts_freely(subgroup):
        raise NotFree("subgroup has elements with fixed points")
    group = group or build_group(spec)
    if not subgroup.is_subgroup_of(group):
        raise NotInvariant(f"subgroup does not preserve the quadrilateral orbit of {spec}")
    chi = complex_counts(spec).euler
    h = subgroup.order
    if chi % (2 * h) != 0:
        raise NotInvariant("Euler characteristic is not divisible by the subgroup order")
    return 1 - chi // (2 * h)


# ---------------------------------------------------------------- reports


def solver_report(spec: GroupSpec, opts: SolverOptions | None = None, budget: int = DEFAULT_BUDGET, extend: bool = True) -> dict:
    opts = opts or SolverOptions()
    requested = opts.refinement
    r = affordable_refinement(spec, requested, budget)
    run_opts = SolverOptions(**{**opts.__dict__, "refinement": r})
    q = fundamental_quadrilateral(spec)
    res = solve_disk(spec, run_opts, raise_on_failure=False)
    report = {
        "spec": spec.name,
        "refinement": r,
        "requested_refinement": requested,
        "budget": budget,
        "budget_degraded": r != requested,
        "iterations": res.iterations,
        "converged": res.converged,
        "disk_area": res.area,
        "gradient_norm": res.gradient_norm,
        "residual": res.residual,
        "symmetry_deviation": res.symmetry_deviation,
        "containment_violation": containment_violation(res.mesh, q),
        "containment_ok": containment_violation(res.mesh, q) <= UNIT_TOL,
        "expected_genus": genus(spec),
        "seconds": res.seconds,
    }
    if extend:
        group = build_group(spec)
        closed = extend_by_group(res.mesh, group)
        report.update(
            {
                "closed_area": closed.area(),
                "vertices": closed.n_vertices,
                "faces": closed.n_faces,
                "euler_characteristic": closed.euler_characteristic(),
                "genus": closed.genus(),
                "closed": closed.is_closed(),
            }
        )
        report["_mesh"] = closed
    report["_disk"] = res.mesh
    return report
