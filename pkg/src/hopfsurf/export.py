"""Stereographic projection to ijk-space and mesh serialisation (OBJ text plus a JSON mirror)."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .hopf import RADIUS
from .plateau import INTERIOR, SurfaceMesh
from .quaternion import ONE, Quaternion, Rotation4

POLE_TOL = 1e-6


class PoleSingularity(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ProjectionFrame:
    pole: np.ndarray = field(default_factory=lambda: np.array([-RADIUS, 0.0, 0.0, 0.0]))
    orientation: Rotation4 = field(default_factory=Rotation4.identity)

    def __post_init__(self):
        pole = np.asarray(self.pole, dtype=float)
        if abs(np.linalg.norm(pole) - RADIUS) > 1e-9:
            raise ValueError("projection pole must have norm 2")
        if not np.allclose(pole, [-RADIUS, 0, 0, 0]):
            # fold a custom pole into the orientation so the formula below stays fixed
            u = pole / RADIUS
            extra = Rotation4(ONE, Quaternion.from_array(-np.array([u[0], -u[1], -u[2], -u[3]])))
            object.__setattr__(self, "orientation", self.orientation @ extra)
            object.__setattr__(self, "pole", np.array([-RADIUS, 0.0, 0.0, 0.0]))


def frame_avoiding(points: np.ndarray, seed: int = 0, candidates: int = 512) -> ProjectionFrame:
    """A frame whose pole is as far as possible from ``points`` among seeded random candidates."""
    rng = np.random.default_rng(seed)
    cand = rng.normal(size=(candidates, 4))
    cand = RADIUS * cand / np.linalg.norm(cand, axis=1, keepdims=True)
    cand = np.vstack([[-RADIUS, 0, 0, 0], cand])
    pts = np.asarray(points, dtype=float).reshape(-1, 4)
    if len(pts) == 0:
        return ProjectionFrame()
    best = max(range(len(cand)), key=lambda i: np.min(np.linalg.norm(pts - cand[i], axis=1)))
    return ProjectionFrame(pole=cand[best])


def stereographic(r, frame: ProjectionFrame | None = None) -> np.ndarray:
    """``(x, y, z) / (t + 2)`` of the reoriented point; vectorised over leading axes."""
    frame = frame or ProjectionFrame()
    x = frame.orientation.apply(np.asarray(r, dtype=float))
    dist = np.linalg.norm(x - frame.pole, axis=-1)
    if np.any(dist <= POLE_TOL):
        raise PoleSingularity("point too close to the projection pole")
    return x[..., 1:] / (x[..., :1] + RADIUS)


def export_mesh(mesh: SurfaceMesh, path, frame: ProjectionFrame | None = None, auto_rotate: bool = False) -> ProjectionFrame:
    """Write ``path`` (OBJ, 9 significant digits) and ``path`` with ``.json`` (full precision)."""
    path = Path(path)
    frame = frame or ProjectionFrame()
    try:
        proj = stereographic(mesh.vertices, frame) if mesh.n_vertices else np.zeros((0, 3))
    except PoleSingularity:
        if not auto_rotate:
            raise
        frame = frame_avoiding(mesh.vertices)
        proj = stereographic(mesh.vertices, frame)
    lines = ["# stereographic projection of a surface in the radius-2 three-sphere"]
    lines += [f"v {a:.9g} {b:.9g} {c:.9g}" for a, b, c in proj.tolist()]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.faces.tolist()]
    path.write_text("\n".join(lines) + "\n")
    mirror = {
        "vertices_s3": mesh.vertices.tolist(),
        "vertices_r3": proj.tolist(),
        "faces": mesh.faces.tolist(),
        "tags": mesh.tags.tolist(),
        "frame": {"pole": frame.pole.tolist(), "orientation": frame.orientation.row.tolist()},
    }
    path.with_suffix(".json").write_text(json.dumps(mirror))
    return frame


def import_obj(path) -> tuple[np.ndarray, np.ndarray]:
    """Vertices ``(V, 3)`` and zero-based faces ``(F, 3)`` of a triangle OBJ file."""
    verts, faces = [], []
    for line in Path(path).read_text().splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "v":
            verts.append([float(p) for p in parts[1:4]])
        elif parts[0] == "f":
            faces.append([int(p.split("/")[0]) - 1 for p in parts[1:4]])
    return np.array(verts, dtype=float).reshape(-1, 3), np.array(faces, dtype=int).reshape(-1, 3)


def import_mesh_json(path) -> SurfaceMesh:
    data = json.loads(Path(path).read_text())
    tags = np.array(data.get("tags", [INTERIOR] * len(data["vertices_s3"])), dtype=int)
    return SurfaceMesh(
        np.array(data["vertices_s3"], dtype=float).reshape(-1, 4),
        np.array(data["faces"], dtype=int).reshape(-1, 3),
        tags,
    )


def topology(faces: np.ndarray) -> dict:
    faces = np.asarray(faces, dtype=int).reshape(-1, 3)
    if len(faces) == 0:
        return {"V": 0, "E": 0, "F": 0, "chi": 0}
    e = np.unique(np.sort(np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]]), axis=1), axis=0)
    V = len(np.unique(faces))
    return {"V": int(V), "E": int(len(e)), "F": int(len(faces)), "chi": int(V - len(e) + len(faces))}
