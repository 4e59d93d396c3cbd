"""Triangulations of the unit square and per-cell red refinement.

The coarse mesh splits the square into 2^level x 2^level squares, each cut
along the lower-left to upper-right diagonal.  Fine cells are obtained by
red (midpoint) refinement of every coarse cell; they are stored in the
coordinates of the unit reference triangle so that congruent coarse cells
share the same subdivision.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

GEOM_TOL = 1e-12

# Unit reference triangle with vertices (0,0), (1,0), (0,1).
REFERENCE_TRIANGLE = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


@dataclass(frozen=True)
class Face:
    """An edge of the triangulation with its cell adjacency."""

    vertex_ids: tuple[int, int]
    cells: tuple[int, ...]

    @property
    def boundary(self) -> bool:
        return len(self.cells) == 1


class TriMesh:
    """Immutable triangle mesh: vertex table, CCW cells, face table."""

    def __init__(self, vertices: np.ndarray, cells: np.ndarray):
        self.vertices = np.asarray(vertices, dtype=float)
        self.cells = np.asarray(cells, dtype=int)
        areas = self.areas()
        if np.any(areas <= 0.0):
            raise ValueError("all cells must be counter-clockwise with positive area")
        self.faces = self._build_faces()
        self._face_index = {f.vertex_ids: i for i, f in enumerate(self.faces)}

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def cell_coords(self, cell: int) -> np.ndarray:
        """Vertex coordinates of a cell, shape (3, 2)."""
        return self.vertices[self.cells[cell]]

    def jacobian(self, cell: int) -> np.ndarray:
        """Jacobian of the affine map from the reference triangle, shape (2, 2)."""
        v = self.cell_coords(cell)
        return np.column_stack([v[1] - v[0], v[2] - v[0]])

    def areas(self) -> np.ndarray:
        v = self.vertices[self.cells]
        e1 = v[:, 1] - v[:, 0]
        e2 = v[:, 2] - v[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def _build_faces(self) -> list[Face]:
        adjacency: dict[tuple[int, int], list[int]] = {}
        order: list[tuple[int, int]] = []
        for c, (a, b, d) in enumerate(self.cells):
            for p, q in ((a, b), (b, d), (d, a)):
                key = (min(p, q), max(p, q))
                if key not in adjacency:
                    adjacency[key] = []
                    order.append(key)
                adjacency[key].append(c)
        return [Face(key, tuple(adjacency[key])) for key in order]

    def outward_normal(self, face: Face, owner: int) -> np.ndarray:
        """Unit normal on `face` pointing out of cell `owner`."""
        if owner not in face.cells:
            raise ValueError(f"cell {owner} is not adjacent to face {face.vertex_ids}")
        a, b = self.vertices[list(face.vertex_ids)]
        t = b - a
        n = np.array([t[1], -t[0]]) / np.hypot(*t)
        centroid = self.cell_coords(owner).mean(axis=0)
        if np.dot(n, 0.5 * (a + b) - centroid) < 0.0:
            n = -n
        return n

    def boundary_faces(self) -> list[Face]:
        return [f for f in self.faces if f.boundary]


def build_uniform_mesh(level: int) -> TriMesh:
    """Uniform triangulation of (0,1)^2 with mesh size H = 2^-level.

    Every square of the 2^level x 2^level grid is split along the
    lower-left to upper-right diagonal into two CCW triangles.
    """
    if level < 0:
        raise ValueError("level must be non-negative")
    n = 2**level
    xs = np.linspace(0.0, 1.0, n + 1)
    xx, yy = np.meshgrid(xs, xs, indexing="xy")
    vertices = np.column_stack([xx.ravel(), yy.ravel()])

    def vid(i: int, j: int) -> int:
        return j * (n + 1) + i

    cells = []
    for j in range(n):
        for i in range(n):
            v00, v10 = vid(i, j), vid(i + 1, j)
            v11, v01 = vid(i + 1, j + 1), vid(i, j + 1)
            cells.append([v00, v10, v11])  # lower triangle
            cells.append([v00, v11, v01])  # upper triangle
    return TriMesh(vertices, np.array(cells))


def _red_refine_once(tris: np.ndarray) -> np.ndarray:
    """One round of midpoint refinement, (n,3,2) -> (4n,3,2)."""
    v0, v1, v2 = tris[:, 0], tris[:, 1], tris[:, 2]
    m01 = 0.5 * (v0 + v1)
    m12 = 0.5 * (v1 + v2)
    m20 = 0.5 * (v2 + v0)
    children = np.stack(
        [
            np.stack([v0, m01, m20], axis=1),
            np.stack([m01, v1, m12], axis=1),
            np.stack([m20, m12, v2], axis=1),
            np.stack([m01, m12, m20], axis=1),
        ],
        axis=1,
    )
    return children.reshape(-1, 3, 2)


def refine_cell(coords: np.ndarray, levels: int) -> np.ndarray:
    """Red-refine a triangle `levels` times, returning (4^levels, 3, 2)."""
    if levels < 0:
        raise ValueError("levels must be non-negative")
    tris = np.asarray(coords, dtype=float).reshape(1, 3, 2)
    for _ in range(levels):
        tris = _red_refine_once(tris)
    return tris


@lru_cache(maxsize=None)
def reference_subcells(levels: int) -> np.ndarray:
    """Red refinement of the reference triangle; read-only, cached."""
    tris = refine_cell(REFERENCE_TRIANGLE, levels)
    tris.setflags(write=False)
    return tris


class MeshPair:
    """Coarse mesh plus uniform per-cell refinement to level `level`.

    Fine cells are indexed coarse-major: fine cell (k, t) is subcell t of
    coarse cell k.  Subcell t has the same shape for every coarse cell; its
    reference coordinates are `ref_subcells[t]`.
    """

    def __init__(self, coarse: TriMesh, level: int):
        if level < 0:
            raise ValueError("refinement level must be non-negative")
        self.coarse = coarse
        self.level = level
        self.ref_subcells = reference_subcells(level)

    @property
    def n_subcells(self) -> int:
        return len(self.ref_subcells)

    @property
    def n_fine(self) -> int:
        return self.coarse.n_cells * self.n_subcells

    def fine_to_coarse(self, fine: int) -> int:
        return fine // self.n_subcells

    def fine_cell_coords(self, coarse_cell: int, subcell: int) -> np.ndarray:
        """Physical coordinates of one fine cell, shape (3, 2)."""
        v = self.coarse.cell_coords(coarse_cell)
        jac = np.column_stack([v[1] - v[0], v[2] - v[0]])
        return self.ref_subcells[subcell] @ jac.T + v[0]


def face_normal_dot(mesh: TriMesh, face: Face, beta: np.ndarray, owner: int) -> float:
    """beta . n with n the outward unit normal of `owner` on `face`."""
    beta = np.asarray(beta, dtype=float)
    if abs(np.linalg.norm(beta) - 1.0) > GEOM_TOL:
        raise ValueError("beta must be a unit vector")
    return float(np.dot(beta, mesh.outward_normal(face, owner)))
