"""Reference-element Lagrange bases, quadrature, and degree-of-freedom maps."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from .mesh import MeshPair

MAX_BASIS_DEGREE = 5
MAX_QUADRATURE_DEGREE = 12

_INSIDE_TOL = 1e-9


def _monomial_exponents(degree: int) -> np.ndarray:
    return np.array([(i, j) for total in range(degree + 1) for i in range(total, -1, -1) for j in (total - i,)])


def _lattice_nodes(degree: int) -> np.ndarray:
    """Uniform Lagrange nodes: vertices, then edge nodes, then interior."""
    if degree == 0:
        return np.array([[1.0 / 3.0, 1.0 / 3.0]])
    k = degree
    nodes = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]
    for i in range(1, k):  # edge (0,0)-(1,0)
        nodes.append((i / k, 0.0))
    for i in range(1, k):  # edge (1,0)-(0,1)
        nodes.append(((k - i) / k, i / k))
    for i in range(1, k):  # edge (0,1)-(0,0)
        nodes.append((0.0, (k - i) / k))
    for j in range(1, k):
        for i in range(1, k - j):
            nodes.append((i / k, j / k))
    return np.array(nodes)


class LocalBasis:
    """Nodal Lagrange basis of given degree on the reference triangle."""

    def __init__(self, degree: int):
        if not 0 <= degree <= MAX_BASIS_DEGREE:
            raise ValueError(f"basis degree must be in [0, {MAX_BASIS_DEGREE}]")
        self.degree = degree
        self.nodes = _lattice_nodes(degree)
        self.exponents = _monomial_exponents(degree)
        vander = self._monomials(self.nodes)
        self.coeffs = np.linalg.inv(vander)  # columns express basis in monomials

    @property
    def size(self) -> int:
        return len(self.nodes)

    def _monomials(self, points: np.ndarray) -> np.ndarray:
        x, y = points[:, 0], points[:, 1]
        ex = self.exponents
        return x[:, None] ** ex[:, 0] * y[:, None] ** ex[:, 1]

    def _check_inside(self, points: np.ndarray) -> None:
        bary_min = np.minimum(
            np.minimum(points[:, 0], points[:, 1]), 1.0 - points.sum(axis=1)
        )
        if np.any(bary_min < -_INSIDE_TOL):
            raise ValueError("evaluation point outside the reference triangle")

    def eval(self, points: np.ndarray) -> np.ndarray:
        """Basis values at reference points; shape (npts, size)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        self._check_inside(points)
        return self._monomials(points) @ self.coeffs

    def grad(self, points: np.ndarray) -> np.ndarray:
        """Reference gradients at reference points; shape (npts, size, 2)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        self._check_inside(points)
        x, y = points[:, 0], points[:, 1]
        ex = self.exponents
        with np.errstate(divide="ignore", invalid="ignore"):
            dx = np.where(ex[:, 0] > 0, ex[:, 0] * x[:, None] ** np.maximum(ex[:, 0] - 1, 0) * y[:, None] ** ex[:, 1], 0.0)
            dy = np.where(ex[:, 1] > 0, ex[:, 1] * x[:, None] ** ex[:, 0] * y[:, None] ** np.maximum(ex[:, 1] - 1, 0), 0.0)
        return np.stack([dx @ self.coeffs, dy @ self.coeffs], axis=-1)


@lru_cache(maxsize=None)
def lagrange_basis(degree: int) -> LocalBasis:
    return LocalBasis(degree)


def eval_basis(basis: LocalBasis, point) -> np.ndarray:
    """Values of all basis functions at one reference point."""
    return basis.eval(np.asarray(point, dtype=float).reshape(1, 2))[0]


def eval_gradients(basis: LocalBasis, point, jacobian_inv_t: np.ndarray) -> np.ndarray:
    """Physical gradients at one reference point; shape (size, 2)."""
    jacobian_inv_t = np.asarray(jacobian_inv_t, dtype=float)
    ref = basis.grad(np.asarray(point, dtype=float).reshape(1, 2))[0]
    return ref @ jacobian_inv_t.T


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray
    exactness: int


@lru_cache(maxsize=None)
def make_quadrature(exactness_degree: int) -> QuadratureRule:
    """Conical-product rule on the reference triangle, exact to the given total degree."""
    if not 0 <= exactness_degree <= MAX_QUADRATURE_DEGREE:
        raise ValueError(f"quadrature exactness must be in [0, {MAX_QUADRATURE_DEGREE}]")
    n = exactness_degree // 2 + 1  # 2n-1 >= degree
    xg, wg = roots_legendre(n)
    xg, wg = (xg + 1.0) / 2.0, wg / 2.0
    xj, wj = roots_jacobi(n, 1.0, 0.0)
    xj, wj = (xj + 1.0) / 2.0, wj / 4.0  # weight (1-t) on [0,1]
    xi, eta = np.meshgrid(xg, xj, indexing="ij")
    pts = np.column_stack([(xi * (1.0 - eta)).ravel(), eta.ravel()])
    wts = np.outer(wg, wj).ravel()
    return QuadratureRule(pts, wts, exactness_degree)


@lru_cache(maxsize=None)
def edge_quadrature(exactness_degree: int) -> QuadratureRule:
    """Gauss-Legendre on [0,1], exact for the given polynomial degree."""
    if not 0 <= exactness_degree <= 2 * MAX_QUADRATURE_DEGREE - 1:
        raise ValueError("edge quadrature degree out of range")
    n = exactness_degree // 2 + 1
    x, w = roots_legendre(n)
    return QuadratureRule((x + 1.0) / 2.0, w / 2.0, exactness_degree)


class SpaceKind(enum.Enum):
    BROKEN_COARSE = "broken_coarse"  # discontinuous across coarse cells
    CONTINUOUS = "continuous"  # Lagrange space, shared nodes
    BROKEN_FINE = "broken_fine"  # discontinuous across fine cells (test search)


@dataclass(frozen=True)
class DofMap:
    kind: SpaceKind
    degree: int
    ndofs: int
    cell_dofs: np.ndarray = field(repr=False)  # (n_coarse, local size)
    node_coords: np.ndarray | None = field(default=None, repr=False)

    def dofs_on_cell(self, cell: int) -> np.ndarray:
        return self.cell_dofs[cell]


def build_dof_map(kind: SpaceKind, mesh_pair: MeshPair, degree: int) -> DofMap:
    """Global numbering for one of the three space families."""
    basis = lagrange_basis(degree)
    nloc = basis.size
    nc = mesh_pair.coarse.n_cells

    if kind is SpaceKind.BROKEN_COARSE:
        cell_dofs = np.arange(nc * nloc).reshape(nc, nloc)
        return DofMap(kind, degree, nc * nloc, cell_dofs)

    if kind is SpaceKind.BROKEN_FINE:
        nsub = mesh_pair.n_subcells
        cell_dofs = np.arange(nc * nsub * nloc).reshape(nc, nsub * nloc)
        return DofMap(kind, degree, nc * nsub * nloc, cell_dofs)

    if kind is SpaceKind.CONTINUOUS:
        index: dict[tuple[int, int], int] = {}
        coords: list[np.ndarray] = []
        cell_dofs = np.empty((nc, nloc), dtype=int)
        for c in range(nc):
            v = mesh_pair.coarse.cell_coords(c)
            jac = np.column_stack([v[1] - v[0], v[2] - v[0]])
            phys = basis.nodes @ jac.T + v[0]
            for i, p in enumerate(phys):
                key = (round(p[0] * 1e10), round(p[1] * 1e10))
                g = index.get(key)
                if g is None:
                    g = len(coords)
                    index[key] = g
                    coords.append(p)
                cell_dofs[c, i] = g
        return DofMap(kind, degree, len(coords), cell_dofs, np.array(coords))

    raise ValueError(f"unknown space kind: {kind}")
