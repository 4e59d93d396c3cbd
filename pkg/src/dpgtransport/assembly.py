"""Global assembly of the SPD system A x = F and boundary handling.

Global unknowns are blocked by trial variable: all phi DOFs first, then all
theta DOFs.  Inflow Dirichlet conditions and the pinning of characteristic
trace DOFs are applied by symmetric elimination so the system stays SPD.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .fem import DofMap
from .forms import BilinearForm, InnerProduct, local_load
from .mesh import MeshPair, TriMesh
from .testspace import CoefficientCache, cell_blocks, near_optimal_load

CHARACTERISTIC_TOL = 1e-10
NODE_ON_EDGE_TOL = 1e-10


@dataclass
class GlobalSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    n_phi: int
    n_theta: int
    constraints: list[tuple[int, float]] = field(default_factory=list)

    @property
    def size(self) -> int:
        return self.n_phi + self.n_theta


def assemble(
    bilinear_form: BilinearForm,
    inner_product: InnerProduct,
    mesh_pair: MeshPair,
    dof_maps: tuple[DofMap, DofMap],
    rhs_f,
    cache: CoefficientCache | None = None,
) -> GlobalSystem:
    """A = sum_K scatter(A_K), F = sum_K scatter(C_K^T l_K)."""
    phi_map, theta_map = dof_maps
    n_phi, n_theta = phi_map.ndofs, theta_map.ndofs
    n = n_phi + n_theta
    test_space = bilinear_form.test_spaces[0]

    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    vals: list[np.ndarray] = []
    rhs = np.zeros(n)
    for cell in range(mesh_pair.coarse.n_cells):
        coefficients, a_k = cell_blocks(cell, mesh_pair, bilinear_form, inner_product, cache)
        f_k = near_optimal_load(coefficients, local_load(rhs_f, cell, mesh_pair, test_space))
        gdofs = np.concatenate(
            [phi_map.dofs_on_cell(cell), n_phi + theta_map.dofs_on_cell(cell)]
        )
        rr, cc = np.meshgrid(gdofs, gdofs, indexing="ij")
        rows.append(rr.ravel())
        cols.append(cc.ravel())
        vals.append(a_k.ravel())
        np.add.at(rhs, gdofs, f_k)

    matrix = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    ).tocsr()
    matrix.sum_duplicates()
    matrix.sort_indices()
    return GlobalSystem(matrix, rhs, n_phi, n_theta)


def _constrain(system: GlobalSystem, indices: np.ndarray, value: float) -> GlobalSystem:
    """Symmetric elimination: zero rows/cols, unit diagonal, move data to F."""
    if len(indices) == 0:
        return system
    n = system.size
    x_c = np.zeros(n)
    x_c[indices] = value
    rhs = system.rhs - system.matrix @ x_c
    keep = np.ones(n)
    keep[indices] = 0.0
    projector = sp.diags(keep)
    pinned = np.zeros(n)
    pinned[indices] = 1.0
    matrix = (projector @ system.matrix @ projector + sp.diags(pinned)).tocsr()
    matrix.sort_indices()
    rhs[indices] = value
    constraints = system.constraints + [(int(i), value) for i in indices]
    return GlobalSystem(matrix, rhs, system.n_phi, system.n_theta, constraints)


def inflow_mask(theta_map: DofMap, mesh: TriMesh, beta: np.ndarray) -> np.ndarray:
    """Mark theta DOFs whose node lies on a boundary edge with beta . n < 0."""
    beta = np.asarray(beta, dtype=float)
    nodes = theta_map.node_coords
    if nodes is None:
        raise ValueError("inflow mask needs the continuous trace space")
    mask = np.zeros(theta_map.ndofs, dtype=bool)
    for face in mesh.boundary_faces():
        n_out = mesh.outward_normal(face, face.cells[0])
        if np.dot(beta, n_out) >= -CHARACTERISTIC_TOL:
            continue
        a, b = mesh.vertices[list(face.vertex_ids)]
        mask |= _nodes_on_segment(nodes, a, b)
    return mask


def _nodes_on_segment(nodes: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    t = b - a
    length = np.hypot(*t)
    rel = nodes - a
    cross = np.abs(rel[:, 0] * t[1] - rel[:, 1] * t[0]) / length
    proj = (rel @ t) / length**2
    return (cross <= NODE_ON_EDGE_TOL) & (proj >= -NODE_ON_EDGE_TOL) & (proj <= 1.0 + NODE_ON_EDGE_TOL)


def apply_dirichlet(system: GlobalSystem, mask: np.ndarray, value: float) -> GlobalSystem:
    """Constrain the marked theta DOFs to `value` by symmetric elimination."""
    if len(mask) != system.n_theta:
        raise ValueError("mask must be sized to the theta block")
    return _constrain(system, system.n_phi + np.flatnonzero(mask), value)


def characteristic_theta_dofs(theta_map: DofMap, mesh: TriMesh, beta: np.ndarray) -> np.ndarray:
    """Theta DOFs all of whose supporting edges satisfy |beta . n| <= tol.

    A DOF's supporting edges are the mesh edges its Lagrange node lies on;
    interior nodes (no edge at all) carry no trace weight and are included.
    """
    beta = np.asarray(beta, dtype=float)
    nodes = theta_map.node_coords
    if nodes is None:
        raise ValueError("characteristic detection needs the continuous trace space")
    has_live_edge = np.zeros(theta_map.ndofs, dtype=bool)
    for face in mesh.faces:
        a, b = mesh.vertices[list(face.vertex_ids)]
        tangent = (b - a) / np.hypot(*(b - a))
        beta_dot_n = abs(beta[0] * tangent[1] - beta[1] * tangent[0])
        if beta_dot_n > CHARACTERISTIC_TOL:
            has_live_edge |= _nodes_on_segment(nodes, a, b)
    return np.flatnonzero(~has_live_edge)


def pin_characteristic_dofs(
    system: GlobalSystem, theta_map: DofMap, mesh: TriMesh, beta: np.ndarray
) -> GlobalSystem:
    """Constrain ill-posed characteristic trace DOFs to zero."""
    dofs = characteristic_theta_dofs(theta_map, mesh, beta)
    return _constrain(system, system.n_phi + dofs, 0.0)
