"""Localized a posteriori error estimator and exact-error tools.

The residual of the computed pair (phi_H, theta_H) is Riesz-lifted cell by
cell into an enriched broken polynomial space; the lift's norm squared,
rho_K^T Bbar_K^{-1} rho_K, is the local indicator.  Enriched test functions
are single polynomials per coarse cell, so all fine-face jumps cancel and
the cell form reduces to coarse-cell integrals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fem import DofMap, lagrange_basis, make_quadrature
from .forms import BilinearForm, InnerProduct, SpaceDescriptor, local_load
from .mesh import MeshPair
from .solve import NotPositiveDefiniteError, cholesky_factor, cholesky_solve
from .testspace import geometry_key

DEFAULT_ENRICHMENT_DEGREE = 5


@dataclass(frozen=True)
class ErrorBreakdown:
    cell_indicators_sq: np.ndarray  # eta_K^2 per coarse cell
    eta: float
    l2_error: float | None = None


def _enriched_forms(bilinear_form: BilinearForm, inner_product: InnerProduct, degree: int):
    enriched = SpaceDescriptor(degree, broken=False)
    form = BilinearForm((enriched,), bilinear_form.trial_spaces, bilinear_form.terms)
    product = InnerProduct((enriched,), inner_product.terms)
    return enriched, form, product


def a_posteriori_error(
    bilinear_form: BilinearForm,
    inner_product: InnerProduct,
    mesh_pair: MeshPair,
    dof_maps: tuple[DofMap, DofMap],
    solution: np.ndarray,
    rhs_f,
    enrichment_degree: int = DEFAULT_ENRICHMENT_DEGREE,
) -> ErrorBreakdown:
    """Per-cell indicators eta_K^2 = rho_K^T Bbar_K^{-1} rho_K and their total."""
    phi_map, theta_map = dof_maps
    n_phi = phi_map.ndofs
    if len(solution) != n_phi + theta_map.ndofs:
        raise ValueError("solution vector does not match the DOF maps")
    enriched, form, product = _enriched_forms(bilinear_form, inner_product, enrichment_degree)

    cache: dict[tuple[float, ...], tuple[np.ndarray, object]] = {}
    indicators = np.empty(mesh_pair.coarse.n_cells)
    for cell in range(mesh_pair.coarse.n_cells):
        key = geometry_key(mesh_pair.coarse.jacobian(cell))
        entry = cache.get(key)
        if entry is None:
            g_bar = form.local_matrix(cell, mesh_pair)
            try:
                factor = cholesky_factor(product.local_gram(cell, mesh_pair))
            except NotPositiveDefiniteError as exc:
                raise NotPositiveDefiniteError(
                    f"enriched Gram matrix indefinite on cell {cell}: {exc}"
                ) from exc
            entry = (g_bar, factor)
            cache[key] = entry
        g_bar, factor = entry
        u_local = np.concatenate(
            [solution[phi_map.dofs_on_cell(cell)], solution[n_phi + theta_map.dofs_on_cell(cell)]]
        )
        rho = g_bar @ u_local - local_load(rhs_f, cell, mesh_pair, enriched)
        indicators[cell] = rho @ cholesky_solve(factor, rho)
    return ErrorBreakdown(indicators, float(np.sqrt(indicators.sum())))


def exact_transport_solution(point, beta) -> np.ndarray:
    """Travel time to the inflow boundary along -beta; solves the f=1, c=0 ramp.

    Valid for strictly positive beta components, where the inflow boundary
    is {x=0} union {y=0} and the solution is min(x/beta_1, y/beta_2).
    """
    beta = np.asarray(beta, dtype=float)
    if beta[0] <= 0.0 or beta[1] <= 0.0:
        raise ValueError("the ramp formula requires strictly positive beta components")
    point = np.asarray(point, dtype=float)
    return np.minimum(point[..., 0] / beta[0], point[..., 1] / beta[1])


def l2_error(
    phi_coefficients: np.ndarray,
    exact,
    mesh_pair: MeshPair,
    phi_map: DofMap,
    quadrature_degree: int = 10,
) -> float:
    """|| phi_H - exact ||_{L2} with fixed-degree quadrature per coarse cell."""
    if len(phi_coefficients) != phi_map.ndofs:
        raise ValueError("coefficient vector does not match the phi space")
    basis = lagrange_basis(phi_map.degree)
    quad = make_quadrature(quadrature_degree)
    vals = basis.eval(quad.points)  # (nq, nloc), same on every cell

    mesh = mesh_pair.coarse
    verts = mesh.vertices[mesh.cells]  # (nc, 3, 2)
    jac = np.stack([verts[:, 1] - verts[:, 0], verts[:, 2] - verts[:, 0]], axis=-1)
    dets = np.abs(jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0])
    phys = np.einsum("qr,crd->cqd", quad.points, np.swapaxes(jac, 1, 2)) + verts[:, None, 0]
    phi_h = phi_coefficients[phi_map.cell_dofs] @ vals.T  # (nc, nq)
    diff = phi_h - exact(phys)
    return float(np.sqrt(np.einsum("cq,q,c->", diff**2, quad.weights, dets)))
