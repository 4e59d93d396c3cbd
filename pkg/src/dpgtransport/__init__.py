"""DPG solver for first-order linear transport with near-optimal test spaces."""

from .assembly import (
    GlobalSystem,
    apply_dirichlet,
    assemble,
    inflow_mask,
    pin_characteristic_dofs,
)
from .estimator import ErrorBreakdown, a_posteriori_error, exact_transport_solution, l2_error
from .fem import DofMap, SpaceKind, build_dof_map, lagrange_basis, make_quadrature
from .forms import (
    BilinearForm,
    DomainOfIntegration,
    InnerProduct,
    IntegralTerm,
    IntegrationType,
    SpaceDescriptor,
    local_load,
    local_saddle_blocks,
    term_local_matrix,
    transport_forms,
)
from .mesh import Face, MeshPair, TriMesh, build_uniform_mesh, face_normal_dot, refine_cell
from .solve import CgReport, CholeskyFactor, cg_solve, cholesky_factor, cholesky_solve
from .testspace import (
    CoefficientCache,
    TestCoefficients,
    compute_coefficients,
    coefficients_for_cell,
    near_optimal_load,
    near_optimal_local_matrix,
)

__all__ = [
    "BilinearForm",
    "CgReport",
    "CholeskyFactor",
    "CoefficientCache",
    "DofMap",
    "DomainOfIntegration",
    "ErrorBreakdown",
    "Face",
    "GlobalSystem",
    "InnerProduct",
    "IntegralTerm",
    "IntegrationType",
    "MeshPair",
    "SpaceDescriptor",
    "SpaceKind",
    "TestCoefficients",
    "TriMesh",
    "a_posteriori_error",
    "apply_dirichlet",
    "assemble",
    "build_dof_map",
    "build_uniform_mesh",
    "cg_solve",
    "cholesky_factor",
    "cholesky_solve",
    "coefficients_for_cell",
    "compute_coefficients",
    "exact_transport_solution",
    "face_normal_dot",
    "inflow_mask",
    "l2_error",
    "lagrange_basis",
    "local_load",
    "local_saddle_blocks",
    "make_quadrature",
    "near_optimal_load",
    "near_optimal_local_matrix",
    "pin_characteristic_dofs",
    "refine_cell",
    "term_local_matrix",
    "transport_forms",
]
