"""Bilinear forms and inner products as sums of elementary integral terms.

A form is described symbolically by `IntegralTerm`s between indexed test and
trial spaces and evaluated cell by cell on a `MeshPair`.  Test spaces may be
broken across the fine subcells of a coarse cell (the test-search space) or
consist of a single polynomial per coarse cell (the enriched estimator
space); trial spaces are always one polynomial per coarse cell.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .fem import LocalBasis, edge_quadrature, lagrange_basis, make_quadrature
from .mesh import MeshPair

UNIT_TOL = 1e-12
SIGN_TOL = 1e-10

# Reference-triangle edges as (start, end) vertex coordinates; CCW order,
# so the outward normal is the tangent rotated by -90 degrees.
_REF_EDGES = (
    (np.array([0.0, 0.0]), np.array([1.0, 0.0])),
    (np.array([1.0, 0.0]), np.array([0.0, 1.0])),
    (np.array([0.0, 1.0]), np.array([0.0, 0.0])),
)


class IntegrationType(enum.Enum):
    VALUE_VALUE = "valueValue"
    GRAD_VALUE = "gradValue"
    VALUE_GRAD = "valueGrad"
    GRAD_GRAD = "gradGrad"
    NORMAL_VECTOR = "normalVector"
    NORMAL_SIGN = "normalSign"


class DomainOfIntegration(enum.Enum):
    INTERIOR = "interior"
    FACE = "face"


_INTERIOR_TYPES = {
    IntegrationType.VALUE_VALUE,
    IntegrationType.GRAD_VALUE,
    IntegrationType.VALUE_GRAD,
    IntegrationType.GRAD_GRAD,
}
_FACE_TYPES = {IntegrationType.NORMAL_VECTOR, IntegrationType.NORMAL_SIGN}
_NEEDS_DIRECTION = {
    IntegrationType.GRAD_VALUE,
    IntegrationType.VALUE_GRAD,
    IntegrationType.GRAD_GRAD,
    IntegrationType.NORMAL_VECTOR,
}


@dataclass(frozen=True)
class IntegralTerm:
    """One weighted product of (derivatives of) test and trial functions."""

    test_index: int
    trial_index: int
    integration_type: IntegrationType
    domain: DomainOfIntegration
    coefficient: float = 1.0
    direction: tuple[float, float] | None = None

    def __post_init__(self):
        it, dom = self.integration_type, self.domain
        if dom is DomainOfIntegration.INTERIOR and it not in _INTERIOR_TYPES:
            raise ValueError(f"{it.value} is not an interior integration type")
        if dom is DomainOfIntegration.FACE and it not in _FACE_TYPES:
            raise ValueError(f"{it.value} is not a face integration type")
        if it in _NEEDS_DIRECTION and self.direction is None:
            raise ValueError(f"{it.value} requires a direction vector")
        if it is IntegrationType.VALUE_VALUE and self.direction is not None:
            raise ValueError(f"{it.value} does not take a direction vector")
        if self.direction is not None:
            d = np.asarray(self.direction, dtype=float)
            if abs(np.linalg.norm(d) - 1.0) > UNIT_TOL:
                raise ValueError("direction must have unit length")

    @property
    def beta(self) -> np.ndarray:
        return np.asarray(self.direction, dtype=float)


@dataclass(frozen=True)
class SpaceDescriptor:
    """A polynomial space attached to the coarse mesh.

    `broken` spaces hold an independent polynomial on every fine subcell of
    a coarse cell; unbroken spaces hold a single polynomial per coarse cell.
    """

    degree: int
    broken: bool = False

    @property
    def basis(self) -> LocalBasis:
        return lagrange_basis(self.degree)

    def local_size(self, mesh_pair: MeshPair) -> int:
        n = self.basis.size
        return n * mesh_pair.n_subcells if self.broken else n


_WHOLE_CELL = np.array([[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]])


def _subcell_geometry(space: SpaceDescriptor, mesh_pair: MeshPair) -> np.ndarray:
    """Subcell decomposition used when integrating this space."""
    return mesh_pair.ref_subcells if space.broken else _WHOLE_CELL


def _affine(sub: np.ndarray):
    """Jacobian and offset of the map unit triangle -> `sub` (in coarse ref coords)."""
    jac = np.column_stack([sub[1] - sub[0], sub[2] - sub[0]])
    return jac, sub[0]


def term_local_matrix(
    term: IntegralTerm,
    cell: int,
    mesh_pair: MeshPair,
    test_space: SpaceDescriptor,
    trial_space: SpaceDescriptor,
) -> np.ndarray:
    """Local matrix of one term on one coarse cell.

    Rows run over the test DOFs of the cell (subcell-major for broken
    spaces), columns over the trial DOFs.
    """
    if term.domain is DomainOfIntegration.INTERIOR:
        return _interior_matrix(term, cell, mesh_pair, test_space, trial_space)
    return _face_matrix(term, cell, mesh_pair, test_space, trial_space)


def _interior_matrix(term, cell, mesh_pair, test_space, trial_space) -> np.ndarray:
    jac_c = mesh_pair.coarse.jacobian(cell)
    inv_t_c = np.linalg.inv(jac_c).T
    det_c = abs(np.linalg.det(jac_c))
    tb, ub = test_space.basis, trial_space.basis
    quad = make_quadrature(min(tb.degree + ub.degree + 2, 12))
    it = term.integration_type

    test_subs = _subcell_geometry(test_space, mesh_pair)
    trial_subs = _subcell_geometry(trial_space, mesh_pair)
    if test_space.broken and trial_space.broken:
        pairs = [(t, t) for t in range(len(test_subs))]
    elif test_space.broken:
        pairs = [(t, 0) for t in range(len(test_subs))]
    elif trial_space.broken:
        pairs = [(0, u) for u in range(len(trial_subs))]
    else:
        pairs = [(0, 0)]
    # integration always runs over the finer of the two decompositions
    int_subs = test_subs if test_space.broken else trial_subs

    nt, nu = test_space.local_size(mesh_pair), trial_space.local_size(mesh_pair)
    out = np.zeros((nt, nu))
    for ti, ui in pairs:
        sub = int_subs[max(ti, ui)]
        jac_s, shift = _affine(sub)
        scale = abs(np.linalg.det(jac_s)) * det_c
        # quadrature points in coarse reference coordinates
        pts_c = quad.points @ jac_s.T + shift

        if test_space.broken:
            test_pts, test_jac = quad.points, jac_c @ jac_s
        else:
            test_pts, test_jac = pts_c, jac_c
        if trial_space.broken:
            trial_pts, trial_jac = quad.points, jac_c @ jac_s
        else:
            trial_pts, trial_jac = pts_c, jac_c

        if it in (IntegrationType.GRAD_VALUE, IntegrationType.GRAD_GRAD):
            g = tb.grad(test_pts) @ np.linalg.inv(test_jac)
            tv = g @ term.beta
        else:
            tv = tb.eval(test_pts)
        if it in (IntegrationType.VALUE_GRAD, IntegrationType.GRAD_GRAD):
            g = ub.grad(trial_pts) @ np.linalg.inv(trial_jac)
            uv = g @ term.beta
        else:
            uv = ub.eval(trial_pts)

        block = np.einsum("q,qi,qj->ij", quad.weights * scale, tv, uv)
        r0 = ti * tb.size if test_space.broken else 0
        c0 = ui * ub.size if trial_space.broken else 0
        out[r0 : r0 + tb.size, c0 : c0 + ub.size] += term.coefficient * block
    return out


def _face_matrix(term, cell, mesh_pair, test_space, trial_space) -> np.ndarray:
    if trial_space.broken:
        raise ValueError("face terms expect an unbroken trial space")
    jac_c = mesh_pair.coarse.jacobian(cell)
    v0 = mesh_pair.coarse.cell_coords(cell)[0]
    tb, ub = test_space.basis, trial_space.basis
    quad = edge_quadrature(tb.degree + ub.degree + 1)
    if term.direction is None:
        raise ValueError("face terms need a flow direction to weight the normals")
    beta = term.beta

    subs = _subcell_geometry(test_space, mesh_pair)
    nt, nu = test_space.local_size(mesh_pair), trial_space.local_size(mesh_pair)
    out = np.zeros((nt, nu))
    s = quad.points  # parameters on [0,1]
    for t, sub in enumerate(subs):
        jac_s, shift = _affine(sub)
        for a_ref, b_ref in _REF_EDGES:
            # edge endpoints in coarse reference and physical coordinates
            a_c, b_c = a_ref @ jac_s.T + shift, b_ref @ jac_s.T + shift
            a_p, b_p = a_c @ jac_c.T + v0, b_c @ jac_c.T + v0
            tangent = b_p - a_p
            length = np.hypot(*tangent)
            normal = np.array([tangent[1], -tangent[0]]) / length
            bn = float(beta @ normal)
            if term.integration_type is IntegrationType.NORMAL_VECTOR:
                factor = bn
            else:
                factor = float(np.sign(bn)) if abs(bn) > SIGN_TOL else 0.0
            if factor == 0.0:
                continue
            tv = tb.eval(a_ref + np.outer(s, b_ref - a_ref))
            uv = ub.eval(a_c + np.outer(s, b_c - a_c))
            w = term.coefficient * factor * length * quad.weights
            block = np.einsum("q,qi,qj->ij", w, tv, uv)
            r0 = t * tb.size if test_space.broken else 0
            out[r0 : r0 + tb.size, :] += block
    return out


@dataclass(frozen=True)
class BilinearForm:
    test_spaces: tuple[SpaceDescriptor, ...]
    trial_spaces: tuple[SpaceDescriptor, ...]
    terms: tuple[IntegralTerm, ...]

    def __post_init__(self):
        for t in self.terms:
            if not 0 <= t.test_index < len(self.test_spaces):
                raise ValueError(f"test space index {t.test_index} out of range")
            if not 0 <= t.trial_index < len(self.trial_spaces):
                raise ValueError(f"trial space index {t.trial_index} out of range")

    def local_matrix(self, cell: int, mesh_pair: MeshPair) -> np.ndarray:
        """G_K: rows = stacked test DOFs, columns = stacked trial DOFs."""
        row_sizes = [s.local_size(mesh_pair) for s in self.test_spaces]
        col_sizes = [s.local_size(mesh_pair) for s in self.trial_spaces]
        row_off = np.concatenate([[0], np.cumsum(row_sizes)])
        col_off = np.concatenate([[0], np.cumsum(col_sizes)])
        out = np.zeros((row_off[-1], col_off[-1]))
        for t in self.terms:
            block = term_local_matrix(
                t, cell, mesh_pair, self.test_spaces[t.test_index], self.trial_spaces[t.trial_index]
            )
            r, c = row_off[t.test_index], col_off[t.trial_index]
            out[r : r + block.shape[0], c : c + block.shape[1]] += block
        return out


@dataclass(frozen=True)
class InnerProduct:
    test_spaces: tuple[SpaceDescriptor, ...]
    terms: tuple[IntegralTerm, ...]

    def __post_init__(self):
        for t in self.terms:
            if not 0 <= t.test_index < len(self.test_spaces):
                raise ValueError(f"test space index {t.test_index} out of range")
            if not 0 <= t.trial_index < len(self.test_spaces):
                raise ValueError(f"rhs space index {t.trial_index} out of range")

    def local_gram(self, cell: int, mesh_pair: MeshPair) -> np.ndarray:
        """B_K, the SPD Gram matrix of the test space on one coarse cell."""
        sizes = [s.local_size(mesh_pair) for s in self.test_spaces]
        off = np.concatenate([[0], np.cumsum(sizes)])
        out = np.zeros((off[-1], off[-1]))
        for t in self.terms:
            block = term_local_matrix(
                t, cell, mesh_pair, self.test_spaces[t.test_index], self.test_spaces[t.trial_index]
            )
            r, c = off[t.test_index], off[t.trial_index]
            out[r : r + block.shape[0], c : c + block.shape[1]] += block
        asym = np.abs(out - out.T).max()
        if asym > 1e-12 * max(np.abs(out).max(), 1.0):
            raise ValueError(f"inner product is not symmetric on cell {cell}")
        return 0.5 * (out + out.T)


def local_saddle_blocks(
    bilinear_form: BilinearForm,
    inner_product: InnerProduct,
    cell: int,
    mesh_pair: MeshPair,
) -> tuple[np.ndarray, np.ndarray]:
    """(B_K, G_K) for one coarse cell."""
    return inner_product.local_gram(cell, mesh_pair), bilinear_form.local_matrix(cell, mesh_pair)


def local_load(rhs_f, cell: int, mesh_pair: MeshPair, test_space: SpaceDescriptor) -> np.ndarray:
    """Load vector (l_K)_j = int_K f z^j over the (possibly broken) test space."""
    jac_c = mesh_pair.coarse.jacobian(cell)
    v0 = mesh_pair.coarse.cell_coords(cell)[0]
    det_c = abs(np.linalg.det(jac_c))
    tb = test_space.basis
    quad = make_quadrature(min(tb.degree + 4, 12))
    vals = tb.eval(quad.points)  # same reference points on every subcell

    subs = _subcell_geometry(test_space, mesh_pair)
    out = np.zeros(test_space.local_size(mesh_pair))
    for t, sub in enumerate(subs):
        jac_s, shift = _affine(sub)
        pts_c = quad.points @ jac_s.T + shift
        phys = pts_c @ jac_c.T + v0
        f = np.asarray(rhs_f(phys), dtype=float)
        scale = abs(np.linalg.det(jac_s)) * det_c
        out[t * tb.size : (t + 1) * tb.size] = (quad.weights * scale * f) @ vals
    return out


def transport_forms(
    m: int, beta: np.ndarray, reaction: float, test_space: SpaceDescriptor | None = None
) -> tuple[BilinearForm, InnerProduct]:
    """Ultra-weak transport form and broken graph-norm inner product.

    Trial spaces: (phi of degree m-1, theta of degree m); the default test
    space is the broken degree-(m+1) test-search space on the fine cells.
    """
    beta_t = tuple(float(b) for b in np.asarray(beta, dtype=float))
    if test_space is None:
        test_space = SpaceDescriptor(m + 1, broken=True)
    phi = SpaceDescriptor(m - 1)
    theta = SpaceDescriptor(m)
    terms = []
    if reaction != 0.0:
        terms.append(
            IntegralTerm(0, 0, IntegrationType.VALUE_VALUE, DomainOfIntegration.INTERIOR, reaction)
        )
    terms.append(
        IntegralTerm(0, 0, IntegrationType.GRAD_VALUE, DomainOfIntegration.INTERIOR, -1.0, beta_t)
    )
    terms.append(
        IntegralTerm(0, 1, IntegrationType.NORMAL_VECTOR, DomainOfIntegration.FACE, 1.0, beta_t)
    )
    form = BilinearForm((test_space,), (phi, theta), tuple(terms))
    product = InnerProduct(
        (test_space,),
        (
            IntegralTerm(0, 0, IntegrationType.VALUE_VALUE, DomainOfIntegration.INTERIOR, 1.0),
            IntegralTerm(0, 0, IntegrationType.GRAD_GRAD, DomainOfIntegration.INTERIOR, 1.0, beta_t),
        ),
    )
    return form, product
