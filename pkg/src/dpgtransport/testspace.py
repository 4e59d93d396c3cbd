"""Near-optimal test-function coefficients with geometry-keyed caching.

For each coarse cell the columns of C_K express the near-optimal test
functions in the test-search basis: B_K C_K = G_K.  With constant
coefficients the blocks depend on the cell only through the Jacobian of its
reference map, so congruent-up-to-translation cells share one solve.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from .forms import BilinearForm, InnerProduct, local_saddle_blocks
from .mesh import MeshPair
from .solve import NotPositiveDefiniteError, cholesky_factor, cholesky_solve

KEY_DIGITS = 12


@dataclass(frozen=True)
class TestCoefficients:
    matrix: np.ndarray  # (M test-search DOFs) x (N trial DOFs)


def geometry_key(jacobian: np.ndarray) -> tuple[float, ...]:
    """Cache key: the reference-map Jacobian rounded to 12 digits."""
    return tuple(round(float(x), KEY_DIGITS) for x in np.asarray(jacobian).ravel())


def compute_coefficients(b_k: np.ndarray, g_k: np.ndarray) -> TestCoefficients:
    """Solve B_K C_K = G_K by Cholesky."""
    factor = cholesky_factor(b_k)
    return TestCoefficients(cholesky_solve(factor, g_k))


def near_optimal_local_matrix(b_k, g_k, coefficients: TestCoefficients) -> np.ndarray:
    """A_K = G_K^T C_K = G_K^T B_K^{-1} G_K; symmetrized against roundoff."""
    a_k = np.asarray(g_k).T @ coefficients.matrix
    return 0.5 * (a_k + a_k.T)


def near_optimal_load(coefficients: TestCoefficients, load: np.ndarray) -> np.ndarray:
    """Local load tested against the near-optimal functions: C_K^T l_K."""
    return coefficients.matrix.T @ np.asarray(load, dtype=float)


class CoefficientCache:
    """Keyed map from cell geometry to (C_K, A_K); safe for concurrent use."""

    def __init__(self):
        self._entries: dict[tuple[float, ...], tuple[TestCoefficients, np.ndarray]] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def lookup(self, key):
        with self._lock:
            entry = self._entries.get(key)
            if entry is not None:
                self.hits += 1
            return entry

    def store(self, key, entry) -> None:
        with self._lock:
            self._entries.setdefault(key, entry)
            self.misses += 1

    @property
    def hit_rate(self) -> float:
        total = self.hits + self.misses
        return self.hits / total if total else 0.0


def cell_blocks(
    cell: int,
    mesh_pair: MeshPair,
    bilinear_form: BilinearForm,
    inner_product: InnerProduct,
    cache: CoefficientCache | None = None,
) -> tuple[TestCoefficients, np.ndarray]:
    """(C_K, A_K) for one coarse cell, served from the cache when possible."""
    key = geometry_key(mesh_pair.coarse.jacobian(cell)) if cache is not None else None
    if cache is not None:
        entry = cache.lookup(key)
        if entry is not None:
            return entry
    b_k, g_k = local_saddle_blocks(bilinear_form, inner_product, cell, mesh_pair)
    try:
        coefficients = compute_coefficients(b_k, g_k)
    except NotPositiveDefiniteError as exc:
        raise NotPositiveDefiniteError(f"Gram matrix indefinite on cell {cell}: {exc}") from exc
    entry = (coefficients, near_optimal_local_matrix(b_k, g_k, coefficients))
    if cache is not None:
        cache.store(key, entry)
    return entry


def coefficients_for_cell(
    cell: int,
    mesh_pair: MeshPair,
    bilinear_form: BilinearForm,
    inner_product: InnerProduct,
    cache: CoefficientCache | None = None,
) -> TestCoefficients:
    return cell_blocks(cell, mesh_pair, bilinear_form, inner_product, cache)[0]
