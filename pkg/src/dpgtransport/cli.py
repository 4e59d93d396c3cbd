"""Convergence-study driver: sweep mesh levels, emit CSV tables and VTK fields."""

from __future__ import annotations

import argparse
import math
import sys
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .assembly import apply_dirichlet, assemble, inflow_mask, pin_characteristic_dofs
from .estimator import a_posteriori_error, exact_transport_solution, l2_error
from .fem import DofMap, SpaceKind, build_dof_map, lagrange_basis
from .forms import transport_forms
from .mesh import MeshPair, build_uniform_mesh
from .solve import cg_solve
from .testspace import CoefficientCache

MAX_TRIAL_DEGREE = 4  # m + 1 <= 5, the basis table bound
MAX_TEST_REFINE = 3  # cost guard


@dataclass(frozen=True)
class RunConfig:
    levels: tuple[int, ...] = (2, 3, 4, 5, 6)
    test_refine: int = 1
    degree: int = 2  # trial parameter m
    beta_angle: float = math.pi / 8
    reaction: float = 0.0
    rhs_const: float = 1.0
    enrich_degree: int = 5
    csv_path: str | None = None
    vtk_path: str | None = None
    tol: float = 1e-12

    def validate(self) -> None:
        if not self.levels or any(lv < 0 for lv in self.levels):
            raise ValueError("levels must be non-negative integers")
        if self.degree < 1 or self.degree + 1 > MAX_TRIAL_DEGREE + 1:
            raise ValueError(f"degree m must satisfy 1 <= m <= {MAX_TRIAL_DEGREE}")
        if not 0 <= self.test_refine <= MAX_TEST_REFINE:
            raise ValueError(f"test refinement must be in [0, {MAX_TEST_REFINE}]")
        if not 1 <= self.enrich_degree <= 5:
            raise ValueError("enrichment degree must be in [1, 5]")
        if self.tol <= 0.0:
            raise ValueError("solver tolerance must be positive")

    @property
    def beta(self) -> np.ndarray:
        return np.array([math.cos(self.beta_angle), math.sin(self.beta_angle)])


@dataclass(frozen=True)
class ReportRow:
    level: int
    h: float
    ndof: int
    l2_error: float
    eta: float
    efficiency: float
    iterations: int
    seconds: float
    converged: bool = True


@dataclass
class ErrorReport:
    rows: list[ReportRow] = field(default_factory=list)

    @property
    def all_converged(self) -> bool:
        return all(r.converged for r in self.rows)


@dataclass
class LevelSolution:
    mesh_pair: MeshPair
    phi_map: DofMap
    theta_map: DofMap
    solution: np.ndarray


def solve_level(config: RunConfig, level: int) -> tuple[LevelSolution, ReportRow]:
    """Assemble, constrain, and solve one mesh level of the sweep."""
    start = time.perf_counter()
    beta = config.beta
    m = config.degree
    mesh = build_uniform_mesh(level)
    mesh_pair = MeshPair(mesh, config.test_refine)
    bform, iprod = transport_forms(m, beta, config.reaction)
    phi_map = build_dof_map(SpaceKind.BROKEN_COARSE, mesh_pair, m - 1)
    theta_map = build_dof_map(SpaceKind.CONTINUOUS, mesh_pair, m)

    def rhs_f(points):
        return np.full(len(points), config.rhs_const)

    system = assemble(bform, iprod, mesh_pair, (phi_map, theta_map), rhs_f, CoefficientCache())
    system = apply_dirichlet(system, inflow_mask(theta_map, mesh, beta), 0.0)
    system = pin_characteristic_dofs(system, theta_map, mesh, beta)
    x, report = cg_solve(system.matrix, system.rhs, tol=config.tol)

    if config.reaction == 0.0 and beta[0] > 1e-12 and beta[1] > 1e-12:
        exact = lambda p: config.rhs_const * exact_transport_solution(p, beta)
        err = l2_error(x[: phi_map.ndofs], exact, mesh_pair, phi_map)
    else:
        err = math.nan  # no closed-form reference for this configuration
    breakdown = a_posteriori_error(
        bform, iprod, mesh_pair, (phi_map, theta_map), x, rhs_f, config.enrich_degree
    )
    efficiency = breakdown.eta / err if err and not math.isnan(err) else math.nan
    seconds = time.perf_counter() - start
    row = ReportRow(
        level,
        2.0**-level,
        system.size,
        err,
        breakdown.eta,
        efficiency,
        report.iterations,
        seconds,
        report.converged,
    )
    return LevelSolution(mesh_pair, phi_map, theta_map, x), row


def run_convergence_study(config: RunConfig) -> ErrorReport:
    config.validate()
    report = ErrorReport()
    for level in sorted(config.levels):
        _, row = solve_level(config, level)
        report.rows.append(row)
    return report


def _fmt(value) -> str:
    """Shortest round-trip decimal for floats, plain text for the rest."""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def export_csv(report: ErrorReport, path: str) -> None:
    lines = ["level,H,ndof,l2_error,eta,efficiency,iterations,seconds"]
    for r in report.rows:
        lines.append(
            ",".join(
                _fmt(v)
                for v in (r.level, r.h, r.ndof, r.l2_error, r.eta, r.efficiency, r.iterations, r.seconds)
            )
        )
    try:
        with open(path, "w", newline="") as handle:
            handle.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write CSV to {path}: {exc}") from exc


def export_vtk(
    phi_coefficients: np.ndarray,
    theta_coefficients: np.ndarray,
    mesh_pair: MeshPair,
    phi_map: DofMap,
    theta_map: DofMap,
    path: str,
) -> None:
    """Legacy ASCII VTK with per-cell duplicated points for the broken field."""
    mesh = mesh_pair.coarse
    phi_basis = lagrange_basis(phi_map.degree)
    theta_basis = lagrange_basis(theta_map.degree)
    corners = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    phi_at_corners = phi_basis.eval(corners)
    theta_at_corners = theta_basis.eval(corners)

    points: list[np.ndarray] = []
    phi_vals: list[float] = []
    theta_vals: list[float] = []
    for cell in range(mesh.n_cells):
        points.extend(mesh.cell_coords(cell))
        phi_vals.extend(phi_at_corners @ phi_coefficients[phi_map.dofs_on_cell(cell)])
        theta_vals.extend(theta_at_corners @ theta_coefficients[theta_map.dofs_on_cell(cell)])

    lines = [
        "# vtk DataFile Version 2.0",
        "dpgtransport solution",
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {len(points)} double",
    ]
    lines.extend(f"{_fmt(float(p[0]))} {_fmt(float(p[1]))} 0.0" for p in points)
    lines.append(f"CELLS {mesh.n_cells} {4 * mesh.n_cells}")
    lines.extend(f"3 {3 * c} {3 * c + 1} {3 * c + 2}" for c in range(mesh.n_cells))
    lines.append(f"CELL_TYPES {mesh.n_cells}")
    lines.extend("5" for _ in range(mesh.n_cells))
    lines.append(f"POINT_DATA {len(points)}")
    lines.append("SCALARS phi double")
    lines.append("LOOKUP_TABLE default")
    lines.extend(_fmt(float(v)) for v in phi_vals)
    lines.append("SCALARS theta double")
    lines.append("LOOKUP_TABLE default")
    lines.extend(_fmt(float(v)) for v in theta_vals)
    try:
        with open(path, "w", newline="") as handle:
            handle.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write VTK to {path}: {exc}") from exc


def parse_levels(text: str) -> tuple[int, ...]:
    """`2:6` (inclusive range), `2,3,5`, or a single level."""
    if ":" in text:
        lo, hi = text.split(":", 1)
        return tuple(range(int(lo), int(hi) + 1))
    return tuple(int(part) for part in text.split(","))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dpg-transport",
        description="DPG convergence study for linear transport on the unit square",
    )
    parser.add_argument("--levels", default="2:6", help="mesh levels, e.g. 2:6 or 2,4,6")
    parser.add_argument("--test-refine", type=int, default=1, metavar="L")
    parser.add_argument("--degree", type=int, default=2, metavar="M")
    parser.add_argument("--beta-angle", type=float, default=math.pi / 8, metavar="RAD")
    parser.add_argument("--reaction", type=float, default=0.0, metavar="C")
    parser.add_argument("--rhs-const", type=float, default=1.0, metavar="F")
    parser.add_argument("--enrich", type=int, default=5, metavar="P")
    parser.add_argument("--csv", default=None, metavar="PATH")
    parser.add_argument("--vtk", default=None, metavar="PATH")
    parser.add_argument("--tol", type=float, default=1e-12, metavar="T")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    return RunConfig(
        levels=parse_levels(args.levels),
        test_refine=args.test_refine,
        degree=args.degree,
        beta_angle=args.beta_angle,
        reaction=args.reaction,
        rhs_const=args.rhs_const,
        enrich_degree=args.enrich,
        csv_path=args.csv,
        vtk_path=args.vtk,
        tol=args.tol,
    )


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = config_from_args(args)
        config.validate()
    except (ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    report = ErrorReport()
    last_solution: LevelSolution | None = None
    for level in sorted(config.levels):
        solution, row = solve_level(config, level)
        report.rows.append(row)
        last_solution = solution
        flag = "" if row.converged else "  [solver did not converge]"
        print(
            f"level={row.level} H={row.h:g} ndof={row.ndof} "
            f"l2_error={row.l2_error:.6e} eta={row.eta:.6e} "
            f"efficiency={row.efficiency:.3f} iterations={row.iterations}{flag}"
        )

    if config.csv_path:
        export_csv(report, config.csv_path)
    if config.vtk_path and last_solution is not None:
        n_phi = last_solution.phi_map.ndofs
        export_vtk(
            last_solution.solution[:n_phi],
            last_solution.solution[n_phi:],
            last_solution.mesh_pair,
            last_solution.phi_map,
            last_solution.theta_map,
            config.vtk_path,
        )
    return 0 if report.all_converged else 2


if __name__ == "__main__":
    raise SystemExit(main())
