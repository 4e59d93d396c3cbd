"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""

import numpy as np

from conftest import BENCHMARK_BETA, constant_rhs, solve_transport
from dpgtransport import (
    CoefficientCache,
    MeshPair,
    SpaceKind,
    assemble,
    build_dof_map,
    build_uniform_mesh,
    cholesky_factor,
    l2_error,
    local_saddle_blocks,
    transport_forms,
)
from dpgtransport.cli import ErrorReport, RunConfig, export_csv, export_vtk, solve_level
from dpgtransport.testspace import compute_coefficients
from test_assembly import dense_oracle
from test_estimator import _dense_eta_oracle, _estimate


def _verdict(capsys, name, ok, detail):
    with capsys.disabled():
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}", flush=True)
    assert ok, f"{name}: {detail}"


def test_criterion_1_convergence_rate(benchmark_sweep, capsys):
    levels = sorted(benchmark_sweep["runs"])
    errors = np.array([benchmark_sweep["runs"][lv]["l2_error"] for lv in levels])
    hs = np.array([2.0**-lv for lv in levels])
    slope = np.polyfit(np.log(hs), np.log(errors), 1)[0]
    ratios = errors[1:] / errors[:-1]
    elapsed = benchmark_sweep["elapsed"]
    ok = (
        0.85 <= slope <= 1.15
        and all(0.40 <= r <= 0.60 for r in ratios[-2:])
        and elapsed < 120.0
    )
    _verdict(
        capsys,
        "criterion 1 (convergence rate)",
        ok,
        f"slope={slope:.4f} (band [0.85,1.15]), finest ratios={np.round(ratios[-2:], 4).tolist()}"
        f" (band [0.40,0.60]), sweep took {elapsed:.1f}s (< 120s)",
    )


def test_criterion_2_test_refinement_insensitivity(benchmark_sweep, capsys):
    levels = range(2, 6)
    errors = {}
    for level in levels:
        per_ell = {1: benchmark_sweep["runs"][level]["l2_error"]}
        for ell in (0, 2):
            run = solve_transport(level, ell, BENCHMARK_BETA)
            exact = lambda p: np.minimum(
                p[..., 0] / BENCHMARK_BETA[0], p[..., 1] / BENCHMARK_BETA[1]
            )
            per_ell[ell] = l2_error(
                run["x"][: run["phi_map"].ndofs], exact, run["mesh_pair"], run["phi_map"]
            )
        errors[level] = per_ell
    spreads = {
        level: (max(e.values()) - min(e.values())) / min(e.values())
        for level, e in errors.items()
    }
    ok = all(s <= 0.05 for s in spreads.values())
    detail = ", ".join(f"level {lv}: spread {s:.1%}" for lv, s in spreads.items())
    _verdict(
        capsys,
        "criterion 2 (test-refinement insensitivity, 5% band)",
        ok,
        detail + " — levels 2-5, refinement levels {0,1,2}",
    )


def test_criterion_3_manufactured_exactness(capsys):
    beta = np.array([1.0, 0.0])
    errs = []
    for level in range(1, 5):
        run = solve_transport(level, 0, beta, pin=True)
        errs.append(
            l2_error(
                run["x"][: run["phi_map"].ndofs],
                lambda p: p[..., 0],
                run["mesh_pair"],
                run["phi_map"],
            )
        )
    ok = all(e <= 1e-9 for e in errs)
    _verdict(
        capsys,
        "criterion 3 (manufactured exactness, beta=(1,0))",
        ok,
        f"L2 errors levels 1-4: {[f'{e:.2e}' for e in errs]} (tol 1e-9)",
    )


def test_criterion_4_spd_structure(capsys):
    details = []
    ok = True
    for level in range(5):
        run = solve_transport(level, 1, BENCHMARK_BETA)
        a = run["system"].matrix
        diff = a - a.T
        asym = np.abs(diff.data).max() if diff.nnz else 0.0
        rel = asym / np.abs(a.data).max()
        sym_ok = rel <= 1e-11
        if run["system"].size <= 2000:
            try:
                cholesky_factor(a.toarray())
                pd_ok, how = True, "Cholesky"
            except Exception:
                pd_ok, how = False, "Cholesky FAILED"
        else:
            pd_ok, how = run["cg"].converged, "CG@1e-12"
        ok = ok and sym_ok and pd_ok
        details.append(f"L{level}: sym {rel:.1e}, {how} {'ok' if pd_ok else 'failed'}")
    _verdict(capsys, "criterion 4 (SPD structure, levels 0-4)", ok, "; ".join(details))


def test_criterion_5_local_solve_oracle(capsys):
    details = []
    ok = True
    for level in (0, 1):  # 2-cell and 8-cell meshes
        mesh_pair = MeshPair(build_uniform_mesh(level), 1)
        bform, iprod = transport_forms(2, BENCHMARK_BETA, 0.0)
        phi_map = build_dof_map(SpaceKind.BROKEN_COARSE, mesh_pair, 1)
        theta_map = build_dof_map(SpaceKind.CONTINUOUS, mesh_pair, 2)
        rhs_f = constant_rhs()
        system = assemble(bform, iprod, mesh_pair, (phi_map, theta_map), rhs_f)
        a, f = dense_oracle(mesh_pair, bform, iprod, phi_map, theta_map, rhs_f)
        da = np.abs(system.matrix.toarray() - a).max()
        df = np.abs(system.rhs - f).max()
        ok = ok and da <= 1e-11 and df <= 1e-11
        details.append(f"{mesh_pair.coarse.n_cells} cells: |dA|={da:.1e}, |dF|={df:.1e}")
    _verdict(
        capsys, "criterion 5 (dense local-solve oracle, tol 1e-11)", ok, "; ".join(details)
    )


def test_criterion_6_defining_relation(capsys):
    mesh_pair = MeshPair(build_uniform_mesh(2), 1)
    bform, iprod = transport_forms(2, BENCHMARK_BETA, 0.0)
    worst = 0.0
    for cell in range(mesh_pair.coarse.n_cells):
        b, g = local_saddle_blocks(bform, iprod, cell, mesh_pair)
        c = compute_coefficients(b, g)
        worst = max(worst, np.abs(b @ c.matrix - g).max())
    ok = worst <= 1e-10
    _verdict(
        capsys,
        "criterion 6 (defining relation B_K C_K = G_K, level 2)",
        ok,
        f"max residual over all cells: {worst:.2e} (tol 1e-10)",
    )


def test_criterion_7_estimator_sanity(benchmark_sweep, capsys):
    levels = sorted(benchmark_sweep["runs"])
    etas = [benchmark_sweep["runs"][lv]["eta"] for lv in levels]
    errors = [benchmark_sweep["runs"][lv]["l2_error"] for lv in levels]
    efficiencies = [eta / err for eta, err in zip(etas, errors)]
    run2 = benchmark_sweep["runs"][2]["run"]
    oracle = _dense_eta_oracle(run2)
    oracle_rel = abs(_estimate(run2).eta - oracle) / oracle
    positive = all(eta > 0.0 for eta in etas)
    monotone = all(a > b for a, b in zip(etas, etas[1:]))
    band = all(0.5 <= e <= 20.0 for e in efficiencies)
    ok = positive and monotone and band and oracle_rel <= 1e-10
    _verdict(
        capsys,
        "criterion 7 (estimator sanity)",
        ok,
        f"eta positive: {positive}, monotone: {monotone}, "
        f"oracle rel diff {oracle_rel:.1e} (tol 1e-10), "
        f"efficiency {min(efficiencies):.2f}..{max(efficiencies):.2f} (band [0.5,20])",
    )


def test_criterion_8_cache_transparency(capsys):
    mesh_pair = MeshPair(build_uniform_mesh(3), 1)
    bform, iprod = transport_forms(2, BENCHMARK_BETA, 0.0)
    phi_map = build_dof_map(SpaceKind.BROKEN_COARSE, mesh_pair, 1)
    theta_map = build_dof_map(SpaceKind.CONTINUOUS, mesh_pair, 2)
    rhs_f = constant_rhs()
    cache = CoefficientCache()
    with_cache = assemble(bform, iprod, mesh_pair, (phi_map, theta_map), rhs_f, cache)
    without = assemble(bform, iprod, mesh_pair, (phi_map, theta_map), rhs_f, None)
    diff = np.abs((with_cache.matrix - without.matrix).toarray()).max()
    n = mesh_pair.coarse.n_cells
    rate_ok = cache.hit_rate >= (n - 2) / n
    ok = diff <= 1e-13 and rate_ok
    _verdict(
        capsys,
        "criterion 8 (cache transparency)",
        ok,
        f"max |A_cached - A_fresh| = {diff:.1e} (tol 1e-13), "
        f"hit rate {cache.hit_rate:.4f} >= {(n - 2) / n:.4f}",
    )


def test_criterion_9_output_determinism(tmp_path, capsys):
    config = RunConfig(levels=(1, 2), test_refine=1)

    def one_run(tag):
        rows, solution = [], None
        for level in sorted(config.levels):
            solution, row = solve_level(config, level)
            rows.append(row)
        report = ErrorReport(rows)
        csv_path = tmp_path / f"{tag}.csv"
        vtk_path = tmp_path / f"{tag}.vtk"
        export_csv(report, str(csv_path))
        n_phi = solution.phi_map.ndofs
        export_vtk(
            solution.solution[:n_phi],
            solution.solution[n_phi:],
            solution.mesh_pair,
            solution.phi_map,
            solution.theta_map,
            str(vtk_path),
        )
        return report, csv_path, vtk_path

    report_a, csv_a, vtk_a = one_run("a")
    report_b, csv_b, vtk_b = one_run("b")

    vtk_ok = vtk_a.read_bytes() == vtk_b.read_bytes()

    def strip_seconds(path):
        lines = path.read_text().splitlines()
        return [",".join(line.split(",")[:-1]) for line in lines]

    csv_ok = strip_seconds(csv_a) == strip_seconds(csv_b)

    reexport = tmp_path / "a2.csv"
    export_csv(report_a, str(reexport))
    reexport_ok = csv_a.read_bytes() == reexport.read_bytes()

    ok = vtk_ok and csv_ok and reexport_ok
    _verdict(
        capsys,
        "criterion 9 (CSV/VTK determinism)",
        ok,
        f"VTK byte-identical: {vtk_ok}; CSV identical apart from wall-time column: {csv_ok}; "
        f"re-export byte-identical: {reexport_ok}",
    )
