"""Acceptance suite: benchmark reproduction bounds and property gates.

Each test implements one numbered criterion at its stated tolerance and
records a PASS/FAIL line (printed in the terminal summary).  Benchmark
solves run once per module and are shared by the criteria that inspect
them.  Training is stochastic only through the fixed seeds, so bounds are
order-of-magnitude reproduction targets, not bit-exact figures.
"""

import json
import time

import numpy as np
import pytest

from subspacepde.assembly import (
    GlobalIndexing,
    assemble_boundary_rows,
    assemble_continuity_rows,
    assemble_global,
    assemble_pde_rows,
    solve_least_squares,
)
from subspacepde.cli import execute
from subspacepde.config import from_dict
from subspacepde.geometry import (
    DomainSpec,
    PartitionSpec,
    SubdomainSpec,
    partition,
    sample_boundary,
    sample_interface,
    sample_interior,
)
from subspacepde.network import BasisEval, NetworkConfig, eval_basis, init_params
from subspacepde.problems import LinearTerm, NonlinearTerm, ProblemSpec, builtin
from subspacepde.solver import (
    Discretization,
    NonlinearConfig,
    SamplingConfig,
    solve_linear,
    solve_newton,
    solve_picard,
)
from subspacepde.training import TrainingConfig, loss_gradient, residual_loss

CRITERION_RESULTS: list[str] = []


def record(criterion: str, passed: bool, detail: str) -> None:
    CRITERION_RESULTS.append(
        f"criterion {criterion}: {'PASS' if passed else 'FAIL'} - {detail}"
    )
    assert passed, f"criterion {criterion}: {detail}"


# ----------------------------------------------------------------------
# Benchmark configurations (table setups at desk scale).
# ----------------------------------------------------------------------


def run_helmholtz():
    return solve_linear(
        builtin("helmholtz1d"),
        PartitionSpec((4,)),
        SamplingConfig(interior_counts=(200,), seed=202),
        NetworkConfig(input_dim=1, hidden_widths=(100, 100), subspace_dim=100),
        TrainingConfig(max_epochs=1500, rel_tol=1e-3, seed=202),
    )


def run_boundary_layer():
    return solve_linear(
        builtin("boundary_layer1d"),
        PartitionSpec((8,)),
        SamplingConfig(interior_counts=(100,), seed=202),
        NetworkConfig(input_dim=1, hidden_widths=(100, 100), subspace_dim=100),
        TrainingConfig(max_epochs=1000, rel_tol=1e-3, seed=202),
    )


def run_poisson_full():
    return solve_linear(
        builtin("poisson2d"),
        PartitionSpec((4, 4)),
        SamplingConfig(interior_counts=(30, 30), seed=202),
        NetworkConfig(input_dim=2, hidden_widths=(100, 100), subspace_dim=300),
        TrainingConfig(max_epochs=1500, rel_tol=1e-3, seed=202),
    )


def run_poisson_reduced():
    # 4 subdomains, M=150; a flat feature layer spans this cell size better
    # than 150 features drawn from a deep 100-wide embedding
    return solve_linear(
        builtin("poisson2d"),
        PartitionSpec((2, 2)),
        SamplingConfig(interior_counts=(30, 30), seed=202),
        NetworkConfig(input_dim=2, hidden_widths=(), subspace_dim=150),
        TrainingConfig(max_epochs=3000, rel_tol=1e-3, seed=202),
    )


def run_parabolic():
    return solve_linear(
        builtin("parabolic1d"),
        PartitionSpec((3, 3)),
        SamplingConfig(interior_counts=(30, 30), seed=202),
        NetworkConfig(input_dim=2, hidden_widths=(100, 100), subspace_dim=300),
        TrainingConfig(max_epochs=1500, rel_tol=1e-3, seed=202),
    )


def run_nonlinear_helmholtz():
    return solve_picard(
        builtin("nonlinear_helmholtz1d"),
        PartitionSpec((8,)),
        SamplingConfig(interior_counts=(100,), seed=202),
        NetworkConfig(input_dim=1, hidden_widths=(100, 100), subspace_dim=200),
        TrainingConfig(max_epochs=3000, rel_tol=1e-3, seed=202),
        nonlinear=NonlinearConfig(method="picard", max_iters=20, tol=1e-6),
    )


BURGERS_COMMON = dict(
    partition_spec=PartitionSpec((4, 2)),
    sampling=SamplingConfig(interior_counts=(20, 20), seed=202),
    network=NetworkConfig(input_dim=2, hidden_widths=(100, 100), subspace_dim=200),
    training=TrainingConfig(max_epochs=2000, rel_tol=1e-3, seed=202),
)


def run_burgers_picard():
    return solve_picard(
        builtin("burgers1d"),
        nonlinear=NonlinearConfig(method="picard", max_iters=25, tol=1e-12),
        **BURGERS_COMMON,
    )


def run_burgers_newton():
    return solve_newton(
        builtin("burgers1d"),
        nonlinear=NonlinearConfig(
            method="newton", max_iters=10, tol=1e-12, picard_warmup_iters=8
        ),
        **BURGERS_COMMON,
    )


@pytest.fixture(scope="module")
def benchmark_runs():
    """All benchmark solves, each timed once and shared across criteria."""
    runs = {}
    for name, runner in [
        ("helmholtz1d", run_helmholtz),
        ("boundary_layer1d", run_boundary_layer),
        ("poisson2d_full", run_poisson_full),
        ("poisson2d_reduced", run_poisson_reduced),
        ("parabolic1d", run_parabolic),
        ("nonlinear_helmholtz1d", run_nonlinear_helmholtz),
        ("burgers1d_picard", run_burgers_picard),
        ("burgers1d_newton", run_burgers_newton),
    ]:
        t0 = time.perf_counter()
        report = runner()
        runs[name] = (report, time.perf_counter() - t0)
    return runs


# ----------------------------------------------------------------------
# Criterion 1: assembly oracle with an injected polynomial basis.
# ----------------------------------------------------------------------


def monomials(points, orders=()):
    x = np.atleast_2d(points)[:, 0]
    powers = np.arange(6)
    vals = np.stack([x**j for j in powers], axis=1)
    derivs = {}
    if (1,) in orders:
        derivs[(1,)] = np.stack([j * x ** max(j - 1, 0) for j in powers], axis=1)
    if (2,) in orders:
        derivs[(2,)] = np.stack(
            [j * (j - 1) * x ** max(j - 2, 0) for j in powers], axis=1
        )
    return BasisEval(values=vals, derivs=derivs)


def test_c01_polynomial_assembly_oracle():
    t0 = time.perf_counter()
    exact = lambda pts: pts[:, 0] ** 3 - 2.0 * pts[:, 0]
    problem = ProblemSpec(
        name="cubic",
        domain=DomainSpec.interval(0.0, 2.0),
        linear_terms=(LinearTerm(1.0, (2,)), LinearTerm(-1.0, (0,))),
        source=lambda pts: -pts[:, 0] ** 3 + 8.0 * pts[:, 0],
        boundary=exact,
        exact=exact,
    )
    subs, ifaces = partition(problem.domain, PartitionSpec((2,)), (1,))
    indexing = GlobalIndexing(2, 6)
    orders = problem.operator_orders()
    blocks = []
    for sub in subs:
        pts = sample_interior(sub, "uniform", [25])
        blocks.append(
            assemble_pde_rows(problem, indexing, sub.index, pts, monomials(pts.points, orders))
        )
    bnd = sample_boundary(problem.domain, subs, [25])
    blocks.append(assemble_boundary_rows(problem, indexing, bnd, monomials(bnd.points).values))
    for iface in ifaces:
        ipts = sample_interface(iface, [])
        ev = monomials(ipts.points, [(1,)])
        blocks.append(assemble_continuity_rows(iface, indexing, ipts, ev, ev))
    beta, _ = solve_least_squares(assemble_global(blocks, indexing))

    grid = np.linspace(0.0, 2.0, 501)[:, None]
    u = np.where(
        grid[:, 0] <= 1.0,
        monomials(grid).values @ beta.block(0),
        monomials(grid).values @ beta.block(1),
    )
    linf = float(np.max(np.abs(u - exact(grid))))
    elapsed = time.perf_counter() - t0
    record(
        "1",
        linf <= 1e-10 and elapsed < 1.0,
        f"polynomial oracle linf={linf:.2e} (bound 1e-10) in {elapsed:.2f}s (<1s)",
    )


# ----------------------------------------------------------------------
# Criterion 2: derivative exactness against finite differences.
# ----------------------------------------------------------------------


def test_c02_derivative_exactness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    sub = SubdomainSpec(0, (0, 0), ((0.0, 2.0), (1.0, 1.5)))
    h = 1e-5
    worst = 0.0
    for depth in (0, 1, 2, 3):
        cfg = NetworkConfig(input_dim=2, hidden_widths=(6,) * depth, subspace_dim=5)
        for case in range(200):
            params = init_params(cfg, "uniform_range", seed=[depth, case])
            pts = rng.uniform([0.01, 1.01], [1.99, 1.49], size=(2, 2))
            orders = [(1, 0), (0, 1), (2, 0), (0, 2), (1, 1)]
            ev = eval_basis(params, sub, pts, orders)

            def values(p):
                return eval_basis(params, sub, p, []).values

            def first(p, s):
                alpha = (1, 0) if s == 0 else (0, 1)
                return eval_basis(params, sub, p, [alpha]).deriv(alpha)

            for alpha in orders:
                nz = [s for s, a in enumerate(alpha) if a > 0]
                step = np.zeros(2)
                if sum(alpha) == 1:
                    step[nz[0]] = h
                    fd = (values(pts + step) - values(pts - step)) / (2 * h)
                elif len(nz) == 1:
                    # second derivatives are differenced from the exact
                    # first-derivative channel: a value-based second
                    # difference at step 1e-5 drowns in eps/h^2 roundoff
                    step[nz[0]] = h
                    fd = (first(pts + step, nz[0]) - first(pts - step, nz[0])) / (2 * h)
                else:
                    step[1] = h
                    fd = (first(pts + step, 0) - first(pts - step, 0)) / (2 * h)
                err = np.abs(ev.deriv(alpha) - fd)
                tol = np.maximum(1e-6 * np.abs(fd), 1e-8)
                worst = max(worst, float(np.max(err / tol)))
    elapsed = time.perf_counter() - t0
    record(
        "2",
        worst <= 1.0 and elapsed < 30.0,
        f"800 random cases, worst error/tolerance ratio {worst:.3f} in {elapsed:.1f}s (<30s)",
    )


# ----------------------------------------------------------------------
# Criterion 3: gradient exactness against finite differences.
# ----------------------------------------------------------------------


def gradient_cases():
    """O(1)-scaled problems so the oracle's own roundoff (eps*|loss|/h)
    stays below the stated absolute tolerance."""
    lin = ProblemSpec(
        name="lin",
        domain=DomainSpec.interval(0.0, 2.0),
        linear_terms=(LinearTerm(1.0, (2,)), LinearTerm(-1.0, (0,))),
        source=lambda pts: np.sin(np.pi * pts[:, 0]),
        boundary=lambda pts: np.zeros(pts.shape[0]),
    )
    advect = ProblemSpec(
        name="advect",
        domain=DomainSpec.space_time([(0.0, 2.0)], (0.0, 1.0)),
        linear_terms=(LinearTerm(1.0, (0, 1)), LinearTerm(-0.5, (2, 0))),
        source=lambda pts: np.cos(pts[:, 0]) * np.exp(-pts[:, 1]),
        boundary=lambda pts: np.zeros(pts.shape[0]),
        initial=lambda pts: np.sin(pts[:, 0]),
        nonlinear=NonlinearTerm(
            value=lambda pts, u, derivs: u * derivs[(1, 0)],
            partials={
                (0, 0): lambda pts, u, derivs: derivs[(1, 0)],
                (1, 0): lambda pts, u, derivs: u,
            },
            orders=((1, 0),),
        ),
    )
    sine = ProblemSpec(
        name="sine",
        domain=DomainSpec.interval(0.0, 1.0),
        linear_terms=(LinearTerm(1.0, (2,)),),
        source=lambda pts: pts[:, 0],
        boundary=lambda pts: np.zeros(pts.shape[0]),
        nonlinear=NonlinearTerm(
            value=lambda pts, u, derivs: np.sin(u),
            partials={(0,): lambda pts, u, derivs: np.cos(u)},
        ),
    )
    return [lin, advect, sine]


def test_c03_gradient_exactness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    h = 1e-6
    worst = 0.0
    cases = 0
    for problem in gradient_cases():
        subs, _ = partition(problem.domain, PartitionSpec((1,) * problem.dim))
        sub = subs[0]
        counts = [7] * problem.dim
        for depth in (0, 1, 2):
            cfg = NetworkConfig(
                input_dim=problem.dim, hidden_widths=(5,) * depth, subspace_dim=4
            )
            for case in range(7):
                params = init_params(cfg, "uniform_range", seed=[depth, case])
                pts = sample_interior(sub, "random", counts, seed=case).points
                grads = loss_gradient(params, problem, sub, pts)
                for l, (W_g, b_g) in enumerate(grads):
                    for target, got in (
                        (params.weights[l], W_g),
                        (params.biases[l], b_g),
                    ):
                        flat = target.ravel()
                        got_flat = got.ravel()
                        for idx in range(flat.size):
                            orig = flat[idx]
                            flat[idx] = orig + h
                            up = residual_loss(params, problem, sub, pts)
                            flat[idx] = orig - h
                            dn = residual_loss(params, problem, sub, pts)
                            flat[idx] = orig
                            fd = (up - dn) / (2 * h)
                            tol = max(1e-5 * abs(fd), 1e-7)
                            worst = max(worst, abs(got_flat[idx] - fd) / tol)
                cases += 1
    elapsed = time.perf_counter() - t0
    record(
        "3",
        worst <= 1.0 and cases >= 50 and elapsed < 60.0,
        f"{cases} random (theta, point-set) cases, worst error/tolerance "
        f"ratio {worst:.3f} in {elapsed:.1f}s (<60s)",
    )


# ----------------------------------------------------------------------
# Criteria 4..9: benchmark reproduction bounds.
# ----------------------------------------------------------------------


def test_c04_helmholtz1d(benchmark_runs):
    report, elapsed = benchmark_runs["helmholtz1d"]
    ok = report.norms.l2_rel <= 1e-7 and elapsed < 600
    record(
        "4",
        ok,
        f"helmholtz1d l2_rel={report.norms.l2_rel:.2e} (bound 1e-7, paper 4.98e-11) "
        f"in {elapsed:.0f}s (<600s)",
    )


def test_c05_boundary_layer1d(benchmark_runs):
    report, elapsed = benchmark_runs["boundary_layer1d"]
    ok = report.norms.l2_abs <= 1e-5 and elapsed < 300
    record(
        "5",
        ok,
        f"boundary_layer1d l2_abs={report.norms.l2_abs:.2e} (bound 1e-5, paper 2.45e-7) "
        f"in {elapsed:.0f}s (<300s)",
    )


def test_c06_poisson2d(benchmark_runs):
    full, t_full = benchmark_runs["poisson2d_full"]
    reduced, t_reduced = benchmark_runs["poisson2d_reduced"]
    ok_full = full.norms.l2_rel <= 1e-8 and t_full < 1800
    ok_reduced = reduced.norms.l2_rel <= 1e-6 and t_reduced < 300
    record(
        "6",
        ok_full and ok_reduced,
        f"poisson2d full l2_rel={full.norms.l2_rel:.2e} (bound 1e-8, paper 4.94e-12) "
        f"in {t_full:.0f}s (<1800s); reduced l2_rel={reduced.norms.l2_rel:.2e} "
        f"(bound 1e-6) in {t_reduced:.0f}s (<300s)",
    )


def test_c07_parabolic1d(benchmark_runs):
    report, elapsed = benchmark_runs["parabolic1d"]
    ok = report.norms.l2_rel <= 1e-8 and elapsed < 1200
    record(
        "7",
        ok,
        f"parabolic1d l2_rel={report.norms.l2_rel:.2e} (bound 1e-8, paper 2.33e-11) "
        f"in {elapsed:.0f}s (<1200s)",
    )


def test_c08_nonlinear_helmholtz1d_picard(benchmark_runs):
    report, _ = benchmark_runs["nonlinear_helmholtz1d"]
    ok = (
        report.converged
        and report.nonlinear_iters <= 12
        and report.norms.l2_rel <= 1e-6
    )
    record(
        "8",
        ok,
        f"nonlinear_helmholtz1d picard iters={report.nonlinear_iters} (bound 12, paper 8), "
        f"l2_rel={report.norms.l2_rel:.2e} (bound 1e-6, paper 9.49e-10)",
    )


def test_c09_burgers1d(benchmark_runs):
    picard, _ = benchmark_runs["burgers1d_picard"]
    newton, _ = benchmark_runs["burgers1d_newton"]
    _, u_picard, _ = picard.samples
    _, u_newton, _ = newton.samples
    agreement = float(np.max(np.abs(u_picard - u_newton)))
    ok = (
        picard.converged
        and picard.nonlinear_iters <= 25
        and newton.converged
        and newton.nonlinear_iters <= 4
        and picard.norms.l2_rel <= 1e-7
        and newton.norms.l2_rel <= 1e-7
        and agreement <= 1e-8
    )
    record(
        "9",
        ok,
        f"burgers1d picard iters={picard.nonlinear_iters} (bound 25, paper 17) "
        f"l2_rel={picard.norms.l2_rel:.2e}; newton iters={newton.nonlinear_iters} "
        f"(bound 4, paper 2) l2_rel={newton.norms.l2_rel:.2e}; "
        f"agreement linf={agreement:.2e} (bound 1e-8)",
    )


def test_c09b_newton_residual_decreases(benchmark_runs):
    newton, _ = benchmark_runs["burgers1d_newton"]
    history = newton.nonlinear_residual_history
    assert len(history) >= 2
    assert all(b <= a * (1 + 1e-12) for a, b in zip(history, history[1:]))


# ----------------------------------------------------------------------
# Criterion 10: degenerate modes.
# ----------------------------------------------------------------------


def test_c10_degeneration():
    problem = builtin("helmholtz1d")
    network = NetworkConfig(input_dim=1, hidden_widths=(30,), subspace_dim=40)
    params = [init_params(network, "uniform_range", seed=[99, 0])]

    disc = Discretization(
        problem,
        PartitionSpec((1,)),
        SamplingConfig(interior_counts=(50,), seed=99),
        network,
        TrainingConfig(epochs_zero=True),
        params_list=params,
    )
    pipeline = disc.assemble_linear_system()

    # standalone single-network collocation assembly, no partition machinery
    subs, _ = partition(problem.domain, PartitionSpec((1,)), problem.default_continuity_orders())
    indexing = GlobalIndexing(1, 40)
    pts = sample_interior(subs[0], "uniform", [50], seed=99)
    ev = eval_basis(params[0], subs[0], pts.points, problem.operator_orders())
    bnd = sample_boundary(problem.domain, subs, [50], seed=99)
    bnd_ev = eval_basis(params[0], subs[0], bnd.points, ())
    direct = assemble_global(
        [
            assemble_pde_rows(problem, indexing, 0, pts, ev),
            assemble_boundary_rows(problem, indexing, bnd, bnd_ev.values),
        ],
        indexing,
    )
    systems_equal = (
        pipeline.matrix.shape == direct.matrix.shape
        and np.array_equal(pipeline.matrix, direct.matrix)
        and np.array_equal(pipeline.rhs, direct.rhs)
    )

    # untrained random-feature mode: no training epochs anywhere
    locelm = solve_linear(
        problem,
        PartitionSpec((4,)),
        SamplingConfig(interior_counts=(50,), seed=1),
        network,
        TrainingConfig(epochs_zero=True),
        init_mode="uniform_range",
    )
    locelm_ok = locelm.epochs_per_subdomain == [0, 0, 0, 0] and all(
        r == 1.0 for r in locelm.final_rel_losses
    )
    record(
        "10",
        systems_equal and locelm_ok,
        f"single-cell pipeline system equals direct assembly exactly={systems_equal}; "
        f"untrained mode logged epochs {locelm.epochs_per_subdomain}",
    )


# ----------------------------------------------------------------------
# Criterion 11: interface smoothness on every converged benchmark run.
# ----------------------------------------------------------------------


def test_c11_interface_smoothness(benchmark_runs):
    details = []
    ok = True
    for name, (report, _) in benchmark_runs.items():
        if not report.converged:
            continue
        bound = 10.0 * report.ls_residual_rms
        passed = report.interface_jump_max <= bound
        ok = ok and passed
        details.append(f"{name}: jump {report.interface_jump_max:.1e} <= {bound:.1e}")
    record("11", ok, "; ".join(details))


# ----------------------------------------------------------------------
# Criterion 12: byte-identical reports modulo timing.
# ----------------------------------------------------------------------


def test_c12_determinism(tmp_path):
    doc = {
        "problem": "boundary_layer1d",
        "partition": {"counts": [8]},
        "sampling": {"counts": [100], "seed": 202},
        "network": {"hidden_widths": [100, 100], "subspace_dim": 100},
        "training": {"max_epochs": 1000},
        "output_dir": str(tmp_path / "a"),
    }
    report_a = execute(from_dict(doc))
    doc["output_dir"] = str(tmp_path / "b")
    report_b = execute(from_dict(doc))

    a = json.loads((tmp_path / "a" / "report.json").read_text())
    b = json.loads((tmp_path / "b" / "report.json").read_text())
    a.pop("wall_times")
    b.pop("wall_times")
    identical = a == b
    record(
        "12",
        identical,
        "repeated boundary_layer1d runs byte-identical modulo wall_times"
        if identical
        else "reports differ",
    )
