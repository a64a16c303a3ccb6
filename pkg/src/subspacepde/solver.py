"""End-to-end drivers: train bases, assemble, solve, iterate if nonlinear.

The linear driver trains each subdomain network on the interior residual,
freezes the bases, assembles the global block system and solves it once.
The Picard driver sweeps with the nonlinear term lagged at the previous
iterate: value-only terms move entirely to the right-hand side (constant
matrix, factorization cached), while terms reading solution derivatives
keep those slots live with lagged coefficients.  The Newton driver solves
the fully linearized system for the updated coefficients each step,
warm-started by Picard sweeps because the raw trained output ignores
boundary data.

Non-convergence of an iteration is reported, not raised: the best iterate
comes back with ``converged=False``.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from .assembly import (
    CachedLstsq,
    GlobalIndexing,
    GlobalSystem,
    RowBlock,
    assemble_boundary_rows,
    assemble_continuity_rows,
    assemble_global,
    assemble_newton_rows,
    assemble_pde_rows,
    assemble_picard_rows,
    dump_system,
    equilibrate_rows,
    solve_least_squares,
)
from .geometry import (
    DomainSpec,
    PartitionSpec,
    PointSet,
    SubdomainSpec,
    find_owners,
    partition,
    sample_boundary,
    sample_interface,
    sample_interior,
)
from .network import (
    BasisEval,
    CoefficientVector,
    NetworkConfig,
    NetworkParams,
    eval_basis,
    init_params,
)
from .problems import ErrorNorms, ProblemSpec, error_norms
from .training import TrainingConfig, train_subdomain

Array = NDArray[np.float64]


@dataclass(frozen=True)
class SamplingConfig:
    """Collocation sampling for interior, boundary and interface sets.

    Counts are per axis; boundary and interface facets reuse the interior
    counts of their tangential axes unless overridden.
    """

    interior_counts: tuple[int, ...]
    strategy: str = "uniform"
    boundary_counts: tuple[int, ...] | None = None
    interface_counts: tuple[int, ...] | None = None
    seed: int = 202

    def boundary_axis_counts(self) -> tuple[int, ...]:
        return self.boundary_counts or self.interior_counts

    def interface_axis_counts(self) -> tuple[int, ...]:
        return self.interface_counts or self.interior_counts


@dataclass(frozen=True)
class NonlinearConfig:
    """Fixed-point / Newton iteration settings."""

    method: str = "picard"
    max_iters: int = 20
    tol: float = 1e-6
    picard_warmup_iters: int = 2

    def __post_init__(self) -> None:
        if self.method not in ("picard", "newton"):
            raise ValueError("nonlinear method must be 'picard' or 'newton'")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.picard_warmup_iters < 0:
            raise ValueError("picard_warmup_iters must be >= 0")


@dataclass
class SolveReport:
    """Everything a solve produced, ready for serialization.

    ``samples`` holds the evaluation-grid points with numeric (and exact,
    when known) solution values; it feeds the CSV writer and is not part
    of the JSON document.
    """

    problem: str
    method: str
    num_subdomains: int
    subspace_dim: int
    rows: int
    columns: int
    beta: CoefficientVector
    norms: ErrorNorms | None
    epochs_per_subdomain: list[int]
    final_rel_losses: list[float]
    nonlinear_iters: int
    warmup_iters_used: int
    converged: bool
    ls_residual_history: list[float]
    nonlinear_residual_history: list[float]
    ls_residual_rms: float
    interface_jump_max: float
    wall_times: dict[str, float]
    samples: tuple[Array, Array, Array | None] | None = None

    @property
    def epochs_mean(self) -> float:
        if not self.epochs_per_subdomain:
            return 0.0
        return float(np.mean(self.epochs_per_subdomain))

    def to_json_dict(self) -> dict:
        norms = None
        if self.norms is not None:
            norms = {
                "l2_abs": self.norms.l2_abs,
                "l2_rel": self.norms.l2_rel,
                "linf": self.norms.linf,
            }
        return {
            "problem": self.problem,
            "method": self.method,
            "num_subdomains": self.num_subdomains,
            "subspace_dim": self.subspace_dim,
            "rows": self.rows,
            "columns": self.columns,
            "norms": norms,
            "epochs_per_subdomain": self.epochs_per_subdomain,
            "epochs_mean": self.epochs_mean,
            "final_rel_losses": self.final_rel_losses,
            "nonlinear_iters": self.nonlinear_iters,
            "warmup_iters_used": self.warmup_iters_used,
            "converged": self.converged,
            "ls_residual_history": self.ls_residual_history,
            "nonlinear_residual_history": self.nonlinear_residual_history,
            "ls_residual_rms": self.ls_residual_rms,
            "interface_jump_max": self.interface_jump_max,
            "beta": self.beta.values.tolist(),
            "wall_times": self.wall_times,
        }

    def save_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh, indent=1, sort_keys=True)
            fh.write("\n")


class Discretization:
    """Shared state of one solve: partition, samples, trained bases, rows.

    Building it runs the whole training phase; the row blocks it caches are
    reused across nonlinear iterations (only nonlinear contributions are
    refreshed).
    """

    def __init__(
        self,
        problem: ProblemSpec,
        partition_spec: PartitionSpec,
        sampling: SamplingConfig,
        network: NetworkConfig,
        training: TrainingConfig,
        init_mode: str = "glorot",
        params_list: Sequence[NetworkParams] | None = None,
        log_dir=None,
    ):
        self.problem = problem
        self.network = network
        self.training = training
        continuity = problem.default_continuity_orders()
        self.subdomains, self.interfaces = partition(
            problem.domain, partition_spec, continuity
        )
        self.indexing = GlobalIndexing(len(self.subdomains), network.subspace_dim)

        self.interior = [
            sample_interior(sub, sampling.strategy, sampling.interior_counts, sampling.seed)
            for sub in self.subdomains
        ]
        self.boundary = sample_boundary(
            problem.domain,
            self.subdomains,
            sampling.boundary_axis_counts(),
            sampling.strategy,
            sampling.seed,
        )
        iface_counts = sampling.interface_axis_counts()
        self.interface_points = [
            sample_interface(
                iface,
                [iface_counts[r] for r in range(problem.dim) if r != iface.axis],
                sampling.strategy,
                sampling.seed,
            )
            for iface in self.interfaces
        ]

        t0 = time.perf_counter()
        self.params: list[NetworkParams] = []
        self.epochs: list[int] = []
        self.rel_losses: list[float] = []
        for sub in self.subdomains:
            if params_list is not None:
                theta0 = params_list[sub.index]
            else:
                theta0 = init_params(network, init_mode, seed=[training.seed, sub.index])
            log_path = None
            if log_dir is not None and not training.epochs_zero:
                log_path = f"{log_dir}/training_log_{sub.index}.csv"
            theta, epochs, rel = train_subdomain(
                theta0,
                problem,
                sub,
                self.interior[sub.index],
                training,
                subspace_activation=network.subspace_activation,
                log_path=log_path,
            )
            self.params.append(theta)
            self.epochs.append(epochs)
            self.rel_losses.append(rel)
        self.train_seconds = time.perf_counter() - t0

        t0 = time.perf_counter()
        self._build_evals()
        self._build_static_blocks()
        self.assemble_seconds = time.perf_counter() - t0

    # -- basis evaluation caches ------------------------------------------

    def _build_evals(self) -> None:
        problem = self.problem
        act = self.network.subspace_activation
        orders = problem.operator_orders()
        self.interior_evals: list[BasisEval] = [
            eval_basis(self.params[sub.index], sub, pts.points, orders, act)
            for sub, pts in zip(self.subdomains, self.interior)
        ]

        n_bnd = len(self.boundary)
        self.boundary_values = np.zeros((n_bnd, self.network.subspace_dim))
        if n_bnd:
            owners = self.boundary.owners
            for sub in self.subdomains:
                mask = owners == sub.index
                if mask.any():
                    ev = eval_basis(self.params[sub.index], sub, self.boundary.points[mask], (), act)
                    self.boundary_values[mask] = ev.values

        self.interface_evals: list[tuple[BasisEval, BasisEval]] = []
        for iface, pts in zip(self.interfaces, self.interface_points):
            alphas = [
                tuple(order if s == iface.axis else 0 for s in range(problem.dim))
                for order in range(1, iface.continuity_order + 1)
            ]
            left = eval_basis(
                self.params[iface.left], self.subdomains[iface.left], pts.points, alphas, act
            )
            right = eval_basis(
                self.params[iface.right], self.subdomains[iface.right], pts.points, alphas, act
            )
            self.interface_evals.append((left, right))

    def _build_static_blocks(self) -> None:
        self.boundary_block = assemble_boundary_rows(
            self.problem, self.indexing, self.boundary, self.boundary_values
        )
        self.continuity_blocks = [
            assemble_continuity_rows(iface, self.indexing, pts, left, right)
            for iface, pts, (left, right) in zip(
                self.interfaces, self.interface_points, self.interface_evals
            )
        ]
        self.source_values = [
            self.problem.source(pts.points) for pts in self.interior
        ]

    # -- solution evaluation ----------------------------------------------

    def network_output_with_unit_coefficients(self):
        """Interior solution/derivatives of the raw trained networks (coefficients == 1)."""
        out = []
        for ev in self.interior_evals:
            u = ev.values.sum(axis=1)
            derivs = {alpha: block.sum(axis=1) for alpha, block in ev.derivs.items()}
            out.append((u, derivs))
        return out

    def interior_solution(self, beta: CoefficientVector):
        """Per-subdomain (u, derivs) at the interior points for given coefficients."""
        out = []
        for sub, ev in zip(self.subdomains, self.interior_evals):
            b = beta.block(sub.index)
            u = ev.values @ b
            derivs = {alpha: block @ b for alpha, block in ev.derivs.items()}
            out.append((u, derivs))
        return out

    def interior_values_flat(self, beta: CoefficientVector) -> Array:
        return np.concatenate([ev.values @ beta.block(sub.index) for sub, ev in zip(self.subdomains, self.interior_evals)])

    def frozen_nonlinear(self, solution) -> list[Array]:
        term = self.problem.nonlinear
        assert term is not None
        return [
            term.value(pts.points, u, derivs)
            for pts, (u, derivs) in zip(self.interior, solution)
        ]

    def picard_pde_blocks(self, solution) -> list[RowBlock]:
        """Lagged-linearization PDE rows at the given interior iterate."""
        return [
            assemble_picard_rows(
                self.problem, self.indexing, sub.index, pts, ev, u, derivs
            )
            for sub, pts, ev, (u, derivs) in zip(
                self.subdomains, self.interior, self.interior_evals, solution
            )
        ]

    def linear_pde_blocks(self, frozen: Sequence[Array] | None = None) -> list[RowBlock]:
        return [
            assemble_pde_rows(
                self.problem,
                self.indexing,
                sub.index,
                pts,
                ev,
                None if frozen is None else frozen[sub.index],
            )
            for sub, pts, ev in zip(self.subdomains, self.interior, self.interior_evals)
        ]

    def assemble_linear_system(self, frozen: Sequence[Array] | None = None) -> GlobalSystem:
        blocks = self.linear_pde_blocks(frozen) + [self.boundary_block] + self.continuity_blocks
        return assemble_global(blocks, self.indexing)

    def boundary_matvec(self, beta: CoefficientVector) -> Array:
        out = np.zeros(len(self.boundary))
        if len(self.boundary):
            owners = self.boundary.owners
            for sub in self.subdomains:
                mask = owners == sub.index
                if mask.any():
                    out[mask] = self.boundary_values[mask] @ beta.block(sub.index)
        return out

    def continuity_jumps(self, beta: CoefficientVector) -> list[Array]:
        """Per-interface stacked jump values (order-major) at the interface points."""
        jumps = []
        for iface, (left, right) in zip(self.interfaces, self.interface_evals):
            bl = beta.block(iface.left)
            br = beta.block(iface.right)
            rows = [left.values @ bl - right.values @ br]
            for order in range(1, iface.continuity_order + 1):
                alpha = tuple(order if s == iface.axis else 0 for s in range(self.problem.dim))
                rows.append(left.deriv(alpha) @ bl - right.deriv(alpha) @ br)
            jumps.append(np.concatenate(rows))
        return jumps

    def interface_jump_max(self, beta: CoefficientVector) -> float:
        jumps = self.continuity_jumps(beta)
        if not jumps:
            return 0.0
        return float(max(np.max(np.abs(j)) for j in jumps))

    def stacked_residual_norm(self, beta: CoefficientVector, solution=None) -> float:
        """2-norm of the full nonlinear system residual at the iterate."""
        if solution is None:
            solution = self.interior_solution(beta)
        parts = [
            self.problem.residual(pts.points, u, derivs)
            for pts, (u, derivs) in zip(self.interior, solution)
        ]
        parts.append(self.boundary_matvec(beta) - self.boundary_block.rhs)
        parts.extend(self.continuity_jumps(beta))
        return float(np.linalg.norm(np.concatenate(parts)))


def evaluate_solution(
    points: Array,
    subdomains: Sequence[SubdomainSpec],
    params: Sequence[NetworkParams],
    beta: CoefficientVector,
    subspace_activation: str = "tanh",
) -> Array:
    """Evaluate the assembled solution at arbitrary points of the domain."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    owners = find_owners(pts, subdomains)
    out = np.empty(pts.shape[0])
    for sub in subdomains:
        mask = owners == sub.index
        if mask.any():
            ev = eval_basis(params[sub.index], sub, pts[mask], (), subspace_activation)
            out[mask] = ev.values @ beta.block(sub.index)
    return out


@dataclass(frozen=True)
class EvaluationSpec:
    """Uniform evaluation grid over the whole domain, per-axis totals."""

    counts: tuple[int, ...]


def evaluation_grid(domain: DomainSpec, spec: EvaluationSpec) -> Array:
    if len(spec.counts) != domain.dim:
        raise ValueError("evaluation counts must have one entry per axis")
    axes = [np.linspace(lo, hi, int(n)) for (lo, hi), n in zip(domain.axes, spec.counts)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _default_evaluation(partition_spec: PartitionSpec, sampling: SamplingConfig) -> EvaluationSpec:
    counts = tuple(
        int(c) * int(n) for c, n in zip(sampling.interior_counts, partition_spec.counts)
    )
    return EvaluationSpec(counts=counts)


def _finish_report(
    disc: Discretization,
    beta: CoefficientVector,
    *,
    method: str,
    rows: int,
    ls_history: list[float],
    nonlinear_history: list[float],
    nonlinear_iters: int,
    warmup_used: int,
    converged: bool,
    final_residual_norm: float,
    wall: dict[str, float],
    evaluation: EvaluationSpec | None,
    partition_spec: PartitionSpec,
    sampling: SamplingConfig,
) -> SolveReport:
    problem = disc.problem
    eval_spec = evaluation or _default_evaluation(partition_spec, sampling)
    grid = evaluation_grid(problem.domain, eval_spec)
    u_hat = evaluate_solution(
        grid, disc.subdomains, disc.params, beta, disc.network.subspace_activation
    )
    norms = None
    u_exact = None
    if problem.exact is not None:
        u_exact = problem.exact(grid)
        norms = error_norms(lambda p: u_hat, problem.exact, PointSet(grid, "interior"))

    rms = final_residual_norm / np.sqrt(rows) if rows else 0.0
    return SolveReport(
        problem=problem.name,
        method=method,
        num_subdomains=len(disc.subdomains),
        subspace_dim=disc.network.subspace_dim,
        rows=rows,
        columns=disc.indexing.width,
        beta=beta,
        norms=norms,
        epochs_per_subdomain=list(disc.epochs),
        final_rel_losses=[float(r) for r in disc.rel_losses],
        nonlinear_iters=nonlinear_iters,
        warmup_iters_used=warmup_used,
        converged=converged,
        ls_residual_history=ls_history,
        nonlinear_residual_history=nonlinear_history,
        ls_residual_rms=float(rms),
        interface_jump_max=disc.interface_jump_max(beta),
        wall_times=wall,
        samples=(grid, u_hat, u_exact),
    )


def solve_linear(
    problem: ProblemSpec,
    partition_spec: PartitionSpec,
    sampling: SamplingConfig,
    network: NetworkConfig,
    training: TrainingConfig,
    *,
    init_mode: str = "glorot",
    evaluation: EvaluationSpec | None = None,
    params_list: Sequence[NetworkParams] | None = None,
    log_dir=None,
    dump_path=None,
    row_scaling: bool = False,
) -> SolveReport:
    """Train bases, assemble once, solve the least-squares system once."""
    if problem.nonlinear is not None:
        raise ValueError("solve_linear needs a problem without a nonlinear term")
    disc = Discretization(
        problem, partition_spec, sampling, network, training, init_mode, params_list, log_dir
    )
    t0 = time.perf_counter()
    system = disc.assemble_linear_system()
    if row_scaling:
        system = equilibrate_rows(system)
    disc.assemble_seconds += time.perf_counter() - t0
    if dump_path is not None:
        dump_system(system, dump_path)

    t0 = time.perf_counter()
    beta, residual = solve_least_squares(system)
    solve_seconds = time.perf_counter() - t0

    wall = {
        "train": disc.train_seconds,
        "assemble": disc.assemble_seconds,
        "solve": solve_seconds,
    }
    wall["total"] = sum(wall.values())
    return _finish_report(
        disc,
        beta,
        method="linear",
        rows=system.shape[0],
        ls_history=[residual],
        nonlinear_history=[],
        nonlinear_iters=0,
        warmup_used=0,
        converged=True,
        final_residual_norm=residual,
        wall=wall,
        evaluation=evaluation,
        partition_spec=partition_spec,
        sampling=sampling,
    )


class _PicardLoop:
    """Fixed-point sweeps with the nonlinear term linearized by lagging.

    Terms that read only the solution value keep a constant matrix, so one
    factorization is cached and each sweep refreshes the PDE right-hand
    side only.  Terms that read derivatives keep those slots live with
    lagged coefficients, which changes the PDE rows every sweep.
    """

    def __init__(self, disc: Discretization, dump_path=None):
        self.disc = disc
        self.value_only = not disc.problem.nonlinear.orders
        t0 = time.perf_counter()
        solution0 = disc.network_output_with_unit_coefficients()
        self.system = self._assemble(solution0)
        disc.assemble_seconds += time.perf_counter() - t0
        if dump_path is not None:
            dump_system(self.system, dump_path)

        t0 = time.perf_counter()
        self.solver = CachedLstsq(self.system.matrix) if self.value_only else None
        self.beta = self._solve()
        self.ls_history = [self._ls_residual()]
        self.solve_seconds = time.perf_counter() - t0
        self.pde_slices = [
            self.system.block_slices[i] for i in range(len(disc.subdomains))
        ]

    def _assemble(self, solution) -> GlobalSystem:
        disc = self.disc
        blocks = disc.picard_pde_blocks(solution) + [disc.boundary_block] + disc.continuity_blocks
        return assemble_global(blocks, disc.indexing)

    def _solve(self) -> CoefficientVector:
        if self.solver is not None:
            values = self.solver.solve(self.system.rhs)
            return CoefficientVector(values, self.disc.indexing.block_size)
        beta, _ = solve_least_squares(self.system)
        return beta

    def _ls_residual(self) -> float:
        return float(np.linalg.norm(self.system.matrix @ self.beta.values - self.system.rhs))

    def iterate(self, max_iters: int, tol: float) -> tuple[int, bool]:
        """Run fixed-point sweeps; returns (iterations used, converged).

        On non-convergence the loop leaves ``beta`` at the best iterate
        seen (smallest update in the interior sup-norm), so the caller
        still gets a usable solution alongside the flag.
        """
        disc = self.disc
        u_prev = disc.interior_values_flat(self.beta)
        iters = 0
        converged = False
        best = (np.inf, self.beta)
        t0 = time.perf_counter()
        for _ in range(max_iters):
            solution = disc.interior_solution(self.beta)
            if self.value_only:
                frozen = disc.frozen_nonlinear(solution)
                for sub, fr in zip(disc.subdomains, frozen):
                    sl = self.pde_slices[sub.index]
                    self.system.rhs[sl] = disc.source_values[sub.index] - fr
            else:
                self.system = self._assemble(solution)
            self.beta = self._solve()
            self.ls_history.append(self._ls_residual())
            iters += 1
            u_new = disc.interior_values_flat(self.beta)
            delta = float(np.max(np.abs(u_new - u_prev)))
            u_prev = u_new
            if delta < best[0]:
                best = (delta, self.beta)
            if delta <= tol:
                converged = True
                break
        if not converged and np.isfinite(best[0]):
            self.beta = best[1]
        self.solve_seconds += time.perf_counter() - t0
        return iters, converged


def solve_picard(
    problem: ProblemSpec,
    partition_spec: PartitionSpec,
    sampling: SamplingConfig,
    network: NetworkConfig,
    training: TrainingConfig,
    nonlinear: NonlinearConfig,
    *,
    init_mode: str = "glorot",
    evaluation: EvaluationSpec | None = None,
    params_list: Sequence[NetworkParams] | None = None,
    log_dir=None,
    dump_path=None,
) -> SolveReport:
    """Fixed-point iteration with the nonlinear term frozen per sweep.

    The starting coefficients come from one linear solve with the term
    frozen at the trained networks' unit-coefficient output.
    """
    if problem.nonlinear is None:
        raise ValueError("solve_picard needs a problem with a nonlinear term")
    disc = Discretization(
        problem, partition_spec, sampling, network, training, init_mode, params_list, log_dir
    )
    loop = _PicardLoop(disc, dump_path)
    iters, converged = loop.iterate(nonlinear.max_iters, nonlinear.tol)

    wall = {
        "train": disc.train_seconds,
        "assemble": disc.assemble_seconds,
        "solve": loop.solve_seconds,
    }
    wall["total"] = sum(wall.values())
    return _finish_report(
        disc,
        loop.beta,
        method="picard",
        rows=loop.system.shape[0],
        ls_history=loop.ls_history,
        nonlinear_history=[],
        nonlinear_iters=iters,
        warmup_used=0,
        converged=converged,
        final_residual_norm=loop.ls_history[-1],
        wall=wall,
        evaluation=evaluation,
        partition_spec=partition_spec,
        sampling=sampling,
    )


def solve_newton(
    problem: ProblemSpec,
    partition_spec: PartitionSpec,
    sampling: SamplingConfig,
    network: NetworkConfig,
    training: TrainingConfig,
    nonlinear: NonlinearConfig,
    *,
    init_mode: str = "glorot",
    evaluation: EvaluationSpec | None = None,
    params_list: Sequence[NetworkParams] | None = None,
    log_dir=None,
    dump_path=None,
) -> SolveReport:
    """Newton iteration on the coefficients after a short Picard warmup."""
    if problem.nonlinear is None:
        raise ValueError("solve_newton needs a problem with a nonlinear term")
    disc = Discretization(
        problem, partition_spec, sampling, network, training, init_mode, params_list, log_dir
    )
    loop = _PicardLoop(disc, dump_path)
    warmup_used, _ = loop.iterate(nonlinear.picard_warmup_iters, nonlinear.tol) if nonlinear.picard_warmup_iters else (0, False)
    beta = loop.beta
    ls_history = list(loop.ls_history)

    t0 = time.perf_counter()
    nonlinear_history: list[float] = []
    iters = 0
    converged = False
    u_prev = disc.interior_values_flat(beta)
    rows = loop.system.shape[0]
    best = (np.inf, beta)
    for _ in range(nonlinear.max_iters):
        solution = disc.interior_solution(beta)
        nonlinear_history.append(disc.stacked_residual_norm(beta, solution))
        blocks = [
            assemble_newton_rows(
                problem, disc.indexing, sub.index, pts, ev, u, derivs
            )
            for sub, pts, ev, (u, derivs) in zip(
                disc.subdomains, disc.interior, disc.interior_evals, solution
            )
        ]
        blocks.append(disc.boundary_block)
        blocks.extend(disc.continuity_blocks)
        system = assemble_global(blocks, disc.indexing)
        rows = system.shape[0]

        beta, ls_res = solve_least_squares(system)
        ls_history.append(ls_res)
        iters += 1
        u_new = disc.interior_values_flat(beta)
        delta = float(np.max(np.abs(u_new - u_prev)))
        u_prev = u_new
        if delta < best[0]:
            best = (delta, beta)
        if delta <= nonlinear.tol:
            converged = True
            break
    if not converged and np.isfinite(best[0]):
        beta = best[1]

    # Stacked nonlinear residual at the final iterate, for reporting the
    # quality the continuity rows were solved to.
    final_residual = disc.stacked_residual_norm(beta)
    nonlinear_history.append(final_residual)
    solve_seconds = loop.solve_seconds + (time.perf_counter() - t0)

    wall = {
        "train": disc.train_seconds,
        "assemble": disc.assemble_seconds,
        "solve": solve_seconds,
    }
    wall["total"] = sum(wall.values())
    return _finish_report(
        disc,
        beta,
        method="newton",
        rows=rows,
        ls_history=ls_history,
        nonlinear_history=nonlinear_history,
        nonlinear_iters=iters,
        warmup_used=warmup_used,
        converged=converged,
        final_residual_norm=final_residual,
        wall=wall,
        evaluation=evaluation,
        partition_spec=partition_spec,
        sampling=sampling,
    )
