"""Global block least-squares system over the stacked basis coefficients.

Rows come in three kinds, stacked in this order: PDE rows (operator applied
to each subdomain's basis at interior points), boundary rows (basis values
at boundary/initial points in the owning subdomain's column block), and
continuity rows (+/- derivative blocks of the two subdomains sharing an
interface).  Columns are per-subdomain blocks of width M, in subdomain
order.  The system is solved in the minimum-norm least-squares sense with
singular values below 1e-12 of the largest truncated; neural bases are
often nearly dependent, so the truncation is what keeps the solve stable.

Assembly consumes `BasisEval` objects, so any provider works: the test
suite injects polynomial bases to validate the assembled equations
independently of any network.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from numpy.typing import NDArray

from .geometry import InterfaceSpec, PointSet
from .network import BasisEval, CoefficientVector
from .problems import ProblemSpec

Array = NDArray[np.float64]
MultiIndex = tuple[int, ...]

# Relative singular-value cutoff for the rank-revealing solve.
RCOND = 1e-12


@dataclass(frozen=True)
class GlobalIndexing:
    """Column layout of the stacked coefficient vector."""

    num_subdomains: int
    block_size: int

    @property
    def width(self) -> int:
        return self.num_subdomains * self.block_size

    def col_offset(self, subdomain: int) -> int:
        if not 0 <= subdomain < self.num_subdomains:
            raise IndexError(f"subdomain id {subdomain} out of range")
        return subdomain * self.block_size

    def col_slice(self, subdomain: int) -> slice:
        off = self.col_offset(subdomain)
        return slice(off, off + self.block_size)


@dataclass
class _Piece:
    row_start: int
    col_start: int
    values: Array


@dataclass
class RowBlock:
    """A batch of rows of the global system, stored block-sparse.

    Each piece is a dense local matrix placed at (row_start, col_start);
    PDE and boundary rows touch one column block, continuity rows exactly
    two with opposite signs.
    """

    kind: str
    width: int
    n_rows: int
    rhs: Array
    pieces: list[_Piece]
    meta: dict = field(default_factory=dict)

    def to_dense(self) -> Array:
        out = np.zeros((self.n_rows, self.width))
        for piece in self.pieces:
            r, c = piece.values.shape
            out[piece.row_start : piece.row_start + r, piece.col_start : piece.col_start + c] = (
                piece.values
            )
        return out


def assemble_pde_rows(
    problem: ProblemSpec,
    indexing: GlobalIndexing,
    subdomain_id: int,
    points: PointSet | Array,
    basis: BasisEval,
    frozen_nonlinear: Array | None = None,
) -> RowBlock:
    """Operator rows for one subdomain: sum of coefficient x basis derivative.

    ``frozen_nonlinear`` holds per-point values of the nonlinear term frozen
    at a previous iterate; they move to the right-hand side.  Linear
    problems pass nothing.
    """
    pts = points.points if isinstance(points, PointSet) else np.atleast_2d(points)
    n = pts.shape[0]
    zero = (0,) * problem.dim
    local = np.zeros((n, basis.num_basis))
    for alpha, coef in problem.linear_row_weights(pts).items():
        block = basis.values if alpha == zero else basis.deriv(alpha)
        local += coef[:, None] * block
    rhs = problem.source(pts).astype(float, copy=True)
    if frozen_nonlinear is not None:
        rhs -= frozen_nonlinear
    return RowBlock(
        kind="pde",
        width=indexing.width,
        n_rows=n,
        rhs=rhs,
        pieces=[_Piece(0, indexing.col_offset(subdomain_id), local)],
        meta={"subdomain": subdomain_id},
    )


def assemble_picard_rows(
    problem: ProblemSpec,
    indexing: GlobalIndexing,
    subdomain_id: int,
    points: PointSet | Array,
    basis: BasisEval,
    u: Array,
    u_derivs: Mapping[MultiIndex, Array],
) -> RowBlock:
    """Fixed-point rows with the nonlinear term's coefficients lagged.

    Where the term reads solution derivatives, those slots stay live in the
    matrix with their partial-derivative coefficients frozen at the current
    iterate (for advection-type terms this is the classic lagged-velocity
    sweep); the remaining value dependence moves to the right-hand side.
    Freezing the whole term instead makes the sweep map repel for
    quadratic advection, so only value-only terms use that degenerate form
    (for them this reduces to it exactly, with a constant matrix).
    """
    term = problem.nonlinear
    if term is None:
        raise ValueError("picard rows need a problem with a nonlinear term")
    pts = points.points if isinstance(points, PointSet) else np.atleast_2d(points)
    n = pts.shape[0]
    zero = (0,) * problem.dim
    local = np.zeros((n, basis.num_basis))
    for alpha, coef in problem.linear_row_weights(pts).items():
        block = basis.values if alpha == zero else basis.deriv(alpha)
        local += coef[:, None] * block
    frozen = term.value(pts, u, u_derivs).astype(float, copy=True)
    for alpha in term.orders:
        w = term.partials[alpha](pts, u, u_derivs)
        local += np.asarray(w)[:, None] * basis.deriv(alpha)
        frozen -= w * u_derivs[alpha]
    rhs = problem.source(pts) - frozen
    return RowBlock(
        kind="pde",
        width=indexing.width,
        n_rows=n,
        rhs=rhs,
        pieces=[_Piece(0, indexing.col_offset(subdomain_id), local)],
        meta={"subdomain": subdomain_id},
    )


def assemble_newton_rows(
    problem: ProblemSpec,
    indexing: GlobalIndexing,
    subdomain_id: int,
    points: PointSet | Array,
    basis: BasisEval,
    u: Array,
    u_derivs: Mapping[MultiIndex, Array],
) -> RowBlock:
    """Newton-linearized operator rows around the current iterate.

    Rows are the Jacobian of the residual in the coefficients: linear terms
    plus each nonlinear partial times the matching basis derivative block.
    The system is posed directly for the updated coefficients (the
    correction form J d = -R is algebraically the same but lets null-space
    junk pile up in the iterate under a truncated solve), so the right-hand
    side is the source minus the term's value plus the partials recombined
    with the current iterate: for quadratic advection this is the classic
    f + u u_x form.
    """
    term = problem.nonlinear
    if term is None:
        raise ValueError("newton rows need a problem with a nonlinear term")
    pts = points.points if isinstance(points, PointSet) else np.atleast_2d(points)
    n = pts.shape[0]
    zero = (0,) * problem.dim
    local = np.zeros((n, basis.num_basis))
    for alpha, coef in problem.residual_weights(pts, u, u_derivs).items():
        block = basis.values if alpha == zero else basis.deriv(alpha)
        local += np.asarray(coef)[:, None] * block
    rhs = problem.source(pts) - term.value(pts, u, u_derivs)
    for alpha, partial in term.partials.items():
        slot = u if sum(alpha) == 0 else u_derivs[alpha]
        rhs += partial(pts, u, u_derivs) * slot
    return RowBlock(
        kind="pde",
        width=indexing.width,
        n_rows=n,
        rhs=rhs,
        pieces=[_Piece(0, indexing.col_offset(subdomain_id), local)],
        meta={"subdomain": subdomain_id},
    )


def assemble_boundary_rows(
    problem: ProblemSpec,
    indexing: GlobalIndexing,
    points: PointSet,
    basis_values: Array,
) -> RowBlock:
    """Boundary/initial-data rows: owner's basis values against g (or h).

    ``basis_values[i]`` must hold the owning subdomain's basis evaluated at
    point i; the owner ids come from the point set itself.
    """
    if points.owners is None:
        raise ValueError("boundary points need owner tags")
    pts = points.points
    n = pts.shape[0]
    rhs = problem.boundary(pts).astype(float, copy=True)
    if points.initial_mask is not None and points.initial_mask.any():
        if problem.initial is None:
            raise ValueError("points are flagged initial but the problem has no initial data")
        rhs[points.initial_mask] = problem.initial(pts[points.initial_mask])

    pieces = []
    start = 0
    while start < n:
        stop = start
        owner = int(points.owners[start])
        while stop < n and int(points.owners[stop]) == owner:
            stop += 1
        pieces.append(_Piece(start, indexing.col_offset(owner), basis_values[start:stop]))
        start = stop
    return RowBlock(
        kind="boundary",
        width=indexing.width,
        n_rows=n,
        rhs=rhs,
        pieces=pieces,
        meta={},
    )


def assemble_continuity_rows(
    interface: InterfaceSpec,
    indexing: GlobalIndexing,
    points: PointSet | Array,
    basis_left: BasisEval,
    basis_right: BasisEval,
) -> RowBlock:
    """Smoothness rows across one interface, orders 0..continuity_order.

    Derivatives are taken along the interface normal; each row matches
    +left block against -right block at one point, right-hand side zero.
    """
    pts = points.points if isinstance(points, PointSet) else np.atleast_2d(points)
    n = pts.shape[0]
    dim = len(interface.facet_bounds)
    orders = interface.continuity_order + 1
    pieces = []
    for order in range(orders):
        alpha = tuple(order if s == interface.axis else 0 for s in range(dim))
        left = basis_left.values if order == 0 else basis_left.deriv(alpha)
        right = basis_right.values if order == 0 else basis_right.deriv(alpha)
        pieces.append(_Piece(order * n, indexing.col_offset(interface.left), left.copy()))
        pieces.append(_Piece(order * n, indexing.col_offset(interface.right), -right))
    return RowBlock(
        kind="continuity",
        width=indexing.width,
        n_rows=orders * n,
        rhs=np.zeros(orders * n),
        pieces=pieces,
        meta={"interface": (interface.left, interface.right, interface.axis)},
    )


@dataclass
class GlobalSystem:
    """Assembled rectangular system with its block bookkeeping.

    ``block_slices`` gives each input RowBlock's row range in assembly
    order, so drivers can refresh right-hand sides or inspect per-block
    residuals without reassembling.
    """

    matrix: Array
    rhs: Array
    indexing: GlobalIndexing
    block_slices: list[slice]
    block_kinds: list[str]

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    def rows_of_kind(self, kind: str) -> Array:
        mask = np.zeros(self.matrix.shape[0], dtype=bool)
        for sl, k in zip(self.block_slices, self.block_kinds):
            if k == kind:
                mask[sl] = True
        return mask


_KIND_ORDER = {"pde": 0, "boundary": 1, "continuity": 2}


def assemble_global(blocks: Sequence[RowBlock], indexing: GlobalIndexing) -> GlobalSystem:
    """Stack row blocks into one dense system, PDE, boundary, continuity.

    Within each kind the input order is preserved.  Returns the row range
    of every input block (in the input's order) alongside the matrix.
    """
    if not blocks:
        raise ValueError("cannot assemble an empty system")
    for block in blocks:
        if block.width != indexing.width:
            raise ValueError(
                f"row block width {block.width} does not match the global width {indexing.width}"
            )
        if block.kind not in _KIND_ORDER:
            raise ValueError(f"unknown row-block kind {block.kind!r}")

    order = sorted(range(len(blocks)), key=lambda i: (_KIND_ORDER[blocks[i].kind], i))
    total_rows = sum(b.n_rows for b in blocks)
    matrix = np.zeros((total_rows, indexing.width))
    rhs = np.empty(total_rows)
    block_slices: list[slice] = [slice(0, 0)] * len(blocks)
    row = 0
    for i in order:
        block = blocks[i]
        block_slices[i] = slice(row, row + block.n_rows)
        rhs[row : row + block.n_rows] = block.rhs
        for piece in block.pieces:
            r, c = piece.values.shape
            matrix[
                row + piece.row_start : row + piece.row_start + r,
                piece.col_start : piece.col_start + c,
            ] = piece.values
        row += block.n_rows
    return GlobalSystem(
        matrix=matrix,
        rhs=rhs,
        indexing=indexing,
        block_slices=block_slices,
        block_kinds=[b.kind for b in blocks],
    )


def equilibrate_rows(system: GlobalSystem) -> GlobalSystem:
    """Scale each row (and its right-hand side) to unit 2-norm.

    Off by default; changes the least-squares weighting, kept only as an
    experimentation flag for badly scaled operators.
    """
    norms = np.linalg.norm(system.matrix, axis=1)
    scale = np.where(norms > 0, 1.0 / np.where(norms > 0, norms, 1.0), 1.0)
    return GlobalSystem(
        matrix=system.matrix * scale[:, None],
        rhs=system.rhs * scale,
        indexing=system.indexing,
        block_slices=system.block_slices,
        block_kinds=system.block_kinds,
    )


class CachedLstsq:
    """Minimum-norm least squares with a reusable truncated SVD.

    Fixed-point drivers re-solve the same matrix against many right-hand
    sides; factoring once makes each re-solve a pair of matrix-vector
    products.
    """

    def __init__(self, matrix: Array, rcond: float = RCOND):
        if not np.isfinite(matrix).all():
            raise ValueError("system matrix has non-finite entries")
        u, s, vt = np.linalg.svd(matrix, full_matrices=False)
        keep = s > rcond * s[0] if s.size else np.zeros(0, dtype=bool)
        self._u = u[:, keep]
        self._inv_s = 1.0 / s[keep]
        self._vt = vt[keep]
        self.rank = int(keep.sum())

    def solve(self, rhs: Array) -> Array:
        return self._vt.T @ (self._inv_s * (self._u.T @ rhs))


def solve_least_squares(
    system: GlobalSystem, rcond: float = RCOND
) -> tuple[CoefficientVector, float]:
    """Minimum-norm least-squares solution and its residual 2-norm.

    Always the same truncated-SVD path as `CachedLstsq`, so repeated solves
    of identical matrices return identical coefficients (mixing SVD
    implementations picks different near-cutoff subspaces, which shows up
    as noise on the reconstructed solution).
    """
    if not np.isfinite(system.rhs).all():
        raise ValueError("system has non-finite entries")
    beta = CachedLstsq(system.matrix, rcond).solve(system.rhs)
    residual = float(np.linalg.norm(system.matrix @ beta - system.rhs))
    return CoefficientVector(values=beta, block_size=system.indexing.block_size), residual


def dump_system(system: GlobalSystem, path) -> None:
    """Write (matrix, rhs) to ``.npz`` (binary) or ``.csv`` by extension."""
    path = str(path)
    if path.endswith(".npz"):
        np.savez_compressed(path, matrix=system.matrix, rhs=system.rhs)
    elif path.endswith(".csv"):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            ncols = system.matrix.shape[1]
            writer.writerow([f"a{j}" for j in range(ncols)] + ["rhs"])
            for row, b in zip(system.matrix, system.rhs):
                writer.writerow([f"{v:.16e}" for v in row] + [f"{b:.16e}"])
    else:
        raise ValueError("system dumps support .npz or .csv paths")
