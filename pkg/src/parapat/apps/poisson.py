"""-laplace(u) = f on the unit square with u = 0 on the boundary, by overlapping strips.

The ``nx`` interior columns are block-partitioned over the ranks.  Each strip
is extended into its neighbours so adjacent extended strips share
``overlap`` columns, and it stores one more column on each internal side
(the halo) that carries Dirichlet data owned by the neighbour.  After every
local solve, owners push their values for the neighbour's overlap and halo
columns, so the logical global iterate is the union of owned columns.

Manufactured solution: ``u = sin(pi x) sin(pi y)``, ``f = 2 pi^2 u``.
"""
from __future__ import annotations

import dataclasses

import numpy as np

from .. import kernels
from ..partition import partition_offsets
from ..schwarz import ConvergenceParams, additive_schwarz_iterations


class InnerSolveError(RuntimeError):
    pass


@dataclasses.dataclass(frozen=True)
class Grid2D:
    nx: int
    ny: int

    def __post_init__(self):
        if self.nx < 3 or self.ny < 3:
            raise ValueError(f"grid needs at least 3 interior points per axis, got {self.nx}x{self.ny}")

    @property
    def hx(self) -> float:
        return 1.0 / (self.nx + 1)

    @property
    def hy(self) -> float:
        return 1.0 / (self.ny + 1)

    def coords(self):
        """Interior node coordinates as ``(Y, X)`` arrays of shape ``(ny, nx)``."""
        x = np.arange(1, self.nx + 1) * self.hx
        y = np.arange(1, self.ny + 1) * self.hy
        return np.meshgrid(y, x, indexing="ij")


def exact_solution(x, y):
    return np.sin(np.pi * x) * np.sin(np.pi * y)


def source_term(x, y):
    return 2.0 * np.pi**2 * np.sin(np.pi * x) * np.sin(np.pi * y)


@dataclasses.dataclass(frozen=True)
class SubdomainLayout:
    """Column bookkeeping for one strip (global interior column indices)."""

    rank: int
    size: int
    nx: int
    own_lo: int
    own_hi: int
    ext_lo: int
    ext_hi: int
    left: int | None
    right: int | None
    grow_left: int
    grow_right: int

    @property
    def first_col(self) -> int:
        """Global interior index of local column 0 (a halo or the physical boundary)."""
        return self.ext_lo - 1

    @property
    def width(self) -> int:
        return self.ext_hi - self.ext_lo

    def local(self, global_col: int) -> int:
        return global_col - self.first_col

    @property
    def halo_columns(self) -> list[int]:
        """Local indices of the Dirichlet columns that neighbours own."""
        cols = []
        if self.left is not None:
            cols.append(0)
        if self.right is not None:
            cols.append(self.width + 1)
        return cols


def build_layouts(nx: int, nprocs: int, overlap: int = 4) -> list[SubdomainLayout]:
    """Strip layouts for every rank.

    Strip ``s`` extends ``overlap // 2`` columns to the left and
    ``overlap - overlap // 2`` to the right, so each pair of neighbours
    shares exactly ``overlap`` columns.
    """
    if nprocs > 1 and overlap < 2:
        raise ValueError("adjacent strips must overlap by at least 2 columns")
    offsets = partition_offsets(nx, nprocs)
    widths = [offsets[r + 1] - offsets[r] for r in range(nprocs)]
    if min(widths) < 1:
        raise ValueError(f"{nprocs} strips do not fit in {nx} columns")
    grow_left, grow_right = overlap // 2, overlap - overlap // 2
    layouts = []
    for r in range(nprocs):
        left = r - 1 if r > 0 else None
        right = r + 1 if r < nprocs - 1 else None
        ext_lo = offsets[r] - (grow_left if left is not None else 0)
        ext_hi = offsets[r + 1] + (grow_right if right is not None else 0)
        # the halo column must belong to the direct neighbour
        if left is not None and grow_left + 1 > widths[r - 1]:
            raise ValueError(f"overlap {overlap} too wide for strip {r - 1} ({widths[r - 1]} columns)")
        if right is not None and grow_right + 1 > widths[r + 1]:
            raise ValueError(f"overlap {overlap} too wide for strip {r + 1} ({widths[r + 1]} columns)")
        layouts.append(SubdomainLayout(r, nprocs, nx, offsets[r], offsets[r + 1], ext_lo, ext_hi,
                                       left, right, grow_left, grow_right))
    return layouts


def _needed_from(layout_of_neighbour: SubdomainLayout, owner: SubdomainLayout) -> range:
    """Global columns the neighbour stores that ``owner`` owns (overlap + halo)."""
    lo = max(owner.own_lo, layout_of_neighbour.first_col)
    hi = min(owner.own_hi, layout_of_neighbour.ext_hi + 1)
    return range(lo, hi)


def halo_communicate(field: np.ndarray, layout: SubdomainLayout, layouts, comm) -> None:
    """Overwrite this rank's overlap and halo columns with the owners' values.

    Sends go out first (the transports buffer them), then receives.
    """
    neighbours = [n for n in (layout.left, layout.right) if n is not None]
    for n in neighbours:
        cols = _needed_from(layouts[n], layout)
        block = field[:, layout.local(cols.start):layout.local(cols.stop)]
        comm.send(np.ascontiguousarray(block), n)
    for n in neighbours:
        cols = _needed_from(layout, layouts[n])
        field[:, layout.local(cols.start):layout.local(cols.stop)] = comm.recv(n)


class PoissonSubdomain:
    """Local state and hooks for one strip under the Schwarz driver."""

    def __init__(self, grid: Grid2D, layouts, comm, tol: float = 1e-10, max_sweeps: int | None = None,
                 gs=None):
        self.grid = grid
        self.layouts = layouts
        self.layout = layouts[comm.rank]
        self.comm = comm
        self.tol = tol
        lay = self.layout
        ncols = lay.width + 2
        self.u = np.zeros((grid.ny + 2, ncols))
        self.f = np.zeros_like(self.u)
        x = (lay.first_col + 1 + np.arange(ncols)) * grid.hx
        y = np.arange(grid.ny + 2) * grid.hy
        Y, X = np.meshgrid(y, x, indexing="ij")
        self.f[1:-1, 1:-1] = source_term(X, Y)[1:-1, 1:-1]
        self.cx = 1.0 / grid.hx**2
        self.cy = 1.0 / grid.hy**2
        self.max_sweeps = max_sweeps if max_sweeps is not None else 10 * grid.ny * lay.width
        self.fixed = np.zeros(self.u.shape, dtype=bool)
        self.last_sweeps = 0
        self.total_sweeps = 0
        self._gs = gs or kernels.rb_gauss_seidel

    def set_BC(self, solution) -> None:
        """Freeze halo columns as Dirichlet data for the next solve."""
        if solution is not self.u:
            self.u[...] = solution
        self.fixed[...] = False
        self.fixed[:, self.layout.halo_columns] = True

    def subdomain_solve(self) -> np.ndarray:
        sweeps, res = self._gs(self.u, self.f, self.cx, self.cy, self.tol, self.max_sweeps)
        self.last_sweeps = int(sweeps)
        self.total_sweeps += int(sweeps)
        if res >= self.tol:
            raise InnerSolveError(f"rank {self.comm.rank}: Gauss-Seidel stopped after {sweeps} "
                                  f"sweeps with residual {res:.3e} (tolerance {self.tol:.1e})")
        return self.u

    def communicate(self, solution) -> None:
        halo_communicate(solution, self.layout, self.layouts, self.comm)

    def owned_block(self) -> np.ndarray:
        lay = self.layout
        return self.u[1:-1, lay.local(lay.own_lo):lay.local(lay.own_hi)].copy()


def set_internal_BC(sub: PoissonSubdomain) -> np.ndarray:
    sub.set_BC(sub.u)
    return sub.fixed


def global_residual_norm(u_interior: np.ndarray, grid: Grid2D) -> float:
    u = np.zeros((grid.ny + 2, grid.nx + 2))
    u[1:-1, 1:-1] = u_interior
    Y, X = grid.coords()
    f = np.zeros_like(u)
    f[1:-1, 1:-1] = source_term(X, Y)
    return kernels.residual_norm_numpy(u, f, 1.0 / grid.hx**2, 1.0 / grid.hy**2)


def run_poisson_demo(nx: int, comm, ny: int | None = None, overlap: int = 4,
                     threshold: float = 1e-10, max_iter: int = 1000, inner_tol: float = 1e-10):
    """Solve the model problem on ``comm``; rank 0 returns the report and field.

    Returns ``(report, field)`` on rank 0 and ``(None, None)`` elsewhere.
    ``field`` is the assembled ``(ny, nx)`` interior solution.
    """
    grid = Grid2D(nx, ny if ny is not None else nx)
    layouts = build_layouts(nx, comm.size, overlap)
    sub = PoissonSubdomain(grid, layouts, comm, tol=inner_tol)
    result = additive_schwarz_iterations(sub, ConvergenceParams(max_iter, threshold),
                                         sub.u, comm)
    blocks = comm.gather(sub.owned_block(), 0)
    sweeps = comm.gather(sub.total_sweeps, 0)
    if comm.rank != 0:
        return None, None
    field = np.concatenate(blocks, axis=1)
    Y, X = grid.coords()
    report = {
        "iterations": result.iterations,
        "converged": result.converged,
        "rel_change": result.rel_change,
        "max_error": float(np.max(np.abs(field - exact_solution(X, Y)))),
        "residual": global_residual_norm(field, grid),
        "overlap": overlap,
        "ranks": comm.size,
        "nx": grid.nx,
        "ny": grid.ny,
        "inner_sweeps": sweeps,
    }
    return report, field


def write_field_csv(path, field: np.ndarray) -> None:
    np.savetxt(path, field, delimiter=",", fmt="%.17g")
