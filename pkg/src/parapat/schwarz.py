"""Additive Schwarz iteration over overlapping subdomains, one per rank."""
from __future__ import annotations

import dataclasses
import logging
from typing import Callable, Protocol

import numpy as np

log = logging.getLogger(__name__)


class DivergenceError(RuntimeError):
    pass


@dataclasses.dataclass(frozen=True)
class ConvergenceParams:
    max_iter: int = 100
    threshold: float = 1e-3

    def __post_init__(self):
        if self.max_iter < 0:
            raise ValueError("max_iter must be >= 0")
        if not self.threshold > 0:
            raise ValueError("threshold must be positive")


class SubdomainProblem(Protocol):
    """Hooks for one subdomain.

    ``subdomain_solve()`` returns the new local field (anything with ``copy``,
    subtraction and :func:`numpy.vdot` support), ``set_BC(field)`` installs
    the internal boundary data before the solve and ``communicate(field)``
    refreshes the overlap/halo cells from the neighbours in place.
    """

    def subdomain_solve(self): ...
    def set_BC(self, solution) -> None: ...
    def communicate(self, solution) -> None: ...


def relative_change(solution, previous) -> float:
    """``<d,d>/<u,u>`` with ``d = u - previous``; 0/0 gives 0 and x/0 gives inf."""
    diff = np.asarray(solution - previous)
    num = float(np.vdot(diff, diff).real)
    den = float(np.vdot(solution, solution).real)
    if den == 0.0:
        if num == 0.0:
            log.debug("zero field with zero change; treating as converged")
            return 0.0
        log.debug("zero field with nonzero change; treating as not converged")
        return float("inf")
    return num / den


def simple_convergence_test(solution, previous, threshold: float, comm) -> bool:
    """True when the largest relative change over all ranks is below threshold.

    Collective; every rank gets the same answer.
    """
    return comm.all_reduce_max(relative_change(solution, previous)) < threshold


@dataclasses.dataclass
class SchwarzResult:
    solution: object
    iterations: int
    converged: bool
    rel_change: float


def additive_schwarz_iterations(problem: SubdomainProblem, params: ConvergenceParams,
                                solution, comm,
                                convergence_test: Callable | None = None) -> SchwarzResult:
    """Iterate snapshot -> set_BC -> solve -> communicate -> test.

    Stops when the convergence test passes or after ``params.max_iter``
    iterations. The default test is :func:`simple_convergence_test`; a custom
    one is called as ``convergence_test(solution, previous, threshold, comm)``
    and returns a bool that must agree across ranks.
    """
    iterations = 0
    converged = False
    rel = float("nan")
    while not converged and iterations < params.max_iter:
        iterations += 1
        previous = solution.copy()
        problem.set_BC(solution)
        solution = problem.subdomain_solve()
        problem.communicate(solution)
        if not np.all(np.isfinite(solution)):
            raise DivergenceError(f"non-finite values in the iterate at Schwarz iteration {iterations}")
        if convergence_test is None:
            rel = comm.all_reduce_max(relative_change(solution, previous))
            converged = rel < params.threshold
        else:
            converged = bool(convergence_test(solution, previous, params.threshold, comm))
    return SchwarzResult(solution, iterations, converged, rel)
