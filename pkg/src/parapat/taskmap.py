"""Serial and parallel drivers for initialize -> map(task) -> finalize problems."""
from __future__ import annotations

import dataclasses
from typing import Any, Callable, Sequence

from .partition import (
    collect_subproblem_output_args,
    get_subproblem_input_args,
    simple_partitioning,
)

TaskInput = tuple[tuple, dict]


class TaskError(RuntimeError):
    """A task raised; ``index`` is its position in the initialize() list."""

    def __init__(self, index: int, cause: BaseException):
        super().__init__(f"task {index} failed: {type(cause).__name__}: {cause}")
        self.index = index


@dataclasses.dataclass
class ProblemHooks:
    """The three user functions that define a task-farm problem.

    ``initialize()`` returns a list of ``(args, kwargs)`` pairs, ``task`` is
    called as ``task(*args, **kwargs)`` for each of them, and ``finalize``
    receives the outputs in input order.  ``task`` must not depend on other
    tasks, and ``initialize`` must be deterministic because every rank calls
    it.
    """

    initialize: Callable[[], Sequence[TaskInput]]
    task: Callable[..., Any]
    finalize: Callable[[list], Any]


def run_tasks(task, inputs, start_index: int = 0) -> list:
    outputs = []
    for i, (args, kwargs) in enumerate(inputs):
        try:
            outputs.append(task(*args, **kwargs))
        except Exception as exc:
            raise TaskError(start_index + i, exc) from exc
    return outputs


def solve_problem(hooks: ProblemHooks):
    """Run all tasks in order on the calling thread; returns finalize's value."""
    inputs = hooks.initialize()
    return hooks.finalize(run_tasks(hooks.task, inputs))


def parallel_solve_problem(hooks: ProblemHooks, comm):
    """Block-partition the task list over ``comm`` and finalize on rank 0.

    Rank 0 returns finalize's value; the other ranks return ``None`` and do
    no finalize work.  The outputs seen by finalize are identical, in content
    and order, to those of :func:`solve_problem`.
    """
    inputs = hooks.initialize()
    mine = get_subproblem_input_args(inputs, comm.rank, comm.size)
    offset = sum(simple_partitioning(len(inputs), comm.size)[:comm.rank])
    outputs = collect_subproblem_output_args(run_tasks(hooks.task, mine, offset), comm)
    if comm.rank == 0:
        return hooks.finalize(outputs)
    return None
