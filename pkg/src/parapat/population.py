"""Time-stepped population Monte Carlo with dynamic load balancing.

The drivers here know nothing about the physics.  A population is any object
implementing :class:`PopulationInterface`; walkers migrate between ranks as
opaque slices produced by ``cut_slice`` and consumed by ``paste_slice``.
"""
from __future__ import annotations

import time
from typing import Any, Protocol, runtime_checkable

import numpy as np

from .partition import collect_subproblem_output_args


class ExtinctionError(RuntimeError):
    """The (global) population died out."""


class RedistributionError(RuntimeError):
    pass


@runtime_checkable
class PopulationInterface(Protocol):
    """Operations the drivers need from a walker population.

    ``append(i, n)`` inserts ``n`` copies of walker ``i`` directly after it.
    Populations may additionally provide ``apply_markers(markers)`` which
    performs the whole delete/clone pass at once with the same result.
    """

    threshold_factor: float

    def move(self) -> None: ...
    def get_marker(self, i: int) -> int: ...
    def append(self, i: int, nchilds: int) -> None: ...
    def delete(self, i: int) -> None: ...
    def sample_observables(self) -> Any: ...
    def finalize_timestep(self, old_size: int, new_size: int) -> None: ...
    def __len__(self) -> int: ...
    def cut_slice(self, k: int) -> Any: ...
    def paste_slice(self, piece: Any) -> None: ...


def do_timestep(pop, allow_empty: bool = False):
    """Move, then delete/clone walkers according to their markers.

    A walker with marker 0 is removed and one with marker ``n >= 2`` gets
    ``n - 1`` clones placed right after it, so the new size is the sum of the
    markers.  Returns ``pop.sample_observables()``.

    ``allow_empty`` is used by the parallel driver, where a single rank may
    legitimately hold no walkers; extinction is then checked globally.
    """
    if len(pop) == 0 and not allow_empty:
        raise ExtinctionError("do_timestep called on an empty population")
    pop.move()
    n = len(pop)
    markers = np.fromiter((pop.get_marker(i) for i in range(n)), dtype=np.int64, count=n)
    if np.any(markers < 0):
        raise ValueError("negative walker marker")
    if hasattr(pop, "apply_markers"):
        pop.apply_markers(markers)
    else:
        # back to front so pending indices stay valid
        for i in range(n - 1, -1, -1):
            m = int(markers[i])
            if m == 0:
                pop.delete(i)
            elif m > 1:
                pop.append(i, m - 1)
    if len(pop) == 0 and not allow_empty:
        raise ExtinctionError("population died out (all markers were 0)")
    return pop.sample_observables()


def time_integration(initialize, do_timestep=do_timestep, finalize=None):
    """Serial driver. ``initialize()`` returns ``(population, timesteps)``.

    Returns finalize's value (or the trace when ``finalize`` is None).
    """
    pop, timesteps = initialize()
    trace = []
    for _ in range(timesteps):
        old_size = len(pop)
        trace.append(do_timestep(pop))
        pop.finalize_timestep(old_size, len(pop))
    return finalize(trace) if finalize is not None else trace


def imbalance_rate(counts) -> float:
    """``max(counts) / max(1, min(counts))``; 1.0 means perfectly balanced.

    An all-empty workload counts as balanced.
    """
    counts = np.asarray(counts)
    if counts.size == 0:
        raise ValueError("imbalance_rate of an empty workload vector")
    if counts.max() == 0:
        return 1.0
    return float(counts.max()) / float(max(1, counts.min()))


def find_optimal_workload(timings, current) -> np.ndarray:
    """Target walker counts proportional to each rank's speed ``1/t_i``.

    ``C = total / sum(1/t_i)`` and the real-valued target is ``C / t_i``.
    Targets are floored and the shortfall handed out one walker at a time in
    order of decreasing fractional remainder (ties go to the lower rank), so
    the result always sums to ``sum(current)``.
    """
    t = np.asarray(timings, dtype=float)
    current = np.asarray(current, dtype=np.int64)
    if t.shape != current.shape:
        raise ValueError("timings and current workload differ in length")
    if not np.all(np.isfinite(t)) or np.any(t <= 0):
        raise ValueError(f"timings must be positive and finite, got {t.tolist()}")
    total = int(current.sum())
    c = total / np.sum(1.0 / t)
    raw = c / t
    work = np.floor(raw).astype(np.int64)
    shortfall = total - int(work.sum())
    if shortfall < 0:
        raise RedistributionError("floored targets exceed the total workload")
    if shortfall:
        remainders = raw - work
        order = np.lexsort((np.arange(len(t)), -remainders))
        work[order[:shortfall]] += 1
    return work


def plan_transfers(current, target) -> list[tuple[int, int, int]]:
    """Migration plan ``[(source, dest, count), ...]`` turning current into target.

    Each step moves the whole surplus of the rank with the largest surplus to
    the rank with the largest deficit, which permanently settles the sender,
    so at most ``P - 1`` steps are needed.  Every rank computes the same plan.
    """
    diff = np.asarray(current, dtype=np.int64) - np.asarray(target, dtype=np.int64)
    if diff.sum() != 0:
        raise ValueError("current and target workloads have different totals")
    nranks = len(diff)
    plan = []
    while np.any(diff):
        if len(plan) >= nranks:
            raise RedistributionError(f"no convergence after {nranks} transfers: {diff.tolist()}")
        order = np.argsort(diff, kind="stable")
        src, dst = int(order[-1]), int(order[0])
        plan.append((src, dst, int(diff[src])))
        diff[dst] += diff[src]
        diff[src] = 0
    return plan


def redistribute_work(pop, current, target, comm):
    """Execute :func:`plan_transfers` with ``cut_slice`` / ``paste_slice``.

    The sender keeps its first ``target[src]`` walkers and ships the rest.
    Returns ``pop``.
    """
    for src, dst, _count in plan_transfers(current, target):
        if comm.rank == src:
            comm.send(pop.cut_slice(int(target[src])), dst)
        elif comm.rank == dst:
            pop.paste_slice(comm.recv(src))
    return pop


def dynamic_load_balancing(pop, task_time: float, comm) -> np.ndarray:
    """Rebalance when ``imbalance_rate`` exceeds ``pop.threshold_factor``.

    Collective.  Returns the per-rank counts gathered *before* any
    redistribution; their sum is the global size either way.
    """
    counts = np.array(comm.all_gather(len(pop)), dtype=np.int64)
    if imbalance_rate(counts) > pop.threshold_factor:
        timings = np.array(comm.all_gather(float(task_time)))
        target = find_optimal_workload(timings, counts)
        redistribute_work(pop, counts, target, comm)
    return counts


TIMING_MODES = ("wall", "uniform")


def parallel_time_integration(initialize, do_timestep=do_timestep, finalize=None, comm=None,
                              timing: str = "wall", on_step=None):
    """Parallel driver; ``initialize(rank, nprocs)`` returns ``(local pop, timesteps)``.

    Each step times ``do_timestep``, load-balances, and passes the global
    population size before and after to ``finalize_timestep``.  At the end
    the per-rank traces are collected on rank 0, which calls
    ``finalize(traces)`` with ``traces[r]`` being rank ``r``'s observation
    list, and returns its value.  Other ranks return ``None``.

    ``timing="uniform"`` reports the same task time on every rank, making the
    rebalancing targets (and hence the whole run) independent of machine
    noise.  ``on_step(step, counts)`` is called on every rank with the
    gathered per-rank counts.
    """
    if timing not in TIMING_MODES:
        raise ValueError(f"timing must be one of {TIMING_MODES}, got {timing!r}")
    pop, timesteps = initialize(comm.rank, comm.size)
    old_global = int(comm.all_reduce_sum(len(pop)))
    if old_global == 0:
        raise ExtinctionError("initial global population is empty")
    trace = []
    for step in range(timesteps):
        t0 = time.perf_counter()
        trace.append(do_timestep(pop, allow_empty=True))
        task_time = time.perf_counter() - t0 if timing == "wall" else 1.0
        counts = dynamic_load_balancing(pop, max(task_time, 1e-9), comm)
        new_global = int(counts.sum())
        if new_global == 0:
            raise ExtinctionError(f"global population died out at step {step}")
        pop.finalize_timestep(old_global, new_global)
        old_global = new_global
        if on_step is not None:
            on_step(step, counts)
    traces = collect_subproblem_output_args([trace], comm)
    if comm.rank == 0:
        return finalize(traces) if finalize is not None else traces
    return None
