"""Run each demo application under a communicator group and build its report.

Every runner takes a plain parameter dict (the CLI flags), validates it
before any rank starts, and returns a :class:`RunReport`.  Per-rank wall
time covers the whole rank entry, including communication.
"""
from __future__ import annotations

import time

import numpy as np

from .apps import dmc, idealpoint, parabola, poisson, sleep
from .comm import CommGroup, spawn_group
from .partition import simple_partitioning
from .population import parallel_time_integration
from .report import RunReport
from .taskmap import parallel_solve_problem

APPS = ("parabola", "idealpoint", "dmc", "poisson", "sleep")

DEFAULTS = {
    "parabola": {"m": 100, "n": 50, "L": 10.0},
    "idealpoint": {"legislators": 50, "votes": 200, "dims": 1, "iters": 2000, "burnin": 500,
                   "thin": 1, "chains": 4, "data": None},
    "dmc": {"walkers": 1000, "steps": 200, "tau": 0.01, "D": 1.0, "burnin": None,
            "timing": "wall"},
    "poisson": {"nx": 63, "ny": None, "overlap": 4, "threshold": 1e-10, "max_iter": 1000,
                "inner_tol": 1e-10},
    "sleep": {"tasks": 1000, "task_ms": 10.0},
}


def _timed(fn):
    def entry(comm):
        t0 = time.perf_counter()
        out = fn(comm)
        return out, time.perf_counter() - t0
    return entry


def _launch(fn, procs, backend, seed, timeout):
    results = spawn_group(procs, _timed(fn), CommGroup(procs, backend, seed, timeout))
    return results[0][0], [float(t) for _, t in results]


def _task_counts(ntasks, procs):
    return simple_partitioning(ntasks, procs)


# ---------------------------------------------------------------------------

def _parabola(p, procs, backend, seed, timeout):
    cfg = parabola.ParabolaConfig(m=int(p["m"]), n=int(p["n"]), L=float(p["L"]))

    def fn(comm):
        prob = parabola.ParabolaProblem(cfg)
        return parallel_solve_problem(prob.hooks(), comm)

    ab, wall = _launch(fn, procs, backend, seed, timeout)
    ntasks = cfg.m * cfg.m
    results = {"tasks": ntasks, "selected": len(ab), "ab": [list(pair) for pair in ab]}
    return results, wall, _task_counts(ntasks, procs)


def _idealpoint(p, procs, backend, seed, timeout):
    cfg = idealpoint.GibbsConfig(iterations=int(p["iters"]), burn_in=int(p["burnin"]),
                                 thin=int(p["thin"]), seed=seed, ndim=int(p["dims"]))
    nchains = int(p["chains"])
    if nchains < 1:
        raise ValueError("chains must be positive")
    if p.get("data"):
        data, truth = idealpoint.read_rollcall_csv(p["data"]), None
    else:
        data, truth = idealpoint.generate_synthetic(int(p["legislators"]), int(p["votes"]),
                                                    int(p["dims"]), seed)

    summaries, wall = _launch(lambda comm: idealpoint.run_multichain(data, cfg, comm, nchains),
                              procs, backend, seed, timeout)
    results = {"chains": [idealpoint.summary_to_json(s) for s in summaries]}
    if truth is not None and cfg.ndim == 1:
        from scipy.stats import spearmanr
        results["spearman_vs_truth"] = [
            float(spearmanr(idealpoint.align_sign(s["x_mean"], truth["x"])[:, 0],
                            truth["x"][:, 0]).correlation)
            for s in summaries]
    return results, wall, _task_counts(nchains, procs)


def _dmc(p, procs, backend, seed, timeout):
    steps = int(p["steps"])
    burnin = int(p["burnin"]) if p.get("burnin") is not None else steps // 5
    if not 0 <= burnin < steps:
        raise ValueError("burnin must satisfy 0 <= burnin < steps")
    cfg = dmc.DMCConfig(nwalkers=int(p["walkers"]), stepsize=float(p["tau"]), timesteps=steps,
                        D=float(p["D"]), burn_in_fraction=burnin / steps, seed=seed)
    timing = p.get("timing", "wall")

    def fn(comm):
        counts = []
        merged = parallel_time_integration(
            lambda rank, size: dmc.dmc_initialize(rank, size, cfg),
            finalize=dmc.merge_traces, comm=comm, timing=timing,
            on_step=lambda step, c: counts.append(c.tolist()) if comm.rank == 0 else None)
        return (merged, counts) if comm.rank == 0 else None

    (trace, counts), wall = _launch(fn, procs, backend, seed, timeout)
    results = {"initial_counts": simple_partitioning(cfg.nwalkers, procs),
               "final_population": trace[-1].size,
               "clamp_events": int(sum(o.clamped for o in trace)),
               "burnin": burnin}
    nblocks = min(20, steps - burnin)
    if nblocks >= 2:
        est, err = dmc.dmc_energy_estimate(trace, burnin, nblocks)
        results.update(energy=est, stderr=err)
    results["trace"] = {"population": [o.size for o in trace],
                        "meanV": [o.mean_v for o in trace],
                        "E_T": [o.e_trial for o in trace]}
    return results, wall, counts


def _poisson(p, procs, backend, seed, timeout):
    nx = int(p["nx"])
    ny = int(p["ny"]) if p.get("ny") is not None else None
    # fail fast on bad geometry, before any rank starts
    poisson.build_layouts(nx, procs, int(p["overlap"]))
    if not float(p["threshold"]) >= 0 or int(p["max_iter"]) < 1:
        raise ValueError("threshold must be >= 0 and max_iter >= 1")

    def fn(comm):
        return poisson.run_poisson_demo(nx, comm, ny=ny, overlap=int(p["overlap"]),
                                        threshold=float(p["threshold"]),
                                        max_iter=int(p["max_iter"]),
                                        inner_tol=float(p["inner_tol"]))

    (rep, field), wall = _launch(fn, procs, backend, seed, timeout)
    rep = dict(rep)
    rep["field"] = field
    return rep, wall, None


def _sleep(p, procs, backend, seed, timeout):
    ntasks = int(p["tasks"])
    seconds = float(p["task_ms"]) / 1000.0
    if ntasks < 1 or seconds < 0:
        raise ValueError("tasks must be positive and task_ms non-negative")
    hooks = sleep.sleep_hooks(ntasks, seconds)
    results, wall = _launch(lambda comm: parallel_solve_problem(hooks, comm),
                            procs, backend, seed, timeout)
    return results, wall, _task_counts(ntasks, procs)


_RUNNERS = {"parabola": _parabola, "idealpoint": _idealpoint, "dmc": _dmc,
            "poisson": _poisson, "sleep": _sleep}


def app_params(app: str, **overrides) -> dict:
    if app not in _RUNNERS:
        raise ValueError(f"unknown app {app!r}; expected one of {APPS}")
    params = dict(DEFAULTS[app])
    unknown = set(overrides) - set(params)
    if unknown:
        raise ValueError(f"unknown parameters for {app}: {sorted(unknown)}")
    params.update(overrides)
    return params


def validate(app: str, params: dict, procs: int) -> None:
    """Raise ``ValueError`` for parameters an app would reject, without running it."""
    p = app_params(app, **params)
    if procs < 1:
        raise ValueError("procs must be positive")
    if app == "parabola":
        parabola.ParabolaConfig(m=int(p["m"]), n=int(p["n"]), L=float(p["L"]))
    elif app == "idealpoint":
        idealpoint.GibbsConfig(iterations=int(p["iters"]), burn_in=int(p["burnin"]),
                               thin=int(p["thin"]), ndim=int(p["dims"]))
        if int(p["chains"]) < 1:
            raise ValueError("chains must be positive")
        if p.get("data"):
            idealpoint.read_rollcall_csv(p["data"])
        elif int(p["legislators"]) < 2 or int(p["votes"]) < 2:
            raise ValueError("need at least 2 legislators and 2 votes")
    elif app == "dmc":
        steps = int(p["steps"])
        burnin = int(p["burnin"]) if p.get("burnin") is not None else steps // 5
        if not 0 <= burnin < steps:
            raise ValueError("burnin must satisfy 0 <= burnin < steps")
        dmc.DMCConfig(nwalkers=int(p["walkers"]), stepsize=float(p["tau"]), timesteps=steps,
                      D=float(p["D"]))
        if int(p["walkers"]) < procs:
            raise ValueError(f"{p['walkers']} walkers cannot fill {procs} ranks")
    elif app == "poisson":
        poisson.Grid2D(int(p["nx"]), int(p["ny"]) if p.get("ny") is not None else int(p["nx"]))
        poisson.build_layouts(int(p["nx"]), procs, int(p["overlap"]))
        if not float(p["threshold"]) >= 0 or int(p["max_iter"]) < 1:
            raise ValueError("threshold must be >= 0 and max_iter >= 1")
        if not float(p["inner_tol"]) > 0:
            raise ValueError("inner_tol must be positive")
    elif app == "sleep":
        if int(p["tasks"]) < 1 or float(p["task_ms"]) < 0:
            raise ValueError("tasks must be positive and task_ms non-negative")


def run_app(app: str, params: dict | None = None, procs: int = 1, backend: str = "threads",
            seed: int = 0, timeout: float = 30.0) -> RunReport:
    """Run ``app`` on ``procs`` ranks and return its report (no speedup yet)."""
    params = app_params(app, **(params or {}))
    validate(app, params, procs)
    CommGroup(procs, backend, seed, timeout)  # validates backend
    results, wall, counts = _RUNNERS[app](params, procs, backend, seed, timeout)
    return RunReport(app=app, ranks=procs, backend=backend, seed=seed, wall_time=wall,
                     results=results, params=params, counts=counts)


def strip_large(results: dict) -> dict:
    """Copy of ``results`` without bulky arrays, for console output."""
    return {k: v for k, v in results.items() if k not in ("trace", "field", "ab")
            and not isinstance(v, np.ndarray)}
