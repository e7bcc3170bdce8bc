"""Diffusion Monte Carlo for non-interacting particles in a harmonic trap.

Walkers diffuse with Gaussian steps of variance ``2 D tau`` per coordinate and
branch with weight ``exp(-((V_old + V_new)/2 - E_T) tau)``.  With ``D = 1`` and
``V = r^2`` the Hamiltonian is ``-laplacian + r^2``; in three dimensions its
ground state energy is exactly 3.
"""
from __future__ import annotations

import dataclasses
import math

import numpy as np

from .. import kernels
from ..comm import codec
from ..partition import partition_offsets, simple_partitioning
from ..population import ExtinctionError

KAPPA = 0.1
MAX_BRANCH_WEIGHT = 10.0
THRESHOLD_FACTOR = 1.1


@dataclasses.dataclass(frozen=True)
class DMCConfig:
    nwalkers: int = 1000
    nspacedim: int = 3
    stepsize: float = 0.1
    timesteps: int = 200
    D: float = 1.0
    burn_in_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if min(self.nwalkers, self.nspacedim, self.timesteps) <= 0:
            raise ValueError("nwalkers, nspacedim and timesteps must be positive")
        if not (self.stepsize > 0 and self.D > 0):
            raise ValueError("stepsize and D must be positive")
        if not 0 <= self.burn_in_fraction < 1:
            raise ValueError("burn_in_fraction must be in [0, 1)")


@codec.register
@dataclasses.dataclass
class Observation:
    size: int
    mean_v: float
    e_trial: float
    clamped: int = 0


@codec.register
@dataclasses.dataclass
class MigrationSlice:
    positions: np.ndarray
    markers: np.ndarray


def harmonic_potential(positions: np.ndarray) -> np.ndarray:
    """Per-walker ``V = sum of squared coordinates``."""
    return np.sum(positions * positions, axis=1)


def branching_factor(v_old, v_new, e_trial, tau, u, max_weight=MAX_BRANCH_WEIGHT):
    """Replication count ``floor(w + u)`` with ``w`` the (clamped) branch weight.

    Scalars or arrays; ``u`` is a uniform draw in [0, 1).
    """
    markers, _ = kernels.branch_markers(np.atleast_1d(np.asarray(v_old, dtype=float)),
                                        np.atleast_1d(np.asarray(v_new, dtype=float)),
                                        float(e_trial), float(tau),
                                        np.atleast_1d(np.asarray(u, dtype=float)),
                                        float(max_weight))
    return int(markers[0]) if np.ndim(u) == 0 else markers


class WalkerEnsemble:
    """Local walker population; implements the population interface."""

    threshold_factor = THRESHOLD_FACTOR

    def __init__(self, positions, stepsize, D=1.0, e_trial=0.0, target_size=None,
                 rng=None, kappa=KAPPA, max_weight=MAX_BRANCH_WEIGHT):
        self.positions = np.array(positions, dtype=float, ndmin=2)
        self.markers = np.ones(len(self.positions), dtype=np.int64)
        self.stepsize = float(stepsize)
        self.D = float(D)
        if not (self.stepsize > 0 and self.D > 0):
            raise ValueError("stepsize and D must be positive")
        self.e_trial = float(e_trial)
        self.target_size = int(target_size if target_size is not None else len(self.positions))
        self.kappa = kappa
        self.max_weight = max_weight
        self.rng = rng if rng is not None else np.random.default_rng()
        self.clamp_events = 0
        self._last_clamped = 0

    def __len__(self):
        return len(self.positions)

    def move(self):
        sigma = math.sqrt(2.0 * self.D * self.stepsize)
        displacements = self.rng.normal(0.0, sigma, self.positions.shape)
        new_positions = self.positions + displacements
        self.branching(new_positions)
        self.positions = new_positions

    def branching(self, new_positions):
        u = self.rng.random(len(new_positions))
        self.markers, clamped = kernels.branch_markers(
            harmonic_potential(self.positions), harmonic_potential(new_positions),
            self.e_trial, self.stepsize, u, self.max_weight)
        self._last_clamped = int(clamped)
        self.clamp_events += int(clamped)

    def get_marker(self, i):
        return int(self.markers[i])

    def apply_markers(self, markers):
        markers = np.asarray(markers, dtype=np.int64)
        self.positions = np.repeat(self.positions, markers, axis=0)
        self.markers = np.ones(len(self.positions), dtype=np.int64)

    def delete(self, i):
        self.positions = np.delete(self.positions, i, axis=0)
        self.markers = np.delete(self.markers, i)

    def append(self, i, nchilds):
        clones = np.repeat(self.positions[i:i + 1], nchilds, axis=0)
        self.positions = np.insert(self.positions, i + 1, clones, axis=0)
        self.markers = np.insert(self.markers, i + 1, np.ones(nchilds, dtype=np.int64))

    def sample_observables(self) -> Observation:
        n = len(self.positions)
        mean_v = float(np.mean(harmonic_potential(self.positions))) if n else 0.0
        return Observation(n, mean_v, self.e_trial, self._last_clamped)

    def finalize_timestep(self, old_size, new_size):
        if new_size <= 0:
            raise ExtinctionError("walker population died out")
        self.e_trial += (self.kappa / self.stepsize) * math.log(self.target_size / new_size)

    def cut_slice(self, k) -> MigrationSlice:
        if not 0 <= k <= len(self.positions):
            raise ValueError(f"cut index {k} outside [0, {len(self.positions)}]")
        piece = MigrationSlice(self.positions[k:].copy(), self.markers[k:].copy())
        self.positions = self.positions[:k].copy()
        self.markers = self.markers[:k].copy()
        return piece

    def paste_slice(self, piece: MigrationSlice):
        pos = np.asarray(piece.positions, dtype=float).reshape(-1, self.positions.shape[1])
        self.positions = np.concatenate([self.positions, pos])
        self.markers = np.concatenate([self.markers, np.asarray(piece.markers, dtype=np.int64)])


def initial_positions(cfg: DMCConfig) -> np.ndarray:
    # drawn once for the whole population so the start is independent of the rank count
    rng = np.random.default_rng([cfg.seed, 0x5EED])
    return rng.normal(0.0, 1.0, (cfg.nwalkers, cfg.nspacedim))


def dmc_initialize(my_rank: int, num_procs: int, cfg: DMCConfig, rng=None):
    """Local ensemble for ``my_rank`` and the number of time steps.

    Sizes follow :func:`simple_partitioning`.  ``E_T`` starts at the mean
    potential of the full initial population, identical on every rank.
    """
    sizes = simple_partitioning(cfg.nwalkers, num_procs)
    offsets = partition_offsets(cfg.nwalkers, num_procs)
    everything = initial_positions(cfg)
    mine = everything[offsets[my_rank]:offsets[my_rank] + sizes[my_rank]]
    if rng is None:
        rng = np.random.default_rng(cfg.seed + my_rank)
    ensemble = WalkerEnsemble(mine, cfg.stepsize, cfg.D,
                              e_trial=float(np.mean(harmonic_potential(everything))),
                              target_size=cfg.nwalkers, rng=rng)
    return ensemble, cfg.timesteps


def merge_traces(traces) -> list[Observation]:
    """Combine per-rank traces step by step into global observations."""
    if not traces:
        return []
    nsteps = len(traces[0])
    if any(len(t) != nsteps for t in traces):
        raise ValueError("per-rank traces have different lengths")
    merged = []
    for step in range(nsteps):
        obs = [t[step] for t in traces]
        size = sum(o.size for o in obs)
        mean_v = sum(o.size * o.mean_v for o in obs) / size if size else 0.0
        merged.append(Observation(size, mean_v, obs[0].e_trial, sum(o.clamped for o in obs)))
    return merged


def dmc_energy_estimate(trace, burn_in: int, nblocks: int = 20) -> tuple[float, float]:
    """Population-weighted mean of <V> after burn-in, with a blocking error bar."""
    if burn_in < 0:
        raise ValueError("burn_in must be non-negative")
    kept = trace[burn_in:]
    if len(kept) < nblocks:
        raise ValueError(f"need at least {nblocks} post-burn-in steps, have {len(kept)}")
    sizes = np.array([o.size for o in kept], dtype=float)
    values = np.array([o.mean_v for o in kept], dtype=float)
    estimate = float(np.sum(sizes * values) / np.sum(sizes))
    block_means = [float(np.sum(s * v) / np.sum(s))
                   for s, v in zip(np.array_split(sizes, nblocks), np.array_split(values, nblocks))]
    stderr = float(np.std(block_means, ddof=1) / math.sqrt(nblocks))
    return estimate, stderr


def write_trace_csv(path, trace) -> None:
    with open(path, "w") as fh:
        fh.write("step,population,meanV,E_T\n")
        for step, o in enumerate(trace):
            fh.write(f"{step},{o.size},{o.mean_v:.17g},{o.e_trial:.17g}\n")
