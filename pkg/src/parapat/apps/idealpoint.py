"""Gibbs sampler for the probit ideal-point model of roll-call voting.

Model: ``y*_ij = beta_j . x_i - alpha_j + e_ij`` with ``e_ij ~ N(0, 1)`` and
``y_ij = 1`` iff ``y*_ij > 0``.  Priors are ``x_i ~ N(0, I)`` and
``(beta_j, alpha_j) ~ N(0, 25 I)``.  One iteration draws

1. the latent utilities ``y*`` from truncated normals,
2. every ``(beta_j, alpha_j)`` from its conjugate regression posterior given ``x``,
3. every ``x_i`` from its conjugate regression posterior given ``beta, alpha``,

then standardises ``x`` (mean 0, variance 1 per dimension) and flips the
sign of any dimension in which the anchor legislator is negative.  Several
independent chains are run as a task farm.
"""
from __future__ import annotations

import csv
import dataclasses

import numpy as np
from scipy import special

from ..taskmap import ProblemHooks, parallel_solve_problem

MISSING = -1
TAIL_SWITCH = 5.0


@dataclasses.dataclass
class RollCallMatrix:
    """Votes as an ``(n, m)`` int8 array of 1 (Yea), 0 (Nay) or ``MISSING``."""

    votes: np.ndarray
    legislators: list[str] | None = None

    def __post_init__(self):
        self.votes = np.asarray(self.votes, dtype=np.int8)
        if self.votes.ndim != 2:
            raise ValueError("votes must be a 2-D array")
        n, m = self.votes.shape
        if n < 2 or m < 2:
            raise ValueError(f"need at least 2 legislators and 2 votes, got {n}x{m}")
        if not np.all(np.isin(self.votes, (0, 1, MISSING))):
            raise ValueError("votes must be 0, 1 or MISSING")
        if np.any(np.all(self.votes == MISSING, axis=1)):
            raise ValueError("every legislator needs at least one observed vote")

    @property
    def shape(self):
        return self.votes.shape


@dataclasses.dataclass(frozen=True)
class GibbsConfig:
    iterations: int = 2000
    burn_in: int = 500
    thin: int = 1
    seed: int = 0
    ndim: int = 1
    prior_x: float = 1.0
    prior_item: float = 5.0
    anchor: int = 0

    def __post_init__(self):
        if self.iterations < 1 or self.thin < 1 or self.ndim < 1:
            raise ValueError("iterations, thin and ndim must be positive")
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError("burn_in must satisfy 0 <= burn_in < iterations")
        if not (self.prior_x > 0 and self.prior_item > 0):
            raise ValueError("prior scales must be positive")


@dataclasses.dataclass
class ChainState:
    x: np.ndarray       # (n, d)
    beta: np.ndarray    # (m, d)
    alpha: np.ndarray   # (m,)
    ystar: np.ndarray   # (n, m)


# ---------------------------------------------------------------------------
# truncated normal
# ---------------------------------------------------------------------------

def _standard_tail(a: np.ndarray, rng) -> np.ndarray:
    """Draws of Z ~ N(0,1) conditioned on Z > a, for a > 0 (Robert 1995)."""
    out = np.empty_like(a)
    todo = np.arange(a.size)
    lam = 0.5 * (a + np.sqrt(a * a + 4.0))
    while todo.size:
        z = a[todo] + rng.exponential(1.0 / lam[todo])
        accept = rng.random(todo.size) <= np.exp(-0.5 * (z - lam[todo]) ** 2)
        out[todo[accept]] = z[accept]
        todo = todo[~accept]
    return out


def standard_normal_above(a, rng) -> np.ndarray:
    """Z ~ N(0, 1) truncated to ``(a, inf)``, elementwise.

    Inverse CDF on the mirrored variable, ``Z = -ndtri(u * Phi(-a))``, which
    stays accurate for ``a`` up to :data:`TAIL_SWITCH`; beyond that an
    exponential-proposal rejection sampler takes over.
    """
    a = np.asarray(a, dtype=float)
    flat = a.ravel()
    z = np.empty_like(flat)
    tail = flat > TAIL_SWITCH
    body = ~tail
    if body.any():
        u = rng.random(int(body.sum()))
        z[body] = -special.ndtri(u * special.ndtr(-flat[body]))
    if tail.any():
        z[tail] = _standard_tail(flat[tail], rng)
    # u == 0 would give +inf; u * Phi(-a) rounding can land exactly on a
    z = np.where(np.isfinite(z), z, flat + 1.0)
    z = np.maximum(z, np.nextafter(flat, np.inf))
    return z.reshape(a.shape)


def _votes(data) -> np.ndarray:
    return data.votes if isinstance(data, RollCallMatrix) else np.asarray(data)


def sample_ystar(state: ChainState, data, rng) -> np.ndarray:
    """Latent utilities: truncated to ``(0, inf)`` for Yea, ``(-inf, 0)`` for Nay."""
    votes = _votes(data)
    mu = state.x @ state.beta.T - state.alpha[None, :]
    yea = votes == 1
    nay = votes == 0
    observed = yea | nay
    ystar = np.empty_like(mu)
    # Yea: y* = mu + Z, Z > -mu.  Nay: y* = mu - Z, Z > mu.
    sign = np.where(yea, 1.0, -1.0)
    z = standard_normal_above(-sign[observed] * mu[observed], rng)
    ystar[observed] = mu[observed] + sign[observed] * z
    missing = ~observed
    if missing.any():
        ystar[missing] = mu[missing] + rng.standard_normal(int(missing.sum()))
    state.ystar = ystar
    return ystar


# ---------------------------------------------------------------------------
# conjugate regressions
# ---------------------------------------------------------------------------

def _draw_regression(design: np.ndarray, targets: np.ndarray, prior_scale: float, rng) -> np.ndarray:
    """Coefficient draws for ``targets[:, k] ~ N(design @ b_k, 1)``, ``b_k ~ N(0, s^2 I)``.

    All columns of ``targets`` share the design, so one Cholesky factor of the
    posterior precision serves every regression.  Returns ``(k, p)``.
    """
    p = design.shape[1]
    precision = design.T @ design + np.eye(p) / prior_scale**2
    try:
        chol = np.linalg.cholesky(precision)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("posterior precision is not positive definite") from exc
    rhs = design.T @ targets                                   # (p, k)
    mean = np.linalg.solve(chol.T, np.linalg.solve(chol, rhs))  # (p, k)
    noise = rng.standard_normal(mean.shape)
    # precision = L L^T, so L^-T z has covariance precision^-1
    return (mean + np.linalg.solve(chol.T, noise)).T


def regression_posterior(design, targets, prior_scale):
    """Posterior mean ``(p, k)`` and covariance ``(p, p)`` of :func:`_draw_regression`."""
    p = design.shape[1]
    cov = np.linalg.inv(design.T @ design + np.eye(p) / prior_scale**2)
    return cov @ design.T @ targets, cov


def sample_item_params(state: ChainState, data, rng, prior_scale: float = 5.0):
    """Regress each vote's ``y*`` column on ``[x, -1]``; returns ``(beta, alpha)``."""
    design = np.hstack([state.x, -np.ones((state.x.shape[0], 1))])
    coef = _draw_regression(design, state.ystar, prior_scale, rng)
    state.beta = coef[:, :-1].copy()
    state.alpha = coef[:, -1].copy()
    return state.beta, state.alpha


def sample_ideal_points(state: ChainState, data, rng, prior_scale: float = 1.0):
    """Regress each legislator's ``y* + alpha`` row on ``beta``; returns ``x``."""
    targets = (state.ystar + state.alpha[None, :]).T           # (m, n)
    state.x = _draw_regression(state.beta, targets, prior_scale, rng)
    return state.x


def normalize_ideal_points(x: np.ndarray, anchor: int = 0) -> np.ndarray:
    x = x - x.mean(axis=0)
    sd = x.std(axis=0)
    x = x / np.where(sd > 0, sd, 1.0)
    flip = np.where(x[anchor] < 0, -1.0, 1.0)
    return x * flip


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------

def initial_state(data: RollCallMatrix, cfg: GibbsConfig, rng) -> ChainState:
    n, m = data.shape
    x = normalize_ideal_points(rng.standard_normal((n, cfg.ndim)), cfg.anchor)
    return ChainState(x=x, beta=np.zeros((m, cfg.ndim)), alpha=np.zeros(m), ystar=np.zeros((n, m)))


def run_gibbs(data: RollCallMatrix, cfg: GibbsConfig, keep_samples: bool = False) -> dict:
    """Run one chain; returns posterior means and sds of ``x``, ``beta``, ``alpha``."""
    rng = np.random.default_rng(cfg.seed)
    state = initial_state(data, cfg, rng)
    votes = data.votes
    draws = {"x": [], "beta": [], "alpha": []}
    for t in range(cfg.iterations):
        sample_ystar(state, votes, rng)
        sample_item_params(state, votes, rng, cfg.prior_item)
        sample_ideal_points(state, votes, rng, cfg.prior_x)
        state.x = normalize_ideal_points(state.x, cfg.anchor)
        if not (np.all(np.isfinite(state.x)) and np.all(np.isfinite(state.beta))
                and np.all(np.isfinite(state.alpha))):
            raise FloatingPointError(f"non-finite chain state at iteration {t}")
        if t >= cfg.burn_in and (t - cfg.burn_in) % cfg.thin == 0:
            draws["x"].append(state.x.copy())
            draws["beta"].append(state.beta.copy())
            draws["alpha"].append(state.alpha.copy())
    summary = {"n_samples": len(draws["x"]), "seed": cfg.seed}
    for name, samples in draws.items():
        arr = np.asarray(samples)
        summary[f"{name}_mean"] = arr.mean(axis=0)
        summary[f"{name}_sd"] = arr.std(axis=0, ddof=1) if len(arr) > 1 else np.zeros(arr.shape[1:])
    if keep_samples:
        summary["samples"] = {k: np.asarray(v) for k, v in draws.items()}
    return summary


def generate_synthetic(n: int, m: int, d: int = 1, seed: int = 0):
    """Synthetic roll calls; returns ``(RollCallMatrix, truth)``."""
    if n < 2 or m < 2:
        raise ValueError("need n >= 2 and m >= 2")
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, d))
    beta = rng.standard_normal((m, d))
    alpha = rng.normal(0.0, 0.5, m)
    prob = special.ndtr(x @ beta.T - alpha[None, :])
    votes = (rng.random((n, m)) < prob).astype(np.int8)
    # a legislator with no observed votes cannot happen here: every vote is observed
    return RollCallMatrix(votes), {"x": x, "beta": beta, "alpha": alpha, "prob": prob}


def align_sign(estimate: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """Flip each column of ``estimate`` to correlate positively with ``reference``."""
    est = np.array(estimate, dtype=float, ndmin=2).reshape(len(estimate), -1)
    ref = np.array(reference, dtype=float).reshape(len(reference), -1)
    signs = np.sign(np.sum((est - est.mean(0)) * (ref - ref.mean(0)), axis=0))
    return est * np.where(signs == 0, 1.0, signs)


def chain_hooks(data: RollCallMatrix, cfg: GibbsConfig, nchains: int) -> ProblemHooks:
    """Task farm with one chain per task; chain ``c`` uses seed ``cfg.seed + c``."""
    def initialize():
        return [((data, dataclasses.replace(cfg, seed=cfg.seed + c)), {}) for c in range(nchains)]

    return ProblemHooks(initialize=initialize, task=run_gibbs, finalize=list)


def run_multichain(data: RollCallMatrix, cfg: GibbsConfig, comm, nchains: int = 4):
    """Per-chain summaries in chain order on rank 0, ``None`` elsewhere."""
    return parallel_solve_problem(chain_hooks(data, cfg, nchains), comm)


# ---------------------------------------------------------------------------
# I/O
# ---------------------------------------------------------------------------

def read_rollcall_csv(path) -> RollCallMatrix:
    """Header row, then one row per legislator; cells 0, 1 or NA.

    A first header cell named ``legislator`` marks a name column.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise ValueError(f"{path}: expected a header and at least one row")
    header, body = rows[0], rows[1:]
    named = header[0].strip().lower() == "legislator"
    names = [r[0] for r in body] if named else None
    cells = [r[1:] if named else r for r in body]
    lookup = {"0": 0, "1": 1, "NA": MISSING, "": MISSING}
    try:
        votes = np.array([[lookup[c.strip()] for c in row] for row in cells], dtype=np.int8)
    except KeyError as exc:
        raise ValueError(f"{path}: invalid vote cell {exc.args[0]!r}") from None
    return RollCallMatrix(votes, names)


def write_rollcall_csv(path, data: RollCallMatrix) -> None:
    n, m = data.shape
    names = data.legislators or [f"L{i}" for i in range(n)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["legislator"] + [f"v{j}" for j in range(m)])
        for name, row in zip(names, data.votes):
            w.writerow([name] + ["NA" if v == MISSING else str(int(v)) for v in row])


def summary_to_json(summary: dict) -> dict:
    out = {}
    for key, value in summary.items():
        if key == "samples":
            continue
        out[key] = value.tolist() if isinstance(value, np.ndarray) else value
    return out

