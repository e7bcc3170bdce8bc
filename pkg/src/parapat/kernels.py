"""Inner loops: red-black Gauss-Seidel for the 5-point Laplacian and DMC branching.

Each kernel exists twice: a scalar-loop version compiled by numba and a
vectorised numpy version.  Both perform the same floating point operations in
the same order.  The public names are bound according to
:data:`parapat._accel.USE_NUMBA`; ``*_numba`` / ``*_numpy`` stay importable
for tests and benchmarks.

Grid arrays are ``(ny + 2, nx + 2)`` with row index ``i`` along y and column
index ``j`` along x.  The outer ring holds Dirichlet data and is never
written.
"""
from __future__ import annotations

import math

import numpy as np

from ._accel import USE_NUMBA, njit

# ---------------------------------------------------------------------------
# Gauss-Seidel
# ---------------------------------------------------------------------------


def _residual_norm_loops(u, f, cx, cy):
    ny = u.shape[0] - 2
    nx = u.shape[1] - 2
    diag = 2.0 * cx + 2.0 * cy
    worst = 0.0
    for i in range(1, ny + 1):
        for j in range(1, nx + 1):
            au = diag * u[i, j] - cx * (u[i, j - 1] + u[i, j + 1]) - cy * (u[i - 1, j] + u[i + 1, j])
            r = abs(f[i, j] - au)
            if r > worst:
                worst = r
    return worst


def _rb_gauss_seidel_loops(u, f, cx, cy, tol, max_sweeps):
    ny = u.shape[0] - 2
    nx = u.shape[1] - 2
    diag = 2.0 * cx + 2.0 * cy
    res = _residual_norm_jit(u, f, cx, cy)
    sweeps = 0
    while res >= tol and sweeps < max_sweeps:
        for color in range(2):
            for i in range(1, ny + 1):
                j0 = 1 + (i + 1 + color) % 2
                for j in range(j0, nx + 1, 2):
                    u[i, j] = (f[i, j] + cx * (u[i, j - 1] + u[i, j + 1])
                               + cy * (u[i - 1, j] + u[i + 1, j])) / diag
        sweeps += 1
        res = _residual_norm_jit(u, f, cx, cy)
    return sweeps, res


_residual_norm_jit = njit(cache=True)(_residual_norm_loops)
residual_norm_numba = _residual_norm_jit
rb_gauss_seidel_numba = njit(cache=True)(_rb_gauss_seidel_loops)


def residual_norm_numpy(u, f, cx, cy):
    diag = 2.0 * cx + 2.0 * cy
    c = u[1:-1, 1:-1]
    au = diag * c - cx * (u[1:-1, :-2] + u[1:-1, 2:]) - cy * (u[:-2, 1:-1] + u[2:, 1:-1])
    r = np.abs(f[1:-1, 1:-1] - au)
    return float(r.max()) if r.size else 0.0


def _color_blocks(shape, color):
    # (r0, r1, c0, c1) strided blocks covering interior points with (i + j) % 2 == color
    ny, nx = shape[0] - 2, shape[1] - 2
    blocks = []
    for r0 in (1, 2):
        c0 = 1 + (r0 + 1 + color) % 2
        if r0 <= ny and c0 <= nx:
            blocks.append((r0, ny + 1, c0, nx + 1))
    return blocks


def rb_gauss_seidel_numpy(u, f, cx, cy, tol, max_sweeps):
    diag = 2.0 * cx + 2.0 * cy
    plan = _color_blocks(u.shape, 0) + _color_blocks(u.shape, 1)
    res = residual_norm_numpy(u, f, cx, cy)
    sweeps = 0
    while res >= tol and sweeps < max_sweeps:
        for r0, r1, c0, c1 in plan:
            rows = slice(r0, r1, 2)
            cols = slice(c0, c1, 2)
            u[rows, cols] = (f[rows, cols]
                             + cx * (u[rows, c0 - 1:c1 - 1:2] + u[rows, c0 + 1:c1 + 1:2])
                             + cy * (u[r0 - 1:r1 - 1:2, cols] + u[r0 + 1:r1 + 1:2, cols])) / diag
        sweeps += 1
        res = residual_norm_numpy(u, f, cx, cy)
    return sweeps, res


# ---------------------------------------------------------------------------
# DMC branching
# ---------------------------------------------------------------------------


def _branch_markers_loops(v_old, v_new, e_trial, tau, u, max_weight):
    n = v_old.shape[0]
    markers = np.empty(n, dtype=np.int64)
    clamped = 0
    for k in range(n):
        w = math.exp(-(0.5 * (v_old[k] + v_new[k]) - e_trial) * tau)
        if w > max_weight:
            w = max_weight
            clamped += 1
        markers[k] = int(math.floor(w + u[k]))
    return markers, clamped


branch_markers_numba = njit(cache=True)(_branch_markers_loops)


def branch_markers_numpy(v_old, v_new, e_trial, tau, u, max_weight):
    with np.errstate(over="ignore"):
        w = np.exp(-(0.5 * (v_old + v_new) - e_trial) * tau)
    over = w > max_weight
    w = np.where(over, max_weight, w)
    return np.floor(w + u).astype(np.int64), int(over.sum())


if USE_NUMBA:
    rb_gauss_seidel = rb_gauss_seidel_numba
    residual_norm = residual_norm_numba
    branch_markers = branch_markers_numba
else:
    rb_gauss_seidel = rb_gauss_seidel_numpy
    residual_norm = residual_norm_numpy
    branch_markers = branch_markers_numpy

IMPLEMENTATION = "numba" if USE_NUMBA else "numpy"
