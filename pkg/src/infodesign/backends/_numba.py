"""Compiled kernels for the grid sweep (numba backend).

The pure-numpy twin of every routine lives in ``_numpy.py``; the two are
kept in lockstep expression by expression so tables are bit-identical
across backends and across thread counts (each grid node is computed
independently; the only cross-node reductions are integer counters).
"""

from __future__ import annotations

import functools

import numpy as np
from numba import njit, prange

NAME = "numba"

NODE_SNAP = 1e-9

SUPPORTS_FUSED = True

# Mirrors observations.RATE_FLOOR; duplicated literal keeps this module
# importable without package-level circularity.
_RATE_FLOOR = 1e-12


@njit(cache=True, inline="always")
def _interp_point(values, pt, los, his, inv_steps, npts, strides, bases, fracs):
    """Clamp one point into the grid box and interpolate the flat table there."""
    dim = los.shape[0]
    outside = False
    for d in range(dim):
        p = pt[d]
        if p < los[d]:
            p = los[d]
            outside = True
        elif p > his[d]:
            p = his[d]
            outside = True
        t = (p - los[d]) * inv_steps[d]
        rounded = np.rint(t)
        if abs(t - rounded) <= NODE_SNAP:
            t = rounded
        base = int(np.floor(t))
        if base > npts[d] - 2:
            base = npts[d] - 2
        if base < 0:
            base = 0
        f = t - base
        if f < 0.0:
            f = 0.0
        elif f > 1.0:
            f = 1.0
        bases[d] = base
        fracs[d] = f
    acc = 0.0
    for corner in range(1 << dim):
        offset = 0
        weight = 1.0
        for d in range(dim):
            if (corner >> d) & 1:
                offset += (bases[d] + 1) * strides[d]
                weight *= fracs[d]
            else:
                offset += bases[d] * strides[d]
                weight *= 1.0 - fracs[d]
        acc += values[offset] * weight
    return acc, outside


@njit(cache=True, parallel=True)
def _interp_many(values, points, los, his, inv_steps, npts, strides):
    n_pts = points.shape[0]
    dim = points.shape[1]
    out = np.empty(n_pts)
    outside_count = 0
    for i in prange(n_pts):
        bases = np.empty(dim, np.int64)
        fracs = np.empty(dim, np.float64)
        acc, outside = _interp_point(
            values, points[i], los, his, inv_steps, npts, strides, bases, fracs
        )
        out[i] = acc
        if outside:
            outside_count += 1
    return out, outside_count


def interp_clamped(values, points, los, his, inv_steps, npts, strides):
    points = np.ascontiguousarray(np.atleast_2d(np.asarray(points, dtype=np.float64)))
    out, outside = _interp_many(values, points, los, his, inv_steps, npts, strides)
    return out, int(outside)


# --- elementwise model kernels (built-ins) ---------------------------------
# Expression trees mirror the batched numpy methods on FlyModel and
# PoissonTrapModel.


@njit(cache=True)
def fly_step_jac(x, u, theta, x_out, jx_out, jth_out):
    rate = theta[0]
    capacity = theta[1]
    survivors = x[0] * (1.0 - u[0])
    nxt = survivors + rate * survivors * (capacity - survivors)
    if nxt < 0.0:
        nxt = 0.0
    x_out[0] = nxt
    jx_out[0, 0] = (1.0 - u[0]) * (1.0 + rate * (capacity - 2.0 * survivors))
    jth_out[0, 0] = survivors * (capacity - survivors)
    jth_out[0, 1] = rate * survivors


@njit(cache=True)
def poisson_trap_info(x, u, out):
    lam = x[0] * u[0]
    if x[0] > 0.0 and u[0] > 0.0 and lam >= _RATE_FLOOR:
        out[0, 0] = u[0] / x[0]
    else:
        out[0, 0] = 0.0


def make_gaussian_info_kernel(info_diag):
    diag = np.asarray(info_diag, dtype=np.float64).copy()

    @njit(cache=False)
    def gaussian_info(x, u, out):
        n = out.shape[0]
        for a in range(n):
            for b in range(n):
                out[a, b] = 0.0
            out[a, a] = diag[a]

    return gaussian_info


# --- fused stage sweep ------------------------------------------------------


@functools.lru_cache(maxsize=None)
def make_fused_sweep(step_jac, info_fn):
    """Compile a full stage sweep around a model/observation kernel pair.

    For every grid node the sweep evaluates each candidate input: stage
    reward at the node, exact propagation of the augmented state, and
    interpolation of the next stage's table, keeping the strictly best
    candidate (earlier index wins ties).  Returns the counts of
    out-of-grid propagated points and of non-finite ones.
    """

    @njit(parallel=True)
    def sweep(
        node_x,
        node_s,
        candidates,
        theta,
        values_next,
        has_next,
        los,
        his,
        inv_steps,
        npts,
        strides,
        weights,
        best_val,
        best_arg,
    ):
        m_nodes = node_x.shape[0]
        n = node_x.shape[1]
        p = node_s.shape[2]
        q = candidates.shape[0]
        dim = n + n * p
        outside_count = 0
        nonfinite_count = 0
        for i in prange(m_nodes):
            x_next = np.empty(n)
            jac_x = np.empty((n, n))
            jac_theta = np.empty((n, p))
            info = np.empty((n, n))
            point = np.empty(dim)
            bases = np.empty(dim, np.int64)
            fracs = np.empty(dim, np.float64)
            best = -np.inf
            arg = -1
            for j in range(q):
                u = candidates[j]
                info_fn(node_x[i], u, info)
                reward = 0.0
                for jj in range(p):
                    d = 0.0
                    for a in range(n):
                        for b in range(n):
                            d += node_s[i, a, jj] * info[a, b] * node_s[i, b, jj]
                    reward += weights[jj] * d
                if reward < 0.0:
                    reward = 0.0
                acc = 0.0
                if has_next:
                    step_jac(node_x[i], u, theta, x_next, jac_x, jac_theta)
                    for a in range(n):
                        point[a] = x_next[a]
                    for a in range(n):
                        for jj in range(p):
                            s = jac_theta[a, jj]
                            for b in range(n):
                                s += jac_x[a, b] * node_s[i, b, jj]
                            point[n + a * p + jj] = s
                    finite = True
                    for d_ in range(dim):
                        if not np.isfinite(point[d_]):
                            finite = False
                    if not finite:
                        nonfinite_count += 1
                        continue
                    acc, outside = _interp_point(
                        values_next, point, los, his, inv_steps, npts, strides, bases, fracs
                    )
                    if outside:
                        outside_count += 1
                total = reward + acc
                if total > best:
                    best = total
                    arg = j
            best_val[i] = best
            best_arg[i] = arg
        return outside_count, nonfinite_count

    return sweep
