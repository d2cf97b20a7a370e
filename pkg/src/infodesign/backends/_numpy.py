"""Pure-numpy implementations of the grid-sweep kernels.

Every arithmetic expression here mirrors the numba kernels in
``_numba.py`` operation for operation (same association, same branch
semantics), so value and policy tables come out bit-identical whichever
backend runs.  Keep the two files in sync when touching either.
"""

from __future__ import annotations

import numpy as np

NAME = "numpy"

NODE_SNAP = 1e-9

SUPPORTS_FUSED = False


def _locate(points, los, his, inv_steps, npts):
    """Clamp points into the box and find cell bases and fractions."""
    below = points < los
    above = points > his
    outside_count = int(np.count_nonzero(np.any(below | above, axis=1)))
    pts = np.where(below, los, np.where(above, his, points))
    t = (pts - los) * inv_steps
    rounded = np.rint(t)
    t = np.where(np.abs(t - rounded) <= NODE_SNAP, rounded, t)
    base = np.floor(t).astype(np.int64)
    base = np.where(base > npts - 2, npts - 2, base)
    base = np.where(base < 0, 0, base)
    frac = t - base
    frac = np.where(frac < 0.0, 0.0, np.where(frac > 1.0, 1.0, frac))
    return base, frac, outside_count


def interp_clamped(values, points, los, his, inv_steps, npts, strides):
    """Multilinear interpolation of a flat table at (clamped) points.

    Returns ``(interpolated values, count of points that were outside)``.
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    dim = points.shape[1]
    base, frac, outside = _locate(points, los, his, inv_steps, npts)
    out = np.zeros(points.shape[0])
    for corner in range(1 << dim):
        offset = np.zeros(points.shape[0], dtype=np.int64)
        weight = None
        for d in range(dim):
            if (corner >> d) & 1:
                offset += (base[:, d] + 1) * strides[d]
                factor = frac[:, d]
            else:
                offset += base[:, d] * strides[d]
                factor = 1.0 - frac[:, d]
            weight = factor if weight is None else weight * factor
        out = out + values[offset] * weight
    return out, outside


def update_best(totals, candidate, best_val, best_arg):
    """Keep the strictly better total; earlier candidates win ties."""
    better = totals > best_val
    best_val[better] = totals[better]
    best_arg[better] = candidate
