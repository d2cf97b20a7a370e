"""Observation noise families and their single-observation information.

Each family reports the information one observation carries about the
underlying state, the score of the log-density in the state, and a
sampler.  Because the trap experiment's observation rate depends on the
input, all three take ``(x, u)``; input-independent families simply
ignore ``u``.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError

__all__ = [
    "RATE_FLOOR",
    "ObservationModel",
    "PoissonTrapModel",
    "GaussianModel",
    "poisson_fisher_info",
    "trap_info",
    "gaussian_fisher_info",
]

# Rates below this are treated as zero so grid cells hugging x = 0 cannot
# produce unbounded stage rewards that are pure discretization artifacts.
RATE_FLOOR = 1e-12


class ObservationModel:
    """Per-step observation family parametrized by state (and possibly input)."""

    n: int = 0
    m: int = 0

    def info(self, x, u):
        """Information matrix of one observation about the state, ``(..., n, n)``."""
        raise NotImplementedError

    def score_x(self, x, u, y):
        """Gradient of the observation log-density in the state, ``(..., n)``."""
        raise NotImplementedError

    def sample(self, x, u, rng: np.random.Generator, size=None):
        """Draw observations; ``size`` extends the leading shape."""
        raise NotImplementedError

    def elementwise_kernel(self):
        """Compiled single-state information kernel, or None (see SystemModel)."""
        return None


def poisson_fisher_info(lam: float) -> float:
    """Information a Poisson count carries about its own rate: ``1/rate``."""
    if lam <= 0.0:
        raise DomainError(f"rate must be positive, got {lam}")
    return 1.0 / lam


def trap_info(x: float, u: float) -> float:
    """Information one trap count carries about the population.

    The count is Poisson with rate ``x*u``; the chain rule through the
    rate gives ``u/x``.  A closed trap or an empty population yields a
    degenerate observation carrying no information, so those cases (and
    rates below ``RATE_FLOOR``) return exactly zero.
    """
    if not 0.0 <= u <= 1.0:
        raise DomainError(f"trap fraction must lie in [0, 1], got {u}")
    if x < 0.0:
        raise DomainError(f"population must be nonnegative, got {x}")
    lam = x * u
    if x > 0.0 and u > 0.0 and lam >= RATE_FLOOR:
        return u / x
    return 0.0


def gaussian_fisher_info(sd: float) -> float:
    """Information of one Gaussian observation with the given standard deviation."""
    if sd <= 0.0:
        raise DomainError(f"standard deviation must be positive, got {sd}")
    return 1.0 / (sd * sd)


class PoissonTrapModel(ObservationModel):
    """Counts from a trap capturing a fraction ``u`` of a population ``x``.

    One observation is Poisson with rate ``x*u``.
    """

    n = 1
    m = 1

    # Kept textually in sync with the compiled kernel in backends._numba.
    def info(self, x, u):
        x = np.asarray(x, dtype=np.float64)
        frac = float(np.asarray(u, dtype=np.float64).reshape(-1)[0])
        pop = x[..., 0]
        lam = pop * frac
        out = np.zeros(x.shape[:-1] + (1, 1))
        if frac > 0.0:
            mask = (pop > 0.0) & (lam >= RATE_FLOOR)
            np.divide(frac, pop, out=out[..., 0, 0], where=mask)
        return out

    def score_x(self, x, u, y):
        x = np.asarray(x, dtype=np.float64)
        frac = float(np.asarray(u, dtype=np.float64).reshape(-1)[0])
        y = np.asarray(y, dtype=np.float64)
        pop = x[..., 0]
        lam = pop * frac
        out = np.zeros(np.broadcast_shapes(y.shape, pop.shape) + (1,))
        if frac > 0.0:
            mask = np.broadcast_to((pop > 0.0) & (lam >= RATE_FLOOR), out[..., 0].shape)
            np.divide(y - lam, pop, out=out[..., 0], where=mask)
        return out

    def sample(self, x, u, rng: np.random.Generator, size=None):
        x = np.asarray(x, dtype=np.float64)
        frac = float(np.asarray(u, dtype=np.float64).reshape(-1)[0])
        lam = np.where(x[..., 0] * frac < RATE_FLOOR, 0.0, x[..., 0] * frac)
        return rng.poisson(lam, size=size).astype(np.float64)

    def elementwise_kernel(self):
        from .backends import numba_obs_kernels

        kernels = numba_obs_kernels()
        return None if kernels is None else kernels["poisson_trap_info"]


class GaussianModel(ObservationModel):
    """Additive Gaussian noise per output channel, independent of the input."""

    m = 1

    def __init__(self, sd):
        sd = np.atleast_1d(np.asarray(sd, dtype=np.float64))
        if np.any(sd <= 0.0):
            raise DomainError("standard deviations must be positive")
        self.sd = sd
        self.n = int(sd.size)
        self._info_diag = 1.0 / (sd * sd)

    def info(self, x, u):
        x = np.asarray(x, dtype=np.float64)
        out = np.zeros(x.shape[:-1] + (self.n, self.n))
        for i in range(self.n):
            out[..., i, i] = self._info_diag[i]
        return out

    def score_x(self, x, u, y):
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        return (y - x) * self._info_diag

    def sample(self, x, u, rng: np.random.Generator, size=None):
        x = np.asarray(x, dtype=np.float64)
        if size is not None:
            size = (size,) if np.isscalar(size) else tuple(size)
            size = size + x.shape
        return rng.normal(x, self.sd, size=size)

    def elementwise_kernel(self):
        from .backends import make_gaussian_info_kernel

        return make_gaussian_info_kernel(self._info_diag)
