"""Parametric discrete-time system models.

A model provides the transition map together with its Jacobians in the
state and in the parameters, plus the initial state and its parameter
Jacobian.  All callables are pure and accept either a single state of
shape ``(n,)`` or a batch of shape ``(B, n)``; batched evaluation is the
contract the grid solver relies on.

The logistic trap model used throughout the test suite is shipped as
:class:`FlyModel`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

__all__ = [
    "ParameterVector",
    "SystemModel",
    "FlyModel",
    "fly_step",
    "fly_jacobians",
]


@dataclass(frozen=True)
class ParameterVector:
    """Unknown model parameters with a nominal value used as linearization point."""

    values: np.ndarray
    names: tuple[str, ...] = ()

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1 or values.size < 1:
            raise DomainError("parameter vector must be 1-D with at least one entry")
        if not np.all(np.isfinite(values)):
            raise DomainError("parameter values must be finite")
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        names = tuple(self.names) or tuple(f"p{i}" for i in range(values.size))
        if len(names) != values.size:
            raise DomainError("number of parameter names must match the vector length")
        object.__setattr__(self, "names", names)

    @property
    def size(self) -> int:
        return int(self.values.size)

    def replaced(self, index: int, value: float) -> "ParameterVector":
        out = self.values.copy()
        out[index] = value
        return ParameterVector(out, self.names)


class SystemModel:
    """Deterministic transition map ``x' = step(x, u, params)`` with Jacobians.

    Subclasses set ``n``, ``m``, ``p`` and implement :meth:`step` and
    :meth:`initial_state`.  Analytic Jacobians are optional: the base
    class supplies central finite differences, flagged approximate via
    ``analytic_jacobians``.
    """

    n: int = 0
    m: int = 0
    p: int = 0
    param_names: tuple[str, ...] = ()
    analytic_jacobians = False
    nonnegative_state = False
    fd_step = 1e-6

    def step(self, x, u, params: ParameterVector):
        raise NotImplementedError

    def initial_state(self, params: ParameterVector):
        raise NotImplementedError

    def validate_input(self, u) -> None:
        """Raise :class:`DomainError` for inadmissible inputs.  Default: anything goes."""

    def jac_x(self, x, u, params: ParameterVector):
        """Jacobian of ``step`` in the state, shape ``(..., n, n)``.  FD fallback."""
        x = np.asarray(x, dtype=np.float64)
        out = np.empty(x.shape[:-1] + (self.n, self.n))
        for i in range(self.n):
            h = self.fd_step * np.maximum(1.0, np.abs(x[..., i]))
            hi = x.copy()
            lo = x.copy()
            hi[..., i] += h
            lo[..., i] -= h
            diff = self.step(hi, u, params) - self.step(lo, u, params)
            out[..., :, i] = diff / (2.0 * h)[..., None]
        return out

    def jac_theta(self, x, u, params: ParameterVector):
        """Jacobian of ``step`` in the parameters, shape ``(..., n, p)``.  FD fallback."""
        x = np.asarray(x, dtype=np.float64)
        out = np.empty(x.shape[:-1] + (self.n, self.p))
        for i in range(self.p):
            base = params.values[i]
            h = self.fd_step * max(1.0, abs(base))
            hi = params.replaced(i, base + h)
            lo = params.replaced(i, base - h)
            out[..., :, i] = (self.step(x, u, hi) - self.step(x, u, lo)) / (2.0 * h)
        return out

    def initial_sensitivity(self, params: ParameterVector):
        """Jacobian of the initial state in the parameters, ``(n, p)``.  FD fallback."""
        out = np.empty((self.n, self.p))
        for i in range(self.p):
            base = params.values[i]
            h = self.fd_step * max(1.0, abs(base))
            hi = np.asarray(self.initial_state(params.replaced(i, base + h)))
            lo = np.asarray(self.initial_state(params.replaced(i, base - h)))
            out[:, i] = (hi - lo) / (2.0 * h)
        return out

    def elementwise_kernel(self):
        """Compiled single-state ``step``+Jacobian kernel, or None.

        The fast solver backend inlines this into its grid sweep; models
        without one fall back to batched evaluation of the methods above.
        """
        return None


def _check_fly_domain(x: float, u: float) -> None:
    if not 0.0 <= u <= 1.0:
        raise DomainError(f"trap fraction must lie in [0, 1], got {u}")
    if x < 0.0:
        raise DomainError(f"population must be nonnegative, got {x}")


def fly_step(x: float, u: float, rate: float, capacity: float) -> float:
    """One step of the trapped logistic population.

    The surviving population ``x*(1-u)`` grows logistically toward the
    carrying capacity.  Results below zero (possible for extreme states)
    are clamped to zero so the state space stays closed.
    """
    _check_fly_domain(x, u)
    if rate < 0.0:
        raise DomainError(f"growth rate must be nonnegative, got {rate}")
    if capacity <= 0.0:
        raise DomainError(f"carrying capacity must be positive, got {capacity}")
    survivors = x * (1.0 - u)
    nxt = survivors + rate * survivors * (capacity - survivors)
    return nxt if nxt > 0.0 else 0.0


def fly_jacobians(x: float, u: float, rate: float, capacity: float):
    """Partial derivatives of :func:`fly_step` in ``x``, ``rate`` and ``capacity``."""
    _check_fly_domain(x, u)
    survivors = x * (1.0 - u)
    d_x = (1.0 - u) * (1.0 + rate * (capacity - 2.0 * survivors))
    d_rate = survivors * (capacity - survivors)
    d_capacity = rate * survivors
    return d_x, d_rate, d_capacity


@dataclass(frozen=True)
class FlyModel(SystemModel):
    """Logistic fly population with a per-step trap removing a fraction of it.

    State is the population (one scalar), the input is the trapped
    fraction, and the two parameters are the growth rate and the
    carrying capacity.  The population starts at capacity, so the
    initial sensitivity is ``[0, 1]``.
    """

    n: int = field(default=1, init=False)
    m: int = field(default=1, init=False)
    p: int = field(default=2, init=False)
    param_names: tuple[str, ...] = field(default=("r", "K"), init=False)

    analytic_jacobians = True
    nonnegative_state = True

    def default_params(self) -> ParameterVector:
        return ParameterVector(np.array([5e-4, 1000.0]), self.param_names)

    def validate_input(self, u) -> None:
        u = np.asarray(u, dtype=np.float64)
        if np.any(u < 0.0) or np.any(u > 1.0):
            raise DomainError("trap fraction must lie in [0, 1]")

    # The batched implementations below share their expression trees with
    # the compiled elementwise kernel; the solver's cross-backend
    # bit-reproducibility depends on keeping them identical.

    def step(self, x, u, params: ParameterVector):
        x = np.asarray(x, dtype=np.float64)
        rate, capacity = params.values
        frac = np.asarray(u, dtype=np.float64).reshape(-1)[0]
        survivors = x * (1.0 - frac)
        nxt = survivors + rate * survivors * (capacity - survivors)
        return np.where(nxt < 0.0, 0.0, nxt)

    def jac_x(self, x, u, params: ParameterVector):
        x = np.asarray(x, dtype=np.float64)
        rate, capacity = params.values
        frac = np.asarray(u, dtype=np.float64).reshape(-1)[0]
        survivors = x * (1.0 - frac)
        d = (1.0 - frac) * (1.0 + rate * (capacity - 2.0 * survivors))
        return d[..., None]

    def jac_theta(self, x, u, params: ParameterVector):
        x = np.asarray(x, dtype=np.float64)
        rate, capacity = params.values
        frac = np.asarray(u, dtype=np.float64).reshape(-1)[0]
        survivors = x * (1.0 - frac)
        out = np.empty(x.shape[:-1] + (1, 2))
        out[..., 0, 0] = survivors[..., 0] * (capacity - survivors[..., 0])
        out[..., 0, 1] = rate * survivors[..., 0]
        return out

    def initial_state(self, params: ParameterVector):
        return np.array([params.values[1]])

    def initial_sensitivity(self, params: ParameterVector):
        return np.array([[0.0, 1.0]])

    def elementwise_kernel(self):
        from .backends import numba_model_kernels

        kernels = numba_model_kernels()
        return None if kernels is None else kernels["fly_step_jac"]
