"""Sensitivity propagation, information assembly and the trace objective.

The parameter sensitivity of the state trajectory obeys a linear
time-varying recursion driven by the model Jacobians; propagating it
alongside the state turns experiment design into a deterministic optimal
control problem.  This module implements that recursion, accumulates the
total information matrix over a trajectory, and evaluates the trace
objective the solver maximizes.

All summations run in a fixed order (ascending stage, then parameter
column) so the stage-additivity of the objective holds bit-exactly: the
information accumulator tracks the stagewise trace as it goes, and
:func:`trace_objective` returns that exact value when asked for the same
weighting it was accumulated under.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericError
from .models import ParameterVector, SystemModel
from .observations import ObservationModel

__all__ = [
    "AugmentedState",
    "Trajectory",
    "InformationMatrix",
    "propagate",
    "simulate",
    "sens_transition",
    "quadratic_form_trace",
    "stage_reward",
    "total_fisher_information",
    "trace_objective",
    "trajectory_objective",
]


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64).copy()
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class AugmentedState:
    """System state paired with its parameter sensitivity: the solver's state."""

    state: np.ndarray  # (n,)
    sens: np.ndarray  # (n, p)

    def __post_init__(self):
        state = _frozen(np.atleast_1d(self.state))
        sens = _frozen(np.atleast_2d(self.sens))
        if state.ndim != 1 or sens.ndim != 2 or sens.shape[0] != state.shape[0]:
            raise DomainError("sensitivity shape must be (n, p) matching the state")
        if not (np.all(np.isfinite(state)) and np.all(np.isfinite(sens))):
            raise DomainError("augmented state entries must be finite")
        object.__setattr__(self, "state", state)
        object.__setattr__(self, "sens", sens)

    def flat(self) -> np.ndarray:
        """Concatenated grid coordinates: state dims then sensitivity, row-major."""
        return np.concatenate([self.state, self.sens.reshape(-1)])


@dataclass(frozen=True)
class Trajectory:
    """States, sensitivities and inputs over stages ``0..N`` (inputs included at N)."""

    xs: np.ndarray  # (N+1, n)
    sens: np.ndarray  # (N+1, n, p)
    inputs: np.ndarray  # (N+1, m)

    def __post_init__(self):
        xs = _frozen(self.xs)
        sens = _frozen(self.sens)
        inputs = _frozen(self.inputs)
        if not (xs.ndim == 2 and sens.ndim == 3 and inputs.ndim == 2):
            raise DomainError("trajectory arrays have inconsistent ranks")
        if not xs.shape[0] == sens.shape[0] == inputs.shape[0]:
            raise DomainError("trajectory arrays have inconsistent lengths")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "sens", sens)
        object.__setattr__(self, "inputs", inputs)

    @property
    def horizon(self) -> int:
        return int(self.xs.shape[0] - 1)

    def state(self, t: int) -> AugmentedState:
        return AugmentedState(self.xs[t], self.sens[t])

    def truncated(self, k: int) -> "Trajectory":
        """The prefix through stage ``k`` inclusive."""
        return Trajectory(self.xs[: k + 1], self.sens[: k + 1], self.inputs[: k + 1])

    def is_consistent(self, model: SystemModel, params: ParameterVector) -> bool:
        """Whether each stored transition reproduces under exact propagation."""
        for t in range(self.horizon):
            nxt = propagate(model, self.state(t), self.inputs[t], params)
            if not (
                np.array_equal(nxt.state, self.xs[t + 1])
                and np.array_equal(nxt.sens, self.sens[t + 1])
            ):
                return False
        return True


@dataclass(frozen=True)
class InformationMatrix:
    """Total information about the parameters, with its stagewise trace.

    ``stage_trace`` is the trace accumulated stage by stage during
    assembly (under ``stage_weights``); it is the exact stage-additive
    value of the objective and is what :func:`trace_objective` reports
    for a matching weighting.
    """

    matrix: np.ndarray  # (p, p)
    stage_trace: float | None = None
    stage_weights: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "matrix", _frozen(self.matrix))

    @property
    def p(self) -> int:
        return int(self.matrix.shape[0])


def _resolve_weights(weights, p: int) -> np.ndarray:
    if weights is None:
        return np.ones(p)
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (p,):
        raise DomainError(f"trace weights must have shape ({p},)")
    if np.any(weights < 0.0) or not np.all(np.isfinite(weights)):
        raise DomainError("trace weights must be finite and nonnegative")
    return weights


def sens_transition(jac_x, jac_theta, sens):
    """Next sensitivity ``jac_theta + jac_x @ sens``, batched or single.

    Written as explicit loops over the (small) state and parameter
    dimensions so single-state and batched evaluations round identically.
    """
    jac_x = np.asarray(jac_x, dtype=np.float64)
    jac_theta = np.asarray(jac_theta, dtype=np.float64)
    sens = np.asarray(sens, dtype=np.float64)
    n, p = jac_theta.shape[-2], jac_theta.shape[-1]
    out = np.empty(np.broadcast_shapes(jac_theta.shape, sens.shape))
    for a in range(n):
        for j in range(p):
            acc = jac_theta[..., a, j]
            for b in range(n):
                acc = acc + jac_x[..., a, b] * sens[..., b, j]
            out[..., a, j] = acc
    return out


def quadratic_form_trace(sens, info, weights=None):
    """Weighted trace of ``sens.T @ info @ sens``, batched or single.

    Fixed summation order (parameter column outer, state indices inner);
    tiny negative results from rounding a semidefinite form are clamped
    to zero.
    """
    sens = np.asarray(sens, dtype=np.float64)
    info = np.asarray(info, dtype=np.float64)
    n, p = sens.shape[-2], sens.shape[-1]
    weights = _resolve_weights(weights, p)
    batch = np.broadcast_shapes(sens.shape[:-2], info.shape[:-2])
    total = np.zeros(batch)
    for j in range(p):
        d = np.zeros(batch)
        for a in range(n):
            for b in range(n):
                d = d + sens[..., a, j] * info[..., a, b] * sens[..., b, j]
        total = total + weights[j] * d
    return np.where(total < 0.0, 0.0, total)


def propagate(
    model: SystemModel, state: AugmentedState, u, params: ParameterVector
) -> AugmentedState:
    """One exact transition of the augmented state under input ``u``."""
    u = np.atleast_1d(np.asarray(u, dtype=np.float64))
    model.validate_input(u)
    nxt = np.asarray(model.step(state.state, u, params), dtype=np.float64)
    jac_x = model.jac_x(state.state, u, params)
    jac_theta = model.jac_theta(state.state, u, params)
    return AugmentedState(nxt, sens_transition(jac_x, jac_theta, state.sens))


def _canonical_inputs(inputs, m: int) -> np.ndarray:
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim == 1:
        inputs = inputs[:, None]
    if inputs.ndim != 2 or inputs.shape[1] != m or inputs.shape[0] < 1:
        raise DomainError(f"inputs must have shape (N+1, {m})")
    return inputs


def simulate(model: SystemModel, params: ParameterVector, inputs) -> Trajectory:
    """Roll the state and sensitivity forward under a fixed input sequence."""
    inputs = _canonical_inputs(inputs, model.m)
    horizon = inputs.shape[0] - 1
    xs = np.empty((horizon + 1, model.n))
    sens = np.empty((horizon + 1, model.n, model.p))
    xs[0] = np.asarray(model.initial_state(params), dtype=np.float64)
    sens[0] = np.asarray(model.initial_sensitivity(params), dtype=np.float64)
    current = AugmentedState(xs[0], sens[0])
    for t in range(horizon):
        try:
            current = propagate(model, current, inputs[t], params)
        except DomainError as err:
            raise DomainError(f"step {t}: {err}") from err
        if not (
            np.all(np.isfinite(current.state)) and np.all(np.isfinite(current.sens))
        ):
            raise NumericError("propagation produced non-finite values", stage=t + 1)
        xs[t + 1] = current.state
        sens[t + 1] = current.sens
    return Trajectory(xs, sens, inputs)


def stage_reward(obs: ObservationModel, state: AugmentedState, u, weights=None) -> float:
    """Information gathered by the observation at one stage."""
    u = np.atleast_1d(np.asarray(u, dtype=np.float64))
    info = obs.info(state.state, u)
    return float(quadratic_form_trace(state.sens, info, weights))


def total_fisher_information(
    model: SystemModel,
    obs: ObservationModel,
    traj: Trajectory,
    weights=None,
) -> InformationMatrix:
    """Total information the whole observed trajectory carries about the parameters.

    Stage contributions ``sens.T @ info @ sens`` are summed in ascending
    stage order and the result symmetrized.  The stagewise trace is
    accumulated alongside with :func:`stage_reward`'s exact arithmetic.
    """
    p = model.p
    weights = _resolve_weights(weights, p)
    matrix = np.zeros((p, p))
    running_trace = 0.0
    for t in range(traj.horizon + 1):
        info = np.asarray(obs.info(traj.xs[t], traj.inputs[t]), dtype=np.float64)
        sens = traj.sens[t]
        contrib = np.empty((p, p))
        for i in range(p):
            for j in range(p):
                acc = 0.0
                for a in range(model.n):
                    for b in range(model.n):
                        acc = acc + sens[a, i] * info[a, b] * sens[b, j]
                contrib[i, j] = acc
        matrix = matrix + contrib
        running_trace = running_trace + float(
            quadratic_form_trace(sens, info, weights)
        )
    matrix = 0.5 * (matrix + matrix.T)
    return InformationMatrix(matrix, stage_trace=running_trace, stage_weights=weights)


def trace_objective(info, weights=None) -> float:
    """Weighted trace of an information matrix.

    For a matrix assembled by :func:`total_fisher_information` under the
    same weighting this returns the exact stagewise accumulation, making
    the objective bit-exactly additive over stages.
    """
    if isinstance(info, InformationMatrix):
        matrix = info.matrix
        weights_arr = _resolve_weights(weights, matrix.shape[0])
        if info.stage_trace is not None and np.array_equal(
            info.stage_weights, weights_arr
        ):
            return info.stage_trace
    else:
        matrix = np.asarray(info, dtype=np.float64)
        weights_arr = _resolve_weights(weights, matrix.shape[0])
    acc = 0.0
    for j in range(matrix.shape[0]):
        acc = acc + weights_arr[j] * matrix[j, j]
    return float(acc)


def trajectory_objective(
    model: SystemModel, obs: ObservationModel, traj: Trajectory, weights=None
) -> float:
    """Objective of a fixed input sequence: trace of its total information."""
    return trace_objective(
        total_fisher_information(model, obs, traj, weights), weights
    )
