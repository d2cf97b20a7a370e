"""Backward induction over the augmented-state grid and policy rollout.

The finite-horizon maximization of the trace objective is solved on a
rectangular grid: at each stage and node, every candidate input is
scored as stage reward plus the interpolated next-stage value, and the
best candidate (earliest index on ties) is recorded.  Rollout then
evaluates the stored policies along the exactly propagated trajectory,
reading each stage's policy at the nearest grid node.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from . import backends
from .errors import ConfigError, DomainError, NumericError
from .grids import GridSpec, nearest_node
from .models import ParameterVector, SystemModel
from .observations import ObservationModel
from .sensitivity import (
    AugmentedState,
    Trajectory,
    _resolve_weights,
    propagate,
    quadratic_form_trace,
    sens_transition,
    simulate,
    trajectory_objective,
)

__all__ = [
    "InputGrid",
    "ValueTable",
    "PolicyTable",
    "InductionResult",
    "DesignResult",
    "interpolate",
    "backward_induction",
    "rollout",
    "auto_grid_bounds",
    "solve",
]


@dataclass(frozen=True)
class InputGrid:
    """Finite candidate set searched at every stage; index order breaks ties."""

    candidates: np.ndarray  # (q, m)

    def __post_init__(self):
        cands = np.asarray(self.candidates, dtype=np.float64)
        if cands.ndim == 1:
            cands = cands[:, None]
        if cands.ndim != 2 or cands.shape[0] < 1:
            raise ConfigError("input grid needs at least one candidate")
        if not np.all(np.isfinite(cands)):
            raise ConfigError("input candidates must be finite")
        cands = cands.copy()
        cands.flags.writeable = False
        object.__setattr__(self, "candidates", cands)

    @classmethod
    def uniform(cls, lo: float, hi: float, count: int, extra=()) -> "InputGrid":
        """Evenly spaced scalar candidates on [lo, hi], then any extras appended."""
        if count < 1:
            raise ConfigError("input grid needs at least one candidate")
        base = np.linspace(lo, hi, count) if count > 1 else np.array([lo])
        return cls(np.concatenate([base, np.asarray(extra, dtype=np.float64)]))

    @property
    def size(self) -> int:
        return int(self.candidates.shape[0])


@dataclass(frozen=True)
class ValueTable:
    """Flat best-attainable-information table for one stage."""

    stage: int
    values: np.ndarray


@dataclass(frozen=True)
class PolicyTable:
    """Flat argmax candidate index per node for one stage."""

    stage: int
    choices: np.ndarray


@dataclass(frozen=True)
class InductionResult:
    values: tuple[ValueTable, ...]
    policies: tuple[PolicyTable, ...]
    clamp_counts: tuple[int, ...]
    runtime_s: float
    backend: str

    def __iter__(self):
        return iter((self.values, self.policies))


@dataclass(frozen=True)
class DesignResult:
    """Optimal input sequence with its realized trajectory and exact objective."""

    inputs: np.ndarray  # (N+1, m)
    trajectory: Trajectory
    objective: float
    grid: GridSpec
    runtime_s: float
    offgrid_stages: tuple[int, ...] = ()
    stage_clamp_counts: tuple[int, ...] = ()
    backend: str = ""


def interpolate(table, grid: GridSpec, point):
    """Multilinear interpolation of a stage table at one point (or many).

    Points outside the grid are clamped to its boundary.  Exact at nodes.
    """
    values = np.asarray(table.values if isinstance(table, ValueTable) else table,
                        dtype=np.float64).reshape(-1)
    if values.size != grid.node_count:
        raise ConfigError("table size does not match the grid")
    point = np.asarray(point, dtype=np.float64)
    single = point.ndim == 1
    backend = backends.get_backend()
    out, _ = backend.interp_clamped(
        values, point, grid.los, grid.his, grid.inv_steps, grid.npts, grid.strides
    )
    return float(out[0]) if single else out


def _validate_setup(model: SystemModel, grid: GridSpec, input_grid: InputGrid, horizon: int):
    if horizon < 0:
        raise ConfigError(f"horizon must be nonnegative, got {horizon}")
    if grid.dim != model.n + model.n * model.p:
        raise ConfigError(
            f"grid has {grid.dim} axes but the augmented state needs "
            f"{model.n + model.n * model.p}"
        )
    if input_grid.candidates.shape[1] != model.m:
        raise ConfigError(
            f"input candidates have {input_grid.candidates.shape[1]} columns, "
            f"model expects {model.m}"
        )
    for cand in input_grid.candidates:
        try:
            model.validate_input(cand)
        except DomainError as err:
            raise ConfigError(f"inadmissible input candidate {cand}: {err}") from err


def _propagated_points(model, params, node_x, node_s, u, out):
    """Fill ``out`` with the propagated augmented-state coordinates of all nodes."""
    n, p = model.n, model.p
    nxt = model.step(node_x, u, params)
    nxt_sens = sens_transition(
        model.jac_x(node_x, u, params), model.jac_theta(node_x, u, params), node_s
    )
    out[:, :n] = nxt
    out[:, n:] = nxt_sens.reshape(-1, n * p)
    return out


def backward_induction(
    model: SystemModel,
    obs: ObservationModel,
    params: ParameterVector,
    grid: GridSpec,
    input_grid: InputGrid,
    horizon: int,
    weights=None,
    workers: int | None = None,
    keep_values: bool = True,
) -> InductionResult:
    """Compute value and policy tables for stages ``0..horizon``.

    The terminal stage maximizes the bare stage reward (a no-op max for
    input-independent observation models); interior stages add the
    interpolated continuation value.  With ``keep_values=False`` only the
    stage-0 value table is retained.
    """
    started = time.perf_counter()
    _validate_setup(model, grid, input_grid, horizon)
    weights_arr = _resolve_weights(weights, model.p)
    backends.set_workers(workers)
    backend = backends.get_backend()

    n, p = model.n, model.p
    node_x, node_s = grid.node_states(n, p)
    node_x = np.ascontiguousarray(node_x)
    node_s = np.ascontiguousarray(node_s)
    n_nodes = grid.node_count
    candidates = np.ascontiguousarray(input_grid.candidates)
    theta = params.values.copy()

    fused = None
    if backend.SUPPORTS_FUSED:
        model_kernel = model.elementwise_kernel()
        obs_kernel = obs.elementwise_kernel()
        if model_kernel is not None and obs_kernel is not None:
            fused = backend.make_fused_sweep(model_kernel, obs_kernel)

    values_by_stage: list[ValueTable | None] = [None] * (horizon + 1)
    policies: list[PolicyTable | None] = [None] * (horizon + 1)
    clamp_counts = [0] * (horizon + 1)
    values_next = None
    points = None if fused is not None else np.empty((n_nodes, grid.dim))

    for stage in range(horizon, -1, -1):
        best_val = np.full(n_nodes, -np.inf)
        best_arg = np.full(n_nodes, -1, dtype=np.int32)
        has_next = values_next is not None
        if fused is not None:
            outside, nonfinite = fused(
                node_x,
                node_s,
                candidates,
                theta,
                values_next if has_next else np.zeros(1),
                has_next,
                grid.los,
                grid.his,
                grid.inv_steps,
                grid.npts,
                grid.strides,
                weights_arr,
                best_val,
                best_arg,
            )
            if nonfinite:
                raise NumericError(
                    f"{nonfinite} propagated grid points were non-finite", stage=stage
                )
            clamp_counts[stage] = int(outside)
        else:
            for j in range(input_grid.size):
                u = candidates[j]
                rewards = quadratic_form_trace(node_s, obs.info(node_x, u), weights_arr)
                if has_next:
                    _propagated_points(model, params, node_x, node_s, u, points)
                    if not np.all(np.isfinite(points)):
                        raise NumericError(
                            "propagated grid points were non-finite", stage=stage
                        )
                    vals, outside = backend.interp_clamped(
                        values_next,
                        points,
                        grid.los,
                        grid.his,
                        grid.inv_steps,
                        grid.npts,
                        grid.strides,
                    )
                    clamp_counts[stage] += int(outside)
                    totals = rewards + vals
                else:
                    totals = rewards
                better = totals > best_val
                best_val[better] = totals[better]
                best_arg[better] = j
        policies[stage] = PolicyTable(stage, best_arg)
        if keep_values or stage == 0:
            values_by_stage[stage] = ValueTable(stage, best_val)
        values_next = best_val

    runtime = time.perf_counter() - started
    kept = tuple(v for v in values_by_stage if v is not None)
    return InductionResult(
        values=kept,
        policies=tuple(policies),
        clamp_counts=tuple(clamp_counts),
        runtime_s=runtime,
        backend=backend.NAME,
    )


def rollout(
    model: SystemModel,
    obs: ObservationModel,
    params: ParameterVector,
    policies,
    grid: GridSpec,
    input_grid: InputGrid,
    weights=None,
) -> DesignResult:
    """Realize the stored policies from the model's initial augmented state.

    Policies are read at the nearest grid node to the exactly propagated
    continuous state; stages where that state left the grid are reported.
    """
    started = time.perf_counter()
    policies = list(policies)
    horizon = len(policies) - 1
    n, p, m = model.n, model.p, model.m
    xs = np.empty((horizon + 1, n))
    sens = np.empty((horizon + 1, n, p))
    inputs = np.empty((horizon + 1, m))
    current = AugmentedState(
        np.asarray(model.initial_state(params), dtype=np.float64),
        np.asarray(model.initial_sensitivity(params), dtype=np.float64),
    )
    offgrid = []
    for stage in range(horizon + 1):
        xs[stage] = current.state
        sens[stage] = current.sens
        flat, outside = nearest_node(grid, current.flat())
        if outside:
            offgrid.append(stage)
        choice = int(policies[stage].choices[flat])
        if choice < 0:
            raise ConfigError(f"policy table for stage {stage} holds no decision")
        inputs[stage] = input_grid.candidates[choice]
        if stage < horizon:
            current = propagate(model, current, inputs[stage], params)
            if not (
                np.all(np.isfinite(current.state)) and np.all(np.isfinite(current.sens))
            ):
                raise NumericError("rollout produced non-finite state", stage=stage + 1)
    traj = Trajectory(xs, sens, inputs)
    objective = trajectory_objective(model, obs, traj, weights)
    return DesignResult(
        inputs=traj.inputs,
        trajectory=traj,
        objective=objective,
        grid=grid,
        runtime_s=time.perf_counter() - started,
        offgrid_stages=tuple(offgrid),
    )


def auto_grid_bounds(
    model: SystemModel,
    params: ParameterVector,
    input_grid: InputGrid,
    horizon: int,
    pilot_count: int = 64,
    seed: int = 0,
    points: int = 100,
    expand: float = 0.5,
) -> GridSpec:
    """Bound the grid by the envelope of pilot trajectories.

    Simulates every constant-input sequence from the candidate set plus
    ``pilot_count`` random candidate sequences, takes the per-dimension
    envelope of visited augmented states, widens it by ``expand`` (half
    on each side), enforces a minimum width of 10% of the envelope
    magnitude, and clamps state-dimension lower bounds at zero for
    nonnegative-state models.
    """
    if pilot_count < 1:
        raise ConfigError(f"pilot_count must be at least 1, got {pilot_count}")
    rng = np.random.default_rng(seed)
    q = input_grid.size
    sequences = [np.repeat(input_grid.candidates[j : j + 1], horizon + 1, axis=0) for j in range(q)]
    for _ in range(pilot_count):
        picks = rng.integers(0, q, size=horizon + 1)
        sequences.append(input_grid.candidates[picks])

    dim = model.n + model.n * model.p
    env_lo = np.full(dim, np.inf)
    env_hi = np.full(dim, -np.inf)
    for seq in sequences:
        traj = simulate(model, params, seq)
        coords = np.concatenate(
            [traj.xs, traj.sens.reshape(traj.xs.shape[0], -1)], axis=1
        )
        env_lo = np.minimum(env_lo, coords.min(axis=0))
        env_hi = np.maximum(env_hi, coords.max(axis=0))

    los = np.empty(dim)
    his = np.empty(dim)
    for d in range(dim):
        lo, hi = env_lo[d], env_hi[d]
        pad = 0.5 * expand * (hi - lo)
        lo, hi = lo - pad, hi + pad
        min_width = 0.1 * max(abs(env_lo[d]), abs(env_hi[d]))
        if min_width == 0.0:
            min_width = 1.0
        if hi - lo < min_width:
            center = 0.5 * (lo + hi)
            lo = center - 0.5 * min_width
            hi = center + 0.5 * min_width
        if model.nonnegative_state and d < model.n:
            lo = max(lo, 0.0)
        los[d] = lo
        his[d] = hi
    return GridSpec.from_bounds(los, his, points)


def solve(
    model: SystemModel,
    obs: ObservationModel,
    params: ParameterVector,
    input_grid: InputGrid,
    horizon: int,
    grid: GridSpec | None = None,
    weights=None,
    pilot_count: int = 64,
    seed: int = 0,
    grid_points: int = 100,
    workers: int | None = None,
    keep_values: bool = False,
):
    """End-to-end design: auto grid bounds (unless given), induction, rollout.

    Returns ``(DesignResult, InductionResult)``.
    """
    started = time.perf_counter()
    if grid is None:
        grid = auto_grid_bounds(
            model, params, input_grid, horizon,
            pilot_count=pilot_count, seed=seed, points=grid_points,
        )
    induction = backward_induction(
        model, obs, params, grid, input_grid, horizon,
        weights=weights, workers=workers, keep_values=keep_values,
    )
    result = rollout(model, obs, params, induction.policies, grid, input_grid, weights)
    result = replace(
        result,
        runtime_s=time.perf_counter() - started,
        stage_clamp_counts=induction.clamp_counts,
        backend=induction.backend,
    )
    return result, induction
