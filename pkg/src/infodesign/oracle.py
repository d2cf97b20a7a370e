"""Independent ground-truth generators for testing the solver and its inputs.

Everything here deliberately avoids the code paths it checks: exhaustive
enumeration certifies the dynamic program, central differences check the
analytic sensitivities, Monte Carlo score statistics check the assembled
information matrix, and a probability-mass series checks the closed-form
Poisson information.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import BudgetError, DomainError
from .models import ParameterVector, SystemModel
from .observations import ObservationModel
from .sensitivity import (
    _resolve_weights,
    quadratic_form_trace,
    sens_transition,
    simulate,
    trajectory_objective,
)
from .solver import InputGrid

__all__ = [
    "OracleReport",
    "MonteCarloFisher",
    "exhaustive_search",
    "fd_sensitivity",
    "monte_carlo_fisher",
    "poisson_info_series",
]

DEFAULT_SEQUENCE_BUDGET = 10**7

_CHUNK = 250_000


@dataclass(frozen=True)
class OracleReport:
    """Best input sequence by brute force, optionally compared to a solver run."""

    best_inputs: np.ndarray  # (N+1, m)
    best_objective: float
    sequences_evaluated: int
    dp_objective: float | None = None
    ratio: float | None = None


@dataclass(frozen=True)
class MonteCarloFisher:
    """Empirical information estimate from simulated observation trajectories."""

    estimate: np.ndarray  # (p, p)
    standard_errors: np.ndarray  # (p, p)
    mean_score: np.ndarray  # (p,)
    mean_score_se: np.ndarray  # (p,)
    sample_count: int
    seed: int


def exhaustive_search(
    model: SystemModel,
    obs: ObservationModel,
    params: ParameterVector,
    input_grid: InputGrid,
    horizon: int,
    weights=None,
    budget: int = DEFAULT_SEQUENCE_BUDGET,
    dp_objective: float | None = None,
) -> OracleReport:
    """Evaluate every candidate-index sequence by exact simulation.

    Returns the lexicographically smallest argmax (candidate index,
    earliest stage most significant).  Chunked so memory stays bounded;
    the accumulation order per sequence matches the canonical objective,
    so the reported optimum equals ``trajectory_objective`` of the winner
    bit for bit.
    """
    q = input_grid.size
    total = q ** (horizon + 1)
    if total > budget:
        raise BudgetError(required=total, budget=budget)
    weights_arr = _resolve_weights(weights, model.p)
    candidates = input_grid.candidates

    best_obj = -np.inf
    best_seq = 0
    n, p = model.n, model.p
    x0 = np.asarray(model.initial_state(params), dtype=np.float64)
    s0 = np.asarray(model.initial_sensitivity(params), dtype=np.float64)
    for start in range(0, total, _CHUNK):
        stop = min(start + _CHUNK, total)
        seq_ids = np.arange(start, stop, dtype=np.int64)
        batch = stop - start
        xs = np.broadcast_to(x0, (batch, n)).copy()
        sens = np.broadcast_to(s0, (batch, n, p)).copy()
        objective = np.zeros(batch)
        for t in range(horizon + 1):
            cand_idx = (seq_ids // q ** (horizon - t)) % q
            # group sequences sharing this stage's candidate so the model is
            # evaluated once per candidate value
            for j in np.unique(cand_idx):
                sel = cand_idx == j
                u = candidates[j]
                info = obs.info(xs[sel], u)
                objective[sel] = objective[sel] + quadratic_form_trace(
                    sens[sel], info, weights_arr
                )
                if t < horizon:
                    nxt = model.step(xs[sel], u, params)
                    sens[sel] = sens_transition(
                        model.jac_x(xs[sel], u, params),
                        model.jac_theta(xs[sel], u, params),
                        sens[sel],
                    )
                    xs[sel] = nxt
        arg = int(np.argmax(objective))
        if objective[arg] > best_obj:
            best_obj = float(objective[arg])
            best_seq = start + arg

    picks = [(best_seq // q ** (horizon - t)) % q for t in range(horizon + 1)]
    best_inputs = candidates[picks]
    traj = simulate(model, params, best_inputs)
    best_objective = trajectory_objective(model, obs, traj, weights_arr)
    ratio = None
    if dp_objective is not None:
        if best_objective == 0.0:
            ratio = 1.0 if dp_objective == 0.0 else np.inf
        else:
            ratio = dp_objective / best_objective
    return OracleReport(
        best_inputs=best_inputs,
        best_objective=best_objective,
        sequences_evaluated=total,
        dp_objective=dp_objective,
        ratio=ratio,
    )


def fd_sensitivity(model: SystemModel, params: ParameterVector, inputs, rel_step: float = 1e-6):
    """Central-difference sensitivities of the state trajectory, ``(N+1, n, p)``.

    The step is relative to each parameter's magnitude, falling back to
    an absolute step for parameters at exactly zero.
    """
    if rel_step <= 0.0:
        raise DomainError(f"step must be positive, got {rel_step}")
    base_traj = simulate(model, params, inputs)
    horizon = base_traj.horizon
    out = np.empty((horizon + 1, model.n, model.p))
    for i in range(model.p):
        base = params.values[i]
        if base != 0.0:
            delta = rel_step * base
        else:
            delta = rel_step
        hi = simulate(model, params.replaced(i, base + delta), inputs)
        lo = simulate(model, params.replaced(i, base - delta), inputs)
        out[:, :, i] = (hi.xs - lo.xs) / (2.0 * delta)
    return out


def monte_carlo_fisher(
    model: SystemModel,
    obs: ObservationModel,
    params: ParameterVector,
    inputs,
    sample_count: int,
    seed: int = 0,
) -> MonteCarloFisher:
    """Empirical covariance of the full-trajectory parameter score.

    Observations are drawn independently at each stage of the (fixed,
    deterministic) trajectory; the parameter score chains the state score
    through the propagated sensitivities.  Standard errors are jackknife
    values, which for a plain mean reduce to the usual ``sd/sqrt(B)``.
    """
    if sample_count < 1:
        raise DomainError(f"sample_count must be at least 1, got {sample_count}")
    rng = np.random.default_rng(seed)
    traj = simulate(model, params, inputs)
    n, p = model.n, model.p
    scores = np.zeros((sample_count, p))
    for t in range(traj.horizon + 1):
        draws = obs.sample(traj.xs[t], traj.inputs[t], rng, size=sample_count)
        state_score = np.asarray(obs.score_x(traj.xs[t], traj.inputs[t], draws))
        state_score = state_score.reshape(sample_count, n)
        for i in range(n):
            for j in range(p):
                scores[:, j] += traj.sens[t, i, j] * state_score[:, i]

    estimate = np.empty((p, p))
    errors = np.empty((p, p))
    denom = np.sqrt(sample_count)
    for i in range(p):
        for j in range(p):
            prod = scores[:, i] * scores[:, j]
            estimate[i, j] = prod.mean()
            errors[i, j] = (prod.std(ddof=1) if sample_count > 1 else 0.0) / denom
    mean_score = scores.mean(axis=0)
    mean_score_se = (
        scores.std(axis=0, ddof=1) if sample_count > 1 else np.zeros(p)
    ) / denom
    return MonteCarloFisher(
        estimate=estimate,
        standard_errors=errors,
        mean_score=mean_score,
        mean_score_se=mean_score_se,
        sample_count=sample_count,
        seed=seed,
    )


def poisson_info_series(lam: float, truncation: int) -> float:
    """Poisson rate information summed directly from the probability mass.

    Independent of the closed form it checks: sums ``pmf(y) * (y/lam - 1)^2``
    up to ``truncation`` and warns when the neglected tail mass exceeds
    1e-12.
    """
    if lam <= 0.0:
        raise DomainError(f"rate must be positive, got {lam}")
    ys = np.arange(truncation + 1)
    pmf = stats.poisson.pmf(ys, lam)
    tail = 1.0 - float(pmf.sum())
    if tail > 1e-12:
        warnings.warn(
            f"series truncated at {truncation} leaves tail mass {tail:.3e} > 1e-12",
            stacklevel=2,
        )
    return float(np.sum(pmf * (ys / lam - 1.0) ** 2))
