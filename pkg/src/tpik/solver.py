"""Singularity-robust task-priority velocity solver.

Each control tick solves the active hierarchy with null-space composition:
the first task's velocity is taken whole, every later task contributes
only through the null-space projector of everything stacked above it.
Set-based tasks enter and leave the hierarchy here: a task beyond one of
its activation thresholds is pinned to the matching safety boundary as a
temporary equality task, and is released again only when the solution
computed without it would push the task value back into the valid set.

Damping follows a three-regime schedule driven by the smallest singular
value of the stacked Jacobian, so solutions stay bounded through
singularities at the cost of a little tracking accuracy near them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from tpik.kinematics import ArmModel, Chain
from tpik.tasks import (
    DegenerateDistanceError,
    Measurements,
    TaskEvaluation,
    TaskSpec,
    evaluate_task,
    may_deactivate,
    set_based_desired,
)


class RankDeficiencyError(ValueError):
    """Exact pseudoinverse requested for a row-rank-deficient Jacobian."""


@dataclass
class SolverParams:
    qdot_max: float = 1.5
    epsilon_default: float = 0.05
    max_active_set_iterations: int = 4
    singular_value_floor: float = 1e-8
    rank_condition_limit: float = 1e12

    def __post_init__(self):
        if self.qdot_max <= 0.0:
            raise ValueError("qdot_max must be positive")
        if self.max_active_set_iterations < 1:
            raise ValueError("max_active_set_iterations must be >= 1")
        if self.singular_value_floor <= 0.0:
            raise ValueError("singular_value_floor must be positive")


@dataclass
class SolverState:
    """Cross-tick bookkeeping: which set-based tasks ended the tick active."""

    active: dict[int, bool] = field(default_factory=dict)


@dataclass
class LevelDiagnostics:
    spec_index: int
    lambda_used: float
    sigma_min: float
    error_norm: float


@dataclass
class SolverOutput:
    qdot: np.ndarray
    active: list[bool]
    lambdas: list[float]
    sigma_mins: list[float]
    sigmas: list[np.ndarray | None]
    emergency_stop: bool = False
    saturated: bool = False
    nsb_calls: int = 0


def pseudoinverse(jacobian: np.ndarray) -> np.ndarray:
    """Right pseudoinverse J^T (J J^T)^-1; needs full row rank."""
    jac = np.atleast_2d(np.asarray(jacobian, dtype=float))
    gram = jac @ jac.T
    svals = np.linalg.svd(gram, compute_uv=False)
    if svals[-1] <= 0.0 or svals[0] / svals[-1] > 1e12:
        raise RankDeficiencyError(
            f"Jacobian gram matrix condition {svals[0]:.3e}/{svals[-1]:.3e} "
            "exceeds the exact-inverse range"
        )
    return np.linalg.solve(gram, jac).T


def dls_pseudoinverse(jacobian: np.ndarray, lam: float) -> np.ndarray:
    """Damped right pseudoinverse J^T (J J^T + lambda^2 I)^-1."""
    if lam < 0.0:
        raise ValueError("damping factor must be non-negative")
    jac = np.atleast_2d(np.asarray(jacobian, dtype=float))
    gram = jac @ jac.T + (lam * lam) * np.eye(jac.shape[0])
    return np.linalg.solve(gram, jac).T


def damping_factor(sigma_min: float, error_norm: float, qdot_max: float) -> float:
    """Damping schedule: zero far from singularity, capped near it.

    The reference scale sigma_star = error_norm / qdot_max is the singular
    value below which an undamped solve would exceed the velocity budget.
    """
    if qdot_max <= 0.0:
        raise ValueError("qdot_max must be positive")
    if error_norm < 0.0 or sigma_min < 0.0:
        raise ValueError("sigma_min and error_norm must be non-negative")
    sigma_star = error_norm / qdot_max
    if sigma_min >= sigma_star:
        return 0.0
    if sigma_min >= 0.5 * sigma_star:
        return float(np.sqrt(sigma_min * (sigma_star - sigma_min)))
    return 0.5 * sigma_star


def _gain_matrix(gain, m: int) -> np.ndarray:
    gain = np.asarray(gain, dtype=float)
    if gain.ndim == 0:
        return float(gain) * np.eye(m)
    if gain.shape == (m,):
        return np.diag(gain)
    raise ValueError(f"gain must be a scalar or a length-{m} vector")


def clik_velocity(evaluation: TaskEvaluation, gain, lam: float = 0.0) -> np.ndarray:
    """Closed-loop velocity of a single task: J# (sigma_d_dot + K error)."""
    kmat = _gain_matrix(gain, evaluation.sigma.shape[0])
    reference = evaluation.sigma_d_dot + kmat @ evaluation.error
    return dls_pseudoinverse(evaluation.jacobian, lam) @ reference


def null_projector(jacobian_stack: np.ndarray, floor: float = 1e-8) -> np.ndarray:
    """Orthogonal projector onto the null space of the stacked Jacobian.

    Built from the SVD with singular values at or below ``floor`` treated
    as zero, so the projector identities hold even for rank-deficient
    stacks.
    """
    stack = np.atleast_2d(np.asarray(jacobian_stack, dtype=float))
    n = stack.shape[1]
    _, svals, vt = np.linalg.svd(stack, full_matrices=False)
    rank = int(np.count_nonzero(svals > floor))
    if rank == 0:
        return np.eye(n)
    vr = vt[:rank]
    return np.eye(n) - vr.T @ vr


def _solve_velocity(jacobian: np.ndarray, reference: np.ndarray, lam: float,
                    floor: float) -> np.ndarray:
    """Task solve used inside the hierarchy; rank-safe when undamped."""
    if lam > 0.0:
        return dls_pseudoinverse(jacobian, lam) @ reference
    u, svals, vt = np.linalg.svd(jacobian, full_matrices=False)
    inv = np.where(svals > floor, 1.0 / np.where(svals > floor, svals, 1.0), 0.0)
    return vt.T @ (inv * (u.T @ reference))


@dataclass
class Level:
    """One hierarchy level handed to nsb_solve."""

    evaluation: TaskEvaluation
    gain: float
    spec_index: int = -1


def nsb_solve(levels: Sequence[Level], params: SolverParams,
              n_joints: int | None = None) -> tuple[np.ndarray, list[LevelDiagnostics]]:
    """Null-space composition over the ordered hierarchy levels.

    Returns the raw (unsaturated) joint velocity and per-level
    diagnostics.  The damping factor of each level is driven by the
    smallest singular value of the Jacobians stacked from the top down to
    that level, which also captures conflicts between levels.
    """
    if not levels:
        if n_joints is None:
            raise ValueError("empty hierarchy needs n_joints")
        return np.zeros(n_joints), []
    n = levels[0].evaluation.jacobian.shape[1]
    qdot = np.zeros(n)
    projector = np.eye(n)
    stack = None
    diagnostics = []
    for level in levels:
        ev = level.evaluation
        kmat = _gain_matrix(level.gain, ev.sigma.shape[0])
        error = ev.error
        reference = ev.sigma_d_dot + kmat @ error
        stack = ev.jacobian if stack is None else np.vstack([stack, ev.jacobian])
        sigma_min = float(np.linalg.svd(stack, compute_uv=False)[-1])
        lam = damping_factor(sigma_min, float(np.linalg.norm(error)), params.qdot_max)
        qdot_level = _solve_velocity(ev.jacobian, reference, lam, params.singular_value_floor)
        qdot = qdot + projector @ qdot_level
        diagnostics.append(
            LevelDiagnostics(
                spec_index=level.spec_index,
                lambda_used=lam,
                sigma_min=sigma_min,
                error_norm=float(np.linalg.norm(error)),
            )
        )
        projector = null_projector(stack, params.singular_value_floor)
    return qdot, diagnostics


def saturate(qdot: np.ndarray, qdot_max: float) -> tuple[np.ndarray, bool]:
    """Uniform scaling onto the velocity-norm budget; direction preserved."""
    norm = float(np.linalg.norm(qdot))
    if norm > qdot_max:
        return qdot * (qdot_max / norm), True
    return qdot, False


def solve_tick(specs: Sequence[TaskSpec], model: ArmModel, q, measurements: Measurements,
               state: SolverState | None = None,
               params: SolverParams | None = None) -> SolverOutput:
    """One control tick: evaluate, pick the active set, compose, saturate.

    The active set starts from every set-based task beyond an activation
    threshold.  Tasks are then released one at a time, in hierarchy order,
    whenever the solution computed without them already moves their value
    back into the valid set; the released solve is reused as the new
    solution, so the whole tick needs at most one nsb_solve call per
    set-based task plus one.

    A degenerate obstacle distance turns the tick into an emergency stop
    with zero velocity.
    """
    params = params or SolverParams()
    state = state if state is not None else SolverState()
    specs = list(specs)
    chain = Chain(model, q)

    evaluations: list[TaskEvaluation | None] = []
    try:
        for spec in specs:
            evaluations.append(evaluate_task(spec, model, q, measurements, chain=chain))
    except DegenerateDistanceError:
        return SolverOutput(
            qdot=np.zeros(model.n),
            active=[state.active.get(i, False) if s.is_set_based else True
                    for i, s in enumerate(specs)],
            lambdas=[0.0] * len(specs),
            sigma_mins=[0.0] * len(specs),
            sigmas=[None] * len(specs),
            emergency_stop=True,
        )

    candidates: list[int] = []
    for i, (spec, ev) in enumerate(zip(specs, evaluations)):
        if spec.is_set_based and ev is not None:
            if spec.thresholds.beyond_activation(float(ev.sigma[0])):
                candidates.append(i)

    def build_levels(active: Sequence[int]) -> list[Level]:
        levels = []
        for i, (spec, ev) in enumerate(zip(specs, evaluations)):
            if ev is None:
                continue
            if spec.is_set_based:
                if i not in active:
                    continue
                desired = set_based_desired(float(ev.sigma[0]), spec.thresholds)
                pinned = TaskEvaluation(
                    sigma=ev.sigma,
                    jacobian=ev.jacobian,
                    sigma_d=np.array([desired]),
                    sigma_d_dot=ev.sigma_d_dot,
                )
                levels.append(Level(pinned, spec.gain_value, i))
            else:
                levels.append(Level(ev, spec.gain_value, i))
        return levels

    active = list(candidates)
    budget = len(candidates) + 1
    qdot, diags = nsb_solve(build_levels(active), params, n_joints=model.n)
    calls = 1

    for _ in range(params.max_active_set_iterations):
        released = None
        for k in list(active):
            if calls >= budget:
                break
            trial_active = [i for i in active if i != k]
            trial_qdot, trial_diags = nsb_solve(
                build_levels(trial_active), params, n_joints=model.n
            )
            calls += 1
            ev = evaluations[k]
            if may_deactivate(float(ev.sigma[0]), ev.jacobian[0], trial_qdot,
                              specs[k].thresholds):
                released = k
                active = trial_active
                qdot, diags = trial_qdot, trial_diags
                break
        if released is None or calls >= budget:
            break

    qdot, was_saturated = saturate(qdot, params.qdot_max)

    lambdas = [0.0] * len(specs)
    sigma_mins = [0.0] * len(specs)
    for diag in diags:
        if diag.spec_index >= 0:
            lambdas[diag.spec_index] = diag.lambda_used
            sigma_mins[diag.spec_index] = diag.sigma_min

    flags = []
    for i, spec in enumerate(specs):
        flags.append(i in active if spec.is_set_based else True)
        if spec.is_set_based:
            state.active[i] = flags[-1]

    return SolverOutput(
        qdot=qdot,
        active=flags,
        lambdas=lambdas,
        sigma_mins=sigma_mins,
        sigmas=[ev.sigma.copy() if ev is not None else None for ev in evaluations],
        emergency_stop=False,
        saturated=was_saturated,
        nsb_calls=calls,
    )
