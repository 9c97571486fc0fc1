"""Randomized gradient-free minimization of the boundary distance g(theta)."""
import math
import warnings
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .boundary import (
    BoundaryDistance,
    SearchParams,
    evaluate_local,
    initialize_direction,
    initialize_random,
    unit,
)
from .domain import as_vector, clamp_to_domain
from .errors import (
    ContractError,
    GradientEstimationError,
    InitializationError,
    QueryBudgetExceeded,
)


class ReconstructionWarning(UserWarning):
    """The reconstructed example had to be clamped into the input domain."""


@dataclass(frozen=True)
class RgfConfig:
    beta: float = 0.005
    q: int = 20
    eta0: float = 0.2
    backtrack_factor: float = 0.5
    forward_factor: float = 2.0
    max_line_search_steps: int = 15
    query_budget: int = 10_000
    max_iterations: int = 100_000
    seed: int = 0
    distance_params: SearchParams = field(
        default_factory=lambda: SearchParams(tolerance=1e-3, relative=True)
    )
    final_tolerance: float = 1e-6
    beta_floor: float = 1e-4
    max_failures_at_floor: int = 10
    n_init_tries: int = 10
    n_random_init: int = 100
    polish_reserve: int = 64

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if self.q < 1:
            raise ValueError("q must be >= 1")
        if not self.eta0 > 0:
            raise ValueError("eta0 must be positive")
        if not 0 < self.backtrack_factor < 1:
            raise ValueError("backtrack_factor must lie in (0, 1)")
        if not self.forward_factor > 1:
            raise ValueError("forward_factor must exceed 1")
        if self.query_budget < 1:
            raise ValueError("query_budget must be positive")
        if not 0 < self.beta_floor <= self.beta:
            raise ValueError("beta_floor must lie in (0, beta]")

    def replace(self, **changes):
        return replace(self, **changes)


@dataclass(frozen=True)
class GradientEstimate:
    vector: np.ndarray
    queries_used: int
    dropped: int = 0


@dataclass(frozen=True)
class OptState:
    theta: np.ndarray
    g_value: float
    eta: float
    iteration: int = 0
    step_failed: bool = False
    queries_used: int = 0


class AttackStatus(str, Enum):
    CONVERGED = "converged"
    BUDGET_EXHAUSTED = "budget_exhausted"
    INIT_FAILED = "init_failed"


@dataclass
class AttackResult:
    x_star: np.ndarray | None
    theta_star: np.ndarray | None
    distortion: float
    total_queries: int
    iterations: int
    trace: list
    status: AttackStatus
    adversarial: bool = False
    final_found: bool = False
    dropped_samples: int = 0

    @property
    def success(self):
        return self.adversarial


def sample_gaussian_direction(d, rng):
    """i.i.d. standard normal vector of length ``d`` (not normalized)."""
    if d < 1:
        raise ValueError("dimension must be >= 1")
    return rng.standard_normal(d)


def estimate_gradient(dist_eval, theta, g_theta, config, rng):
    """Average of ``q`` one-sided Gaussian-direction difference estimates.

    ``dist_eval(theta, v_prev)`` returns a DistanceEval; samples whose
    evaluation finds no boundary are dropped from the average.
    """
    theta = np.asarray(theta, dtype=np.float64)
    beta = config.beta
    total = np.zeros_like(theta)
    used = 0
    kept = 0
    for _ in range(config.q):
        u = sample_gaussian_direction(theta.shape[0], rng)
        ev = dist_eval(theta + beta * u, g_theta)
        used += ev.queries_used
        if not ev.found:
            continue
        total += (ev.value - g_theta) / beta * u
        kept += 1
    if kept == 0:
        raise GradientEstimationError(f"all {config.q} perturbed directions lost the boundary")
    return GradientEstimate(total / kept, used, config.q - kept)


def line_search_step(dist_eval, state, grad, config):
    """Backtracking/forward-tracking step along ``-grad``.

    Starts from the carried step size; on a decrease keeps multiplying it by
    ``forward_factor`` while g strictly decreases, otherwise multiplies it by
    ``backtrack_factor`` until g decreases. With no decrease the state comes
    back unchanged with ``step_failed`` set.
    """
    g_vec = np.asarray(grad.vector, dtype=np.float64)
    if not np.any(g_vec):
        raise ContractError("line search needs a non-zero gradient estimate")
    used = 0

    def attempt(eta):
        nonlocal used
        step = state.theta - eta * g_vec
        if not np.any(step):
            return None
        theta = unit(step)
        ev = dist_eval(theta, state.g_value)
        used += ev.queries_used
        return (theta, ev.value) if ev.found else None

    eta = state.eta
    best = None
    trial = attempt(eta)
    if trial is not None and trial[1] < state.g_value:
        best = (eta, *trial)
        for _ in range(config.max_line_search_steps):
            eta = best[0] * config.forward_factor
            trial = attempt(eta)
            if trial is None or not trial[1] < best[2]:
                break
            best = (eta, *trial)
    else:
        for _ in range(config.max_line_search_steps):
            eta *= config.backtrack_factor
            trial = attempt(eta)
            if trial is not None and trial[1] < state.g_value:
                best = (eta, *trial)
                break
    if best is None:
        return replace(state, step_failed=True, queries_used=used)
    eta, theta, g = best
    return OptState(theta, g, eta, state.iteration, False, used)


def reconstruct_adversarial(x0, theta, g_value, bounds=None, warn=True):
    """``clamp(x0 + g_value * theta)`` for a unit-norm ``theta``."""
    theta = np.asarray(theta, dtype=np.float64)
    if abs(np.linalg.norm(theta) - 1.0) > 1e-9:
        raise ContractError("theta must be unit-norm")
    if not g_value > 0:
        raise ContractError("g_value must be positive")
    x0 = np.asarray(x0, dtype=np.float64)
    raw = x0 + g_value * theta
    x = clamp_to_domain(raw, bounds)
    if warn and not np.array_equal(x, raw):
        warnings.warn("reconstructed example lies outside the domain and was clamped",
                      ReconstructionWarning, stacklevel=2)
    return x


def rgf_attack(oracle, x0, pred, candidates=None, config=RgfConfig(), callback=None):
    """Find a small adversarial perturbation of ``x0`` with hard-label queries.

    Starts from the best candidate direction (or random directions when no
    candidates are given), then alternates gradient estimation and line
    search until the query budget or iteration cap is hit, or until steps
    keep failing with beta at its floor. The final distance is re-evaluated
    at ``config.final_tolerance``. ``callback(state)`` sees every accepted
    or rejected iterate and may return True to stop early.
    """
    x0 = as_vector(x0, oracle.dim, "x0")
    rng = np.random.default_rng(config.seed)
    start = oracle.query_count
    bounds = oracle.domain(x0.shape[0])

    def spent():
        return oracle.query_count - start

    with oracle.budget(config.query_budget):
        try:
            if candidates:
                theta, ev = initialize_direction(
                    oracle, x0, pred, candidates, config.n_init_tries, config.distance_params)
            else:
                theta, ev = initialize_random(
                    oracle, x0, pred, config.n_random_init, rng, config.distance_params)
        except InitializationError:
            return _empty_result(spent(), AttackStatus.INIT_FAILED)
        except QueryBudgetExceeded:
            return _empty_result(spent(), AttackStatus.BUDGET_EXHAUSTED)

        dist = BoundaryDistance(oracle, x0, pred, config.distance_params)
        state = OptState(theta, ev.value, config.eta0)
        trace = [(spent(), ev.value)]
        beta = config.beta
        streak = 0
        floor_failures = 0
        dropped = 0
        iteration = 0
        status = AttackStatus.CONVERGED
        while iteration < config.max_iterations:
            if spent() >= config.query_budget - config.polish_reserve:
                status = AttackStatus.BUDGET_EXHAUSTED
                break
            if beta != config.beta:
                # keep evaluation error proportional to beta as beta shrinks
                scale = beta / config.beta
                dist = BoundaryDistance(oracle, x0, pred, config.distance_params.with_tolerance(
                    config.distance_params.tolerance * scale, config.distance_params.relative))
            step_cfg = config if beta == config.beta else config.replace(beta=beta)
            try:
                grad = estimate_gradient(dist, state.theta, state.g_value, step_cfg, rng)
                dropped += grad.dropped
                if np.any(grad.vector):
                    new = line_search_step(dist, state, grad, config)
                else:
                    new = replace(state, step_failed=True)
            except GradientEstimationError:
                new = replace(state, step_failed=True)
            except QueryBudgetExceeded:
                status = AttackStatus.BUDGET_EXHAUSTED
                break
            iteration += 1
            if new.step_failed:
                streak += 1
                state = replace(state, iteration=iteration, step_failed=True)
                if streak >= 2:
                    if beta > config.beta_floor:
                        beta = max(beta / 2.0, config.beta_floor)
                    else:
                        floor_failures += 1
            else:
                state = replace(new, iteration=iteration)
                trace.append((spent(), state.g_value))
                streak = 0
                floor_failures = 0
            if callback is not None and callback(state):
                break
            if floor_failures >= config.max_failures_at_floor:
                break

        g_final = state.g_value
        final_found = False
        fine = config.distance_params.with_tolerance(config.final_tolerance)
        try:
            ev = evaluate_local(oracle, x0, pred, state.theta, g_final, fine)
            if ev.found:
                g_final = ev.value
                final_found = True
        except QueryBudgetExceeded:
            pass

    total = spent()
    x_star = reconstruct_adversarial(x0, state.theta, g_final, bounds, warn=False)
    adversarial = pred.holds(oracle.uncounted().classify(x_star))
    return AttackResult(
        x_star=x_star,
        theta_star=state.theta,
        distortion=float(np.linalg.norm(x_star - x0)),
        total_queries=total,
        iterations=iteration,
        trace=trace,
        status=status,
        adversarial=adversarial,
        final_found=final_found,
        dropped_samples=dropped,
    )


def _empty_result(queries, status):
    return AttackResult(None, None, math.nan, queries, 0, [], status)
