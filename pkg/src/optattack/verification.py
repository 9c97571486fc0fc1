"""Independent oracles for checking attack results.

Closed-form boundary distances for the radial and linear models, dense
direction sweeps for small dimensions, and central-difference gradients of
g. Anything that needs the classifier goes through an uncounted handle so
attack query totals are unaffected.
"""
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .boundary import DistanceEval, SearchParams, Status, Targeted, evaluate_initial, unit
from .domain import as_vector
from .errors import ContractError, FiniteDifferenceError, NoAdversarialFound
from .models import LinearModel, RadialModel


class GroundTruthMethod(str, Enum):
    CLOSED_FORM = "closed_form"
    BRUTE_FORCE = "brute_force"


@dataclass(frozen=True)
class GroundTruth:
    min_distortion: float
    argmin_direction: np.ndarray | None
    method: GroundTruthMethod
    n_directions: int = 0
    grid_error: float = 0.0


def analytic_distance(model, x0, theta):
    """Exact g(theta) for radial and linear models; None when the ray never crosses."""
    x0 = np.asarray(x0, dtype=np.float64)
    theta = unit(theta)
    if isinstance(model, RadialModel):
        # |x0 + lam*theta|^2 = r2  ->  lam^2 + 2*b*lam + c = 0
        b = float(x0 @ theta)
        c = float(x0 @ x0) - model.r2
        disc = b * b - c
        if disc < 0:
            return None
        root = math.sqrt(disc)
        for lam in sorted((-b - root, -b + root)):
            if lam > 0:
                return lam
        return None
    if isinstance(model, LinearModel):
        # class 0 below the plane, class 1 on or above it
        wt = float(model.w @ theta)
        gap = model.b - float(model.w @ x0)
        if gap == 0 or wt == 0 or (gap > 0) != (wt > 0):
            return None
        return gap / wt
    raise TypeError(f"no closed form for {type(model).__name__}")


def analytic_min_distortion(model, x0):
    """Closed-form minimum untargeted distortion for radial/linear models (either side)."""
    x0 = np.asarray(x0, dtype=np.float64)
    if isinstance(model, RadialModel):
        r = math.sqrt(model.r2)
        n = float(np.linalg.norm(x0))
        if n == r:
            raise ContractError("x0 lies on the decision boundary")
        direction = x0 / n if n > 0 else None
        if n > r:
            return GroundTruth(n - r, -direction, GroundTruthMethod.CLOSED_FORM)
        return GroundTruth(r - n, direction, GroundTruthMethod.CLOSED_FORM)
    if isinstance(model, LinearModel):
        gap = model.b - float(model.w @ x0)
        if gap == 0:
            raise ContractError("x0 lies on the decision boundary")
        wn = float(np.linalg.norm(model.w))
        sign = 1.0 if gap > 0 else -1.0
        return GroundTruth(abs(gap) / wn, sign * model.w / wn, GroundTruthMethod.CLOSED_FORM)
    raise TypeError(f"no closed form for {type(model).__name__}")


def radial_distance_gradient(r2, x0, theta):
    """Gradient of g w.r.t. the unnormalized direction, for x0 inside the ball."""
    x0 = np.asarray(x0, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    norm = np.linalg.norm(theta)
    t = theta / norm
    b = float(x0 @ t)
    s = math.sqrt(b * b - (float(x0 @ x0) - r2))
    grad_unit = -x0 + (b / s) * x0
    return (grad_unit - (grad_unit @ t) * t) / norm


def sphere_directions(d, n, seed=0):
    """Deterministic, evenly spread unit vectors.

    Equally spaced angles in 2-d, a Fibonacci lattice in 3-d and a scrambled
    Sobol sequence pushed through the normal quantile function above that.
    """
    if d < 1 or n < 1:
        raise ValueError("need d >= 1 and n >= 1")
    if d == 1:
        return np.array([[1.0], [-1.0]])
    if d == 2:
        ang = 2.0 * np.pi * np.arange(n) / n
        return np.column_stack([np.cos(ang), np.sin(ang)])
    if d == 3:
        i = np.arange(n) + 0.5
        z = 1.0 - 2.0 * i / n
        r = np.sqrt(1.0 - z * z)
        phi = np.pi * (3.0 - math.sqrt(5.0)) * i
        return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    from scipy.stats import norm, qmc

    pts = qmc.Sobol(d, scramble=True, seed=seed).random(n)
    g = norm.ppf(np.clip(pts, 1e-12, 1 - 1e-12))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def grid_error(d, n, scale):
    """Heuristic slack for a direction grid: half the grid spacing, turned into distance.

    Covers both smooth minima (second-order term) and kinks (first-order term).
    """
    if d == 1:
        return 0.0
    if d == 2:
        spacing = 2.0 * math.pi / n
    elif d == 3:
        spacing = math.sqrt(4.0 * math.pi / n)
    else:
        return float("inf")
    delta = min(spacing / 2.0, math.pi / 4.0)
    return scale * (1.0 / math.cos(delta) - 1.0 + math.tan(delta))


def brute_force_min_distortion(oracle, x0, pred, n_directions=720, params=None, allow_high_dim=False):
    """Minimum of g over a dense deterministic set of directions."""
    oracle = oracle.uncounted()
    x0 = as_vector(x0, oracle.dim, "x0")
    d = x0.shape[0]
    if d > 3 and not allow_high_dim:
        raise ValueError(f"brute force is limited to d <= 3 (got {d}); pass allow_high_dim=True")
    if params is None:
        dom = oracle.domain(d)
        params = SearchParams(tolerance=1e-6, max_lambda=dom.diameter() if dom.is_bounded else 10.0)
    best_val, best_dir = math.inf, None
    for theta in sphere_directions(d, n_directions):
        ev = evaluate_initial(oracle, x0, pred, theta, params)
        if ev.found and ev.value < best_val:
            best_val, best_dir = ev.value, theta
    if best_dir is None:
        raise NoAdversarialFound(f"no boundary within {params.max_lambda} along {n_directions} directions")
    return GroundTruth(best_val, best_dir, GroundTruthMethod.BRUTE_FORCE, n_directions,
                       grid_error(d, n_directions, best_val))


def ground_truth(oracle, x0, pred, n_directions=720, params=None, allow_high_dim=False):
    """Closed form when the model has one (untargeted), brute force otherwise."""
    model = oracle.model
    if isinstance(model, (RadialModel, LinearModel)) and not isinstance(pred, Targeted):
        return analytic_min_distortion(model, x0)
    return brute_force_min_distortion(oracle, x0, pred, n_directions, params, allow_high_dim)


def finite_difference_gradient(dist_eval, theta, h, g_theta=None, tolerance=None):
    """Central differences of g, one coordinate at a time.

    ``dist_eval(theta, v_prev)`` is warm-started at ``g_theta`` (evaluated via
    ``dist_eval.initial`` when omitted). ``h`` must exceed ten times the
    evaluator's tolerance, otherwise bisection noise swamps the difference.
    """
    theta = np.asarray(theta, dtype=np.float64)
    if tolerance is None:
        tolerance = getattr(dist_eval, "tolerance", 0.0)
    if not h > 10.0 * tolerance:
        raise ValueError(f"step h={h} must exceed 10 x tolerance ({10.0 * tolerance})")
    if g_theta is None:
        ev = dist_eval.initial(theta)
        if not ev.found:
            raise FiniteDifferenceError([])
        g_theta = ev.value
    grad = np.zeros_like(theta)
    failed = []
    for i in range(theta.shape[0]):
        e = np.zeros_like(theta)
        e[i] = h
        plus = dist_eval(theta + e, g_theta)
        minus = dist_eval(theta - e, g_theta)
        if not (plus.found and minus.found):
            failed.append(i)
            continue
        grad[i] = (plus.value - minus.value) / (2.0 * h)
    if failed:
        raise FiniteDifferenceError(failed)
    return grad


class QuadraticDistance:
    """Stand-in for g with exact values ``|theta - a|^2`` and no oracle behind it."""

    tolerance = 0.0

    def __init__(self, a):
        self.a = np.asarray(a, dtype=np.float64)

    def __call__(self, theta, v_prev=None):
        diff = np.asarray(theta, dtype=np.float64) - self.a
        return DistanceEval(float(diff @ diff), 0, Status.FOUND)

    def initial(self, theta, upper=None):
        return self(theta)

    def gradient(self, theta):
        return 2.0 * (np.asarray(theta, dtype=np.float64) - self.a)


def cosine(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))


@dataclass
class TraceMetrics:
    reference: float
    relative: bool
    gaps: list = field(default_factory=list)
    first_below: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "reference": self.reference,
            "relative": self.relative,
            "gaps": [[q, g] for q, g in self.gaps],
            "first_below": {repr(k): v for k, v in self.first_below.items()},
        }


def convergence_trace_metrics(result, ground_truth=None, thresholds=(1e-1, 1e-2)):
    """Gap of each trace entry to the optimum and the first query count below each threshold.

    Without a ground truth, gaps are measured against the final distortion.
    """
    trace = list(result.trace)
    if not trace:
        raise ContractError("trace is empty")
    if ground_truth is not None:
        ref, relative = ground_truth.min_distortion, False
    else:
        final = result.distortion if np.isfinite(result.distortion) else trace[-1][1]
        ref, relative = final, True
    gaps = [(int(q), float(g) - ref) for q, g in trace]
    first = {}
    for t in thresholds:
        first[t] = next((q for q, gap in gaps if gap < t), None)
    return TraceMetrics(ref, relative, gaps, first)
