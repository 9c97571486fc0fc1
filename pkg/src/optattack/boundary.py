"""Distance from x0 to the decision boundary along a direction.

``g(theta)`` is the smallest ``lam > 0`` such that ``x0 + lam * theta/|theta|``
is adversarial. It is evaluated either from scratch (a coarse scan followed by
bisection, used for initialization) or locally around a previous value
(expand or shrink by a ratio, then bisect). Every query point is clamped into
the oracle's domain first.
"""
import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from . import kernels
from .domain import as_vector
from .errors import ContractError, InitializationError, InvalidInputError, QueryBudgetExceeded


@dataclass(frozen=True)
class Untargeted:
    """Adversarial means any label other than ``y0``."""

    y0: int

    def holds(self, label):
        return label != self.y0

    def accepts_candidate(self, label):
        return label != self.y0


@dataclass(frozen=True)
class Targeted:
    """Adversarial means exactly the label ``target``."""

    target: int
    y0: int | None = None

    def __post_init__(self):
        if self.y0 is not None and self.target == self.y0:
            raise ValueError(f"target label {self.target} equals the original label")

    def holds(self, label):
        return label == self.target

    def accepts_candidate(self, label):
        return label == self.target


class Status(str, Enum):
    FOUND = "found"
    NO_BOUNDARY = "no_boundary"


@dataclass(frozen=True)
class DistanceEval:
    value: float
    queries_used: int
    status: Status

    @property
    def found(self):
        return self.status is Status.FOUND


@dataclass(frozen=True)
class SearchParams:
    """Knobs of the boundary search.

    ``tolerance`` is the final bracket width; with ``relative=True`` it is
    multiplied by the starting value of each search. ``init_step`` and
    ``max_lambda`` default to data-dependent values when None.
    """

    alpha_ratio: float = 0.01
    init_step: float | None = None
    tolerance: float = 1e-3
    relative: bool = False
    max_lambda: float | None = None
    max_expansion_steps: int = 200

    def __post_init__(self):
        if not 0 < self.alpha_ratio < 1:
            raise ValueError("alpha_ratio must lie in (0, 1)")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_lambda is not None and not self.max_lambda > 0:
            raise ValueError("max_lambda must be positive")
        if self.init_step is not None and not self.init_step > 0:
            raise ValueError("init_step must be positive")
        if self.max_expansion_steps < 1:
            raise ValueError("max_expansion_steps must be >= 1")

    def with_tolerance(self, tolerance, relative=False):
        return replace(self, tolerance=tolerance, relative=relative)

    def width(self, scale):
        return self.tolerance * scale if self.relative else self.tolerance


def unit(theta):
    theta = as_vector(theta, name="theta")
    norm = math.sqrt(kernels.active.sq_norm(theta))
    if norm == 0.0:
        raise InvalidInputError("direction must be non-zero")
    return theta / norm


def default_max_lambda(oracle, dim):
    dom = oracle.domain(dim)
    return dom.diameter() if dom.is_bounded else 1e3


class _Ray:
    """Counted queries along ``x0 + lam * theta`` (theta already unit-norm)."""

    __slots__ = ("oracle", "x0", "theta", "pred", "lower", "upper", "bounded", "queries", "_k")

    def __init__(self, oracle, x0, pred, theta):
        dom = oracle.domain(x0.shape[0])
        self.oracle = oracle
        self.x0 = x0
        self.theta = theta
        self.pred = pred
        self.lower = dom.lower
        self.upper = dom.upper
        self.bounded = bool(np.isfinite(dom.lower).any() or np.isfinite(dom.upper).any())
        self.queries = 0
        self._k = kernels.active

    def point(self, lam):
        return self._k.ray_point(self.x0, self.theta, lam, self.lower, self.upper)

    def holds_at(self, p):
        self.queries += 1
        return self.pred.holds(self.oracle.classify(p))

    def holds(self, lam):
        return self.holds_at(self.point(lam))


def _halvings(width, tol):
    return math.ceil(math.log2(width / tol)) if width > tol else 0


def _bisect(ray, lo, hi, tol):
    # invariant: predicate fails at lo, holds at hi. The step count is fixed
    # up front so midpoint rounding never costs an extra query.
    for _ in range(_halvings(hi - lo, tol)):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if ray.holds(mid):
            hi = mid
        else:
            lo = mid
    return hi


def binary_search_bracket(oracle, x0, pred, theta, v_left, v_right, tolerance, check_endpoints=False):
    """Shrink ``[v_left, v_right]`` around the boundary to width <= tolerance.

    The predicate must fail at ``v_left`` and hold at ``v_right``. Returns the
    right (adversarial) end and uses exactly ``ceil(log2(width/tolerance))``
    queries. ``check_endpoints`` spends two extra queries verifying the
    bracket and raises ContractError when both ends agree.
    """
    if not v_left < v_right:
        raise ContractError(f"empty bracket [{v_left}, {v_right}]")
    if not tolerance > 0:
        raise ValueError("tolerance must be positive")
    x0 = as_vector(x0, oracle.dim, "x0")
    ray = _Ray(oracle, x0, pred, unit(theta))
    if check_endpoints:
        if ray.holds(v_left) == ray.holds(v_right):
            raise ContractError("predicate agrees at both bracket ends")
    return _bisect(ray, float(v_left), float(v_right), tolerance)


def _scan(ray, step, limit):
    prev_lam, prev_point = 0.0, ray.x0
    i = 0
    while prev_lam < limit:
        i += 1
        lam = min(i * step, limit)
        p = ray.point(lam)
        if ray.bounded and np.array_equal(p, prev_point):
            return None
        if ray.holds_at(p):
            return prev_lam, lam
        prev_lam, prev_point = lam, p
    return None


def _scan_doubling(ray, step, limit):
    prev_lam, prev_point = 0.0, ray.x0
    lam = step
    while prev_lam < limit:
        lam = min(lam, limit)
        p = ray.point(lam)
        if ray.bounded and np.array_equal(p, prev_point):
            return None
        if ray.holds_at(p):
            return prev_lam, lam
        prev_lam, prev_point = lam, p
        lam *= 2.0
    return None


def evaluate_initial(oracle, x0, pred, theta, params=SearchParams(), upper=None, doubling=False):
    """Evaluate g(theta) with no prior value.

    Queries ``x0 + i*step*theta`` for i = 1, 2, ... until the predicate holds,
    then bisects the last step. ``upper`` caps the scan (e.g. the distance to
    a known adversarial example); it also sets the default step to upper/20.
    ``doubling`` grows the step geometrically instead, which is much cheaper
    on rays that never cross but can jump over thin adversarial slabs.
    """
    x0 = as_vector(x0, oracle.dim, "x0")
    ray = _Ray(oracle, x0, pred, unit(theta))
    limit = params.max_lambda or default_max_lambda(oracle, x0.shape[0])
    if upper is not None:
        limit = min(limit, float(upper)) if params.max_lambda else float(upper)
    step = params.init_step
    if step is None:
        step = upper / 20.0 if upper is not None else 0.02 * math.sqrt(x0.shape[0])
    bracket = (_scan_doubling if doubling else _scan)(ray, step, limit)
    if bracket is None:
        return DistanceEval(math.nan, ray.queries, Status.NO_BOUNDARY)
    lo, hi = bracket
    value = _bisect(ray, lo, hi, params.width(hi))
    return DistanceEval(value, ray.queries, Status.FOUND)


def evaluate_local(oracle, x0, pred, theta, v_prev, params=SearchParams()):
    """Evaluate g(theta) near a previous value ``v_prev``.

    If ``x0 + v_prev*theta`` is not adversarial, the right end grows by
    ``(1 + alpha)`` until it is; otherwise the left end shrinks by
    ``(1 - alpha)`` until it is not. The bracket is then bisected and its
    right end returned.
    """
    if not v_prev > 0:
        raise ValueError("v_prev must be positive")
    x0 = as_vector(x0, oracle.dim, "x0")
    ray = _Ray(oracle, x0, pred, unit(theta))
    alpha = params.alpha_ratio
    limit = params.max_lambda or default_max_lambda(oracle, x0.shape[0])
    v = float(v_prev)
    tol = params.width(v)

    p = ray.point(v)
    if not ray.holds_at(p):
        v_left, v_right = v, (1.0 + alpha) * v
        steps = 0
        prev_point = p
        while True:
            if steps >= params.max_expansion_steps or v_right > limit:
                return DistanceEval(math.nan, ray.queries, Status.NO_BOUNDARY)
            p = ray.point(v_right)
            if ray.bounded and np.array_equal(p, prev_point):
                return DistanceEval(math.nan, ray.queries, Status.NO_BOUNDARY)
            if ray.holds_at(p):
                break
            prev_point = p
            v_right *= 1.0 + alpha
            steps += 1
    else:
        v_right, v_left = v, (1.0 - alpha) * v
        steps = 0
        while ray.holds(v_left):
            steps += 1
            if steps >= params.max_expansion_steps or v_left <= np.finfo(float).tiny:
                # boundary lies far below v_prev; x0 itself is not adversarial
                v_left = 0.0
                break
            v_left *= 1.0 - alpha
    value = _bisect(ray, v_left, v_right, tol)
    return DistanceEval(value, ray.queries, Status.FOUND)


def initialize_direction(oracle, x0, pred, candidates, n_tries=10, params=SearchParams()):
    """Pick a starting direction from examples of another class.

    Tries up to ``n_tries`` candidates whose label suits the predicate, each
    direction ``(x - x0)/|x - x0|`` scanned no further than the candidate
    itself. Returns the direction with the smallest boundary distance; the
    returned DistanceEval counts the queries of all tries. If the oracle's
    budget runs out after at least one success, the best so far is returned.
    """
    x0 = as_vector(x0, oracle.dim, "x0")
    best = None
    total = 0
    tried = 0
    for rec in candidates:
        if tried >= n_tries:
            break
        if not pred.accepts_candidate(rec.label):
            continue
        diff = np.asarray(rec.x, dtype=np.float64) - x0
        dist = float(np.linalg.norm(diff))
        if dist == 0.0:
            continue
        tried += 1
        theta = diff / dist
        try:
            ev = evaluate_initial(oracle, x0, pred, theta, params, upper=dist)
        except QueryBudgetExceeded:
            if best is None:
                raise
            break
        total += ev.queries_used
        if ev.found and (best is None or ev.value < best[1].value):
            best = (theta, ev)
    if best is None:
        raise InitializationError(f"none of {tried} candidate directions reached the boundary")
    theta, ev = best
    return theta, DistanceEval(ev.value, total, Status.FOUND)


def initialize_random(oracle, x0, pred, n_directions, rng, params=SearchParams()):
    """Fallback start when no candidate examples exist: random Gaussian directions.

    Each direction is probed at doubling radii so that rays which never
    reach the boundary stay cheap.
    """
    x0 = as_vector(x0, oracle.dim, "x0")
    best = None
    total = 0
    for _ in range(n_directions):
        theta = unit(rng.standard_normal(x0.shape[0]))
        try:
            ev = evaluate_initial(oracle, x0, pred, theta, params, doubling=True)
        except QueryBudgetExceeded:
            if best is None:
                raise
            break
        total += ev.queries_used
        if ev.found and (best is None or ev.value < best[1].value):
            best = (theta, ev)
    if best is None:
        raise InitializationError(f"none of {n_directions} random directions reached the boundary")
    theta, ev = best
    return theta, DistanceEval(ev.value, total, Status.FOUND)


class BoundaryDistance:
    """g(theta) bound to one (oracle, x0, predicate) triple.

    Calling it runs the local search warm-started at ``v_prev``.
    """

    def __init__(self, oracle, x0, pred, params=SearchParams()):
        self.oracle = oracle
        self.x0 = as_vector(x0, oracle.dim, "x0")
        self.pred = pred
        self.params = params

    @property
    def tolerance(self):
        return self.params.tolerance

    def with_params(self, params):
        return BoundaryDistance(self.oracle, self.x0, self.pred, params)

    def __call__(self, theta, v_prev):
        return evaluate_local(self.oracle, self.x0, self.pred, theta, v_prev, self.params)

    def initial(self, theta, upper=None):
        return evaluate_initial(self.oracle, self.x0, self.pred, theta, self.params, upper)
