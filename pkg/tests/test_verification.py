import math

import numpy as np
import pytest

from optattack import synthetic
from optattack.boundary import BoundaryDistance, SearchParams, Targeted, Untargeted, evaluate_initial
from optattack.errors import ContractError, FiniteDifferenceError, NoAdversarialFound
from optattack.models import LinearModel, RadialModel
from optattack.oracle import Oracle
from optattack.rgf import AttackResult, AttackStatus, RgfConfig, estimate_gradient, rgf_attack
from optattack.verification import (
    GroundTruth,
    GroundTruthMethod,
    analytic_distance,
    analytic_min_distortion,
    brute_force_min_distortion,
    convergence_trace_metrics,
    cosine,
    finite_difference_gradient,
    ground_truth,
    radial_distance_gradient,
    sphere_directions,
)

OFFSET = np.array([0.1, 0.1])
OFFSET_OPT = math.sqrt(0.4) - math.hypot(0.1, 0.1)


class TestAnalytic:
    def test_radial_origin(self):
        for theta in ([1, 0], [0.3, -2.0]):
            assert analytic_distance(RadialModel(0.4), [0, 0], theta) == pytest.approx(0.6324555, abs=1e-7)

    def test_radial_offset(self):
        assert analytic_distance(RadialModel(0.4), OFFSET, [1, 0]) == pytest.approx(0.5244998, abs=1e-7)

    def test_linear(self):
        m = LinearModel([1.0, 0.0], 0.5)
        assert analytic_distance(m, [0, 0], [0, 1]) is None
        assert analytic_distance(m, [0, 0], [-1, 0]) is None
        assert analytic_distance(m, [0, 0], [1, 1]) == pytest.approx(0.5 * math.sqrt(2))

    def test_min_distortion(self):
        gt = analytic_min_distortion(RadialModel(0.4), OFFSET)
        assert gt.min_distortion == pytest.approx(0.4910, abs=1e-4)
        assert gt.method is GroundTruthMethod.CLOSED_FORM
        gt = analytic_min_distortion(LinearModel([3.0, 4.0], 1.0), [0, 0])
        assert gt.min_distortion == pytest.approx(0.2)
        np.testing.assert_allclose(gt.argmin_direction, [0.6, 0.8])
        with pytest.raises(ContractError):
            analytic_min_distortion(LinearModel([1.0, 0.0], 0.0), [0, 0])


def test_sphere_directions_are_unit():
    for d, n in ((1, 2), (2, 36), (3, 100), (5, 64)):
        dirs = sphere_directions(d, n)
        np.testing.assert_allclose(np.linalg.norm(dirs, axis=1), 1.0)
    np.testing.assert_array_equal(sphere_directions(5, 64, seed=1), sphere_directions(5, 64, seed=1))


class TestBruteForce:
    def test_offset_sphere(self):
        gt = brute_force_min_distortion(synthetic.radial(2), OFFSET, Untargeted(0), 720)
        assert gt.min_distortion == pytest.approx(0.4910, abs=2e-3)
        assert gt.method is GroundTruthMethod.BRUTE_FORCE

    def test_linear(self):
        gt = brute_force_min_distortion(synthetic.linear(2), [0, 0], Untargeted(0), 720)
        assert gt.min_distortion == pytest.approx(0.5, abs=2e-3)

    def test_gbdt_corner(self):
        o = synthetic.gbdt_corner()
        x0 = np.array([0.5, 0.5])
        gt = brute_force_min_distortion(o, x0, Untargeted(0), 720)
        assert gt.min_distortion == pytest.approx(0.1414, abs=2e-3)
        # the hand-derived corner distance, re-checked by dense grid classification
        clf = o.uncounted()
        grid = np.linspace(0, 1, 501)
        best = min(
            math.hypot(a - 0.5, b - 0.5)
            for a in grid for b in grid
            if clf.classify([a, b]) == 1
        )
        assert best == pytest.approx(math.sqrt(0.02), abs=3e-3)
        assert gt.min_distortion >= best - 3e-3

    def test_no_adversarial(self):
        o = Oracle(LinearModel([1.0, 0.0], 100.0))
        with pytest.raises(NoAdversarialFound):
            brute_force_min_distortion(o, [0, 0], Untargeted(0), 36)

    def test_high_dim_guard(self):
        with pytest.raises(ValueError):
            brute_force_min_distortion(synthetic.radial(4), np.zeros(4), Untargeted(0), 16)

    def test_counted_oracle_untouched(self):
        o = synthetic.radial(2)
        brute_force_min_distortion(o, OFFSET, Untargeted(0), 90)
        assert o.query_count == 0

    def test_dispatch(self):
        assert ground_truth(synthetic.radial(2), OFFSET, Untargeted(0)).method is GroundTruthMethod.CLOSED_FORM
        o = synthetic.three_class()
        gt = ground_truth(o, [1.0, 0.0], Targeted(1, 0), n_directions=180)
        assert gt.method is GroundTruthMethod.BRUTE_FORCE


class TestFiniteDifference:
    def test_constant(self):
        tol = 1e-6
        dist = BoundaryDistance(synthetic.radial(2), [0, 0], Untargeted(0), SearchParams(tolerance=tol))
        grad = finite_difference_gradient(dist, np.array([1.0, 0.0]), 1e-3)
        assert np.linalg.norm(grad) <= 2 * tol / 1e-3 * math.sqrt(2)

    def test_offset_sphere_matches_closed_form(self):
        dist = BoundaryDistance(synthetic.radial(2), OFFSET, Untargeted(0), SearchParams(tolerance=1e-9))
        rng = np.random.default_rng(0)
        for _ in range(20):
            theta = rng.normal(size=2)
            theta /= np.linalg.norm(theta)
            fd = finite_difference_gradient(dist, theta, 1e-3)
            np.testing.assert_allclose(fd, radial_distance_gradient(0.4, OFFSET, theta), atol=1e-3)

    def test_h_floor(self):
        dist = BoundaryDistance(synthetic.radial(2), [0, 0], Untargeted(0), SearchParams(tolerance=1e-3))
        with pytest.raises(ValueError):
            finite_difference_gradient(dist, np.array([1.0, 0.0]), 5e-3)

    def test_failed_coordinates(self):
        dist = BoundaryDistance(synthetic.linear(2), [0, 0], Untargeted(0), SearchParams(tolerance=1e-6))
        theta = np.array([1e-4, 1.0])
        with pytest.raises(FiniteDifferenceError):
            finite_difference_gradient(dist, theta, 1e-3)

    def test_agrees_with_estimator(self):
        dist = BoundaryDistance(synthetic.radial(2).uncounted(), OFFSET, Untargeted(0), SearchParams(tolerance=1e-9))
        theta = np.array([0.0, -1.0])
        g0 = dist.initial(theta).value
        fd = finite_difference_gradient(dist, theta, 1e-3, g0)
        est = estimate_gradient(dist, theta, g0, RgfConfig(q=2000), np.random.default_rng(0))
        assert cosine(est.vector, fd) >= 0.9


class TestTraceMetrics:
    def _result(self, trace, final):
        return AttackResult(None, None, final, trace[-1][0] if trace else 0, 0, trace, AttackStatus.CONVERGED)

    def test_thresholds(self):
        gt = GroundTruth(0.5, None, GroundTruthMethod.CLOSED_FORM)
        m = convergence_trace_metrics(self._result([(10, 1.0), (50, 0.58), (90, 0.505)], 0.505), gt)
        assert m.first_below[1e-1] == 50
        assert m.first_below[1e-2] == 90
        assert m.gaps[-1][1] == pytest.approx(5e-3)

    def test_relative(self):
        m = convergence_trace_metrics(self._result([(10, 1.0), (40, 0.7)], 0.7))
        assert m.relative and m.reference == 0.7
        assert m.first_below[1e-2] == 40

    def test_empty(self):
        with pytest.raises(ContractError):
            convergence_trace_metrics(self._result([], math.nan))


def test_evaluate_initial_matches_analytic():
    rng = np.random.default_rng(11)
    params = SearchParams(tolerance=1e-6)
    checked = 0
    while checked < 1000:
        if checked % 2:
            model, x0 = RadialModel(0.4, 2), rng.uniform(-0.4, 0.4, 2)
        else:
            model, x0 = LinearModel(rng.normal(size=2), 0.3), rng.normal(size=2) * 0.2
        theta = rng.normal(size=2)
        true = analytic_distance(model, x0, theta)
        if true is None or true > 5:
            continue
        o = Oracle(model)
        ev = evaluate_initial(o, x0, Untargeted(model.predict(x0)), theta, params)
        assert abs(ev.value - true) <= 1e-6
        checked += 1


@pytest.mark.parametrize("kind,x0", [("radial", OFFSET), ("linear", np.zeros(2)), ("gbdt-corner", np.full(2, 0.5))])
def test_attack_never_beats_brute_force(kind, x0):
    o = synthetic.build(kind)
    gt = brute_force_min_distortion(o, x0, Untargeted(0), 720)
    before = o.query_count
    res = rgf_attack(o, x0, Untargeted(0), None, RgfConfig(seed=1, query_budget=6000))
    assert res.distortion >= gt.min_distortion - 2 * gt.grid_error
    # verification above ran on an uncounted handle
    assert before == 0 and res.total_queries == o.query_count
