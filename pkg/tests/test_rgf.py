import math

import numpy as np
import pytest

from optattack.boundary import BoundaryDistance, SearchParams, Targeted, Untargeted
from optattack.data import DatasetRecord
from optattack.domain import DomainBounds
from optattack.errors import ContractError
from optattack.rgf import (
    AttackStatus,
    GradientEstimate,
    OptState,
    ReconstructionWarning,
    RgfConfig,
    estimate_gradient,
    line_search_step,
    reconstruct_adversarial,
    rgf_attack,
    sample_gaussian_direction,
)
from optattack import synthetic
from optattack.verification import QuadraticDistance, cosine


class TestGaussian:
    def test_deterministic(self):
        a = sample_gaussian_direction(3, np.random.default_rng(5))
        b = sample_gaussian_direction(3, np.random.default_rng(5))
        np.testing.assert_array_equal(a, b)

    def test_moments(self):
        rng = np.random.default_rng(0)
        s = np.array([sample_gaussian_direction(4, rng) for _ in range(100_000)])
        assert np.abs(s.mean(axis=0)).max() < 0.02
        assert np.abs(s.var(axis=0) - 1.0).max() < 0.03

    def test_bad_dimension(self):
        with pytest.raises(ValueError):
            sample_gaussian_direction(0, np.random.default_rng())


class TestEstimateGradient:
    def test_constant_g_gives_small_estimate(self, radial_oracle):
        dist = BoundaryDistance(radial_oracle, [0, 0], Untargeted(0), SearchParams(tolerance=1e-6))
        g0 = dist.initial([1, 0]).value
        est = estimate_gradient(dist, np.array([1.0, 0.0]), g0, RgfConfig(), np.random.default_rng(1))
        assert np.linalg.norm(est.vector) <= 0.002
        assert est.queries_used > 0 and est.dropped == 0

    def test_quadratic_direction(self):
        a = np.array([1.0, -2.0, 0.5, 0.0, 3.0])
        quad = QuadraticDistance(a)
        theta = np.zeros(5)
        est = estimate_gradient(quad, theta, quad(theta).value, RgfConfig(q=2000), np.random.default_rng(2))
        assert cosine(est.vector, quad.gradient(theta)) >= 0.9

    def test_failed_samples_dropped(self, linear_oracle):
        dist = BoundaryDistance(linear_oracle, [0, 0], Untargeted(0), SearchParams(tolerance=1e-3, relative=True))
        theta = np.array([0.003, 1.0])
        theta /= np.linalg.norm(theta)
        g0 = dist.initial(theta).value
        cfg = RgfConfig(q=40)
        est = estimate_gradient(dist, theta, g0, cfg, np.random.default_rng(0))
        assert 0 < est.dropped < cfg.q


class TestLineSearch:
    def test_descent_on_quadratic(self):
        quad = QuadraticDistance(np.array([1.0, 1.0]))
        theta = np.array([1.0, 0.0])
        state = OptState(theta, quad(theta).value, 0.1)
        grad = GradientEstimate(quad.gradient(theta), 0)
        new = line_search_step(quad, state, grad, RgfConfig())
        assert not new.step_failed
        assert new.g_value < state.g_value
        assert np.linalg.norm(new.theta) == pytest.approx(1.0)

    def test_uphill_fails(self):
        quad = QuadraticDistance(np.array([1.0, 1.0]))
        theta = np.array([1.0, 0.0])
        state = OptState(theta, quad(theta).value, 0.1)
        grad = GradientEstimate(-quad.gradient(theta), 0)
        new = line_search_step(quad, state, grad, RgfConfig())
        assert new.step_failed
        np.testing.assert_array_equal(new.theta, theta)
        assert new.g_value == state.g_value

    def test_constant_g_fails(self, radial_oracle):
        dist = BoundaryDistance(radial_oracle, [0, 0], Untargeted(0), SearchParams(tolerance=1e-9))
        theta = np.array([1.0, 0.0])
        g0 = dist.initial(theta).value
        state = OptState(theta, g0, 0.5)
        new = line_search_step(dist, state, GradientEstimate(np.array([0.0, 1.0]), 0), RgfConfig())
        assert new.step_failed
        np.testing.assert_array_equal(new.theta, theta)

    def test_zero_gradient_rejected(self):
        quad = QuadraticDistance(np.zeros(2))
        state = OptState(np.array([1.0, 0.0]), 1.0, 0.1)
        with pytest.raises(ContractError):
            line_search_step(quad, state, GradientEstimate(np.zeros(2), 0), RgfConfig())


class TestReconstruct:
    def test_plain(self):
        np.testing.assert_array_equal(reconstruct_adversarial([0, 0], [1, 0], 0.5), [0.5, 0.0])

    def test_clamped_warns(self):
        with pytest.warns(ReconstructionWarning):
            x = reconstruct_adversarial([0, 0], [1, 0], 0.5, DomainBounds.box(2, 0.0, 0.4))
        np.testing.assert_array_equal(x, [0.4, 0.0])

    def test_unit_norm_required(self):
        with pytest.raises(ContractError):
            reconstruct_adversarial([0, 0], [2, 0], 0.5)
        with pytest.raises(ContractError):
            reconstruct_adversarial([0, 0], [1, 0], 0.0)


def _linear_candidates(d):
    return [DatasetRecord(np.r_[1.0, np.full(d - 1, 0.8)], 1), DatasetRecord(np.r_[0.9, -np.ones(d - 1)], 1)]


class TestAttack:
    def test_linear_half_space(self):
        o = synthetic.linear(2)
        res = rgf_attack(o, [0, 0], Untargeted(0), _linear_candidates(2), RgfConfig(query_budget=5000, seed=1))
        assert res.distortion == pytest.approx(0.5, abs=1e-2)
        assert res.adversarial and res.final_found
        assert res.total_queries == o.query_count <= 5000

    def test_offset_sphere(self):
        o = synthetic.radial(2)
        cands = [DatasetRecord(np.array([-0.8, 0.6]), 1)]
        res = rgf_attack(o, [0.1, 0.1], Untargeted(0), cands, RgfConfig(seed=3))
        assert res.distortion == pytest.approx(math.sqrt(0.4) - math.hypot(0.1, 0.1), abs=1e-2)
        assert res.distortion == pytest.approx(np.linalg.norm(res.x_star - [0.1, 0.1]))

    def test_random_init_without_candidates(self):
        res = rgf_attack(synthetic.linear(2), [0, 0], Untargeted(0), None, RgfConfig(seed=4))
        assert res.adversarial
        assert res.distortion == pytest.approx(0.5, abs=1e-2)

    def test_targeted_three_class(self):
        o = synthetic.three_class()
        x0 = np.array([1.0, 0.2])
        cands = synthetic.sample_records(o, 50, np.random.default_rng(0))
        for target in (1, 2):
            res = rgf_attack(o, x0, Targeted(target, 0), cands, RgfConfig(seed=target, query_budget=4000))
            assert res.status is not AttackStatus.INIT_FAILED
            assert o.uncounted().classify(res.x_star) == target

    def test_deterministic(self):
        cfg = RgfConfig(seed=9, query_budget=3000)
        runs = [rgf_attack(synthetic.radial(2), [0.1, 0.1], Untargeted(0), None, cfg) for _ in range(2)]
        assert runs[0].trace == runs[1].trace
        assert runs[0].total_queries == runs[1].total_queries
        np.testing.assert_array_equal(runs[0].x_star, runs[1].x_star)

    @pytest.mark.parametrize("budget", [10, 137, 1000])
    def test_budget_never_exceeded(self, budget):
        o = synthetic.radial(2)
        res = rgf_attack(o, [0.1, 0.1], Untargeted(0), None, RgfConfig(query_budget=budget))
        assert res.total_queries == o.query_count <= budget

    def test_budget_starvation(self):
        res = rgf_attack(synthetic.radial(2), [0.1, 0.1], Untargeted(0), None, RgfConfig(query_budget=5))
        assert res.status is AttackStatus.BUDGET_EXHAUSTED
        assert res.x_star is None and not res.success

    def test_init_failure(self, linear_oracle):
        cands = [DatasetRecord(np.array([-1.0, 0.0]), 1)]
        res = rgf_attack(linear_oracle, [0, 0], Untargeted(0), cands, RgfConfig())
        assert res.status is AttackStatus.INIT_FAILED

    def test_trace_strictly_decreasing(self):
        res = rgf_attack(synthetic.gbdt_corner(), [0.5, 0.5], Untargeted(0), None,
                         RgfConfig(seed=2, query_budget=8000))
        gs = [g for _, g in res.trace]
        qs = [q for q, _ in res.trace]
        assert all(b < a for a, b in zip(gs, gs[1:]))
        assert all(b >= a for a, b in zip(qs, qs[1:]))

    def test_callback_can_stop(self):
        seen = []
        res = rgf_attack(synthetic.radial(2), [0.1, 0.1], Untargeted(0), None, RgfConfig(),
                         callback=lambda s: seen.append(s) or len(seen) >= 3)
        assert res.iterations == 3 and len(seen) == 3

    @pytest.mark.parametrize("kw", [dict(beta=0), dict(q=0), dict(eta0=-1), dict(backtrack_factor=1.0),
                                    dict(forward_factor=1.0), dict(query_budget=0), dict(beta=1e-5)])
    def test_config_validated(self, kw):
        with pytest.raises(ValueError):
            RgfConfig(**kw)
