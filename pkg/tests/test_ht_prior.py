import math

import numpy as np
import pytest

from plugins.common.errors import ValidationError
from plugins.ld_engine.ld_engine import LDSchedule, SuperSamplePair, sample_supersample, run_ld
from plugins.baselines.baselines import li_lipschitz_bound
from plugins.ht_prior.ht_prior import (
    DecisionFunction, HypothesisTestState, BranchStatistics, GaussianStep,
    update_y, belief, step_kl, gaussian_kl_same_cov, make_record, branch_statistics,
    accumulate_bound, bound_curve, two_branch_bound, kl_form_bound, chain_rule_check,
    theta_family_objective, search_scale, log_grid,
)


def constant_branch(T=8, zeta_sq=0.04, beta_eta=50.0, indicator=1, n=5, delta_y=None):
    return BranchStatistics(
        indicator=indicator,
        beta_eta=np.full(T, beta_eta),
        zeta_sq=np.full(T, zeta_sq),
        delta_y=np.zeros(T) if delta_y is None else np.asarray(delta_y, dtype=float),
        y_increments=np.zeros((T, 2)),
        n=n,
    )


@pytest.fixture
def trajectory(blobs, logistic):
    pair = sample_supersample(blobs, 6, (2, 1))
    return run_ld(logistic, pair, 1, LDSchedule.constant(20, 0.05, 500.0), seed=(2, 1, 1))


class TestDecisionFunction:
    def test_erf_value(self):
        pi = belief(DecisionFunction("erf", 1.0), HypothesisTestState(y1=0.0, y2=1.0))
        assert pi.pi1 == pytest.approx(0.9214, abs=1e-4)
        assert pi.pi2 == pytest.approx(0.0786, abs=1e-4)

    def test_kinds(self):
        x = np.array([-1.0, 0.0, 2.0])
        np.testing.assert_allclose(DecisionFunction("sign")(x), [0.0, 0.5, 1.0])
        np.testing.assert_allclose(DecisionFunction("constant-half")(x), 0.5)
        np.testing.assert_allclose(DecisionFunction("tanh", 0.5)(x), 0.5 * (1 + np.tanh(x / 0.5)))

    def test_small_width_approaches_sign(self):
        x = np.array([-0.3, 0.2])
        np.testing.assert_allclose(DecisionFunction("erf", 1e-4)(x), [0.0, 1.0], atol=1e-12)

    def test_width_convention(self):
        x = np.linspace(-3.0, 3.0, 13)
        np.testing.assert_allclose(DecisionFunction("erf", 2.0)(x), DecisionFunction("erf", 1.0)(x / 2.0))
        steep, flat = DecisionFunction("erf", 0.1)(0.3), DecisionFunction("erf", 10.0)(0.3)
        assert steep > flat > 0.5

    @pytest.mark.parametrize("theta", [DecisionFunction("erf", 0.7), DecisionFunction("tanh", 2.0),
                                       DecisionFunction("sign")])
    def test_symmetric_theta_summands(self, rng, theta):
        delta_y = rng.normal(scale=2.0, size=10)
        for indicator in (0, 1):
            branch = constant_branch(T=10, indicator=indicator, delta_y=delta_y)
            flipped = -delta_y if indicator == 1 else delta_y
            expected = branch.beta_eta * branch.zeta_sq * theta(flipped) ** 2
            np.testing.assert_allclose(branch.summands(theta), expected, rtol=1e-12, atol=1e-13)

    def test_extreme_statistic_is_clamped(self):
        assert DecisionFunction("erf", 1.0)(1e300) == 1.0
        assert DecisionFunction("tanh", 3.0)(-np.inf) == 0.0

    def test_parse(self):
        assert DecisionFunction.parse("erf:2.5") == DecisionFunction("erf", 2.5)
        assert DecisionFunction.parse("half").kind == "constant-half"
        assert DecisionFunction.parse("tanh").label == "tanh:1"
        assert DecisionFunction.parse("sign").label == "sign"
        with pytest.raises(ValidationError, match="Unknown decision function"):
            DecisionFunction.parse("logistic")
        with pytest.raises(ValidationError, match="scale"):
            DecisionFunction.parse("erf:fast")
        with pytest.raises(ValidationError, match="positive"):
            DecisionFunction("erf", -1.0)


class TestTestStatistic:
    def test_update_y_example(self):
        state = update_y(HypothesisTestState(), [0.0], [-0.05], 0.1, 2.0, [0.0], [1.0], [0.0], 2)
        assert state.y1 == pytest.approx(0.0, abs=1e-18)
        assert state.y2 == pytest.approx(0.0125)
        assert state.delta_y == pytest.approx(0.0125)
        assert state.t == 1

    def test_update_y_checks(self):
        with pytest.raises(ValidationError, match="positive"):
            update_y(HypothesisTestState(), [0.0], [0.0], 0.0, 1.0, [0.0], [0.0], [0.0], 2)
        with pytest.raises(ValidationError, match="dimension"):
            update_y(HypothesisTestState(), [0.0], [0.0, 1.0], 0.1, 1.0, [0.0], [0.0], [0.0], 2)

    def test_branch_statistics_match_stepwise_updates(self, trajectory):
        stats = branch_statistics(trajectory)
        state = HypothesisTestState()
        for t in range(trajectory.T):
            assert stats.delta_y[t] == pytest.approx(state.delta_y, abs=1e-9)
            state = update_y(state, trajectory.params[t], trajectory.params[t + 1],
                             trajectory.schedule.eta[t], trajectory.schedule.beta[t],
                             trajectory.loo_grads[t], trajectory.cand_grads[t, 0],
                             trajectory.cand_grads[t, 1], trajectory.n)
        assert stats.indicator == 1
        np.testing.assert_allclose(stats.zeta_sq, np.sum(trajectory.zeta ** 2, axis=1))


class TestStepKL:
    def test_closed_form_value(self):
        assert step_kl(0.01, 1e4, 50, [0.03, 0.04], 1, 0.5) == pytest.approx(6.25e-6)

    @pytest.mark.parametrize("indicator", [0, 1])
    def test_matches_gaussian_kl(self, rng, indicator):
        eta, beta, n, theta_val = 0.02, 300.0, 7, 0.3
        w, loo, g1, g2 = (rng.normal(size=3) for _ in range(4))
        own = g1 if indicator == 1 else g2
        mu_q = w - eta * ((n - 1) / n * loo + own / n)
        mu_p = w - eta * ((n - 1) / n * loo + (theta_val * g1 + (1 - theta_val) * g2) / n)
        expected = gaussian_kl_same_cov(mu_q, mu_p, 2 * eta / beta)
        assert step_kl(eta, beta, n, g1 - g2, indicator, theta_val) == pytest.approx(expected, rel=1e-12)

    def test_matches_gaussian_kl_on_random_inputs(self, rng):
        for _ in range(10000):
            eta, beta = rng.uniform(1e-3, 0.5), rng.uniform(1.0, 1e4)
            n, indicator, theta_val = int(rng.integers(1, 100)), int(rng.integers(0, 2)), rng.uniform()
            d = int(rng.integers(1, 6))
            w, loo, g1, g2 = (rng.normal(size=d) for _ in range(4))
            own = g1 if indicator == 1 else g2
            mu_q = w - eta * ((n - 1) / n * loo + own / n)
            mu_p = w - eta * ((n - 1) / n * loo + (theta_val * g1 + (1 - theta_val) * g2) / n)
            expected = gaussian_kl_same_cov(mu_q, mu_p, 2 * eta / beta)
            assert step_kl(eta, beta, n, g1 - g2, indicator, theta_val) == pytest.approx(
                expected, rel=1e-12, abs=1e-12)

    def test_input_checks(self):
        with pytest.raises(ValidationError, match="θ value"):
            step_kl(0.1, 1.0, 2, [1.0], 1, 1.5)
        with pytest.raises(ValidationError, match="Indicator"):
            step_kl(0.1, 1.0, 2, [1.0], 2, 0.5)

    def test_records_carry_step_kl(self):
        branch = constant_branch(T=3, indicator=0, delta_y=[0.0, 0.5, -0.5])
        theta = DecisionFunction("erf", 2.0)
        for record in branch.records(theta):
            eta, beta = 1.0, 50.0
            expected = step_kl(eta, beta, 5, [0.2], 0, record.theta_val)
            assert record.kl == pytest.approx(expected)


class TestAccumulation:
    def test_single_record(self):
        record = make_record(0, 1.0, 1.0, 10, [1.0], 1, 0.0)
        assert record.summand == 1.0
        assert accumulate_bound([[record]], 10) == pytest.approx(0.0707107, abs=1e-6)

    def test_two_branches(self):
        first = [make_record(t, 0.1, 100.0, 4, [0.5], 1, 0.25) for t in range(3)]
        second = [make_record(t, 0.1, 100.0, 4, [0.2, 0.1], 0, 0.6) for t in range(3)]
        v1 = math.sqrt(sum(r.summand for r in first))
        v2 = math.sqrt(sum(r.summand for r in second))
        assert accumulate_bound([first, second], 4) == pytest.approx(two_branch_bound(v1, v2, 4))

    def test_cell_averages_inside_root(self):
        a = [make_record(0, 1.0, 1.0, 2, [1.0], 1, 0.0)]
        b = [make_record(0, 1.0, 1.0, 2, [3.0], 1, 0.0)]
        assert accumulate_bound([[a, b]], 2) == pytest.approx(math.sqrt(5.0) / (2 * math.sqrt(2.0)))

    def test_empty(self):
        with pytest.raises(ValidationError):
            accumulate_bound([], 3)

    def test_curve_final_value(self):
        branches = [constant_branch(indicator=1), constant_branch(indicator=0, zeta_sq=0.09)]
        theta = DecisionFunction("constant-half")
        curve = bound_curve([b.summands(theta) for b in branches], 5)
        assert curve.shape == (8,)
        assert np.all(np.diff(curve) >= 0)
        assert curve[-1] == pytest.approx(theta_family_objective(theta, branches, 5))

    def test_constant_half_closed_form(self):
        T, zeta_sq, beta_eta, n = 8, 0.04, 50.0, 5
        branch = constant_branch(T, zeta_sq, beta_eta, n=n)
        value = theta_family_objective(DecisionFunction("constant-half"), [branch], n)
        assert value == pytest.approx(math.sqrt(T * beta_eta * zeta_sq / 4) / (n * math.sqrt(2)))

    def test_replicated_curve(self):
        cells = [[constant_branch(zeta_sq=0.01), constant_branch(zeta_sq=0.09)],
                 [constant_branch(indicator=0, zeta_sq=0.04)] * 2]
        theta = DecisionFunction("constant-half")
        summands = [[b.summands(theta) for b in cell] for cell in cells]
        curve = bound_curve(summands, 5)
        assert curve.shape == (8,)
        assert curve[-1] == pytest.approx(theta_family_objective(theta, cells, 5))
        assert curve[-1] >= bound_curve([s for cell in summands for s in cell], 5)[-1]

    def test_worst_case_theta_meets_lipschitz_envelope(self):
        L, n, T, beta_eta = 0.8, 6, 40, 25.0
        # sign(ΔY) = 0 while U_J = 1: every step is scored as a miss
        branch = constant_branch(T=T, zeta_sq=(2 * L) ** 2, beta_eta=beta_eta, indicator=1, n=n,
                                 delta_y=np.full(T, -1.0))
        envelope = li_lipschitz_bound(branch.beta_eta, L, n)
        assert theta_family_objective(DecisionFunction("sign"), [branch], n) == pytest.approx(envelope, rel=1e-12)
        half = theta_family_objective(DecisionFunction("constant-half"), [branch], n)
        assert half == pytest.approx(envelope / 2, rel=1e-12)


class TestIndistinguishableCandidates:
    def test_identical_candidates_carry_no_information(self, blobs, logistic):
        row = blobs.draw(5, np.random.default_rng(3))
        pair = SuperSamplePair((row, row), u=[1, 2, 1, 2, 1], j=2)
        trajectory = run_ld(logistic, pair, 1, LDSchedule.constant(10, 0.05, 200.0), seed=(8, 0, 1))
        stats = branch_statistics(trajectory)
        np.testing.assert_array_equal(stats.delta_y, 0.0)
        pi = belief(DecisionFunction("erf", 1.0), HypothesisTestState(*stats.y_increments.sum(axis=0)))
        assert (pi.pi1, pi.pi2) == (0.5, 0.5)
        for theta in (DecisionFunction("erf", 1.0), DecisionFunction("sign"), DecisionFunction("constant-half")):
            np.testing.assert_array_equal(stats.summands(theta), 0.0)


class TestKLForm:
    def test_weighted(self):
        assert kl_form_bound([0.5, 2.0], [0.75, 0.25]) == pytest.approx(0.75 * 1.0 + 0.25 * 2.0)
        assert kl_form_bound([0.5, 0.5]) == pytest.approx(1.0)

    def test_checks(self):
        with pytest.raises(ValidationError, match="nonnegative"):
            kl_form_bound([-0.1])
        with pytest.raises(ValidationError, match="align"):
            kl_form_bound([0.1, 0.2], [1.0])


class TestChainRule:
    def test_equality_for_constant_drift_gap(self):
        q = [GaussianStep([1.0, 0.0], 0.5)] * 4
        p = [GaussianStep([0.0, 0.0], 0.5)] * 4
        lhs, rhs = chain_rule_check(q, p)
        assert lhs == pytest.approx(rhs)
        assert rhs == pytest.approx(4 * 1.0 / (2 * 0.5))

    def test_inequality(self, rng):
        q = [GaussianStep(rng.normal(size=2), 0.1) for _ in range(5)]
        p = [GaussianStep(rng.normal(size=2), 0.1) for _ in range(5)]
        lhs, rhs = chain_rule_check(q, p)
        assert lhs <= rhs

    def test_weighted_chains(self):
        q = [[GaussianStep([1.0], 1.0)], [GaussianStep([2.0], 1.0)]]
        p = [[GaussianStep([0.0], 1.0)], [GaussianStep([0.0], 1.0)]]
        lhs, rhs = chain_rule_check(q, p, weights=[0.5, 0.5])
        assert lhs == pytest.approx(0.5 * 0.5 + 0.5 * 2.0)
        assert rhs == pytest.approx(lhs)

    def test_mismatched_variances(self):
        with pytest.raises(ValidationError, match="equal step covariances"):
            chain_rule_check([GaussianStep([0.0], 1.0)], [GaussianStep([0.0], 2.0)])


class TestScaleSearch:
    def test_grid(self):
        grid = log_grid(1e-2, 1e2, 5)
        np.testing.assert_allclose(grid, [1e-2, 1e-1, 1.0, 10.0, 100.0])
        with pytest.raises(ValidationError):
            log_grid(1.0, 0.5)

    def test_search_beats_grid(self, trajectory):
        branches = [branch_statistics(trajectory)]
        grid = log_grid(1e-3, 1e3, 13)
        a, value = search_scale("erf", branches, trajectory.n, grid)
        grid_values = [theta_family_objective(DecisionFunction("erf", g), branches, trajectory.n) for g in grid]
        assert value <= min(grid_values) + 1e-15
        assert value == pytest.approx(theta_family_objective(DecisionFunction("erf", a), branches, trajectory.n))

    def test_flat_objective_prefers_smallest_scale(self):
        branch = constant_branch(delta_y=np.zeros(8))
        a, _ = search_scale("tanh", [branch], 5, log_grid(0.1, 10.0, 3))
        assert a == pytest.approx(0.1)
