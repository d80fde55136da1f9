"""Empirical samples, projections, exact 1-D transport and Q objectives."""

from __future__ import annotations

import itertools

import numpy as np
import pytest

from discount.errors import InvalidArgumentError
from discount.models import BuiltinModel, ModelSpec
from discount.ot import (
    EmpiricalSample,
    ProjectionSet,
    QuantileView,
    TransportPlan,
    lp_ot_oracle,
    monotone_plan,
    monotone_plans,
    q_x,
    q_y,
    quantile_index,
    replicate,
    sample_projections,
    sliced_wasserstein_sq,
    wasserstein1d_sq,
)


def brute_force_w2(a, b):
    """Exhaustive minimum over permutation couplings (equal sizes)."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    return min(np.mean((a - b[list(p)]) ** 2) for p in itertools.permutations(range(len(b))))


class TestEmpiricalSample:
    def test_vector_becomes_column(self):
        s = EmpiricalSample(np.arange(4.0))
        assert s.points.shape == (4, 1)
        assert s.feature_names == ["x0"] and s.feature_kinds == ["numeric"]

    def test_rejects_non_finite(self):
        with pytest.raises(InvalidArgumentError):
            EmpiricalSample(np.array([[0.0, np.nan]]))

    def test_rejects_empty(self):
        with pytest.raises(InvalidArgumentError):
            EmpiricalSample(np.zeros((0, 2)))

    def test_metadata_length_checked(self):
        with pytest.raises(InvalidArgumentError):
            EmpiricalSample(np.zeros((2, 2)), feature_names=["a"])

    def test_one_hot_groups(self):
        s = EmpiricalSample(np.zeros((1, 4)), ["a", "c=x", "c=y", "b"], ["numeric", "c", "c", "numeric"])
        assert s.one_hot_groups() == {"c": [1, 2]}


class TestProjections:
    def test_one_dimensional_rows_are_signs(self):
        theta = sample_projections(1, 4, 7)
        assert set(np.abs(theta.directions).ravel()) == {1.0}

    def test_uniformity_moments(self):
        theta = sample_projections(3, 100_000, 1)
        assert np.all(np.abs(theta.directions.mean(axis=0)) < 0.02)
        assert np.mean(np.sum(theta.directions ** 2, axis=1)) == pytest.approx(1.0, abs=1e-12)

    def test_seed_determinism(self):
        a = sample_projections(5, 8, 42)
        b = sample_projections(5, 8, 42)
        assert np.array_equal(a.directions, b.directions)

    def test_unit_norm(self):
        theta = sample_projections(6, 50, 3)
        assert np.allclose(np.linalg.norm(theta.directions, axis=1), 1.0, atol=1e-12)

    @pytest.mark.parametrize("d,n", [(0, 3), (3, 0)])
    def test_invalid(self, d, n):
        with pytest.raises(InvalidArgumentError):
            sample_projections(d, n, 0)

    def test_project_dimension_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            sample_projections(3, 2, 0).project(np.zeros((4, 2)))


class TestQuantileView:
    def test_right_continuous_rule(self):
        q = QuantileView.of([3.0, 1.0, 2.0, 4.0])
        # ceil(u n) with n = 4
        assert q(0.25) == 1.0 and q(0.26) == 2.0 and q(0.5) == 2.0 and q(1.0) == 4.0
        assert q(1e-9) == 1.0

    def test_index_absorbs_rounding(self):
        # 0.3 * 10 is 3.0000000000000004 in floating point
        assert quantile_index(0.3, 10) == 2

    def test_nondecreasing(self, rng):
        q = QuantileView.of(rng.normal(size=37))
        u = np.linspace(0.001, 1.0, 500)
        assert np.all(np.diff(q(u)) >= 0)


class TestWasserstein1d:
    def test_identical(self):
        assert wasserstein1d_sq([0, 1, 2], [0, 1, 2]) == 0.0

    def test_point_masses(self):
        assert wasserstein1d_sq([0.0], [3.0]) == 9.0

    def test_two_points(self):
        assert wasserstein1d_sq([0, 1], [1, 2]) == pytest.approx(1.0, abs=1e-15)
        assert brute_force_w2([0, 1], [1, 2]) == 1.0

    def test_unequal_sizes_against_lp(self, rng):
        for _ in range(30):
            a = rng.normal(size=rng.integers(1, 7))
            b = rng.normal(size=rng.integers(1, 7))
            assert wasserstein1d_sq(a, b) == pytest.approx(lp_ot_oracle(a, b)[0], abs=1e-9)

    def test_empty(self):
        with pytest.raises(InvalidArgumentError):
            wasserstein1d_sq([], [1.0])

    def test_translation(self, rng):
        a = rng.normal(size=20)
        assert wasserstein1d_sq(a, a + 1.7) == pytest.approx(1.7 ** 2, rel=1e-12)


class TestSliced:
    def test_identical(self, rng):
        x = rng.normal(size=(10, 3))
        assert sliced_wasserstein_sq(x, x, sample_projections(3, 5, 0)) == 0.0

    def test_sign_flips_in_one_dimension(self, rng):
        a, b = rng.normal(size=9), rng.normal(size=9)
        theta = ProjectionSet(np.array([[1.0], [-1.0]]), 0)
        assert sliced_wasserstein_sq(a[:, None], b[:, None], theta) == pytest.approx(wasserstein1d_sq(a, b), abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            sliced_wasserstein_sq(np.zeros((2, 3)), np.zeros((2, 2)), sample_projections(3, 2, 0))

    def test_point_mass_limit(self):
        v = np.array([[1.0, -2.0, 0.5]])
        sw = sliced_wasserstein_sq(np.zeros((1, 3)), v, sample_projections(3, 100_000, 0))
        assert sw == pytest.approx(np.sum(v ** 2) / 3, rel=0.02)


class TestMonotonePlan:
    def test_single_pair(self):
        assert np.array_equal(monotone_plan([5.0], [2.0]).weights, [[1.0]])

    def test_sorted_identity(self):
        assert np.allclose(monotone_plan([1, 2, 3], [1, 2, 3]).weights, np.eye(3) / 3)

    def test_permutation_oracle(self, rng):
        for _ in range(20):
            a, b = rng.normal(size=4), rng.normal(size=4)
            plan = monotone_plan(a, b)
            assert plan.cost(a, b) == pytest.approx(brute_force_w2(a, b), abs=1e-12)

    def test_unequal_sizes_is_coupling(self, rng):
        plan = monotone_plan(rng.normal(size=5), rng.normal(size=3))
        assert plan.is_coupling() and np.all(plan.weights >= 0)

    def test_equal_sizes_is_scaled_permutation(self, rng):
        w = monotone_plan(rng.normal(size=6), rng.normal(size=6)).weights * 6
        assert np.array_equal(np.sort(w.ravel())[-6:], np.ones(6))
        assert np.allclose(w.sum(axis=0), 1) and np.allclose(w.sum(axis=1), 1)

    def test_cost_equals_w2(self, rng):
        a, b = rng.normal(size=7), rng.normal(size=4)
        assert monotone_plan(a, b).cost(a, b) == pytest.approx(wasserstein1d_sq(a, b), abs=1e-12)

    def test_ties_are_stable(self):
        plan = monotone_plan([1.0, 1.0, 0.0], [2.0, 3.0, 4.0]).weights * 3
        assert np.array_equal(plan, [[0, 1, 0], [0, 0, 1], [1, 0, 0]])


class TestTransportPlan:
    def test_marginal_violation(self):
        with pytest.raises(InvalidArgumentError):
            TransportPlan(np.array([[1.0, 0.0], [0.0, 0.0]])).validate()

    def test_negative_rejected(self):
        with pytest.raises(InvalidArgumentError):
            TransportPlan(np.array([[-0.5, 1.0], [1.0, -0.5]]) / 2).validate()


class TestQObjectives:
    def test_identity_plans(self, rng):
        x = rng.normal(size=(5, 2))
        theta = sample_projections(2, 3, 0)
        assert q_x(x, x, theta, [np.eye(5) / 5] * 3) == 0.0

    def test_monotone_plans_give_sliced_distance(self, rng):
        x, xp = rng.normal(size=(8, 3)), rng.normal(size=(8, 3)) + 1
        theta = sample_projections(3, 6, 2)
        assert q_x(x, xp, theta, monotone_plans(x, xp, theta)) == pytest.approx(
            sliced_wasserstein_sq(x, xp, theta), abs=1e-12)

    def test_independent_plans(self, rng):
        x, xp = rng.normal(size=(4, 2)), rng.normal(size=(4, 2))
        theta = sample_projections(2, 3, 5)
        px, pxp = theta.project(x), theta.project(xp)
        oracle = np.mean([np.mean((px[:, k][:, None] - pxp[:, k][None, :]) ** 2) for k in range(3)])
        assert q_x(x, xp, theta, [np.full((4, 4), 1 / 16)] * 3) == pytest.approx(oracle, abs=1e-12)

    def test_bad_plan_rejected(self, rng):
        x = rng.normal(size=(3, 2))
        theta = sample_projections(2, 1, 0)
        with pytest.raises(InvalidArgumentError):
            q_x(x, x, theta, [np.eye(3)])

    def test_q_y_zero_at_match(self):
        model = BuiltinModel(ModelSpec("logistic", [2, 1], np.array([1.0, -1.0, 0.2])))
        x = np.array([[0.0, 1.0], [2.0, 0.5], [1.0, 1.0]])
        ys = model.predict(x)
        assert q_y(x, ys, model, monotone_plan(ys, ys)) == pytest.approx(0.0, abs=1e-15)

    def test_q_y_direct(self):
        model = BuiltinModel(ModelSpec("logistic", [1, 1], np.array([0.0, 0.0])))
        # b(x) = 0.5 everywhere; y* = {1, 1}
        assert q_y(np.zeros((2, 1)), [1.0, 1.0], model, np.eye(2) / 2) == pytest.approx(0.25)

    def test_q_y_consistency(self, rng):
        model = BuiltinModel(ModelSpec("logistic", [2, 1], rng.normal(size=3)))
        x = rng.normal(size=(6, 2))
        ys = rng.uniform(size=6)
        y = model.predict(x)
        assert q_y(x, ys, model, monotone_plan(y, ys)) == pytest.approx(wasserstein1d_sq(y, ys), abs=1e-12)


class TestLpOracle:
    def test_example(self):
        cost, plan = lp_ot_oracle([0, 1], [1, 2])
        assert cost == pytest.approx(1.0) and plan.is_coupling()

    def test_identical(self):
        assert lp_ot_oracle([3, 1, 2], [1, 2, 3])[0] == pytest.approx(0.0, abs=1e-12)

    def test_size_limit(self):
        with pytest.raises(InvalidArgumentError):
            lp_ot_oracle(np.zeros(9), np.zeros(3))

    def test_agrees_with_monotone_plan(self, rng):
        for _ in range(100):
            n, m = rng.integers(1, 9, size=2)
            a, b = rng.normal(size=n), rng.normal(size=m)
            assert abs(lp_ot_oracle(a, b)[0] - monotone_plan(a, b).cost(a, b)) < 1e-9


def test_replicate():
    assert np.array_equal(replicate([1.0, 2.0], 3), [1, 1, 1, 2, 2, 2])
