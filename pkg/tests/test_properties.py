"""Randomized invariants checked with hypothesis."""

from __future__ import annotations

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from discount.confidence import BandSpec, UclConfig, d_u, ucl_sw2, ucl_w2
from discount.metrics import coverage, diversity, mmd_sq
from discount.optimizer import eta_balance, interval_narrowing_step
from discount.ot import (
    QuantileView,
    lp_ot_oracle,
    monotone_plan,
    sample_projections,
    sliced_wasserstein_sq,
    wasserstein1d_sq,
)

finite = st.floats(-100, 100, allow_nan=False, allow_infinity=False)
samples = st.lists(finite, min_size=1, max_size=30).map(np.array)
small = st.lists(finite, min_size=1, max_size=6).map(np.array)


def clouds(max_n=8, max_d=4):
    return st.integers(1, max_d).flatmap(lambda d: st.tuples(
        arrays(float, st.tuples(st.integers(1, max_n), st.just(d)), elements=st.floats(-10, 10)),
        arrays(float, st.tuples(st.integers(1, max_n), st.just(d)), elements=st.floats(-10, 10)),
    ))


@given(samples, samples)
def test_w2_symmetric(a, b):
    assert abs(wasserstein1d_sq(a, b) - wasserstein1d_sq(b, a)) <= 1e-9 * (1 + wasserstein1d_sq(a, b))


@given(samples, st.floats(-50, 50))
def test_w2_translation(a, c):
    assert abs(wasserstein1d_sq(a, a + c) - c * c) <= 1e-8 * (1 + c * c)


@given(samples, st.integers(0, 2**31))
def test_w2_identity(a, seed):
    assert wasserstein1d_sq(a, np.random.default_rng(seed).permutation(a)) == 0.0


@given(small, small)
def test_w2_matches_lp(a, b):
    assert abs(wasserstein1d_sq(a, b) - lp_ot_oracle(a, b)[0]) <= 1e-7 * (1 + np.max(np.abs(np.r_[a, b])) ** 2)


@given(samples, samples)
def test_monotone_plan_is_coupling(a, b):
    plan = monotone_plan(a, b)
    assert plan.is_coupling() and np.all(plan.weights >= 0)


@settings(max_examples=50, deadline=None)
@given(clouds(max_n=6), st.integers(1, 10), st.integers(0, 1000))
def test_sliced_below_full(pair, n_proj, seed):
    a, b = pair
    theta = sample_projections(a.shape[1], n_proj, seed)
    full = lp_ot_oracle(a, b)[0]
    assert sliced_wasserstein_sq(a, b, theta) <= full + 1e-9 * (1 + full)


@given(samples, samples, st.floats(0.01, 0.99), st.floats(0.01, 0.5))
def test_d_u_nonnegative_and_bounds_gap(a, b, u, alpha):
    va, vb = QuantileView.of(a), QuantileView.of(b)
    d = d_u(va, vb, BandSpec(alpha, va.n), u)
    assert d >= 0 and d >= abs(va(u) - vb(u)) - 1e-12


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 500), st.integers(1, 500), st.floats(-3, 3), st.integers(0, 2**31))
def test_ucl_dominates(n, m, shift, seed):
    rng = np.random.default_rng(seed)
    y, ys = rng.normal(size=n), rng.normal(shift, size=m)
    assert ucl_w2(y, ys) >= wasserstein1d_sq(y, ys)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 200), st.integers(1, 4), st.integers(1, 12), st.integers(0, 2**31))
def test_sliced_ucl_dominates(n, d, n_proj, seed):
    rng = np.random.default_rng(seed)
    x, xp = rng.normal(size=(n, d)), rng.normal(rng.normal(size=d), size=(n, d))
    theta = sample_projections(d, n_proj, seed % 1000)
    cfg = UclConfig(grid_size=200)
    assert ucl_sw2(x, xp, theta, cfg=cfg) >= sliced_wasserstein_sq(x, xp, theta)


@settings(deadline=None)
@given(clouds(max_n=12), st.floats(0.1, 5))
def test_mmd_floor_and_symmetry(pair, h):
    a, b = pair
    assert mmd_sq(a, b) >= -1e-9
    assert mmd_sq(a, b, h) >= -1e-9
    assert abs(mmd_sq(a, b, h) - mmd_sq(b, a, h)) <= 1e-12


@given(st.lists(st.floats(0, 1), min_size=1, max_size=50), st.floats(0, 1), st.floats(0, 1))
def test_coverage_monotone(y, t1, t2):
    lo, hi = sorted((t1, t2))
    assert 0.0 <= coverage(y, hi) <= coverage(y, lo) <= 1.0


@given(clouds(max_n=10).map(lambda p: p[0]), st.floats(0.1, 10), st.floats(-5, 5))
def test_diversity_affine(x, c, shift):
    base = diversity(x)
    assert abs(diversity(x + shift) - base) <= 1e-9 * (1 + base)
    assert abs(diversity(c * x) - c * base) <= 1e-9 * (1 + c * base)


@given(finite, finite)
def test_eta_balance_range(a, b):
    assert 0.0 <= eta_balance(a, b) <= 1.0


@given(st.floats(0, 1), st.floats(0, 1), st.floats(0.001, 0.999),
       st.lists(st.tuples(st.floats(0, 5), st.floats(0, 5)), min_size=1, max_size=40))
def test_interval_length(p, q, kappa, ucl_seq):
    l, r = sorted((p, q))
    width = r - l
    for t, ucls in enumerate(ucl_seq, start=1):
        eta, l, r = interval_narrowing_step(l, r, kappa, ucls, (1.0, 1.0))
        assert l <= eta <= r
        assert abs((r - l) - (1 - kappa) ** t * width) <= 1e-12
