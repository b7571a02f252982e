import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dynlogit import (
    DimensionMismatch,
    ParameterVector,
    WrongShape,
    build_beta_only_systems,
    build_group_system,
    enumerate_lambda,
    loglik_arp,
    loglik_beta_only,
    loglik_cox,
    loglik_t3_closed_form,
)
from dynlogit.oracle import DgpSpec, cox_conditional_probability, factorized_block_probability

from conftest import central_gradient, panel_from_paths, random_panel, rel_err


def one(path, T, p=1, x=None):
    x = np.zeros((1, T, 1)) if x is None else np.asarray(x, float).reshape(1, T, -1)
    return panel_from_paths([path], T, p, x)


def test_lambda_examples():
    assert list(enumerate_lambda(2, 1)) == [(0, 1), (1, 0)]
    assert list(enumerate_lambda(3, 2)) == [(0, 1, 1), (1, 0, 1), (1, 1, 0)]
    assert list(enumerate_lambda(3, 0)) == [(0, 0, 0)]
    with pytest.raises(ValueError):
        enumerate_lambda(2, 3)


def test_t3_contribution_both_lags_zero():
    x = [0.2, 9.0, 1.4]
    beta = 0.8
    for y1, y3 in [(1, 0), (0, 1)]:
        ds = one([0, y1, 0, y3], 3, x=x)
        dxb = (1.4 - 0.2) * beta
        want = y3 * dxb - math.log1p(math.exp(dxb))
        assert loglik_arp(ds, None, [beta, 0.3]).value == pytest.approx(want, abs=1e-14)


def test_t3_contribution_lags_one_zero():
    # y0=1, y2=0, y3=1 with dx*beta = 0.5 and gamma = 1
    ds = one([1, 0, 0, 1], 3, x=[0.0, 0.0, 0.5])
    want = (0.5 - 1) - math.log1p(math.exp(-0.5))
    assert loglik_arp(ds, None, [1.0, 1.0]).value == pytest.approx(want, abs=1e-14)


def test_zero_parameters_give_log_half(rng):
    ds = random_panel(rng, 200, 3)
    rep = loglik_arp(ds, None, [0.0, 0.0])
    vals = rep.per_individual_group_values[:, 0]
    switch = ds.y[:, 1] + ds.y[:, 3] == 1
    assert np.allclose(vals[switch], math.log(0.5), atol=1e-15)
    assert np.all(vals[~switch] == 0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_closed_form_equals_general(seed):
    rng = np.random.default_rng(seed)
    ds = random_panel(rng, 100, 3, K=2)
    th = rng.normal(size=3)
    a, b = loglik_t3_closed_form(ds, th), loglik_arp(ds, None, th)
    assert abs(a.value - b.value) <= 1e-12 * max(1, abs(b.value))
    assert np.allclose(a.per_individual_scores, b.per_individual_scores, atol=1e-12)
    assert np.allclose(a.hessian, b.hessian, atol=1e-10)


def test_closed_form_needs_t3():
    with pytest.raises(WrongShape):
        loglik_t3_closed_form(random_panel(np.random.default_rng(0), 10, 4), [0.0, 0.0])


@pytest.mark.parametrize("T,p", [(3, 1), (4, 1), (5, 1), (4, 2), (5, 2), (6, 2), (7, 2)])
def test_blocks_match_factorized_oracle(rng, T, p):
    ds = random_panel(rng, 12, T, p=p, K=1)
    gs = build_group_system(T, p)
    th = rng.normal(size=1 + p)
    rep = loglik_arp(ds, gs, th)
    for i in range(ds.n):
        spec = DgpSpec(T, p, ParameterVector(th[:1], th[1:]), rng.normal(), ds.x[i],
                       tuple(int(v) for v in ds.y[i, :p]))
        for g, grp in enumerate(gs):
            cols = [ds.col(t) for t in grp.times]
            out = tuple(int(ds.y[i, c]) for c in cols)
            if sum(out) in (0, len(out)):
                assert rep.per_individual_group_values[i, g] == 0
                continue
            lags = tuple(tuple(int(ds.y[i, c - d]) for c in cols) for d in range(1, p + 1))
            want = math.log(factorized_block_probability(spec, grp.times, lags, out))
            assert rep.per_individual_group_values[i, g] == pytest.approx(want, abs=1e-12)


def test_three_point_group_candidate_count():
    ds = one([0, 1, 0, 0, 1, 0], 5)
    (g,) = [g for g, grp in enumerate(build_group_system(5, 1)) if grp.times == (1, 3, 5)]
    rep = loglik_arp(ds, None, [0.0, 0.0])
    assert rep.per_individual_group_values[0, g] == pytest.approx(-math.log(3), abs=1e-15)


@pytest.mark.parametrize("T,p,K", [(3, 1, 1), (4, 1, 2), (5, 2, 1), (4, 1, 0)])
def test_score_and_hessian_by_differences(rng, T, p, K):
    ds = random_panel(rng, 150, T, p=p, K=max(K, 1))
    if K == 0:
        ds = panel_from_paths(ds.y, T, p)
    for _ in range(5):
        th = rng.normal(size=K + p)
        rep = loglik_arp(ds, None, th)
        fd = central_gradient(lambda t: loglik_arp(ds, None, t).value, th)
        assert rel_err(rep.score, fd) < 1e-6
        fdh = central_gradient(lambda t: loglik_arp(ds, None, t).score, th)
        assert rel_err(rep.hessian, fdh) < 1e-4
        assert np.linalg.eigvalsh(rep.hessian).max() <= 1e-10


def test_common_covariate_shift_is_irrelevant(rng):
    ds = random_panel(rng, 80, 4, K=2)
    shifted = panel_from_paths(ds.y, 4, 1, ds.x + rng.normal(size=(80, 1, 2)))
    th = rng.normal(size=3)
    a, b = loglik_arp(ds, None, th), loglik_arp(shifted, None, th)
    assert a.value == pytest.approx(b.value, rel=1e-12)


def test_feedback_score_vanishes_when_lags_agree(rng):
    n = 60
    y1 = rng.integers(0, 2, n)
    y0 = rng.integers(0, 2, n)
    y = np.column_stack([y0, y1, y0, 1 - y1])
    ds = panel_from_paths(y, 3, 1, rng.normal(size=(n, 3, 1)))
    rep = loglik_arp(ds, None, [0.4, 1.3])
    assert abs(rep.score[1]) < 1e-14
    assert rep.hessian[0, 0] < 0


def test_parameter_dimension_checked(rng):
    with pytest.raises(DimensionMismatch):
        loglik_arp(random_panel(rng, 10, 3), None, [0.0])


# Cox


def test_cox_t3_formula(rng):
    for y0 in (0, 1):
        for y3 in (0, 1):
            for y2 in (0, 1):
                g = rng.normal()
                ds = panel_from_paths([[y0, 1 - y2, y2, y3]], 3)
                want = g * y2 * (y3 - y0) - math.log1p(math.exp(g * (y3 - y0)))
                assert loglik_cox(ds, g).value == pytest.approx(want, abs=1e-14)


def test_cox_zero_gamma_uniform(rng):
    ds = random_panel(rng, 100, 5)
    rep = loglik_cox(ds, 0.0)
    for i in range(ds.n):
        s = int(ds.y[i, 1:5].sum())
        want = -math.log(math.comb(4, s))
        assert rep.per_individual_values[i] == pytest.approx(want, abs=1e-14)


def test_cox_matches_true_conditional(rng):
    ds = random_panel(rng, 40, 4, K=1)
    g = 0.9
    rep = loglik_cox(ds, g)
    for i in range(ds.n):
        spec = DgpSpec(4, 1, ParameterVector([], [g]), rng.normal(), np.zeros((4, 0)),
                       (int(ds.y[i, 0]),))
        want = math.log(cox_conditional_probability(spec, ds.y[i]))
        assert rep.per_individual_values[i] == pytest.approx(want, abs=1e-12)


def test_cox_differs_from_restricted_new_likelihood(rng):
    ds = panel_from_paths(random_panel(rng, 300, 4).y, 4)
    assert abs(loglik_cox(ds, 0.7).value - loglik_arp(ds, None, [0.7]).value) > 1e-3


def test_cox_derivatives(rng):
    ds = random_panel(rng, 200, 5)
    for g in rng.normal(size=5):
        rep = loglik_cox(ds, g)
        fd = central_gradient(lambda t: loglik_cox(ds, t).value, [g])
        assert rel_err(rep.score, fd) < 1e-6
        assert rep.hessian[0, 0] <= 0


# beta only


def test_beta_only_single_block():
    for y1, y3 in [(1, 0), (0, 1)]:
        ds = one([0, y1, 0, y3], 3, x=[0.3, 5.0, -0.4])
        b = 1.7
        dxb = (-0.4 - 0.3) * b
        want = y3 * dxb - math.log1p(math.exp(dxb))
        assert loglik_beta_only(ds, [b]).value == pytest.approx(want, abs=1e-14)


def test_beta_only_zero_slope(rng):
    ds = random_panel(rng, 100, 6)
    rep = loglik_beta_only(ds, [0.0])
    want = 0.0
    for i in range(ds.n):
        path = [int(v) for v in ds.y[i]]
        b0, b1 = build_beta_only_systems(ds, i)
        for grp in b0 + b1:
            s = sum(path[t] for t in grp.times)
            if 0 < s < grp.m:
                want -= math.log(math.comb(grp.m, s))
    assert rep.value == pytest.approx(want, abs=1e-10)


@pytest.mark.parametrize("T,p", [(5, 1), (6, 2)])
def test_beta_only_derivatives(rng, T, p):
    ds = random_panel(rng, 150, T, p=p, K=2)
    for _ in range(5):
        b = rng.normal(size=2)
        rep = loglik_beta_only(ds, b)
        assert rel_err(rep.score, central_gradient(lambda t: loglik_beta_only(ds, t).value, b)) < 1e-6
        fdh = central_gradient(lambda t: loglik_beta_only(ds, t).score, b)
        assert rel_err(rep.hessian, fdh) < 1e-4
        assert np.linalg.eigvalsh(rep.hessian).max() <= 1e-10


def test_beta_only_blocks_are_free_of_feedback_in_factorized_form(rng):
    """With a constant lag inside the block, gamma and alpha cancel from the one-step form."""
    x = rng.normal(size=(5, 1))
    vals = []
    for gamma, alpha in [(-1.0, -2.0), (0.0, 0.0), (2.0, 3.0)]:
        spec = DgpSpec(5, 1, ParameterVector([0.6], [gamma]), alpha, x, (0,))
        vals.append(factorized_block_probability(spec, (1, 3, 5), ((1, 1, 1),), (0, 1, 0)))
    assert max(vals) - min(vals) < 1e-14
