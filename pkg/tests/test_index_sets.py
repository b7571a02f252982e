import itertools
import math

import pytest
from hypothesis import given, settings, strategies as st

from dynlogit import (
    IdentificationError,
    blocks_for_individual,
    build_beta_only_systems,
    build_group_system,
    cox_admissible_set,
    is_admissible,
    maximal_admissible_sets,
)

from conftest import panel_from_paths


def brute_force_maximal(eligible, p):
    eligible = sorted(eligible)
    adm = [set(c) for r in range(2, len(eligible) + 1)
           for c in itertools.combinations(eligible, r) if is_admissible(c, p)]
    keep = [s for s in adm if not any(s < o for o in adm)]
    return sorted(tuple(sorted(s)) for s in keep)


def times_of(gs):
    return [g.times for g in gs]


@pytest.mark.parametrize("T,p,expected", [
    (3, 1, [(1, 3)]),
    (4, 1, [(1, 3), (1, 4), (2, 4)]),
    (5, 1, [(1, 3, 5), (1, 4), (2, 4), (2, 5)]),
    (4, 2, [(1, 4)]),
    # frozen from brute_force_maximal(range(1, 7), 1)
    (6, 1, [(1, 3, 5), (1, 3, 6), (1, 4, 6), (2, 4, 6), (2, 5)]),
])
def test_golden_group_systems(T, p, expected):
    assert times_of(build_group_system(T, p)) == expected


def test_t6_golden_matches_brute_force():
    assert brute_force_maximal(range(1, 7), 1) == times_of(build_group_system(6, 1))


@pytest.mark.parametrize("p", [1, 2, 3])
@pytest.mark.parametrize("T", range(3, 9))
def test_matches_exhaustive_enumeration(T, p):
    if T < p + 2:
        pytest.skip("not identified")
    assert times_of(build_group_system(T, p)) == brute_force_maximal(range(1, T + 1), p)


@pytest.mark.parametrize("T,p", [(2, 1), (3, 2), (4, 3), (5, 0)])
def test_short_panels_rejected(T, p):
    with pytest.raises(IdentificationError):
        build_group_system(T, p)


@settings(max_examples=60, deadline=None)
@given(st.sets(st.integers(1, 10), max_size=8), st.integers(1, 3))
def test_maximal_sets_are_admissible_and_unextendable(eligible, p):
    sets = maximal_admissible_sets(sorted(eligible), p)
    assert sets == brute_force_maximal(eligible, p)
    for s in sets:
        assert is_admissible(s, p)
        for t in eligible - set(s):
            assert not is_admissible(sorted(s + (t,)), p)


def test_block_read_off_switcher():
    ds = panel_from_paths([[0, 1, 0, 0]], T=3)
    (b,) = blocks_for_individual(ds, 0, build_group_system(3, 1))
    assert b.group.times == (1, 3)
    assert b.lag_patterns == ((0, 0),)
    assert b.outcome == (1, 0)
    assert b.suff_stat == 1 and b.informative


def test_block_without_switch_is_uninformative():
    ds = panel_from_paths([[0, 1, 1, 1]], T=3)
    (b,) = blocks_for_individual(ds, 0, build_group_system(3, 1))
    assert b.suff_stat == 2 and not b.informative


def test_block_read_off_second_order():
    ds = panel_from_paths([[1, 0, 1, 0, 0, 1]], T=4, p=2)
    (b,) = blocks_for_individual(ds, 0, build_group_system(4, 2))
    assert b.group.times == (1, 4)
    assert b.lag_patterns == ((0, 0), (1, 0))
    assert b.outcome == (1, 1)
    assert b.suff_stat == 2 and not b.informative


def test_beta_only_constant_zero_lag():
    ds = panel_from_paths([[0, 0, 0, 1]], T=3)
    b0, b1 = build_beta_only_systems(ds, 0)
    assert [g.times for g in b0] == [(1, 3)]
    assert b1 == []


def test_beta_only_eligible_subset():
    # lag-0 eligible times {1, 3, 4}
    assert maximal_admissible_sets([1, 3, 4], 1) == [(1, 3), (1, 4)]
    ds = panel_from_paths([[0, 1, 0, 0, 1, 1]], T=5)
    b0, _ = build_beta_only_systems(ds, 0)
    assert [g.times for g in b0] == [(1, 3), (1, 4)]


def test_beta_only_all_lags_one():
    ds = panel_from_paths([[1, 1, 1, 1, 1]], T=4)
    b0, _ = build_beta_only_systems(ds, 0)
    assert b0 == []


def test_cox_examples():
    assert cox_admissible_set((0, 1, 0, 1)) == [(0, 0, 1, 1), (0, 1, 0, 1)]
    # interior sum 2 over two slots leaves one pattern
    assert cox_admissible_set((1, 1, 1, 0)) == [(1, 1, 1, 0)]
    assert cox_admissible_set((1, 0, 0, 0, 1)) == [(1, 0, 0, 0, 1)]


@settings(max_examples=80, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=4, max_size=9))
def test_cox_set_size_and_invariants(path):
    T = len(path) - 1
    s = sum(path[1:T])
    out = cox_admissible_set(path)
    assert len(out) == math.comb(T - 1, s)
    assert tuple(path) in out
    assert all(q[0] == path[0] and q[-1] == path[-1] and sum(q[1:T]) == s for q in out)
    assert out == sorted(set(out))
