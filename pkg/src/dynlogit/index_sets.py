"""
Sufficient-statistic group systems.

A *group* is a set of periods ``t_1 < ... < t_m`` (``m >= 2``) whose
consecutive gaps are at least ``p + 1``. The estimators condition on the
lagged outcomes attached to each period of a group and on the within-group
outcome sum (or per-alternative counts), and only the inclusion-maximal
groups are used.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence, Union


from .errors import IdentificationError
from .panel_data import MnlPanelDataset, PanelDataset

__all__ = [
    "Group",
    "GroupSystem",
    "ConditionalBlock",
    "is_admissible",
    "maximal_admissible_sets",
    "build_group_system",
    "blocks_for_individual",
    "build_beta_only_systems",
    "beta_only_systems",
    "cox_admissible_set",
]


@dataclass(frozen=True, order=True)
class Group:
    times: tuple

    @property
    def m(self) -> int:
        return len(self.times)

    def __iter__(self):
        return iter(self.times)


@dataclass(frozen=True)
class GroupSystem:
    T: int
    p: int
    groups: tuple

    def __len__(self):
        return len(self.groups)

    def __iter__(self):
        return iter(self.groups)

    def __getitem__(self, g) -> Group:
        return self.groups[g]


@dataclass(frozen=True)
class ConditionalBlock:
    """One individual's data on one group.

    ``lag_patterns[d - 1]`` holds the outcomes ``d`` periods before each time
    in the group. For binary panels ``suff_stat`` is the outcome sum; for
    multinomial panels it is the tuple of counts of alternatives ``2..M``.
    """

    group: Group
    lag_patterns: tuple
    outcome: tuple
    suff_stat: Union[int, tuple]
    informative: bool


def is_admissible(times: Sequence[int], p: int) -> bool:
    return len(times) >= 2 and all(b - a >= p + 1 for a, b in zip(times, times[1:]))


@lru_cache(maxsize=4096)
def _maximal(eligible: tuple, p: int) -> tuple:
    gap = p + 1
    out = []

    def extend(chosen):
        last = chosen[-1]
        nxt = [e for e in eligible if e >= last + gap]
        if not nxt:
            if len(chosen) >= 2:
                out.append(tuple(chosen))
            return
        # the next element must leave no insertable eligible time before it
        for e in nxt:
            if any(last + gap <= f <= e - gap for f in eligible):
                break
            extend(chosen + [e])

    for s in eligible:
        if any(f <= s - gap for f in eligible):
            break
        extend([s])
    return tuple(sorted(out))


def maximal_admissible_sets(eligible: Sequence[int], p: int) -> list[tuple]:
    """Inclusion-maximal admissible subsets of ``eligible``, lexicographic.

    A set is maximal exactly when no eligible time can be inserted without
    breaking the minimum gap, so the search only extends by times that leave
    nothing insertable behind them.
    """
    return list(_maximal(tuple(sorted(set(int(e) for e in eligible))), int(p)))


@lru_cache(maxsize=256)
def _group_system(T: int, p: int) -> GroupSystem:
    groups = tuple(Group(t) for t in _maximal(tuple(range(1, T + 1)), p))
    return GroupSystem(T, p, groups)


def build_group_system(T: int, p: int) -> GroupSystem:
    """Maximal groups of ``{1..T}`` with gaps ``>= p + 1``.

    >>> [g.times for g in build_group_system(5, 1)]
    [(1, 3, 5), (1, 4), (2, 4), (2, 5)]
    """
    if p < 1:
        raise IdentificationError("p must be at least 1")
    if T < p + 2:
        raise IdentificationError(f"T={T} < p+2={p + 2}")
    return _group_system(int(T), int(p))


def blocks_for_individual(ds: Union[PanelDataset, MnlPanelDataset], i: int,
                          gs: GroupSystem) -> list[ConditionalBlock]:
    p = ds.p
    if (gs.T, gs.p) != (ds.T, p):
        raise IdentificationError(
            f"group system is for (T={gs.T}, p={gs.p}), data has (T={ds.T}, p={p})")
    path = ds.y[i]
    mnl = isinstance(ds, MnlPanelDataset)
    blocks = []
    for g in gs:
        cols = [ds.col(t) for t in g.times]
        outcome = tuple(int(path[c]) for c in cols)
        lags = tuple(tuple(int(path[c - d]) for c in cols) for d in range(1, p + 1))
        if mnl:
            stat = tuple(outcome.count(l) for l in range(2, ds.M + 1))
            informative = len(set(outcome)) > 1
        else:
            stat = sum(outcome)
            informative = 0 < stat < g.m
        blocks.append(ConditionalBlock(g, lags, outcome, stat, informative))
    return blocks


def beta_only_systems(ds: PanelDataset, i: int) -> dict:
    """Groups with a constant lag tuple, keyed by that tuple.

    Eligible times for key ``v`` are those ``t`` with
    ``(y[t-1], ..., y[t-p]) == v``; within them the maximal sets with gaps
    ``>= p + 1`` are kept. Keys with no group are omitted.
    """
    p = ds.p
    path = ds.y[i]
    by_key: dict = {}
    for t in range(1, ds.T + 1):
        c = ds.col(t)
        key = tuple(int(path[c - d]) for d in range(1, p + 1))
        by_key.setdefault(key, []).append(t)
    out = {}
    for key in sorted(by_key):
        sets = _maximal(tuple(by_key[key]), p)
        if sets:
            out[key] = [Group(s) for s in sets]
    return out


def build_beta_only_systems(ds: PanelDataset, i: int) -> tuple[list[Group], list[Group]]:
    """``(B0, B1)``: maximal groups on which the previous outcome is 0 (resp. 1)."""
    if ds.p != 1:
        raise IdentificationError("build_beta_only_systems is the p=1 case; "
                                  "use beta_only_systems for p >= 2")
    systems = beta_only_systems(ds, i)
    return systems.get((0,), []), systems.get((1,), [])


def cox_admissible_set(path: Sequence[int]) -> list[tuple]:
    """All 0/1 paths sharing the endpoints and interior sum of ``path``.

    ``path`` covers periods ``0..T``. Returned in lexicographic order.
    """
    path = tuple(int(v) for v in path)
    T = len(path) - 1
    s = sum(path[1:T])
    out = []
    for ones in itertools.combinations(range(1, T), s):
        lam = [0] * (T + 1)
        lam[0], lam[T] = path[0], path[T]
        for j in ones:
            lam[j] = 1
        out.append(tuple(lam))
    return sorted(out)
