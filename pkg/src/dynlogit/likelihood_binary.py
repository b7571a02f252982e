"""
Conditional log-likelihoods for the binary panel logit AR(p) model.

Parameters are always flattened as ``(beta_1..beta_K, gamma_1..gamma_p)``.
Each function returns a :class:`LikelihoodReport` with the analytic score
and Hessian computed in the same pass.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Union

import numpy as np

from ._clogit import Accumulator, LikelihoodReport
from .errors import DimensionMismatch, IdentificationError, WrongShape
from .index_sets import GroupSystem, _maximal, build_group_system, cox_admissible_set
from .panel_data import PanelDataset, ParameterVector, check

__all__ = [
    "LikelihoodReport",
    "LambdaSet",
    "enumerate_lambda",
    "loglik_arp",
    "loglik_t3_closed_form",
    "loglik_cox",
    "loglik_beta_only",
]


@dataclass(frozen=True)
class LambdaSet:
    """All 0/1 vectors of length ``m`` with ``s`` ones, lexicographic."""

    m: int
    s: int
    patterns: np.ndarray

    def __len__(self):
        return self.patterns.shape[0]

    def __iter__(self):
        return (tuple(int(v) for v in row) for row in self.patterns)


@lru_cache(maxsize=512)
def _lambda(m: int, s: int) -> np.ndarray:
    rows = []
    for ones in itertools.combinations(range(m), s):
        r = [0] * m
        for j in ones:
            r[j] = 1
        rows.append(r)
    arr = np.array(sorted(rows), dtype=np.int64).reshape(-1, m)
    arr.setflags(write=False)
    return arr


def enumerate_lambda(m: int, s: int) -> LambdaSet:
    if not 0 <= s <= m:
        raise ValueError(f"need 0 <= s <= m, got m={m}, s={s}")
    return LambdaSet(m, s, _lambda(m, s))


def _codes(patterns: np.ndarray) -> np.ndarray:
    m = patterns.shape[-1]
    return patterns @ (1 << np.arange(m - 1, -1, -1))


def _as_theta(theta, K: int, p: int) -> np.ndarray:
    if isinstance(theta, ParameterVector):
        if (theta.K, theta.p) != (K, p):
            raise DimensionMismatch(
                f"parameter has (K={theta.K}, p={theta.p}), data has (K={K}, p={p})")
        return theta.to_array()
    theta = np.asarray(theta, dtype=float).ravel()
    if theta.shape != (K + p,):
        raise DimensionMismatch(f"expected {K + p} parameters, got {theta.size}")
    return theta


def loglik_arp(ds: PanelDataset, gs: Optional[GroupSystem],
               theta: Union[ParameterVector, np.ndarray]) -> LikelihoodReport:
    """Conditional log-likelihood summed over the maximal group system.

    For each individual and group the observed outcome vector is compared
    with every vector having the same sum, holding the lagged outcomes of
    each group period at their observed values. The index of period ``t``
    is ``sum_d gamma_d * y[t-d] + x[t] . beta``.
    """
    check(ds)
    if gs is None:
        gs = build_group_system(ds.T, ds.p)
    if (gs.T, gs.p) != (ds.T, ds.p):
        raise DimensionMismatch(
            f"group system is for (T={gs.T}, p={gs.p}), data has (T={ds.T}, p={ds.p})")
    K, p = ds.K, ds.p
    th = _as_theta(theta, K, p)
    P = K + p
    acc = Accumulator(ds.n, len(gs), P)
    for g, grp in enumerate(gs):
        times = list(grp.times)
        m = len(times)
        cols = [ds.col(t) for t in times]
        Y = ds.y[:, cols]
        F = np.empty((ds.n, m, P))
        F[:, :, :K] = ds.x[:, [t - 1 for t in times], :]
        for d in range(1, p + 1):
            F[:, :, K + d - 1] = ds.y[:, [c - d for c in cols]]
        sums = Y.sum(axis=1)
        codes = _codes(Y)
        for s in range(1, m):
            rows = np.flatnonzero(sums == s)
            if rows.size == 0:
                continue
            lam = _lambda(m, s)
            obs = np.searchsorted(_codes(lam), codes[rows])
            phi = np.einsum("lm,rmp->rlp", lam, F[rows])
            acc.add(g, rows, phi, obs, th)
    return acc.report(ParameterVector.names(K, p))


def loglik_t3_closed_form(ds: PanelDataset,
                          theta: Union[ParameterVector, np.ndarray]) -> LikelihoodReport:
    """The T = 3, p = 1 objective written out case by case.

    Only switchers (``y1 + y3 == 1``) contribute. Depending on the lag pair
    ``(y0, y2)`` the log-odds of ``y3 = 1`` is ``dx . beta`` plus ``+gamma``
    for (0, 1), ``-gamma`` for (1, 0), and nothing otherwise, where
    ``dx = x3 - x1``.
    """
    if ds.T != 3 or ds.p != 1:
        raise WrongShape(f"closed form needs T=3, p=1; got T={ds.T}, p={ds.p}")
    check(ds)
    K = ds.K
    th = _as_theta(theta, K, 1)
    beta, gamma = th[:K], th[K]
    y0, y1, y2, y3 = (ds.y[:, j].astype(float) for j in range(4))
    dx = ds.x[:, 2, :] - ds.x[:, 0, :]
    switch = (y1 + y3 == 1).astype(float)
    c00 = (1 - y0) * (1 - y2)
    c01 = (1 - y0) * y2
    c10 = y0 * (1 - y2)
    c11 = y0 * y2
    base = dx @ beta

    def term(z):
        return y3 * z - np.logaddexp(0.0, z)

    vals = switch * (c00 * term(base) + c01 * term(base + gamma)
                     + c10 * term(base - gamma) + c11 * term(base))
    shift = c01 - c10
    z = base + gamma * shift
    prob = 1.0 / (1.0 + np.exp(-z))
    resid = switch * (y3 - prob)
    v = np.column_stack([dx, shift])
    scores = resid[:, None] * v
    w = switch * prob * (1 - prob)
    hess = -np.einsum("i,ip,iq->pq", w, v, v)
    count = np.array([int(switch.sum())])
    return LikelihoodReport(
        value=float(vals.sum()),
        score=scores.sum(axis=0),
        hessian=0.5 * (hess + hess.T),
        per_individual_scores=scores,
        per_individual_values=vals,
        per_group_scores=scores.sum(axis=0)[None, :],
        per_group_hessians=hess[None],
        per_individual_group_scores=scores[:, None, :],
        per_individual_group_values=vals[:, None],
        informative_count=count,
        names=ParameterVector.names(K, 1),
    )


@lru_cache(maxsize=4096)
def _cox_candidates(y0: int, yT: int, s: int, T: int):
    proto = (y0,) + (1,) * s + (0,) * (T - 1 - s) + (yT,)
    paths = np.array(cox_admissible_set(proto), dtype=np.int64)
    stat = (paths[:, :-1] * paths[:, 1:]).sum(axis=1).astype(float)
    return _codes(paths), stat


def loglik_cox(ds: PanelDataset, gamma) -> LikelihoodReport:
    """Cox's conditional log-likelihood for the pure AR(1) model.

    Conditions on the first and last outcome and on the interior sum; the
    sufficient statistic is the number of consecutive (1, 1) pairs.
    Covariates, if present, are ignored. The score has length 1.
    """
    if ds.p != 1:
        raise IdentificationError("Cox conditioning is defined for p = 1")
    check(ds)
    g = np.atleast_1d(np.asarray(gamma, dtype=float)).ravel()
    if g.shape != (1,):
        raise DimensionMismatch("Cox likelihood takes a scalar gamma")
    T = ds.T
    y = ds.y
    s = y[:, 1:T].sum(axis=1)
    codes = _codes(y)
    acc = Accumulator(ds.n, 1, 1)
    key = np.stack([y[:, 0], y[:, T], s], axis=1)
    for y0, yT, ss in sorted({tuple(int(v) for v in k) for k in key}):
        if ss == 0 or ss == T - 1:
            continue
        rows = np.flatnonzero((key[:, 0] == y0) & (key[:, 1] == yT) & (key[:, 2] == ss))
        cand_codes, stat = _cox_candidates(y0, yT, ss, T)
        obs = np.searchsorted(cand_codes, codes[rows])
        phi = np.broadcast_to(stat[None, :, None], (rows.size, stat.size, 1))
        acc.add(0, rows, phi, obs, g)
    return acc.report(["gamma1"])


@lru_cache(maxsize=65536)
def _beta_only_groups(path: tuple, T: int, p: int) -> tuple:
    """((key_index, times), ...) for one path; key index in 0..2**p - 1."""
    by_key: dict = {}
    for t in range(1, T + 1):
        c = t + p - 1
        key = tuple(path[c - d] for d in range(1, p + 1))
        by_key.setdefault(key, []).append(t)
    out = []
    for key in sorted(by_key):
        idx = int("".join(str(v) for v in key), 2)
        for times in _maximal(tuple(by_key[key]), p):
            out.append((idx, times))
    return tuple(out)


def loglik_beta_only(ds: PanelDataset, beta) -> LikelihoodReport:
    """Conditional log-likelihood for the covariate slopes alone.

    For every individual, periods are split by their lag tuple
    ``(y[t-1], ..., y[t-p])``; within each class the maximal groups (gaps
    ``>= p + 1``) form static conditional-logit blocks in which the feedback
    term is constant and cancels. Per-group arrays are indexed by lag tuple
    read as a binary number.
    """
    check(ds)
    K, p, T = ds.K, ds.p, ds.T
    b = np.atleast_1d(np.asarray(beta, dtype=float)).ravel()
    if b.shape != (K,):
        raise DimensionMismatch(f"expected {K} slopes, got {b.size}")
    buckets: dict = {}
    for i in range(ds.n):
        path = tuple(int(v) for v in ds.y[i])
        seen: dict = {}
        for key_idx, times in _beta_only_groups(path, T, p):
            outcome = tuple(path[t + p - 1] for t in times)
            s = sum(outcome)
            if s == 0 or s == len(times):
                continue
            bkey = (len(times), s, key_idx)
            # an individual can own several blocks in one bucket; keep rows unique per pass
            occ = seen.get(bkey, 0)
            seen[bkey] = occ + 1
            buckets.setdefault(bkey + (occ,), []).append((i, times, outcome))
    acc = Accumulator(ds.n, 2 ** p, K)
    for (m, s, key_idx, _) in sorted(buckets):
        entries = buckets[(m, s, key_idx, _)]
        rows = np.array([e[0] for e in entries])
        tidx = np.array([[t - 1 for t in e[1]] for e in entries])
        F = ds.x[rows[:, None], tidx]
        lam = _lambda(m, s)
        obs = np.searchsorted(_codes(lam), _codes(np.array([e[2] for e in entries])))
        phi = np.einsum("lm,rmp->rlp", lam, F)
        acc.add(key_idx, rows, phi, obs, b)
    return acc.report([f"beta{k + 1}" for k in range(K)])
