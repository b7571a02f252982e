"""
Conditional log-likelihood for the multinomial logit AR(1) panel model.

Alternative 1 is the base: its slope vector and every feedback parameter
into or out of it are fixed at zero, leaving ``(M - 1) * K`` slopes and
``(M - 1) ** 2`` feedback parameters. Blocks condition on the lagged
choices at the group periods and on how often each alternative is chosen
within the group.
"""

from __future__ import annotations

from functools import lru_cache
from itertools import permutations
from typing import Optional, Union

import numpy as np

from ._clogit import Accumulator, LikelihoodReport
from .errors import DimensionMismatch, IdentificationError
from .index_sets import GroupSystem, build_group_system
from .panel_data import MnlPanelDataset, MnlParameterVector, check

__all__ = ["loglik_mnl", "mnl_identified_dim", "mnl_lambda", "mnl_features"]


def mnl_identified_dim(M: int, K: int = 0) -> int:
    """Number of free parameters: ``M**2 - (2M - 1)`` feedback terms plus slopes."""
    if M < 2:
        raise IdentificationError(f"need at least two alternatives, got M={M}")
    return (M - 1) ** 2 + (M - 1) * K


@lru_cache(maxsize=1024)
def _mnl_lambda(sorted_outcome: tuple) -> np.ndarray:
    arr = np.array(sorted(set(permutations(sorted_outcome))), dtype=np.int64)
    arr.setflags(write=False)
    return arr


def mnl_lambda(outcome) -> np.ndarray:
    """All rearrangements of ``outcome`` (same per-alternative counts), lexicographic."""
    return _mnl_lambda(tuple(sorted(int(v) for v in outcome)))


def _codes(patterns: np.ndarray, M: int) -> np.ndarray:
    m = patterns.shape[-1]
    return (patterns - 1) @ (M ** np.arange(m - 1, -1, -1))


def mnl_features(ds: MnlPanelDataset, times) -> np.ndarray:
    """Per-period, per-alternative derivative of the choice index.

    Returns an array of shape (n, m, M, P): entry ``[i, j, l - 1]`` is the
    gradient with respect to the free parameters of the index that
    alternative ``l`` receives at period ``times[j]``. Alternative 1 rows
    are zero.
    """
    M, K = ds.M, ds.K
    P = mnl_identified_dim(M, K)
    nb = (M - 1) * K
    times = list(times)
    m = len(times)
    F = np.zeros((ds.n, m, M, P))
    for j, t in enumerate(times):
        prev = ds.y[:, t - 1]
        for l in range(2, M + 1):
            F[:, j, l - 1, (l - 2) * K:(l - 1) * K] = ds.x[:, t - 1, l - 1, :]
            for k in range(2, M + 1):
                F[:, j, l - 1, nb + (k - 2) * (M - 1) + (l - 2)] = (prev == k)
    return F


def _as_theta(theta, M: int, K: int) -> np.ndarray:
    if isinstance(theta, MnlParameterVector):
        if (theta.M, theta.K) != (M, K):
            raise DimensionMismatch(
                f"parameter has (M={theta.M}, K={theta.K}), data has (M={M}, K={K})")
        return theta.to_array()
    theta = np.asarray(theta, dtype=float).ravel()
    P = mnl_identified_dim(M, K)
    if theta.size == M * K + M * M:
        # full (beta, gamma) supplied: accept only if restrictions hold
        return MnlParameterVector(theta[:M * K].reshape(M, K),
                                  theta[M * K:].reshape(M, M)).to_array()
    if theta.shape != (P,):
        raise DimensionMismatch(f"expected {P} free parameters, got {theta.size}")
    return theta


def loglik_mnl(ds: MnlPanelDataset, gs: Optional[GroupSystem],
               theta: Union[MnlParameterVector, np.ndarray]) -> LikelihoodReport:
    """Sum over individuals and maximal groups of the conditional block log-probabilities.

    ``theta`` is either an :class:`MnlParameterVector` or its free-parameter
    array (see :meth:`MnlParameterVector.to_array`).
    """
    check(ds)
    if gs is None:
        gs = build_group_system(ds.T, 1)
    if (gs.T, gs.p) != (ds.T, 1):
        raise DimensionMismatch(
            f"group system is for (T={gs.T}, p={gs.p}), data has (T={ds.T}, p=1)")
    M, K = ds.M, ds.K
    th = _as_theta(theta, M, K)
    acc = Accumulator(ds.n, len(gs), th.size)
    for g, grp in enumerate(gs):
        times = list(grp.times)
        m = len(times)
        Y = ds.y[:, times]
        F = mnl_features(ds, times)
        Ys = np.sort(Y, axis=1)
        informative = Ys[:, 0] != Ys[:, -1]
        codes = _codes(Y, M)
        keys = sorted({tuple(int(v) for v in r) for r in Ys[informative]})
        skey = _codes(Ys, M)
        for key in keys:
            rows = np.flatnonzero(skey == _codes(np.array(key), M))
            lam = _mnl_lambda(key)
            obs = np.searchsorted(_codes(lam, M), codes[rows])
            # phi[r, c] = sum_j F[r, j, lam[c, j] - 1]
            phi = F[rows][:, np.arange(m)[None, :], lam - 1].sum(axis=2)
            acc.add(g, rows, phi, obs, th)
    return acc.report(MnlParameterVector.names(M, K))
