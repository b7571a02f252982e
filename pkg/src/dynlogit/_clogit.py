"""Shared conditional-logit kernel.

Every conditional likelihood in the package has the form

    log [ exp(phi(y) . theta) / sum_{lam in Lambda} exp(phi(lam) . theta) ]

for a finite candidate set ``Lambda`` and per-candidate feature vectors
``phi``. Blocks sharing a candidate set are evaluated together as a
"bucket": ``phi`` has shape (rows, L, P) and ``obs`` picks the observed
candidate in each row.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import logsumexp

__all__ = ["LikelihoodReport", "Accumulator", "clogit_bucket"]


@dataclass
class LikelihoodReport:
    """Value, derivatives and per-unit contributions of a log-likelihood.

    ``per_group_*`` arrays are indexed by group (or, for estimators without a
    global group system, by conditioning category) in a fixed order;
    non-informative blocks contribute zeros there, so shapes never depend on
    the data.
    """

    value: float
    score: np.ndarray
    hessian: np.ndarray
    per_individual_scores: np.ndarray
    per_individual_values: np.ndarray
    per_group_scores: np.ndarray
    per_group_hessians: np.ndarray
    per_individual_group_scores: np.ndarray
    per_individual_group_values: np.ndarray
    informative_count: np.ndarray
    names: Optional[list] = None

    @property
    def n(self) -> int:
        return self.per_individual_scores.shape[0]


def clogit_bucket(phi: np.ndarray, obs: np.ndarray, theta: np.ndarray):
    """Evaluate one bucket.

    Returns per-row log-probabilities, per-row scores and the summed
    Hessian ``-sum_rows Cov_w(phi)``.
    """
    eta = phi @ theta
    lse = logsumexp(eta, axis=1)
    rows = np.arange(phi.shape[0])
    val = eta[rows, obs] - lse
    w = np.exp(eta - lse[:, None])
    mu = np.einsum("rl,rlp->rp", w, phi)
    score = phi[rows, obs] - mu
    dev = phi - mu[:, None, :]
    hess = -np.einsum("rl,rlp,rlq->pq", w, dev, dev)
    return val, score, hess


class Accumulator:
    """Collects bucket results into a :class:`LikelihoodReport`."""

    def __init__(self, n: int, G: int, P: int):
        self.n, self.G, self.P = n, G, P
        self.values = np.zeros((n, G))
        self.scores = np.zeros((n, G, P))
        self.hess = np.zeros((G, P, P))
        self.count = np.zeros(G, dtype=np.int64)

    def add(self, g: int, rows: np.ndarray, phi: np.ndarray, obs: np.ndarray,
            theta: np.ndarray) -> None:
        if rows.size == 0:
            return
        val, score, hess = clogit_bucket(phi, obs, theta)
        # rows are unique within a bucket
        self.values[rows, g] += val
        self.scores[rows, g] += score
        self.hess[g] += hess
        self.count[g] += rows.size

    def report(self, names=None) -> LikelihoodReport:
        per_ind = self.scores.sum(axis=1)
        hessian = self.hess.sum(axis=0)
        hessian = 0.5 * (hessian + hessian.T)
        return LikelihoodReport(
            value=float(self.values.sum(axis=1).sum()),
            score=per_ind.sum(axis=0),
            hessian=hessian,
            per_individual_scores=per_ind,
            per_individual_values=self.values.sum(axis=1),
            per_group_scores=self.scores.sum(axis=0),
            per_group_hessians=self.hess,
            per_individual_group_scores=self.scores,
            per_individual_group_values=self.values,
            informative_count=self.count,
            names=names,
        )
