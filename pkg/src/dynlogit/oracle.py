"""
Brute-force probabilities for a single individual.

Every path of the data-generating process is enumerated with its exact
log-probability, and conditional probabilities are ratios of sums over
paths. This is deliberately naive: it shares no code with the likelihood
modules and serves as their ground truth.

Paths are tuples of outcomes covering periods ``1 - p, ..., T``; predicates
receive a :class:`Path`, which is indexed by period.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence, Union

import numpy as np
from scipy.special import logsumexp

from .errors import EnumerationLimit, InputError, ZeroConditioningEvent
from .panel_data import MnlParameterVector, ParameterVector

__all__ = [
    "DgpSpec",
    "Path",
    "MAX_PATHS",
    "transition_prob",
    "path_probability",
    "enumerate_paths",
    "conditional_probability",
    "conditional_from_table",
    "block_conditional_probability",
    "factorized_block_probability",
    "cox_conditional_probability",
    "beta_only_conditional_probability",
]

MAX_PATHS = 2 ** 20


@dataclass
class DgpSpec:
    """One individual's data-generating process.

    Parameters
    ----------
    T, p : int
        Modeled periods and autoregressive order (``p = 1`` for multinomial).
    theta : ParameterVector or MnlParameterVector
    alpha : float or array of length M
        Fixed effect(s).
    x : array
        Covariates, shape (T, K) for binary or (T, M, K) for multinomial.
    initial : tuple or mapping
        Either the fixed pre-sample outcomes ``(y_{1-p}, ..., y_0)`` or a
        mapping from such tuples to probabilities.
    """

    T: int
    p: int
    theta: Union[ParameterVector, MnlParameterVector]
    alpha: Union[float, np.ndarray]
    x: np.ndarray
    initial: Union[tuple, Mapping] = field(default=(0,))

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        if self.multinomial:
            if self.p != 1:
                raise InputError("multinomial DGP is AR(1)")
            self.alpha = np.asarray(self.alpha, dtype=float).reshape(self.M)
            if self.x.size == 0:
                self.x = np.zeros((self.T, self.M, 0))
        else:
            self.alpha = float(self.alpha)
            if self.x.size == 0:
                self.x = np.zeros((self.T, 0))
            if self.theta.p != self.p:
                raise InputError("gamma length must equal p")
        if isinstance(self.initial, Mapping):
            total = sum(self.initial.values())
            if not math.isclose(total, 1.0, abs_tol=1e-12):
                raise InputError(f"initial distribution sums to {total}")
            for k in self.initial:
                if len(k) != self.p:
                    raise InputError("initial states must have length p")
        else:
            self.initial = tuple(int(v) for v in self.initial)
            if len(self.initial) != self.p:
                raise InputError("initial values must have length p")

    @property
    def multinomial(self) -> bool:
        return isinstance(self.theta, MnlParameterVector)

    @property
    def M(self) -> int:
        return self.theta.M if self.multinomial else 2

    @property
    def outcomes(self) -> tuple:
        return tuple(range(1, self.M + 1)) if self.multinomial else (0, 1)

    def initial_law(self) -> dict:
        if isinstance(self.initial, Mapping):
            return {tuple(k): float(v) for k, v in self.initial.items() if v > 0}
        return {self.initial: 1.0}


class Path:
    """Outcome path addressable by period: ``path[t]`` for ``t`` in ``1-p..T``."""

    __slots__ = ("values", "p")

    def __init__(self, values: Sequence[int], p: int):
        self.values = tuple(values)
        self.p = p

    def __getitem__(self, t: int) -> int:
        j = t + self.p - 1
        if j < 0:
            raise IndexError(t)
        return self.values[j]

    def __repr__(self):
        return f"Path({self.values}, p={self.p})"


def _log_transition(spec: DgpSpec, lags: tuple, t: int) -> np.ndarray:
    """Log-probabilities of each outcome at period ``t`` given ``lags = (y[t-1], ..., y[t-p])``."""
    th = spec.theta
    if spec.multinomial:
        k = lags[0]
        u = np.array([spec.alpha[l] + th.gamma[k - 1, l] + spec.x[t - 1, l] @ th.beta[l]
                      for l in range(spec.M)])
        return u - logsumexp(u)
    z = spec.alpha + float(np.dot(th.gamma, lags)) + float(spec.x[t - 1] @ th.beta)
    # log(1 - expit(z)), log(expit(z))
    return np.array([-np.logaddexp(0.0, z), -np.logaddexp(0.0, -z)])


def transition_prob(spec: DgpSpec, lags: Sequence[int], t: int, outcome: int) -> float:
    """Pr(y_t = outcome | previous p outcomes), lags ordered most recent first."""
    lags = tuple(int(v) for v in lags)
    if len(lags) != spec.p:
        raise InputError(f"need {spec.p} lags")
    if not 1 <= t <= spec.T:
        raise InputError(f"t={t} outside 1..{spec.T}")
    lp = _log_transition(spec, lags, t)
    return float(np.exp(lp[spec.outcomes.index(int(outcome))]))


def _log_path(spec: DgpSpec, full: tuple, cache: Optional[dict] = None) -> float:
    p = spec.p
    law = spec.initial_law()
    init = full[:p]
    if init not in law:
        return -math.inf
    lp = math.log(law[init])
    idx = {v: j for j, v in enumerate(spec.outcomes)}
    for t in range(1, spec.T + 1):
        j = t + p - 1
        lags = tuple(full[j - d] for d in range(1, p + 1))
        key = (t, lags)
        if cache is not None and key in cache:
            row = cache[key]
        else:
            row = _log_transition(spec, lags, t)
            if cache is not None:
                cache[key] = row
        lp += row[idx[full[j]]]
    return float(lp)


def path_probability(spec: DgpSpec, path: Sequence[int]) -> float:
    """Probability of a path.

    A path of length ``T`` is taken conditional on the fixed initial values;
    a path of length ``T + p`` includes the pre-sample outcomes and is
    weighted by the initial law.
    """
    path = tuple(int(v) for v in path)
    if len(path) == spec.T:
        if isinstance(spec.initial, Mapping):
            raise InputError("give the full path when the initial law is random")
        full = spec.initial + path
        return math.exp(_log_path(spec, full))
    if len(path) == spec.T + spec.p:
        return math.exp(_log_path(spec, path))
    raise InputError(f"path length {len(path)} is neither T nor T+p")


def enumerate_paths(spec: DgpSpec):
    """All full paths with positive probability and their log-probabilities."""
    law = spec.initial_law()
    count = len(law) * spec.M ** spec.T
    if count > MAX_PATHS:
        raise EnumerationLimit(f"{count} paths exceed the cap of {MAX_PATHS}")
    cache: dict = {}
    paths, logp = [], []
    for init in sorted(law):
        for tail in itertools.product(spec.outcomes, repeat=spec.T):
            full = init + tail
            paths.append(full)
            logp.append(_log_path(spec, full, cache))
    return paths, np.array(logp)


def conditional_from_table(paths, logp, event: Callable, given: Callable, p: int) -> float:
    """Pr(event | given) from an explicit (paths, log-probabilities) table."""
    views = [Path(v, p) for v in paths]
    g = np.array([bool(given(v)) for v in views])
    if not g.any():
        raise ZeroConditioningEvent("no path satisfies the conditioning event")
    e = np.array([bool(event(v)) for v in views]) & g
    if not e.any():
        return 0.0
    return float(np.exp(logsumexp(logp[e]) - logsumexp(logp[g])))


def conditional_probability(spec: DgpSpec, event: Callable, given: Callable) -> float:
    """Pr(event | given) by exhaustive enumeration of the model's paths."""
    paths, logp = enumerate_paths(spec)
    return conditional_from_table(paths, logp, event, given, spec.p)


def _block_predicates(times, lags, outcome, mnl: bool, M: int):
    times = tuple(times)
    outcome = tuple(outcome)
    if mnl:
        stat = tuple(outcome.count(l) for l in range(2, M + 1))
    else:
        stat = sum(outcome)

    def given(path):
        for d, pattern in enumerate(lags, start=1):
            if any(path[t - d] != v for t, v in zip(times, pattern)):
                return False
        obs = tuple(path[t] for t in times)
        if mnl:
            return tuple(obs.count(l) for l in range(2, M + 1)) == stat
        return sum(obs) == stat

    def event(path):
        return given(path) and all(path[t] == v for t, v in zip(times, outcome))

    return event, given


def block_conditional_probability(spec: DgpSpec, times, lags, outcome) -> float:
    """Pr(y_g = outcome | lag patterns of the group, within-group sum or counts).

    ``lags[d - 1]`` is the pattern of outcomes ``d`` periods before each of
    ``times``. Computed from the full joint law of the path.
    """
    event, given = _block_predicates(times, lags, outcome, spec.multinomial, spec.M)
    return conditional_probability(spec, event, given)


def factorized_block_probability(spec: DgpSpec, times, lags, outcome) -> float:
    """Block probability from one-step transition laws alone.

    Each group period is treated as drawn from its own transition law given
    the stated lags, and the product is renormalized over all outcome
    vectors with the same sum (or counts). This ignores how the outcomes of
    the group feed into the later lags it conditions on.
    """
    times = tuple(times)
    outcome = tuple(int(v) for v in outcome)
    lag_at = [tuple(lags[d][j] for d in range(spec.p)) for j in range(len(times))]
    rows = [_log_transition(spec, lag_at[j], t) for j, t in enumerate(times)]
    idx = {v: j for j, v in enumerate(spec.outcomes)}
    cands = sorted(set(itertools.permutations(outcome)))
    lps = np.array([sum(rows[j][idx[c[j]]] for j in range(len(times))) for c in cands])
    return float(np.exp(lps[cands.index(outcome)] - logsumexp(lps)))


def cox_conditional_probability(spec: DgpSpec, path: Sequence[int]) -> float:
    """Pr(path | y_0, y_T, interior sum) for a full AR(1) path (length T + 1)."""
    path = tuple(int(v) for v in path)
    T = spec.T
    interior = sum(path[1:T])

    def given(v):
        return v[0] == path[0] and v[T] == path[T] and sum(v[t] for t in range(1, T)) == interior

    def event(v):
        return v.values == path

    return conditional_probability(spec, event, given)


def beta_only_conditional_probability(spec: DgpSpec, times, lag_key, outcome) -> float:
    """Pr(y_g = outcome | (y[t-1], ..., y[t-p]) == lag_key for all t in g, group sum)."""
    lags = tuple(tuple(lag_key[d] for _ in times) for d in range(spec.p))
    return block_conditional_probability(spec, times, lags, outcome)
