"""
Estimation: Newton ascent, sandwich covariance, two-step GMM over stacked
likelihood equations, and the T = 3 moment check.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import linalg, stats

from ._clogit import LikelihoodReport
from .errors import (
    DegenerateObjective,
    DimensionMismatch,
    NonConvergenceWarning,
    RankDeficientMoments,
    SingularHessian,
    SingularWeightWarning,
    WrongShape,
)
from .index_sets import build_group_system
from .likelihood_binary import loglik_arp, loglik_beta_only, loglik_cox
from .likelihood_mnl import loglik_mnl, mnl_identified_dim
from .panel_data import MnlPanelDataset, PanelDataset, ParameterVector

__all__ = [
    "TOL",
    "MAX_ITER",
    "EstimateResult",
    "MomentSystem",
    "maximize",
    "sandwich_vcov",
    "hessian_vcov",
    "gmm_estimate",
    "arp_score_system",
    "arp_group_system",
    "cox_system",
    "beta_only_system",
    "fit_arp",
    "fit_cox",
    "fit_beta_only",
    "fit_mnl",
    "fit_pooled_logit",
    "MomentCheck",
    "moment_diagnostics",
]

TOL = 1e-8
MAX_ITER = 200


@dataclass
class EstimateResult:
    theta: np.ndarray
    vcov: np.ndarray
    se: np.ndarray
    converged: bool
    iterations: int
    objective_path: list
    gradient_norm: float
    names: Optional[list] = None
    method: str = ""
    j_stat: Optional[float] = None
    j_dof: Optional[int] = None
    j_pvalue: Optional[float] = None
    extra: dict = field(default_factory=dict)

    def table(self, level: float = 0.95) -> list[dict]:
        """Rows of (parameter, estimate, se, z, ci_low, ci_high)."""
        q = stats.norm.ppf(0.5 + level / 2)
        names = self.names or [f"theta{j + 1}" for j in range(self.theta.size)]
        rows = []
        for name, est, se in zip(names, self.theta, self.se):
            z = est / se if se > 0 else np.nan
            rows.append(dict(parameter=name, estimate=float(est), se=float(se), z=float(z),
                             ci_low=float(est - q * se), ci_high=float(est + q * se)))
        return rows


def _unpack(out):
    if isinstance(out, tuple):
        return out[0], np.atleast_1d(out[1]), np.atleast_2d(out[2])
    return out.value, out.score, out.hessian


def hessian_vcov(report: LikelihoodReport) -> np.ndarray:
    """Inverse of the negative Hessian."""
    H = np.atleast_2d(report.hessian)
    _check_invertible(H)
    V = -linalg.inv(H)
    return 0.5 * (V + V.T)


def _check_invertible(H: np.ndarray) -> None:
    if H.size == 0:
        raise SingularHessian("empty Hessian")
    ev = np.linalg.eigvalsh(0.5 * (H + H.T))
    scale = max(np.max(np.abs(ev)), 1e-300)
    if not np.all(np.isfinite(ev)) or np.min(np.abs(ev)) <= 1e-10 * scale:
        raise SingularHessian(f"Hessian eigenvalues {ev}")


def sandwich_vcov(report: LikelihoodReport) -> np.ndarray:
    """``H^-1 (sum_i s_i s_i') H^-1`` from the per-individual score rows."""
    H = np.atleast_2d(report.hessian)
    _check_invertible(H)
    S = report.per_individual_scores
    meat = S.T @ S
    Hinv = linalg.inv(H)
    V = Hinv @ meat @ Hinv
    return 0.5 * (V + V.T)


def maximize(objective: Callable, theta0, tol: float = TOL, max_iter: int = MAX_ITER,
             vcov: Optional[str] = "sandwich", names=None) -> EstimateResult:
    """Newton ascent with Armijo backtracking.

    ``objective(theta)`` returns a :class:`LikelihoodReport` or a tuple
    ``(value, score, hessian)``. When the negative Hessian is not positive
    definite a ridge ``lam * I`` is added, starting at ``1e-8 * ||H||`` and
    doubling until it is. Iteration stops once ``max|score| <= tol``.

    ``vcov`` selects ``"sandwich"`` (default), ``"hessian"`` or ``None``.
    Non-convergence is reported through ``converged=False`` and a
    :class:`NonConvergenceWarning`, with the best iterate returned.
    """
    theta = np.atleast_1d(np.asarray(theta0, dtype=float)).copy()
    out = objective(theta)
    if hasattr(out, "informative_count") and out.informative_count.sum() == 0:
        raise DegenerateObjective("no informative blocks: nobody switches")
    f, g, H = _unpack(out)
    path = [float(f)]
    converged = False
    it = 0
    while it < max_iter:
        if np.max(np.abs(g)) <= tol:
            converged = True
            break
        it += 1
        A = -0.5 * (H + H.T)
        lam = 0.0
        base = 1e-8 * max(np.linalg.norm(A), 1e-12)
        while True:
            try:
                c = linalg.cho_factor(A + lam * np.eye(A.shape[0]))
                break
            except linalg.LinAlgError:
                lam = base if lam == 0.0 else 2 * lam
        d = linalg.cho_solve(c, g)
        slope = float(g @ d)
        step = 1.0
        accepted = False
        # near the optimum the predicted gain falls below round-off in f
        slack = 64 * np.finfo(float).eps * max(1.0, abs(f))
        while step > 1e-14:
            trial = theta + step * d
            out_t = objective(trial)
            f_t = _unpack(out_t)[0]
            if np.isfinite(f_t) and f_t >= f + 1e-4 * step * slope - slack:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            # no ascent possible along the Newton direction; stop here
            break
        theta, out = trial, out_t
        f, g, H = _unpack(out)
        path.append(float(f))
    gnorm = float(np.max(np.abs(g))) if g.size else 0.0
    converged = converged or gnorm <= tol
    if not converged:
        warnings.warn(f"no convergence after {it} iterations (|score|={gnorm:.3g})",
                      NonConvergenceWarning, stacklevel=2)
    P = theta.size
    V = np.full((P, P), np.nan)
    if vcov is not None and isinstance(out, LikelihoodReport):
        try:
            V = sandwich_vcov(out) if vcov == "sandwich" else hessian_vcov(out)
        except SingularHessian as exc:
            warnings.warn(f"covariance unavailable: {exc}", RuntimeWarning, stacklevel=2)
    elif vcov is not None:
        try:
            _check_invertible(H)
            V = -linalg.inv(H)
        except SingularHessian:
            pass
    se = np.sqrt(np.clip(np.diag(V), 0, None)) if np.all(np.isfinite(V)) else np.full(P, np.nan)
    if names is None and isinstance(out, LikelihoodReport):
        names = out.names
    return EstimateResult(theta, V, se, converged, it, path, gnorm, names,
                          method="newton", extra={"report": out})


# ---------------------------------------------------------------------------
# estimator front ends


def fit_arp(ds: PanelDataset, theta0=None, vcov: str = "sandwich", **kw) -> EstimateResult:
    gs = build_group_system(ds.T, ds.p)
    P = ds.K + ds.p
    theta0 = np.zeros(P) if theta0 is None else theta0
    res = maximize(lambda th: loglik_arp(ds, gs, th), theta0, vcov=vcov, **kw)
    res.method = "arp_cmle"
    return res


def fit_cox(ds: PanelDataset, gamma0: float = 0.0, vcov: str = "sandwich", **kw) -> EstimateResult:
    res = maximize(lambda g: loglik_cox(ds, g), [gamma0], vcov=vcov, **kw)
    res.method = "cox"
    return res


def fit_beta_only(ds: PanelDataset, beta0=None, vcov: str = "sandwich", **kw) -> EstimateResult:
    beta0 = np.zeros(ds.K) if beta0 is None else beta0
    if ds.K == 0:
        raise DimensionMismatch("the slope-only estimator needs covariates")
    res = maximize(lambda b: loglik_beta_only(ds, b), beta0, vcov=vcov, **kw)
    res.method = "beta_only"
    return res


def fit_mnl(ds: MnlPanelDataset, theta0=None, vcov: str = "sandwich", **kw) -> EstimateResult:
    gs = build_group_system(ds.T, 1)
    P = mnl_identified_dim(ds.M, ds.K)
    theta0 = np.zeros(P) if theta0 is None else theta0
    res = maximize(lambda th: loglik_mnl(ds, gs, th), theta0, vcov=vcov, **kw)
    res.method = "mnl"
    return res


def fit_pooled_logit(ds: PanelDataset, **kw) -> EstimateResult:
    """Pooled logit of y_t on (x_t, lags, 1), ignoring the fixed effects.

    Included as a foil: it is inconsistent whenever the fixed effects vary.
    Parameters are ordered ``(beta, gamma, intercept)``.
    """
    K, p, T = ds.K, ds.p, ds.T
    X = np.concatenate(
        [ds.x.reshape(-1, K),
         np.stack([ds.y[:, ds.col(1) - d:ds.col(T) - d + 1].reshape(-1) for d in range(1, p + 1)],
                  axis=1),
         np.ones((ds.n * T, 1))], axis=1)
    y = ds.y[:, ds.col(1):].reshape(-1).astype(float)

    N = y.size

    # averaged over observations so the score tolerance is not swamped by round-off
    def obj(b):
        z = X @ b
        pr = 1.0 / (1.0 + np.exp(-z))
        value = float(np.sum(y * z - np.logaddexp(0.0, z)))
        return value / N, X.T @ (y - pr) / N, -(X * (pr * (1 - pr))[:, None]).T @ X / N

    res = maximize(obj, np.zeros(X.shape[1]), vcov=None,
                   names=ParameterVector.names(K, p) + ["intercept"], **kw)
    H = obj(res.theta)[2] * N
    try:
        _check_invertible(H)
        res.vcov = -linalg.inv(H)
        res.se = np.sqrt(np.clip(np.diag(res.vcov), 0, None))
    except SingularHessian:
        res.se = np.full(res.theta.size, np.nan)
    res.method = "pooled_logit"
    return res


# ---------------------------------------------------------------------------
# GMM


@dataclass
class MomentSystem:
    """Per-individual moment contributions as a function of the common parameter.

    ``fn(theta)`` returns ``(G, J)`` with ``G`` of shape (n, q) and ``J``
    of shape (q, P), the Jacobian of ``G.sum(axis=0)``.
    """

    name: str
    fn: Callable
    dim_moments: int
    dim_params: int

    def __post_init__(self):
        if self.dim_moments < 1 or self.dim_params < 1:
            raise DimensionMismatch("moment system must be non-empty")


def arp_score_system(ds: PanelDataset) -> MomentSystem:
    """The AR(p) likelihood equations (one moment per parameter)."""
    gs = build_group_system(ds.T, ds.p)
    P = ds.K + ds.p

    def fn(theta):
        r = loglik_arp(ds, gs, theta)
        return r.per_individual_scores, r.hessian

    return MomentSystem("arp", fn, P, P)


def arp_group_system(ds: PanelDataset) -> MomentSystem:
    """The AR(p) likelihood equations kept separate for each group."""
    gs = build_group_system(ds.T, ds.p)
    P = ds.K + ds.p

    def fn(theta):
        r = loglik_arp(ds, gs, theta)
        G = r.per_individual_group_scores.reshape(ds.n, -1)
        return G, r.per_group_hessians.reshape(-1, P)

    return MomentSystem("arp_groups", fn, len(gs) * P, P)


def cox_system(ds: PanelDataset, gamma_index: int = -1, dim_params: Optional[int] = None) -> MomentSystem:
    """Cox's likelihood equation as a moment in the parameter ``theta[gamma_index]``."""
    P = ds.K + ds.p if dim_params is None else dim_params
    j = gamma_index % P

    def fn(theta):
        r = loglik_cox(ds, theta[j])
        J = np.zeros((1, P))
        J[0, j] = r.hessian[0, 0]
        return r.per_individual_scores, J

    return MomentSystem("cox", fn, 1, P)


def beta_only_system(ds: PanelDataset) -> MomentSystem:
    """Slope-only likelihood equations, embedded in the (beta, gamma) parameter."""
    K, P = ds.K, ds.K + ds.p

    def fn(theta):
        r = loglik_beta_only(ds, theta[:K])
        J = np.zeros((K, P))
        J[:, :K] = r.hessian
        return r.per_individual_scores, J

    return MomentSystem("beta_only", fn, K, P)


def _stack(systems, theta):
    Gs, Js = zip(*(s.fn(theta) for s in systems))
    return np.concatenate(Gs, axis=1), np.concatenate(Js, axis=0)


def _gauss_newton(systems, theta, W, n, tol, max_iter):
    def q_of(th):
        G, J = _stack(systems, th)
        gbar = G.mean(axis=0)
        return float(gbar @ W @ gbar), gbar, J / n, G

    Q, gbar, D, G = q_of(theta)
    path = [Q]
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        A = D.T @ W @ D
        b = D.T @ W @ gbar
        try:
            d = -linalg.solve(A, b, assume_a="sym")
        except linalg.LinAlgError:
            d = -linalg.lstsq(A, b)[0]
        step = 1.0
        while step > 1e-14:
            trial = theta + step * d
            Qt, gt, Dt, Gt = q_of(trial)
            if np.isfinite(Qt) and Qt <= Q:
                break
            step *= 0.5
        else:
            converged = np.max(np.abs(2 * b)) <= tol
            break
        theta, Q, gbar, D, G = trial, Qt, gt, Dt, Gt
        path.append(Q)
        if np.max(np.abs(step * d)) <= tol * (1 + np.max(np.abs(theta))) or Q <= 1e-30:
            converged = True
            break
    return theta, Q, gbar, D, G, path, converged, it


def gmm_estimate(systems: Sequence[MomentSystem], theta0, tol: float = TOL,
                 max_iter: int = MAX_ITER, names=None) -> EstimateResult:
    """Two-step GMM on stacked likelihood equations.

    Step one uses the identity weight; step two weights by the inverse of
    the per-individual moment covariance at the step-one estimate, scaled
    by ``n / (n - P)``. Returns the Hansen J statistic with
    ``dim_moments - dim_params`` degrees of freedom.
    """
    systems = list(systems)
    P = systems[0].dim_params
    if any(s.dim_params != P for s in systems):
        raise DimensionMismatch("moment systems disagree on the parameter dimension")
    theta = np.atleast_1d(np.asarray(theta0, dtype=float)).copy()
    G0, J0 = _stack(systems, theta)
    n, q = G0.shape
    if q < P or np.linalg.matrix_rank(J0) < P:
        raise RankDeficientMoments(f"moment Jacobian at theta0 has rank "
                                   f"{np.linalg.matrix_rank(J0)} < {P}")
    theta1, *_, conv1, it1 = _gauss_newton(systems, theta, np.eye(q), n, tol, max_iter)
    G1, _ = _stack(systems, theta1)
    dev = G1 - G1.mean(axis=0)
    S = dev.T @ dev / n * (n / max(n - P, 1))
    try:
        _check_invertible(S)
        W = linalg.inv(S)
    except SingularHessian:
        warnings.warn("moment covariance is singular; using its pseudo-inverse",
                      SingularWeightWarning, stacklevel=2)
        W = linalg.pinv(S)
    W = 0.5 * (W + W.T)
    theta2, Q, gbar, D, G, path, conv2, it2 = _gauss_newton(systems, theta1, W, n, tol, max_iter)
    A = D.T @ W @ D
    try:
        V = linalg.inv(A) / n
    except linalg.LinAlgError:
        V = linalg.pinv(A) / n
    V = 0.5 * (V + V.T)
    se = np.sqrt(np.clip(np.diag(V), 0, None))
    jstat = max(float(n * Q), 0.0)
    dof = q - P
    pval = float(stats.chi2.sf(jstat, dof)) if dof > 0 else 1.0
    grad = float(np.max(np.abs(2 * D.T @ W @ gbar)))
    if not conv2:
        warnings.warn("second-step GMM did not converge", NonConvergenceWarning, stacklevel=2)
    return EstimateResult(theta2, V, se, bool(conv1 and conv2), it1 + it2, path, grad,
                          names, method="gmm2", j_stat=jstat, j_dof=dof, j_pvalue=pval,
                          extra={"weight": W, "moment_cov": S, "step1": theta1})


# ---------------------------------------------------------------------------
# moment check for T = 3, p = 1


@dataclass
class MomentCheck:
    """Lag-cell averages of the T = 3 likelihood equations."""

    names: list
    means: np.ndarray
    se: np.ndarray
    z: np.ndarray
    pvalues: np.ndarray
    cell_counts: np.ndarray
    empty: np.ndarray

    def rejects(self, level: float = 0.05) -> np.ndarray:
        return (~self.empty) & (self.pvalues < level)

    def rows(self) -> list[dict]:
        return [dict(condition=nm, mean=float(m), se=float(s), z=float(z), pvalue=float(pv),
                     switchers=int(c), empty=bool(e))
                for nm, m, s, z, pv, c, e in zip(self.names, self.means, self.se, self.z,
                                                  self.pvalues, self.cell_counts, self.empty)]


def moment_diagnostics(ds: PanelDataset, theta) -> MomentCheck:
    """Per-lag-cell sample averages of the T = 3 likelihood equations.

    With ``dx = x3 - x1`` and switchers ``y1 + y3 = 1``, the slope equation
    is split by the lag pair ``(y0, y2)`` into four cells (00, 11, 01, 10),
    and the feedback equation into the two cells where the lags differ.
    Each average is over all n individuals; cells with no switchers are
    flagged empty.
    """
    if ds.T != 3 or ds.p != 1:
        raise WrongShape("moment check needs T=3, p=1")
    K = ds.K
    th = theta.to_array() if isinstance(theta, ParameterVector) else np.asarray(theta, float)
    beta, gamma = th[:K], th[K]
    y0, y1, y2, y3 = (ds.y[:, j] for j in range(4))
    dx = ds.x[:, 2, :] - ds.x[:, 0, :]
    switch = (y1 + y3) == 1
    cells = {"00": (y0 == 0) & (y2 == 0), "11": (y0 == 1) & (y2 == 1),
             "01": (y0 == 0) & (y2 == 1), "10": (y0 == 1) & (y2 == 0)}
    shift = {"00": 0.0, "11": 0.0, "01": gamma, "10": -gamma}
    contribs, names, counts = [], [], []
    for cell in ("00", "11", "01", "10"):
        z = dx @ beta + shift[cell]
        resid = np.where(switch & cells[cell], y3 - 1.0 / (1.0 + np.exp(-z)), 0.0)
        for k in range(K):
            contribs.append(resid * dx[:, k])
            names.append(f"beta{k + 1}|y0y2={cell}")
            counts.append(int(np.sum(switch & cells[cell])))
    for cell in ("01", "10"):
        z = dx @ beta + shift[cell]
        contribs.append(np.where(switch & cells[cell], y3 - 1.0 / (1.0 + np.exp(-z)), 0.0))
        names.append(f"gamma|y0y2={cell}")
        counts.append(int(np.sum(switch & cells[cell])))
    C = np.stack(contribs, axis=1)
    n = ds.n
    means = C.mean(axis=0)
    se = C.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.zeros(C.shape[1])
    counts = np.array(counts)
    empty = counts == 0
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, means / se, 0.0)
    pv = np.where(empty, 1.0, 2 * stats.norm.sf(np.abs(z)))
    return MomentCheck(names, means, se, z, pv, counts, empty)
