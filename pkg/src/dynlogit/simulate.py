"""
Panel simulation with fixed effects and a Monte Carlo harness.

Random numbers come from Philox (counter-based) generators keyed by
``SeedSequence(seed, spawn_key=(rep, n_index))``, so a replication's data do
not depend on which worker runs it or in what order.
"""

from __future__ import annotations

import csv
import io
import math
import os
import tempfile
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .errors import DynLogitError, InputError
from .inference import (
    arp_score_system,
    beta_only_system,
    cox_system,
    arp_group_system,
    fit_arp,
    fit_beta_only,
    fit_cox,
    fit_mnl,
    fit_pooled_logit,
    gmm_estimate,
)
from .panel_data import MnlPanelDataset, MnlParameterVector, PanelDataset, ParameterVector

__all__ = [
    "SimDesign",
    "McConfig",
    "McSummary",
    "ESTIMATORS",
    "make_rng",
    "simulate_panel",
    "run_monte_carlo",
]

ESTIMATORS = ("arp_cmle", "cox", "beta_only", "mnl", "gmm_combined", "gmm_groups",
              "pooled_logit")


@dataclass
class SimDesign:
    """Population data-generating process.

    Fixed effects are normal(``alpha_mean``, ``alpha_sd``) (one per
    alternative for multinomial designs); covariates are i.i.d.
    normal(``x_mean``, ``x_sd``) per individual, period (and alternative).
    Pre-sample outcomes come from ``burn_in`` periods of the model itself,
    or from Bernoulli(``initial_prob``) / uniform choice when
    ``initial="fixed"``.
    """

    T: int = 3
    p: int = 1
    beta: Sequence = (1.0,)
    gamma: Sequence = (0.5,)
    M: int = 2
    multinomial: bool = False
    alpha_mean: float = 0.0
    alpha_sd: float = 1.0
    x_mean: float = 0.0
    x_sd: float = 1.0
    initial: str = "burn_in"
    initial_prob: float = 0.5
    burn_in: int = 50

    def __post_init__(self):
        if self.initial not in ("burn_in", "fixed"):
            raise InputError(f"unknown initial-condition rule {self.initial!r}")
        if self.multinomial:
            self.theta  # validates restrictions

    @property
    def theta(self) -> Union[ParameterVector, MnlParameterVector]:
        if self.multinomial:
            return MnlParameterVector(np.asarray(self.beta, float), np.asarray(self.gamma, float))
        return ParameterVector(self.beta, self.gamma)

    @property
    def K(self) -> int:
        return self.theta.K

    def true_values(self) -> np.ndarray:
        return self.theta.to_array()

    def param_names(self) -> list[str]:
        if self.multinomial:
            return MnlParameterVector.names(self.M, self.K)
        return ParameterVector.names(self.K, self.p)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["beta"] = np.asarray(self.beta, float).tolist()
        d["gamma"] = np.asarray(self.gamma, float).tolist()
        return d


def make_rng(seed, *key) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def _sim_binary(d: SimDesign, n: int, rng: np.random.Generator) -> PanelDataset:
    th = d.theta
    K, p, T = th.K, d.p, d.T
    alpha = rng.normal(d.alpha_mean, d.alpha_sd, size=n)
    x = rng.normal(d.x_mean, d.x_sd, size=(n, T, K))
    burn = d.burn_in if d.initial == "burn_in" else 0
    y = np.zeros((n, burn + p + T), dtype=np.int64)
    y[:, :p] = rng.random((n, p)) < d.initial_prob
    xb = rng.normal(d.x_mean, d.x_sd, size=(n, burn, K))
    eps = rng.logistic(size=(n, burn + T))
    for j in range(burn + T):
        c = p + j
        xt = xb[:, j] if j < burn else x[:, j - burn]
        z = alpha + xt @ th.beta
        for dd in range(1, p + 1):
            z = z + th.gamma[dd - 1] * y[:, c - dd]
        y[:, c] = (z + eps[:, j]) >= 0
    return PanelDataset(y[:, burn:], x, T, p)


def _sim_mnl(d: SimDesign, n: int, rng: np.random.Generator) -> MnlPanelDataset:
    th = d.theta
    M, K, T = th.M, th.K, d.T
    alpha = rng.normal(d.alpha_mean, d.alpha_sd, size=(n, M))
    x = rng.normal(d.x_mean, d.x_sd, size=(n, T, M, K))
    burn = d.burn_in if d.initial == "burn_in" else 0
    xb = rng.normal(d.x_mean, d.x_sd, size=(n, burn, M, K))
    eps = rng.gumbel(size=(n, burn + T, M))
    y = np.zeros((n, burn + 1 + T), dtype=np.int64)
    y[:, 0] = rng.integers(1, M + 1, size=n)
    for j in range(burn + T):
        xt = xb[:, j] if j < burn else x[:, j - burn]
        u = alpha + th.gamma[y[:, j] - 1] + np.einsum("nmk,mk->nm", xt, th.beta) + eps[:, j]
        y[:, j + 1] = np.argmax(u, axis=1) + 1
    return MnlPanelDataset(y[:, burn:], x, T, M)


def simulate_panel(design: SimDesign, n: int, seed=0, rng: Optional[np.random.Generator] = None):
    """Draw a balanced panel of ``n`` individuals from ``design``.

    Binary outcomes are ``1(index + logistic error >= 0)``; multinomial
    choices maximize utility with i.i.d. type-1 extreme-value errors.
    """
    if rng is None:
        rng = make_rng(seed)
    if design.multinomial:
        return _sim_mnl(design, n, rng)
    return _sim_binary(design, n, rng)


# ---------------------------------------------------------------------------
# Monte Carlo


@dataclass
class McConfig:
    reps: int = 100
    n_grid: Sequence[int] = (500, 2000)
    design: SimDesign = field(default_factory=SimDesign)
    estimators: Sequence[str] = ("arp_cmle",)
    seed: int = 12345
    ci_level: float = 0.95
    threads: int = 1

    def __post_init__(self):
        if self.reps < 1:
            raise InputError("reps must be >= 1")
        grid = list(self.n_grid)
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise InputError("n_grid must be strictly increasing")
        unknown = set(self.estimators) - set(ESTIMATORS)
        if unknown:
            raise InputError(f"unknown estimators {sorted(unknown)}")
        if isinstance(self.design, dict):
            self.design = SimDesign(**self.design)


@dataclass
class McSummary:
    """Replication records and their aggregation.

    ``rows`` hold one dict per (estimator, parameter, n) with bias, RMSE,
    empirical SD, mean SE, coverage, convergence rate, the MC standard error
    of the bias, and ``rmse_ratio`` = RMSE(n) / RMSE(next n in the grid).
    """

    records: list
    rows: list

    def get(self, estimator: str, param: str, n: int) -> dict:
        for r in self.rows:
            if (r["estimator"], r["param"], r["n"]) == (estimator, param, n):
                return r
        raise KeyError((estimator, param, n))

    def estimates(self, estimator: str, param: str, n: int) -> np.ndarray:
        return np.array([r["estimate"] for r in self.records
                         if (r["estimator"], r["param"], r["n"]) == (estimator, param, n)])

    def table(self) -> str:
        head = (f"{'estimator':<14}{'param':<10}{'n':>7}{'bias':>10}{'rmse':>10}"
                f"{'sd':>10}{'mean_se':>10}{'cover':>8}{'conv':>8}{'ratio':>8}")
        lines = [head, "-" * len(head)]
        for r in self.rows:
            ratio = "" if r["rmse_ratio"] is None else f"{r['rmse_ratio']:.4f}"
            lines.append(
                f"{r['estimator']:<14}{r['param']:<10}{r['n']:>7}{r['bias']:>10.4f}"
                f"{r['rmse']:>10.4f}{r['sd']:>10.4f}{r['mean_se']:>10.4f}"
                f"{r['coverage']:>8.4f}{r['conv_rate']:>8.4f}{ratio:>8}")
        return "\n".join(lines) + "\n"


def _estimate(name: str, ds, design: SimDesign):
    """Returns [(param, truth, estimate, se, converged)]."""
    truth = design.true_values()
    names = design.param_names()
    K = design.K
    if name == "arp_cmle":
        res = fit_arp(ds)
        return list(zip(names, truth, res.theta, res.se, [res.converged] * len(names)))
    if name == "mnl":
        res = fit_mnl(ds)
        return list(zip(names, truth, res.theta, res.se, [res.converged] * len(names)))
    if name == "cox":
        res = fit_cox(ds)
        return [("gamma1", truth[K], res.theta[0], res.se[0], res.converged)]
    if name == "beta_only":
        res = fit_beta_only(ds)
        return list(zip(names[:K], truth[:K], res.theta, res.se, [res.converged] * K))
    if name == "pooled_logit":
        res = fit_pooled_logit(ds)
        P = len(names)
        return list(zip(names, truth, res.theta[:P], res.se[:P], [res.converged] * P))
    if name in ("gmm_combined", "gmm_groups"):
        if name == "gmm_groups":
            systems = [arp_group_system(ds)]
        elif K == 0:
            systems = [arp_score_system(ds), cox_system(ds)]
        else:
            systems = [arp_score_system(ds), beta_only_system(ds)]
        start = fit_arp(ds, vcov=None).theta
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = gmm_estimate(systems, start)
        return list(zip(names, truth, res.theta, res.se, [res.converged] * len(names)))
    raise InputError(f"unknown estimator {name!r}")


def _one_rep(args):
    cfg_dict, r, j = args
    design = SimDesign(**cfg_dict["design"])
    n = cfg_dict["n_grid"][j]
    ds = simulate_panel(design, n, rng=make_rng(cfg_dict["seed"], r, j))
    out = []
    for est in cfg_dict["estimators"]:
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                rows = _estimate(est, ds, design)
        except (DynLogitError, np.linalg.LinAlgError, FloatingPointError, ValueError):
            rows = [(nm, tv, math.nan, math.nan, False)
                    for nm, tv in _param_truth(est, design)]
        for param, tv, e, s, c in rows:
            out.append(dict(rep=r, n=n, estimator=est, param=param, truth=float(tv),
                            estimate=float(e), se=float(s), converged=bool(c)))
    return out


def _param_truth(est, design):
    names, truth, K = design.param_names(), design.true_values(), design.K
    if est == "cox":
        return [("gamma1", truth[K])]
    if est == "beta_only":
        return list(zip(names[:K], truth[:K]))
    return list(zip(names, truth))


def _aggregate(records, cfg: McConfig) -> list:
    from scipy import stats

    q = stats.norm.ppf(0.5 + cfg.ci_level / 2)
    keys = []
    for r in records:
        k = (r["estimator"], r["param"])
        if k not in keys:
            keys.append(k)
    rows = []
    for est, param in keys:
        per_n = []
        for n in cfg.n_grid:
            sel = [r for r in records if (r["estimator"], r["param"], r["n"]) == (est, param, n)]
            ok = [r for r in sel if r["converged"] and math.isfinite(r["estimate"])]
            truth = sel[0]["truth"]
            e = np.array([r["estimate"] for r in ok])
            s = np.array([r["se"] for r in ok])
            if e.size:
                err = e - truth
                bias = float(err.mean())
                rmse = float(np.sqrt(np.mean(err ** 2)))
                sd = float(e.std(ddof=1)) if e.size > 1 else 0.0
                fin = np.isfinite(s)
                mean_se = float(s[fin].mean()) if fin.any() else math.nan
                cover = float(np.mean(np.abs(err[fin]) <= q * s[fin])) if fin.any() else math.nan
            else:
                bias = rmse = sd = mean_se = cover = math.nan
            per_n.append(dict(estimator=est, param=param, n=n, truth=truth, bias=bias,
                              rmse=rmse, sd=sd, mean_se=mean_se, coverage=cover,
                              conv_rate=len(ok) / len(sel), reps=len(sel),
                              bias_mc_se=sd / math.sqrt(max(len(ok), 1)),
                              rmse_ratio=None))
        for a, b in zip(per_n, per_n[1:]):
            a["rmse_ratio"] = a["rmse"] / b["rmse"] if b["rmse"] > 0 else math.nan
        rows.extend(per_n)
    return rows


def run_monte_carlo(cfg: McConfig) -> McSummary:
    """Simulate, estimate and aggregate over ``cfg.reps`` replications per sample size.

    Estimator failures are recorded as non-converged replications. Results
    do not depend on ``cfg.threads``.
    """
    cfg_dict = dict(design=cfg.design.to_dict(), n_grid=list(cfg.n_grid),
                    estimators=list(cfg.estimators), seed=cfg.seed)
    tasks = [(cfg_dict, r, j) for r in range(cfg.reps) for j in range(len(cfg.n_grid))]
    if cfg.threads and cfg.threads > 1:
        with ProcessPoolExecutor(max_workers=cfg.threads) as pool:
            chunks = list(pool.map(_one_rep, tasks, chunksize=max(1, len(tasks) // (4 * cfg.threads))))
    else:
        chunks = [_one_rep(t) for t in tasks]
    records = [rec for ch in chunks for rec in ch]
    records.sort(key=lambda r: (r["rep"], r["n"], ESTIMATORS.index(r["estimator"])))
    return McSummary(records, _aggregate(records, cfg))


# ---------------------------------------------------------------------------
# output


def fmt_num(v) -> str:
    """Full-precision text for machine-readable files."""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        return format(v, ".17g")
    return "" if v is None else str(v)


def csv_text(rows: list, columns: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt_num(r[c]) for c in columns])
    return buf.getvalue()


REPLICATION_COLUMNS = ("rep", "n", "estimator", "param", "estimate", "se", "converged")
SUMMARY_COLUMNS = ("estimator", "param", "n", "truth", "bias", "rmse", "sd", "mean_se",
                   "coverage", "conv_rate", "reps", "bias_mc_se", "rmse_ratio")


def write_atomic(path, text: str) -> None:
    path = os.fspath(path)
    d = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
