"""
Panel containers, parameter vectors and CSV ingestion.

Binary panels keep the p initial conditions in the same outcome array as the
modeled periods: column ``j`` of ``y`` holds period ``t = j - p + 1``, so the
lag of depth ``d`` at period ``t`` sits in column ``t - d + p - 1``.
Multinomial panels always have one initial period (``t = 0``).
"""

from __future__ import annotations

import csv
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Optional, Union

import numpy as np

from .errors import (
    DimensionMismatch,
    IdentificationError,
    InconsistentPanel,
    InputError,
    MalformedRow,
)

__all__ = [
    "PanelDataset",
    "MnlPanelDataset",
    "ParameterVector",
    "MnlParameterVector",
    "Diagnostic",
    "load_csv",
    "write_csv",
    "validate",
    "check",
]


@dataclass(frozen=True, eq=False)
class PanelDataset:
    """Balanced binary panel with p pre-sample outcomes per individual.

    Parameters
    ----------
    y : ndarray, shape (n, T + p)
        Outcome paths covering periods ``1 - p, ..., T``.
    x : ndarray, shape (n, T, K)
        Covariates for periods ``1, ..., T``; ``K`` may be zero.
    T : int
        Number of modeled periods.
    p : int
        Autoregressive order.
    ids : tuple, optional
        Individual identifiers, sorted. Defaults to ``0..n-1``.
    """

    y: np.ndarray
    x: np.ndarray
    T: int
    p: int
    ids: tuple = field(default=())

    def __post_init__(self):
        y = np.array(self.y, dtype=np.int64, copy=True)
        x = np.array(self.x, dtype=float, copy=True)
        if x.ndim == 2:
            x = x[:, :, None]
        if x.size == 0:
            x = x.reshape(y.shape[0], self.T, 0)
        y.setflags(write=False)
        x.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)
        if not self.ids:
            object.__setattr__(self, "ids", tuple(range(y.shape[0])))

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def K(self) -> int:
        return self.x.shape[2]

    def col(self, t: int) -> int:
        """Column of ``y`` holding period ``t``."""
        return t + self.p - 1

    def outcome(self, t: int) -> np.ndarray:
        return self.y[:, self.col(t)]

    def lag(self, t: int, d: int = 1) -> np.ndarray:
        return self.y[:, self.col(t - d)]

    def subset(self, rows) -> "PanelDataset":
        rows = np.asarray(rows)
        return PanelDataset(self.y[rows], self.x[rows], self.T, self.p,
                            tuple(np.asarray(self.ids, dtype=object)[rows]))


@dataclass(frozen=True, eq=False)
class MnlPanelDataset:
    """Balanced multinomial panel, alternatives labeled ``1..M``.

    ``y`` has shape (n, T + 1) with column 0 the initial choice; ``x`` has
    shape (n, T, M, K) with alternative-specific covariates.
    """

    y: np.ndarray
    x: np.ndarray
    T: int
    M: int
    ids: tuple = field(default=())

    def __post_init__(self):
        y = np.array(self.y, dtype=np.int64, copy=True)
        x = np.array(self.x, dtype=float, copy=True)
        if x.size == 0:
            x = x.reshape(y.shape[0], self.T, self.M, 0)
        y.setflags(write=False)
        x.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)
        if not self.ids:
            object.__setattr__(self, "ids", tuple(range(y.shape[0])))

    p = 1

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def K(self) -> int:
        return self.x.shape[3]

    def col(self, t: int) -> int:
        return t

    def outcome(self, t: int) -> np.ndarray:
        return self.y[:, t]

    def lag(self, t: int, d: int = 1) -> np.ndarray:
        return self.y[:, t - d]


@dataclass
class ParameterVector:
    """Covariate slopes ``beta`` (length K) and feedback ``gamma`` (length p).

    The flat ordering used by every likelihood is ``(beta, gamma)``.
    """

    beta: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        self.beta = np.atleast_1d(np.asarray(self.beta, dtype=float))
        self.gamma = np.atleast_1d(np.asarray(self.gamma, dtype=float))
        if not (np.all(np.isfinite(self.beta)) and np.all(np.isfinite(self.gamma))):
            raise InputError("parameters must be finite")

    @property
    def K(self) -> int:
        return self.beta.size

    @property
    def p(self) -> int:
        return self.gamma.size

    def to_array(self) -> np.ndarray:
        return np.concatenate([self.beta, self.gamma])

    @classmethod
    def from_array(cls, theta, K: int, p: int) -> "ParameterVector":
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (K + p,):
            raise DimensionMismatch(f"expected {K + p} parameters, got {theta.shape}")
        return cls(theta[:K], theta[K:])

    @staticmethod
    def names(K: int, p: int) -> list[str]:
        return [f"beta{k + 1}" for k in range(K)] + [f"gamma{d + 1}" for d in range(p)]


@dataclass
class MnlParameterVector:
    """Multinomial AR(1) parameters with alternative 1 as base category.

    ``beta`` has shape (M, K) and ``gamma`` shape (M, M) with
    ``gamma[k, l]`` the feedback from last period's choice ``k + 1`` to this
    period's choice ``l + 1``. Row 0 of ``beta`` and the first row and column
    of ``gamma`` are structurally zero.
    """

    beta: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=float)
        self.gamma = np.asarray(self.gamma, dtype=float)
        M = self.gamma.shape[0]
        if self.gamma.shape != (M, M) or self.beta.ndim != 2 or self.beta.shape[0] != M:
            raise DimensionMismatch("beta must be (M, K) and gamma (M, M)")
        if np.any(self.gamma[0, :] != 0) or np.any(self.gamma[:, 0] != 0):
            raise IdentificationError("gamma[0, :] and gamma[:, 0] must be zero")
        if np.any(self.beta[0] != 0):
            raise IdentificationError("beta of the base alternative must be zero")
        if not (np.all(np.isfinite(self.beta)) and np.all(np.isfinite(self.gamma))):
            raise InputError("parameters must be finite")

    @property
    def M(self) -> int:
        return self.gamma.shape[0]

    @property
    def K(self) -> int:
        return self.beta.shape[1]

    def to_array(self) -> np.ndarray:
        """Free parameters: beta_2..beta_M stacked, then gamma[1:, 1:] row-major."""
        return np.concatenate([self.beta[1:].ravel(), self.gamma[1:, 1:].ravel()])

    @classmethod
    def from_array(cls, theta, M: int, K: int) -> "MnlParameterVector":
        theta = np.asarray(theta, dtype=float)
        nb = (M - 1) * K
        if theta.shape != (nb + (M - 1) ** 2,):
            raise DimensionMismatch(
                f"expected {nb + (M - 1) ** 2} free parameters, got {theta.shape}")
        beta = np.zeros((M, K))
        beta[1:] = theta[:nb].reshape(M - 1, K)
        gamma = np.zeros((M, M))
        gamma[1:, 1:] = theta[nb:].reshape(M - 1, M - 1)
        return cls(beta, gamma)

    @staticmethod
    def names(M: int, K: int) -> list[str]:
        out = [f"beta{l}_{k + 1}" for l in range(2, M + 1) for k in range(K)]
        out += [f"gamma{k}{l}" for k in range(2, M + 1) for l in range(2, M + 1)]
        return out


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Diagnostic:
    kind: str
    message: str
    individual: Optional[int] = None
    severity: Literal["error", "warning"] = "error"


def validate(ds: Union[PanelDataset, MnlPanelDataset]) -> list[Diagnostic]:
    """Check dataset invariants; one diagnostic per violation.

    Errors describe broken invariants. A ``NoInitialVariation`` warning is
    added when every individual shares the same first lag, since the
    feedback parameter is then identified only through later lags.
    """
    out: list[Diagnostic] = []
    mnl = isinstance(ds, MnlPanelDataset)
    p = 1 if mnl else ds.p
    width = ds.T + p
    n = ds.y.shape[0]
    if n < 1:
        out.append(Diagnostic("Empty", "dataset has no individuals"))
    if mnl:
        if ds.M < 2:
            out.append(Diagnostic("Degenerate", "need at least two alternatives"))
        if ds.T < 3:
            out.append(Diagnostic("IdentificationError", f"T={ds.T} < 3"))
    elif ds.T < p + 2:
        out.append(Diagnostic("IdentificationError", f"T={ds.T} < p+2={p + 2}"))

    if ds.y.ndim != 2 or ds.y.shape[1] != width:
        got = ds.y.shape[1] if ds.y.ndim == 2 else None
        for i in range(n):
            out.append(Diagnostic("PathLengthMismatch",
                                  f"path length {got}, expected {width}", i))
    else:
        lo, hi = (1, ds.M) if mnl else (0, 1)
        bad = np.where(np.any((ds.y < lo) | (ds.y > hi), axis=1))[0]
        for i in bad:
            out.append(Diagnostic("OutcomeDomain",
                                  f"outcomes outside {{{lo}..{hi}}}", int(i)))

    xshape = (n, ds.T, ds.M) if mnl else (n, ds.T)
    if ds.x.shape[:len(xshape)] != xshape:
        out.append(Diagnostic("CovariateShape",
                              f"covariates have shape {ds.x.shape}, expected {xshape}+(K,)"))
    elif ds.x.size:
        axes = tuple(range(1, ds.x.ndim))
        for i in np.where(~np.all(np.isfinite(ds.x), axis=axes))[0]:
            out.append(Diagnostic("NonFinite", "non-finite covariate", int(i)))

    if not out and n > 0:
        first_lag = ds.y[:, p - 1]
        if np.all(first_lag == first_lag[0]):
            out.append(Diagnostic(
                "NoInitialVariation",
                f"every individual has initial outcome {first_lag[0]}",
                severity="warning"))
    return out


def check(ds: Union[PanelDataset, MnlPanelDataset]) -> None:
    """Raise on the first error-level diagnostic."""
    for d in validate(ds):
        if d.severity != "error":
            continue
        if d.kind == "IdentificationError":
            raise IdentificationError(d.message)
        if d.kind in ("PathLengthMismatch", "CovariateShape", "Empty"):
            raise InconsistentPanel(d.message)
        raise InputError(f"{d.kind}: {d.message}")


# ---------------------------------------------------------------------------
# CSV


def _parse_int(value: str, lineno: int, what: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise MalformedRow(f"line {lineno}: {what}={value!r} is not an integer") from None


def _parse_float(value: str, lineno: int) -> float:
    try:
        v = float(value)
    except ValueError:
        raise MalformedRow(f"line {lineno}: covariate {value!r} is not a number") from None
    if not math.isfinite(v):
        raise MalformedRow(f"line {lineno}: non-finite covariate {value!r}")
    return v


def _sort_key(v: str):
    try:
        return (0, int(v), v)
    except ValueError:
        return (1, 0, v)


def load_csv(path: Union[str, os.PathLike], p: int = 1,
             kind: Literal["binary", "multinomial"] = "binary"):
    """Read a long-format panel.

    Binary files have header ``id,t,y,x1,...,xK`` with ``t`` running from
    ``1 - p`` to ``T``; rows with ``t <= 0`` leave the covariate cells empty.
    Multinomial files have header ``id,t,y,alt,x1,...,xK``: one ``alt=0`` row
    at ``t = 0`` and one row per alternative for every ``t >= 1``.

    Raises
    ------
    MalformedRow
        Unparseable cell, wrong column count, or outcome outside its domain.
    InconsistentPanel
        Missing, duplicated or ragged periods, or inconsistent covariates.
    IdentificationError
        ``T < p + 2`` (binary) or ``T < 3`` (multinomial).
    """
    if kind == "multinomial":
        if p != 1:
            raise InputError("multinomial panels are AR(1) only")
        return _load_mnl(path)
    if kind != "binary":
        raise InputError(f"unknown panel kind {kind!r}")
    if p < 1:
        raise InputError("p must be at least 1")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise MalformedRow("empty file") from None
        if header[:3] != ["id", "t", "y"]:
            raise MalformedRow(f"header must start with id,t,y; got {header[:3]}")
        xcols = header[3:]
        if xcols != [f"x{k + 1}" for k in range(len(xcols))]:
            raise MalformedRow(f"covariate columns must be x1..xK; got {xcols}")
        K = len(xcols)
        rows: dict = {}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3 + K:
                raise MalformedRow(f"line {lineno}: expected {3 + K} columns, got {len(row)}")
            pid = row[0].strip()
            t = _parse_int(row[1], lineno, "t")
            yv = _parse_int(row[2], lineno, "y")
            if yv not in (0, 1):
                raise MalformedRow(f"line {lineno}: binary outcome {yv} not in {{0,1}}")
            cells = [c.strip() for c in row[3:]]
            if t <= 0:
                if any(cells):
                    raise InconsistentPanel(
                        f"line {lineno}: covariates given for pre-sample period t={t}")
                xv = None
            else:
                xv = [_parse_float(c, lineno) for c in cells]
            per = rows.setdefault(pid, {})
            if t in per:
                raise InconsistentPanel(f"line {lineno}: duplicate row for id={pid}, t={t}")
            per[t] = (yv, xv)
    if not rows:
        raise InconsistentPanel("no data rows")
    T = max(max(per) for per in rows.values())
    if T < p + 2:
        raise IdentificationError(f"T={T} < p+2={p + 2}")
    expected = set(range(1 - p, T + 1))
    ids = sorted(rows, key=_sort_key)
    y = np.empty((len(ids), T + p), dtype=np.int64)
    x = np.empty((len(ids), T, K))
    for i, pid in enumerate(ids):
        per = rows[pid]
        if set(per) != expected:
            missing = sorted(expected - set(per))
            extra = sorted(set(per) - expected)
            raise InconsistentPanel(
                f"id={pid}: periods missing {missing} / unexpected {extra}")
        for t in range(1 - p, T + 1):
            yv, xv = per[t]
            y[i, t + p - 1] = yv
            if t >= 1:
                x[i, t - 1] = xv
    return PanelDataset(y, x, T, p, tuple(ids))


def _load_mnl(path) -> MnlPanelDataset:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise MalformedRow("empty file") from None
        if header[:4] != ["id", "t", "y", "alt"]:
            raise MalformedRow(f"header must start with id,t,y,alt; got {header[:4]}")
        xcols = header[4:]
        if xcols != [f"x{k + 1}" for k in range(len(xcols))]:
            raise MalformedRow(f"covariate columns must be x1..xK; got {xcols}")
        K = len(xcols)
        rows: dict = {}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4 + K:
                raise MalformedRow(f"line {lineno}: expected {4 + K} columns, got {len(row)}")
            pid = row[0].strip()
            t = _parse_int(row[1], lineno, "t")
            yv = _parse_int(row[2], lineno, "y")
            alt = _parse_int(row[3], lineno, "alt")
            if yv < 1:
                raise MalformedRow(f"line {lineno}: outcome {yv} < 1")
            cells = [c.strip() for c in row[4:]]
            if t == 0:
                if alt != 0 or any(cells):
                    raise InconsistentPanel(
                        f"line {lineno}: t=0 row must have alt=0 and empty covariates")
                xv = None
            elif t < 0:
                raise InconsistentPanel(f"line {lineno}: t={t} < 0")
            else:
                if alt < 1:
                    raise MalformedRow(f"line {lineno}: alt={alt} < 1 for t={t}")
                xv = [_parse_float(c, lineno) for c in cells]
            per = rows.setdefault(pid, {})
            if (t, alt) in per:
                raise InconsistentPanel(
                    f"line {lineno}: duplicate row id={pid}, t={t}, alt={alt}")
            per[(t, alt)] = (yv, xv)
    if not rows:
        raise InconsistentPanel("no data rows")
    T = max(t for per in rows.values() for (t, _) in per)
    M = max(a for per in rows.values() for (_, a) in per)
    if M < 2:
        raise InconsistentPanel("need at least two alternatives")
    if T < 3:
        raise IdentificationError(f"T={T} < 3")
    expected = {(0, 0)} | {(t, a) for t in range(1, T + 1) for a in range(1, M + 1)}
    ids = sorted(rows, key=_sort_key)
    y = np.empty((len(ids), T + 1), dtype=np.int64)
    x = np.empty((len(ids), T, M, K))
    for i, pid in enumerate(ids):
        per = rows[pid]
        if set(per) != expected:
            raise InconsistentPanel(f"id={pid}: (t, alt) rows do not cover 0..{T} x 1..{M}")
        y[i, 0] = per[(0, 0)][0]
        for t in range(1, T + 1):
            chosen = {per[(t, a)][0] for a in range(1, M + 1)}
            if len(chosen) != 1:
                raise InconsistentPanel(f"id={pid}, t={t}: y differs across alt rows")
            y[i, t] = chosen.pop()
            for a in range(1, M + 1):
                x[i, t - 1, a - 1] = per[(t, a)][1]
    if np.any(y > M):
        raise MalformedRow(f"outcome exceeds number of alternatives M={M}")
    return MnlPanelDataset(y, x, T, M, tuple(ids))


def _fmt(v: float) -> str:
    return repr(float(v))


def write_csv(ds: Union[PanelDataset, MnlPanelDataset], path) -> None:
    """Write ``ds`` in the long format read by :func:`load_csv` (atomic)."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=".tmp-", suffix=".csv")
    try:
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            K = ds.K
            xh = [f"x{k + 1}" for k in range(K)]
            if isinstance(ds, MnlPanelDataset):
                w.writerow(["id", "t", "y", "alt"] + xh)
                for i, pid in enumerate(ds.ids):
                    w.writerow([pid, 0, int(ds.y[i, 0]), 0] + [""] * K)
                    for t in range(1, ds.T + 1):
                        for a in range(1, ds.M + 1):
                            w.writerow([pid, t, int(ds.y[i, t]), a]
                                       + [_fmt(v) for v in ds.x[i, t - 1, a - 1]])
            else:
                w.writerow(["id", "t", "y"] + xh)
                for i, pid in enumerate(ds.ids):
                    for t in range(1 - ds.p, ds.T + 1):
                        xv = [""] * K if t <= 0 else [_fmt(v) for v in ds.x[i, t - 1]]
                        w.writerow([pid, t, int(ds.y[i, ds.col(t)])] + xv)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
