"""
Command-line front end.

    dynlogit sets --T 5 --p 1
    dynlogit simulate --model arp --T 3 --n 2000 --seed 1 --out-dir run/
    dynlogit estimate --model arp --p 1 --data run/data.csv --out-dir fit/
    dynlogit gmm --data run/data.csv --systems arp,cox --out-dir gmm/
    dynlogit oracle --spec spec.json --query cond
    dynlogit mc --config mc.json --out-dir mc/

Exit codes: 0 success, 1 input error, 2 numerical failure or non-convergence.
Machine-readable files carry 17 significant digits and are written only
after the whole command has succeeded.
"""

from __future__ import annotations

import argparse
import json
import os
import shutil
import sys
import tempfile
import warnings
from pathlib import Path

import numpy as np

from .errors import DynLogitError, EnumerationLimit, InputError, NumericalError
from .index_sets import build_group_system
from .inference import (
    arp_group_system,
    arp_score_system,
    beta_only_system,
    cox_system,
    fit_arp,
    fit_beta_only,
    fit_cox,
    fit_mnl,
    gmm_estimate,
)
from .likelihood_binary import enumerate_lambda
from .oracle import (
    DgpSpec,
    block_conditional_probability,
    enumerate_paths,
    factorized_block_probability,
)
from .panel_data import (
    MnlParameterVector,
    ParameterVector,
    load_csv,
    validate,
    write_csv,
)
from .simulate import (
    REPLICATION_COLUMNS,
    SUMMARY_COLUMNS,
    McConfig,
    SimDesign,
    csv_text,
    fmt_num,
    run_monte_carlo,
    simulate_panel,
)

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2

# keys a --config file may set, per command (flags override them)
CONFIG_KEYS = {
    "estimate": {"data", "model", "p", "M", "tol", "vcov", "out_dir"},
    "gmm": {"data", "p", "systems", "tol", "out_dir"},
    "sets": {"T", "p", "out_dir"},
    "oracle": {"spec", "query", "out_dir"},
    "simulate": {"model", "T", "p", "M", "n", "seed", "design", "out_dir"},
    "mc": {"reps", "n_grid", "design", "estimators", "seed", "ci_level", "threads", "out_dir"},
}


class _Staging:
    """Collects output files and moves them into place only on success."""

    def __init__(self, out_dir):
        self.out_dir = Path(out_dir) if out_dir else None
        self.files: dict = {}

    def add(self, name: str, text: str) -> None:
        self.files[name] = text

    def commit(self) -> None:
        if self.out_dir is None or not self.files:
            return
        self.out_dir.mkdir(parents=True, exist_ok=True)
        tmpdir = tempfile.mkdtemp(dir=self.out_dir, prefix=".staging-")
        try:
            for name, text in self.files.items():
                with open(os.path.join(tmpdir, name), "w", encoding="utf-8", newline="") as fh:
                    fh.write(text)
            for name in self.files:
                os.replace(os.path.join(tmpdir, name), self.out_dir / name)
        finally:
            shutil.rmtree(tmpdir, ignore_errors=True)


def _json(obj) -> str:
    def conv(o):
        if isinstance(o, dict):
            return {k: conv(v) for k, v in o.items()}
        if isinstance(o, (list, tuple)):
            return [conv(v) for v in o]
        if isinstance(o, np.ndarray):
            return conv(o.tolist())
        if isinstance(o, (float, np.floating)):
            return float(fmt_num(o)) if np.isfinite(o) else None
        if isinstance(o, (np.integer,)):
            return int(o)
        if isinstance(o, np.bool_):
            return bool(o)
        return o
    return json.dumps(conv(obj), indent=2, sort_keys=True) + "\n"


def _merge_config(args, command: str) -> dict:
    cfg = {}
    if getattr(args, "config", None):
        try:
            with open(args.config, encoding="utf-8") as fh:
                cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InputError(f"config is not valid JSON: {exc}") from None
        if not isinstance(cfg, dict):
            raise InputError("config must be a JSON object")
        unknown = set(cfg) - CONFIG_KEYS[command]
        if unknown:
            raise InputError(f"unknown config keys for {command}: {sorted(unknown)}")
    for key in CONFIG_KEYS[command]:
        v = getattr(args, key, None)
        if v is not None:
            cfg[key] = v
    return cfg


def _human_table(rows) -> str:
    lines = [f"{'parameter':<12}{'estimate':>11}{'se':>10}{'z':>9}{'ci_low':>10}{'ci_high':>10}"]
    for r in rows:
        lines.append(f"{r['parameter']:<12}{r['estimate']:>11.4f}{r['se']:>10.4f}{r['z']:>9.4f}"
                     f"{r['ci_low']:>10.4f}{r['ci_high']:>10.4f}")
    return "\n".join(lines)


def _result_bundle(res, extra=None) -> dict:
    out = dict(method=res.method, names=res.names, theta=res.theta, se=res.se, vcov=res.vcov,
               converged=res.converged, iterations=res.iterations,
               objective_path=res.objective_path, gradient_norm=res.gradient_norm)
    if res.j_stat is not None:
        out.update(j_stat=res.j_stat, j_dof=res.j_dof, j_pvalue=res.j_pvalue)
    if extra:
        out.update(extra)
    return out


def _emit_estimate(res, staging, extra=None) -> int:
    rows = res.table()
    staging.add("estimates.csv",
                csv_text(rows, ("parameter", "estimate", "se", "z", "ci_low", "ci_high")))
    staging.add("result.json", _json(_result_bundle(res, extra)))
    print(_human_table(rows))
    if res.j_stat is not None:
        print(f"J = {res.j_stat:.4f} (dof {res.j_dof}, p = {res.j_pvalue:.4f})")
    if not res.converged:
        print("error: optimizer did not converge", file=sys.stderr)
        return EXIT_NUMERIC
    staging.commit()
    return EXIT_OK


def cmd_estimate(args) -> int:
    cfg = _merge_config(args, "estimate")
    model = cfg.get("model", "arp")
    if "data" not in cfg:
        raise InputError("--data is required")
    tol = float(cfg.get("tol", 1e-8))
    vcov = cfg.get("vcov", "sandwich")
    staging = _Staging(cfg.get("out_dir"))
    if model == "mnl":
        ds = load_csv(cfg["data"], kind="multinomial")
        if cfg.get("M") is not None and int(cfg["M"]) != ds.M:
            raise InputError(f"--M {cfg['M']} but data have {ds.M} alternatives")
    else:
        ds = load_csv(cfg["data"], p=int(cfg.get("p", 1)))
    diags = [d.message for d in validate(ds) if d.severity == "warning"]
    for msg in diags:
        print(f"warning: {msg}", file=sys.stderr)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        if model == "arp":
            res = fit_arp(ds, vcov=vcov, tol=tol)
        elif model == "cox":
            res = fit_cox(ds, vcov=vcov, tol=tol)
        elif model == "beta-only":
            res = fit_beta_only(ds, vcov=vcov, tol=tol)
        elif model == "mnl":
            res = fit_mnl(ds, vcov=vcov, tol=tol)
        else:
            raise InputError(f"unknown model {model!r}")
    return _emit_estimate(res, staging, {"model": model, "n": ds.n, "T": ds.T})


def cmd_gmm(args) -> int:
    cfg = _merge_config(args, "gmm")
    if "data" not in cfg:
        raise InputError("--data is required")
    ds = load_csv(cfg["data"], p=int(cfg.get("p", 1)))
    names = [s.strip() for s in str(cfg.get("systems", "arp,cox")).split(",") if s.strip()]
    builders = {"arp": arp_score_system, "arp-groups": arp_group_system,
                "cox": cox_system, "beta-only": beta_only_system}
    unknown = set(names) - set(builders)
    if unknown:
        raise InputError(f"unknown moment systems {sorted(unknown)}")
    systems = [builders[s](ds) for s in names]
    tol = float(cfg.get("tol", 1e-8))
    staging = _Staging(cfg.get("out_dir"))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        start = fit_arp(ds, vcov=None, tol=tol).theta
        res = gmm_estimate(systems, start, tol=tol,
                           names=ParameterVector.names(ds.K, ds.p))
    return _emit_estimate(res, staging, {"systems": names, "n": ds.n, "T": ds.T})


def cmd_sets(args) -> int:
    cfg = _merge_config(args, "sets")
    if "T" not in cfg:
        raise InputError("--T is required")
    gs = build_group_system(int(cfg["T"]), int(cfg.get("p", 1)))
    lines = "".join(json.dumps({"group": g + 1, "times": list(grp.times)}) + "\n"
                    for g, grp in enumerate(gs))
    sys.stdout.write(lines)
    staging = _Staging(cfg.get("out_dir"))
    staging.add("sets.jsonl", lines)
    staging.commit()
    return EXIT_OK


def _spec_from_json(d: dict) -> DgpSpec:
    allowed = {"T", "p", "beta", "gamma", "alpha", "x", "initial", "multinomial"}
    unknown = set(d) - allowed
    if unknown:
        raise InputError(f"unknown spec keys {sorted(unknown)}")
    try:
        T = int(d["T"])
        if d.get("multinomial", False):
            theta = MnlParameterVector(np.array(d["beta"], float), np.array(d["gamma"], float))
            p = 1
        else:
            theta = ParameterVector(d.get("beta", []), d["gamma"])
            p = int(d.get("p", theta.p))
    except KeyError as exc:
        raise InputError(f"spec is missing {exc}") from None
    initial = d.get("initial", [0] * p)
    if isinstance(initial, dict):
        initial = {tuple(int(c) for c in k.split(",")): float(v) for k, v in initial.items()}
    x = np.array(d.get("x", []), dtype=float)
    return DgpSpec(T, p, theta, d.get("alpha", 0.0), x, initial)


def cmd_oracle(args) -> int:
    cfg = _merge_config(args, "oracle")
    if "spec" not in cfg:
        raise InputError("--spec is required")
    with open(cfg["spec"], encoding="utf-8") as fh:
        try:
            spec = _spec_from_json(json.load(fh))
        except json.JSONDecodeError as exc:
            raise InputError(f"spec is not valid JSON: {exc}") from None
    query = cfg.get("query", "cond")
    staging = _Staging(cfg.get("out_dir"))
    if query == "paths":
        paths, logp = enumerate_paths(spec)
        rows = [dict(path="".join(str(v) for v in pth), probability=float(np.exp(lp)))
                for pth, lp in zip(paths, logp)]
        for r in rows:
            print(f"{r['path']:<16}{r['probability']:.4f}")
        staging.add("oracle_paths.csv", csv_text(rows, ("path", "probability")))
        staging.commit()
        return EXIT_OK
    if query != "cond":
        raise InputError(f"unknown query {query!r}")
    gs = build_group_system(spec.T, spec.p)
    rows = []
    for g, grp in enumerate(gs):
        m = grp.m
        lag_options = list(np.ndindex(*([len(spec.outcomes)] * (m * spec.p))))
        for lag_idx in lag_options:
            flat = [spec.outcomes[k] for k in lag_idx]
            lags = tuple(tuple(flat[d * m:(d + 1) * m]) for d in range(spec.p))
            if spec.multinomial:
                outs = sorted({tuple(o) for o in np.ndindex(*([spec.M] * m))})
                outs = [tuple(v + 1 for v in o) for o in outs if len(set(o)) > 1]
            else:
                outs = [tuple(int(v) for v in lam) for s in range(1, m)
                        for lam in enumerate_lambda(m, s)]
            for out in outs:
                try:
                    pr = block_conditional_probability(spec, grp.times, lags, out)
                except NumericalError:
                    continue
                fp = factorized_block_probability(spec, grp.times, lags, out)
                rows.append(dict(group=" ".join(map(str, grp.times)),
                                 lags="|".join("".join(map(str, l)) for l in lags),
                                 outcome="".join(map(str, out)),
                                 oracle=pr, model=fp))
    print(f"{'group':<10}{'lags':<12}{'outcome':<9}{'oracle':>9}{'model':>9}")
    for r in rows:
        print(f"{r['group']:<10}{r['lags']:<12}{r['outcome']:<9}{r['oracle']:>9.4f}{r['model']:>9.4f}")
    staging.add("oracle_cond.csv", csv_text(rows, ("group", "lags", "outcome", "oracle", "model")))
    staging.commit()
    return EXIT_OK


def _design_from(cfg: dict) -> SimDesign:
    d = dict(cfg.get("design", {}))
    if not isinstance(d, dict):
        raise InputError("design must be an object")
    model = cfg.get("model")
    if model == "mnl":
        d["multinomial"] = True
    for key in ("T", "p", "M"):
        if cfg.get(key) is not None:
            d[key] = int(cfg[key])
    if d.get("multinomial") and "beta" not in d:
        M = int(d.get("M", 3))
        d.setdefault("beta", [[0.0]] + [[1.0]] * (M - 1))
        g = np.zeros((M, M))
        g[1:, 1:] = 0.5 * np.eye(M - 1)
        d.setdefault("gamma", g.tolist())
        d["M"] = M
    if d.get("multinomial"):
        d["p"] = 1
    try:
        return SimDesign(**d)
    except TypeError as exc:
        raise InputError(f"bad design: {exc}") from None


def cmd_simulate(args) -> int:
    cfg = _merge_config(args, "simulate")
    design = _design_from(cfg)
    n = int(cfg.get("n", 1000))
    seed = int(cfg.get("seed", 0))
    ds = simulate_panel(design, n, seed)
    out_dir = cfg.get("out_dir")
    if not out_dir:
        raise InputError("--out-dir is required")
    Path(out_dir).mkdir(parents=True, exist_ok=True)
    tmp = tempfile.NamedTemporaryFile(dir=out_dir, prefix=".tmp-", suffix=".csv", delete=False)
    tmp.close()
    try:
        write_csv(ds, tmp.name)
        staging = _Staging(out_dir)
        staging.add("data.csv", Path(tmp.name).read_text(encoding="utf-8"))
        staging.add("design.json", _json(dict(design=design.to_dict(), n=n, seed=seed)))
        staging.commit()
    finally:
        os.unlink(tmp.name)
    print(f"wrote {n} individuals, T={design.T}, to {out_dir}")
    return EXIT_OK


def cmd_mc(args) -> int:
    cfg = _merge_config(args, "mc")
    out_dir = cfg.pop("out_dir", None)
    threads = args.threads if args.threads is not None else cfg.get("threads", os.cpu_count() or 1)
    cfg.pop("threads", None)
    design = cfg.pop("design", {})
    try:
        mc = McConfig(design=SimDesign(**design), threads=int(threads), **cfg)
    except TypeError as exc:
        raise InputError(f"bad mc config: {exc}") from None
    summary = run_monte_carlo(mc)
    text = summary.table()
    print(text, end="")
    staging = _Staging(out_dir)
    staging.add("replications.csv", csv_text(summary.records, REPLICATION_COLUMNS))
    staging.add("summary.csv", csv_text(summary.rows, SUMMARY_COLUMNS))
    staging.add("summary.txt", text)
    staging.commit()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dynlogit",
                                 description="Conditional ML for fixed-effects dynamic panel logit models")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, seed=False):
        p.add_argument("--config", help="JSON file with option values (flags override)")
        p.add_argument("--out-dir", dest="out_dir")
        p.add_argument("--threads", type=int, default=None)
        if seed:
            p.add_argument("--seed", type=int)

    p = sub.add_parser("estimate", help="fit a conditional ML estimator")
    common(p)
    p.add_argument("--data")
    p.add_argument("--model", choices=["arp", "cox", "beta-only", "mnl"])
    p.add_argument("--p", type=int)
    p.add_argument("--M", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--vcov", choices=["sandwich", "hessian"])
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("gmm", help="two-step GMM over stacked likelihood equations")
    common(p)
    p.add_argument("--data")
    p.add_argument("--p", type=int)
    p.add_argument("--systems", help="comma list of arp, arp-groups, cox, beta-only")
    p.add_argument("--tol", type=float)
    p.set_defaults(func=cmd_gmm)

    p = sub.add_parser("sets", help="print the maximal group system as JSON lines")
    common(p)
    p.add_argument("--T", type=int)
    p.add_argument("--p", type=int)
    p.set_defaults(func=cmd_sets)

    p = sub.add_parser("oracle", help="exact conditional probabilities for one individual")
    common(p)
    p.add_argument("--spec")
    p.add_argument("--query", choices=["cond", "paths"])
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("simulate", help="simulate a panel to CSV")
    common(p, seed=True)
    p.add_argument("--model", choices=["arp", "mnl"])
    p.add_argument("--T", type=int)
    p.add_argument("--p", type=int)
    p.add_argument("--M", type=int)
    p.add_argument("--n", type=int)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("mc", help="Monte Carlo bias / RMSE / coverage study")
    common(p, seed=True)
    p.set_defaults(func=cmd_mc)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InputError, EnumerationLimit, FileNotFoundError, IsADirectoryError,
            PermissionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except DynLogitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
