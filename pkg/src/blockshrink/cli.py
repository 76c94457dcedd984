"""Command-line front end.

Subcommands: estimate (fit one sample), simulate (Monte Carlo experiment),
bounds (risk-bound report), seqmodel (sequence-space lab), benchmark
(minimax constants).  Every run is driven by one JSON config document;
unknown keys are rejected.  Exit codes: 0 success, 2 bad configuration,
3 numeric failure, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys

import numpy as np

from .bounds import DEFAULT_CONSTANTS, UniversalConstants, minimax_benchmark, \
    seq_bound_report
from .estimator import assemble_cf, default_grid, density_grid, ep_weights, \
    oracle_weights, stein_weights
from .harness import ConfigError, ExperimentConfig, NumericError, _as_int, \
    _ensure_dir, _parse_nu, _rep_rng, dict_hash, emit_report, read_sample_file, \
    run_experiment
from .schedule import build_integer_schedule, build_schedule
from .seqmodel import SeqExperiment, seq_risks
from .spectral import block_stats


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blockshrink",
        description="Blockwise-shrinkage density and characteristic-function "
                    "estimation: fitting, Monte Carlo studies, risk bounds.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True,
                       help="path to the JSON config document")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--reps", type=int, default=None,
                       help="override the config replication count")
        p.add_argument("--out-dir", default=None,
                       help="directory for output files (default: config out_dir)")
        p.add_argument("--format", default="json",
                       choices=("json", "csv", "plotdata"),
                       help="report format (default json)")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads (default: available parallelism); "
                            "results do not depend on this")

    p = sub.add_parser("estimate", help="fit estimates to one sample")
    common(p)
    p.add_argument("--sample", default=None,
                   help="sample file, one real per line; omitted means draw "
                        "from the configured spec")

    for name, doc in (("simulate", "run the configured Monte Carlo experiment"),
                      ("bounds", "evaluate the risk-bound report"),
                      ("seqmodel", "sequence-space simulation lab"),
                      ("benchmark", "minimax benchmark constants")):
        common(sub.add_parser(name, help=doc))
    return parser


def _load_config(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return doc


def _apply_overrides(doc: dict, args) -> dict:
    doc = dict(doc)
    if args.seed is not None:
        doc["seed"] = args.seed
    if args.reps is not None:
        doc["replications"] = args.reps
    if args.out_dir is not None:
        doc["out_dir"] = args.out_dir
    return doc


def _hash_line(h: str) -> str:
    return f"# config={h}\n"


def _write_rows(path: str, h: str, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(_hash_line(h))
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow(row)


def _fmt(v) -> str:
    return repr(float(v))


def cmd_estimate(args) -> int:
    cfg = ExperimentConfig.from_dict(_apply_overrides(_load_config(args.config), args))
    if args.sample is not None:
        sample = read_sample_file(args.sample)
    else:
        sample = cfg.spec.sample(cfg.n, _rep_rng(cfg.seed, cfg.rep_offset))
    n = len(sample)
    try:
        sched = build_schedule(cfg.portfolio, n)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    stats = block_stats(sample, sched)
    out = _ensure_dir(args.out_dir if args.out_dir is not None else cfg.out_dir)
    h = cfg.config_hash()
    xs = default_grid(sample, m=1024)
    us = np.linspace(0.0, sched.span, 513)
    written = []
    for name in cfg.estimators:
        if name == "ep":
            prof = ep_weights(stats)
        elif name == "stein":
            prof = stein_weights(stats)
        else:
            prof = oracle_weights(cfg.spec, sched)
        est = assemble_cf(prof, sample)

        path = os.path.join(out, f"weights_{name}.csv")
        _write_rows(path, h, ["k", "length", "threshold", "weight"],
                    ([k, _fmt(sched.lengths[k - 1]), _fmt(sched.thresholds[k - 1]),
                      _fmt(prof.weights[k - 1])] for k in range(1, sched.n_blocks + 1)))
        written.append(path)

        vals = est(us)
        path = os.path.join(out, f"cf_{name}.csv")
        _write_rows(path, h, ["u", "real", "imag", "weight"],
                    ([_fmt(u), _fmt(v.real), _fmt(v.imag), _fmt(est.weight_at(u))]
                     for u, v in zip(us, vals)))
        written.append(path)

        _, dens = density_grid(est, grid=xs)
        path = os.path.join(out, f"density_{name}.csv")
        _write_rows(path, h, ["x", "density"],
                    ([_fmt(x), _fmt(v)] for x, v in zip(xs, dens)))
        written.append(path)
    for path in written:
        print(path)
    return 0


def cmd_simulate(args) -> int:
    cfg = ExperimentConfig.from_dict(_apply_overrides(_load_config(args.config), args))
    result = run_experiment(cfg, threads=args.threads)
    for path in emit_report(result, args.format, out_dir=args.out_dir):
        print(path)
    for name, summary in result.estimates.items():
        print(f"{name}: mise={_fmt(summary.mise)} se={_fmt(summary.se)}")
    print(f"oracle (analytic): {_fmt(result.oracle_risk)}")
    if result.benchmark is not None:
        print(f"benchmark: {_fmt(result.benchmark)}")
    return 0


def cmd_bounds(args) -> int:
    cfg = ExperimentConfig.from_dict(_apply_overrides(_load_config(args.config), args))
    try:
        sched = build_schedule(cfg.portfolio, cfg.n)
        from .bounds import density_bound_report
        report = density_bound_report(cfg.spec, sched, cfg.n, nu=cfg.nu,
                                      consts=cfg.constants)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    out = _ensure_dir(args.out_dir if args.out_dir is not None else cfg.out_dir)
    h = cfg.config_hash()
    if args.format == "json":
        path = os.path.join(out, "bounds.json")
        doc = report.as_dict()
        doc["config_hash"] = h
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
    elif args.format == "csv":
        path = os.path.join(out, "bounds.csv")
        report.to_csv(path)
        with open(path, encoding="utf-8") as fh:
            body = fh.read()
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(_hash_line(h) + body)
    else:
        path = os.path.join(out, "plotdata_bounds.csv")
        ks = report.columns["k"]
        rhs = report.columns["rhs_total"]
        _write_rows(path, h, ["k", "rhs_total"],
                    ([int(k), _fmt(v)] for k, v in zip(ks, rhs)))
    print(path)
    print(f"mise_bound={_fmt(report.aggregates['mise_bound'])}")
    return 0


_SEQ_KEYS = frozenset({"portfolio", "n", "theta", "replications", "seed",
                       "kind", "nu", "q", "constants", "out_dir"})


def cmd_seqmodel(args) -> int:
    doc = _apply_overrides(_load_config(args.config), args)
    unknown = set(doc) - _SEQ_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    for req in ("portfolio", "n"):
        if req not in doc:
            raise ConfigError(f"config is missing required key {req!r}")
    from .schedule import Portfolio
    try:
        portfolio = Portfolio.from_dict(doc["portfolio"])
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc
    n = _as_int(doc["n"], "n", 4)
    reps = _as_int(doc.get("replications", 1000), "replications", 1)
    seed = _as_int(doc.get("seed", 0), "seed", 0)
    kind = str(doc.get("kind", "ep")).lower()
    nu = _parse_nu(doc.get("nu"))
    q = doc.get("q", 0.25)
    consts = DEFAULT_CONSTANTS
    if "constants" in doc:
        c = doc["constants"]
        if not isinstance(c, dict) or set(c) - {"c1", "c2", "C0"}:
            raise ConfigError(f"constants must be an object with keys c1, c2, C0; got {c!r}")
        try:
            consts = UniversalConstants(**c)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    try:
        q = float(q)
    except (TypeError, ValueError):
        raise ConfigError(f"q must be a number, got {q!r}") from None
    theta = doc.get("theta", [])
    if not isinstance(theta, list):
        raise ConfigError("theta must be a list of reals")
    try:
        sched = build_integer_schedule(portfolio, n)
        exp = SeqExperiment(theta=tuple(float(v) for v in theta),
                            schedule=sched, seed=seed)
        risks = seq_risks(exp, estimator_kind=kind, replications=reps,
                          nu=nu, q=q, consts=consts)
        report = seq_bound_report(exp.block_energies(), sched, n,
                                  nu=nu, q=q, consts=consts)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if not math.isfinite(risks.mc_risk):
        raise NumericError("non-finite Monte Carlo risk")

    canon = {"portfolio": portfolio.to_dict(), "n": n, "theta": list(map(float, theta)),
             "replications": reps, "seed": seed, "kind": kind, "nu": nu,
             "q": float(q), "constants": consts.as_dict()}
    h = dict_hash(canon)
    out = _ensure_dir(args.out_dir if args.out_dir is not None
                      else str(doc.get("out_dir", ".")))
    if args.format == "json":
        path = os.path.join(out, "seqmodel.json")
        payload = {
            "config": canon, "config_hash": h,
            "mc_risk": risks.mc_risk, "se": risks.se,
            "oracle_risk": risks.oracle_risk,
            "per_rep": [float(v) for v in risks.per_rep],
            "bound_report": report.as_dict(),
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        written = [path]
    elif args.format == "csv":
        p1 = os.path.join(out, "seq_replications.csv")
        _write_rows(p1, h, ["rep", "risk"],
                    ([r, _fmt(v)] for r, v in enumerate(risks.per_rep)))
        p2 = os.path.join(out, "seq_bounds.csv")
        report.to_csv(p2)
        with open(p2, encoding="utf-8") as fh:
            body = fh.read()
        with open(p2, "w", encoding="utf-8") as fh:
            fh.write(_hash_line(h) + body)
        written = [p1, p2]
    else:
        path = os.path.join(out, "plotdata_seq.csv")
        _write_rows(path, h, ["rep", "risk"],
                    ([r, _fmt(v)] for r, v in enumerate(risks.per_rep)))
        written = [path]
    for path in written:
        print(path)
    print(f"{kind}: risk={_fmt(risks.mc_risk)} se={_fmt(risks.se)} "
          f"oracle={_fmt(risks.oracle_risk)}")
    return 0


def cmd_benchmark(args) -> int:
    cfg = ExperimentConfig.from_dict(_apply_overrides(_load_config(args.config), args))
    if cfg.benchmark_class is None:
        raise ConfigError("benchmark needs a benchmark_class in the config")
    bc = dict(cfg.benchmark_class)
    kind = bc.pop("kind")
    try:
        value = minimax_benchmark(kind, cfg.n, **bc)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    out = _ensure_dir(args.out_dir if args.out_dir is not None else cfg.out_dir)
    h = cfg.config_hash()
    if args.format == "json":
        path = os.path.join(out, "benchmark.json")
        payload = {"config_hash": h, "kind": kind, "params": bc,
                   "n": cfg.n, "value": value}
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    else:
        name = "benchmark.csv" if args.format == "csv" else "plotdata_benchmark.csv"
        path = os.path.join(out, name)
        _write_rows(path, h, ["n", "value"], [[cfg.n, _fmt(value)]])
    print(path)
    print(f"minimax benchmark ({kind}, n={cfg.n}): {_fmt(value)}")
    return 0


_HANDLERS = {
    "estimate": cmd_estimate,
    "simulate": cmd_simulate,
    "bounds": cmd_bounds,
    "seqmodel": cmd_seqmodel,
    "benchmark": cmd_benchmark,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _HANDLERS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
