"""Experiment configuration, Monte Carlo orchestration, report emission.

A config is one JSON-shaped mapping, parsed fail-closed: unknown keys are
rejected so a typo cannot silently change an experiment.  Replication r
draws from a counter-based generator keyed (seed, rep_offset + r), which
makes runs deterministic, independent of worker count, and splittable:
two runs over disjoint index ranges pool to exactly the single-run result.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import platform
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bounds import BoundReport, DEFAULT_CONSTANTS, UniversalConstants, \
    density_bound_report, minimax_benchmark
from .distributions import Family, cf_block_energy, cf_energy, spec_from_dict, \
    spec_to_dict
from .estimator import ep_weights, oracle_weights, plancherel_mise, \
    stein_ep_gap, stein_weights
from .schedule import BlockSchedule, Portfolio, build_schedule
from .spectral import block_stats


class ConfigError(ValueError):
    """Bad configuration: unknown keys, broken invariants, infeasible setup."""


class NumericError(ArithmeticError):
    """NaN or overflow surfaced in data or results."""


def _rep_rng(seed: int, rep: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[int(seed), int(rep)]))


def dict_hash(d: dict) -> str:
    """Short stable fingerprint of a JSON-serializable mapping."""
    blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


_ESTIMATORS = ("ep", "stein", "oracle")
_BENCH_KINDS = ("sobolev", "analytic", "bounded_spectrum")
_BENCH_PARAMS = ("alpha", "Q", "rate", "gamma", "radius", "cf_problem")

_CONFIG_KEYS = frozenset({
    "spec", "portfolio", "n", "replications", "estimators", "seed",
    "rep_offset", "out_dir", "benchmark_class", "constants", "bound_report",
    "nu",
})


def _as_int(value, name: str, minimum: int) -> int:
    try:
        v = int(value)
        exact = float(value) == v
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    if not exact or v < minimum:
        raise ConfigError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return v


def _parse_nu(nu):
    if nu is None:
        return None
    vals = nu if isinstance(nu, (list, tuple)) else [nu]
    try:
        ok = all(0.0 < float(v) < 1.0 for v in vals)
    except (TypeError, ValueError):
        ok = False
    if not ok:
        raise ConfigError(f"nu must be a number or list of numbers in (0, 1), got {nu!r}")
    return [float(v) for v in vals] if isinstance(nu, (list, tuple)) else float(nu)


@dataclass(frozen=True)
class ExperimentConfig:
    """One density-estimation Monte Carlo experiment, fully specified."""

    spec: Family
    portfolio: Portfolio
    n: int
    replications: int = 200
    estimators: tuple = ("ep",)
    seed: int = 0
    rep_offset: int = 0
    out_dir: str = "."
    benchmark_class: dict | None = None
    constants: UniversalConstants = DEFAULT_CONSTANTS
    bound_report: bool = False
    nu: object = None

    def __post_init__(self):
        if self.n <= 3:
            raise ConfigError("sample size n must exceed 3")
        if self.replications < 1:
            raise ConfigError("need at least one replication")
        if self.rep_offset < 0:
            raise ConfigError("rep_offset must be nonnegative")
        names = tuple(str(e).lower() for e in self.estimators)
        bad = [e for e in names if e not in _ESTIMATORS]
        if bad or not names:
            raise ConfigError(
                f"estimators must be a nonempty subset of {_ESTIMATORS}, got {self.estimators!r}")
        if len(set(names)) != len(names):
            raise ConfigError("estimators listed twice")
        object.__setattr__(self, "estimators", names)
        if self.benchmark_class is not None:
            bc = self.benchmark_class
            if not isinstance(bc, dict) or bc.get("kind") not in _BENCH_KINDS:
                raise ConfigError(
                    f"benchmark_class needs a 'kind' in {_BENCH_KINDS}, got {bc!r}")
            extra = set(bc) - {"kind"} - set(_BENCH_PARAMS)
            if extra:
                raise ConfigError(f"unknown benchmark parameters {sorted(extra)}")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(d) - _CONFIG_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        for req in ("spec", "portfolio", "n"):
            if req not in d:
                raise ConfigError(f"config is missing required key {req!r}")
        try:
            spec = spec_from_dict(d["spec"])
            portfolio = Portfolio.from_dict(d["portfolio"])
        except (ValueError, TypeError, KeyError) as exc:
            raise ConfigError(str(exc)) from exc
        consts = DEFAULT_CONSTANTS
        if "constants" in d:
            c = d["constants"]
            if not isinstance(c, dict) or set(c) - {"c1", "c2", "C0"}:
                raise ConfigError(f"constants must be an object with keys c1, c2, C0; got {c!r}")
            try:
                consts = UniversalConstants(**c)
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
        return cls(
            spec=spec,
            portfolio=portfolio,
            n=_as_int(d["n"], "n", 4),
            replications=_as_int(d.get("replications", 200), "replications", 1),
            estimators=tuple(d.get("estimators", ["ep"])),
            seed=_as_int(d.get("seed", 0), "seed", 0),
            rep_offset=_as_int(d.get("rep_offset", 0), "rep_offset", 0),
            out_dir=str(d.get("out_dir", ".")),
            benchmark_class=d.get("benchmark_class"),
            constants=consts,
            bound_report=bool(d.get("bound_report", False)),
            nu=_parse_nu(d.get("nu")),
        )

    def to_dict(self) -> dict:
        """Canonical payload; out_dir is excluded so relocating outputs does
        not change the experiment's identity."""
        return {
            "spec": spec_to_dict(self.spec),
            "portfolio": self.portfolio.to_dict(),
            "n": self.n,
            "replications": self.replications,
            "estimators": list(self.estimators),
            "seed": self.seed,
            "rep_offset": self.rep_offset,
            "benchmark_class": self.benchmark_class,
            "constants": self.constants.as_dict(),
            "bound_report": self.bound_report,
            "nu": self.nu,
        }

    def config_hash(self) -> str:
        return dict_hash(self.to_dict())


@dataclass(frozen=True)
class EstimatorSummary:
    kind: str
    mise: float
    se: float
    per_rep: np.ndarray
    per_block_mean: np.ndarray
    per_block_se: np.ndarray

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "mise": self.mise,
            "se": self.se,
            "per_rep": [float(v) for v in self.per_rep],
            "per_block_mean": [float(v) for v in self.per_block_mean],
            "per_block_se": [float(v) for v in self.per_block_se],
        }


@dataclass(frozen=True)
class ExperimentResult:
    config: ExperimentConfig
    schedule: BlockSchedule
    estimates: dict
    oracle_risk: float
    gap: EstimatorSummary | None
    bound_report: BoundReport | None
    benchmark: float | None
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        sch = self.schedule
        return {
            "config": self.config.to_dict(),
            "config_hash": self.config.config_hash(),
            "metadata": self.metadata,
            "schedule": {
                "lengths": [float(v) for v in sch.lengths],
                "thresholds": [float(v) for v in sch.thresholds],
                "boundaries": [float(v) for v in sch.boundaries],
                "next_length": float(sch.next_length),
                "clamped": sch.clamped,
            },
            "oracle_risk": self.oracle_risk,
            "benchmark": self.benchmark,
            "estimates": {k: v.to_dict() for k, v in self.estimates.items()},
            "gap": None if self.gap is None else self.gap.to_dict(),
            "bound_report": None if self.bound_report is None
            else self.bound_report.as_dict(),
        }


def _summarize(kind: str, per_rep: np.ndarray, per_block: np.ndarray) -> EstimatorSummary:
    reps = per_rep.size
    mean = math.fsum(per_rep) / reps
    if reps > 1:
        var = math.fsum((x - mean) ** 2 for x in per_rep) / (reps - 1)
        se = math.sqrt(var / reps)
        block_se = per_block.std(axis=0, ddof=1) / math.sqrt(reps)
    else:
        se = 0.0
        block_se = np.zeros(per_block.shape[1])
    return EstimatorSummary(kind=kind, mise=mean, se=se, per_rep=per_rep,
                            per_block_mean=per_block.mean(axis=0),
                            per_block_se=block_se)


def _versions() -> dict:
    try:
        from importlib.metadata import version
        own = version("blockshrink")
    except Exception:
        own = "unknown"
    import scipy
    return {"blockshrink": own, "numpy": np.__version__,
            "scipy": scipy.__version__, "python": platform.python_version()}


def analytic_oracle_mise(te, lengths, n, total_energy) -> float:
    """Closed-form risk of the ideal-weight estimate: per-block shrinkage
    terms plus the bias of dropping everything past the last block."""
    te = np.asarray(te, dtype=float)
    lengths = np.asarray(lengths, dtype=float)
    noise = lengths / n
    mu = te / (te + noise)
    per_block = noise * mu * (1.0 - mu * te / lengths)
    tail = max(0.0, 0.5 * total_energy - float(te.sum()))
    return (float(per_block.sum()) + tail) / math.pi


def run_experiment(config: ExperimentConfig, threads: int | None = None) -> ExperimentResult:
    """Run the configured Monte Carlo experiment; pure computation, no files."""
    try:
        sched = build_schedule(config.portfolio, config.n)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    spec = config.spec
    te = np.array([cf_block_energy(spec, *sched.block(k))
                   for k in range(1, sched.n_blocks + 1)])
    d = cf_energy(spec)
    if not math.isfinite(d):
        raise ConfigError("spec has no square-integrable density; MISE undefined")
    from .spectral import build_true_cf_table
    table = build_true_cf_table(spec, sched)
    oracle_prof = oracle_weights(spec, sched, te)
    wanted = config.estimators
    want_gap = "ep" in wanted and "stein" in wanted
    reps = config.replications

    def one_rep(r: int):
        x = spec.sample(config.n, _rep_rng(config.seed, config.rep_offset + r))
        stats = block_stats(x, sched)
        out = {}
        profs = {}
        for name in wanted:
            if name == "ep":
                profs[name] = ep_weights(stats)
            elif name == "stein":
                profs[name] = stein_weights(stats)
            else:
                profs[name] = oracle_prof
            mb = plancherel_mise(profs[name], x, spec, stats=stats, table=table,
                                 true_energies=te, total_energy=d)
            out[name] = (mb.mise, mb.per_block)
        if want_gap:
            out["gap"] = stein_ep_gap(profs["ep"], profs["stein"], stats)
        return out

    records = [one_rep(0)]
    if reps > 1:
        workers = threads if threads and threads > 0 else (os.cpu_count() or 1)
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                records.extend(pool.map(one_rep, range(1, reps)))
        else:
            records.extend(one_rep(r) for r in range(1, reps))

    estimates = {}
    for name in wanted:
        per_rep = np.array([rec[name][0] for rec in records])
        per_block = np.stack([rec[name][1] for rec in records])
        if not np.all(np.isfinite(per_rep)):
            bad = int(np.flatnonzero(~np.isfinite(per_rep))[0])
            raise NumericError(f"non-finite {name} risk in replication {bad}")
        estimates[name] = _summarize(name, per_rep, per_block)
    gap = None
    if want_gap:
        gaps = np.array([rec["gap"] for rec in records])
        if not np.all(np.isfinite(gaps)):
            raise NumericError("non-finite soft-vs-hard gap")
        gap = _summarize("gap", gaps, gaps[:, None])

    report = None
    if config.bound_report:
        try:
            report = density_bound_report(spec, sched, config.n, nu=config.nu,
                                          consts=config.constants)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    benchmark = None
    if config.benchmark_class is not None:
        bc = dict(config.benchmark_class)
        kind = bc.pop("kind")
        try:
            benchmark = minimax_benchmark(kind, config.n, **bc)
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc

    oracle = analytic_oracle_mise(te, sched.lengths, config.n, d)
    metadata = {
        "config_hash": config.config_hash(),
        "seed": config.seed,
        "rep_offset": config.rep_offset,
        "replications": reps,
        "n": config.n,
        "n_blocks": sched.n_blocks,
        "span": float(sched.span),
        "estimators": list(wanted),
        "constants": config.constants.as_dict(),
        "versions": _versions(),
    }
    return ExperimentResult(config=config, schedule=sched, estimates=estimates,
                            oracle_risk=oracle, gap=gap, bound_report=report,
                            benchmark=benchmark, metadata=metadata)


# report emission -------------------------------------------------------------

_FORMATS = ("json", "csv", "plotdata")


def _ensure_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    probe = os.path.join(path, ".write-probe")
    with open(probe, "w") as fh:
        fh.write("")
    os.remove(probe)
    return path


def _write_json(result: ExperimentResult, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(result.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_replications_csv(result: ExperimentResult, path: str) -> None:
    names = list(result.estimates)
    cols = [f"{n}_mise" for n in names] + (["gap"] if result.gap is not None else [])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# config={result.config.config_hash()}\n")
        w = csv.writer(fh)
        w.writerow(["rep"] + cols)
        reps = result.config.replications
        for r in range(reps):
            row = [result.config.rep_offset + r]
            row += [repr(float(result.estimates[n].per_rep[r])) for n in names]
            if result.gap is not None:
                row.append(repr(float(result.gap.per_rep[r])))
            w.writerow(row)


def _write_blocks_csv(result: ExperimentResult, path: str) -> None:
    sch = result.schedule
    names = list(result.estimates)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# config={result.config.config_hash()}\n")
        w = csv.writer(fh)
        header = ["k", "length", "threshold", "lower", "upper"]
        for n in names:
            header += [f"{n}_block_mise", f"{n}_block_se"]
        w.writerow(header)
        for k in range(1, sch.n_blocks + 1):
            lo, hi = sch.block(k)
            row = [k, repr(float(sch.lengths[k - 1])),
                   repr(float(sch.thresholds[k - 1])), repr(lo), repr(hi)]
            for n in names:
                s = result.estimates[n]
                row += [repr(float(s.per_block_mean[k - 1])),
                        repr(float(s.per_block_se[k - 1]))]
            w.writerow(row)


def _write_plotdata(results, out_dir: str) -> list:
    ordered = sorted(results, key=lambda r: r.config.n)
    hashes = ",".join(r.config.config_hash() for r in ordered)
    names = []
    for r in ordered:
        for n in r.estimates:
            if n not in names:
                names.append(n)
    paths = []
    for name in names:
        path = os.path.join(out_dir, f"plotdata_{name}.csv")
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(f"# config={hashes}\n")
            w = csv.writer(fh)
            w.writerow(["n", "mise"])
            for r in ordered:
                if name in r.estimates:
                    w.writerow([r.config.n, repr(float(r.estimates[name].mise))])
        paths.append(path)
    return paths


def emit_report(result, fmt: str, out_dir: str | None = None) -> list:
    """Write the result (or a sweep of results) in one of the supported
    formats; returns the list of files written."""
    if fmt not in _FORMATS:
        raise ConfigError(f"unknown report format {fmt!r}; pick one of {_FORMATS}")
    results = list(result) if isinstance(result, (list, tuple)) else [result]
    if not results:
        raise ConfigError("nothing to report")
    out = _ensure_dir(out_dir if out_dir is not None else results[0].config.out_dir)
    written = []
    if fmt == "plotdata":
        return _write_plotdata(results, out)
    many = len(results) > 1
    for i, res in enumerate(results, start=1):
        tag = f"_{i:02d}" if many else ""
        if fmt == "json":
            path = os.path.join(out, f"report{tag}.json")
            _write_json(res, path)
            written.append(path)
        else:
            p1 = os.path.join(out, f"replications{tag}.csv")
            _write_replications_csv(res, p1)
            p2 = os.path.join(out, f"blocks{tag}.csv")
            _write_blocks_csv(res, p2)
            written += [p1, p2]
    return written


def read_sample_file(path: str) -> np.ndarray:
    """One real per line, UTF-8, blank lines and #-comments ignored."""
    vals = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.split("#", 1)[0].strip()
            if not s:
                continue
            try:
                v = float(s)
            except ValueError:
                raise NumericError(
                    f"{path}:{lineno}: {s!r} is not a real number") from None
            if not math.isfinite(v):
                raise NumericError(f"{path}:{lineno}: non-finite value {s!r}")
            vals.append(v)
    if len(vals) <= 3:
        raise ConfigError(f"{path}: need more than 3 observations, found {len(vals)}")
    return np.array(vals)
