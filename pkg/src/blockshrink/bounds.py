"""Closed-form risk bounds and benchmark constants for blockwise shrinkage.

Everything in this module is a pencil-and-paper formula evaluated verbatim:
oracle-inequality remainders for the density estimator, their sequence-model
counterparts, a no-free-constant lower bound for null blocks, second-moment
bounds for block energy estimates, and the sharp minimax benchmark constants
for the three smoothness classes.  Nothing here simulates; the Monte Carlo
side lives in the harness.

The exponential remainder terms involve unspecified universal constants.
``UniversalConstants`` carries the values in use (the defaults are
placeholder 1.0, which keeps the structure testable but not calibrated), and
every report records them so numbers produced under different choices are
never mixed silently.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .distributions import (
    Family,
    cf_block_energy,
    cf_energy,
    level_scale,
    pairwise_block_overlap,
)
from .schedule import BlockSchedule


@dataclass(frozen=True)
class UniversalConstants:
    """The three absolute constants entering the remainder terms.

    c1 and c2 calibrate the moment and tail inequalities behind the
    exponential factor G; C0 calibrates the sequence-model remainder.
    Their true values are not pinned down by the theory, so the defaults
    are documented placeholders equal to one.
    """

    c1: float = 1.0
    c2: float = 1.0
    C0: float = 1.0

    def __post_init__(self):
        for name in ("c1", "c2", "C0"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0.0):
                raise ValueError(f"constant {name} must be a positive finite real")

    def as_dict(self) -> dict:
        return {"c1": float(self.c1), "c2": float(self.c2), "C0": float(self.C0)}


DEFAULT_CONSTANTS = UniversalConstants()


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ValueError(msg)


def _positive(value, name: str) -> float:
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise ValueError(f"{name} must be a positive finite real, got {value!r}") from None
    _require(np.isfinite(v) and v > 0.0, f"{name} must be a positive finite real")
    return v


def _sample_size(n) -> float:
    v = float(n)
    _require(np.isfinite(v) and v > 3.0, "sample size must exceed 3")
    return v


def lambdas(L, t, d, d_star, n, consts: UniversalConstants = DEFAULT_CONSTANTS,
            *, refined: bool = False, d1=None) -> tuple[float, float, float]:
    """Exponents of the three concentration terms for one block.

    L is the block length, t its threshold, d the total squared-cf mass
    of the target, d_star the truncated density level for this length,
    n the sample size.  Returns (lambda1, lambda2, lambda3) exactly as
    printed; lambda1 is a four-way minimum.

    With ``refined=True`` the four candidates inside lambda1 are replaced
    by their unsimplified forms, which use the actual pairwise overlap
    functional ``d1`` instead of its worst-case cap (2Ld)^{1/2}; the
    leading factor is unchanged.  Passing ``d1`` implies ``refined``.
    The refined value is never smaller than the printed one.
    """
    L = _positive(L, "block length")
    t = _positive(t, "threshold")
    d = _positive(d, "cf energy")
    d_star = _positive(d_star, "density level")
    n = _sample_size(n)
    c1, c2 = consts.c1, consts.c2

    taper = (1.0 - min(0.5, t ** 0.25)) ** 2
    edge = (1.0 - (L + 1.0) ** -0.5) ** 2

    if d1 is not None:
        refined = True
    if refined:
        # unsimplified candidates keep the L^{1/2}/(L+1)^{1/2} factor that
        # the printed display rounds up to one
        q = 1.0 - (L + 1.0) ** -0.5
        s = math.sqrt(L) * (1.0 - q)
        if d1 is None:
            d1 = math.sqrt(2.0 * L * d)
        else:
            d1 = _positive(d1, "pairwise overlap")
        e1 = 1.0 / (1.0 + 4.0 * s * t / n * (2.0 / math.sqrt(d) + 3.0 * s * t / (d * n)))
        e2 = c1 * d / (t * (8.0 * d_star + 3.0 * L * math.sqrt((1.0 - q) * t / n)))
        e3 = d * (c1 ** 4 * n / (t ** 4 * L ** 2)) ** (1.0 / 3.0) \
            / (d1 + 20.0 * (1.0 - q) * L * t / n) ** (1.0 / 3.0)
    else:
        e1 = 1.0 / (1.0 + 4.0 * t / n * (2.0 / math.sqrt(d) + 3.0 * t / (d * n)))
        e2 = c1 * d / (t * (8.0 * d_star + 3.0 * math.sqrt(L * t / n)))
        e3 = d * (n * c1 ** 4 / (t ** 4 * L ** 2.5)) ** (1.0 / 3.0) \
            / (math.sqrt(2.0 * d) + 20.0 * t / n) ** (1.0 / 3.0)
    e4 = c1 ** 1.5 * d * math.sqrt(n) / (2.0 * t ** 1.5 * L)

    lam1 = taper * edge / (d * c1 ** 2 * c2) * min(e1, e2, e3, e4)
    lam2 = (n * min(0.25, math.sqrt(t)) / (L * t * c1 ** 2)) * taper * edge \
        / (3.0 / c1 + 2.0 * d / (L * t) + 8.0 / n * (2.0 * math.sqrt(d) + t))
    lam3 = (min(0.25, math.sqrt(t)) / (6.0 * t * math.sqrt(d))) * edge \
        / (1.0 + math.sqrt(t * L ** 1.5 / (d * n)))
    return lam1, lam2, lam3


def g_factor(L, t, d, d_star, n, consts: UniversalConstants = DEFAULT_CONSTANTS,
             *, refined: bool = False, d1=None) -> float:
    """Root of the three-term exponential concentration factor.

    Always in (0, (c1 c2 + 2 c1 + 1)^{1/2}]; with unit constants the
    degenerate no-decay limit is exactly 2.  Assembled in log space so
    large blocks underflow cleanly instead of rounding to garbage.
    """
    lam1, lam2, lam3 = lambdas(L, t, d, d_star, n, consts, refined=refined, d1=d1)
    x = float(t) * float(t) * float(L)
    c1, c2 = consts.c1, consts.c2
    logs = [math.log(c1 * c2) - x * lam1,
            math.log(2.0 * c1) - x * lam2,
            -x * lam3]
    return float(np.exp(0.5 * logsumexp(logs)))


def stirling_factors(L) -> tuple[float, float, float]:
    """Ratio of Gamma(L/2) to its Stirling approximation, with the two
    bracketing factors.

    The ratio always exceeds 1 and tends to 1 as L grows; it is itself a
    valid (tight) choice for both the lower and the upper bracket, so all
    three returned values coincide.  Computed through log-Gamma, which is
    exact cancellation-free territory.
    """
    Lf = float(L)
    _require(np.isfinite(Lf) and Lf >= 1.0 and abs(Lf - round(Lf)) < 1e-9,
             "block length must be a positive integer")
    half = Lf / 2.0
    log_ratio = math.lgamma(half) - 0.5 * math.log(2.0 * math.pi) + half \
        - (half - 0.5) * math.log(half)
    ratio = math.exp(log_ratio)
    return ratio, ratio, ratio


def seq_lower_bound(L, t, n) -> float:
    """Risk floor for a null block in the sequence model.

    No free constants: for a block whose true coefficients are all zero,
    the mean squared error of the hard-threshold rule is at least this
    value, making it a falsifiable Monte Carlo target.  The pi^{-1/2} is
    load-bearing; without it the floor overshoots the exact null risk
    E[(Z - L)^2 / Z; Z >= (1+t)L] / n at every block length.
    """
    t = _positive(t, "threshold")
    n = _sample_size(n)
    _, _, s_dbl = stirling_factors(L)
    Lf = float(L)
    expo = -Lf * (t - math.log1p(t)) / 2.0
    factor = t / (s_dbl * math.sqrt(math.pi) * (1.0 + t))
    return factor * math.sqrt(Lf) * math.exp(expo) / n


def moment_bound(spec: Family, block, n, *, use_caps: bool = False) -> float:
    """Bound on the mean squared error of the normalized block energy
    estimate for one frequency block.

    With ``use_caps=True`` the two overlap functionals are replaced by
    their distribution-free caps (2 L d)^{1/2} and d, which can only
    increase the bound.
    """
    lo, hi = float(block[0]), float(block[1])
    _require(hi > lo >= 0.0, "block must satisfy 0 <= lo < hi")
    n = _sample_size(n)
    L = hi - lo
    te = cf_block_energy(spec, lo, hi)
    theta_level = te / L
    if use_caps:
        d2 = cf_energy(spec)
        _require(np.isfinite(d2), "bound needs a square-integrable characteristic function")
        d1 = math.sqrt(2.0 * L * d2)
    else:
        d1, d2 = pairwise_block_overlap(spec, lo, hi)
    return (2.0 * d1 * theta_level + d2 / n) / (L * n)


def minimax_benchmark(kind: str, n, *, alpha=None, Q=None, rate=None, gamma=None,
                      radius=None, cf_problem: bool = False) -> float:
    """Sharp minimax MISE benchmark for a smoothness class at sample size n.

    kind "sobolev" needs (alpha, Q) and returns the Pinsker constant times
    n^{-2 alpha/(2 alpha + 1)}; "analytic" needs (rate, gamma) and returns
    the near-parametric log benchmark; "bounded_spectrum" needs radius and
    returns the exactly parametric one.  ``cf_problem=True`` rescales for
    the characteristic-function loss, which is 2 pi times the density one.
    """
    n = _sample_size(n)
    k = kind.lower()
    if k == "sobolev":
        a = _positive(alpha, "alpha")
        qq = _positive(Q, "Q")
        expo = 2.0 * a / (2.0 * a + 1.0)
        pinsker = (2.0 * a + 1.0) * (math.pi * (2.0 * a + 1.0) * (a + 1.0) / a) ** -expo \
            * qq ** (1.0 / (2.0 * a + 1.0))
        value = pinsker * n ** -expo
    elif k == "analytic":
        r = _positive(rate, "rate")
        g = _positive(gamma, "gamma")
        if Q is not None:
            _positive(Q, "Q")
        value = (math.log(n) / (2.0 * g)) ** (1.0 / r) / (math.pi * n)
    elif k == "bounded_spectrum":
        s = _positive(radius, "radius")
        value = s / (math.pi * n)
    else:
        raise ValueError(f"unknown smoothness class {kind!r}")
    if cf_problem:
        value *= 2.0 * math.pi
    return value


@dataclass
class BoundReport:
    """Per-block bound evaluations plus their aggregates.

    ``columns`` holds equal-length per-block arrays (always starting with
    the 1-based block index), ``aggregates`` scalar totals, ``sets`` lists
    of block indices.  The constants used are carried along so exported
    numbers stay interpretable.
    """

    kind: str
    n: int
    constants: UniversalConstants
    columns: dict
    aggregates: dict
    sets: dict

    @property
    def n_blocks(self) -> int:
        return len(self.columns["k"])

    def as_dict(self) -> dict:
        blocks = [
            {name: (int(col[i]) if name == "k" else float(col[i]))
             for name, col in self.columns.items()}
            for i in range(self.n_blocks)
        ]
        return {
            "kind": self.kind,
            "n": int(self.n),
            "constants": self.constants.as_dict(),
            "aggregates": {k: float(v) for k, v in self.aggregates.items()},
            "sets": {k: [int(i) for i in v] for k, v in self.sets.items()},
            "blocks": blocks,
        }

    def to_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.as_dict(), fh, indent=2)
            fh.write("\n")

    def to_csv(self, path) -> None:
        names = list(self.columns)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(f"# kind={self.kind} n={int(self.n)}\n")
            cd = self.constants.as_dict()
            fh.write("# " + " ".join(f"{k}={repr(v)}" for k, v in cd.items()) + "\n")
            for k, v in self.aggregates.items():
                fh.write(f"# {k}={repr(float(v))}\n")
            for k, v in self.sets.items():
                fh.write(f"# {k}={','.join(str(int(i)) for i in v)}\n")
            cw = csv.writer(fh)
            cw.writerow(names)
            for i in range(self.n_blocks):
                row = []
                for name in names:
                    x = self.columns[name][i]
                    row.append(str(int(x)) if name == "k" else repr(float(x)))
                cw.writerow(row)


def density_terms(L, t, theta_sq, nu, d, d_star, n,
                  consts: UniversalConstants = DEFAULT_CONSTANTS
                  ) -> tuple[float, float, float, float, float]:
    """Single-block evaluation for the density problem.

    Returns (mu, D_prime, D_dblprime, oracle_risk, rhs_total): the oracle
    shrinkage weight, the multiplicative and additive remainders with their
    indicators decided by the true block energy theta_sq, the exact oracle
    risk, and the combined right-hand side.
    """
    L = _positive(L, "block length")
    t = _positive(t, "threshold")
    d = _positive(d, "cf energy")
    n = _sample_size(n)
    te = float(theta_sq)
    _require(np.isfinite(te) and te >= 0.0, "block energy must be nonnegative")
    v = float(nu)
    _require(0.0 < v < 1.0, "nu must lie in (0, 1)")

    mu = te / (te + L / n)
    G = g_factor(L, t, d, d_star, n, consts)
    slack = 1.0 - mu * te / L
    near_keep = 1.0 if te < 2.0 * L * t / n else 0.0
    d_prime = v * slack + (1.0 + 1.0 / v) * (
        (15.0 * math.sqrt(d) + 3.0 * d * (1.0 + 1.0 / math.sqrt(L)))
        * (1.0 + 1.0 / t) / math.sqrt(L)
        + min(mu * (1.0 + t), 2.0 * t) * near_keep)
    small = 1.0 if te < math.sqrt(L) * t / n else 0.0
    d_dbl = (1.0 + 1.0 / v) * math.sqrt((d + 3.0 * math.sqrt(d) * t) / L) * G * small
    oracle = L * mu * slack / n
    rhs = oracle + L * (mu * d_prime + d_dbl) / n
    return mu, d_prime, d_dbl, oracle, rhs


def seq_terms(L, t, theta_sq, nu, q, n,
              consts: UniversalConstants = DEFAULT_CONSTANTS
              ) -> tuple[float, float, float, float, float]:
    """Single-block remainders in the Gaussian sequence model.

    Returns (mu, D_star, D_dblstar, D_star_bar, D_dblstar_bar); the barred
    pair replaces the shrinkage weight and the indicators by one, which is
    what the modified estimator's inequality uses.  Valid for thresholds
    strictly inside (0, 1) with q in [1/4, min(1, 1/(4t))).
    """
    t = _positive(t, "threshold")
    _require(t <= 1.0, "sequence-model bounds need thresholds in (0, 1]")
    n = _sample_size(n)
    qi = float(q)
    if not (0.25 <= qi < min(1.0, 1.0 / (4.0 * t))):
        raise ValueError("q must lie in [1/4, min(1, 1/(4t))); "
                         "the window is empty once t reaches 1")
    te = float(theta_sq)
    _require(np.isfinite(te) and te >= 0.0, "block energy must be nonnegative")
    v = float(nu)
    _require(0.0 < v < 1.0, "nu must lie in (0, 1)")
    s_star, _, _ = stirling_factors(L)
    L = float(L)
    C0 = consts.C0

    mu = te / (te + L / n)
    base = math.sqrt(C0) / L * (1.0 + 1.0 / ((1.0 - math.sqrt(qi)) ** 2 * t))
    drift = C0 / (L * t * t) ** 2 * (1.0 + 2.0 * t) ** 3
    near_keep = 1.0 if te < 2.0 * L * t / n else 0.0
    d_star = v + (1.0 + 1.0 / v) * (base + mu * drift
                                    + min(mu * (1.0 + t), 2.0 * t) * near_keep)
    d_star_bar = v + (1.0 + 1.0 / v) * (base + drift + min(1.0 + t, 2.0 * t))

    amp = (math.sqrt(L) / s_star
           + 8.0 * ((L * t) ** -0.25 + (L * t * t) ** -0.5)) / L
    decay = math.exp(-L * (qi * t - math.log1p(qi * t)) / 2.0)
    small = 1.0 if te < (1.0 - math.sqrt(qi)) ** 2 * L * t / n else 0.0
    d_dbl = (1.0 + 1.0 / v) * amp * decay * small
    d_dbl_bar = (1.0 + 1.0 / v) * amp * decay
    return mu, d_star, d_dbl, d_star_bar, d_dbl_bar


def _default_nu(lengths: np.ndarray) -> np.ndarray:
    # vanishing free parameter; sharpness of the inequality wants nu -> 0
    return 1.0 / np.log(lengths + 3.0)


def _per_block_param(value, lengths: np.ndarray, name: str, lo: float, hi: float) -> np.ndarray:
    out = np.broadcast_to(np.asarray(value, dtype=float), lengths.shape).copy()
    if not (np.all(np.isfinite(out)) and np.all(out > lo) and np.all(out < hi)):
        raise ValueError(f"{name} must lie in ({lo}, {hi}) for every block")
    return out


def density_bound_report(spec: Family, schedule: BlockSchedule, n, nu=None,
                         consts: UniversalConstants = DEFAULT_CONSTANTS) -> BoundReport:
    """Oracle-inequality evaluation for the density estimator, block by block.

    For each block: the exact oracle risk, the multiplicative remainder
    D_prime, the additive exponential remainder D_dblprime with its G
    factor, and their combined right-hand side.  Indicators are decided by
    the true block energies with the printed strict inequalities.  The
    aggregate MISE bound divides by pi and adds the spectral tail beyond
    the last block.
    """
    _require(not schedule.integer,
             "density bounds need a continuous block schedule")
    n = _sample_size(n)
    lengths = np.asarray(schedule.lengths, dtype=float)
    thresholds = np.asarray(schedule.thresholds, dtype=float)
    K = schedule.n_blocks
    nu_arr = _default_nu(lengths) if nu is None else _per_block_param(nu, lengths, "nu", 0.0, 1.0)

    d = cf_energy(spec)
    _require(np.isfinite(d), "bounds need a square-integrable characteristic function")

    cols = {name: np.zeros(K) for name in
            ("k", "length", "threshold", "nu", "theta_sq", "mu", "d_star",
             "lambda1", "lambda2", "lambda3", "G", "D_prime", "D_dblprime",
             "oracle_risk", "rhs_total")}
    for i in range(K):
        L = lengths[i]
        t = thresholds[i]
        v = nu_arr[i]
        lo, hi = schedule.block(i + 1)
        te = cf_block_energy(spec, lo, hi)
        ds = level_scale(spec, L)
        lam1, lam2, lam3 = lambdas(L, t, d, ds, n, consts)
        G = g_factor(L, t, d, ds, n, consts)
        mu, d_prime, d_dbl, oracle, rhs = density_terms(L, t, te, v, d, ds, n, consts)

        for name, val in (("k", i + 1), ("length", L), ("threshold", t),
                          ("nu", v), ("theta_sq", te), ("mu", mu), ("d_star", ds),
                          ("lambda1", lam1), ("lambda2", lam2), ("lambda3", lam3),
                          ("G", G), ("D_prime", d_prime), ("D_dblprime", d_dbl),
                          ("oracle_risk", oracle), ("rhs_total", rhs)):
            cols[name][i] = val

    tail = max(0.0, 0.5 * d - float(cols["theta_sq"].sum()))
    oracle_sum = float(cols["oracle_risk"].sum())
    blocks_sum = float(cols["rhs_total"].sum())
    aggregates = {
        "d": d,
        "tail_energy": tail,
        "oracle_mise": (oracle_sum + tail) / math.pi,
        "mise_bound": (blocks_sum + tail) / math.pi,
    }
    return BoundReport("density", int(n), consts, cols, aggregates, {})


def seq_bound_report(theta_block_energies, schedule: BlockSchedule, n, nu=None,
                     q=0.25, consts: UniversalConstants = DEFAULT_CONSTANTS) -> BoundReport:
    """Oracle-inequality evaluation in the Gaussian sequence model.

    ``theta_block_energies`` lists the true squared norms per block; entries
    beyond the schedule's last block count as unestimated tail energy.
    Produces the per-block remainders D_star and D_dblstar, the null-block
    lower bound, and three aggregate right-hand sides: the direct one, the
    one minimized over a split index m, and the variant for the modified
    estimator in which the shrinkage factor and the indicators are replaced
    by one.  The hypotheses require every threshold in (0, 1] and the free
    parameter q in [1/4, min(1, 1/(4t))); note the window is empty at t = 1,
    so thresholds must stay strictly below one whenever a block is scored.
    """
    _require(schedule.integer, "sequence-model bounds need an integer block schedule")
    n = _sample_size(n)
    lengths = np.asarray(schedule.lengths, dtype=float)
    thresholds = np.asarray(schedule.thresholds, dtype=float)
    K = schedule.n_blocks
    _require(np.all(thresholds > 0.0) and np.all(thresholds <= 1.0),
             "sequence-model bounds need thresholds in (0, 1]")

    te = np.asarray(theta_block_energies, dtype=float).ravel()
    _require(te.size >= K, "need an energy for every scheduled block")
    _require(np.all(np.isfinite(te)) and np.all(te >= 0.0),
             "block energies must be finite and nonnegative")
    tail = float(te[K:].sum())
    te = te[:K]

    nu_arr = _default_nu(lengths) if nu is None else _per_block_param(nu, lengths, "nu", 0.0, 1.0)
    q_arr = np.broadcast_to(np.asarray(q, dtype=float), lengths.shape).copy()
    q_hi = np.minimum(1.0, 1.0 / (4.0 * thresholds))
    if not (np.all(np.isfinite(q_arr)) and np.all(q_arr >= 0.25) and np.all(q_arr < q_hi)):
        raise ValueError(
            "q must lie in [1/4, min(1, 1/(4t))) for every block; "
            "the window is empty once t reaches 1")

    cols = {name: np.zeros(K) for name in
            ("k", "length", "threshold", "nu", "q", "theta_sq", "mu",
             "D_star", "D_dblstar", "D_star_bar", "D_dblstar_bar",
             "lower_bound", "oracle_term", "remainder")}
    for i in range(K):
        L = lengths[i]
        t = thresholds[i]
        v = nu_arr[i]
        qi = q_arr[i]
        e = te[i]
        mu, d_star, d_dbl, d_star_bar, d_dbl_bar = seq_terms(L, t, e, v, qi, n, consts)

        for name, val in (("k", i + 1), ("length", L), ("threshold", t),
                          ("nu", v), ("q", qi), ("theta_sq", e), ("mu", mu),
                          ("D_star", d_star), ("D_dblstar", d_dbl),
                          ("D_star_bar", d_star_bar), ("D_dblstar_bar", d_dbl_bar),
                          ("lower_bound", seq_lower_bound(L, t, n)),
                          ("oracle_term", L * mu / n),
                          ("remainder", L * (mu * d_star + d_dbl) / n)):
            cols[name][i] = val

    oracle = float(cols["oracle_term"].sum()) + tail
    rhs_direct = oracle + float(cols["remainder"].sum())

    # split-index optimization: everything before block m is written off at
    # full noise cost, everything from m on pays the worst local remainder
    d_star_col = cols["D_star"]
    d_dbl_col = cols["D_dblstar"]
    delta = np.maximum.accumulate(d_star_col[::-1])[::-1]
    s_tail = np.cumsum((lengths * d_dbl_col)[::-1])[::-1]
    prefix = np.concatenate(([0.0], np.cumsum(lengths)[:-1]))
    objective = (1.0 + delta) * oracle + (s_tail + prefix) / n
    best_m = int(np.argmin(objective)) + 1
    heavy = cols["mu"] * d_star_col + d_dbl_col >= 1.0
    upsilon0 = [int(i) + 1 for i in np.nonzero(heavy)[0]]
    rhs_minimized = float(objective.min()) \
        + float((lengths * (cols["mu"] * d_star_col + d_dbl_col))[heavy].sum()) / n

    delta_bar = np.maximum.accumulate(cols["D_star_bar"][::-1])[::-1]
    s_tail_bar = np.cumsum((lengths * cols["D_dblstar_bar"])[::-1])[::-1]
    objective_bar = (1.0 + delta_bar) * oracle + (s_tail_bar + prefix) / n
    best_m_bar = int(np.argmin(objective_bar)) + 1
    heavy_bar = cols["D_star_bar"] + cols["D_dblstar_bar"] >= 1.0
    upsilon0_bar = [int(i) + 1 for i in np.nonzero(heavy_bar)[0]]
    rhs_modified = float(objective_bar.min()) + float(lengths[heavy_bar].sum()) / n

    cols["delta_m"] = delta
    cols["s_m"] = s_tail
    cols["delta_bar_m"] = delta_bar
    cols["s_bar_m"] = s_tail_bar
    aggregates = {
        "oracle_risk": oracle,
        "tail_energy": tail,
        "rhs_direct": rhs_direct,
        "rhs_minimized": rhs_minimized,
        "rhs_modified": rhs_modified,
        "best_m": best_m,
        "best_m_modified": best_m_bar,
    }
    sets = {"upsilon0": upsilon0, "upsilon0_modified": upsilon0_bar}
    return BoundReport("sequence", int(n), consts, cols, aggregates, sets)


def stein_gap_bound(spec: Family, schedule: BlockSchedule, n,
                    consts: UniversalConstants = DEFAULT_CONSTANTS) -> float:
    """Bound on the mean integrated squared distance between the soft and
    hard threshold estimates.

    Two sums over blocks: a shrinkage-scale term active wherever the block
    carries signal, and an exponential term (with the concentration factor
    evaluated at half the threshold) active only on near-empty blocks.
    """
    _require(not schedule.integer, "the gap bound needs a continuous block schedule")
    n = _sample_size(n)
    d = cf_energy(spec)
    _require(np.isfinite(d), "bounds need a square-integrable characteristic function")

    total = 0.0
    for i in range(schedule.n_blocks):
        L = float(schedule.lengths[i])
        t = float(schedule.thresholds[i])
        lo, hi = schedule.block(i + 1)
        te = cf_block_energy(spec, lo, hi)
        mu = te / (te + L / n)
        ds = level_scale(spec, L)

        edge = (1.0 - (L + 1.0) ** -0.5) ** -2
        spread = math.sqrt(d) + d / t * (1.0 + 1.0 / math.sqrt(L))
        kept = 1.0 if te >= 0.5 * L * t / n else 0.0
        total += L * mu * (12.0 / math.sqrt(L) * edge * spread + 2.0 * t * kept)

        small = 1.0 if te < 0.5 * math.sqrt(L) * t / n else 0.0
        if small:
            G = g_factor(L, t / 2.0, d, ds, n, consts)
            total += L * t * t / (1.0 + t) * G * G
    return total / (math.pi * n)
