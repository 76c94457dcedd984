"""Gaussian sequence-model laboratory.

The idealized problem behind the density estimator: observe y_j = theta_j
+ n^{-1/2} xi_j with standard normal noise, estimate theta by blockwise
shrinkage.  Everything the frequency-domain machinery does approximately is
exact here, which makes this the right place for no-free-constant checks of
the oracle identities and the null-block lower bound.

Noise is drawn from a counter-based generator keyed by (seed, replication),
so any subset of replications can be regenerated independently and in any
order; split runs pool exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bounds import DEFAULT_CONSTANTS, UniversalConstants, seq_bound_report
from .schedule import BlockSchedule


def _rep_rng(seed: int, rep: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[int(seed), int(rep)]))


def _int_boundaries(schedule: BlockSchedule) -> np.ndarray:
    if not schedule.integer:
        raise ValueError("sequence-model tools need an integer block schedule")
    return np.asarray(np.rint(schedule.boundaries), dtype=np.int64)


@dataclass(frozen=True)
class SeqExperiment:
    """A simulation setup: true coefficients, a block schedule, a seed.

    theta is a finite list; coordinates beyond it are zero, and coordinates
    beyond the simulated range contribute their energy to risks analytically
    (the estimator is zero there, so no noise needs to be drawn).  The
    simulated range covers the estimated blocks plus one more, the first
    block the estimator always drops.
    """

    theta: tuple
    schedule: BlockSchedule
    seed: int = 0

    def __post_init__(self):
        _int_boundaries(self.schedule)
        th = tuple(float(v) for v in self.theta)
        if th and not np.all(np.isfinite(th)):
            raise ValueError("theta must be a finite list")
        object.__setattr__(self, "theta", th)

    @property
    def n(self) -> float:
        return self.schedule.n

    @property
    def sim_length(self) -> int:
        # one block past the estimated range, when the portfolio has one
        nxt = self.schedule.next_length
        if not math.isfinite(nxt):
            nxt = 0.0
        return int(round(self.schedule.span + nxt))

    def theta_padded(self) -> np.ndarray:
        out = np.zeros(self.sim_length)
        m = min(len(self.theta), self.sim_length)
        out[:m] = self.theta[:m]
        return out

    def extra_tail(self) -> float:
        # energy past the simulated range; enters risks as a constant
        rest = np.asarray(self.theta[self.sim_length:], dtype=float)
        return float(np.dot(rest, rest))

    def tail_energy(self) -> float:
        # signal the estimator never touches: past the last scheduled block
        span = int(round(self.schedule.span))
        rest = np.asarray(self.theta[span:], dtype=float)
        return float(np.dot(rest, rest))

    def block_energies(self) -> np.ndarray:
        # truncate at the span first: reduceat would otherwise fold the
        # padding coordinates into the last block
        b = _int_boundaries(self.schedule)
        th = self.theta_padded()[:int(b[-1])]
        return np.add.reduceat(th * th, b[:-1])


def simulate_seq(exp: SeqExperiment, rep: int = 0, noise_scale=None) -> np.ndarray:
    """One draw of the observation sequence for replication ``rep``.

    ``noise_scale`` overrides the model's n^{-1/2}; zero gives the noiseless
    limit exactly.
    """
    scale = exp.n ** -0.5 if noise_scale is None else float(noise_scale)
    if scale < 0.0 or not np.isfinite(scale):
        raise ValueError("noise scale must be finite and nonnegative")
    y = exp.theta_padded()
    if scale > 0.0:
        y = y + scale * _rep_rng(exp.seed, rep).standard_normal(exp.sim_length)
    return y


def _blockwise_apply(y: np.ndarray, schedule: BlockSchedule, weights: np.ndarray) -> np.ndarray:
    b = _int_boundaries(schedule)
    out = np.zeros(len(y))
    span = int(b[-1])
    if len(y) < span:
        raise ValueError("observation vector shorter than the scheduled span")
    w = np.repeat(weights, np.diff(b))
    out[:span] = w * y[:span]
    return out


def _threshold_weights(y, schedule: BlockSchedule, soft: bool) -> np.ndarray:
    b = _int_boundaries(schedule)
    yy = np.asarray(y, dtype=float)
    if len(yy) < b[-1]:
        raise ValueError("observation vector shorter than the scheduled span")
    energies = np.add.reduceat(yy[:b[-1]] ** 2, b[:-1])
    lengths = schedule.lengths.astype(float)
    noise = lengths / schedule.n
    cut = (1.0 + schedule.thresholds) * noise
    subtract = cut if soft else noise
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.where(energies > 0.0, 1.0 - subtract / energies, 0.0)
    return np.where(energies >= cut, np.maximum(w, 0.0), 0.0)


def ep_seq_estimate(y, schedule: BlockSchedule) -> np.ndarray:
    """Hard-threshold blockwise shrinkage: keep a block only when its energy
    clears (1+t) times the noise level, then shrink by the unbiased factor."""
    return _blockwise_apply(np.asarray(y, dtype=float), schedule,
                            _threshold_weights(y, schedule, soft=False))


def stein_seq_estimate(y, schedule: BlockSchedule) -> np.ndarray:
    """Soft variant: the full cut, threshold margin included, is subtracted
    from the kept blocks' energy."""
    return _blockwise_apply(np.asarray(y, dtype=float), schedule,
                            _threshold_weights(y, schedule, soft=True))


def oracle_seq_estimate(y, theta, schedule: BlockSchedule) -> np.ndarray:
    """Ideal shrinkage using the true block energies; unattainable, used as
    the risk baseline."""
    b = _int_boundaries(schedule)
    th = np.zeros(int(b[-1]))
    src = np.asarray(theta, dtype=float)
    m = min(len(src), len(th))
    th[:m] = src[:m]
    te = np.add.reduceat(th * th, b[:-1])
    mu = te / (te + schedule.lengths / schedule.n)
    return _blockwise_apply(np.asarray(y, dtype=float), schedule, mu)


def modified_estimate(y, theta, schedule: BlockSchedule, nu=None, q=0.25,
                      consts: UniversalConstants = DEFAULT_CONSTANTS) -> np.ndarray:
    """Bound-analysis construct: pass the raw observations through on the
    blocks whose worst-case remainders are too large to control, and the
    true coefficients everywhere else.

    Simulation-only; it needs theta.  The heavy-block set comes from the
    barred remainders (shrinkage weight and indicators replaced by one).
    """
    yy = np.asarray(y, dtype=float)
    b = _int_boundaries(schedule)
    out = np.zeros(len(yy))
    src = np.asarray(theta, dtype=float)
    m = min(len(src), len(out))
    out[:m] = src[:m]

    span = int(b[-1])
    th = np.zeros(span)
    mm = min(len(src), span)
    th[:mm] = src[:mm]
    te = np.add.reduceat(th * th, b[:-1])
    rep = seq_bound_report(te, schedule, schedule.n, nu=nu, q=q, consts=consts)
    for k in rep.sets["upsilon0_modified"]:
        lo, hi = int(b[k - 1]), int(b[k])
        out[lo:hi] = yy[lo:hi]
    return out


@dataclass(frozen=True)
class SeqRisks:
    """Monte Carlo risk of one estimator with its analytic oracle baseline."""

    kind: str
    replications: int
    mc_risk: float
    se: float
    oracle_risk: float
    per_rep: np.ndarray


_KINDS = ("ep", "stein", "oracle", "modified")


def oracle_risk(exp: SeqExperiment) -> float:
    """Exact risk of the ideal shrinkage rule: per-block noise-signal
    harmonic means plus all the energy past the last estimated block."""
    te = exp.block_energies()
    noise = exp.schedule.lengths.astype(float) / exp.n
    mu = te / (te + noise)
    return float((noise * mu).sum()) + exp.tail_energy()


def seq_risks(exp: SeqExperiment, estimator_kind: str = "ep",
              replications: int = 1000, nu=None, q=0.25,
              consts: UniversalConstants = DEFAULT_CONSTANTS) -> SeqRisks:
    """Monte Carlo squared-error risk over seeded replications.

    Replication r uses the generator keyed (seed, r), so partial runs over
    disjoint index ranges reproduce exactly the same per-replication values
    as one big run; pooling the records is exact.
    """
    kind = estimator_kind.lower()
    if kind not in _KINDS:
        raise ValueError(f"estimator kind must be one of {_KINDS}")
    reps = int(replications)
    if reps < 1:
        raise ValueError("need at least one replication")

    th = exp.theta_padded()
    extra = exp.extra_tail()
    risks = np.empty(reps)
    for r in range(reps):
        y = simulate_seq(exp, r)
        if kind == "ep":
            est = ep_seq_estimate(y, exp.schedule)
        elif kind == "stein":
            est = stein_seq_estimate(y, exp.schedule)
        elif kind == "oracle":
            est = oracle_seq_estimate(y, th, exp.schedule)
        else:
            est = modified_estimate(y, th, exp.schedule, nu=nu, q=q, consts=consts)
        diff = est - th
        risks[r] = float(np.dot(diff, diff)) + extra
    mean = math.fsum(risks) / reps
    var = math.fsum((x - mean) ** 2 for x in risks) / max(1, reps - 1)
    return SeqRisks(kind, reps, mean, math.sqrt(var / reps), oracle_risk(exp), risks)


def block_risk_mc(L: int, t: float, n: int, replications: int, seed: int = 0,
                  theta=None, kind: str = "ep") -> tuple[float, float]:
    """Monte Carlo risk of the threshold rule on one isolated block.

    Blocks are independent, so a single block can be studied without
    building a full schedule; this is the harness for the null-block lower
    bound, which has no free constants.
    """
    L = int(L)
    if L < 1:
        raise ValueError("block length must be a positive integer")
    t = float(t)
    n = float(n)
    if t <= 0.0 or n <= 3.0:
        raise ValueError("need t > 0 and n > 3")
    if kind not in ("ep", "stein"):
        raise ValueError("single-block study supports kinds 'ep' and 'stein'")
    th = np.zeros(L) if theta is None else np.asarray(theta, dtype=float)
    if th.shape != (L,):
        raise ValueError("theta must have one value per coordinate of the block")

    noise = L / n
    cut = (1.0 + t) * noise
    subtract = cut if kind == "stein" else noise
    reps = int(replications)
    risks = np.empty(reps)
    scale = n ** -0.5
    for r in range(reps):
        y = th + scale * _rep_rng(seed, r).standard_normal(L)
        e = float(np.dot(y, y))
        w = max(0.0, 1.0 - subtract / e) if e >= cut and e > 0.0 else 0.0
        diff = w * y - th
        risks[r] = float(np.dot(diff, diff))
    mean = math.fsum(risks) / reps
    var = math.fsum((x - mean) ** 2 for x in risks) / max(1, reps - 1)
    return mean, math.sqrt(var / reps)
