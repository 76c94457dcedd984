"""Block schedules: length/threshold portfolios and the sample-size cutoff.

A portfolio prescribes block lengths L_k and thresholds t_k for k = 1, 2, ...
The schedule builder keeps the largest K whose total length stays strictly
below the cutoff target n^(1 - 1/ln(n+1)), so that blocks 1..K straddle the
target together with block K+1.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = ["Portfolio", "BlockSchedule", "cutoff_target",
           "build_schedule", "build_integer_schedule"]


def cutoff_target(n) -> float:
    """Largest total frequency span the schedule may cover: n^(1-1/ln(n+1))."""
    if n <= 3:
        raise ValueError(f"need n > 3, got {n}")
    return float(n) ** (1.0 - 1.0 / math.log(n + 1.0))


@dataclass(frozen=True)
class Portfolio:
    """Rule generating (length, threshold) pairs, 1-indexed."""

    kind: str
    params: dict = field(default_factory=dict)

    @classmethod
    def log_cubic(cls) -> "Portfolio":
        """Slowly growing blocks ln^3(k+3) with thresholds 1/ln(ln(k+3)).

        Note the first dozen thresholds exceed 1; downstream sequence-model
        bound evaluators refuse such blocks while the density reports only
        need positive thresholds.
        """
        return cls("log_cubic")

    @classmethod
    def dyadic(cls, initial_length: float = 1.0, threshold: float = 0.5) -> "Portfolio":
        if initial_length <= 0 or threshold <= 0:
            raise ValueError("dyadic portfolio needs positive initial_length and threshold")
        return cls("dyadic", {"initial_length": float(initial_length),
                              "threshold": float(threshold)})

    @classmethod
    def custom(cls, lengths, thresholds) -> "Portfolio":
        lengths = [float(x) for x in lengths]
        thresholds = [float(x) for x in thresholds]
        if not lengths or len(lengths) != len(thresholds):
            raise ValueError("custom portfolio needs equally long, nonempty lists")
        if any(x <= 0 for x in lengths) or any(x <= 0 for x in thresholds):
            raise ValueError("custom portfolio entries must be positive")
        return cls("custom", {"lengths": lengths, "thresholds": thresholds})

    def length(self, k: int) -> float:
        if k < 1:
            raise ValueError("blocks are 1-indexed")
        if self.kind == "log_cubic":
            return math.log(k + 3.0) ** 3
        if self.kind == "dyadic":
            return self.params["initial_length"] * 2.0 ** (k - 1)
        if self.kind == "custom":
            lengths = self.params["lengths"]
            if k > len(lengths):
                raise ValueError(f"custom portfolio has only {len(lengths)} blocks")
            return lengths[k - 1]
        raise ValueError(f"unknown portfolio kind {self.kind!r}")

    def threshold(self, k: int) -> float:
        if k < 1:
            raise ValueError("blocks are 1-indexed")
        if self.kind == "log_cubic":
            return 1.0 / math.log(math.log(k + 3.0))
        if self.kind == "dyadic":
            return self.params["threshold"]
        if self.kind == "custom":
            thresholds = self.params["thresholds"]
            if k > len(thresholds):
                raise ValueError(f"custom portfolio has only {len(thresholds)} blocks")
            return thresholds[k - 1]
        raise ValueError(f"unknown portfolio kind {self.kind!r}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.params}

    @classmethod
    def from_dict(cls, d: dict) -> "Portfolio":
        kind = d.get("kind")
        rest = {k: v for k, v in d.items() if k != "kind"}
        if kind == "log_cubic":
            if rest:
                raise ValueError("log_cubic portfolio takes no parameters")
            return cls.log_cubic()
        if kind == "dyadic":
            return cls.dyadic(**rest)
        if kind == "custom":
            return cls.custom(**rest)
        raise ValueError(f"unknown portfolio kind {kind!r}")


@dataclass(frozen=True)
class BlockSchedule:
    """Materialized blocks for one sample size.

    boundaries has K+1 entries starting at 0; block k covers
    [boundaries[k-1], boundaries[k]).  For integer schedules the boundaries
    are coefficient-index offsets (block k holds indices offset+1 ... ).
    """

    n: float
    target: float
    lengths: np.ndarray
    thresholds: np.ndarray
    boundaries: np.ndarray
    next_length: float
    clamped: bool
    integer: bool
    portfolio: Portfolio

    @property
    def n_blocks(self) -> int:
        return len(self.lengths)

    def block(self, k: int) -> tuple[float, float]:
        if not 1 <= k <= self.n_blocks:
            raise ValueError(f"block index {k} outside 1..{self.n_blocks}")
        return float(self.boundaries[k - 1]), float(self.boundaries[k])

    @property
    def span(self) -> float:
        return float(self.boundaries[-1])

    @property
    def thresholds_above_one(self) -> np.ndarray:
        return self.thresholds > 1.0

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["block", "length", "threshold", "lower", "upper"])
            for k in range(1, self.n_blocks + 1):
                lo, hi = self.block(k)
                w.writerow([k, repr(float(self.lengths[k - 1])),
                            repr(float(self.thresholds[k - 1])), repr(lo), repr(hi)])


def _build(portfolio: Portfolio, n, round_lengths: bool) -> BlockSchedule:
    target = cutoff_target(n)
    lengths: list[float] = []
    total = 0.0
    k = 0
    while True:
        k += 1
        try:
            raw = portfolio.length(k)
        except ValueError:
            raise ValueError(
                "portfolio exhausted before reaching the cutoff target; "
                f"covered {total:.6g} of {target:.6g}") from None
        L = max(1.0, round(raw)) if round_lengths else raw
        if total + L >= target:
            next_length = L
            break
        lengths.append(L)
        total += L
        if k > 10_000_000:
            raise RuntimeError("runaway schedule")
    clamped = False
    if not lengths:
        # the first block alone reaches the target; keep one block anyway
        lengths = [next_length]
        try:
            nxt = portfolio.length(2)
        except ValueError:
            nxt = math.nan
        next_length = max(1.0, round(nxt)) if (round_lengths and not math.isnan(nxt)) else nxt
        clamped = True
    arr = np.asarray(lengths)
    thresholds = np.asarray([portfolio.threshold(j + 1) for j in range(len(lengths))])
    boundaries = np.concatenate(([0.0], np.cumsum(arr)))
    if round_lengths:
        arr = arr.astype(np.int64)
        boundaries = boundaries.astype(np.int64)
    return BlockSchedule(n=float(n), target=target, lengths=arr,
                         thresholds=thresholds, boundaries=boundaries,
                         next_length=float(next_length), clamped=clamped,
                         integer=round_lengths, portfolio=portfolio)


def build_schedule(portfolio: Portfolio, n) -> BlockSchedule:
    """Blocks on the continuous frequency half-line for a sample of size n."""
    return _build(portfolio, n, round_lengths=False)


def build_integer_schedule(portfolio: Portfolio, n) -> BlockSchedule:
    """Integer-length blocks (coefficient indices), lengths max(1, round(L_k))."""
    return _build(portfolio, n, round_lengths=True)
