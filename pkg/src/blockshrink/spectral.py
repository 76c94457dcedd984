"""Empirical characteristic function and block energy statistics.

Three routes to the block energies ||y||^2_k = integral over B_k of |ecf|^2:

* exact: termwise integration of the pairwise cosine expansion, O(n^2) per
  boundary set; the reference path.
* quad: composite Gauss-Legendre with panel width capped by 2*pi/(sample
  range); an independent cross-check path.
* banded: the production engine.  Points are split at a radius M chosen by a
  cost model; the core (|x| <= M) is integrated by uniform Gauss-Legendre
  panels whose width keeps the oscillation within quadrature reach, the tail
  is handled by the exact pairwise path, and the core-tail cross term is
  integrated by projecting the core cf on Legendre polynomials per panel
  (spherical-Bessel closed forms).  Agrees with exact to ~1e-9 relative at a
  small fraction of the cost for large n.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from ._gl import gl_rule, legendre_projection
from .schedule import BlockSchedule

__all__ = ["BlockStats", "ecf", "block_energy_exact", "block_energies_exact",
           "block_energy_quad", "banded_block_energies", "block_stats",
           "FilonTable", "build_true_cf_table", "true_cf_cross"]

P_CORE = 20        # GL order on core panels
THETA_STAR = 18.0  # max half-width * bandwidth for 1e-10 panel accuracy at p=20
FILON_DEG = 19     # Legendre degree for Filon projections

# relative per-operation costs for the engine's plan search
_C_TRIG = 1.0
_C_CPLX = 0.18
_C_BESS = 4.0


def _clean_sample(sample) -> np.ndarray:
    x = np.ascontiguousarray(np.asarray(sample, dtype=np.float64).ravel())
    if x.size == 0:
        raise ValueError("empty sample")
    if not np.all(np.isfinite(x)):
        raise ValueError("sample contains non-finite values")
    return x


def ecf(sample, u):
    """ecf(u) = n^-1 sum_l exp(i u X_l); accepts scalar or array u."""
    x = _clean_sample(sample)
    us = np.atleast_1d(np.asarray(u, dtype=np.float64))
    out_re = np.empty(us.shape[0])
    out_im = np.empty(us.shape[0])
    _kernels.ecf_sums(x, np.ascontiguousarray(us), out_re, out_im)
    vals = (out_re + 1j * out_im) / x.size
    return vals[0] if np.isscalar(u) or np.asarray(u).ndim == 0 else vals


def _check_block(block) -> tuple[float, float]:
    a, b = float(block[0]), float(block[1])
    if not 0.0 <= a < b:
        raise ValueError(f"need 0 <= a < b, got block [{a}, {b}]")
    return a, b


def block_energy_exact(sample, block) -> float:
    """Pairwise closed form of the block energy, exact up to rounding."""
    a, b = _check_block(block)
    x = _clean_sample(sample)
    n = x.size
    s = np.empty(2)
    _kernels.pair_prefix_sums(x, np.array([a, b]), s)
    return (n * (b - a) + 2.0 * (s[1] - s[0])) / (n * n)


def block_energies_exact(sample, boundaries) -> np.ndarray:
    """Energies of consecutive blocks [b_0,b_1), [b_1,b_2), ... in one pass."""
    x = _clean_sample(sample)
    bd = np.ascontiguousarray(np.asarray(boundaries, dtype=np.float64))
    if bd.size < 2 or np.any(np.diff(bd) <= 0) or bd[0] < 0:
        raise ValueError("boundaries must be increasing and nonnegative")
    n = x.size
    s = np.empty(bd.size)
    _kernels.pair_prefix_sums(x, bd, s)
    return (n * np.diff(bd) + 2.0 * np.diff(s)) / (n * n)


def block_energy_quad(sample, block, quad_nodes: int) -> float:
    """Composite GL quadrature of |ecf|^2 with panel width <= 2*pi/range.

    quad_nodes is the total node budget, split across the panels the width
    cap requires, at least 8 per panel.
    """
    if quad_nodes < 8:
        raise ValueError("quad_nodes must be at least 8")
    a, b = _check_block(block)
    x = _clean_sample(sample)
    n = x.size
    rng = float(x.max() - x.min())
    npan = max(1, math.ceil((b - a) * rng / (2.0 * np.pi)))
    p = max(8, math.ceil(quad_nodes / npan))
    s, wq = gl_rule(p)
    vr = np.empty(npan * p)
    vi = np.empty(npan * p)
    w = (b - a) / npan
    _kernels.panel_cf_values(x, a, w, npan, s, vr, vi)
    sq = vr * vr + vi * vi
    return 0.5 * w * float((sq.reshape(npan, p) @ wq).sum()) / (n * n)


def _banded_plan(x: np.ndarray, boundaries: np.ndarray):
    """Pick the split radius M minimizing the cost model; returns (M, n_tail).

    n_tail = n means the pure exact path wins.
    """
    n = x.size
    nb = boundaries.size
    span = float(boundaries[-1])
    sorted_abs = np.sort(np.abs(x))
    cands = [0]
    c = 1
    while c < min(n, 8192):
        cands.append(c)
        c *= 2
    cands.append(n)
    best = None
    p = P_CORE
    for nt in cands:
        if nt >= n:
            cost = 0.5 * n * n * nb * _C_TRIG
            m = 0.0
        else:
            m = float(sorted_abs[n - nt - 1])
            ncore = n - nt
            panels = sum(max(1, math.ceil((boundaries[k + 1] - boundaries[k])
                                          * m / THETA_STAR))
                         for k in range(nb - 1))
            cost = (ncore * p * _C_TRIG                      # offset table
                    + ncore * panels * (p + 1) * _C_CPLX     # panel sweep
                    + nt * ((nb - 1) * _C_BESS + panels * (p + 2) * _C_CPLX)
                    + 0.5 * nt * nt * nb * _C_TRIG)          # tail pairs
        if best is None or cost < best[0]:
            best = (cost, m, nt)
    return best[1], best[2]


def banded_block_energies(sample, boundaries, return_core=False):
    """Block energies via the core/tail split engine.

    With return_core=True also returns (core panel layout, core cf values)
    for reuse by downstream quadratures.
    """
    x = _clean_sample(sample)
    bd = np.ascontiguousarray(np.asarray(boundaries, dtype=np.float64))
    if bd.size < 2 or np.any(np.diff(bd) <= 0) or bd[0] < 0:
        raise ValueError("boundaries must be increasing and nonnegative")
    n = x.size
    nblocks = bd.size - 1
    m, nt = _banded_plan(x, bd)
    if nt >= n:
        energies = block_energies_exact(x, bd)
        return (energies, None) if return_core else energies

    mask = np.abs(x) <= m
    core = np.ascontiguousarray(x[mask])
    tail = np.ascontiguousarray(x[~mask])
    ncore = core.size
    ntail = tail.size

    lengths = np.diff(bd)
    npan_k = np.array([max(1, math.ceil(lengths[k] * m / THETA_STAR))
                       for k in range(nblocks)], dtype=np.int64)
    w_k = lengths / npan_k
    first = np.concatenate(([0], np.cumsum(npan_k)))
    total_pan = int(first[-1])
    s, wq = gl_rule(P_CORE)

    vr = np.empty(total_pan * P_CORE)
    vi = np.empty(total_pan * P_CORE)
    energies = np.empty(nblocks)
    for k in range(nblocks):
        lo = first[k] * P_CORE
        hi = first[k + 1] * P_CORE
        _kernels.panel_cf_values(core, bd[k], w_k[k], int(npan_k[k]), s,
                                 vr[lo:hi], vi[lo:hi])
        sq = (vr[lo:hi] ** 2 + vi[lo:hi] ** 2).reshape(-1, P_CORE)
        energies[k] = 0.5 * w_k[k] * float((sq @ wq).sum())

    if ntail:
        # core-tail cross via per-panel Legendre projection
        proj = legendre_projection(P_CORE, FILON_DEG)
        vals = (vr + 1j * vi).reshape(total_pan, P_CORE)
        coef = vals @ proj.T
        cross = np.empty(nblocks)
        _kernels.filon_cross_uniform(tail, np.ascontiguousarray(coef.real),
                                     np.ascontiguousarray(coef.imag),
                                     first, 0.5 * w_k, bd[:-1], w_k, cross)
        energies += 2.0 * cross
        st = np.empty(bd.size)
        _kernels.pair_prefix_sums(tail, bd, st)
        energies += ntail * lengths + 2.0 * np.diff(st)
    # core quadrature and tail pair sums each carry their own diagonal terms;
    # the cross term has none
    energies /= n * n
    np.clip(energies, 0.0, lengths, out=energies)
    if return_core:
        layout = {"first": first, "w": w_k, "halfw": 0.5 * w_k,
                  "u0": bd[:-1].copy(), "p": P_CORE, "m": m,
                  "core": core, "tail": tail}
        return energies, (layout, vr, vi)
    return energies


@dataclass
class BlockStats:
    """Per-block empirical energies plus optional truth for simulations."""

    schedule: BlockSchedule
    n: int
    energies: np.ndarray
    method: str
    true_energy: np.ndarray | None = None

    @property
    def theta_hat(self) -> np.ndarray:
        return self.energies / self.schedule.lengths - 1.0 / self.n

    @property
    def theta_true(self) -> np.ndarray | None:
        if self.true_energy is None:
            return None
        return self.true_energy / self.schedule.lengths

    def to_csv(self, path) -> None:
        te = self.true_energy
        tt = self.theta_true
        th = self.theta_hat
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "energy", "theta_hat", "true_energy", "theta_true"])
            for k in range(self.energies.size):
                row = [k + 1, repr(float(self.energies[k])), repr(float(th[k]))]
                if te is not None:
                    row += [repr(float(te[k])), repr(float(tt[k]))]
                else:
                    row += ["", ""]
                w.writerow(row)


def block_stats(sample, schedule: BlockSchedule, spec=None,
                method: str = "auto") -> BlockStats:
    """Energies for every block of the schedule; exact for n <= 2000 by
    default, the banded engine above that."""
    if schedule.integer:
        raise ValueError("frequency-domain statistics need a continuous schedule")
    x = _clean_sample(sample)
    if method == "auto":
        method = "exact" if x.size <= 2000 else "banded"
    bd = np.asarray(schedule.boundaries, dtype=np.float64)
    if method == "exact":
        energies = block_energies_exact(x, bd)
    elif method == "banded":
        energies = banded_block_energies(x, bd)
    else:
        raise ValueError(f"unknown method {method!r}")
    np.clip(energies, 0.0, schedule.lengths.astype(np.float64), out=energies)
    true_energy = None
    if spec is not None:
        from .distributions import cf_block_energy
        true_energy = np.array([cf_block_energy(spec, *schedule.block(k))
                                for k in range(1, schedule.n_blocks + 1)])
    return BlockStats(schedule=schedule, n=x.size, energies=energies,
                      method=method, true_energy=true_energy)


@dataclass(frozen=True)
class FilonTable:
    """Per-panel Legendre expansion of conj(cf) aligned to schedule blocks."""

    centers: np.ndarray
    halfw: np.ndarray
    coef_re: np.ndarray
    coef_im: np.ndarray
    panel_block: np.ndarray
    n_blocks: int
    fit_residual: float


_P_FIT = 30


def _fit_panel(g, a, b, tol, depth, out):
    """Recursively bisect [a,b] until the degree-19 Legendre fit of g meets
    tol in sup norm at the probe nodes; appends (a, b, coeffs, resid)."""
    s, _ = gl_rule(_P_FIT)
    h = 0.5 * (b - a)
    c = 0.5 * (a + b)
    vals = g(c + h * s)
    if np.max(np.abs(vals)) < 1e-15:
        return  # nothing there: prune the panel entirely
    proj = legendre_projection(_P_FIT, FILON_DEG)
    coef = proj @ vals
    from numpy.polynomial.legendre import legvander
    recon = legvander(s, FILON_DEG) @ coef
    resid = float(np.max(np.abs(recon - vals)))
    if resid <= tol or depth >= 48 or (b - a) < 1e-13 * max(1.0, abs(b)):
        out.append((a, b, coef, resid))
        return
    _fit_panel(g, a, c, tol, depth + 1, out)
    _fit_panel(g, c, b, tol, depth + 1, out)


def build_true_cf_table(spec, schedule: BlockSchedule, tol: float = 1e-11,
                        max_oscillation: float = 6.0) -> FilonTable:
    """Panelized conj(cf) for the cross integrals against the ecf.

    Panels split at the cf's breakpoints and are bisected until the Legendre
    fit is within tol; panels where the cf is numerically zero are pruned.
    max_oscillation caps the initial panel width in units of the cf's own
    scale so mixtures with oscillating phases start from a resolving mesh.
    """
    bd = np.asarray(schedule.boundaries, dtype=np.float64)
    breaks = sorted(b for b in spec.cf_breakpoints() if bd[0] < b < bd[-1])
    # initial width from the phase scale: |d/du e^{ium}| ~ max|mean|
    scale = 1.0
    for key in ("means", "locations"):
        v = spec.params().get(key)
        if v:
            scale = max(scale, max(abs(t) for t in v))
    w0 = max_oscillation / scale
    panels = []
    blocks = []
    g = lambda us: np.conj(spec.cf(us))
    for k in range(schedule.n_blocks):
        a, b = bd[k], bd[k + 1]
        pts = [a] + [t for t in breaks if a < t < b] + [b]
        before = len(panels)
        for lo, hi in zip(pts[:-1], pts[1:]):
            nseg = max(1, math.ceil((hi - lo) / w0))
            for i in range(nseg):
                _fit_panel(g, lo + (hi - lo) * i / nseg,
                           lo + (hi - lo) * (i + 1) / nseg, tol, 0, panels)
        blocks.extend([k] * (len(panels) - before))
    if panels:
        centers = np.array([0.5 * (a + b) for a, b, _, _ in panels])
        halfw = np.array([0.5 * (b - a) for a, b, _, _ in panels])
        coef = np.array([c for _, _, c, _ in panels])
        resid = max(r for _, _, _, r in panels)
    else:
        centers = np.empty(0)
        halfw = np.empty(0)
        coef = np.empty((0, FILON_DEG + 1), dtype=complex)
        resid = 0.0
    return FilonTable(centers=centers, halfw=halfw,
                      coef_re=np.ascontiguousarray(coef.real),
                      coef_im=np.ascontiguousarray(coef.imag),
                      panel_block=np.asarray(blocks, dtype=np.int64),
                      n_blocks=schedule.n_blocks, fit_residual=resid)


def true_cf_cross(sample, table: FilonTable) -> np.ndarray:
    """C_k = Re integral over B_k of ecf(u) * conj(cf(u)) du per block."""
    x = _clean_sample(sample)
    out = np.zeros(table.n_blocks)
    if table.centers.size == 0:
        return out
    _kernels.filon_cross_table(x, table.centers, table.halfw, table.coef_re,
                               table.coef_im, table.panel_block,
                               table.n_blocks, out)
    return out / x.size
