"""Gauss-Legendre panel quadrature helpers.

Shared by the distribution closed-form integrals, the spectral engines and
the bound evaluators.  Panels are kept explicit so callers can align them
with block boundaries or integrand kinks.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=64)
def gl_rule(p: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the p-point Gauss-Legendre rule on [-1, 1]."""
    x, w = np.polynomial.legendre.leggauss(p)
    return x, w


def panel_nodes(edges: np.ndarray, p: int = 16) -> tuple[np.ndarray, np.ndarray]:
    """Flat node/weight arrays of a composite p-point rule over consecutive panels.

    edges is increasing; panel i is [edges[i], edges[i+1]].
    """
    edges = np.asarray(edges, dtype=float)
    s, w = gl_rule(p)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    nodes = mid[:, None] + half[:, None] * s[None, :]
    weights = half[:, None] * w[None, :]
    return nodes.ravel(), weights.ravel()


def integrate_panels(f, edges: np.ndarray, p: int = 16) -> float:
    x, w = panel_nodes(edges, p)
    return float(np.dot(w, f(x)))


def split_edges(a: float, b: float, max_width: float, breakpoints=()) -> np.ndarray:
    """Panel edges covering [a, b] with interior breakpoints forced onto edges."""
    if not b > a:
        raise ValueError(f"empty interval [{a}, {b}]")
    pts = [float(a), float(b)]
    for c in breakpoints:
        if a < c < b:
            pts.append(float(c))
    pts = sorted(set(pts))
    edges = [pts[0]]
    for lo, hi in zip(pts[:-1], pts[1:]):
        m = max(1, int(np.ceil((hi - lo) / max_width - 1e-12)))
        edges.extend(np.linspace(lo, hi, m + 1)[1:].tolist())
    return np.asarray(edges)


def graded_edges(a: float, b: float, toward: float, levels: int = 24, ratio: float = 0.5) -> np.ndarray:
    """Geometrically graded edges of [a, b] refining toward one endpoint.

    Used for integrands with an algebraic singularity at `toward`
    (which must be a or b).
    """
    w = b - a
    steps = ratio ** np.arange(levels, -1, -1.0)
    if toward == a:
        return np.concatenate(([a], a + w * steps))
    if toward == b:
        return np.concatenate((np.sort(b - w * steps), [b]))
    raise ValueError("toward must be an endpoint")


def adaptive(f, a: float, b: float, rtol: float = 1e-10, atol: float = 1e-13,
             p: int = 12, max_depth: int = 52, breakpoints=()) -> float:
    """Adaptive Gauss-Legendre integral of a vectorized real f over [a, b].

    Bisects panels until the p-point and 2p-point estimates agree to
    atol (apportioned by width) plus rtol relative to the local L1 mass,
    so oscillatory integrands with near-zero totals still terminate.
    """
    if b == a:
        return 0.0
    sgn = 1.0
    if b < a:
        a, b = b, a
        sgn = -1.0
    seed = split_edges(a, b, np.inf, breakpoints)
    stack = [(seed[i], seed[i + 1], 0) for i in range(len(seed) - 1)][::-1]
    total = 0.0
    span = b - a
    while stack:
        lo, hi, depth = stack.pop()
        x1, w1 = panel_nodes(np.array([lo, hi]), p)
        x2, w2 = panel_nodes(np.array([lo, hi]), 2 * p)
        f2 = f(x2)
        i1 = float(np.dot(w1, f(x1)))
        i2 = float(np.dot(w2, f2))
        l1 = float(np.dot(w2, np.abs(f2)))
        tol = atol * (hi - lo) / span + rtol * l1
        if abs(i1 - i2) <= tol or depth >= max_depth:
            total += i2
        else:
            mid = 0.5 * (lo + hi)
            stack.append((mid, hi, depth + 1))
            stack.append((lo, mid, depth + 1))
    return sgn * total


@lru_cache(maxsize=32)
def legendre_projection(p: int, deg: int) -> np.ndarray:
    """Matrix turning p Gauss-Legendre node values into Legendre coefficients.

    Row j gives coefficients of P_j: A_j = sum_q M[j, q] f(s_q), exact for
    polynomials of degree <= 2p-1-j.  Shape (deg+1, p).
    """
    s, w = gl_rule(p)
    vand = np.polynomial.legendre.legvander(s, deg)
    return (vand * w[:, None]).T * (np.arange(deg + 1) + 0.5)[:, None]
