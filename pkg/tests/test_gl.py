import math

import numpy as np
import pytest

from blockshrink._gl import (
    adaptive,
    gl_rule,
    graded_edges,
    integrate_panels,
    legendre_projection,
    panel_nodes,
    split_edges,
)


def test_gl_rule_polynomial_exactness():
    # p-point Gauss-Legendre is exact through degree 2p-1
    for p in (2, 5, 16):
        s, w = gl_rule(p)
        for deg in range(2 * p):
            got = np.dot(w, s ** deg)
            want = 0.0 if deg % 2 else 2.0 / (deg + 1)
            assert got == pytest.approx(want, abs=1e-14)


def test_gl_rule_cached_identity():
    a = gl_rule(12)
    b = gl_rule(12)
    assert a[0] is b[0] and a[1] is b[1]


def test_panel_integration_cosine():
    edges = np.linspace(0.0, 3.0, 7)
    got = integrate_panels(np.cos, edges, p=16)
    assert got == pytest.approx(math.sin(3.0), rel=1e-14)
    xs, wq = panel_nodes(edges, p=16)
    assert got == pytest.approx(float(np.dot(wq, np.cos(xs))), rel=1e-15)


def test_split_edges_width_and_breakpoints():
    edges = split_edges(0.0, 10.0, max_width=0.7, breakpoints=(2.5, 7.0))
    assert edges[0] == 0.0 and edges[-1] == 10.0
    assert np.all(np.diff(edges) > 0)
    assert np.max(np.diff(edges)) <= 0.7 + 1e-12
    for b in (2.5, 7.0):
        assert np.min(np.abs(edges - b)) < 1e-12


def test_graded_edges_geometry():
    edges = graded_edges(0.0, 1.0, toward=0.0, levels=10, ratio=0.5)
    assert edges[0] == 0.0 and edges[-1] == 1.0
    widths = np.diff(edges)
    assert np.all(widths > 0)
    # cells shrink geometrically toward the target endpoint
    assert widths[0] < widths[-1]
    np.testing.assert_allclose(widths[2:] / widths[1:-1], 2.0, rtol=1e-9)
    with pytest.raises(ValueError):
        graded_edges(0.0, 1.0, toward=0.5)


def test_adaptive_smooth():
    got = adaptive(lambda u: np.exp(u), 0.0, 2.0, rtol=1e-12)
    assert got == pytest.approx(math.exp(2.0) - 1.0, rel=1e-12)


def test_adaptive_kink_breakpoint():
    # |u - 1| has a kink; declaring it keeps the subdivision shallow
    got = adaptive(lambda u: np.abs(u - 1.0), 0.0, 3.0, rtol=1e-12,
                   breakpoints=(1.0,))
    assert got == pytest.approx(0.5 + 2.0, rel=1e-12)


def test_legendre_projection_reproduces_polynomial():
    proj = legendre_projection(16, 5)
    s, _ = gl_rule(16)
    vals = 3.0 * s ** 5 - s ** 2 + 0.25
    coef = proj @ vals
    # degree-5 input: coefficients above 5 vanish, reconstruction is exact
    from numpy.polynomial import legendre
    recon = legendre.legval(s, coef)
    np.testing.assert_allclose(recon, vals, atol=1e-13)
