import csv
import math

import numpy as np
import pytest
from scipy import special

import blockshrink.distributions as D
import blockshrink.spectral as SP
from blockshrink._gl import adaptive
from blockshrink._kernels import spherical_j
from blockshrink.schedule import Portfolio, build_integer_schedule, build_schedule


def test_ecf_basics():
    x = np.array([0.5, -1.0, 2.0])
    assert SP.ecf(x, 0.0) == pytest.approx(1.0)
    us = np.linspace(-3.0, 3.0, 13)
    vals = SP.ecf(x, us)
    np.testing.assert_allclose(SP.ecf(x, -us), np.conj(vals), rtol=1e-14)
    want = np.exp(1j * us * 0.5) + np.exp(-1j * us) + np.exp(1j * us * 2.0)
    np.testing.assert_allclose(vals, want / 3.0, rtol=1e-13)


def test_block_energy_two_point_oracle():
    # sample {0, pi}: |ecf|^2 = (1 + cos(pi u)) / 2, whose integral over
    # [0, 1] is exactly 1/2
    x = np.array([0.0, math.pi])
    assert SP.block_energy_exact(x, (0.0, 1.0)) == pytest.approx(0.5, rel=1e-14)
    assert SP.block_energy_quad(x, (0.0, 1.0), 64) == pytest.approx(0.5, rel=1e-12)
    got = SP.banded_block_energies(x, np.array([0.0, 1.0]))
    assert got[0] == pytest.approx(0.5, rel=1e-10)


def test_block_energies_exact_vs_pair_sum():
    # independent O(n^2) evaluation of int_a^b |ecf|^2 via
    # n^-2 sum_lm (sin(b d) - sin(a d)) / d, d = X_l - X_m
    rng = np.random.default_rng(1)
    x = rng.normal(size=12)
    a, b = 0.7, 2.4
    d = x[:, None] - x[None, :]
    with np.errstate(invalid="ignore", divide="ignore"):
        term = (np.sin(b * d) - np.sin(a * d)) / d
    term[d == 0.0] = b - a
    want = term.sum() / 144.0
    got = SP.block_energy_exact(x, (a, b))
    assert got == pytest.approx(want, rel=1e-12)


def test_block_energies_additive_and_consistent():
    spec = D.NormalMixture.standard()
    x = spec.sample(400, np.random.default_rng(11))
    bd = np.array([0.0, 0.8, 2.0, 4.5, 9.0])
    ee = SP.block_energies_exact(x, bd)
    assert ee.shape == (4,)
    whole = SP.block_energy_exact(x, (0.0, 9.0))
    assert ee.sum() == pytest.approx(whole, rel=1e-12)
    eb = SP.banded_block_energies(x, bd)
    np.testing.assert_allclose(eb, ee, rtol=1e-8)
    for i in range(4):
        q = SP.block_energy_quad(x, (bd[i], bd[i + 1]), 4096)
        assert q == pytest.approx(ee[i], rel=1e-11)


def test_spectral_input_validation():
    with pytest.raises(ValueError):
        SP.block_energy_exact(np.array([]), (0.0, 1.0))
    with pytest.raises(ValueError):
        SP.block_energy_exact(np.array([1.0, np.nan]), (0.0, 1.0))
    with pytest.raises(ValueError):
        SP.block_energy_exact(np.array([1.0]), (2.0, 1.0))
    with pytest.raises(ValueError):
        SP.block_energy_exact(np.array([1.0]), (-1.0, 1.0))
    with pytest.raises(ValueError):
        SP.block_energy_quad(np.array([1.0]), (0.0, 1.0), 4)
    with pytest.raises(ValueError):
        SP.block_energies_exact(np.array([1.0]), np.array([0.0, 2.0, 1.0]))


def test_spherical_bessel_table():
    rng = np.random.default_rng(7)
    zs = np.concatenate([rng.uniform(0.0, 60.0, 40), [0.0, 1e-8, 1e-4, 250.0]])
    orders = np.arange(20)
    for z in zs:
        out = np.empty(20)
        spherical_j(z, 19, out)
        np.testing.assert_allclose(out, special.spherical_jn(orders, z),
                                   atol=1e-12)


def test_block_stats_methods_agree():
    spec = D.NormalMixture.standard()
    n = 500
    x = spec.sample(n, np.random.default_rng(3))
    sched = build_schedule(Portfolio.log_cubic(), n)
    st = SP.block_stats(x, sched, spec=spec)
    assert st.method == "exact" and st.n == n
    assert st.energies.shape == (sched.n_blocks,)
    stb = SP.block_stats(x, sched, method="banded")
    np.testing.assert_allclose(stb.energies, st.energies, rtol=1e-8)
    # energies are clipped into [0, L_k]
    assert np.all(st.energies >= 0.0)
    assert np.all(st.energies <= sched.lengths + 1e-12)
    # truth column matches the direct cf integral
    want0 = D.cf_block_energy(spec, *sched.block(1))
    assert st.true_energy[0] == pytest.approx(want0, rel=1e-10)
    np.testing.assert_allclose(st.theta_hat,
                               st.energies / sched.lengths - 1.0 / n, rtol=1e-14)
    np.testing.assert_allclose(st.theta_true,
                               st.true_energy / sched.lengths, rtol=1e-14)


def test_block_stats_rejects_integer_schedule():
    sched = build_integer_schedule(Portfolio.log_cubic(), 100)
    with pytest.raises(ValueError, match="continuous"):
        SP.block_stats(np.array([0.1, 0.2]), sched)
    with pytest.raises(ValueError, match="method"):
        SP.block_stats(np.array([0.1, 0.2]),
                       build_schedule(Portfolio.log_cubic(), 100),
                       method="magic")


def test_block_stats_csv(tmp_path):
    spec = D.NormalMixture.standard()
    x = spec.sample(100, np.random.default_rng(5))
    sched = build_schedule(Portfolio.log_cubic(), 100)
    st = SP.block_stats(x, sched, spec=spec)
    path = tmp_path / "stats.csv"
    st.to_csv(path)
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == sched.n_blocks
    assert float(rows[0]["energy"]) == pytest.approx(st.energies[0])
    assert float(rows[2]["true_energy"]) == pytest.approx(st.true_energy[2])


def test_true_cf_cross_vs_adaptive():
    # the piecewise Legendre table against per-block adaptive quadrature of
    # Re ecf(u) conj(h(u))
    spec = D.NormalMixture.standard()
    x = spec.sample(200, np.random.default_rng(17))
    sched = build_schedule(Portfolio.log_cubic(), 200)
    table = SP.build_true_cf_table(spec, sched)
    got = SP.true_cf_cross(x, table)
    assert got.shape == (sched.n_blocks,)
    for k in (0, 1, 2, 5, sched.n_blocks - 1):
        a, b = sched.block(k + 1)

        def g(u):
            u = np.asarray(u, dtype=float)
            return np.real(SP.ecf(x, u) * np.conj(spec.cf(u)))

        want = adaptive(g, a, b, rtol=1e-11, atol=1e-16)
        assert got[k] == pytest.approx(want, abs=2e-12), k


def test_true_cf_table_fit_quality():
    spec = D.TriangularCF(2.0)
    sched = build_schedule(Portfolio.log_cubic(), 300)
    table = SP.build_true_cf_table(spec, sched)
    assert table.fit_residual < 1e-9
    assert table.n_blocks == sched.n_blocks
