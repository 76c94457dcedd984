import math

import numpy as np
import pytest
from scipy import integrate, special

import blockshrink.distributions as D
from blockshrink._gl import adaptive

SQRT_PI = math.sqrt(math.pi)

# closed-form squared cf masses, d = int |h|^2:
#   standard normal        sqrt(pi)
#   standard cauchy        1 / scale
#   geometric-stable b     (2/b) Gamma(1/b) Gamma(2 - 1/b)
#   gamma-variance rho     sqrt(pi) Gamma(2 rho - 1/2) / Gamma(2 rho)
#   triangular span s      2 s / 3
#   uniform width w        2 pi / w
ENERGY_CASES = [
    (D.NormalMixture.standard(), SQRT_PI),
    (D.CauchyMixture.standard(), 1.0),
    (D.Linnik(0.75), (8.0 / 3.0) * math.gamma(4.0 / 3.0) * math.gamma(2.0 / 3.0)),
    (D.VarianceGamma(0.3), SQRT_PI * math.gamma(0.1) / math.gamma(0.6)),
    (D.TriangularCF(1.0), 2.0 / 3.0),
    (D.Uniform(0.0, 1.0), 2.0 * math.pi),
    (D.Uniform(0.0, math.pi), 2.0),
    (D.Uniform(0.0, 2.0), math.pi),
]


@pytest.mark.parametrize("spec,want", ENERGY_CASES,
                         ids=lambda c: getattr(c, "name", None))
def test_cf_energy_closed_forms(spec, want):
    assert D.cf_energy(spec) == pytest.approx(want, rel=1e-10)


def test_cf_at_zero_and_symmetry():
    specs = [s for s, _ in ENERGY_CASES[:6]]
    us = np.linspace(-4.0, 4.0, 17)
    for spec in specs:
        h = spec.cf(us)
        assert spec.cf(0.0) == pytest.approx(1.0, abs=1e-14)
        np.testing.assert_allclose(spec.cf(-us), np.conj(h), atol=1e-13)


@pytest.mark.parametrize("spec", [s for s, _ in ENERGY_CASES[:6]],
                         ids=lambda s: s.name)
def test_pdf_mass(spec):
    bps = sorted(set(spec.density_singularities()) | {-1.0, 0.0, 1.0})
    f = lambda x: float(spec.pdf(x))
    if isinstance(spec, D.TriangularCF):
        # oscillating x^-2 tails: split off the cosine part, which scipy
        # integrates with its oscillatory rule
        s, X = spec.span, 40.0
        mass = integrate.quad(f, -X, X, points=bps, limit=200)[0]
        osc = integrate.quad(lambda x: 1.0 / x ** 2, X, np.inf,
                             weight="cos", wvar=s)[0]
        mass += 2.0 * (1.0 / X - osc) / (math.pi * s)
    else:
        mass = integrate.quad(f, -np.inf, bps[0])[0]
        for a, b in zip(bps[:-1], bps[1:]):
            mass += integrate.quad(f, a, b)[0]
        mass += integrate.quad(f, bps[-1], np.inf)[0]
    assert mass == pytest.approx(1.0, abs=1e-6)
    xs = np.linspace(-8.0, 8.0, 101)
    xs = xs[np.min(np.abs(xs[:, None] - np.array(bps)[None, :]), axis=1) > 1e-9]
    assert np.all(spec.pdf(xs) >= 0.0)


@pytest.mark.parametrize("spec", [
    D.NormalMixture((0.7, 0.3), (0.0, 2.0), (1.0, 0.6)),
    D.CauchyMixture.standard(),
    D.TriangularCF(2.0),
], ids=lambda s: s.name)
def test_pdf_matches_cf_inversion(spec):
    # (2 pi)^-1 int_-U^U h(u) exp(-iux) du reproduces the density; with a
    # compact spectrum the cutoff U = radius is exact, otherwise U = 60
    # leaves a truncation error well under 1e-4 for these fast-decay cfs
    radius = spec.spectrum_radius
    U = radius if radius is not None else 60.0
    pts = [0.3, 1.1, -0.7]
    for x in pts:
        val = adaptive(
            lambda u: np.real(spec.cf(u) * np.exp(-1j * u * x)),
            0.0, U, rtol=1e-9, breakpoints=spec.cf_breakpoints()) / math.pi
        tol = 1e-12 if radius is not None else 1e-4
        assert val == pytest.approx(float(spec.pdf(x)), abs=tol)


def test_linnik_far_series_crossover():
    # the quadrature route and the asymptotic series must agree across the
    # switchover radius
    xs = np.array([28.0, 30.1, 35.0, 50.0, 120.0])
    for beta in (0.6, 0.75, 1.0):
        quad = D._linnik_pdf_quad(beta, xs)
        far = D._linnik_pdf_far(beta, xs)
        np.testing.assert_allclose(far, quad, rtol=1e-9)


def test_linnik_pdf_origin_behaviour():
    # f(0) = pi^-1 int_0^inf du/(1 + u^b): divergent for b <= 1, and the
    # laplace value 1/2 at b = 2
    lin = D.Linnik(0.75)
    assert lin.pdf(1e-6) > lin.pdf(1e-3) > lin.pdf(0.1)
    assert lin.density_singularities() == (0.0,)
    assert float(D.Linnik(2.0).pdf(0.0)) == pytest.approx(0.5, rel=1e-9)
    assert float(D.Linnik(2.0).pdf(1.3)) == pytest.approx(0.5 * math.exp(-1.3), rel=1e-8)


def test_variance_gamma_pdf_bessel_form():
    # cf (1 + u^2)^-rho is a normal variance mixture with a Gamma(rho, 2)
    # mixing law; cross-check the Bessel-form density against the mixture
    # integral directly
    rho = 0.4
    vg = D.VarianceGamma(rho)
    for x in (0.2, 1.0, 3.0):
        def mix(g):
            g = np.asarray(g, dtype=float)
            return (np.exp(-0.5 * x * x / g) / np.sqrt(2.0 * math.pi * g)
                    * g ** (rho - 1.0) * np.exp(-g / 2.0)
                    / (math.gamma(rho) * 2.0 ** rho))
        want = adaptive(mix, 1e-13, 120.0, rtol=1e-10)
        assert float(vg.pdf(x)) == pytest.approx(want, rel=1e-8)


@pytest.mark.parametrize("spec", [
    D.NormalMixture((0.6, 0.4), (-1.0, 1.5), (1.0, 0.5)),
    D.CauchyMixture.standard(),
    D.Linnik(0.8),
    D.VarianceGamma(0.45),
    D.TriangularCF(2.0),
    D.Uniform(-1.0, 2.0),
], ids=lambda s: s.name)
def test_sampler_matches_cf(spec):
    n = 4000
    x = spec.sample(n, np.random.default_rng(42))
    assert x.shape == (n,)
    us = np.array([0.3, 0.9, 1.7, 2.6])
    emp = np.exp(1j * us[:, None] * x[None, :]).mean(axis=1)
    # ecf standard error is about n^-1/2 per coordinate
    assert np.max(np.abs(emp - spec.cf(us))) < 4.0 / math.sqrt(n)


def test_block_energy_additivity_and_value():
    spec = D.NormalMixture.standard()
    # blocks live on u >= 0: int_0^2 e^{-u^2} du = (sqrt(pi)/2) erf(2)
    want = 0.5 * SQRT_PI * special.erf(2.0)
    got = D.cf_block_energy(spec, 0.0, 2.0)
    assert got == pytest.approx(want, rel=1e-10)
    parts = D.cf_block_energy(spec, 0.0, 0.7) + D.cf_block_energy(spec, 0.7, 2.0)
    assert parts == pytest.approx(got, rel=1e-10)
    with pytest.raises(ValueError):
        D.cf_block_energy(spec, 2.0, 1.0)


def test_pairwise_block_overlap_normal_oracle():
    # on [0, 2) for the standard normal:
    #   d1 = sup_g int_B |h(u+g) h(u)| du = sqrt(2 pi) (2 Phi(2) - 1)  at g = 0
    #   d2 = int_B |h|^2 du = sqrt(pi) erf(2)
    spec = D.NormalMixture.standard()
    d1, d2 = D.pairwise_block_overlap(spec, 0.0, 2.0)
    assert d1 == pytest.approx(math.sqrt(2 * math.pi) * (2 * special.ndtr(2.0) - 1), rel=1e-9)
    assert d2 == pytest.approx(SQRT_PI * special.erf(2.0), rel=1e-9)
    assert d2 <= d1 + 1e-12


def test_level_scale_normal_is_sup_density():
    # the level functional min_z (z + L z^-1 int_{f >= z} f^2) is minimized
    # at z = sup f for a unimodal density whose plateau carries no mass
    spec = D.NormalMixture.standard()
    supf = 1.0 / math.sqrt(2 * math.pi)
    for L in (1.0, 4.0, 25.0):
        v = D.level_scale(spec, L)
        assert v == pytest.approx(supf, rel=1e-9)


@pytest.mark.parametrize("spec", [
    D.NormalMixture.standard(),
    D.TriangularCF(1.5),
    D.VarianceGamma(0.4),
], ids=lambda s: s.name)
def test_level_scale_caps(spec):
    d = D.cf_energy(spec)
    for L in (1.0, 9.0):
        v = D.level_scale(spec, L)
        assert 0.0 < v <= 2.0 * min(spec.sup_density(), math.sqrt(d * L)) + 1e-9


def test_level_scale_rejects_bad_length():
    with pytest.raises(ValueError):
        D.level_scale(D.NormalMixture.standard(), 0.0)


def test_sobolev_functional_normal():
    # pi^-1 int_0^inf (1 + u^2) e^{-u^2} du = 3 / (4 sqrt(pi))
    got = D.class_functional(D.NormalMixture.standard(), "sobolev", alpha=1.0)
    assert not got.divergent
    assert got.value == pytest.approx(3.0 / (4.0 * SQRT_PI), rel=1e-10)


def test_analytic_functional_normal():
    # pi^-1 int_0^inf e^{u^2/2} e^{-u^2} du = 1 / sqrt(2 pi)
    got = D.class_functional(D.NormalMixture.standard(), "analytic",
                             rate=2.0, gamma=0.25)
    assert not got.divergent
    assert got.value == pytest.approx(1.0 / math.sqrt(2 * math.pi), rel=1e-10)


def test_sobolev_functional_linnik_closed_form():
    # |h|^2 = (1 + u^b)^-2 on u > 0 gives beta-function integrals
    b = 0.75
    want = ((special.beta(1 / b, 2 - 1 / b)
             + special.beta(1.4 / b, 2 - 1.4 / b)) / b) / math.pi
    got = D.class_functional(D.Linnik(b), "sobolev", alpha=0.2)
    assert got.value == pytest.approx(want, rel=1e-5)
    # 2 alpha + 1 >= 2 b diverges
    far = D.class_functional(D.Linnik(b), "sobolev", alpha=0.3)
    assert far.divergent and far.value == math.inf


def test_sobolev_functional_uniform_closed_form():
    # 2 int_0^inf (1 - cos u) u^{2a-2} du = -2 Gamma(2a - 1) sin(pi a)
    a = 0.2
    want = 1.0 + (-2.0 * special.gamma(2 * a - 1.0) * math.sin(math.pi * a)) / math.pi
    got = D.class_functional(D.Uniform(0.0, 1.0), "sobolev", alpha=a)
    assert got.value == pytest.approx(want, rel=1e-10)
    assert D.class_functional(D.Uniform(0.0, 1.0), "sobolev", alpha=0.6).divergent


def test_bounded_spectrum_membership():
    tri = D.class_functional(D.TriangularCF(2.0), "bounded_spectrum", radius=2.0)
    assert tri.member and not tri.divergent and tri.value == 2.0
    tight = D.class_functional(D.TriangularCF(2.0), "bounded_spectrum", radius=1.5)
    assert not tight.member
    nm = D.class_functional(D.NormalMixture.standard(), "bounded_spectrum", radius=5.0)
    assert nm.divergent and not nm.member and nm.value == math.inf


def test_class_functional_rejects_bad_params():
    spec = D.NormalMixture.standard()
    with pytest.raises(ValueError):
        D.class_functional(spec, "sobolev", alpha=0.0)
    with pytest.raises(ValueError):
        D.class_functional(spec, "analytic", rate=3.0, gamma=1.0)
    with pytest.raises(ValueError):
        D.class_functional(spec, "bounded_spectrum", radius=0.0)
    with pytest.raises(ValueError):
        D.class_functional(spec, "fancy")


def test_sobolev_index_pins():
    # geometric-stable cf has |h|^2 ~ u^{-2b}: index b - 1/2
    assert D.sobolev_index(D.Linnik(0.75)) == pytest.approx(0.25, abs=5e-3)
    # uniform: envelope u^-2, index 1/2
    assert D.sobolev_index(D.Uniform(0.0, 1.0)) == pytest.approx(0.5, abs=5e-3)
    # entire cf never diverges: clamps to the probe ceiling
    assert D.sobolev_index(D.NormalMixture.standard()) == 6.0


def test_constructor_validation():
    with pytest.raises(ValueError):
        D.NormalMixture((0.5, 0.6), (0.0, 1.0), (1.0, 1.0))
    with pytest.raises(ValueError):
        D.NormalMixture((1.0,), (0.0,), (0.0,))
    with pytest.raises(ValueError):
        D.CauchyMixture((1.0,), (0.0,), (-1.0,))
    with pytest.raises(ValueError):
        D.Linnik(2.5)
    with pytest.raises(ValueError):
        D.VarianceGamma(0.0)
    with pytest.raises(ValueError):
        D.TriangularCF(-1.0)
    with pytest.raises(ValueError):
        D.Uniform(1.0, 1.0)
    # direct construction admits the wider mathematical ranges
    assert D.Linnik(0.4).beta == 0.4
    assert D.VarianceGamma(0.7).shape == 0.7


def test_dict_round_trip():
    for spec, _ in ENERGY_CASES[:6]:
        back = D.spec_from_dict(D.spec_to_dict(spec))
        assert back == spec


def test_dict_aliases():
    got = D.spec_from_dict({"family": "PearsonType", "params": {"rho": 0.3}})
    assert got == D.VarianceGamma(0.3)
    got = D.spec_from_dict({"family": "TriangularCF", "params": {"s": 2.0}})
    assert got == D.TriangularCF(2.0)
    got = D.spec_from_dict({"family": "uniform", "params": {"a": 0.0, "b": 1.0}})
    assert got == D.Uniform(0.0, 1.0)
    got = D.spec_from_dict({"family": "NormalMixture", "params":
                            {"weights": [1.0], "means": [0.0], "sds": [1.0]}})
    assert got == D.NormalMixture((1.0,), (0.0,), (1.0,))
    # flat keys next to "family" work too
    got = D.spec_from_dict({"family": "linnik", "beta": 0.8})
    assert got == D.Linnik(0.8)


def test_dict_config_ranges():
    # serialization layer enforces the config windows even though the
    # classes accept more
    with pytest.raises(ValueError, match="must lie in"):
        D.spec_from_dict({"family": "linnik", "params": {"beta": 0.4}})
    with pytest.raises(ValueError, match="must lie in"):
        D.spec_from_dict({"family": "PearsonType", "params": {"rho": 0.7}})
    assert D.spec_from_dict({"family": "linnik", "params": {"beta": 1.0}}) == D.Linnik(1.0)


def test_dict_errors():
    with pytest.raises(ValueError, match="family"):
        D.spec_from_dict({"params": {"beta": 0.8}})
    with pytest.raises(ValueError, match="unknown family"):
        D.spec_from_dict({"family": "zeta"})
    with pytest.raises(ValueError, match="twice"):
        D.spec_from_dict({"family": "linnik", "beta": 0.8, "params": {"beta": 0.9}})
    with pytest.raises(ValueError, match="params"):
        D.spec_from_dict({"family": "linnik", "params": [0.8]})
    with pytest.raises(ValueError, match="bad parameters"):
        D.spec_from_dict({"family": "linnik", "params": {"beta": 0.8, "junk": 1}})
