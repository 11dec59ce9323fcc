import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from solitongas.errors import ContractViolation, GeometryError, SamplingError
from solitongas.spectral import (EigenvalueDomain, Interpolant, SpectralSample, draw_sample,
                                 evolve_norming, norming_constants, sample_eigenvalues)

finite = st.floats(-3, 3, allow_nan=False)
cplx = st.builds(complex, finite, finite)


def test_domain_area_and_quadrature():
    disk = EigenvalueDomain.disk(1j, 0.5)
    rect = EigenvalueDomain.rectangle(-1, 1, 0.5, 1.5)
    assert disk.area == pytest.approx(np.pi * 0.25, rel=1e-14)
    assert rect.area == pytest.approx(2.0, rel=1e-14)
    for dom in (disk, rect):
        _, wt = dom.quadrature()
        assert abs(wt.sum() - 1) < 1e-12


def test_domain_rejects_real_axis():
    with pytest.raises(GeometryError):
        EigenvalueDomain.disk(0.5j, 0.48)
    with pytest.raises(ContractViolation):
        EigenvalueDomain.disk(1j, -1)
    with pytest.raises(ContractViolation):
        EigenvalueDomain.rectangle(1, -1, 0.5, 1)


def test_disk_quadrature_integrates_polynomials():
    dom = EigenvalueDomain.disk(0.3 + 1.2j, 0.4)
    w, wt = dom.quadrature()
    # mean of |w - a|^2 over a disk is R^2/2; mean of an analytic polynomial is its centre value
    assert np.sum(wt * np.abs(w - dom.center) ** 2) == pytest.approx(0.08, rel=1e-13)
    assert abs(np.sum(wt * w**3) - dom.center**3) < 1e-13


def test_sampling_is_seeded():
    dom = EigenvalueDomain.disk(1j, 0.5)
    a = sample_eigenvalues(dom, 3, 42)
    b = sample_eigenvalues(dom, 3, 42)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, sample_eigenvalues(dom, 3, 43))


def test_disk_sample_mean():
    dom = EigenvalueDomain.disk(1j, 0.5)
    n = 10**5
    lam = sample_eigenvalues(dom, n, 1)
    assert np.all(dom.contains(lam))
    # each coordinate of a uniform point in a disk has variance R^2/4
    sigma = 0.5 / 2
    assert abs(lam.real.mean()) < 3 * sigma / np.sqrt(n)
    assert abs(lam.imag.mean() - 1) < 3 * sigma / np.sqrt(n)


def test_rectangle_symmetry_and_subregion_frequency():
    dom = EigenvalueDomain.rectangle(-1, 1, 0.5, 1.5)
    n = 10**5
    lam = sample_eigenvalues(dom, n, 7)
    frac = np.mean(lam.real > 0)
    assert abs(frac - 0.5) < 3 * 0.5 / np.sqrt(n)
    q = (lam.real > -0.5) & (lam.real < 0) & (lam.imag > 0.6) & (lam.imag < 0.9)
    p = 0.5 * 0.3 / 2.0
    assert abs(q.mean() - p) < 4 * np.sqrt(p * (1 - p) / n)


def test_rejection_cap(monkeypatch):
    import solitongas.spectral as sp

    class Sliver(EigenvalueDomain):
        def contains(self, z):
            return np.zeros(np.shape(z), bool)

    dom = Sliver("disk", center=1j, radius=0.5)
    with pytest.raises(SamplingError):
        sp.sample_eigenvalues(dom, 5, 0)


def test_norming_constants_examples():
    lam = np.array([1j, 2j, 1 + 1j, -1 + 1j])
    assert np.allclose(norming_constants(lam, Interpolant.constant(1)), 0.25)
    assert norming_constants([1j], Interpolant.affine(0, 2))[0] == 2j
    c = norming_constants([1j, 1j], Interpolant.exponential(1, 1))
    assert np.allclose(c, np.exp(1j) / 2)
    with pytest.raises(ContractViolation):
        norming_constants([1j], Interpolant.affine(0, 0))


def test_sample_constants_match_interpolant_exactly():
    dom = EigenvalueDomain.disk(1j, 0.5)
    r = Interpolant.exponential(0.7 - 0.2j, 0.3j)
    s = draw_sample(dom, r, 50, 3)
    assert np.max(np.abs(s.n * s.constants - r(s.eigenvalues))) <= 1e-15 * np.max(np.abs(r(s.eigenvalues)))


def test_sample_validation():
    with pytest.raises(ContractViolation):
        SpectralSample([1j, -1j], [1, 1])
    with pytest.raises(ContractViolation):
        SpectralSample([1j], [0])
    s = SpectralSample([1j], [1])
    with pytest.raises(ValueError):
        s.eigenvalues[0] = 2j


def test_evolve_norming_examples():
    assert evolve_norming(1, 1j, 0) == 1
    assert abs(evolve_norming(1, 1j, np.pi) - 1) < 1e-14
    # lambda^2 = 2i, so 2 i t lambda^2 = -4t: a pure decay factor
    val = evolve_norming(1 + 1j, 1 + 1j, 0.1)
    assert abs(val - (1 + 1j) * np.exp(-0.4)) < 1e-15
    assert abs(abs(val) - np.sqrt(2) * np.exp(-0.4)) < 1e-15
    with pytest.raises(ContractViolation):
        evolve_norming(1, 1j, -1)


@given(cplx, cplx)
def test_evolve_identity_at_zero(c, lam):
    assert evolve_norming(c, lam, 0.0) == c


@settings(max_examples=50)
@given(st.sampled_from(["constant", "affine", "exponential"]), cplx, cplx, cplx)
def test_reflected_interpolant(preset, a, b, w):
    coeffs = (a,) if preset == "constant" else (a, b)
    r = Interpolant(preset, coeffs)
    assert r.reflected(np.conj(w)) == np.conj(r(w))


@settings(max_examples=30)
@given(cplx, cplx, cplx)
def test_interpolant_derivative(a, b, z):
    for r in (Interpolant.affine(a, b), Interpolant.exponential(a, 0.3 * b)):
        h = 1e-6
        fd = (r(z + h) - r(z - h)) / (2 * h)
        assert abs(fd - r.derivative(z)) <= 1e-6 * max(1.0, abs(r.derivative(z)))
