import math

import numpy as np
import pytest

from diracbari.bc import CanonicalBC, DiracWeights
from diracbari.det0 import (
    Method, SpectrumWindow, delta0, delta0_prime, derive_sequences, limit_point_census,
    res_tol, separation_stats, strip_height, values, weyl_census, zeros, zeros_closed_form,
    zeros_contour, zeros_polynomial,
)
from diracbari.errors import NotRegular, WrongCase

DIRAC = DiracWeights.dirac()
SEP = CanonicalBC(0, 1, 1, 0)
QP = CanonicalBC(2, 0, 0, 0.5)


def match(z1, z2):
    assert [z.index for z in z1] == [z.index for z in z2]
    assert [z.multiplicity for z in z1] == [z.multiplicity for z in z2]
    return float(np.max(np.abs(values(z1) - values(z2))))


class TestDelta0:
    def test_values(self):
        assert delta0(math.pi / 2, SEP, DIRAC) == pytest.approx(2j)
        n = np.arange(-5, 6)
        assert np.allclose(delta0(math.pi * n, SEP, DIRAC), 0, atol=1e-14)
        bc = CanonicalBC(0.3, 1j, 2, -1)
        assert delta0(0, bc, DIRAC) == pytest.approx(bc.d + bc.a + bc.u + 1)

    def test_sine_oracle(self):
        lam = np.linspace(-3, 3, 7) + 0.4j
        assert np.allclose(delta0(lam, SEP, DIRAC), 2j * np.sin(lam))

    def test_derivative_against_difference(self):
        bc = CanonicalBC(0.3 + 0.1j, 1j, 2, -1)
        w = DiracWeights(-0.7, 1.9)
        lam, h = 1.3 - 0.2j, 1e-6
        fd = (delta0(lam + h, bc, w) - delta0(lam - h, bc, w)) / (2 * h)
        assert delta0_prime(lam, bc, w) == pytest.approx(fd, rel=1e-8)


class TestStrip:
    def test_separated_real_zeros(self):
        h = strip_height(SEP, DIRAC)
        zs = zeros_contour(SEP, DIRAC, SpectrumWindow(5))
        assert np.max(np.abs(values(zs).imag)) <= max(h, 1e-12)

    def test_quasi_periodic(self):
        assert strip_height(QP, DIRAC) >= math.log(2)

    def test_scaling(self):
        bc = CanonicalBC(0.4, 1.2, -0.3j, 0.8)
        w = DiracWeights(-0.8, 1.5)
        h0 = strip_height(bc, w)
        for s in (0.5, 1.0, 2.0):
            scaled = CanonicalBC(*(math.exp(s) * np.array(bc.coefficients())))
            assert strip_height(scaled, w) <= h0 + 2 * s / min(abs(w.b1), w.b2) + 1e-6

    def test_certificate(self):
        bc = CanonicalBC(3, 0.2, 1.5, 0.5)
        w = DiracWeights(-1.3, 0.7)
        h = strip_height(bc, w)
        x = np.linspace(-30, 30, 2001)
        for y in (h, -h, 1.5 * h, -1.5 * h):
            assert np.min(np.abs(delta0(x + 1j * y, bc, w))) > 0

    def test_not_regular(self):
        with pytest.raises(NotRegular):
            strip_height(CanonicalBC(0, 0, 0, 1), DIRAC)


class TestClosedForm:
    def test_golden(self):
        zs = zeros_closed_form(QP, DIRAC, SpectrumWindow(4))
        v = values(zs)
        assert np.any(np.abs(v - (-math.pi - 1j * math.log(2))) < 1e-14)
        assert np.any(np.abs(v - (math.pi + 1j * math.log(2))) < 1e-14)
        assert np.allclose(np.abs(v.imag), math.log(2), atol=1e-14)

    def test_periodic_rational(self):
        w = DiracWeights(-1.0, 2.0)
        zs = zeros_closed_form(CanonicalBC(1, 0, 0, 1), w, SpectrumWindow(6))
        v = values(zs)
        assert np.allclose(v.imag, 0)
        # branch 1 gives odd multiples of pi, branch 2 odd multiples of pi/2
        k = v.real / (math.pi / 2)
        assert np.allclose(k, np.round(k), atol=1e-12)
        k = np.round(k).astype(int)
        assert np.all((k % 2 == 1) | (k % 4 == 2))

    def test_wrong_case(self):
        with pytest.raises(WrongCase):
            zeros_closed_form(SEP, DIRAC, SpectrumWindow(3))

    def test_coinciding_progressions(self):
        zs = zeros_closed_form(CanonicalBC(1, 0, 0, 1), DIRAC, SpectrumWindow(3))
        assert all(z.multiplicity == 2 for z in zs)


class TestPolynomial:
    def test_dirac_separated(self):
        zs = zeros_polynomial(SEP, DIRAC, SpectrumWindow(5))
        assert np.allclose(values(zs), math.pi * np.arange(-5, 6), atol=1e-12)

    def test_antiperiodic_simple(self):
        zs = zeros_polynomial(CanonicalBC(1, 0, 0, 1), DiracWeights.from_rational(1, 2),
                              SpectrumWindow(8))
        assert all(z.multiplicity == 1 for z in zs)

    def test_double_root(self):
        # n1 = n2 = 1, a = 0: (-d)^2 = 4(-bc)
        bc = CanonicalBC(0, 1, -1, 2)
        zs = zeros_polynomial(bc, DIRAC, SpectrumWindow(4))
        assert all(z.multiplicity == 2 for z in zs)
        assert max(z.residual for z in zs) <= res_tol(bc)

    def test_needs_rationality(self):
        with pytest.raises(WrongCase):
            zeros_polynomial(SEP, DiracWeights(-1.0, math.sqrt(2)), SpectrumWindow(3))


class TestContour:
    def test_sine(self):
        zs = zeros_contour(SEP, DIRAC, SpectrumWindow(re_range=(-10, 10)))
        assert len(zs) == 7
        assert np.allclose(values(zs), math.pi * np.arange(-3, 4), atol=1e-12)
        assert all(z.multiplicity == 1 and z.method is Method.CONTOUR for z in zs)

    def test_against_closed_form(self):
        assert match(zeros_contour(QP, DIRAC, SpectrumWindow(12)),
                     zeros_closed_form(QP, DIRAC, SpectrumWindow(12))) < 1e-10

    @pytest.mark.parametrize("coef,nn", [
        ((1, 0, 0, 1), (1, 2)), ((0.3, 1, 0.7j, 0.2), (1, 2)), ((0, 1, 1, 3), (2, 3)),
        ((1, 0, 0, 1), (1, 1)), ((0, 1, -1, 2), (1, 1))])
    def test_against_polynomial(self, coef, nn):
        bc = CanonicalBC(*coef)
        w = DiracWeights.from_rational(*nn, 0.7)
        assert match(zeros_contour(bc, w, SpectrumWindow(10)),
                     zeros_polynomial(bc, w, SpectrumWindow(10))) < 1e-8

    def test_residual_and_strip(self):
        bc = CanonicalBC(0.5 - 0.2j, 1.3, 0.4j, -2.0)
        w = DiracWeights(-1.0, math.sqrt(3))
        h = strip_height(bc, w)
        zs = zeros_contour(bc, w, SpectrumWindow(10))
        assert all(z.residual <= res_tol(bc) for z in zs)
        assert np.all(np.abs(values(zs).imag) <= h + 1e-12)

    def test_density(self):
        bc = CanonicalBC(0.5 - 0.2j, 1.3, 0.4j, -2.0)
        w = DiracWeights(-1.0, math.sqrt(3))
        R = 40.0
        zs = zeros_contour(bc, w, SpectrumWindow(re_range=(-R, R)))
        count = sum(z.multiplicity for z in zs)
        d = separation_stats(zs).incompressibility_d
        assert abs(count - 2 * R * (w.b2 - w.b1) / (2 * math.pi)) <= d + 2

    def test_conjugate_symmetry_real_coefficients(self):
        # real coefficients: l -> -conj(l) maps zeros to zeros
        bc = CanonicalBC(0.6, 1.1, -0.4, 1.7)
        w = DiracWeights(-1.0, math.sqrt(2))
        v = values(zeros_contour(bc, w, SpectrumWindow(re_range=(-20, 20))))
        mirrored = -np.conj(v)
        assert max(np.min(np.abs(v - m)) for m in mirrored) < 1e-9

    def test_dispatch(self):
        assert zeros(QP, DIRAC, SpectrumWindow(2))[0].method is Method.CLOSED_FORM
        assert zeros(SEP, DIRAC, SpectrumWindow(2))[0].method is Method.POLYNOMIAL
        w = DiracWeights(-1.0, math.sqrt(2))
        assert zeros(SEP, w, SpectrumWindow(2))[0].method is Method.CONTOUR


class TestSequences:
    def test_real_zero_unimodular(self):
        s = derive_sequences(zeros(SEP, DIRAC, SpectrumWindow(4)), SEP, DIRAC)
        assert np.allclose(np.abs(s.e1), 1) and np.allclose(np.abs(s.e2), 1)
        assert np.allclose(s.z, 1)

    def test_branch_one_zero_z(self):
        zs = zeros_closed_form(QP, DIRAC, SpectrumWindow(4))
        s = derive_sequences(zs, QP, DIRAC)
        branch1 = np.abs(1 + QP.a * s.e1) < 1e-12
        assert branch1.any()
        assert np.allclose(s.z[branch1], 0, atol=1e-12)

    def test_factorised_identity(self):
        bc = CanonicalBC(0.5 - 0.2j, 1.3, 0.4j, -2.0)
        w = DiracWeights(-1.0, math.sqrt(3))
        zs = zeros_contour(bc, w, SpectrumWindow(6))
        s = derive_sequences(zs, bc, w)
        lhs = (1 + bc.a * s.e1) * (1 + bc.d * s.e2)
        assert np.allclose(lhs, bc.b * bc.c * s.e1 * s.e2, atol=1e-8)


class TestSeparation:
    def test_uniform(self):
        st = separation_stats(zeros(SEP, DIRAC, SpectrumWindow(8)))
        assert st.min_gap == pytest.approx(math.pi)
        assert st.incompressibility_d == 1
        assert st.is_asymptotically_separated

    def test_double(self):
        st = separation_stats(zeros(CanonicalBC(1, 0, 0, 1), DIRAC, SpectrumWindow(4)))
        assert st.min_gap == 0 and not st.is_asymptotically_separated

    def test_interlaced_irrational(self):
        w = DiracWeights(-1.0, math.sqrt(2))
        zs = zeros_closed_form(CanonicalBC(1, 0, 0, 1), w, SpectrumWindow(30))
        st = separation_stats(zs, sep_tol=1e-3)
        assert st.is_asymptotically_separated == (st.min_gap > 1e-3)


class TestCensus:
    def test_constant(self):
        assert limit_point_census(np.ones(20), 0.1) == 1

    def test_roots_of_unity(self):
        seq = np.exp(1j * math.pi * np.arange(64) / 4)
        assert limit_point_census(seq, 0.3) == 8

    def test_monotone_in_eps(self):
        rng = np.random.default_rng(0)
        seq = rng.normal(size=200) + 1j * rng.normal(size=200)
        counts = [limit_point_census(seq, e) for e in np.geomspace(0.01, 3, 40)]
        assert all(x >= y for x, y in zip(counts, counts[1:]))

    def test_grows_with_window_irrational(self):
        w = DiracWeights(-1.0, math.sqrt(2))
        bc = CanonicalBC(0.5, 1, 0.3, 0.2)
        small = zeros(bc, w, SpectrumWindow(32))
        large = zeros(bc, w, SpectrumWindow(128))
        c_small = limit_point_census(derive_sequences(small, bc, w).e1, 0.05, [z.index for z in small])
        c_large = limit_point_census(derive_sequences(large, bc, w).e1, 0.05, [z.index for z in large])
        assert c_large > c_small

    def test_weyl_examples(self):
        assert weyl_census(0.5, 2, [(0, 0.6)]) == [5]
        M = 10_000
        (c,) = weyl_census(math.sqrt(2), M, [(0, 0.5)])
        assert abs(c / (2 * M) - 0.5) <= 0.02
        assert weyl_census(math.sqrt(3), 50, [(0, 1)]) == [101]

    def test_weyl_additive(self):
        a, b = weyl_census(math.sqrt(5), 500, [(0, 0.3), (0.30000001, 1)])
        assert a + b == 1001
