import math

import numpy as np
import pytest
from scipy.linalg import expm

from diracbari.bc import CanonicalBC, DiracWeights
from diracbari.det0 import SpectrumWindow, delta0, values, zeros
from diracbari.errors import NotAnEigenvalue, StepUnderflow
from diracbari.perturbed import (
    Potential, adjoint_eigenfunction, boundary_matrix, choose_steps, delta_q,
    delta_q_expanded, eigenfunction, fundamental_matrix, grid_size_for, l2_inner,
    perturbed_zeros,
)

DIRAC = DiracWeights.dirac()
SEP = CanonicalBC(0, 1, 1, 0)


def smooth_q():
    return Potential.from_callables(lambda x: 0.7 * np.cos(3 * x) + 0.2j, lambda x: 0.4 * x)


def random_sampled(rng, m=65):
    x = np.linspace(0, 1, m)
    q12 = rng.normal(size=m) + 1j * rng.normal(size=m)
    q21 = rng.normal(size=m) + 1j * rng.normal(size=m)
    return Potential.sampled(x, q12, q21)


def free_matrix(lam, w):
    return np.diag([np.exp(1j * w.b1 * lam), np.exp(1j * w.b2 * lam)])


class TestPotential:
    def test_sampled_validation(self):
        with pytest.raises(ValueError):
            Potential.sampled([0, 0.5], [1, 2], [1, 2])
        with pytest.raises(ValueError):
            Potential.sampled([0], [1], [1])

    def test_interpolation(self):
        q = Potential.sampled([0, 0.5, 1], [0, 1, 0], [2j, 2j, 2j])
        q12, q21 = q(np.array([0.25, 0.75]))
        assert np.allclose(q12, 0.5) and np.allclose(q21, 2j)

    def test_adjoint(self):
        q = smooth_q().adjoint()
        x = np.linspace(0, 1, 5)
        q12, q21 = q(x)
        assert np.allclose(q12, 0.4 * x)
        assert np.allclose(q21, 0.7 * np.cos(3 * x) - 0.2j)


class TestFundamentalMatrix:
    @pytest.mark.parametrize("lam", [0.0, 2.5 - 0.4j, 17 + 1j])
    def test_free(self, lam):
        w = DiracWeights(-0.7, 1.3)
        zero_callable = Potential.from_callables(lambda x: 0 * x, lambda x: 0 * x)
        for q in (Potential.zero(), zero_callable):
            fm = fundamental_matrix(q, w, lam, 33)
            assert np.allclose(fm.phi_at_1, free_matrix(lam, w), atol=1e-10)
            assert np.array_equal(fm.values[0], np.eye(2))

    @pytest.mark.parametrize("lam", [0.0, 1.7 - 0.3j])
    def test_constant_potential_expm(self, lam):
        g = 0.8
        fm = fundamental_matrix(Potential.constant(g, g), DIRAC, lam, 17)
        B = np.diag([-1.0, 1.0])
        Q = np.array([[0, g], [g, 0]])
        assert np.allclose(fm.phi_at_1, expm(1j * B @ (lam * np.eye(2) - Q)), atol=1e-10)

    def test_liouville(self):
        rng = np.random.default_rng(3)
        w = DiracWeights(-1.2, 0.8)
        for lam in (0.3 + 0.1j, -6.0 + 0.5j, 12.0):
            fm = fundamental_matrix(random_sampled(rng), w, lam, 65)
            dets = np.linalg.det(fm.values)
            expected = np.exp(1j * (w.b1 + w.b2) * lam * fm.grid)
            assert np.allclose(dets, expected, rtol=1e-9, atol=1e-9)

    def test_grid_refinement(self):
        q, lam = smooth_q(), 5.0 - 0.2j
        a = fundamental_matrix(q, DIRAC, lam, 65).phi_at_1
        b = fundamental_matrix(q, DIRAC, lam, 129).phi_at_1
        assert np.max(np.abs(a - b)) <= 16 * 1e-10 * max(1, np.max(np.abs(b)))

    def test_step_underflow(self, monkeypatch):
        import diracbari.perturbed as mod
        monkeypatch.setattr(mod, "MAX_STEPS", 64)
        with pytest.raises(StepUnderflow):
            choose_steps(smooth_q(), DIRAC, 40.0)


class TestDeltaQ:
    def test_zero_potential_matches_delta0(self):
        bc = CanonicalBC(0.3 - 0.2j, 1.1, 0.5j, -0.7)
        w = DiracWeights(-1.0, math.sqrt(2))
        lam = np.linspace(-10, 10, 9) + 0.3j
        zero_callable = Potential.from_callables(lambda x: 0 * x, lambda x: 0 * x)
        for q in (Potential.zero(), zero_callable):
            assert np.allclose(delta_q(lam, bc, w, q), delta0(lam, bc, w), atol=1e-9)

    def test_example(self):
        assert delta_q(math.pi / 2, SEP, DIRAC, Potential.zero()) == pytest.approx(2j)

    def test_sign_of_b_phi21(self):
        # expansion with -b phi21 matches the determinant, +b phi21 does not
        bc = CanonicalBC(0.3, 1.4, 0.5j, 0.2)
        q = smooth_q()
        lam = 2.0 - 0.1j
        phi1 = fundamental_matrix(q, DIRAC, lam, 65).phi_at_1
        direct = np.linalg.det(boundary_matrix(bc.rows(), phi1))
        assert delta_q_expanded(phi1, bc, DIRAC, lam) == pytest.approx(direct, abs=1e-12)
        plus = delta_q_expanded(phi1, bc, DIRAC, lam) + 2 * bc.b * phi1[1, 0]
        assert abs(plus - direct) > 1e-3

    def test_conjugation_real_coefficients(self):
        bc = CanonicalBC(0.4, 1.2, -0.3, 0.9)
        lam = 1.3 + 0.2j
        lhs = np.conj(delta_q(np.conj(lam), bc, DIRAC, Potential.zero()))
        assert lhs == pytest.approx(delta0(-lam, bc, DIRAC))


class TestPerturbedZeros:
    def test_zero_potential(self):
        bc = CanonicalBC(0.3, 1, 0.5j, 0.2)
        sp = perturbed_zeros(bc, DIRAC, Potential.zero(), SpectrumWindow(6))
        ref = zeros(bc, DIRAC, SpectrumWindow(6))
        assert np.max(np.abs(values(sp.zeros) - values(ref))) < 1e-8
        assert not sp.failures

    def test_drift_decreases(self):
        sp = perturbed_zeros(SEP, DIRAC, Potential.constant(0.5, 0.5), SpectrumWindow(24))
        idx = np.array([z.index for z in sp.zeros])
        d = sp.drift
        inner = np.median(d[(np.abs(idx) >= 1) & (np.abs(idx) <= 8)])
        outer = np.median(d[np.abs(idx) >= 17])
        assert outer < inner

    def test_constant_potential_exact(self):
        # (0,1,1,0) with q12 = q21 = g: lam^2 = (pi n)^2 + g^2
        g = 0.5
        sp = perturbed_zeros(SEP, DIRAC, Potential.constant(g, g), SpectrumWindow(6))
        for z in sp.zeros:
            if z.index == 0:
                assert abs(z.value) == pytest.approx(g, abs=1e-9)
            else:
                assert abs(z.value) == pytest.approx(math.hypot(math.pi * z.index, g), abs=1e-9)

    def test_hermitian_real_spectrum(self):
        q = Potential.from_callables(lambda x: 0.6 * np.exp(2j * x), lambda x: 0.6 * np.exp(-2j * x))
        bc = CanonicalBC(0, 1, np.exp(0.4j), 0)
        sp = perturbed_zeros(bc, DIRAC, q, SpectrumWindow(10))
        assert np.max(np.abs(values(sp.zeros).imag)) <= 1e-8


class TestEigenfunction:
    def test_quasi_periodic_branch(self):
        bc = CanonicalBC(2, 0, 0, 0.5)
        lam = -math.pi - 1j * math.log(2)
        ef = eigenfunction(lam, bc, DIRAC, Potential.zero(), 257)
        expected = np.exp(1j * DIRAC.b1 * lam * ef.grid)
        ratio = ef.f[:, 0] / expected
        assert np.allclose(ratio, ratio[0]) and np.allclose(ef.f[:, 1], 0, atol=1e-12)

    def test_b_nonzero_formula(self):
        bc = CanonicalBC(0.3, 1.2, 0.5j, 0.2)
        lam = zeros(bc, DIRAC, SpectrumWindow(3))[4].value
        ef = eigenfunction(lam, bc, DIRAC, Potential.zero(), 257)
        x = ef.grid
        f1 = bc.b * np.exp(1j * DIRAC.b1 * lam * x)
        f2 = -(1 + bc.a * np.exp(1j * DIRAC.b1 * lam)) * np.exp(1j * DIRAC.b2 * lam * x)
        ratio = ef.f[:, 0] / f1
        assert np.allclose(ratio, ratio[0])
        assert np.allclose(ef.f[:, 1], ratio[0] * f2)

    def test_normalisation_and_phase(self):
        bc = CanonicalBC(0.3, 1, 0.5j, 0.2)
        sp = perturbed_zeros(bc, DIRAC, smooth_q(), SpectrumWindow(3))
        for z in sp.zeros:
            ef = eigenfunction(z.value, bc, DIRAC, smooth_q(), 513)
            assert l2_inner(ef.f, ef.f, ef.grid).real == pytest.approx(1.0)
            first = ef.f[0, 0] if abs(ef.f[0, 0]) > 1e-6 else ef.f[0, 1]
            assert abs(first.imag) < 1e-12 and first.real > 0
            assert ef.bc_residual <= 1e-8

    def test_not_an_eigenvalue(self):
        with pytest.raises(NotAnEigenvalue):
            eigenfunction(1.0, SEP, DIRAC, Potential.zero(), 65)

    def test_degenerate_flag(self):
        # antiperiodic Dirac: double eigenvalue pi with two eigenfunctions
        ef = eigenfunction(math.pi, CanonicalBC(1, 0, 0, 1), DIRAC, Potential.zero(), 65)
        assert ef.degenerate

    def test_adjoint_b_nonzero(self):
        bc = CanonicalBC(0.3, 1.2, 0.5j, 0.2)
        lam = zeros(bc, DIRAC, SpectrumWindow(3))[2].value
        g = adjoint_eigenfunction(lam, bc, DIRAC, Potential.zero(), 257)
        x = g.grid
        e2 = np.exp(-1j * DIRAC.b2 * lam)
        g1 = np.conj((1 + bc.d * e2) * np.exp(-1j * DIRAC.b1 * lam * x))
        g2 = np.conj(-DIRAC.beta * bc.b * np.exp(-1j * DIRAC.b2 * lam * x))
        ratio = g.f[:, 0] / g1
        assert np.allclose(ratio, ratio[0]) and np.allclose(g.f[:, 1], ratio[0] * g2)

    def test_self_adjoint_hermitian(self):
        q = Potential.from_callables(lambda x: 0.6 * np.exp(2j * x), lambda x: 0.6 * np.exp(-2j * x))
        sp = perturbed_zeros(SEP, DIRAC, q, SpectrumWindow(2))
        for z in sp.zeros:
            lam = z.value.real
            f = eigenfunction(lam, SEP, DIRAC, q, 257)
            g = adjoint_eigenfunction(lam, SEP, DIRAC, q, 257)
            assert abs(l2_inner(f.f, g.f, f.grid)) == pytest.approx(1.0, abs=1e-8)

    def test_biorthogonality(self):
        bc = CanonicalBC(0.3, 1, 0.5j, 0.2)
        q = smooth_q()
        lams = values(perturbed_zeros(bc, DIRAC, q, SpectrumWindow(4)).zeros)
        m = grid_size_for(lams, DIRAC, q)
        F = [eigenfunction(l, bc, DIRAC, q, m) for l in lams]
        G = [adjoint_eigenfunction(l, bc, DIRAC, q, m) for l in lams]
        x = F[0].grid
        M = np.array([[l2_inner(f.f, g.f, x) for g in G] for f in F])
        M = M / np.diag(M)[:, None]
        assert np.max(np.abs(M - np.eye(len(F)))) < 1e-8
