import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from diracbari.bc import (
    CanonicalBC, DiracWeights, RawBC, Strict, adjoint_bc, canonicalize, cbc_minus_dbd,
    char_polynomial, classify, classify_strict, has_multiple_roots, is_regular,
    is_self_adjoint, same_conditions, self_adjoint_residuals,
)
from diracbari.errors import InternalInconsistency, NotCanonicalizable, NotRegular

DIRAC = DiracWeights.dirac()

cplx = st.builds(complex, st.floats(-3, 3), st.floats(-3, 3))


def random_self_adjoint(rng, beta):
    """(a, b, c, d) = D^(1/2) N D^(-1/2) for a unitary N, D = diag(1, beta)."""
    X = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    N, _ = np.linalg.qr(X)
    s = np.diag([1.0, math.sqrt(beta)])
    M = s @ N @ np.linalg.inv(s)
    return CanonicalBC(a=M[0, 0], b=M[0, 1], c=M[1, 0], d=M[1, 1])


class TestWeights:
    def test_ordering_enforced(self):
        with pytest.raises(ValueError):
            DiracWeights(1.0, 2.0)

    def test_rational_checks(self):
        w = DiracWeights.from_rational(1, 2, 0.5)
        assert (w.b1, w.b2, w.beta) == (-0.5, 1.0, 2.0)
        with pytest.raises(ValueError):
            DiracWeights(-2.0, 4.0, (2, 4, 1.0))
        with pytest.raises(ValueError):
            DiracWeights(-1.0, 2.0, (1, 3, 1.0))


class TestCanonicalize:
    def test_dirichlet_type(self):
        bc = canonicalize(RawBC([[1, 0, 0, 0], [0, 0, 0, 1]]))
        assert bc.coefficients() == (0, 0, 0, 0)

    def test_row_reduction(self):
        bc = canonicalize(RawBC([[1, 1, 0, 0], [0, 0, 1, 3]]))
        assert bc.a == 0 and bc.b == 1 and bc.d == 0
        assert bc.c == pytest.approx(1 / 3)

    def test_singular_block(self):
        with pytest.raises(NotCanonicalizable):
            canonicalize(RawBC([[1, 0, -1, 0], [1, 0, 1, 0]]))

    def test_rank_deficient(self):
        with pytest.raises(ValueError):
            RawBC([[1, 0, 0, 0], [2, 0, 0, 0]])

    @given(cplx, cplx, cplx, cplx)
    def test_idempotent(self, a, b, c, d):
        bc = CanonicalBC(a, b, c, d)
        again = canonicalize(bc.as_raw())
        assert np.allclose(again.coefficients(), bc.coefficients(), atol=1e-12)

    @given(cplx, cplx, cplx, cplx, st.lists(cplx, min_size=4, max_size=4))
    def test_invariant_under_left_multiplication(self, a, b, c, d, m):
        T = np.array(m).reshape(2, 2)
        if abs(np.linalg.det(T)) < 1e-3:
            return
        bc = CanonicalBC(a, b, c, d)
        raw = RawBC(T @ bc.rows())
        again = canonicalize(raw)
        assert np.allclose(again.coefficients(), bc.coefficients(), atol=1e-8)
        # J32 of the canonical rows equals ad - bc
        assert again.as_raw().minor(3, 2) == pytest.approx(bc.u, abs=1e-8)

    def test_minors(self):
        bc = CanonicalBC(2, 3, 5, 7)
        J = bc.as_raw().J
        assert J[(1, 2)] == 7 and J[(3, 4)] == 2 and J[(1, 4)] == 1
        assert bc.as_raw().minor(3, 2) == bc.u == 2 * 7 - 3 * 5


class TestRegularity:
    @pytest.mark.parametrize("coef,expected", [
        ((0, 1, 1, 0), True), ((0, 0, 0, 1), False), ((1, 0, 0, 1), True)])
    def test_examples(self, coef, expected):
        assert is_regular(CanonicalBC(*coef)) is expected


class TestStrict:
    def test_case1_antiperiodic_dirac(self):
        v = classify_strict(CanonicalBC(1, 0, 0, 1), DIRAC)
        assert v.verdict is Strict.NO_ANALYTIC and v.case == "case1"

    def test_case1_constructed(self):
        a, d, b = 2 + 1j, -0.5j, 1.5
        c = -((a - d) ** 2) / (4 * b)
        v = classify_strict(CanonicalBC(a, b, c, d), DIRAC)
        assert v.verdict is Strict.NO_ANALYTIC

    def test_separated(self):
        v = classify_strict(CanonicalBC(0, 1, 1, 0), DIRAC)
        assert v.verdict is Strict.YES_ANALYTIC and v.case == "separated"

    def test_case3b(self):
        v = classify_strict(CanonicalBC(1, 0, 0, 1), DiracWeights.from_rational(1, 2))
        assert v.verdict is Strict.YES_ANALYTIC and v.case == "case3b"
        v = classify_strict(CanonicalBC(1, 0, 0, 1), DiracWeights.from_rational(1, 3))
        assert v.verdict is Strict.NO_ANALYTIC

    def test_case3c_equality(self):
        # n1 = 1, n2 = 2: 1 * 4 * (-d)^3 = 27 (-bc)^2
        w = DiracWeights.from_rational(1, 2)
        bcv = 1.0
        d = -(27 * bcv ** 2 / 4) ** (1 / 3)
        v = classify_strict(CanonicalBC(0, 1, bcv, d), w)
        assert v.case == "case3c" and v.verdict is Strict.NO_ANALYTIC
        assert has_multiple_roots(char_polynomial(CanonicalBC(0, 1, bcv, d), w))
        v = classify_strict(CanonicalBC(0, 1, bcv, d * 1.01), w)
        assert v.verdict is Strict.YES_ANALYTIC

    def test_case3_general_uses_gcd(self):
        w = DiracWeights.from_rational(1, 2)
        v = classify_strict(CanonicalBC(0.3, 1, 0.7j, 0.2), w)
        assert v.case == "case3" and v.verdict is Strict.YES_ANALYTIC

    def test_case3_general_double_root(self):
        # force a double root mu0 of z^3 + a z^2 + d z + u with a fixed
        w = DiracWeights.from_rational(1, 2)
        a, mu0 = 0.4, 0.9 + 0.2j
        # P'(mu0) = 0: 3 mu0^2 + 2 a mu0 + d = 0; P(mu0) = 0 fixes u
        d = -(3 * mu0 ** 2 + 2 * a * mu0)
        u = -(mu0 ** 3 + a * mu0 ** 2 + d * mu0)
        b = 1.0
        c = (a * d - u) / b
        v = classify_strict(CanonicalBC(a, b, c, d), w)
        assert v.case == "case3" and v.verdict is Strict.NO_ANALYTIC

    def test_case4a(self):
        w = DiracWeights(-1.0, math.sqrt(2))
        # b1 ln|d| + b2 ln|a| = 0  with |a| = e, |d| = e^sqrt2
        bad = CanonicalBC(math.e, 0, 0, -math.exp(math.sqrt(2)))
        assert classify_strict(bad, w).verdict is Strict.NO_ANALYTIC
        assert classify_strict(CanonicalBC(2, 0, 0, 1), w).verdict is Strict.YES_ANALYTIC

    @pytest.mark.parametrize("sign", [1, -1])
    def test_case4b_depends_on_modulus(self, sign):
        w = DiracWeights(-1.0, math.sqrt(2))
        alpha = 1 / math.sqrt(2)
        crit = (alpha + 1) * (alpha ** (-alpha)) ** (1 / (alpha + 1))
        v = classify_strict(CanonicalBC(0, 1, 1, sign * crit), w)
        assert v.case == "case4b" and v.verdict is Strict.NO_ANALYTIC
        assert classify_strict(CanonicalBC(0, 1, 1, sign * 1.5), w).verdict is Strict.YES_ANALYTIC

    def test_numeric_fallback(self):
        w = DiracWeights(-1.0, math.sqrt(2))
        v = classify_strict(CanonicalBC(0.5, 1, 0.3, 0.2), w)
        assert v.case == "numeric"
        assert v.verdict in (Strict.YES_NUMERIC, Strict.NO_NUMERIC)

    def test_not_regular(self):
        with pytest.raises(NotRegular):
            classify_strict(CanonicalBC(0, 0, 0, 1), DIRAC)

    def test_classification_record(self):
        cl = classify(CanonicalBC(0, 1, 1, 0), DIRAC)
        assert cl.regular and cl.self_adjoint and cl.strictly_regular.verdict.is_yes
        cl = classify(CanonicalBC(0, 0, 0, 1), DIRAC)
        assert not cl.regular and cl.strictly_regular is None


class TestAdjoint:
    def test_example(self):
        raw = adjoint_bc(CanonicalBC(0, 1, 1, 0), DIRAC)
        assert np.array_equal(raw.A, [[0, 0, 1, 1], [1, 1, 0, 0]])

    @given(cplx, cplx, cplx, cplx, st.floats(0.2, 5.0))
    @settings(max_examples=60)
    def test_involution(self, a, b, c, d, beta):
        bc = CanonicalBC(a, b, c, d)
        assume(abs(bc.u) > 1e-3)
        w = DiracWeights(-1.0, beta)
        adj = canonicalize(adjoint_bc(bc, w))
        back = adjoint_bc(adj, w)
        assert same_conditions(back, bc.as_raw())

    @given(cplx, cplx, cplx, cplx, st.floats(0.2, 5.0))
    @settings(max_examples=60)
    def test_regularity_preserved(self, a, b, c, d, beta):
        bc = CanonicalBC(a, b, c, d)
        assume(abs(bc.u) > 1e-3)
        w = DiracWeights(-1.0, beta)
        adj = canonicalize(adjoint_bc(bc, w))
        # J14 of the adjoint rows is conj(u) and J32 is 1
        assert adj.u * np.conj(bc.u) == pytest.approx(1.0, abs=1e-9)

    def test_self_adjoint_means_same_conditions(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            beta = rng.uniform(0.3, 3)
            bc = random_self_adjoint(rng, beta)
            w = DiracWeights(-1.0, beta)
            assert is_self_adjoint(bc, w)
            assert same_conditions(adjoint_bc(bc, w), bc.as_raw())


class TestSelfAdjoint:
    @pytest.mark.parametrize("c", [1, -1, 1j, np.exp(0.3j)])
    def test_separated(self, c):
        assert is_self_adjoint(CanonicalBC(0, 1, c, 0), DIRAC)

    def test_periodic_any_weights(self):
        for w in (DIRAC, DiracWeights(-0.3, 2.1)):
            assert is_self_adjoint(CanonicalBC(1, 0, 0, 1), w)

    def test_not(self):
        assert not is_self_adjoint(CanonicalBC(2, 0, 0, 0.5), DIRAC)

    def test_matrix_norm_matches_residuals(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            coef = rng.normal(size=4) + 1j * rng.normal(size=4)
            w = DiracWeights(-rng.uniform(0.2, 2), rng.uniform(0.2, 2))
            bc = CanonicalBC(*coef)
            r1, r2, r3 = self_adjoint_residuals(bc, w)
            frob = np.linalg.norm(cbc_minus_dbd(bc, w) / w.b1)
            assert frob == pytest.approx(math.sqrt(r1 ** 2 + r2 ** 2 + 2 * r3 ** 2), rel=1e-10)

    def test_inconsistency_is_a_bug_signal(self, monkeypatch):
        import diracbari.bc as mod
        monkeypatch.setattr(mod, "cbc_minus_dbd", lambda bc, w: np.eye(2))
        with pytest.raises(InternalInconsistency):
            is_self_adjoint(CanonicalBC(0, 1, 1, 0), DIRAC)
