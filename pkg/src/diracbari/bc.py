"""Boundary conditions for the 2x2 Dirac-type system.

A pair of two-point conditions is stored as a 2x4 matrix acting on
``(y1(0), y2(0), y1(1), y2(1))``.  Regular conditions are brought to the
canonical form

    y1(0) + b y2(0) + a y1(1) = 0,
    d y2(0) + c y1(1) + y2(1) = 0,

which is the representation every other module works with.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import InternalInconsistency, NotCanonicalizable, NotRegular

TOL_SA = 1e-10
POLY_GCD_TOL = 1e-10
ANALYTIC_TOL = 1e-10


def tol_det(*entries) -> float:
    """Relative threshold for the "nonzero" tests on determinants."""
    mags = [abs(complex(e)) for e in np.ravel(np.asarray(entries, dtype=complex))]
    return 1e-12 * (1.0 + max(mags, default=0.0))


@dataclass(frozen=True)
class DiracWeights:
    """The diagonal weight matrix ``B = diag(b1, b2)`` with ``b1 < 0 < b2``.

    ``rational`` is an optional declared triple ``(n1, n2, b0)`` with
    ``b1 = -n1*b0`` and ``b2 = n2*b0``.  Rationality is never guessed from
    the floating point values.
    """

    b1: float
    b2: float
    rational: tuple[int, int, float] | None = None

    def __post_init__(self):
        if not (self.b1 < 0 < self.b2):
            raise ValueError(f"need b1 < 0 < b2, got b1={self.b1}, b2={self.b2}")
        if self.rational is not None:
            n1, n2, b0 = self.rational
            if n1 < 1 or n2 < 1 or b0 <= 0:
                raise ValueError("rational triple needs n1, n2 >= 1 and b0 > 0")
            if math.gcd(int(n1), int(n2)) != 1:
                raise ValueError(f"gcd(n1, n2) must be 1, got ({n1}, {n2})")
            if (abs(self.b1 + n1 * b0) > 1e-12 * abs(self.b1)
                    or abs(self.b2 - n2 * b0) > 1e-12 * abs(self.b2)):
                raise ValueError("declared (n1, n2, b0) does not reproduce (b1, b2)")

    @classmethod
    def dirac(cls) -> "DiracWeights":
        return cls(-1.0, 1.0, (1, 1, 1.0))

    @classmethod
    def from_rational(cls, n1: int, n2: int, b0: float = 1.0) -> "DiracWeights":
        return cls(-n1 * b0, n2 * b0, (int(n1), int(n2), float(b0)))

    @property
    def beta(self) -> float:
        return -self.b2 / self.b1

    @property
    def is_dirac_like(self) -> bool:
        """True when ``-b1 == b2`` (the Dirac system up to rescaling of lambda)."""
        return abs(self.b1 + self.b2) <= 1e-12 * abs(self.b2)


@dataclass(frozen=True)
class RawBC:
    """Two linear functionals as a 2x4 complex matrix."""

    A: np.ndarray = field(repr=False)

    def __post_init__(self):
        A = np.array(self.A, dtype=complex)
        if A.shape != (2, 4):
            raise ValueError(f"boundary matrix must be 2x4, got {A.shape}")
        if np.linalg.matrix_rank(A) != 2:
            raise ValueError("boundary functionals are linearly dependent")
        A.setflags(write=False)
        object.__setattr__(self, "A", A)

    def minor(self, j: int, k: int) -> complex:
        """``J_jk = det(A_jk)`` with 1-based column indices."""
        A = self.A
        return complex(A[0, j - 1] * A[1, k - 1] - A[0, k - 1] * A[1, j - 1])

    @property
    def J(self) -> dict[tuple[int, int], complex]:
        return {(j, k): self.minor(j, k) for j in range(1, 5) for k in range(1, 5) if j < k}

    def __repr__(self):
        return f"RawBC({self.A.tolist()!r})"


@dataclass(frozen=True)
class CanonicalBC:
    """Canonical coefficients ``(a, b, c, d)``."""

    a: complex = 0j
    b: complex = 0j
    c: complex = 0j
    d: complex = 0j

    def __post_init__(self):
        for name in "abcd":
            object.__setattr__(self, name, complex(getattr(self, name)))

    @property
    def u(self) -> complex:
        return self.a * self.d - self.b * self.c

    def rows(self) -> np.ndarray:
        """The functional matrix in column order (y1(0), y2(0), y1(1), y2(1))."""
        return np.array([[1, self.b, self.a, 0],
                         [0, self.d, self.c, 1]], dtype=complex)

    def as_raw(self) -> RawBC:
        return RawBC(self.rows())

    def coefficients(self) -> tuple[complex, complex, complex, complex]:
        return self.a, self.b, self.c, self.d


class Strict(enum.Enum):
    YES_ANALYTIC = "Yes-analytic"
    NO_ANALYTIC = "No-analytic"
    YES_NUMERIC = "Yes-numeric"
    NO_NUMERIC = "No-numeric"
    UNKNOWN = "Unknown"

    @property
    def is_yes(self) -> bool:
        return self in (Strict.YES_ANALYTIC, Strict.YES_NUMERIC)


@dataclass(frozen=True)
class StrictVerdict:
    verdict: Strict
    case: str
    detail: str = ""

    def label(self) -> str:
        return f"{self.verdict.value}/{self.case}"


@dataclass(frozen=True)
class Classification:
    regular: bool
    strictly_regular: StrictVerdict | None
    self_adjoint: bool

    def __post_init__(self):
        if self.strictly_regular is not None and self.strictly_regular.verdict.is_yes:
            assert self.regular


def canonicalize(raw: RawBC | np.ndarray) -> CanonicalBC:
    """Multiply the functionals by the inverse of the column-(1,4) block."""
    if not isinstance(raw, RawBC):
        raw = RawBC(raw)
    A = raw.A
    A14 = A[:, [0, 3]]
    J14 = raw.minor(1, 4)
    if abs(J14) <= tol_det(A):
        raise NotCanonicalizable(f"|J14| = {abs(J14):.3e} is below threshold")
    C = np.linalg.solve(A14, A)
    # rows are now (1, b, a, 0) and (0, d, c, 1)
    return CanonicalBC(a=C[0, 2], b=C[0, 1], c=C[1, 2], d=C[1, 1])


def is_regular(bc: CanonicalBC) -> bool:
    return abs(bc.u) > tol_det(bc.coefficients())


def adjoint_bc(bc: CanonicalBC, w: DiracWeights) -> RawBC:
    """Boundary functionals of the adjoint problem.

    ``U*1 = conj(a) y1(0) + y1(1) + conj(c)/beta y2(1)`` and
    ``U*2 = beta conj(b) y1(0) + y2(0) + conj(d) y2(1)``.
    """
    beta = w.beta
    a, b, c, d = (np.conj(x) for x in bc.coefficients())
    return RawBC(np.array([[a, 0, 1, c / beta],
                           [beta * b, 1, 0, d]], dtype=complex))


def same_conditions(A1, A2, tol: float = 1e-9) -> bool:
    """True when two 2x4 functional matrices have the same null space."""
    A1 = np.asarray(getattr(A1, "A", A1), dtype=complex)
    A2 = np.asarray(getattr(A2, "A", A2), dtype=complex)
    s = np.linalg.svd(np.vstack([A1, A2]), compute_uv=False)
    return bool(s[2] <= tol * s[0])


def self_adjoint_residuals(bc: CanonicalBC, w: DiracWeights) -> tuple[float, float, float]:
    """Residuals of ``|a|^2 + beta|b|^2 = 1``, ``|c|^2 + beta|d|^2 = beta``,
    ``a conj(c) + beta b conj(d) = 0``."""
    beta = w.beta
    a, b, c, d = bc.coefficients()
    r1 = abs(abs(a) ** 2 + beta * abs(b) ** 2 - 1.0)
    r2 = abs(abs(c) ** 2 + beta * abs(d) ** 2 - beta)
    r3 = abs(a * np.conj(c) + beta * b * np.conj(d))
    return r1, r2, r3


def cbc_minus_dbd(bc: CanonicalBC, w: DiracWeights) -> np.ndarray:
    """``C B C^* - D B D^*`` for ``C y(0) + D y(1) = 0``."""
    a, b, c, d = bc.coefficients()
    B = np.diag([w.b1, w.b2]).astype(complex)
    C = np.array([[1, b], [0, d]], dtype=complex)
    D = np.array([[a, 0], [c, 1]], dtype=complex)
    return C @ B @ C.conj().T - D @ B @ D.conj().T


def is_self_adjoint(bc: CanonicalBC, w: DiracWeights, tol: float = TOL_SA) -> bool:
    """Self-adjointness of the unperturbed operator, by two independent tests.

    The coefficient relations and the matrix identity ``C B C* = D B D*``
    must agree; a disagreement outside the tolerance band raises
    :class:`InternalInconsistency`.
    """
    res = self_adjoint_residuals(bc, w)
    by_relations = max(res) <= tol
    frob = float(np.linalg.norm(cbc_minus_dbd(bc, w) / w.b1))
    by_matrix = frob <= tol
    if by_relations != by_matrix:
        # both tests measure the same three residuals; the Frobenius norm
        # lies within [max, 2*max], so only a gross gap is a real conflict
        lo, hi = max(res), frob
        if not (lo <= 2 * tol and hi <= 4 * tol):
            raise InternalInconsistency(
                f"self-adjoint tests disagree: relations {res}, ||CBC*-DBD*|| = {frob:.3e}")
    return by_relations


# ---------------------------------------------------------------------------
# strict regularity


def char_polynomial(bc: CanonicalBC, w: DiracWeights) -> np.ndarray:
    """Coefficients (highest degree first) of ``Delta0(l) exp(-i b1 l)`` in ``exp(i b0 l)``.

    Needs declared rational weights.  The polynomial is
    ``z^(n1+n2) + a z^n2 + d z^n1 + (ad - bc)``.
    """
    if w.rational is None:
        raise ValueError("weights carry no declared rationality")
    n1, n2, _ = w.rational
    N = n1 + n2
    coef = np.zeros(N + 1, dtype=complex)  # coef[k] multiplies z^k
    coef[N] += 1.0
    coef[n2] += bc.a
    coef[n1] += bc.d
    coef[0] += bc.u
    return coef[::-1].copy()


def _trim(p: np.ndarray, tol: float) -> np.ndarray:
    p = np.asarray(p, dtype=complex)
    scale = max(np.max(np.abs(p)), 1e-300)
    nz = np.nonzero(np.abs(p) > tol * scale)[0]
    return p[nz[0]:] if nz.size else np.zeros(1, dtype=complex)


def poly_gcd_degree(p: np.ndarray, q: np.ndarray, tol: float = POLY_GCD_TOL) -> int:
    """Degree of an approximate gcd by the Euclidean algorithm.

    Remainders whose coefficient norm falls below ``tol`` (relative to the
    dividend) are treated as zero.
    """
    p = _trim(p, 1e-15)
    q = _trim(q, 1e-15)
    if len(p) < len(q):
        p, q = q, p
    while True:
        if len(q) == 1:
            return 0 if abs(q[0]) > 0 else len(p) - 1
        _, r = np.polydiv(p, q)
        if np.linalg.norm(r) <= tol * np.linalg.norm(p):
            return len(q) - 1
        p, q = q, _trim(r, 1e-15)
        q = q / q[0]
        p = p / p[0]


def has_multiple_roots(coef: np.ndarray, tol: float = POLY_GCD_TOL) -> bool:
    coef = np.asarray(coef, dtype=complex)
    coef = coef / coef[0]
    return poly_gcd_degree(coef, np.polyder(coef), tol) >= 1


def _arg_multiple_of_2pi(x: float, tol: float = 1e-9) -> bool:
    k = round(x / (2 * math.pi))
    return abs(x - 2 * math.pi * k) <= tol


def _is_zero(x: complex, scale: float = 1.0) -> bool:
    return abs(x) <= ANALYTIC_TOL * max(1.0, scale)


def classify_strict(bc: CanonicalBC, w: DiracWeights, *, n_side: int = 64,
                    sep_factor: float = 1e-3) -> StrictVerdict:
    """Decide strict regularity, analytically when a known case applies.

    Cases are tried from the most specific: separated conditions,
    the Dirac system, declared-rational weights (with explicit sub-cases for
    ``bc = 0`` and ``a = 0``), known irrational sub-cases, and finally a
    numerical separation test of the unperturbed zeros on a window.
    """
    if not is_regular(bc):
        raise NotRegular(f"ad - bc = {bc.u} vanishes")
    a, b, c, d = bc.coefficients()
    scale = max(1.0, abs(a), abs(b), abs(c), abs(d))

    if _is_zero(a) and _is_zero(d):
        return StrictVerdict(Strict.YES_ANALYTIC, "separated")

    if w.is_dirac_like:
        disc = (a - d) ** 2 + 4 * b * c
        ok = not _is_zero(disc, scale ** 2)
        return StrictVerdict(Strict.YES_ANALYTIC if ok else Strict.NO_ANALYTIC, "case1",
                             f"(a-d)^2 + 4bc = {disc:.6g}")

    bc_zero = _is_zero(b * c, scale ** 2)
    if w.rational is not None:
        n1, n2, _ = w.rational
        if bc_zero:
            modulus = w.b1 * math.log(abs(d)) + w.b2 * math.log(abs(a))
            phase = n1 * np.angle(-d) - n2 * np.angle(-a)
            ok = abs(modulus) > ANALYTIC_TOL or not _arg_multiple_of_2pi(phase)
            case = "case3b" if (abs(a - 1) <= ANALYTIC_TOL and abs(d - 1) <= ANALYTIC_TOL) else "case3a"
            return StrictVerdict(Strict.YES_ANALYTIC if ok else Strict.NO_ANALYTIC, case)
        if _is_zero(a):
            N = n1 + n2
            lhs = n1 ** n1 * n2 ** n2 * (-d) ** N
            rhs = N ** N * (-b * c) ** n2
            ok = abs(lhs - rhs) > ANALYTIC_TOL * max(1.0, abs(lhs), abs(rhs))
            return StrictVerdict(Strict.YES_ANALYTIC if ok else Strict.NO_ANALYTIC, "case3c")
        multiple = has_multiple_roots(char_polynomial(bc, w))
        return StrictVerdict(Strict.NO_ANALYTIC if multiple else Strict.YES_ANALYTIC, "case3")

    if bc_zero:
        modulus = w.b1 * math.log(abs(d)) + w.b2 * math.log(abs(a))
        ok = abs(modulus) > ANALYTIC_TOL
        return StrictVerdict(Strict.YES_ANALYTIC if ok else Strict.NO_ANALYTIC, "case4a")
    if _is_zero(a) and abs((b * c).imag) <= ANALYTIC_TOL * scale ** 2 \
            and abs(d.imag) <= ANALYTIC_TOL * scale:
        alpha = -w.b1 / w.b2
        crit = (alpha + 1) * (abs(b * c) * alpha ** (-alpha)) ** (1 / (alpha + 1))
        ok = abs(abs(d) - crit) > ANALYTIC_TOL * max(1.0, crit)
        return StrictVerdict(Strict.YES_ANALYTIC if ok else Strict.NO_ANALYTIC, "case4b",
                             f"critical |d| = {crit:.12g}")

    return _numeric_strict(bc, w, n_side=n_side, sep_factor=sep_factor)


def _numeric_strict(bc: CanonicalBC, w: DiracWeights, *, n_side: int,
                    sep_factor: float) -> StrictVerdict:
    from .det0 import SpectrumWindow, separation_stats, zeros_contour

    zeros = zeros_contour(bc, w, SpectrumWindow(n_side=n_side))
    sep_tol = sep_factor * 2 * math.pi / (w.b2 - w.b1)
    stats = separation_stats(zeros, sep_tol=sep_tol)
    verdict = Strict.YES_NUMERIC if stats.is_asymptotically_separated else Strict.NO_NUMERIC
    return StrictVerdict(verdict, "numeric",
                         f"outer-half min gap {stats.min_gap:.3e}, sep_tol {sep_tol:.3e}")


def classify(bc: CanonicalBC, w: DiracWeights) -> Classification:
    regular = is_regular(bc)
    strict = classify_strict(bc, w) if regular else None
    return Classification(regular=regular, strictly_regular=strict,
                          self_adjoint=is_self_adjoint(bc, w))


def rational_from_fraction(beta: Fraction, b0: float = 1.0) -> DiracWeights:
    """Weights with ``-b2/b1 = beta`` for an exact rational ``beta``."""
    beta = Fraction(beta)
    return DiracWeights.from_rational(beta.denominator, beta.numerator, b0)
