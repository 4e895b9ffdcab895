"""Bari-basis diagnostics for eigenfunction / adjoint-eigenfunction pairs.

For a pair ``f_n``, ``g_n`` of eigenvectors of ``L`` and ``L*`` the
normalized system is Bari-``c0`` exactly when

    alpha_n = ||f_n|| ||g_n|| / |(f_n, g_n)|  ->  1,

and ``alpha_n^2 - 1`` equals ``||f_n' - g_n'||^2`` for the unit ``f_n'`` and
its biorthogonal partner ``g_n'``.  At ``Q = 0`` the pairs are sums of
exponentials and every quantity has a closed form, which is used to
cross-check the quadrature.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .bc import CanonicalBC, DiracWeights, is_self_adjoint, tol_det
from .det0 import derive_sequences, indices, values
from .errors import MultipleEigenvalue, ZeroInnerProduct
from .perturbed import (
    EIG_TOL, Potential, adjoint_eigenfunction, eigenfunction, grid_size_for, l2_inner,
)

QUAD_TOL = 1e-8
TAIL_TOL = 50 * QUAD_TOL
_SERIES_T = 1e-5


# ---------------------------------------------------------------------------
# E-factors


def expm1_ratio(t):
    """``(e^t - 1)/t`` with the removable singularity at 0 filled by ``1 + t/2 + t^2/6``."""
    t = np.asarray(t, dtype=float)
    small = np.abs(t) < _SERIES_T
    safe = np.where(small, 1.0, t)
    out = np.where(small, 1.0 + t / 2 + t * t / 6, np.expm1(safe) / safe)
    return out if out.ndim else float(out)


def E_factor(lam, j: int, sign: int, w: DiracWeights):
    """``E_j^{+-}(lam) = int_0^1 |exp(+-2 i b_j lam x)| dx``.

    Parameters
    ----------
    lam : complex or array_like
    j : {1, 2}
        Component index selecting ``b_j``.
    sign : {+1, -1}
    w : DiracWeights
    """
    if j not in (1, 2):
        raise ValueError("j must be 1 or 2")
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    b = w.b1 if j == 1 else w.b2
    t = -2.0 * sign * b * np.imag(np.asarray(lam, dtype=complex))
    return expm1_ratio(t)


# ---------------------------------------------------------------------------
# unperturbed pairs


@dataclass(frozen=True)
class PairCoefficients:
    """Amplitudes of an exponential pair.

    ``f = (A e^{i b1 l x}, G e^{i b2 l x})`` and
    ``g = conj((P e^{-i b1 l x}, R e^{-i b2 l x}))``.
    """

    A: complex
    G: complex
    P: complex
    R: complex

    def closed_forms(self, lam: complex, w: DiracWeights) -> tuple[float, float, complex]:
        """``(||f||^2, ||g||^2, (f, g))``."""
        E1p, E1m = E_factor(lam, 1, 1, w), E_factor(lam, 1, -1, w)
        E2p, E2m = E_factor(lam, 2, 1, w), E_factor(lam, 2, -1, w)
        nf2 = abs(self.A) ** 2 * E1p + abs(self.G) ** 2 * E2p
        ng2 = abs(self.P) ** 2 * E1m + abs(self.R) ** 2 * E2m
        return float(nf2), float(ng2), complex(self.A * self.P + self.G * self.R)

    def taus(self, lam: complex, w: DiracWeights) -> np.ndarray:
        """``(tau1, tau2, tau3, tau4)``; the first three sum to ``||f||^2 ||g||^2 - |(f,g)|^2``."""
        E1p, E1m = E_factor(lam, 1, 1, w), E_factor(lam, 1, -1, w)
        E2p, E2m = E_factor(lam, 2, 1, w), E_factor(lam, 2, -1, w)
        AP, GR = self.A * self.P, self.G * self.R
        t1 = abs(AP) ** 2 * (E1p * E1m - 1)
        t2 = abs(GR) ** 2 * (E2p * E2m - 1)
        cross = 2 * (AP * np.conj(GR)).real
        t3 = abs(self.A * self.R) ** 2 * E1p * E2m + abs(self.G * self.P) ** 2 * E2p * E1m - cross
        t4 = abs(self.P * np.conj(self.G) - np.conj(self.A) * self.R) ** 2
        return np.array([t1, t2, t3, t4], dtype=float)

    def sample(self, lam: complex, w: DiracWeights, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        e1 = np.exp(1j * w.b1 * lam * x)
        e2 = np.exp(1j * w.b2 * lam * x)
        f = np.column_stack([self.A * e1, self.G * e2])
        g = np.conj(np.column_stack([self.P / e1, self.R / e2]))
        return f, g


def pair_coefficients(lam: complex, bc: CanonicalBC, w: DiracWeights) -> tuple[str, PairCoefficients]:
    """Branch label and amplitudes of the analytic pair at a simple zero ``lam``.

    ``b != 0`` uses the ``(b, -(1 + a e1))`` form, ``b = 0 != c`` its mirror
    with the roles of the two boundary rows exchanged, and ``b = c = 0``
    the single-component quasi-periodic vectors.
    """
    a, b, c, d = bc.coefficients()
    beta = w.beta
    e1 = np.exp(1j * w.b1 * lam)
    e2 = np.exp(-1j * w.b2 * lam)
    tol = tol_det(a, b, c, d)
    if abs(b) > tol:
        return "b", PairCoefficients(b, -(1 + a * e1), 1 + d * e2, -beta * b)
    if abs(c) > tol:
        return "c", PairCoefficients(1 + d * e2, -c * e1 * e2, c * e1 * e2, -beta * (1 + a * e1))
    r1, r2 = abs(1 + a * e1), abs(1 + d * e2)
    if max(r1, r2) <= 1e-6 * (1 + abs(a) * abs(e1) + abs(d) * abs(e2)):
        raise MultipleEigenvalue(f"both quasi-periodic branches vanish at {lam}")
    if r1 < r2:
        return "quasi-1", PairCoefficients(1, 0, 1, 0)
    return "quasi-2", PairCoefficients(0, 1, 0, 1)


@dataclass(frozen=True)
class UnperturbedPair:
    n: int
    lam: complex
    branch: str
    coef: PairCoefficients
    grid: np.ndarray = field(repr=False)
    f: np.ndarray = field(repr=False)
    g: np.ndarray = field(repr=False)


def unperturbed_pair(n: int, bc: CanonicalBC, w: DiracWeights, zeros, m: int | None = None
                     ) -> UnperturbedPair:
    """Analytic eigenvector pair for the zero with index ``n``, sampled on ``m`` points."""
    hit = [z for z in zeros if z.index == n]
    if not hit:
        raise KeyError(f"no zero with index {n}")
    z = hit[0]
    if z.multiplicity > 1:
        raise MultipleEigenvalue(f"zero {n} has multiplicity {z.multiplicity}")
    branch, coef = pair_coefficients(z.value, bc, w)
    if m is None:
        m = grid_size_for([z.value], w)
    x = np.linspace(0.0, 1.0, m)
    f, g = coef.sample(z.value, w, x)
    return UnperturbedPair(n, z.value, branch, coef, x, f, g)


# ---------------------------------------------------------------------------
# pair diagnostics


@dataclass(frozen=True)
class PairDiagnostic:
    n: int
    lam: complex
    norm_f: float
    norm_g: float
    inner_fg: complex
    alpha: float
    defect: float
    tau: np.ndarray = field(repr=False)
    z: complex
    tau_available: bool
    quad_error: float
    identity_residual: float


def _checked_inner(f: np.ndarray, g: np.ndarray, x: np.ndarray) -> tuple[complex, float]:
    """Simpson inner product and its change against the grid with every other point."""
    fine = l2_inner(f, g, x)
    if (x.size - 1) % 4 == 0 and x.size >= 9:
        coarse = l2_inner(f[::2], g[::2], x[::2])
        return fine, abs(fine - coarse)
    return fine, 0.0


def pair_diagnostic(f: np.ndarray, g: np.ndarray, lam: complex, w: DiracWeights, bc: CanonicalBC,
                    x: np.ndarray, *, n: int = 0, coef: PairCoefficients | None = None
                    ) -> PairDiagnostic:
    """Norms, ``alpha``, defect and (for analytic pairs) the tau decomposition.

    Parameters
    ----------
    f, g : ndarray, shape (m, 2)
        Samples on the common grid ``x``.
    coef : PairCoefficients, optional
        Amplitudes of an analytic ``Q = 0`` pair; enables ``tau`` and the
        identity check.
    """
    f = np.asarray(f, dtype=complex)
    g = np.asarray(g, dtype=complex)
    x = np.asarray(x, dtype=float)
    nf2, ef = _checked_inner(f, f, x)
    ng2, eg = _checked_inner(g, g, x)
    ip, ei = _checked_inner(f, g, x)
    nf2, ng2 = nf2.real, ng2.real
    if abs(ip) <= 1e-14 * math.sqrt(max(nf2 * ng2, 0.0)) or ip == 0:
        raise ZeroInnerProduct(f"(f, g) = {ip} at {lam}")
    gram = nf2 * ng2 - abs(ip) ** 2
    defect = max(gram / abs(ip) ** 2, 0.0)
    scale = max(nf2, ng2, abs(ip), 1e-300)
    quad_error = max(ef, eg, ei) / scale

    e1 = np.exp(1j * w.b1 * lam)
    e2 = np.exp(-1j * w.b2 * lam)
    z = complex((1 + bc.d * e2) * np.conj(1 + bc.a * e1))
    if coef is not None:
        tau = coef.taus(lam, w)
        resid = abs(gram - tau[:3].sum()) / max(nf2 * ng2, 1e-300)
    else:
        tau = np.zeros(4)
        resid = math.nan
    return PairDiagnostic(n, complex(lam), math.sqrt(nf2), math.sqrt(ng2), complex(ip),
                          math.sqrt(1 + defect), defect, tau, z, coef is not None,
                          float(quad_error), float(resid))


def normalized_distance(f: np.ndarray, g: np.ndarray, x: np.ndarray) -> float:
    """``||f' - g'||^2`` for ``f' = f/||f||`` and ``g'`` scaled so ``(f', g') = 1``."""
    nf = math.sqrt(l2_inner(f, f, x).real)
    fp = f / nf
    ip = l2_inner(fp, g, x)
    gp = g / np.conj(ip)
    d = fp - gp
    return float(l2_inner(d, d, x).real)


def unperturbed_diagnostics(bc: CanonicalBC, w: DiracWeights, zeros, m: int | None = None
                            ) -> list[PairDiagnostic]:
    """Diagnostics of the analytic pairs for every simple zero in ``zeros``."""
    simple = [z for z in zeros if z.multiplicity == 1]
    if m is None:
        m = grid_size_for(values(simple), w) if simple else 1025
    out = []
    for z in simple:
        p = unperturbed_pair(z.index, bc, w, [z], m)
        out.append(pair_diagnostic(p.f, p.g, p.lam, w, bc, p.grid, n=p.n, coef=p.coef))
    return out


def perturbed_diagnostics(bc: CanonicalBC, w: DiracWeights, q: Potential, zeros,
                          m: int | None = None, *, tol: float = EIG_TOL) -> list[PairDiagnostic]:
    """Diagnostics of computed eigenfunction / adjoint-eigenfunction pairs (no tau terms)."""
    simple = [z for z in zeros if z.multiplicity == 1]
    if not simple:
        return []
    if m is None:
        m = grid_size_for(values(simple), w, q)
    out = []
    for z in simple:
        f = eigenfunction(z.value, bc, w, q, m, tol=tol)
        g = adjoint_eigenfunction(z.value, bc, w, q, m, tol=tol)
        out.append(pair_diagnostic(f.f, g.f, z.value, w, bc, f.grid, n=z.index))
    return out


# ---------------------------------------------------------------------------
# c0 criterion


class Verdict(enum.Enum):
    SELF_ADJOINT_BARI = "SelfAdjointBari"
    NOT_BARI = "NotBari"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class BariVerdict:
    """Outcome of the ``c0`` criterion.

    ``ratio_ok`` is the coefficient condition (``|c| = beta |b|``, or
    ``|a| = |d| = 1`` on the quasi-periodic route).  ``im_trend`` and
    ``z_trend`` are outer-half maxima of ``|Im l_n|`` and ``|z_n - |bc||``.
    """

    route: str
    ratio_ok: bool
    im_trend: float
    z_trend: float
    im_ok: bool
    z_ok: bool
    self_adjoint: bool
    verdict: Verdict

    @property
    def conditions_hold(self) -> bool:
        return self.ratio_ok and self.im_ok and self.z_ok


def _tail_flag(vals: np.ndarray, idx: np.ndarray, tol: float) -> tuple[float, bool]:
    m = np.max(np.abs(idx))
    half = np.abs(idx) >= m / 2
    quarter = np.abs(idx) >= 3 * m / 4
    half_max = float(np.max(vals[half]))
    quarter_max = float(np.max(vals[quarter])) if quarter.any() else half_max
    return half_max, bool(half_max <= tol and quarter_max <= half_max)


def bari_c0_check(bc: CanonicalBC, w: DiracWeights, zeros, sequences=None, *,
                  tol: float = TAIL_TOL) -> BariVerdict:
    """Test the ``c0`` criterion on a finite window and cross-check with self-adjointness."""
    a, b, c, d = bc.coefficients()
    seq = sequences if sequences is not None else derive_sequences(zeros, bc, w)
    lam = values(zeros)
    idx = indices(zeros)
    ctol = 1e-10 * (1 + abs(a) + abs(b) + abs(c) + abs(d))
    quasi = abs(b) <= tol_det(a, b, c, d) and abs(c) <= tol_det(a, b, c, d)
    if quasi:
        route = "quasi-periodic"
        ratio_ok = abs(abs(a) - 1) <= ctol and abs(abs(d) - 1) <= ctol
    else:
        route = "b-or-c"
        ratio_ok = abs(abs(c) - w.beta * abs(b)) <= ctol
    im_trend, im_ok = _tail_flag(np.abs(lam.imag), idx, tol)
    z_trend, z_ok = _tail_flag(np.abs(seq.z - abs(b * c)), seq.indices, tol)
    sa = is_self_adjoint(bc, w)
    holds = ratio_ok and im_ok and z_ok
    if holds and sa:
        verdict = Verdict.SELF_ADJOINT_BARI
    elif not holds and not sa:
        verdict = Verdict.NOT_BARI
    else:
        verdict = Verdict.INCONCLUSIVE
    return BariVerdict(route, ratio_ok, im_trend, z_trend, im_ok, z_ok, sa, verdict)


# ---------------------------------------------------------------------------
# closeness sums


@dataclass(frozen=True)
class ClosenessSums:
    """Cumulative sums of ``||f_n' - g_n'||^{p'}`` over ``|n| <= N``.

    For ``p = 1`` (``p' = inf``) ``partial_sums`` holds running maxima.
    """

    p: float
    p_dual: float
    levels: np.ndarray
    partial_sums: np.ndarray
    tail_sup: float


def closeness_sums(diags, p: float) -> ClosenessSums:
    """Partial sums indexed by ``N = 0, 1, ...`` over symmetric windows ``|n| <= N``."""
    if not 1.0 <= p <= 2.0:
        raise ValueError("p must lie in [1, 2]")
    if not diags:
        raise ValueError("no diagnostics given")
    n = np.array([dg.n for dg in diags])
    term = np.sqrt(np.array([dg.defect for dg in diags]))
    levels = np.arange(0, int(np.max(np.abs(n))) + 1)
    per_level = np.zeros(levels.size)
    q = math.inf if p == 1.0 else p / (p - 1)
    for k, t in zip(np.abs(n), term):
        if math.isinf(q):
            per_level[k] = max(per_level[k], t)
        else:
            per_level[k] += t ** q
    partial = np.maximum.accumulate(per_level) if math.isinf(q) else np.cumsum(per_level)
    outer = np.abs(n) >= levels[-1] / 2
    return ClosenessSums(p, q, levels, partial, float(np.max(term[outer])))
