"""Reduction of the damped string equation to a Dirac-type problem.

The problem

    u_tt - (beta1 + beta2) u_xt + beta1 beta2 u_xx + a1(x) u_x + a2(x) u_t = 0,
    u(0, t) = 0,   h0 u_x(0, t) + h1 u_x(1, t) + h2 u_t(1, t) = 0,

has the generator ``L(y1, y2) = -i (y2, -beta1 beta2 y1'' + (beta1 + beta2) y2'
- a1 y1' - a2 y2)``.  Differentiating the first component, diagonalizing with
``V1 = [[b1, b2], [1, 1]]`` and removing the diagonal of the potential with
``V2 = diag(w1, 1/w2)`` turns ``L`` into ``-i B^{-1} y' + Q y`` with
``B = diag(1/beta1, 1/beta2)``.  With ``V2`` as written the conjugation gives

    Q12 = i (b2^2 a1 + b2 a2) / ((b2 - b1) w),
    Q21 = -i w (b1^2 a1 + b1 a2) / (b2 - b1),

and the boundary functional ``U2`` carries ``w1(1)`` on ``y1(1)`` and
``1/w2(1)`` on ``y2(1)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_simpson

from .bc import (
    CanonicalBC, DiracWeights, RawBC, canonicalize, classify_strict,
    is_self_adjoint, tol_det,
)
from .errors import DegenerateBoundary, Inapplicable, InternalInconsistency, NotRegular
from .perturbed import EigenFunction, Potential

C_SMALL = 1e-6
INTEGRAL_TOL = 1e-9


def _as_function(a):
    """Coefficient as a vectorised callable from a scalar, a callable or ``(x, values)``."""
    if callable(a):
        return lambda x: np.broadcast_to(np.asarray(a(x), dtype=complex), np.shape(x))
    if isinstance(a, tuple) and len(a) == 2:
        g = np.asarray(a[0], dtype=float)
        v = np.asarray(a[1], dtype=complex)
        if g.ndim != 1 or v.shape != g.shape or g.size < 2 or np.any(np.diff(g) <= 0):
            raise ValueError("sampled coefficient needs a strictly increasing grid")
        if g[0] > 0 or g[-1] < 1:
            raise ValueError("sampled coefficient grid must cover [0, 1]")
        return lambda x: np.interp(x, g, v.real) + 1j * np.interp(x, g, v.imag)
    c = complex(a)
    return lambda x: np.full(np.shape(x), c)


@dataclass(frozen=True)
class StringProblem:
    """Coefficients of the damped string problem.

    ``a1`` and ``a2`` may be numbers, vectorised callables or ``(x, values)``
    samples on a grid covering [0, 1].
    """

    beta1: float
    beta2: float
    a1: object = 0.0
    a2: object = 0.0
    h0: complex = 0j
    h1: complex = 0j
    h2: complex = 1 + 0j

    def __post_init__(self):
        if not (self.beta1 < 0 < self.beta2):
            raise ValueError("need beta1 < 0 < beta2")
        for name in ("h0", "h1", "h2"):
            object.__setattr__(self, name, complex(getattr(self, name)))
        if abs(self.h1) + abs(self.h2) == 0:
            raise ValueError("need |h1| + |h2| > 0")

    @property
    def b1(self) -> float:
        return 1.0 / self.beta1

    @property
    def b2(self) -> float:
        return 1.0 / self.beta2

    def weights(self) -> DiracWeights:
        """``B = diag(1/beta1, 1/beta2)``; declared rational when ``-beta1 == beta2`` exactly."""
        if -self.beta1 == self.beta2:
            return DiracWeights.from_rational(1, 1, self.b2)
        return DiracWeights(self.b1, self.b2)

    def coefficient_values(self, x) -> tuple[np.ndarray, np.ndarray]:
        x = np.asarray(x, dtype=float)
        return _as_function(self.a1)(x), _as_function(self.a2)(x)


def w_factors(sp: StringProblem, x: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    """``w1``, ``w2`` on ``x`` and an estimate of the exponent quadrature error.

    The integrals ``int_0^x (b_j a1 + a2)`` use the trapezoid rule on ``x``
    refined once by midpoints; the Richardson combination is returned and
    the coarse/fine difference serves as the error estimate.
    """
    x = np.asarray(x, dtype=float)
    xf = np.empty(2 * x.size - 1)
    xf[0::2] = x
    xf[1::2] = 0.5 * (x[:-1] + x[1:])
    a1, a2 = sp.coefficient_values(xf)
    b1, b2 = sp.b1, sp.b2
    k = b1 * b2 / (b2 - b1)
    out, err = [], 0.0
    for b in (b1, b2):
        g = b * a1 + a2
        fine = np.concatenate([[0], np.cumsum(0.25 * np.diff(x) * (g[0:-1:2] + 2 * g[1::2] + g[2::2]))])
        coarse = np.concatenate([[0], np.cumsum(0.5 * np.diff(x) * (g[0:-1:2] + g[2::2]))])
        rich = (4 * fine - coarse) / 3
        err = max(err, float(np.max(np.abs(fine - coarse))) / 3)
        out.append(np.exp(k * rich))
    return out[0], out[1], abs(k) * err


@dataclass(frozen=True)
class DiracReduction:
    weights: DiracWeights
    q: Potential = field(repr=False)
    raw_bc: RawBC = field(repr=False)
    canonical_bc: CanonicalBC
    w1_at_1: complex
    w2_at_1: complex
    w_at_1: complex
    grid: np.ndarray = field(repr=False)
    quad_error: float
    c_small: bool


def reduce(sp: StringProblem, m: int = 2049) -> DiracReduction:
    """Dirac-type weights, potential and boundary conditions similar to the string generator.

    Raises
    ------
    DegenerateBoundary
        When ``b2 h1 + h2`` vanishes, so ``U2`` cannot be normalized on ``y2(1)``.
    """
    if m < 2:
        raise ValueError("m must be >= 2")
    b1, b2 = sp.b1, sp.b2
    h0, h1, h2 = sp.h0, sp.h1, sp.h2
    div = b2 * h1 + h2
    if abs(div) <= tol_det(h0, h1, h2, b1 * h1, b2 * h1):
        raise DegenerateBoundary(f"b2 h1 + h2 = {div} vanishes")
    x = np.linspace(0.0, 1.0, m)
    w1, w2, err = w_factors(sp, x)
    w = w1 * w2
    a1, a2 = sp.coefficient_values(x)
    s = 1j / (b2 - b1)
    q12 = s * (b2 ** 2 * a1 + b2 * a2) / w
    q21 = -s * w * (b1 ** 2 * a1 + b1 * a2)
    if not np.any(q12) and not np.any(q21):
        q = Potential.zero()
    else:
        q = Potential.sampled(x, q12, q21)

    W1, W2, W = complex(w1[-1]), complex(w2[-1]), complex(w[-1])
    raw = RawBC(np.array([[1, 1, 0, 0],
                          [b1 * h0, b2 * h0, (b1 * h1 + h2) * W1, div / W2]], dtype=complex))
    d = (b2 - b1) * h0 * W2 / div
    c = (b1 * h1 + h2) * W / div
    canon = CanonicalBC(0, 1, c, d)
    check = canonicalize(raw)
    if max(abs(p - r) for p, r in zip(check.coefficients(), canon.coefficients())) \
            > 1e-10 * (1 + abs(c) + abs(d)):
        raise InternalInconsistency("closed-form canonical coefficients disagree with elimination")
    return DiracReduction(sp.weights(), q, raw, canon, W1, W2, W, x, err,
                          bool(abs(b1 * h1 + h2) <= C_SMALL * (abs(h1) + abs(h2))))


def string_bari_condition(sp: StringProblem, red: DiracReduction | None = None) -> bool:
    """Self-adjointness of the reduced conditions, read off the string data.

    True iff ``h0 = 0``, ``beta1 = -beta2`` and
    ``int_0^1 Re a2 = beta2 log|(beta2 h2 - h1)/(beta2 h2 + h1)|``.
    The reduced conditions must be strictly regular.
    """
    red = red if red is not None else reduce(sp)
    bc, w = red.canonical_bc, red.weights
    try:
        strict = classify_strict(bc, w)
    except NotRegular as exc:
        raise Inapplicable(f"reduced conditions are not regular: {exc}") from exc
    if not strict.verdict.is_yes:
        raise Inapplicable(f"reduced conditions are not strictly regular ({strict.label()})")

    h0, h1, h2 = sp.h0, sp.h1, sp.h2
    scale = abs(h0) + abs(h1) + abs(h2)
    ok = abs(h0) <= 1e-12 * scale and abs(sp.beta1 + sp.beta2) <= 1e-12 * sp.beta2
    if ok:
        x = np.linspace(0.0, 1.0, 4097)
        integral = float(cumulative_simpson(sp.coefficient_values(x)[1].real, x=x)[-1])
        b = sp.beta2
        rhs = b * math.log(abs((b * h2 - h1) / (b * h2 + h1)))
        ok = abs(integral - rhs) <= INTEGRAL_TOL * (1 + abs(rhs))
    sa = is_self_adjoint(bc, w)
    if sa != ok:
        raise InternalInconsistency(f"string criterion {ok} but reduced self-adjointness {sa}")
    return ok


def similarity_residual(sp: StringProblem, red: DiracReduction, eigen: EigenFunction) -> float:
    """Relative residual of an eigenfunction mapped back to the string generator.

    ``Y = V1 V2 f`` must satisfy ``Y2 = i lam u`` with ``u = int_0^x Y1``,
    the integrated second row of the first-order system, ``Y2(0) = 0`` and
    ``h0 Y1(0) + h1 Y1(1) + h2 Y2(1) = 0``.  Everything is divided by
    ``max |Y|``.
    """
    x = np.asarray(eigen.grid, dtype=float)
    lam = complex(eigen.lam)
    w1, w2, _ = w_factors(sp, x)
    f = np.asarray(eigen.f, dtype=complex)
    y1, y2 = w1 * f[:, 0], f[:, 1] / w2
    Y1 = red.weights.b1 * y1 + red.weights.b2 * y2
    Y2 = y1 + y2
    a1, a2 = sp.coefficient_values(x)

    def cum(v):
        return (cumulative_simpson(v.real, x=x, initial=0)
                + 1j * cumulative_simpson(v.imag, x=x, initial=0))

    u = cum(Y1)
    r1 = Y2 - 1j * lam * u
    p, s = sp.beta1 * sp.beta2, sp.beta1 + sp.beta2
    r2 = (-p * (Y1 - Y1[0]) + s * (Y2 - Y2[0])
          - cum(1j * lam * Y2 + a1 * Y1 + a2 * Y2))
    bnd = [Y2[0], sp.h0 * Y1[0] + sp.h1 * Y1[-1] + sp.h2 * Y2[-1]]
    scale = float(np.max(np.abs(np.concatenate([Y1, Y2]))))
    res = max(float(np.max(np.abs(r1))), float(np.max(np.abs(r2))), *(abs(v) for v in bnd))
    return res / scale
