"""Fundamental matrix, perturbed determinant, eigenvalues and eigenfunctions.

The system ``-i B^{-1} y' + Q(x) y = lam y`` is integrated as
``y' = i B (lam - Q(x)) y`` with classical RK4 and step doubling.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson

from . import _rk4
from ._winding import disk_winding
from .bc import CanonicalBC, DiracWeights, adjoint_bc
from .det0 import Eigenvalue, Method, SpectrumWindow, zeros as zeros0
from .errors import (
    ContourThroughZero, InternalInconsistency, LocalizationFailure, NotAnEigenvalue,
    StepUnderflow,
)

ODE_TOL = 1e-10
MAX_STEPS = 1 << 22
MULT_TOL = 1e-6
EIG_TOL = 1e-6


class PotentialKind(enum.Enum):
    ZERO = "Zero"
    CALLABLE = "Callable"
    SAMPLED = "Sampled"


@dataclass(frozen=True, eq=False)
class Potential:
    """Off-diagonal potential ``Q = [[0, q12], [q21, 0]]``.

    Callables must accept numpy arrays.  Sampled entries share one strictly
    increasing grid covering [0, 1] and are interpolated piecewise linearly.
    """

    kind: PotentialKind
    q12: object = None
    q21: object = None
    grid: np.ndarray | None = None
    p_class: float = 2.0
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if not 1.0 <= self.p_class <= 2.0:
            raise ValueError("p_class must lie in [1, 2]")
        if self.kind is PotentialKind.SAMPLED:
            x = np.asarray(self.grid, dtype=float)
            q12 = np.asarray(self.q12, dtype=complex)
            q21 = np.asarray(self.q21, dtype=complex)
            if x.ndim != 1 or x.size < 2 or q12.shape != x.shape or q21.shape != x.shape:
                raise ValueError("sampled potential needs matching 1-d arrays with m >= 2")
            if np.any(np.diff(x) <= 0) or x[0] > 0 or x[-1] < 1:
                raise ValueError("grid must be strictly increasing and cover [0, 1]")
            object.__setattr__(self, "grid", x)
            object.__setattr__(self, "q12", q12)
            object.__setattr__(self, "q21", q21)

    @classmethod
    def zero(cls) -> "Potential":
        return cls(PotentialKind.ZERO)

    @classmethod
    def from_callables(cls, q12, q21, p_class: float = 2.0) -> "Potential":
        return cls(PotentialKind.CALLABLE, q12, q21, p_class=p_class)

    @classmethod
    def constant(cls, g12: complex, g21: complex) -> "Potential":
        g12, g21 = complex(g12), complex(g21)
        return cls.from_callables(lambda x: np.full(np.shape(x), g12),
                                  lambda x: np.full(np.shape(x), g21))

    @classmethod
    def sampled(cls, x, q12, q21, p_class: float = 2.0) -> "Potential":
        return cls(PotentialKind.SAMPLED, q12, q21, grid=x, p_class=p_class)

    def __call__(self, x) -> tuple[np.ndarray, np.ndarray]:
        x = np.asarray(x, dtype=float)
        if self.kind is PotentialKind.ZERO:
            z = np.zeros(x.shape, dtype=complex)
            return z, z.copy()
        if self.kind is PotentialKind.CALLABLE:
            q12 = np.broadcast_to(np.asarray(self.q12(x), dtype=complex), x.shape)
            q21 = np.broadcast_to(np.asarray(self.q21(x), dtype=complex), x.shape)
            return np.array(q12), np.array(q21)
        g = self.grid
        interp = lambda v: np.interp(x, g, v.real) + 1j * np.interp(x, g, v.imag)
        return interp(self.q12), interp(self.q21)

    def nodes(self, N: int) -> tuple[np.ndarray, np.ndarray]:
        """Values on the ``2N + 1`` RK4 nodes, cached per ``N``."""
        if N not in self._cache:
            x = np.linspace(0.0, 1.0, 2 * N + 1)
            q12, q21 = self(x)
            self._cache[N] = (np.ascontiguousarray(q12), np.ascontiguousarray(q21))
        return self._cache[N]

    def adjoint(self) -> "Potential":
        """``Q* = [[0, conj q21], [conj q12, 0]]``."""
        if self.kind is PotentialKind.ZERO:
            return self
        if self.kind is PotentialKind.SAMPLED:
            return Potential.sampled(self.grid, np.conj(self.q21), np.conj(self.q12), self.p_class)
        f12, f21 = self.q12, self.q21
        return Potential.from_callables(lambda x: np.conj(np.asarray(f21(x), dtype=complex)),
                                        lambda x: np.conj(np.asarray(f12(x), dtype=complex)),
                                        self.p_class)

    def l2_norm(self, m: int = 4097) -> float:
        x = np.linspace(0.0, 1.0, m)
        q12, q21 = self(x)
        return float(math.sqrt(simpson(np.abs(q12) ** 2 + np.abs(q21) ** 2, x=x)))

    def sup_norm(self, m: int = 1025) -> float:
        if self.kind is PotentialKind.ZERO:
            return 0.0
        if self.kind is PotentialKind.SAMPLED:
            return float(max(np.max(np.abs(self.q12)), np.max(np.abs(self.q21))))
        q12, q21 = self(np.linspace(0.0, 1.0, m))
        return float(max(np.max(np.abs(q12)), np.max(np.abs(q21))))

    @property
    def is_zero(self) -> bool:
        return self.kind is PotentialKind.ZERO


@dataclass(frozen=True)
class FundamentalMatrix:
    lam: complex
    grid: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    steps: int = 0

    @property
    def phi_at_1(self) -> np.ndarray:
        return self.values[-1]


@dataclass(frozen=True)
class EigenFunction:
    lam: complex
    grid: np.ndarray = field(repr=False)
    f: np.ndarray = field(repr=False)
    bc_residual: float
    degenerate: bool = False

    def component(self, j: int) -> np.ndarray:
        return self.f[:, j]


@dataclass(frozen=True)
class PerturbedSpectrum:
    zeros: list[Eigenvalue]
    reference: list[Eigenvalue]
    failures: list[int]

    @property
    def drift(self) -> np.ndarray:
        ref = {z.index: z.value for z in self.reference}
        return np.array([abs(z.value - ref[z.index]) for z in self.zeros])


# ---------------------------------------------------------------------------
# integration


def _exact_free(lam: complex, w: DiracWeights, x: np.ndarray) -> np.ndarray:
    out = np.zeros((x.size, 2, 2), dtype=complex)
    out[:, 0, 0] = np.exp(1j * w.b1 * lam * x)
    out[:, 1, 1] = np.exp(1j * w.b2 * lam * x)
    return out


def _initial_steps(q: Potential, w: DiracWeights, lam: complex) -> int:
    omega = max(abs(w.b1), w.b2) * (abs(lam) + q.sup_norm() + 1.0)
    return 1 << max(5, math.ceil(math.log2(4 * omega)))


def choose_steps(q: Potential, w: DiracWeights, lam: complex, *, tol: float = ODE_TOL,
                 multiple_of: int = 1) -> int:
    """Smallest ``N`` (doubling) with ``||Phi_N(1) - Phi_{N/2}(1)|| <= tol * scale``."""
    N = _initial_steps(q, w, lam)
    N = multiple_of * max(1, -(-N // multiple_of))
    prev = _end(q, w, lam, N)
    while True:
        N *= 2
        if N > MAX_STEPS:
            raise StepUnderflow(f"more than {MAX_STEPS} steps needed at lam = {lam}")
        cur = _end(q, w, lam, N)
        scale = max(1.0, float(np.max(np.abs(cur))))
        if np.max(np.abs(cur - prev)) <= tol * scale:
            return N
        prev = cur


def _end(q: Potential, w: DiracWeights, lam: complex, N: int) -> np.ndarray:
    q12, q21 = q.nodes(N)
    return _rk4.phi_end_many(np.array([lam], dtype=complex), w.b1, w.b2, q12, q21, N)[0]


def phi_at_1_many(q: Potential, w: DiracWeights, lams, N: int) -> np.ndarray:
    """``Phi(1, lam)`` for an array of ``lam`` with a fixed step count."""
    lams = np.ascontiguousarray(np.atleast_1d(np.asarray(lams, dtype=complex)))
    if q.is_zero:
        out = np.zeros((lams.size, 2, 2), dtype=complex)
        out[:, 0, 0] = np.exp(1j * w.b1 * lams)
        out[:, 1, 1] = np.exp(1j * w.b2 * lams)
        return out
    q12, q21 = q.nodes(N)
    return _rk4.phi_end_many(lams, w.b1, w.b2, q12, q21, N)


def fundamental_matrix(q: Potential, w: DiracWeights, lam: complex, m: int = 1025,
                       *, tol: float = ODE_TOL) -> FundamentalMatrix:
    """``Phi(x, lam)`` on the uniform grid of ``m`` points.

    The step count is a power-of-two multiple of ``m - 1`` chosen by step
    doubling on ``Phi(1)``.  The zero potential uses the exact exponentials.
    """
    if m < 2:
        raise ValueError("m must be >= 2")
    lam = complex(lam)
    x = np.linspace(0.0, 1.0, m)
    if q.is_zero:
        return FundamentalMatrix(lam, x, _exact_free(lam, w, x), 0)
    N = choose_steps(q, w, lam, tol=tol, multiple_of=m - 1)
    q12, q21 = q.nodes(N)
    vals = _rk4.phi_path(lam, w.b1, w.b2, q12, q21, N, N // (m - 1))
    return FundamentalMatrix(lam, x, vals, N)


# ---------------------------------------------------------------------------
# determinant


def boundary_matrix(rows: np.ndarray, phi1: np.ndarray) -> np.ndarray:
    """``[[U_j(Phi_k)]]`` for functionals ``rows`` acting on (y(0), y(1)).

    Works on a stack of ``Phi(1)`` matrices (shape ``(..., 2, 2)``).
    """
    rows = np.asarray(rows, dtype=complex)
    return rows[:, :2] + rows[:, 2:] @ phi1


def _rows(bc) -> np.ndarray:
    return bc.rows() if isinstance(bc, CanonicalBC) else np.asarray(getattr(bc, "A", bc))


def delta_q(lam, bc, w: DiracWeights, q: Potential, *, N: int | None = None):
    """Characteristic determinant of the perturbed problem.

    Equal to ``d + a e^{i(b1+b2)lam} + (ad-bc) phi11 + phi22 + c phi12 - b phi21``
    for canonical conditions.  ``bc`` may also be a raw 2x4 matrix.
    """
    scalar = np.ndim(lam) == 0
    lams = np.atleast_1d(np.asarray(lam, dtype=complex))
    if N is None and not q.is_zero:
        N = max(choose_steps(q, w, complex(l)) for l in lams[[0, -1]])
    phi = phi_at_1_many(q, w, lams, N or 0)
    out = np.linalg.det(boundary_matrix(_rows(bc), phi))
    return complex(out[0]) if scalar else out


def delta_q_expanded(phi1: np.ndarray, bc: CanonicalBC, w: DiracWeights, lam: complex) -> complex:
    """The explicit six-term expansion from ``Phi(1)`` (cross-check only)."""
    (p11, p12), (p21, p22) = phi1
    return (bc.d + bc.a * np.exp(1j * (w.b1 + w.b2) * lam) + bc.u * p11 + p22
            + bc.c * p12 - bc.b * p21)


# ---------------------------------------------------------------------------
# perturbed eigenvalues


def _res_scale(bc: CanonicalBC) -> float:
    return 2.0 + abs(bc.a) + abs(bc.b) + abs(bc.c) + abs(bc.d) + abs(bc.u)


def _newton_fd(f, z: complex, maxit: int = 40, tol: float = 1e-13) -> complex:
    """Newton with a central-difference derivative; three evaluations per step."""
    for _ in range(maxit):
        h = 1e-6 * (1 + abs(z))
        v = f(np.array([z, z + h, z - h]))
        d = (v[1] - v[2]) / (2 * h)
        if d == 0:
            break
        step = v[0] / d
        z = z - step
        if abs(step) <= tol * (1 + abs(z)):
            break
    return z


def _first_moment(f, center: complex, radius: float, n: int = 64) -> complex | None:
    """Mean of the zeros inside a circle from the argument principle."""
    t = np.arange(n) / n
    z = center + radius * np.exp(2j * math.pi * t)
    h = 1e-6 * (1 + abs(center))
    v = f(np.concatenate([z, z + h, z - h]))
    fz, fp = v[:n], (v[n:2 * n] - v[2 * n:]) / (2 * h)
    g = fp / fz * (z - center)
    s0 = np.mean(g)
    s1 = np.mean(g * z)
    k = round(s0.real)
    return None if k < 1 else complex(s1 / s0)


def perturbed_zeros(bc: CanonicalBC, w: DiracWeights, q: Potential, win: SpectrumWindow,
                    *, reference: list[Eigenvalue] | None = None,
                    max_growth: int = 2) -> PerturbedSpectrum:
    """Zeros of ``Delta_Q`` next to the unperturbed ones, with inherited indices.

    For each ``lam_n^0`` the zeros of ``Delta_Q`` are counted on a circle of
    radius half the distance to the nearest neighbour, doubled at most
    ``max_growth`` times (4x).  Newton's method with a central-difference
    derivative polishes the zero; indices with no zero are listed in
    ``failures``.
    """
    if reference is None:
        n_side = win.n_side if win.n_side is not None else None
        wide = SpectrumWindow(n_side + 1) if n_side is not None else SpectrumWindow(
            re_range=(win.re_range[0] - 10, win.re_range[1] + 10))
        ref_all = zeros0(bc, w, wide)
    else:
        ref_all = list(reference)
    vals = np.array([z.value for z in ref_all], dtype=complex)
    if win.n_side is not None:
        targets = [k for k, z in enumerate(ref_all) if abs(z.index) <= win.n_side]
    else:
        lo, hi = win.re_range
        targets = [k for k, z in enumerate(ref_all) if lo <= z.value.real <= hi]
    scale = _res_scale(bc)
    rows = bc.rows()
    out, ref, failures = [], [], []
    for k in targets:
        lam0 = ref_all[k].value
        others = np.delete(vals, k)
        r0 = 0.5 * float(np.min(np.abs(others - lam0))) if others.size else 1.0
        N = 0 if q.is_zero else choose_steps(q, w, lam0 + r0)

        def f(z, N=N):
            return np.linalg.det(boundary_matrix(rows, phi_at_1_many(q, w, z, N)))

        found = None
        for g in range(max_growth + 1):
            r = r0 * 2 ** g
            try:
                count = disk_winding(f, lam0, r, 1e-13 * scale)
            except ContourThroughZero:
                r *= 1.0137
                count = disk_winding(f, lam0, r, 1e-13 * scale)
            if count < 1:
                continue
            z = _newton_fd(f, lam0)
            if abs(z - lam0) >= r or not np.isfinite(z):
                start = _first_moment(f, lam0, r)
                z = _newton_fd(f, start) if start is not None else None
            if z is not None and np.isfinite(z) and abs(z - lam0) < r:
                found = z
                break
        if found is None:
            failures.append(ref_all[k].index)
            continue
        res = abs(complex(f(np.array([found]))[0]))
        out.append(Eigenvalue(ref_all[k].index, complex(found), 1, res, Method.CONTOUR))
        ref.append(ref_all[k])
    return PerturbedSpectrum(out, ref, failures)


def require_localized(spec: PerturbedSpectrum, frac: float = 0.1) -> None:
    """Raise when more than ``frac`` of the window failed to localise."""
    total = len(spec.zeros) + len(spec.failures)
    if total and len(spec.failures) > frac * total:
        raise LocalizationFailure(f"no zero found for indices {spec.failures}")


# ---------------------------------------------------------------------------
# eigenfunctions


def grid_size_for(lams, w: DiracWeights, q: Potential | None = None, *, min_m: int = 1025) -> int:
    """A power-of-two-plus-one grid resolving ``exp(i b lam x)`` for Simpson's rule."""
    lams = np.atleast_1d(np.asarray(lams, dtype=complex))
    omega = max(abs(w.b1), w.b2) * (float(np.max(np.abs(lams))) + 1.0)
    if q is not None:
        omega += max(abs(w.b1), w.b2) * q.sup_norm()
    n = max(min_m - 1, 1 << math.ceil(math.log2(omega / 0.02)))
    return n + 1


def l2_inner(f: np.ndarray, g: np.ndarray, x: np.ndarray) -> complex:
    """``(f, g) = int f . conj(g) dx`` by composite Simpson."""
    integrand = np.sum(f * np.conj(g), axis=-1)
    return complex(simpson(integrand.real, x=x) + 1j * simpson(integrand.imag, x=x))


def l2_norm(f: np.ndarray, x: np.ndarray) -> float:
    return math.sqrt(max(l2_inner(f, f, x).real, 0.0))


def fix_phase(f: np.ndarray, thresh: float = 1e-6) -> np.ndarray:
    """Rotate so the first component exceeding ``thresh`` is real positive."""
    for i in range(f.shape[0]):
        for j in range(f.shape[1]):
            if abs(f[i, j]) > thresh:
                return f * (abs(f[i, j]) / f[i, j])
    return f


def _eigenfunction(lam: complex, rows: np.ndarray, w: DiracWeights, q: Potential, m: int | None,
                   tol: float) -> EigenFunction:
    lam = complex(lam)
    if m is None:
        m = grid_size_for([lam], w, q)
    fm = fundamental_matrix(q, w, lam, m)
    M = boundary_matrix(rows, fm.phi_at_1)
    _, s, vh = np.linalg.svd(M)
    ref = np.linalg.norm(rows) * max(1.0, float(np.max(np.abs(fm.phi_at_1))))
    degenerate = bool(s[0] <= MULT_TOL * ref)
    if not degenerate and s[1] > tol * s[0]:
        raise NotAnEigenvalue(f"boundary matrix at {lam} has singular values {s}")
    v = vh.conj()[-1] if not degenerate else vh.conj()[0]
    f = fm.values @ v
    peak = float(np.max(np.abs(f)))
    if peak < 1e-8:
        raise InternalInconsistency("eigenfunction vanishes identically")
    f = f / l2_norm(f, fm.grid)
    f = fix_phase(f)
    resid = rows[:, :2] @ f[0] + rows[:, 2:] @ f[-1]
    return EigenFunction(lam, fm.grid, f, float(np.max(np.abs(resid))), degenerate)


def eigenfunction(lam: complex, bc, w: DiracWeights, q: Potential, m: int | None = None,
                  *, tol: float = EIG_TOL) -> EigenFunction:
    """Unit-norm eigenfunction from the null vector of the boundary matrix.

    ``tol`` bounds ``sigma_min / sigma_max`` of the boundary matrix;
    geometric multiplicity two is flagged through ``degenerate``.
    """
    return _eigenfunction(lam, _rows(bc), w, q, m, tol)


def adjoint_eigenfunction(lam: complex, bc: CanonicalBC, w: DiracWeights, q: Potential,
                          m: int | None = None, *, tol: float = EIG_TOL) -> EigenFunction:
    """Eigenfunction of the adjoint problem (adjoint conditions, ``Q*``) at ``conj(lam)``."""
    rows = adjoint_bc(bc, w).A
    return _eigenfunction(np.conj(complex(lam)), rows, w, q.adjoint(), m, tol)
