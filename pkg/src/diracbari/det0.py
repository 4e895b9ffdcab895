"""Zeros of the unperturbed characteristic determinant.

    Delta0(l) = d + a exp(i(b1+b2)l) + (ad - bc) exp(i b1 l) + exp(i b2 l)

Three solvers are provided: explicit arithmetic progressions for
``b = c = 0``, a polynomial in ``exp(i b0 l)`` for declared rational
weights, and an argument-principle box search that works in general.
All return the same record type with the same ordering and indexing
convention, so their outputs can be compared entry by entry.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage

from ._winding import Box, box_winding, box_zeros_by_moments
from .bc import CanonicalBC, DiracWeights, char_polynomial, is_regular, tol_det
from .errors import ContourThroughZero, InternalInconsistency, NotRegular, WrongCase

MULT_TOL = 1e-6
TIE_TOL = 1e-9
DUP_TOL = 1e-9
MAX_RETRIES = 5
_SPLIT_FRACS = (0.5137, 0.4709, 0.5421, 0.4483, 0.5613)


class Method(enum.Enum):
    CLOSED_FORM = "ClosedForm"
    POLYNOMIAL = "PolynomialReduction"
    CONTOUR = "Contour"


@dataclass(frozen=True)
class SpectrumWindow:
    """Either ``n_side`` indices on each side of 0, or a range of ``Re lambda``."""

    n_side: int | None = 16
    re_range: tuple[float, float] | None = None

    def __post_init__(self):
        if self.re_range is not None:
            lo, hi = self.re_range
            if not lo < hi:
                raise ValueError(f"empty re_range {self.re_range}")
            object.__setattr__(self, "n_side", None)
        elif self.n_side is None or self.n_side < 1:
            raise ValueError("n_side must be >= 1")


@dataclass(frozen=True)
class Eigenvalue:
    index: int
    value: complex
    multiplicity: int
    residual: float
    method: Method


@dataclass(frozen=True)
class ZeroSequences:
    e1: np.ndarray = field(repr=False)
    e2: np.ndarray = field(repr=False)
    z: np.ndarray = field(repr=False)
    indices: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class SeparationStats:
    min_gap: float
    incompressibility_d: int
    is_asymptotically_separated: bool
    sep_tol: float


def values(zeros) -> np.ndarray:
    return np.array([z.value for z in zeros], dtype=complex)


def indices(zeros) -> np.ndarray:
    return np.array([z.index for z in zeros], dtype=int)


# ---------------------------------------------------------------------------
# the determinant


def delta0(lam, bc: CanonicalBC, w: DiracWeights):
    lam = np.asarray(lam, dtype=complex)
    b1, b2 = w.b1, w.b2
    out = (bc.d + bc.a * np.exp(1j * (b1 + b2) * lam)
           + bc.u * np.exp(1j * b1 * lam) + np.exp(1j * b2 * lam))
    return out if out.ndim else complex(out)


def delta0_prime(lam, bc: CanonicalBC, w: DiracWeights):
    lam = np.asarray(lam, dtype=complex)
    b1, b2 = w.b1, w.b2
    out = (1j * (b1 + b2) * bc.a * np.exp(1j * (b1 + b2) * lam)
           + 1j * b1 * bc.u * np.exp(1j * b1 * lam) + 1j * b2 * np.exp(1j * b2 * lam))
    return out if out.ndim else complex(out)


def delta0_derivative(lam, bc: CanonicalBC, w: DiracWeights, k: int):
    """``k``-th derivative of Delta0."""
    if k == 0:
        return delta0(lam, bc, w)
    lam = np.asarray(lam, dtype=complex)
    b1, b2 = w.b1, w.b2
    out = ((1j * (b1 + b2)) ** k * bc.a * np.exp(1j * (b1 + b2) * lam)
           + (1j * b1) ** k * bc.u * np.exp(1j * b1 * lam) + (1j * b2) ** k * np.exp(1j * b2 * lam))
    return out if out.ndim else complex(out)


def res_tol(bc: CanonicalBC) -> float:
    return 1e-10 * (2.0 + abs(bc.d) + abs(bc.a) + abs(bc.u))


def mean_gap(w: DiracWeights) -> float:
    return 2 * math.pi / (w.b2 - w.b1)


def strip_height(bc: CanonicalBC, w: DiracWeights) -> float:
    """Certified half-width ``h`` of a horizontal strip holding every zero.

    Above the strip ``(ad-bc) exp(i b1 l)`` outweighs the other three terms,
    below it ``exp(i b2 l)`` does.  Both margins are monotone in ``h``, so a
    doubling search followed by bisection gives the smallest certified
    height up to a relative ``1e-8``.
    """
    if not is_regular(bc):
        raise NotRegular(f"ad - bc = {bc.u} vanishes")
    b1, b2 = w.b1, w.b2
    A, D, U = abs(bc.a), abs(bc.d), abs(bc.u)

    def certified(h):
        # divide each inequality by its dominant term
        upper = D * math.exp(b1 * h) + A * math.exp(-b2 * h) + math.exp(-(b2 - b1) * h) < U
        lower = D * math.exp(-b2 * h) + A * math.exp(b1 * h) + U * math.exp((b1 - b2) * h) < 1.0
        return upper and lower

    hi = 1.0
    while not certified(hi):
        hi *= 2.0
        if hi > 1e6:
            raise NotRegular("no certified strip (coefficients out of range)")
    lo = 0.0
    if certified(0.0):
        return 0.0
    while hi - lo > 1e-8 * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if certified(mid):
            hi = mid
        else:
            lo = mid
    return hi


# ---------------------------------------------------------------------------
# ordering and indexing


def _sort_key_order(vals: np.ndarray) -> np.ndarray:
    """Order by Re, with Re-values within TIE_TOL of each other ordered by Im."""
    order = np.argsort(vals.real, kind="stable")
    out = []
    i = 0
    while i < len(order):
        j = i + 1
        while j < len(order) and vals[order[j]].real - vals[order[i]].real <= TIE_TOL:
            j += 1
        group = order[i:j]
        out.extend(group[np.argsort(vals[group].imag, kind="stable")])
        i = j
    return np.array(out, dtype=int)


def _assign_indices(records: list[tuple[complex, int]], method: Method, bc, w,
                    win: SpectrumWindow) -> list[Eigenvalue] | None:
    """Sort, index from the smallest ``|Re|``, and cut to the window.

    Returns ``None`` when the computed range does not reach ``n_side``
    zeros on both sides.
    """
    if not records:
        return None
    vals = np.array([r[0] for r in records], dtype=complex)
    mult = np.array([r[1] for r in records], dtype=int)
    order = _sort_key_order(vals)
    vals, mult = vals[order], mult[order]
    absre = np.abs(vals.real)
    i0 = int(np.nonzero(absre <= absre.min() + TIE_TOL)[0][0])
    idx = np.arange(len(vals)) - i0
    if win.n_side is not None:
        if i0 < win.n_side or len(vals) - 1 - i0 < win.n_side:
            return None
        keep = np.abs(idx) <= win.n_side
    else:
        lo, hi = win.re_range
        keep = (vals.real >= lo) & (vals.real <= hi)
    res = np.abs(delta0(vals, bc, w))
    return [Eigenvalue(int(n), complex(v), int(m), float(r), method)
            for n, v, m, r, k in zip(idx, vals, mult, res, keep) if k]


def _initial_radius(win: SpectrumWindow, w: DiracWeights) -> float:
    g = mean_gap(w)
    if win.n_side is not None:
        return (win.n_side + 4) * g
    lo, hi = win.re_range
    return max(abs(lo), abs(hi)) + 2 * g


def _windowed(collect, method: Method, bc, w, win: SpectrumWindow) -> list[Eigenvalue]:
    """Grow the half-width ``R`` until the window is covered."""
    R = _initial_radius(win, w)
    for _ in range(40):
        records = collect(R)
        out = _assign_indices(records, method, bc, w, win)
        if out is not None:
            if win.re_range is None or (R > max(abs(win.re_range[0]), abs(win.re_range[1]))):
                return out
        R *= 1.5
    raise InternalInconsistency("window could not be filled")


# ---------------------------------------------------------------------------
# closed form (b = c = 0)


def _merge(vals: np.ndarray, mult: np.ndarray, tol: float) -> list[tuple[complex, int]]:
    """Merge values closer than ``tol``, summing multiplicities."""
    order = _sort_key_order(vals)
    out: list[list] = []
    for k in order:
        v, m = vals[k], mult[k]
        for rec in out[-4:]:
            if abs(rec[0] - v) <= tol:
                rec[1] += m
                break
        else:
            out.append([v, m])
    return [(complex(v), int(m)) for v, m in out]


def closed_form_progressions(bc: CanonicalBC, w: DiracWeights, R: float):
    """The two progressions ``lambda_{1,n}`` and ``lambda_{2,n}`` with ``|Re| <= R``."""
    a, d = bc.a, bc.d
    b1, b2 = w.b1, w.b2
    base1 = np.angle(-1 / a)
    base2 = np.angle(-d)
    n1 = np.arange(math.floor((-R * abs(b1) - base1) / (2 * math.pi)) - 1,
                   math.ceil((R * abs(b1) - base1) / (2 * math.pi)) + 2)
    n2 = np.arange(math.floor((-R * b2 - base2) / (2 * math.pi)) - 1,
                   math.ceil((R * b2 - base2) / (2 * math.pi)) + 2)
    l1 = (base1 + 2 * math.pi * n1) / b1 + 1j * math.log(abs(a)) / b1
    l2 = (base2 + 2 * math.pi * n2) / b2 - 1j * math.log(abs(d)) / b2
    return (n1[np.abs(l1.real) <= R], l1[np.abs(l1.real) <= R],
            n2[np.abs(l2.real) <= R], l2[np.abs(l2.real) <= R])


def zeros_closed_form(bc: CanonicalBC, w: DiracWeights, win: SpectrumWindow) -> list[Eigenvalue]:
    """Zeros for ``b = c = 0``: two arithmetic progressions, merged."""
    tol = tol_det(bc.coefficients())
    if abs(bc.b) > tol or abs(bc.c) > tol:
        raise WrongCase("closed form needs b = c = 0")
    if abs(bc.a) <= tol or abs(bc.d) <= tol:
        raise NotRegular("closed form needs a d != 0")

    def collect(R):
        _, l1, _, l2 = closed_form_progressions(bc, w, R)
        vals = np.concatenate([l1, l2])
        return _merge(vals, np.ones(len(vals), dtype=int), DUP_TOL)

    return _windowed(collect, Method.CLOSED_FORM, bc, w, win)


def branch_of(lam: complex, bc: CanonicalBC, w: DiracWeights) -> int:
    """1 if ``1 + a exp(i b1 l)`` vanishes at ``l``, else 2 (for ``b = c = 0``)."""
    r1 = abs(1 + bc.a * np.exp(1j * w.b1 * lam))
    r2 = abs(1 + bc.d * np.exp(-1j * w.b2 * lam))
    return 1 if r1 < r2 else 2


# ---------------------------------------------------------------------------
# polynomial reduction (declared rational weights)


def _newton(z: complex, bc, w, m: int = 1, maxit: int = 50) -> complex:
    """Newton iteration on Delta0, or on its ``(m-1)``-th derivative for an ``m``-fold zero.

    The derivative has a simple zero there, so the iteration keeps full
    accuracy instead of stalling at ``sqrt(eps)``.
    """
    for _ in range(maxit):
        fp = delta0_derivative(z, bc, w, m)
        if fp == 0:
            break
        step = delta0_derivative(z, bc, w, m - 1) / fp
        z = z - step
        if abs(step) <= 4e-16 * (1 + abs(z)):
            break
    return z


def _cluster(points: np.ndarray, tol: float) -> list[np.ndarray]:
    """Groups of points closer than ``tol`` (single linkage)."""
    n = len(points)
    if n == 1:
        return [np.array([0])]
    X = np.column_stack([points.real, points.imag])
    labels = fcluster(linkage(X, method="single"), t=tol, criterion="distance")
    return [np.nonzero(labels == k)[0] for k in np.unique(labels)]


def polynomial_roots(bc: CanonicalBC, w: DiracWeights) -> list[tuple[complex, int]]:
    """Distinct roots ``mu`` of the reduced polynomial with multiplicities."""
    coef = char_polynomial(bc, w)
    mu = np.roots(coef)  # companion-matrix eigenvalues
    b0 = w.rational[2]
    out = []
    for grp in _cluster(mu, MULT_TOL * b0):
        out.append((complex(np.mean(mu[grp])), len(grp)))
    return out


def zeros_polynomial(bc: CanonicalBC, w: DiracWeights, win: SpectrumWindow) -> list[Eigenvalue]:
    """Zeros via the roots of ``Delta0(l) exp(-i b1 l)`` as a polynomial in ``exp(i b0 l)``."""
    if w.rational is None:
        raise WrongCase("polynomial reduction needs declared rational weights")
    if not is_regular(bc):
        raise NotRegular(f"ad - bc = {bc.u} vanishes")
    b0 = w.rational[2]
    roots = polynomial_roots(bc, w)

    def collect(R):
        vals, mult = [], []
        for mu, m in roots:
            base = np.angle(mu)
            ks = np.arange(math.floor((-R * b0 - base) / (2 * math.pi)) - 1,
                           math.ceil((R * b0 - base) / (2 * math.pi)) + 2)
            lam = (base + 2 * math.pi * ks) / b0 - 1j * math.log(abs(mu)) / b0
            lam = lam[np.abs(lam.real) <= R]
            lam = np.array([_newton(z, bc, w, m) for z in lam], dtype=complex)
            vals.extend(lam)
            mult.extend([m] * len(lam))
        if not vals:
            return []
        return _merge(np.array(vals), np.array(mult), DUP_TOL)

    return _windowed(collect, Method.POLYNOMIAL, bc, w, win)


# ---------------------------------------------------------------------------
# contour search


def _zero_tol(bc: CanonicalBC) -> float:
    return 1e-13 * (2.0 + abs(bc.d) + abs(bc.a) + abs(bc.u))


def _solve_box(box: Box, count: int, f, fp, bc, w, depth: int = 0) -> list[tuple[complex, int]]:
    """Zeros in ``box`` given its winding number ``count``."""
    if count == 0:
        return []
    zt = _zero_tol(bc)
    dens = 4 * (abs(w.b1) + w.b2)
    cluster_size = 0.05 * mean_gap(w)
    if count == 1 or box.diameter < cluster_size or depth > 60:
        pts = box_zeros_by_moments(f, fp, box, count)
        if pts is not None:
            out = []
            for grp in _cluster(pts, MULT_TOL):
                m = len(grp)
                z = _newton(complex(np.mean(pts[grp])), bc, w, m)
                if box.contains(z, slack=1e-9 * (1 + box.diameter)) and \
                        abs(delta0(z, bc, w)) <= res_tol(bc):
                    out.append((z, m))
            if sum(m for _, m in out) == count:
                return out
        if box.diameter < MULT_TOL:
            raise InternalInconsistency(f"cannot resolve {count} zeros near {box.center}")
    last = None
    for frac in _SPLIT_FRACS:
        try:
            kids = box.split(frac)
            counts = [box_winding(f, k, zt, dens) for k in kids]
        except ContourThroughZero as exc:
            last = exc
            continue
        if sum(counts) != count:
            last = InternalInconsistency(f"child counts {counts} do not add to {count}")
            continue
        out = []
        for k, c in zip(kids, counts):
            out.extend(_solve_box(k, c, f, fp, bc, w, depth + 1))
        return out
    raise last


def _contour_records(bc: CanonicalBC, w: DiracWeights, R: float, H: float,
                     offset: float) -> list[tuple[complex, int]]:
    f = lambda z: delta0(z, bc, w)
    fp = lambda z: delta0_prime(z, bc, w)
    g = mean_gap(w)
    kmin = math.floor((-R - offset) / g)
    kmax = math.ceil((R - offset) / g)
    edges = offset + g * np.arange(kmin, kmax + 1)
    zt = _zero_tol(bc)
    dens = 4 * (abs(w.b1) + w.b2)
    out = []
    for x0, x1 in zip(edges[:-1], edges[1:]):
        box = Box(float(x0), float(x1), -H, H)
        count = box_winding(f, box, zt, dens)
        out.extend(_solve_box(box, count, f, fp, bc, w))
    return out


def zeros_contour(bc: CanonicalBC, w: DiracWeights, win: SpectrumWindow) -> list[Eigenvalue]:
    """Zeros by winding numbers on boxes tiling ``|Re| <= R``, ``|Im| <= h + 1``.

    Boxes are split until they hold one zero or shrink below a cluster
    size; the zeros of each final box come from its contour moments and are
    polished by Newton's method.  Zeros closer than ``MULT_TOL`` are
    reported once with their total multiplicity.
    """
    if not is_regular(bc):
        raise NotRegular(f"ad - bc = {bc.u} vanishes")
    H = strip_height(bc, w) + 1.0
    g = mean_gap(w)

    def collect(R):
        last = None
        for attempt in range(MAX_RETRIES):
            offset = math.fmod(0.3819660112501051 + 0.6180339887498949 * attempt, 1.0) * g
            try:
                recs = _contour_records(bc, w, R, H, offset)
            except ContourThroughZero as exc:
                last = exc
                continue
            return _merge(np.array([r[0] for r in recs], dtype=complex),
                          np.array([r[1] for r in recs], dtype=int), MULT_TOL)
        raise last

    return _windowed(collect, Method.CONTOUR, bc, w, win)


def zeros(bc: CanonicalBC, w: DiracWeights, win: SpectrumWindow,
          method: Method | None = None) -> list[Eigenvalue]:
    """Dispatch to the most explicit applicable solver (or the one requested)."""
    if method is None:
        tol = tol_det(bc.coefficients())
        if abs(bc.b) <= tol and abs(bc.c) <= tol and abs(bc.a) > tol and abs(bc.d) > tol:
            method = Method.CLOSED_FORM
        elif w.rational is not None:
            method = Method.POLYNOMIAL
        else:
            method = Method.CONTOUR
    solver = {Method.CLOSED_FORM: zeros_closed_form, Method.POLYNOMIAL: zeros_polynomial,
              Method.CONTOUR: zeros_contour}[method]
    return solver(bc, w, win)


# ---------------------------------------------------------------------------
# derived sequences and diagnostics


def derive_sequences(zs, bc: CanonicalBC, w: DiracWeights) -> ZeroSequences:
    """``e1 = exp(i b1 l)``, ``e2 = exp(-i b2 l)`` and ``z = (1 + d e2) conj(1 + a e1)``."""
    lam = values(zs)
    if lam.size == 0:
        raise ValueError("no zeros given")
    e1 = np.exp(1j * w.b1 * lam)
    e2 = np.exp(-1j * w.b2 * lam)
    z = (1 + bc.d * e2) * np.conj(1 + bc.a * e1)
    if is_regular(bc):
        lhs = (1 + bc.a * e1) * (1 + bc.d * e2)
        rhs = bc.b * bc.c * e1 * e2
        scale = 1 + np.abs(bc.a * e1) + np.abs(bc.d * e2) + np.abs(bc.u * e1 * e2)
        bad = np.abs(lhs - rhs) > 1e-8 * scale
        if bad.any():
            k = int(np.argmax(np.abs(lhs - rhs) / scale))
            raise InternalInconsistency(f"factorised determinant fails at {lam[k]}")
    return ZeroSequences(e1, e2, z, indices(zs))


def _outer_half(idx: np.ndarray) -> np.ndarray:
    m = np.max(np.abs(idx))
    return np.abs(idx) >= m / 2


def separation_stats(zs, sep_tol: float | None = None) -> SeparationStats:
    """Outer-half minimal gap and the incompressibility constant.

    The incompressibility constant is the largest number of zeros (with
    multiplicity) whose real parts fit in a window ``|Re l - t| <= 1``.
    The default ``sep_tol`` is ``1e-3`` of the observed mean spacing.
    """
    if sum(z.multiplicity for z in zs) < 2:
        raise ValueError("need at least two zeros")
    lam = values(zs)
    mult = np.array([z.multiplicity for z in zs])
    idx = indices(zs)

    outer = _outer_half(idx)
    if np.any(mult[outer] > 1):
        min_gap = 0.0
    else:
        pts = lam[outer]
        if len(pts) < 2:
            min_gap = math.inf
        else:
            dist = np.abs(pts[:, None] - pts[None, :])
            np.fill_diagonal(dist, np.inf)
            min_gap = float(dist.min())

    re = np.repeat(lam.real, mult)
    re.sort()
    hi = np.searchsorted(re, re + 2.0 + 1e-12, side="right")
    d = int(np.max(hi - np.arange(len(re))))

    if sep_tol is None:
        span = re[-1] - re[0]
        sep_tol = 1e-3 * span / max(len(re) - 1, 1)
    return SeparationStats(min_gap, d, bool(min_gap > sep_tol), float(sep_tol))


def limit_point_census(seq, eps: float, idx=None) -> int:
    """Number of ``eps``-clusters among the tail of ``seq``.

    The tail is ``|n| >= max|n|/2`` when indices are given, otherwise the
    second half.  Clusters are cuts of a complete-linkage dendrogram at
    diameter ``2 eps``; nested cuts make the count nonincreasing in ``eps``.
    """
    seq = np.asarray(seq, dtype=complex)
    if seq.size < 16:
        raise ValueError("need at least 16 terms")
    if idx is None:
        tail = seq[seq.size // 2:]
    else:
        tail = seq[_outer_half(np.asarray(idx))]
    order = np.lexsort((tail.imag, tail.real))
    tail = tail[order]
    if tail.size == 1:
        return 1
    X = np.column_stack([tail.real, tail.imag])
    labels = fcluster(linkage(X, method="complete"), t=2 * eps, criterion="distance")
    return int(labels.max())


def weyl_census(beta: float, M: int, intervals) -> list[int]:
    """Counts of ``{beta m}`` for ``m = -M..M`` in each closed interval."""
    if M < 1:
        raise ValueError("M must be >= 1")
    m = np.arange(-M, M + 1)
    frac = np.mod(beta * m, 1.0)
    out = []
    for lo, hi in intervals:
        if not 0.0 <= lo <= hi <= 1.0:
            raise ValueError(f"invalid interval [{lo}, {hi}]")
        out.append(int(np.count_nonzero((frac >= lo) & (frac <= hi))))
    return out
