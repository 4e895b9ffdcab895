"""Argument-principle helpers: phase tracking along paths and contour moments.

All functions take ``f`` vectorised over complex arrays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ContourThroughZero

PHASE_STEP = math.pi / 2


def path_phase(f, path, n0: int, zero_tol: float, *, max_points: int = 1 << 18) -> float:
    """Total continuous change of ``arg f`` along ``path(t)``, ``t`` in [0, 1].

    Samples are refined where consecutive phase increments reach
    ``PHASE_STEP``; a sample with ``|f| < zero_tol`` or an unresolvable
    segment raises :class:`ContourThroughZero`.
    """
    t = np.linspace(0.0, 1.0, max(n0, 2) + 1)
    v = np.asarray(f(path(t)), dtype=complex)
    while True:
        if np.min(np.abs(v)) < zero_tol:
            k = int(np.argmin(np.abs(v)))
            raise ContourThroughZero(f"|f| = {abs(v[k]):.3e} at {complex(path(t[k:k+1])[0])}")
        dphi = np.angle(v[1:] / v[:-1])
        bad = np.abs(dphi) >= PHASE_STEP
        if not bad.any():
            return float(dphi.sum())
        if np.min(np.diff(t)[bad]) < 1e-13 or t.size > max_points:
            raise ContourThroughZero("phase does not resolve along the contour")
        tm = 0.5 * (t[:-1][bad] + t[1:][bad])
        vm = np.asarray(f(path(tm)), dtype=complex)
        t = np.concatenate([t, tm])
        v = np.concatenate([v, vm])
        order = np.argsort(t, kind="stable")
        t, v = t[order], v[order]


def segment(z0: complex, z1: complex):
    return lambda t: z0 + (z1 - z0) * t


@dataclass(frozen=True)
class Box:
    x0: float
    x1: float
    y0: float
    y1: float

    @property
    def corners(self):
        return (complex(self.x0, self.y0), complex(self.x1, self.y0),
                complex(self.x1, self.y1), complex(self.x0, self.y1))

    @property
    def center(self) -> complex:
        return complex(0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))

    @property
    def diameter(self) -> float:
        return math.hypot(self.x1 - self.x0, self.y1 - self.y0)

    def contains(self, z: complex, slack: float = 0.0) -> bool:
        return (self.x0 - slack <= z.real <= self.x1 + slack
                and self.y0 - slack <= z.imag <= self.y1 + slack)

    def split(self, frac: float) -> tuple["Box", "Box"]:
        """Cut the longer side at ``frac`` of its length."""
        if self.x1 - self.x0 >= self.y1 - self.y0:
            xm = self.x0 + frac * (self.x1 - self.x0)
            return Box(self.x0, xm, self.y0, self.y1), Box(xm, self.x1, self.y0, self.y1)
        ym = self.y0 + frac * (self.y1 - self.y0)
        return Box(self.x0, self.x1, self.y0, ym), Box(self.x0, self.x1, ym, self.y1)


def box_winding(f, box: Box, zero_tol: float, density: float) -> int:
    """Number of zeros of ``f`` inside ``box`` (counted with multiplicity)."""
    c = box.corners
    total = 0.0
    for k in range(4):
        z0, z1 = c[k], c[(k + 1) % 4]
        n0 = int(math.ceil(8 + density * abs(z1 - z0)))
        total += path_phase(f, segment(z0, z1), n0, zero_tol)
    return int(round(total / (2 * math.pi)))


def disk_winding(f, center: complex, radius: float, zero_tol: float, n0: int = 32) -> int:
    path = lambda t: center + radius * np.exp(2j * math.pi * t)
    return int(round(path_phase(f, path, n0, zero_tol) / (2 * math.pi)))


@lru_cache(maxsize=None)
def _gauss(n: int):
    return np.polynomial.legendre.leggauss(n)


def box_moments(f, fprime, box: Box, kmax: int, n: int) -> np.ndarray:
    """``s_p = (1/2 pi i) oint zeta^p f'/f dz`` for ``p = 0..kmax``.

    ``zeta = (z - c)/rho`` is the box-centred, scaled coordinate.
    Gauss-Legendre with ``n`` nodes on each edge.
    """
    x, wts = _gauss(n)
    c = box.center
    rho = 0.5 * box.diameter
    corners = box.corners
    s = np.zeros(kmax + 1, dtype=complex)
    for k in range(4):
        z0, z1 = corners[k], corners[(k + 1) % 4]
        half = 0.5 * (z1 - z0)
        z = z0 + half * (x + 1.0)
        ratio = fprime(z) / f(z) * half * wts
        zeta = (z - c) / rho
        powers = zeta[None, :] ** np.arange(kmax + 1)[:, None]
        s += powers @ ratio
    return s / (2j * math.pi)


def roots_from_power_sums(p: np.ndarray) -> np.ndarray:
    """Roots of the monic polynomial whose power sums are ``p[1..k]``."""
    k = len(p) - 1
    e = np.zeros(k + 1, dtype=complex)
    e[0] = 1.0
    for j in range(1, k + 1):
        acc = 0j
        for i in range(1, j + 1):
            acc += (-1) ** (i - 1) * e[j - i] * p[i]
        e[j] = acc / j
    coef = np.array([(-1) ** j * e[j] for j in range(k + 1)])
    if k == 1:
        return np.array([-coef[1]])
    return np.roots(coef)


def box_zeros_by_moments(f, fprime, box: Box, k: int, *, n_start: int = 32,
                         n_max: int = 256) -> np.ndarray | None:
    """Locate the ``k`` zeros inside ``box`` from contour moments.

    Returns ``None`` when the quadrature does not settle (zero too close to
    an edge for the node budget).
    """
    n = n_start
    prev = None
    while n <= n_max:
        s = box_moments(f, fprime, box, k, n)
        if prev is not None and abs(s[0] - k) < 1e-6 and np.max(np.abs(s - prev)) < 1e-11:
            break
        prev = s
        n *= 2
    else:
        return None
    zeta = roots_from_power_sums(s)
    return box.center + 0.5 * box.diameter * zeta
