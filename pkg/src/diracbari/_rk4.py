"""Compiled classical RK4 kernel for ``Phi' = i B (lam - Q(x)) Phi``, ``Phi(0) = I``.

The free oscillation is factored out: ``Phi = E(x) Psi`` with
``E = diag(exp(i b1 lam x), exp(i b2 lam x))`` and

    Psi' = [[0, -i b1 q12 e^{i W x}], [-i b2 q21 e^{-i W x}, 0]] Psi,
    W = (b2 - b1) lam,

which RK4 integrates with an error proportional to ``|Q|`` rather than to
``|lam|``.  The potential enters through its values on the ``2N + 1``
nodes ``x = j h / 2`` (step endpoints and midpoints).
"""
from __future__ import annotations

import numpy as np
from numba import njit

_RESYNC = 64


@njit(cache=True)
def _column_step(y1, y2, B0, C0, Bm, Cm, B1, C1, h):
    k11 = B0 * y2
    k12 = C0 * y1
    k21 = Bm * (y2 + 0.5 * h * k12)
    k22 = Cm * (y1 + 0.5 * h * k11)
    k31 = Bm * (y2 + 0.5 * h * k22)
    k32 = Cm * (y1 + 0.5 * h * k21)
    k41 = B1 * (y2 + h * k32)
    k42 = C1 * (y1 + h * k31)
    return (y1 + h / 6.0 * (k11 + 2.0 * k21 + 2.0 * k31 + k41),
            y2 + h / 6.0 * (k12 + 2.0 * k22 + 2.0 * k32 + k42))


@njit(cache=True)
def _coefficients(lam, b1, b2, q12, q21, N):
    """``K12`` and ``K21`` on the ``2N + 1`` nodes."""
    W = (b2 - b1) * lam
    n = 2 * N + 1
    B = np.empty(n, dtype=np.complex128)
    C = np.empty(n, dtype=np.complex128)
    dx = 0.5 / N
    r = np.exp(1j * W * dx)
    rinv = np.exp(-1j * W * dx)
    p = 1.0 + 0j
    pinv = 1.0 + 0j
    for j in range(n):
        if j % _RESYNC == 0:
            p = np.exp(1j * W * (j * dx))
            pinv = np.exp(-1j * W * (j * dx))
        B[j] = -1j * b1 * q12[j] * p
        C[j] = -1j * b2 * q21[j] * pinv
        p *= r
        pinv *= rinv
    return B, C


@njit(cache=True)
def phi_path(lam, b1, b2, q12, q21, N, stride):
    """Phi on every ``stride``-th step point; shape ``(N // stride + 1, 2, 2)``."""
    h = 1.0 / N
    B, C = _coefficients(lam, b1, b2, q12, q21, N)
    out = np.empty((N // stride + 1, 2, 2), dtype=np.complex128)
    y11, y21, y12, y22 = 1.0 + 0j, 0j, 0j, 1.0 + 0j
    out[0, 0, 0] = y11
    out[0, 1, 0] = y21
    out[0, 0, 1] = y12
    out[0, 1, 1] = y22
    for k in range(N):
        j = 2 * k
        y11, y21 = _column_step(y11, y21, B[j], C[j], B[j + 1], C[j + 1], B[j + 2], C[j + 2], h)
        y12, y22 = _column_step(y12, y22, B[j], C[j], B[j + 1], C[j + 1], B[j + 2], C[j + 2], h)
        if (k + 1) % stride == 0:
            i = (k + 1) // stride
            x = (k + 1) * h
            e1 = np.exp(1j * b1 * lam * x)
            e2 = np.exp(1j * b2 * lam * x)
            out[i, 0, 0] = e1 * y11
            out[i, 1, 0] = e2 * y21
            out[i, 0, 1] = e1 * y12
            out[i, 1, 1] = e2 * y22
    return out


@njit(cache=True)
def phi_end_many(lams, b1, b2, q12, q21, N):
    """``Phi(1, lam)`` for each ``lam``; shape ``(len(lams), 2, 2)``."""
    out = np.empty((lams.size, 2, 2), dtype=np.complex128)
    h = 1.0 / N
    for i in range(lams.size):
        lam = lams[i]
        B, C = _coefficients(lam, b1, b2, q12, q21, N)
        y11, y21, y12, y22 = 1.0 + 0j, 0j, 0j, 1.0 + 0j
        for k in range(N):
            j = 2 * k
            y11, y21 = _column_step(y11, y21, B[j], C[j], B[j + 1], C[j + 1],
                                    B[j + 2], C[j + 2], h)
            y12, y22 = _column_step(y12, y22, B[j], C[j], B[j + 1], C[j + 1],
                                    B[j + 2], C[j + 2], h)
        e1 = np.exp(1j * b1 * lam)
        e2 = np.exp(1j * b2 * lam)
        out[i, 0, 0] = e1 * y11
        out[i, 1, 0] = e2 * y21
        out[i, 0, 1] = e1 * y12
        out[i, 1, 1] = e2 * y22
    return out
