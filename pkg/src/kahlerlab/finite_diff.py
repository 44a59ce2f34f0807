"""Finite-difference complex Hessians in a single complex variable."""
from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import EvaluationError, InvalidParameterError

# 1-D fourth-order second-derivative weights on offsets -2..2
_D2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0
_OFFSETS = np.array([-2, -1, 0, 1, 2])


def stencil_points(t0: complex, h: float) -> list[complex]:
    """The nine stencil points: centre plus +-h, +-2h along both axes."""
    t0 = complex(t0)
    pts = [t0]
    for k in (-2, -1, 1, 2):
        pts.append(t0 + k * h)
        pts.append(t0 + 1j * k * h)
    return pts


def fd_complex_hessian(F: Callable[[complex], float], t0: complex, h: float) -> float:
    """Approximate ``d^2 F / dt dconj(t) = (F_xx + F_yy) / 4`` at ``t0``.

    Uses the nine-point cross stencil built from the fourth-order
    second-difference ``(-F_2 + 16 F_1 - 30 F_0 + 16 F_-1 - F_-2) / 12 h^2``
    along each axis.

    Raises
    ------
    EvaluationError
        If ``F`` is not finite at some stencil point; ``point`` names it.
    """
    if not h > 0:
        raise InvalidParameterError("step h must be positive")
    t0 = complex(t0)
    vals = {}
    for p in stencil_points(t0, h):
        v = float(np.real(F(p)))
        if not np.isfinite(v):
            raise EvaluationError(f"non-finite sample {v} at stencil point {p}", point=p)
        vals[p] = v
    fxx = sum(c * vals[t0 + k * h] for c, k in zip(_D2, _OFFSETS))
    fyy = sum(c * vals[t0 + 1j * k * h] for c, k in zip(_D2, _OFFSETS))
    return float((fxx + fyy) / (4.0 * h * h))


def fd_complex_hessian_richardson(F: Callable[[complex], float], t0: complex, h: float) -> tuple[float, float]:
    """Hessian at step ``h / 2`` and an error estimate from the pair ``(h, h/2)``.

    The estimate is ``|D(h) - D(h/2)|``, which dominates the truncation error
    of ``D(h/2)`` for a fourth-order rule by a factor of about 15.
    """
    cache: dict = {}

    def Fc(p):
        key = (round(p.real, 15), round(p.imag, 15))
        if key not in cache:
            cache[key] = F(p)
        return cache[key]

    coarse = fd_complex_hessian(Fc, t0, h)
    fine = fd_complex_hessian(Fc, t0, 0.5 * h)
    return fine, abs(coarse - fine)


def fd_real_hessian(F: Callable[[np.ndarray], float], x0, h: float) -> np.ndarray:
    """Second-order central-difference real Hessian of ``F`` at ``x0``."""
    x0 = np.asarray(x0, dtype=float)
    d = x0.size
    H = np.zeros((d, d))
    f0 = F(x0)
    e = np.eye(d) * h
    for i in range(d):
        H[i, i] = (F(x0 + e[i]) - 2 * f0 + F(x0 - e[i])) / h**2
        for j in range(i + 1, d):
            H[i, j] = H[j, i] = (F(x0 + e[i] + e[j]) - F(x0 + e[i] - e[j]) - F(x0 - e[i] + e[j]) + F(x0 - e[i] - e[j])) / (4 * h**2)
    return H


def fd_joint_complex_hessian(F: Callable[[np.ndarray], float], w0, h: float) -> np.ndarray:
    """Complex Hessian ``d^2 F / dw_j dconj(w_k)`` of a real function on C^d.

    Assembled from the real Hessian in ``(x_1, y_1, ..., x_d, y_d)``.
    """
    w0 = np.atleast_1d(np.asarray(w0, dtype=complex))
    d = w0.size

    def Fr(x):
        return float(np.real(F(x[0::2] + 1j * x[1::2])))

    x0 = np.empty(2 * d)
    x0[0::2], x0[1::2] = w0.real, w0.imag
    R = fd_real_hessian(Fr, x0, h)
    xx, yy = R[0::2, 0::2], R[1::2, 1::2]
    xy, yx = R[0::2, 1::2], R[1::2, 0::2]
    return 0.25 * ((xx + yy) + 1j * (xy - yx))
