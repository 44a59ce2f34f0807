"""Disk polynomials in (zeta, conj zeta) with exact Wirtinger derivatives.

The basis ``f_{l,s} = c r^{|l|} P_s^{(0,|l|)}(2 r^2 - 1) e^{i l theta}`` with
``r = |zeta - center| / radius`` spans the same space as the monomials
``zeta^j conj(zeta)^k`` with ``j + k <= degree`` and is orthonormal in
``L^2`` of the disk, which keeps least-squares systems well conditioned.
"""
from __future__ import annotations

import numpy as np
from scipy.special import eval_jacobi


class DiskPolynomials:
    """Orthonormal disk polynomials of total degree ``<= degree``."""

    def __init__(self, center: complex, radius: float, degree: int):
        self.center = complex(center)
        self.radius = float(radius)
        self.degree = int(degree)
        idx = []
        for total in range(self.degree + 1):
            for ell in range(-total, total + 1, 2):
                idx.append((ell, (total - abs(ell)) // 2))
        self.index = idx
        self.ells = np.array([i[0] for i in idx])
        self.ss = np.array([i[1] for i in idx])
        self.norms = np.sqrt((2 * self.ss + np.abs(self.ells) + 1) / np.pi) / self.radius

    @property
    def size(self) -> int:
        return len(self.index)

    def _radial(self, r):
        """Radial parts ``R`` and ``dR/dr`` (in scaled radius), shape ``(P, size)``."""
        r = r[:, None]
        a = np.abs(self.ells)[None, :]
        s = self.ss[None, :]
        x = 2 * r * r - 1
        P = eval_jacobi(s, 0, a, x)
        dP = np.where(s > 0, 0.5 * (s + a + 1) * eval_jacobi(np.maximum(s - 1, 0), 1, a + 1, x), 0.0)
        ra = r**a
        ram1 = np.where(a > 0, r ** np.maximum(a - 1, 0), 0.0)
        R = ra * P
        dR = a * ram1 * P + ra * dP * 4 * r
        R_over_r = ram1 * P
        return R, dR, R_over_r

    def evaluate_all(self, zeta):
        """Values, ``d/dzeta`` and ``d/dconj(zeta)``, each shape ``(P, size)``."""
        w = (np.asarray(zeta, dtype=complex).reshape(-1) - self.center) / self.radius
        r = np.abs(w)
        th = np.angle(w)
        R, dR, Ror = self._radial(r)
        L = self.ells[None, :]
        e = np.exp(1j * L * th[:, None])
        val = self.norms * R * e
        em = np.exp(1j * (L - 1) * th[:, None])
        ep = np.exp(1j * (L + 1) * th[:, None])
        d = self.norms * 0.5 * em * (dR + L * Ror) / self.radius
        db = self.norms * 0.5 * ep * (dR - L * Ror) / self.radius
        return val, d, db

    def evaluate(self, zeta):
        return self.evaluate_all(zeta)[0]
