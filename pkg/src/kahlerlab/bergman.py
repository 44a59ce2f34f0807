"""Weighted Bergman kernels from Gram matrices of scaled monomials.

The kernel of the span of the basis ``e_j`` in ``L^2(D, e^{-m phi_t} dV)`` is
``K(zeta, z) = sum_j e_j(zeta) c_j(z)`` where ``conj(c) = G^{-1} e(z)`` and
``G[j, k] = int e_j conj(e_k) e^{-m phi_t} dV``.  ``dV`` is Lebesgue measure.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla

from .domains import DomainFamily, Polydisk, QuadratureGrid, disk_quadrature, quadrature_for
from .errors import ConditioningError, DomainExceededError, GridError, InvalidParameterError
from .weights import WeightFamily

COND_MAX = 1e12


def graded_lex_exponents(n: int, degree: int) -> list[tuple[int, ...]]:
    """Exponents of total degree ``<= degree``, graded then lexicographically descending."""
    out = []
    for d in range(degree + 1):
        if n == 1:
            out.append((d,))
        else:
            for a in range(d, -1, -1):
                out.append((a, d - a))
    return out


@dataclass(frozen=True)
class MonomialBasis:
    """Monomials ``((zeta - center) / scale)^alpha`` of total degree ``<= degree``."""

    n: int
    degree: int
    center: tuple = (0j,)
    scale: float = 1.0
    exponents: tuple = field(init=False)

    def __post_init__(self):
        if self.n not in (1, 2):
            raise InvalidParameterError("basis dimension must be 1 or 2")
        if self.degree < 0:
            raise InvalidParameterError("degree must be nonnegative")
        c = tuple(complex(v) for v in np.atleast_1d(self.center))
        if len(c) != self.n:
            c = (c[0],) * self.n if len(c) == 1 else c
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "exponents", tuple(graded_lex_exponents(self.n, self.degree)))

    @property
    def size(self) -> int:
        return len(self.exponents)

    def _powers(self, points):
        x = (np.asarray(points, dtype=complex).reshape(-1, self.n) - np.array(self.center)) / self.scale
        pw = np.ones((x.shape[0], self.n, self.degree + 1), dtype=complex)
        for p in range(1, self.degree + 1):
            pw[:, :, p] = pw[:, :, p - 1] * x
        return pw

    def evaluate(self, points) -> np.ndarray:
        """Basis values, shape ``(P, size)``."""
        pw = self._powers(points)
        E = np.array(self.exponents)
        out = pw[:, 0, E[:, 0]]
        for j in range(1, self.n):
            out = out * pw[:, j, E[:, j]]
        return out

    def gradient(self, points) -> np.ndarray:
        """Holomorphic derivatives ``d e_k / d zeta_j``, shape ``(P, size, n)``."""
        pw = self._powers(points)
        E = np.array(self.exponents)
        out = np.zeros((pw.shape[0], self.size, self.n), dtype=complex)
        for j in range(self.n):
            term = np.ones((pw.shape[0], self.size), dtype=complex)
            for i in range(self.n):
                if i == j:
                    e = E[:, i]
                    term = term * np.where(e > 0, e, 0) * pw[:, i, np.maximum(e - 1, 0)] / self.scale
                else:
                    term = term * pw[:, i, E[:, i]]
            out[:, :, j] = term
        return out


def default_degree(m: float = 1, r: float = 1.0) -> int:
    """Basis degree ``N(m) = max(4 m r^2, 24)`` for m-kernels."""
    return int(max(math.ceil(4 * m * r * r), 24))


def default_grid(domain: Polydisk, degree: int, m: float = 1) -> QuadratureGrid:
    """A polar grid resolving degree-``2 degree`` products against Gaussian weights."""
    r2 = domain.radius**2
    if domain.n == 1:
        n_rad = degree + 16 + int(math.ceil(m * r2))
        n_ang = 2 * degree + 32
    else:
        n_rad = degree + 8 + int(math.ceil(m * r2))
        n_ang = 2 * degree + 12
    return quadrature_for(domain, n_rad, n_ang + (n_ang % 2))


@dataclass(frozen=True, eq=False)
class KernelBundle:
    """Bergman kernel of one (fiber, weight, t, m).

    Use :func:`build_kernel` to construct.  The Gram matrix is stored with its
    Jacobi scaling ``d`` and the Cholesky factor of ``diag(d) G diag(d)``.
    """

    basis: MonomialBasis
    grid: QuadratureGrid
    weight: WeightFamily
    t: complex
    m: float
    gram: np.ndarray
    chol: np.ndarray
    dscale: np.ndarray
    condition: float
    min_eigenvalue: float
    factor_residual: float
    values: np.ndarray = field(repr=False)
    density: np.ndarray = field(repr=False)

    @property
    def fiber(self) -> Polydisk:
        return self.grid.domain

    @property
    def n(self) -> int:
        return self.basis.n

    def _solve(self, rhs):
        y = sla.cho_solve((self.chol, True), self.dscale[:, None] * rhs.reshape(self.basis.size, -1))
        return (self.dscale[:, None] * y).reshape(rhs.shape)

    def coef_bar(self, z) -> np.ndarray:
        """``conj(c(z)) = G^{-1} e(z)`` for each point; shape ``(size, Q)``."""
        return self._solve(self.basis.evaluate(z).T)

    def coef(self, z) -> np.ndarray:
        return np.conj(self.coef_bar(z))

    def __call__(self, zeta, z):
        """``K(zeta, z)`` for a batch of ``zeta`` and a single point ``z``."""
        zeta = np.asarray(zeta, dtype=complex).reshape(-1, self.n)
        return self.matrix(zeta, np.reshape(z, (1, self.n)))[:, 0]

    def matrix(self, zeta, z) -> np.ndarray:
        """``K(zeta_i, z_j)`` for batches, shape ``(P, Q)``."""
        return self.basis.evaluate(zeta) @ self.coef(z)

    def diag(self, z) -> np.ndarray:
        """``K(z, z)`` for a batch of points, real."""
        z = np.asarray(z, dtype=complex).reshape(-1, self.n)
        E = self.basis.evaluate(z)
        cb = self.coef_bar(z)
        return np.einsum("qk,kq->q", np.conj(E), cb).real

    def node_values(self, z) -> np.ndarray:
        """``K(zeta_p, z)`` at every quadrature node, shape ``(P,)``."""
        return self.values @ self.coef(np.reshape(z, (1, self.n)))[:, 0]

    def _gram_derivative(self, holomorphic: bool) -> np.ndarray:
        phi_t = self.weight.grad_t(self.t, self.grid.nodes)
        if not holomorphic:
            phi_t = np.conj(phi_t)
        w = -self.m * phi_t * self.density
        return (self.values * w[:, None]).T @ np.conj(self.values)

    @cached_property
    def _dG(self):
        return self._gram_derivative(True), self._gram_derivative(False)

    def dt_coef(self, z) -> np.ndarray:
        """``d c / dt`` at fixed basis, from ``d conj(c) / d conj(t) = -G^{-1} (dG/dconj t) conj(c)``."""
        cb = self.coef_bar(np.reshape(z, (1, self.n)))
        return np.conj(-self._solve(self._dG[1] @ cb))[:, 0]

    def dtbar_coef(self, z) -> np.ndarray:
        """``d c / dconj(t)``, the conjugate of ``d conj(c) / dt``."""
        cb = self.coef_bar(np.reshape(z, (1, self.n)))
        return np.conj(-self._solve(self._dG[0] @ cb))[:, 0]

    def at(self, t) -> "KernelBundle":
        """Rebuild on the same fiber, basis and grid at another ``t``."""
        return build_kernel(self.fiber, self.weight, self.basis, self.grid, m=self.m, t=t)

    def phi(self, zeta) -> np.ndarray:
        """Scaled weight ``m phi_t`` at points."""
        return self.m * self.weight.value(self.t, np.asarray(zeta).reshape(-1, self.n))

    def inner(self, f, g) -> complex:
        """Weighted inner product of node-value arrays."""
        return complex(np.sum(f * np.conj(g) * self.density))


def build_kernel(fiber: Polydisk, weight: WeightFamily, basis: MonomialBasis | None = None, grid: QuadratureGrid | None = None, m: float = 1, t: complex = 0.0, degree: int | None = None, cond_max: float = COND_MAX) -> KernelBundle:
    """Assemble and factor the weighted Gram matrix.

    Parameters
    ----------
    fiber : Polydisk
        Domain slice carrying the basis and grid.
    weight : WeightFamily
        Weight family; evaluated at ``t`` and multiplied by ``m``.
    basis, grid : optional
        Default to :func:`default_degree` monomials centred on the fiber and
        :func:`default_grid`.

    Raises
    ------
    ConditioningError
        If the Jacobi-scaled Gram is not positive definite or its condition
        number exceeds ``cond_max``.
    GridError
        If the grid cannot resolve the basis.
    """
    if m < 1:
        raise InvalidParameterError("m must be >= 1")
    if weight.n != fiber.n:
        raise InvalidParameterError("weight and fiber dimensions differ")
    if basis is None:
        basis = MonomialBasis(fiber.n, default_degree(m, fiber.radius) if degree is None else degree, fiber.center, fiber.radius)
    if grid is None:
        grid = default_grid(fiber, basis.degree, m)
    if grid.n_rad < basis.degree + 1 or grid.n_ang < basis.degree + 1:
        raise GridError(f"grid (n_rad={grid.n_rad}, n_ang={grid.n_ang}) cannot resolve degree {basis.degree}")
    V = basis.evaluate(grid.nodes)
    dens = grid.weights * np.exp(-m * weight.value(t, grid.nodes))
    if not np.all(np.isfinite(dens)):
        raise GridError("weight overflow on the grid")
    G = (V * dens[:, None]).T @ np.conj(V)
    asym = float(np.abs(G - G.conj().T).max() / np.abs(G).max())
    if asym > 1e-8:
        raise GridError(f"Gram asymmetry {asym:.2e} exceeds 1e-8")
    G = 0.5 * (G + G.conj().T)
    d = 1.0 / np.sqrt(G.diagonal().real)
    Gs = G * np.outer(d, d)
    ev = np.linalg.eigvalsh(Gs)
    cond = float(ev[-1] / ev[0]) if ev[0] > 0 else float("inf")
    if ev[0] <= 0 or cond > cond_max:
        raise ConditioningError(f"Gram not positive definite within tolerance (min eig {ev[0]:.3e}, cond {cond:.3e})", min_eigenvalue=float(ev[0]), condition=cond)
    L = np.linalg.cholesky(Gs)
    res = float(np.linalg.norm(Gs - L @ L.conj().T) / np.linalg.norm(Gs))
    return KernelBundle(basis, grid, weight, complex(t), float(m), G, L, d, cond, float(ev[0]), res, V, dens)


def kernel_eval(K: KernelBundle, zeta, z) -> np.ndarray:
    """``K(zeta, z)``; ``zeta`` may be a batch of points, ``z`` a single point."""
    return K(zeta, z)


def dbar_t_kernel(domain: DomainFamily, weight: WeightFamily, t0: complex, z, h: float = 1e-4, degree: int | None = None, m: float = 1, method: str = "fd", n_rad=None, n_ang=None) -> Callable:
    """Evaluator ``zeta -> d K_t(zeta, z) / dconj(t)`` at ``t0``.

    ``method="fd"`` rebuilds the kernel on the fibers at ``t0 +- h`` and
    ``t0 +- i h`` and differences kernel values; the fiber may move with
    ``t``.  ``method="analytic"`` differentiates the Gram matrix on the fixed
    fiber at ``t0`` and requires zero slope.
    """
    z = np.reshape(np.asarray(z, dtype=complex), (1, domain.n))

    def make(t):
        fib = domain.fiber(t)
        deg = default_degree(m, fib.radius) if degree is None else degree
        basis = MonomialBasis(fib.n, deg, fib.center, fib.radius)
        grid = None if n_rad is None else quadrature_for(fib, n_rad, n_ang)
        return build_kernel(fib, weight, basis, grid, m=m, t=t)

    if method == "analytic":
        if np.any(np.array(domain.slope) != 0):
            raise InvalidParameterError("analytic t-derivative needs a product family; translate the weight first")
        K0 = make(complex(t0))
        c = K0.dtbar_coef(z)
        return lambda zeta: K0.basis.evaluate(zeta) @ c
    if method != "fd":
        raise InvalidParameterError(f"unknown method {method!r}")
    t0 = complex(t0)
    Ks = {s: make(t0 + s) for s in (h, -h, 1j * h, -1j * h)}

    def evaluate(zeta):
        vals = {s: kernel_eval(Kb, zeta, z[0]) for s, Kb in Ks.items()}
        dx = (vals[h] - vals[-h]) / (2 * h)
        dy = (vals[1j * h] - vals[-1j * h]) / (2 * h)
        return 0.5 * (dx + 1j * dy)

    return evaluate


def beta_m(K: KernelBundle, z) -> float:
    """``(pi^n / m^n) K^{(m)}(z, z) e^{-m phi_t(z)}``."""
    z = np.reshape(np.asarray(z, dtype=complex), (1, K.n))
    return float((np.pi / K.m) ** K.n * K.diag(z)[0] * np.exp(-K.phi(z)[0]))


@dataclass
class DensityReport:
    """Rescaled densities for a list of ``m``.

    Attributes
    ----------
    m : list of float
    beta : list of float
        ``beta_m`` at the centre point.
    xi : ndarray
        Rescaled sample points on ``B_R`` (shared by all ``m``).
    psi : list of ndarray
        ``Psi_m`` at ``xi``.
    sup_log_psi, sup_grad_log_psi, sup_dlog_kernel, mass, mass_in_ball : list of float
        ``sup |log Psi_m|``, ``sup |grad log Psi_m|``, ``sup |d_xi K / K|``,
        the total mass of ``Psi_m dV(xi)`` over the whole rescaled fiber and
        the mass inside ``B_R``.
    """

    m: list = field(default_factory=list)
    beta: list = field(default_factory=list)
    xi: np.ndarray | None = None
    psi: list = field(default_factory=list)
    sup_log_psi: list = field(default_factory=list)
    sup_grad_log_psi: list = field(default_factory=list)
    sup_dlog_kernel: list = field(default_factory=list)
    mass: list = field(default_factory=list)
    mass_in_ball: list = field(default_factory=list)

    def rows(self):
        for i, m in enumerate(self.m):
            yield {"m": m, "beta_m": self.beta[i], "sup_log_psi": self.sup_log_psi[i], "sup_grad_log_psi": self.sup_grad_log_psi[i], "sup_dlog_kernel": self.sup_dlog_kernel[i], "mass": self.mass[i], "mass_in_ball": self.mass_in_ball[i]}


def _psi(K, z, xi):
    zeta = z + xi / np.sqrt(K.m)
    kz = K.diag(z.reshape(1, K.n))[0]
    vals = K.matrix(zeta, z.reshape(1, K.n))[:, 0]
    return K.m ** (-K.n) * np.abs(vals) ** 2 * np.exp(-K.phi(zeta)) / kz


def rescaled_density(K: KernelBundle, R: float = 2.0, z=None, n_rad: int = 12, n_ang: int = 24, fd_step: float = 1e-5, report: DensityReport | None = None) -> DensityReport:
    """Sample ``Psi_m(xi) = m^{-n} |K(z + xi/sqrt m, z)|^2 e^{-m phi} / K(z, z)`` on ``B_R``.

    Appends to ``report`` when given.  The gradient of ``log Psi_m`` is
    taken by central differences of step ``fd_step`` in ``xi``.

    Raises
    ------
    DomainExceededError
        If ``B_R`` rescaled by ``1/sqrt m`` leaves the fiber.
    """
    if K.n != 1:
        raise InvalidParameterError("rescaled densities are implemented for n = 1")
    fib = K.fiber
    z = np.asarray(fib.center if z is None else np.atleast_1d(z), dtype=complex).reshape(K.n)
    if np.abs(z - np.array(fib.center)).max() + R / np.sqrt(K.m) > fib.radius:
        raise DomainExceededError(f"R={R} exceeds sqrt(m) r for m={K.m}")
    g = disk_quadrature(R, n_rad, n_ang)
    xi = g.nodes
    psi = _psi(K, z, xi)
    logp = lambda x: np.log(_psi(K, z, x))
    gx = (logp(xi + fd_step) - logp(xi - fd_step)) / (2 * fd_step)
    gy = (logp(xi + 1j * fd_step) - logp(xi - 1j * fd_step)) / (2 * fd_step)
    # |d_xi K(z + xi/sqrt m, z) / K|
    zeta = z + xi / np.sqrt(K.m)
    c = K.coef(z.reshape(1, K.n))[:, 0]
    dK = (K.basis.gradient(zeta)[:, :, 0] @ c) / np.sqrt(K.m)
    kv = K.basis.evaluate(zeta) @ c
    # total mass on the whole fiber, in zeta coordinates (dV(xi) = m^n dV(zeta))
    knodes = K.node_values(z)
    total = float(np.sum(np.abs(knodes) ** 2 * K.density).real / K.diag(z.reshape(1, K.n))[0])
    rep = report if report is not None else DensityReport()
    rep.m.append(K.m)
    rep.beta.append(beta_m(K, z))
    rep.xi = xi[:, 0]
    rep.psi.append(psi)
    rep.sup_log_psi.append(float(np.abs(np.log(psi)).max()))
    rep.sup_grad_log_psi.append(float(np.sqrt(gx**2 + gy**2).max()))
    rep.sup_dlog_kernel.append(float(np.abs(dK / kv).max()))
    rep.mass.append(total)
    rep.mass_in_ball.append(float(g.integrate(psi)))
    return rep


def density_sweep(fiber: Polydisk, weight: WeightFamily, ms: Sequence[float], R: float = 2.0, t: complex = 0.0, **kwargs) -> DensityReport:
    """Build the m-kernel for each ``m`` and collect :func:`rescaled_density`."""
    rep = DensityReport()
    for m in ms:
        K = build_kernel(fiber, weight, m=m, t=t)
        rescaled_density(K, R, report=rep, **kwargs)
    return rep


def fit_expansion(ms: Sequence[float], diag: Sequence[float], n: int = 1) -> tuple[float, float]:
    """Least-squares ``(a0, a1)`` in ``K^{(m)}(z,z) e^{-m phi} ~ a0 m^n + a1 m^{n-1}``.

    The fit is descriptive only; no reference values exist for ``a1``.
    """
    ms = np.asarray(ms, dtype=float)
    A = np.stack([ms**n, ms ** (n - 1)], axis=1)
    coef, *_ = np.linalg.lstsq(A, np.asarray(diag, dtype=float), rcond=None)
    return float(coef[0]), float(coef[1])
