"""Complex Hessian of log K_t in a parallelogram direction and its decomposition.

For the translated weight ``psi = m phi_a`` on the base fiber the identity

    d^2/dt dconj(t) log K_t(z, z)
        = [ int H_psi(w, w) e^{-psi} + int |dbar gamma|^2 e^{-psi} ] / K(z, z) + kappa

holds with ``w = (K, -gamma^1, ..., -gamma^n)`` when ``gamma`` is the solution
of the gamma equation vanishing on the boundary faces, and
``kappa = ||P_perp dbar_t K||^2 / K(z, z)`` with ``P_perp`` the projection off
``K(., z)``.  The left side is always measured by finite differences.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .bergman import KernelBundle, build_kernel, default_degree
from .domains import DomainFamily, Polydisk, QuadratureGrid, disk_quadrature, make_parallelogram
from .errors import InvalidParameterError, NotPlurisubharmonicError
from .finite_diff import fd_complex_hessian_richardson
from .gamma import GammaSolution, _ProductAnsatz, rhs_at, solve_gamma
from .weights import WeightFamily, translate_weight


def _as_point(z, n):
    return np.reshape(np.asarray(z, dtype=complex), (1, n))


def _node_derivatives(K: KernelBundle, z, method: str = "analytic", h: float = 1e-4):
    """``K``, ``d_t K`` and ``d_conj(t) K`` at the nodes of ``K.grid``."""
    z = _as_point(z, K.n)
    kv = K.node_values(z)
    if method == "analytic":
        return kv, K.values @ K.dt_coef(z), K.values @ K.dtbar_coef(z)
    if method != "fd":
        raise InvalidParameterError(f"unknown method {method!r}")
    vals = {s: K.at(K.t + s).node_values(z) for s in (h, -h, 1j * h, -1j * h)}
    dx = (vals[h] - vals[-h]) / (2 * h)
    dy = (vals[1j * h] - vals[-1j * h]) / (2 * h)
    return kv, 0.5 * (dx - 1j * dy), 0.5 * (dx + 1j * dy)


def orth_residual(K: KernelBundle, z, method: str = "analytic", h: float = 1e-4) -> float:
    """``max_k |<u, e_k>| / (||e_k|| sqrt K(z,z))`` with ``u = d_t K - psi_t K``.

    The normalisation by ``sqrt K(z, z) = ||K(., z)||`` makes the value
    comparable across weights and ``m``.
    """
    kv, dk, _ = _node_derivatives(K, z, method, h)
    u = dk - K.m * K.weight.grad_t(K.t, K.grid.nodes) * kv
    proj = (K.values.conj() * K.density[:, None]).T @ u
    norms = np.sqrt(np.sum(np.abs(K.values) ** 2 * K.density[:, None], axis=0))
    kz = K.diag(_as_point(z, K.n))[0]
    return float(np.max(np.abs(proj) / norms) / np.sqrt(kz))


def kappa(K: KernelBundle, z, method: str = "analytic", h: float = 1e-4) -> float:
    """Cauchy-Schwarz defect of ``dbar_t K`` against ``K`` in ``L^2(e^{-psi})``.

    ``kappa = K(z,z)^{-2} [ ||K||^2 ||D||^2 - |<D, K>|^2 ]`` with ``D = dbar_t K(., z)``.
    """
    kv, _, db = _node_derivatives(K, z, method, h)
    kk = float(np.sum(np.abs(kv) ** 2 * K.density))
    dd = float(np.sum(np.abs(db) ** 2 * K.density))
    dk = complex(np.sum(db * np.conj(kv) * K.density))
    kz = K.diag(_as_point(z, K.n))[0]
    return (kk * dd - abs(dk) ** 2) / kz**2


def gamma_split_check(K: KernelBundle, a, z, degree: int | None = None) -> float:
    """Relative ``dbar`` residual of ``gamma_2 = a K(., z)`` after refitting.

    The components ``a^j K(., z)`` are fitted by least squares in the full
    ``(zeta, conj zeta)`` disk-polynomial ansatz and the ``dbar`` of the fit
    is measured against the fitted values in ``L^2(e^{-psi})``.  Returns 0
    for ``a = 0``.
    """
    a = np.atleast_1d(np.asarray(a, dtype=complex))
    if not np.any(a):
        return 0.0
    deg = K.basis.degree + 2 if degree is None else degree
    grid = K.grid
    A = _ProductAnsatz(K.fiber.center, K.fiber.radius, deg, K.n)
    F, _, Db = A.evaluate(grid.nodes)
    sw = np.sqrt(K.density)[:, None]
    kv = K.node_values(z)
    num = den = 0.0
    for j in range(K.n):
        target = a[j] * kv
        c, *_ = np.linalg.lstsq(sw * F, sw[:, 0] * target, rcond=None)
        den += float(np.sum(np.abs(target) ** 2 * K.density))
        for k in range(K.n):
            num += float(np.sum(np.abs(Db[k] @ c) ** 2 * K.density))
    return float(np.sqrt(num / den))


@dataclass
class HessianDecomposition:
    """One evaluation of the log-kernel Hessian decomposition."""

    lhs: float
    lhs_fd_error: float
    curvature: float
    dbar_gamma: float
    kappa: float
    slack: float
    kernel_diag: float
    condition: float
    orth_residual: float
    gamma_residual: float
    gamma_boundary_residual: float
    primitivity_residual: float
    reproducing_residual: float
    selection: str
    m: float = 1.0

    def as_row(self) -> dict:
        return asdict(self)

    def chain_margin(self) -> float:
        """``lhs - curvature - dbar + 3 fd_error`` (nonnegative when the chain holds)."""
        return self.lhs - self.curvature - self.dbar_gamma + 3 * self.lhs_fd_error


def _family(domain, a):
    if isinstance(domain, Polydisk):
        return make_parallelogram(domain, np.zeros(domain.n) if a is None else a)
    if a is not None and not np.allclose(np.atleast_1d(a), np.array(domain.slope)):
        raise InvalidParameterError("slope argument disagrees with the domain family")
    return domain


def translated_kernel(domain, weight: WeightFamily, t, m: float = 1, degree: int | None = None, grid: QuadratureGrid | None = None, a=None) -> KernelBundle:
    """Kernel of ``m phi_a`` on the base fiber at ``t``."""
    fam = _family(domain, a)
    return build_kernel(fam.base, translate_weight(weight, fam.slope), m=m, t=t, degree=degree, grid=grid)


def log_kernel_hessian(domain, weight: WeightFamily, z, a=None, t0: complex = 0.0, m: float = 1, h: float | None = None, degree: int | None = None, grid: QuadratureGrid | None = None, K0: KernelBundle | None = None) -> tuple[float, float]:
    """Finite-difference ``d^2/dt dconj(t) log K_{a,t}(z, z)`` and its error estimate."""
    fam = _family(domain, a)
    if K0 is None:
        K0 = translated_kernel(fam, weight, t0, m, degree, grid)
    h = 1e-3 * fam.base.radius if h is None else h
    zp = _as_point(z, fam.n)
    return fd_complex_hessian_richardson(lambda t: np.log(K0.at(t).diag(zp)[0]), t0, h)


def decompose(domain, weight: WeightFamily, z, a=None, t0: complex = 0.0, m: float = 1, h: float | None = None, degree: int | None = None, grid: QuadratureGrid | None = None, selection: str = "boundary", gamma_method: str | None = None, gamma_degree: int | None = None) -> HessianDecomposition:
    """Measure the log-kernel Hessian in direction ``[1, a]`` and its three parts.

    Parameters
    ----------
    domain : DomainFamily or Polydisk
        Parallelogram family (slope ``a``) or its base.
    weight : WeightFamily
        Untranslated weight ``phi(t, z)``.
    z : complex or array
        Point in the base fiber (translated frame).
    selection : {"boundary", "min_dbar"}
        Which solution of the gamma equation enters the dbar and curvature terms.
    """
    fam = _family(domain, a)
    n = fam.n
    K0 = translated_kernel(fam, weight, t0, m, degree, grid)
    zp = _as_point(z, n)
    lhs, fd_err = log_kernel_hessian(fam, weight, zp, t0=t0, m=m, h=h, K0=K0)
    kz = K0.diag(zp)[0]
    kv = K0.node_values(zp)
    repro = abs(float(np.sum(np.abs(kv) ** 2 * K0.density)) / kz - 1.0)
    kap = kappa(K0, zp)
    orth = orth_residual(K0, zp)
    sol = solve_gamma(K0, zp, selection=selection, method=gamma_method, degree=gamma_degree)
    nodes = sol.grid.nodes
    kg = kv if sol.grid is K0.grid else K0.matrix(nodes, zp)[:, 0]
    w = np.concatenate([kg[None, :], -sol.gamma], axis=0)
    H = K0.m * K0.weight.hess(K0.t, nodes)
    form = np.einsum("jp,pjk,kp->p", w, H, np.conj(w)).real
    curvature = float(np.sum(form * sol.density)) / kz
    dbar = sol.dbar_norm2 / kz
    return HessianDecomposition(
        lhs=lhs, lhs_fd_error=fd_err, curvature=curvature, dbar_gamma=dbar, kappa=kap,
        slack=lhs - curvature - dbar - kap, kernel_diag=kz, condition=K0.condition,
        orth_residual=orth, gamma_residual=sol.residual, gamma_boundary_residual=sol.boundary_residual,
        primitivity_residual=sol.primitivity_residual, reproducing_residual=repro, selection=selection, m=m,
    )


def hormander_constants(weight: WeightFamily, K: KernelBundle) -> tuple[float, float]:
    """``(C_u, C_gamma)`` over the grid of ``K`` for the unscaled weight.

    ``C_u = sup h^* A^{-1} h`` with ``A`` the z-block and ``h`` the mixed
    ``(z, conj t)`` column of the Hessian; ``C_gamma = sup 1/lambda_min(A)``.

    Raises
    ------
    NotPlurisubharmonicError
        If the weight is not strictly psh in ``z`` at some node.
    """
    H = weight.hess(K.t, K.grid.nodes)
    A = H[:, 1:, 1:]
    hcol = H[:, 1:, 0]
    lam = np.linalg.eigvalsh(A)[:, 0]
    if lam.min() <= 0:
        i = int(np.argmin(lam))
        raise NotPlurisubharmonicError("Hormander constants need a weight strictly psh in z", node=K.grid.nodes[i], eigenvalue=float(lam[i]))
    sol = np.linalg.solve(A, hcol[..., None])[..., 0]
    cu = float(np.max(np.einsum("pj,pj->p", np.conj(hcol), sol).real))
    return cu, float(np.max(1.0 / lam))


@dataclass
class BlowupReport:
    """Rescaled gamma data over a list of ``m``.

    ``tau_m = m^{n/2} gamma / K`` is sampled on ``B_R`` in ``xi`` with
    ``zeta = z + xi / sqrt(m)``.  ``tau_norm`` is its ``dlambda_m`` norm,
    ``gamma_over_K_norm`` the same norm of ``gamma / K`` (that is
    ``tau_norm / m^{n/2}``).  ``dbar_tau_ball`` is ``int_{B_R} |dbar_xi tau|^2 dV(xi)``
    and ``dbar_tau_dlambda`` the ``dlambda_m`` weighted version over the fiber.
    ``vhat`` is the least-squares constant fit of ``gamma / K`` on
    ``B_fit``; ``direction = a - vhat``.
    """

    m: list = field(default_factory=list)
    xi: np.ndarray | None = None
    tau: list = field(default_factory=list)
    tau_norm: list = field(default_factory=list)
    gamma_over_K_norm: list = field(default_factory=list)
    dbar_tau_ball: list = field(default_factory=list)
    dbar_tau_dlambda: list = field(default_factory=list)
    vhat: list = field(default_factory=list)
    direction: list = field(default_factory=list)
    hormander_gamma: list = field(default_factory=list)
    hormander_u: list = field(default_factory=list)
    gamma_residual: list = field(default_factory=list)
    C_u: float = float("nan")
    C_gamma: float = float("nan")

    def rows(self):
        for i, m in enumerate(self.m):
            yield {
                "m": m, "tau_norm": self.tau_norm[i], "gamma_over_K_norm": self.gamma_over_K_norm[i],
                "dbar_tau_ball": self.dbar_tau_ball[i], "dbar_tau_dlambda": self.dbar_tau_dlambda[i],
                "vhat_re": self.vhat[i].real, "vhat_im": self.vhat[i].imag,
                "hormander_gamma": self.hormander_gamma[i], "hormander_u": self.hormander_u[i],
                "gamma_residual": self.gamma_residual[i],
            }


def blowup_extract(domain, weight: WeightFamily, z=None, a=None, ms: Sequence[float] = (4, 9, 16), R: float = 2.0, t0: complex = 0.0, fit_radius: float = 1.0, n_rad: int = 12, n_ang: int = 24) -> BlowupReport:
    """Rescaled gamma analysis of the m-kernels of ``phi_a`` at ``z`` (n = 1)."""
    fam = _family(domain, a)
    if fam.n != 1:
        raise InvalidParameterError("blow-up extraction is implemented for n = 1")
    base = fam.base
    z = np.asarray(base.center if z is None else np.atleast_1d(z), dtype=complex).reshape(1, 1)
    slope = complex(fam.slope[0])
    phi_a = translate_weight(weight, fam.slope)
    if not ms:
        raise InvalidParameterError("m list must be nonempty")
    rep = BlowupReport()
    gR = disk_quadrature(R, n_rad, n_ang)
    gF = disk_quadrature(fit_radius, n_rad, n_ang)
    rep.xi = gR.nodes[:, 0]
    for m in ms:
        if abs(z[0, 0] - base.center[0]) + R / np.sqrt(m) > base.radius:
            raise InvalidParameterError(f"B_R rescaled by m={m} leaves the fiber")
        K = build_kernel(base, phi_a, m=m, t=t0)
        if np.isnan(rep.C_u):
            rep.C_u, rep.C_gamma = hormander_constants(phi_a, K)
        sol = solve_gamma(K, z)
        kz = K.diag(z)[0]
        zeta = z[0, 0] + gR.nodes[:, 0] / np.sqrt(m)
        gam, db = sol.evaluate(zeta[:, None])
        kv = K(zeta[:, None], z)
        tau = np.sqrt(m) * gam[0] / kv
        zf = z[0, 0] + gF.nodes[:, 0] / np.sqrt(m)
        gf, _ = sol.evaluate(zf[:, None])
        vhat = complex(gF.integrate(gf[0] / K(zf[:, None], z)) / np.sum(gF.weights))
        rep.m.append(m)
        rep.tau.append(tau)
        g2 = sol.norm2 / kz
        rep.gamma_over_K_norm.append(float(np.sqrt(g2)))
        rep.tau_norm.append(float(np.sqrt(m * g2)))
        rep.dbar_tau_ball.append(float(gR.integrate(np.abs(db[0, 0] / kv) ** 2).real))
        rep.dbar_tau_dlambda.append(float(sol.dbar_norm2 / kz))
        rep.vhat.append(vhat)
        rep.direction.append(slope - vhat)
        un = sol.rhs_norm2
        rep.hormander_gamma.append(float(sol.norm2 / (un / m)) if un > 0 else 0.0)
        rep.hormander_u.append(float(un / (m * kz)))
        rep.gamma_residual.append(sol.residual)
    return rep
