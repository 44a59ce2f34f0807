"""Solvers for the gamma equation ``sum_j d^psi_j gamma^j = u``.

Here ``psi = m phi_t`` is the kernel weight, ``d^psi_j = d/dzeta_j - psi_j``
and ``u = d_t K(., z) - psi_t K(., z)``.  Two routes are provided.

``fourier`` (n = 1 only)
    With ``beta = e^{-psi} gamma`` the equation becomes ``d beta / dzeta =
    e^{-psi} u``.  Each angular mode reduces to ``(r^l beta_l)' = 2 r^l
    g_{l-1}``, which is integrated from the centre for ``l >= 1`` and from
    the boundary for ``l <= 0``.  This yields the solution vanishing on the
    boundary circle.

``ansatz`` (n = 1, 2)
    Least squares over disk polynomials in ``(zeta, conj zeta)``.  The
    selection ``boundary`` adds weighted rows forcing ``gamma^j = 0`` on the
    face ``|zeta_j - c_j| = r``; ``min_dbar`` picks, within the numerical
    null space of the constraint, the solution of least ``||dbar gamma||``.
    For n = 2 the closedness condition ``dbar_1 gamma^2 = dbar_2 gamma^1``
    is imposed exactly through its null space.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import block_diag
from scipy.interpolate import BarycentricInterpolator

from .bergman import KernelBundle
from .domains import QuadratureGrid, quadrature_for
from .errors import InvalidParameterError, UnderresolvedAnsatzError
from .zernike import DiskPolynomials

RESIDUAL_TOL = 1e-6


@dataclass(eq=False)
class GammaSolution:
    """Solution of the gamma equation for one kernel and base point.

    Attributes
    ----------
    gamma : ndarray, shape (n, P)
        Components at the nodes of ``grid``.
    dbar : ndarray, shape (n, n, P)
        ``dbar[j, k] = d gamma^j / d conj(zeta_k)`` at the nodes.
    rhs : ndarray, shape (P,)
        ``u`` at the nodes.
    residual : float
        Weighted RMS of the constraint defect relative to ``||u||``.
    boundary_residual : float
        Weighted boundary norm of the face traces relative to ``||u||``.
    primitivity_residual : float
        ``||dbar_1 gamma^2 - dbar_2 gamma^1|| / ||dbar gamma||`` (0 for n = 1).
    dbar_norm2, norm2, rhs_norm2 : float
        ``int |dbar gamma|^2 e^{-psi}``, ``int |gamma|^2 e^{-psi}`` and
        ``int |u|^2 e^{-psi}``.
    coefficients : ndarray or None
        Ansatz coefficients, shape ``(n, size)``.
    null_space : ndarray or None
        Orthonormal coefficient directions left free by the constraint
        (``min_dbar`` only), shape ``(n * size, k)``.
    """

    n: int
    method: str
    selection: str
    degree: int
    grid: QuadratureGrid
    gamma: np.ndarray
    dbar: np.ndarray
    rhs: np.ndarray
    residual: float
    boundary_residual: float
    primitivity_residual: float
    dbar_norm2: float
    norm2: float
    rhs_norm2: float
    density: np.ndarray = field(repr=False)
    coefficients: np.ndarray | None = None
    null_space: np.ndarray | None = field(default=None, repr=False)
    evaluator: Callable | None = field(default=None, repr=False)
    ansatz: object = field(default=None, repr=False)

    def evaluate(self, points):
        """``(gamma, dbar)`` at arbitrary points, shapes ``(n, Q)`` and ``(n, n, Q)``."""
        if self.evaluator is None:
            raise InvalidParameterError("solution has no point evaluator")
        return self.evaluator(np.asarray(points, dtype=complex).reshape(-1, self.n))

    def dbar_norm2_of(self, coefficients) -> float:
        """``int |dbar gamma|^2 e^{-psi}`` for alternative ansatz coefficients."""
        if self.ansatz is None:
            raise InvalidParameterError("only ansatz solutions carry a coefficient map")
        D = self.ansatz["dbar"]
        v = D @ np.asarray(coefficients).reshape(-1)
        return float(np.sum(np.abs(v) ** 2))


def rhs_at(K: KernelBundle, z, points) -> np.ndarray:
    """``u = d_t K(., z) - m phi_t K(., z)`` at points."""
    points = np.asarray(points, dtype=complex).reshape(-1, K.n)
    z = np.reshape(np.asarray(z, dtype=complex), (1, K.n))
    E = K.basis.evaluate(points)
    kv = E @ K.coef(z)[:, 0]
    dk = E @ K.dt_coef(z)
    return dk - K.m * K.weight.grad_t(K.t, points) * kv


def _weighted_norm2(values, density):
    return float(np.sum(np.abs(values) ** 2 * density))


# ---------------------------------------------------------------- fourier


class _FourierSolver:
    def __init__(self, K: KernelBundle, z, quad_order: int | None = None):
        grid = K.grid
        if K.n != 1 or grid.radii is None:
            raise InvalidParameterError("the fourier route needs an n = 1 polar grid")
        self.K = K
        self.z = np.reshape(np.asarray(z, dtype=complex), (1, 1))
        self.c = K.fiber.center[0]
        self.r0 = K.fiber.radius
        self.radii = grid.radii
        nr, na = grid.n_rad, grid.n_ang
        self.na = na
        psi = K.phi(grid.nodes)
        u = rhs_at(K, self.z, grid.nodes)
        g = (np.exp(-psi) * u).reshape(nr, na)
        # ghat[i, f] = (1/na) sum_k g(r_i, theta_k) e^{-i f theta_k}
        ghat = np.fft.fft(g, axis=1) / na
        freqs = np.fft.fftfreq(na, d=1.0 / na).astype(int)
        self.ells = np.arange(-na // 2 + 1, na // 2)
        # column for l holds g_{l-1}
        col = {f: i for i, f in enumerate(freqs)}
        self.gsrc = ghat[:, [col[l - 1] for l in self.ells]]
        self.interp = BarycentricInterpolator(self.radii, self.gsrc, axis=0, random_state=0)
        q = quad_order or max(nr, 24)
        self.x, self.w = np.polynomial.legendre.leggauss(q)

    def modes(self, rt):
        """``beta_l(rt)`` and ``g_{l-1}(rt)`` for target radii, shape ``(T, L)``."""
        rt = np.asarray(rt, dtype=float)
        T = rt.size
        L = self.ells
        xs = 0.5 * (self.x + 1)
        s_in = rt[:, None] * xs[None, :]
        w_in = 0.5 * rt[:, None] * self.w[None, :]
        s_out = rt[:, None] + (self.r0 - rt[:, None]) * xs[None, :]
        w_out = 0.5 * (self.r0 - rt[:, None]) * self.w[None, :]
        g_in = self.interp(s_in.reshape(-1)).reshape(T, -1, L.size)
        g_out = self.interp(s_out.reshape(-1)).reshape(T, -1, L.size)
        pos = L >= 1
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio_in = np.where(rt[:, None] > 0, s_in / rt[:, None], 0.0)
            ratio_out = rt[:, None] / s_out
        beta = np.empty((T, L.size), dtype=complex)
        Lp, Ln = L[pos], -L[~pos]
        beta[:, pos] = 2 * np.einsum("tq,tql->tl", w_in, g_in[:, :, pos] * ratio_in[:, :, None] ** Lp[None, None, :])
        beta[:, ~pos] = -2 * np.einsum("tq,tql->tl", w_out, g_out[:, :, ~pos] * ratio_out[:, :, None] ** Ln[None, None, :])
        return beta, self.interp(rt)

    def synthesize(self, points):
        """``beta``, ``d beta/dconj(zeta)`` at points."""
        w = np.asarray(points, dtype=complex).reshape(-1) - self.c
        r, th = np.abs(w), np.angle(w)
        ur, inv = np.unique(np.round(r, 13), return_inverse=True)
        beta_l, g_l = self.modes(ur)
        beta_l, g_l = beta_l[inv], g_l[inv]
        L = self.ells[None, :]
        beta = np.sum(beta_l * np.exp(1j * L * th[:, None]), axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            over_r = np.where(r[:, None] > 0, L * beta_l / r[:, None], 0.0)
        dbar = np.sum((g_l - over_r) * np.exp(1j * (L + 1) * th[:, None]), axis=1)
        return beta, dbar


def _solve_fourier(K: KernelBundle, z) -> GammaSolution:
    S = _FourierSolver(K, z)
    grid = K.grid
    nodes = grid.nodes
    psi = K.phi(nodes)
    psi_zbar = np.conj(K.m * K.weight.grad_z(K.t, nodes)[:, 0])
    rad = grid.radii
    beta_l, g_l = S.modes(rad)
    th = grid.angles
    L = S.ells[:, None]
    E0 = np.exp(1j * L * th[None, :])
    Ep = np.exp(1j * (L + 1) * th[None, :])
    Em = np.exp(1j * (L - 1) * th[None, :])
    Lr = S.ells[None, :] / rad[:, None]
    beta = (beta_l @ E0).reshape(-1)
    dbeta_bar = ((g_l - Lr * beta_l) @ Ep).reshape(-1)
    eps = np.exp(psi)
    gamma = eps * beta
    dbar = eps * (psi_zbar * beta + dbeta_bar)
    u = rhs_at(K, z, nodes)
    dens = K.density
    # independent residual: d beta/dzeta from the radial interpolant's derivative
    dbl = BarycentricInterpolator(rad, beta_l, axis=0, random_state=0).derivative(rad)
    dbeta = ((0.5 * (dbl + Lr * beta_l)) @ Em).reshape(-1)
    g = np.exp(-psi) * u
    unorm2 = _weighted_norm2(u, dens)
    res = np.sqrt(np.sum(np.abs(dbeta - g) ** 2 * grid.weights * eps)) / max(np.sqrt(unorm2), 1e-300)
    # boundary trace
    na = grid.n_ang
    th_b = 2 * np.pi * np.arange(na) / na
    zb = S.c + S.r0 * np.exp(1j * th_b)
    bb, _ = S.synthesize(zb)
    psib = K.phi(zb)
    bres = np.sqrt(np.sum(np.abs(bb) ** 2 * np.exp(psib)) * 2 * np.pi * S.r0 / na) / max(np.sqrt(unorm2), 1e-300)

    def evaluator(pts):
        pts = pts.reshape(-1, 1)
        b, db = S.synthesize(pts[:, 0])
        ps = K.phi(pts)
        pzb = np.conj(K.m * K.weight.grad_z(K.t, pts)[:, 0])
        e = np.exp(ps)
        return (e * b)[None, :], (e * (pzb * b + db))[None, None, :]

    if unorm2 == 0.0:
        gamma = np.zeros_like(gamma)
        dbar = np.zeros_like(dbar)
        res = bres = 0.0
        evaluator = lambda pts: (np.zeros((1, pts.shape[0]), complex), np.zeros((1, 1, pts.shape[0]), complex))
    return GammaSolution(
        n=1, method="fourier", selection="boundary", degree=int(S.ells.max()), grid=grid,
        gamma=gamma[None, :], dbar=dbar[None, None, :], rhs=u, residual=float(res),
        boundary_residual=float(bres), primitivity_residual=0.0,
        dbar_norm2=_weighted_norm2(dbar, dens), norm2=_weighted_norm2(gamma, dens), rhs_norm2=unorm2,
        density=dens, evaluator=evaluator,
    )


# ---------------------------------------------------------------- ansatz


class _ProductAnsatz:
    """Disk polynomials on each factor, total degree ``<= degree``."""

    def __init__(self, center, radius, degree, n):
        self.n = n
        self.fam = DiskPolynomials(0.0, radius, degree)
        self.center = np.array(center, dtype=complex)
        deg = 2 * self.fam.ss + np.abs(self.fam.ells)
        if n == 1:
            self.pairs = None
            self.size = self.fam.size
        else:
            self.pairs = np.array([(i, j) for i in range(self.fam.size) for j in range(self.fam.size) if deg[i] + deg[j] <= degree])
            self.size = len(self.pairs)

    def evaluate(self, pts):
        """Values and Wirtinger derivatives: ``F (P,B)``, ``D (n,P,B)``, ``Db (n,P,B)``."""
        pts = np.asarray(pts, dtype=complex).reshape(-1, self.n) - self.center
        if self.n == 1:
            v, d, db = self.fam.evaluate_all(pts[:, 0])
            return v, d[None], db[None]
        v1, d1, b1 = self.fam.evaluate_all(pts[:, 0])
        v2, d2, b2 = self.fam.evaluate_all(pts[:, 1])
        i, j = self.pairs[:, 0], self.pairs[:, 1]
        F = v1[:, i] * v2[:, j]
        D = np.stack([d1[:, i] * v2[:, j], v1[:, i] * d2[:, j]])
        Db = np.stack([b1[:, i] * v2[:, j], v1[:, i] * b2[:, j]])
        return F, D, Db


def _null_space(A, rtol):
    _, s, Vh = np.linalg.svd(A, full_matrices=True)
    rank = int(np.sum(s > rtol * s[0])) if s.size else 0
    return Vh[rank:].conj().T, s


def _faces(fiber, n_circ, n_rad, n_ang):
    """Per-face nodes and weights of ``ds`` (times ``dV`` of the other disk for n = 2)."""
    th = 2 * np.pi * np.arange(n_circ) / n_circ
    out = []
    for j in range(fiber.n):
        circ = fiber.center[j] + fiber.radius * np.exp(1j * th)
        wc = np.full(n_circ, 2 * np.pi * fiber.radius / n_circ)
        if fiber.n == 1:
            out.append((circ[:, None], wc))
            continue
        other = 1 - j
        g1 = quadrature_for(type(fiber)((fiber.center[other],), fiber.radius), n_rad, n_ang)
        pts = np.empty((n_circ * g1.weights.size, 2), dtype=complex)
        pts[:, j] = np.repeat(circ, g1.weights.size)
        pts[:, other] = np.tile(g1.nodes[:, 0], n_circ)
        out.append((pts, np.repeat(wc, g1.weights.size) * np.tile(g1.weights, n_circ)))
    return out


def _tsqr(blocks, ncols):
    """Triangular factor of a tall matrix given as an iterable of row blocks."""
    R = np.zeros((0, ncols), dtype=complex)
    for blk in blocks:
        if blk.shape[0] == 0:
            continue
        R = np.linalg.qr(np.concatenate([R, blk]), mode="r")
    return R


def _chunks(P, size=4096):
    for s in range(0, P, size):
        yield slice(s, min(P, s + size))


def _solve_ansatz(K: KernelBundle, z, degree: int, selection: str, grid: QuadratureGrid | None, mu: float, rtol: float) -> GammaSolution:
    n = K.n
    fib = K.fiber
    if grid is None:
        grid = K.grid if n == 1 else quadrature_for(fib, degree + 4, 2 * degree + 4)
    nodes = grid.nodes
    P = nodes.shape[0]
    A = _ProductAnsatz(fib.center, fib.radius, degree, n)
    B = A.size
    NB = n * B
    psi = K.phi(nodes)
    dens = grid.weights * np.exp(-psi)
    psi_z = K.m * K.weight.grad_z(K.t, nodes)
    u = rhs_at(K, z, nodes)
    unorm2 = _weighted_norm2(u, dens)

    def blocks(kind):
        for sl in _chunks(P):
            F, D, Db = A.evaluate(nodes[sl])
            sw = np.sqrt(dens[sl])[:, None]
            if kind == "constraint":
                C = np.concatenate([sw * (D[j] - psi_z[sl, j, None] * F) for j in range(n)], axis=1)
                yield np.concatenate([C, sw * u[sl, None]], axis=1)
            elif kind == "dbar":
                # the dbar operator acts on each component with the same block
                yield np.concatenate([sw * Db[k] for k in range(n)])
            elif kind == "closed":
                yield np.concatenate([-sw * Db[1], sw * Db[0]], axis=1)

    Rcb = _tsqr(blocks("constraint"), NB + 1)
    Rc, qb = Rcb[:NB, :NB], Rcb[:NB, NB]
    Rd = block_diag(*[_tsqr(blocks("dbar"), B)] * n)
    # exact closedness for n = 2: dbar_1 gamma^2 - dbar_2 gamma^1 = 0
    if n == 2:
        Z, _ = _null_space(_tsqr(blocks("closed"), NB), 1e-10)
    else:
        Z = np.eye(NB, dtype=complex)
    faces = _faces(fib, 2 * degree + 8, max(grid.n_rad // 2, 4), max(grid.n_ang // 2, 8))

    def face_blocks(fp, fw):
        for sl in _chunks(fp.shape[0]):
            Ff, _, _ = A.evaluate(fp[sl])
            yield np.sqrt(fw[sl] * np.exp(-K.phi(fp[sl])))[:, None] * Ff

    Rb = block_diag(*[_tsqr(face_blocks(fp, fw), B) for fp, fw in faces])
    null = None
    if selection == "boundary":
        M = np.concatenate([Rc @ Z, mu * (Rb @ Z)])
        rhs = np.concatenate([qb, np.zeros(Rb.shape[0], dtype=complex)])
        y, *_ = np.linalg.lstsq(M, rhs, rcond=None)
    elif selection == "min_dbar":
        U, s, Vh = np.linalg.svd(Rc @ Z, full_matrices=True)
        rank = int(np.sum(s > rtol * s[0]))
        V = Vh.conj().T
        y0 = V[:, :rank] @ ((U[:, :rank].conj().T @ qb) / s[:rank])
        Nz = V[:, rank:]
        if Nz.shape[1]:
            DN = (Rd @ Z) @ Nz
            c, *_ = np.linalg.lstsq(DN, -(Rd @ Z) @ y0, rcond=None)
            y = y0 + Nz @ c
        else:
            y = y0
        null = Z @ Nz
    else:
        raise InvalidParameterError(f"unknown selection {selection!r}")
    x = Z @ y
    coef = x.reshape(n, B)
    gamma = np.zeros((n, P), dtype=complex)
    dbar = np.zeros((n, n, P), dtype=complex)
    defect = np.zeros(P, dtype=complex)
    for sl in _chunks(P):
        F, D, Db = A.evaluate(nodes[sl])
        for j in range(n):
            gamma[j, sl] = F @ coef[j]
            defect[sl] += (D[j] - psi_z[sl, j, None] * F) @ coef[j]
            for k in range(n):
                dbar[j, k, sl] = Db[k] @ coef[j]
    defect -= u
    res = np.sqrt(_weighted_norm2(defect, dens)) / max(np.sqrt(unorm2), 1e-300)
    dnorm2 = float(sum(_weighted_norm2(dbar[j, k], dens) for j in range(n) for k in range(n)))
    prim = 0.0
    if n == 2:
        prim = np.sqrt(_weighted_norm2(dbar[1, 0] - dbar[0, 1], dens)) / max(np.sqrt(dnorm2), 1e-300)
    bres = float(np.linalg.norm(Rb @ x)) / max(np.sqrt(unorm2), 1e-300)

    def evaluator(pts):
        Fp, _, Dbp = A.evaluate(pts)
        g = np.stack([Fp @ coef[j] for j in range(n)])
        d = np.stack([np.stack([Dbp[k] @ coef[j] for k in range(n)]) for j in range(n)])
        return g, d

    return GammaSolution(
        n=n, method="ansatz", selection=selection, degree=degree, grid=grid, gamma=gamma, dbar=dbar,
        rhs=u, residual=float(res), boundary_residual=float(bres), primitivity_residual=float(prim),
        dbar_norm2=dnorm2, norm2=float(sum(_weighted_norm2(gamma[j], dens) for j in range(n))),
        rhs_norm2=unorm2, density=dens, coefficients=coef, null_space=null, evaluator=evaluator,
        ansatz={"dbar": Rd},
    )


def solve_gamma(K: KernelBundle, z, selection: str = "boundary", method: str | None = None, degree: int | None = None, grid: QuadratureGrid | None = None, mu: float = 100.0, rtol: float = 1e-9, tol: float = RESIDUAL_TOL, escalate: bool = True) -> GammaSolution:
    """Solve ``sum_j d^psi_j gamma^j = u`` for the kernel ``K`` at base point ``z``.

    Parameters
    ----------
    K : KernelBundle
        Kernel of the translated weight on the base fiber.
    z : complex or array
        Base point in the fiber.
    selection : {"boundary", "min_dbar"}
        ``boundary`` returns the solution vanishing on the boundary faces;
        ``min_dbar`` the ansatz solution of least ``||dbar gamma||``.
    method : {"fourier", "ansatz"}, optional
        Defaults to ``fourier`` for ``n = 1`` with ``boundary`` selection and
        ``ansatz`` otherwise.
    degree : int, optional
        Ansatz degree ``M``; defaults to ``N + 4`` and escalates to ``N + 8``.

    Raises
    ------
    UnderresolvedAnsatzError
        If the relative constraint residual stays above ``tol``.
    """
    if method is None:
        method = "fourier" if (K.n == 1 and selection == "boundary") else "ansatz"
    if method == "fourier":
        if selection != "boundary":
            raise InvalidParameterError("the fourier route computes the boundary selection only")
        sol = _solve_fourier(K, z)
        if sol.residual > tol:
            raise UnderresolvedAnsatzError(f"fourier gamma residual {sol.residual:.2e} exceeds {tol:.1e}", residual=sol.residual)
        return sol
    N = K.basis.degree
    M = N + 4 if degree is None else int(degree)
    if M < N:
        raise InvalidParameterError("ansatz degree must be >= kernel degree")
    tries = [M, M + 4] if (escalate and degree is None) else [M]
    sol = None
    for deg in tries:
        sol = _solve_ansatz(K, z, deg, selection, grid, mu, rtol)
        if sol.residual <= tol:
            return sol
    raise UnderresolvedAnsatzError(f"ansatz residual {sol.residual:.2e} exceeds {tol:.1e} at degree {sol.degree}", residual=sol.residual)
