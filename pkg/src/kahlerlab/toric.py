"""S^1-invariant Kahler potentials on CP^1 through symplectic potentials.

A potential is ``u(x) = u_G(x) + s(x)`` on the moment interval ``[0, 1]`` with
``u_G(x) = (x log x + (1 - x) log(1 - x)) / 2`` and ``s`` a polynomial.  The
Kahler side lives on ``rho = log|w|``: ``Phi_u(rho) = x rho - u(x)`` with
``u'(x) = rho``.  The background is the unit-volume Fubini-Study metric,
``Phi_G(rho) = log(1 + e^{2 rho}) / 2``, and the relative potential is
``phi = Phi_u - Phi_G``.  Integrals against ``omega_u`` are ``int_0^1 F(u'(x)) dx``.

Conventions: ``Ric(omega_G) = 4 omega_G`` so the average scalar curvature is
``RBAR = 4``; ``M = RBAR E - E^Ric + H`` with
``E = (int phi omega + int phi omega_phi) / 2``, ``E^Ric = int phi Ric omega``
and ``H = int log(omega_phi / omega) omega_phi``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.polynomial import Polynomial

from .errors import DegenerateFiberError, InvalidParameterError, InvalidPotentialError

RBAR = 4.0
VOLUME = 1.0


def _leggauss01(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1), 0.5 * w


def guillemin(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        v = 0.5 * (np.where(x > 0, x * np.log(x), 0.0) + np.where(x < 1, (1 - x) * np.log1p(-x), 0.0))
    return v


def guillemin_d1(x):
    return 0.5 * (np.log(x) - np.log1p(-x))


def guillemin_d2(x):
    return 0.5 / (x * (1 - x))


def fs_potential(rho):
    """``Phi_G(rho) = log(1 + e^{2 rho}) / 2`` without overflow."""
    return 0.5 * np.logaddexp(0.0, 2 * np.asarray(rho, dtype=float))


def fs_moment(rho):
    """``x_G(rho) = Phi_G'(rho)``, the logistic function of ``2 rho``."""
    return 0.5 * (1 + np.tanh(np.asarray(rho, dtype=float)))


@dataclass(frozen=True)
class SymplecticPotential:
    """``u = u_G + smooth`` with ``smooth`` a polynomial on ``[0, 1]``."""

    smooth: Polynomial = field(default_factory=lambda: Polynomial([0.0]))

    def __post_init__(self):
        coef = self.smooth.coef if isinstance(self.smooth, Polynomial) else self.smooth
        object.__setattr__(self, "smooth", Polynomial(np.asarray(coef, dtype=float)))

    def __call__(self, x):
        return guillemin(x) + self.smooth(x)

    def d1(self, x):
        return guillemin_d1(x) + self.smooth.deriv(1)(x)

    def d2(self, x):
        return guillemin_d2(x) + self.smooth.deriv(2)(x)

    def reduced_d2(self, x):
        """``x (1 - x) u''(x) = 1/2 + x (1 - x) s''(x)``, finite up to the endpoints."""
        x = np.asarray(x, dtype=float)
        return 0.5 + x * (1 - x) * self.smooth.deriv(2)(x)

    def check_convex(self, n: int = 2001) -> float:
        """Minimum of ``x (1 - x) u''`` on a closed grid; raises if not positive."""
        x = np.linspace(0.0, 1.0, n)
        m = float(self.reduced_d2(x).min())
        if m <= 0:
            raise InvalidPotentialError(f"symplectic potential not strictly convex (min x(1-x)u'' = {m:.3e})")
        return m

    def combine(self, other: "SymplecticPotential", t: float) -> "SymplecticPotential":
        """``(1 - t) self + t other``."""
        return SymplecticPotential((1 - t) * self.smooth + t * other.smooth)

    def shifted(self, c: float) -> "SymplecticPotential":
        """Potential whose Kahler side is ``phi + c`` (``u - c``)."""
        return SymplecticPotential(self.smooth - c)

    def moment(self, rho, iters: int = 60) -> np.ndarray:
        """Solve ``u'(x) = rho`` by Newton in the logit variable ``y = log(x/(1-x))``."""
        rho = np.asarray(rho, dtype=float)
        y = 2 * rho - 2 * self.smooth.deriv(1)(fs_moment(rho))
        ds1, ds2 = self.smooth.deriv(1), self.smooth.deriv(2)
        for _ in range(iters):
            x = 0.5 * (1 + np.tanh(0.5 * y))
            g = 0.5 * y + ds1(x) - rho
            dg = 0.5 + x * (1 - x) * ds2(x)
            if np.any(dg <= 0):
                raise InvalidPotentialError("Legendre inversion failed: u' not monotone")
            step = g / dg
            y = y - step
            if np.max(np.abs(step)) < 1e-15 * (1 + np.max(np.abs(y))):
                break
        return 0.5 * (1 + np.tanh(0.5 * y))

    def kahler(self, rho) -> np.ndarray:
        """``Phi_u(rho) = x rho - u(x)``."""
        x = self.moment(rho)
        return x * rho - self(x)

    def relative(self, rho) -> np.ndarray:
        """Relative potential ``phi = Phi_u - Phi_G``."""
        return self.kahler(rho) - fs_potential(rho)


GUILLEMIN = SymplecticPotential()


def potential_preset(name: str, params: Sequence[float] = ()) -> SymplecticPotential:
    """Named potentials: ``guillemin``, ``bump`` ``[c]`` (``c x(1-x)``), ``affine`` ``[a, b]``, ``poly`` (coefficients)."""
    params = [float(p) for p in params]
    if name == "guillemin":
        return SymplecticPotential()
    if name == "bump":
        c = params[0] if params else 0.1
        return SymplecticPotential(Polynomial([0.0, c, -c]))
    if name == "affine":
        a, b = (params + [0.0, 0.0])[:2]
        return SymplecticPotential(Polynomial([a, b]))
    if name == "poly":
        return SymplecticPotential(Polynomial(params or [0.0]))
    raise InvalidParameterError(f"unknown potential preset {name!r}")


PATH_PRESETS = {
    "constant": (("guillemin", ()), ("guillemin", ())),
    "affine": (("guillemin", ()), ("affine", (0.0, 0.3))),
    "bump": (("guillemin", ()), ("bump", (0.1,))),
    "bump_affine": (("bump", (0.05,)), ("poly", (0.2, 0.35, -0.25))),
}


@dataclass(frozen=True)
class ToricPath:
    """Linear path ``u_t = (1 - t) u0 + t u1``; linear in ``u`` is a geodesic."""

    u0: SymplecticPotential
    u1: SymplecticPotential

    def __post_init__(self):
        self.u0.check_convex()
        self.u1.check_convex()

    def at(self, t: float) -> SymplecticPotential:
        return self.u0.combine(self.u1, t)

    @property
    def velocity(self) -> Polynomial:
        """``d u_t / dt = s1 - s0`` (independent of ``t``)."""
        return self.u1.smooth - self.u0.smooth

    def is_affine(self, tol: float = 1e-12) -> bool:
        v = self.velocity
        return bool(np.all(np.abs(v.deriv(2).coef) <= tol)) if v.degree() >= 2 else True


def path_preset(name: str) -> ToricPath:
    if name not in PATH_PRESETS:
        raise InvalidParameterError(f"unknown path preset {name!r}; known: {', '.join(PATH_PRESETS)}")
    (a, pa), (b, pb) = PATH_PRESETS[name]
    return ToricPath(potential_preset(a, pa), potential_preset(b, pb))


def toric_geodesic(u0: SymplecticPotential, u1: SymplecticPotential, t: float) -> SymplecticPotential:
    """Fiber of the geodesic joining ``u0`` and ``u1`` at time ``t``."""
    return ToricPath(u0, u1).at(t)


# ------------------------------------------------------------------ Mabuchi


def volume_ratio_x(u: SymplecticPotential, x) -> np.ndarray:
    """``f = omega_phi / omega`` at the point with ``u``-moment coordinate ``x``.

    ``f = u_G''(x_G) / u''(x)`` where ``x_G`` is the background moment of
    ``rho = u'(x)``.  With ``y = logit(x) + 2 s'(x) = logit(x_G)`` this is
    ``x(1-x) / (x_G(1-x_G)) * (1/2) / (x(1-x) u''(x))``, evaluated in log
    form; the endpoint limits are ``e^{-2 s'(0)}`` and ``e^{2 s'(1)}``.
    """
    x = np.asarray(x, dtype=float)
    ds = u.smooth.deriv(1)(x)
    inner = (x > 0) & (x < 1)
    xi = np.where(inner, x, 0.5)
    y = np.log(xi) - np.log1p(-xi) + 2 * ds
    log_ratio = np.log(xi) + np.logaddexp(0.0, -y) + np.log1p(-xi) + np.logaddexp(0.0, y)
    log_ratio = np.where(x <= 0, -2 * ds, np.where(x >= 1, 2 * ds, log_ratio))
    return np.exp(log_ratio) * 0.5 / u.reduced_d2(x)


def volume_ratio_y(u: SymplecticPotential, y) -> np.ndarray:
    """``f`` at the point with background moment coordinate ``y``."""
    y = np.asarray(y, dtype=float)
    x = u.moment(guillemin_d1(y))
    return volume_ratio_x(u, x)


@dataclass
class MabuchiBreakdown:
    """Energy pieces of one fiber; ``H_alt`` is ``int f log f omega``."""

    E: float
    E_ric: float
    H: float
    M: float
    H_alt: float
    inf_f: float

    def as_row(self) -> dict:
        return {"E": self.E, "E_Ric": self.E_ric, "H": self.H, "M": self.M, "H_alt": self.H_alt, "inf_f": self.inf_f}


def mabuchi(u: SymplecticPotential, n_quad: int = 400) -> MabuchiBreakdown:
    """Mabuchi functional of the fiber ``u`` against the Fubini-Study background.

    Gauss-Legendre on the whole moment interval; every integrand is smooth
    up to the endpoints after the Guillemin split.

    Raises
    ------
    DegenerateFiberError
        If the volume-form ratio is not positive at a quadrature node.
    """
    xq, wq = _leggauss01(n_quad)
    rho_u = u.d1(xq)
    # int phi omega_phi in the u-moment coordinate
    phi_u = xq * rho_u - u(xq) - fs_potential(rho_u)
    I_u = float(wq @ phi_u)
    # int phi omega in the background moment coordinate
    rho_g = guillemin_d1(xq)
    I_g = float(wq @ u.relative(rho_g))
    f = volume_ratio_x(u, xq)
    if np.any(~np.isfinite(f)) or np.any(f <= 0):
        raise DegenerateFiberError("volume-form ratio not positive")
    H = float(wq @ np.log(f))
    fy = volume_ratio_y(u, xq)
    H_alt = float(wq @ (fy * np.log(fy)))
    E = 0.5 * (I_g + I_u)
    E_ric = RBAR * I_g
    xs = np.linspace(0, 1, 2001)
    inf_f = float(volume_ratio_x(u, xs).min())
    return MabuchiBreakdown(E, E_ric, H, RBAR * E - E_ric + H, H_alt, inf_f)


def donaldson_functional(u: SymplecticPotential, n_quad: int = 400) -> float:
    """``-int log u'' + 2 (u(0) + u(1)) - 4 int u`` on ``[0, 1]``.

    Differences ``D(u) - D(u_G)`` reproduce the Mabuchi functional; the
    logarithm is split as ``log(u''/u_G'') + log u_G''`` with
    ``int_0^1 log u_G'' = log 2 - 2`` so the quadrature sees smooth data.
    """
    xq, wq = _leggauss01(n_quad)
    red = float(wq @ np.log(2 * u.reduced_d2(xq)))
    log_int = red + (np.log(2.0) - 2.0)
    return -log_int + 2 * (float(u(np.array([0.0]))[0]) + float(u(np.array([1.0]))[0])) - 4 * float(wq @ u(xq))


def mabuchi_oracle(u: SymplecticPotential, n_quad: int = 400) -> float:
    """Independent Mabuchi value ``D(u) - D(u_G)``."""
    return donaldson_functional(u, n_quad) - donaldson_functional(GUILLEMIN, n_quad)


def truncated_mabuchi(u: SymplecticPotential, A: float, n_quad: int = 400, breakdown: MabuchiBreakdown | None = None) -> float:
    """``M_A`` with entropy density ``max(log f, -A)``.

    This is the entropy with ``log omega_phi`` capped below by ``chi - A``,
    ``chi = log omega`` of the background.
    """
    b = mabuchi(u, n_quad) if breakdown is None else breakdown
    xq, wq = _leggauss01(n_quad)
    f = volume_ratio_x(u, xq)
    HA = float(wq @ np.maximum(np.log(f), -A))
    return RBAR * b.E - b.E_ric + HA


def truncation_threshold(u: SymplecticPotential) -> float:
    """``A_0 = sup(chi - log omega_phi) = -log inf f``."""
    return -np.log(mabuchi(u).inf_f)


# ------------------------------------------------------------------ scans


@dataclass
class ConvexityTable:
    """Second differences of ``M`` along a path."""

    t: np.ndarray
    M: np.ndarray
    d2: np.ndarray
    d2_coarse: np.ndarray
    fd_estimate: float
    tolerance: float
    verdict: str
    margin: float

    def rows(self):
        for i, t in enumerate(self.t):
            yield {"t": float(t), "M": float(self.M[i]), "d2": float(self.d2[i]) if i < len(self.d2) else float("nan")}


def convexity_scan(path: ToricPath, n_t: int = 11, n_quad: int = 400, floor: float = 1e-9, margin: float | None = None) -> ConvexityTable:
    """Classify ``t -> M(u_t)`` on ``[0, 1]`` as LINEAR, STRICTLY-CONVEX or MIXED.

    ``d2`` holds central second differences at spacing ``dt``; the error
    estimate compares with spacing ``2 dt`` at the shared points.  LINEAR
    needs ``max|d2| <= max(3 * estimate, floor)``; STRICTLY-CONVEX needs
    ``min d2 > margin`` where ``margin`` defaults to that same tolerance.
    """
    if n_t < 5:
        raise InvalidParameterError("need at least 5 time samples")
    ts = np.linspace(0.0, 1.0, n_t)
    dt = ts[1] - ts[0]
    M = np.array([mabuchi(path.at(t), n_quad).M for t in ts])
    d2 = (M[2:] - 2 * M[1:-1] + M[:-2]) / dt**2
    d2c = (M[4:] - 2 * M[2:-2] + M[:-4]) / (2 * dt) ** 2
    est = float(np.max(np.abs(d2[1:-1] - d2c))) if d2c.size else 0.0
    tol = max(3 * est, floor)
    mg = tol if margin is None else margin
    if np.max(np.abs(d2)) <= tol:
        verdict = "LINEAR"
    elif np.min(d2) > mg:
        verdict = "STRICTLY-CONVEX"
    else:
        verdict = "MIXED"
    return ConvexityTable(ts, M, d2, d2c, est, tol, verdict, float(np.min(d2)))


def linear_path_second_variation(path: ToricPath, t: float, n_quad: int = 400) -> float:
    """``d^2 M / dt^2 = int (v''/u_t'')^2 dx`` along a linear path, ``v = u1 - u0``."""
    xq, wq = _leggauss01(n_quad)
    u = path.at(t)
    v2 = path.velocity.deriv(2)(xq)
    return float(wq @ ((xq * (1 - xq) * v2 / u.reduced_d2(xq)) ** 2))


def geodesic_defect(path: ToricPath, t: float, x_grid=None, h: float = 1e-3) -> float:
    """``max |c(phi_t)|`` with ``c = Phi_tt - (Phi_t')^2 / Phi''`` on a moment grid.

    ``Phi_tt`` is a second difference in ``t`` at fixed ``rho``; ``Phi_t' =
    dx_t(rho)/dt`` is a central difference of the Legendre inverse; ``Phi'' =
    1/u_t''`` is exact.
    """
    x = np.linspace(0.1, 0.9, 41) if x_grid is None else np.asarray(x_grid, dtype=float)
    u = path.at(t)
    rho = u.d1(x)
    up, um = path.at(t + h), path.at(t - h)
    Ptt = (up.kahler(rho) - 2 * u.kahler(rho) + um.kahler(rho)) / h**2
    xdot = (up.moment(rho) - um.moment(rho)) / (2 * h)
    c = Ptt - xdot**2 * u.d2(x)
    return float(np.max(np.abs(c)))


def _d1(F, x, h):
    """Fourth-order central first derivative."""
    return (F(x - 2 * h) - 8 * F(x - h) + 8 * F(x + h) - F(x + 2 * h)) / (12 * h)


def _d2(F, x, h):
    """Fourth-order central second derivative."""
    return (-F(x - 2 * h) + 16 * F(x - h) - 30 * F(x) + 16 * F(x + h) - F(x + 2 * h)) / (12 * h**2)


def vector_field_residual(path: ToricPath, t: float, x_grid=None, h: float = 1e-2, d: float = 1e-2) -> tuple[float, float]:
    """Residuals of the fiberwise vector field ``V = d_t + a d_s`` in ``s = log w``.

    ``a = -2 Phi_t' / Phi''`` is a real function of ``rho``.  Returns
    ``(max |d_rho a| / 2, max |d_tbar a - 2 c' / Phi''|)`` where ``d_tbar``
    acts at fixed moment coordinate and ``c`` is the geodesic defect as a
    function of ``rho``.  All derivatives are fourth-order central
    differences (step ``h`` in ``t``, ``d`` in ``rho``).  The first residual
    vanishes exactly when ``V`` is holomorphic on the fiber.
    """
    x = np.linspace(0.1, 0.9, 41) if x_grid is None else np.asarray(x_grid, dtype=float)

    def xdot(tt, rho):
        return _d1(lambda s: path.at(s).moment(rho), tt, h)

    def coeff(tt, rho):
        u = path.at(tt)
        return -2 * xdot(tt, rho) * u.d2(u.moment(rho))

    def defect(tt, rho):
        u = path.at(tt)
        Ptt = _d2(lambda s: path.at(s).kahler(rho), tt, h)
        return Ptt - xdot(tt, rho) ** 2 * u.d2(u.moment(rho))

    u = path.at(t)
    rho = u.d1(x)
    r1 = np.max(np.abs(_d1(lambda r: coeff(t, r), rho, d))) / 2
    # d/dt at fixed x: the point sits at rho_t = u_t'(x)
    dtbar = 0.5 * _d1(lambda s: coeff(s, path.at(s).d1(x)), t, h)
    lift = 2 * _d1(lambda r: defect(t, r), rho, d) * u.d2(x)
    r2 = np.max(np.abs(dtbar - lift))
    return float(r1), float(r2)


@dataclass
class TruncationReport:
    """Gap and truncation data along a path."""

    t: np.ndarray
    A: np.ndarray
    M: np.ndarray
    M_A: np.ndarray
    A0: np.ndarray
    level_measure: np.ndarray
    inf_f: np.ndarray
    eps0: float
    linear: bool
    gap_verdict: str
    assumption_w12: bool = False


def gap_scan(path: ToricPath, n_t: int = 11, A_grid: Sequence[float] = (0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 40.0), n_quad: int = 400, linear: bool | None = None) -> TruncationReport:
    """Per-t infimum of ``f_t``, level-set measures and truncated functionals.

    ``level_measure[i, k]`` is the background measure of ``{f_{t_i} >= e^{-A_k}}``.
    The gap verdict ``NONDEGENERATE`` (``inf f_t >= eps0 > 0``) is only
    asserted for linear paths; otherwise ``NOT-ASSERTED``.
    """
    ts = np.linspace(0, 1, n_t)
    A = np.asarray(A_grid, dtype=float)
    xq, wq = _leggauss01(n_quad)
    M, MA, A0, inf = [], [], [], []
    lev = np.zeros((n_t, A.size))
    for i, t in enumerate(ts):
        u = path.at(t)
        b = mabuchi(u, n_quad)
        M.append(b.M)
        MA.append([truncated_mabuchi(u, a, n_quad, b) for a in A])
        inf.append(b.inf_f)
        A0.append(-np.log(b.inf_f))
        fy = volume_ratio_y(u, xq)
        lev[i] = [(wq * (fy >= np.exp(-a))).sum() for a in A]
    inf = np.array(inf)
    eps0 = float(inf.min())
    is_linear = convexity_scan(path, n_quad=n_quad).verdict == "LINEAR" if linear is None else linear
    verdict = ("NONDEGENERATE" if eps0 > 0 else "DEGENERATE") if is_linear else "NOT-ASSERTED"
    return TruncationReport(ts, A, np.array(M), np.array(MA), np.array(A0), lev, inf, eps0, is_linear, verdict)
