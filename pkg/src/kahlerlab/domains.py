"""Polydisks, parallelogram domain families and tensor polar quadrature."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidDomainError, InvalidParameterError


@dataclass(frozen=True)
class Polydisk:
    """Product of ``n`` coordinate disks of common radius.

    For ``n = 1`` this is the disk ``B_r(center)``; for ``n = 2`` the
    bidisk, which stands in for the ball so quadrature stays a tensor rule.
    """

    center: tuple
    radius: float

    def __post_init__(self):
        if not np.isfinite(self.radius) or self.radius <= 0:
            raise InvalidDomainError(f"radius must be positive, got {self.radius}")
        c = tuple(complex(v) for v in np.atleast_1d(self.center))
        if len(c) not in (1, 2):
            raise InvalidDomainError("only n = 1 and n = 2 are supported")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def n(self) -> int:
        return len(self.center)

    @property
    def volume(self) -> float:
        return (np.pi * self.radius**2) ** self.n

    def contains(self, z, margin: float = 0.0) -> np.ndarray:
        z = np.asarray(z, dtype=complex).reshape(-1, self.n)
        return np.all(np.abs(z - np.array(self.center)) <= self.radius - margin, axis=-1)

    def translated(self, shift) -> "Polydisk":
        shift = np.atleast_1d(np.asarray(shift, dtype=complex))
        return Polydisk(tuple(np.array(self.center) + shift), self.radius)


def disk(center=0.0, radius: float = 1.0) -> Polydisk:
    """The disk ``B_r(center)`` in C."""
    return Polydisk((complex(center),), radius)


@dataclass(frozen=True)
class DomainFamily:
    """Parallelogram family ``fiber(t) = base + t a``."""

    base: Polydisk
    slope: tuple

    @property
    def n(self) -> int:
        return self.base.n

    def fiber(self, t) -> Polydisk:
        return self.base.translated(complex(t) * np.array(self.slope, dtype=complex))


def make_parallelogram(base: Polydisk, a) -> DomainFamily:
    """Domain family whose t-slice is ``base`` translated by ``t a``.

    Raises
    ------
    InvalidDomainError
        If the radius is not positive or the slope has the wrong length.
    """
    if not isinstance(base, Polydisk):
        raise InvalidDomainError("base must be a Polydisk")
    if base.radius <= 0:
        raise InvalidDomainError("radius must be positive")
    a = tuple(complex(v) for v in np.atleast_1d(np.asarray(a, dtype=complex)))
    if len(a) != base.n:
        raise InvalidDomainError(f"slope must have length {base.n}")
    return DomainFamily(base, a)


@dataclass(frozen=True)
class QuadratureGrid:
    """Positive-weight quadrature on a (poly)disk.

    Attributes
    ----------
    nodes : ndarray, shape (P, n)
        Complex nodes.
    weights : ndarray, shape (P,)
        Positive weights summing to the Lebesgue volume.
    domain : Polydisk
    n_rad, n_ang : int
        Radial and angular counts of each polar factor.
    radial_rule : str
    """

    nodes: np.ndarray
    weights: np.ndarray
    domain: Polydisk
    n_rad: int
    n_ang: int
    radial_rule: str = "gauss-legendre"
    radii: np.ndarray = field(default=None, repr=False)
    angles: np.ndarray = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.domain.n

    @property
    def scheme(self) -> dict:
        return {"n_rad": self.n_rad, "n_ang": self.n_ang, "radial_rule": self.radial_rule, "n": self.n, "nodes": int(self.weights.size)}

    def integrate(self, values) -> complex:
        return np.tensordot(self.weights, values, axes=(0, 0))

    def translated(self, shift) -> "QuadratureGrid":
        shift = np.atleast_1d(np.asarray(shift, dtype=complex))
        return QuadratureGrid(self.nodes + shift, self.weights, self.domain.translated(shift), self.n_rad, self.n_ang, self.radial_rule, self.radii, self.angles)


def _polar_factor(r, n_rad, n_ang):
    x, w = np.polynomial.legendre.leggauss(n_rad)
    rho = 0.5 * r * (x + 1.0)
    wr = 0.5 * r * w * rho
    theta = 2.0 * np.pi * np.arange(n_ang) / n_ang
    nodes = (rho[:, None] * np.exp(1j * theta)[None, :]).reshape(-1)
    weights = np.repeat(wr * (2.0 * np.pi / n_ang), n_ang)
    return nodes, weights, rho, theta


def disk_quadrature(r: float, n_rad: int, n_ang: int, center=0.0) -> QuadratureGrid:
    """Gauss-Legendre (radial, with Jacobian) times uniform angular grid.

    Nodes are ordered radius-major, so ``nodes.reshape(n_rad, n_ang)``
    recovers the polar layout.  The rule integrates ``zeta^j conj(zeta)^k``
    exactly for ``j + k <= 2 n_rad - 2`` and ``|j - k| < n_ang``.
    """
    if n_rad < 4 or n_ang < 8:
        raise InvalidParameterError(f"grid too small: n_rad={n_rad} (>= 4), n_ang={n_ang} (>= 8)")
    dom = disk(center, r)
    nodes, weights, rho, theta = _polar_factor(dom.radius, n_rad, n_ang)
    return QuadratureGrid((nodes + dom.center[0])[:, None], weights, dom, n_rad, n_ang, radii=rho, angles=theta)


def polydisk_quadrature(r: float, n_rad: int, n_ang: int, center=(0.0, 0.0)) -> QuadratureGrid:
    """Tensor product of two polar grids on the bidisk."""
    if n_rad < 4 or n_ang < 8:
        raise InvalidParameterError(f"grid too small: n_rad={n_rad} (>= 4), n_ang={n_ang} (>= 8)")
    dom = Polydisk(tuple(center), r)
    if dom.n != 2:
        raise InvalidDomainError("polydisk_quadrature needs a two-dimensional center")
    p, w, rho, theta = _polar_factor(dom.radius, n_rad, n_ang)
    z1 = np.repeat(p, p.size) + dom.center[0]
    z2 = np.tile(p, p.size) + dom.center[1]
    weights = np.outer(w, w).reshape(-1)
    return QuadratureGrid(np.stack([z1, z2], axis=-1), weights, dom, n_rad, n_ang, radii=rho, angles=theta)


def quadrature_for(domain: Polydisk, n_rad: int, n_ang: int) -> QuadratureGrid:
    """Polar tensor grid on ``domain`` (disk or bidisk)."""
    if domain.n == 1:
        return disk_quadrature(domain.radius, n_rad, n_ang, domain.center[0])
    return polydisk_quadrature(domain.radius, n_rad, n_ang, domain.center)
