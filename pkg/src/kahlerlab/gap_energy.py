"""Dirichlet energies of grid functions on the unit cube and gap verdicts.

Grid functions live on the vertex lattice ``x_i = i h``, ``h = 1/(k - 1)``,
of ``[0, 1]^n``.  The discrete energy of axis ``a`` is the sum over lattice
edges along ``a`` of ``(du / h)^2 h`` times the trapezoid weight of the
transverse coordinates, so a unit linear ramp has energy exactly 1 and a
single unit jump across one edge costs ``1/h``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.ndimage import uniform_filter

from .errors import GapPreconditionError, InvalidParameterError

GAP_TOL = 1e-6


@dataclass(frozen=True)
class GridFunction:
    """Nonnegative samples on the vertex lattice of ``[0, 1]^n``."""

    values: np.ndarray
    bound: float | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim not in (1, 2, 3):
            raise InvalidParameterError(f"grid functions live in dimension 1, 2 or 3, got {v.ndim}")
        if len(set(v.shape)) != 1:
            raise InvalidParameterError(f"grid must be cubic, got shape {v.shape}")
        if v.shape[0] < 9:
            raise InvalidParameterError("resolution must be at least 8 cells per axis")
        if not np.all(np.isfinite(v)):
            raise InvalidParameterError("grid function has non-finite values")
        if np.any(v < 0):
            raise InvalidParameterError("grid function must be nonnegative")
        object.__setattr__(self, "values", v)
        if self.bound is None:
            object.__setattr__(self, "bound", float(v.max()))

    @property
    def n(self) -> int:
        return self.values.ndim

    @property
    def k(self) -> int:
        return self.values.shape[0]

    @property
    def h(self) -> float:
        return 1.0 / (self.k - 1)

    @property
    def axis_nodes(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.k)

    def mesh(self) -> list[np.ndarray]:
        x = self.axis_nodes
        return np.meshgrid(*([x] * self.n), indexing="ij")

    @classmethod
    def sample(cls, func: Callable, k: int, n: int = 2) -> "GridFunction":
        """Sample ``func(*coords)`` on the lattice with ``k`` nodes per axis."""
        x = np.linspace(0.0, 1.0, k)
        return cls(np.asarray(func(*np.meshgrid(*([x] * n), indexing="ij")), dtype=float))


def _trapezoid(k: int, h: float) -> np.ndarray:
    w = np.full(k, h)
    w[0] = w[-1] = h / 2
    return w


@dataclass
class EnergyReport:
    """Energies of one grid function.

    ``slices[a]`` holds the unweighted 1D energies of every lattice line
    parallel to axis ``a`` (indexed by the remaining coordinates).
    """

    total: float
    axis: np.ndarray
    slices: list[np.ndarray]
    h: float
    G: "GField | None" = None
    verdict: "GapVerdict | None" = None

    @property
    def decomposition_defect(self) -> float:
        return abs(self.total - float(self.axis.sum()))


def slice_energies(u: GridFunction, axis: int) -> np.ndarray:
    """1D energies ``sum (du)^2 / h`` of the lattice lines along ``axis``."""
    d = np.diff(u.values, axis=axis)
    return (d**2).sum(axis=axis) / u.h


def dirichlet_energy(u: GridFunction) -> EnergyReport:
    """Discrete Dirichlet energy with its exact axis decomposition."""
    w = _trapezoid(u.k, u.h)
    slices, axis = [], []
    for a in range(u.n):
        s = slice_energies(u, a)
        wt = np.ones(())
        for _ in range(u.n - 1):
            wt = np.multiply.outer(wt, w)
        slices.append(s)
        axis.append(float((s * wt).sum()))
    axis = np.array(axis)
    return EnergyReport(total=float(axis.sum()), axis=axis, slices=slices, h=u.h)


def blowup_threshold(h: float) -> float:
    """``E_blowup(h) = 1/(4h)``: below one unit jump (``1/h``), above any fixed-width ramp as ``h -> 0``."""
    return 0.25 / h


# ------------------------------------------------------------------ verdicts


@dataclass(frozen=True)
class GapVerdict:
    """``kind`` is ``AllAbove``, ``Trivial`` or ``Violation``.

    For a violation, ``witness`` is ``(axis, line index)`` of a lattice line
    crossing between the zero set and ``{u >= 1}``, ``witness_energy`` its
    1D energy and ``energy_bound`` the threshold it exceeds.
    """

    kind: str
    witness: tuple | None = None
    witness_energy: float | None = None
    energy_bound: float | None = None
    zero_fraction: float = 0.0


def _check_gap(u: GridFunction, gap_level: float, tol: float):
    v = u.values
    bad = (v > tol) & (v < gap_level - tol)
    if np.any(bad):
        cell = tuple(int(i) for i in np.argwhere(bad)[0])
        raise GapPreconditionError(
            f"value {v[cell]:.6g} at cell {cell} lies strictly between 0 and {gap_level}", cell=cell
        )


def gap_verdict(u: GridFunction, gap_level: float = 1.0, tol: float = GAP_TOL) -> GapVerdict:
    """Discrete form of the slice argument for functions valued in ``{0} U [gap, oo)``.

    A line that meets both the zero set and ``{u >= gap}`` carries a jump of
    at least ``gap`` across one edge, hence 1D energy at least ``gap^2 / h``,
    which exceeds ``E_blowup(h)``.  The returned witness is the crossing line
    of least energy.

    Raises
    ------
    GapPreconditionError
        If some value lies in ``(tol, gap - tol)``.
    """
    _check_gap(u, gap_level, tol)
    v = u.values
    zero = v <= tol
    if np.all(zero):
        return GapVerdict("Trivial", zero_fraction=1.0)
    if not np.any(zero):
        return GapVerdict("AllAbove")
    best = None
    for a in range(u.n):
        z_any = zero.any(axis=a)
        hi_any = (~zero).any(axis=a)
        cross = z_any & hi_any
        if not np.any(cross):
            continue
        s = slice_energies(u, a)
        idx = np.argwhere(cross)
        e = s[cross]
        j = int(np.argmin(e))
        if best is None or e[j] < best[2]:
            best = (a, tuple(int(i) for i in idx[j]), float(e[j]))
    a, line, e = best
    return GapVerdict(
        "Violation", witness=(a, line), witness_energy=e, energy_bound=blowup_threshold(u.h), zero_fraction=float(zero.mean())
    )


# ------------------------------------------------------------------ refinement


REFINEMENT_H = (1 / 16, 1 / 32, 1 / 64, 1 / 128)


@dataclass
class RefinementTable:
    h: np.ndarray
    energy: np.ndarray
    slope: float
    variation: float
    verdict: str

    def rows(self):
        for h, e in zip(self.h, self.energy):
            yield {"h": float(h), "energy": float(e)}


def refinement_scan(family: Callable[[float], GridFunction], hs: Sequence[float] = REFINEMENT_H, blowup_slope: float = -0.8, bounded_variation: float = 0.2) -> RefinementTable:
    """Energy against mesh size; log-log slope and relative spread.

    ``BLOWUP`` when the fitted slope is ``<= blowup_slope``; ``BOUNDED``
    when ``(max - min) / max`` of the energies is below ``bounded_variation``
    (or all energies vanish); otherwise ``INDETERMINATE``.
    """
    hs = np.asarray(hs, dtype=float)
    E = np.array([dirichlet_energy(family(h)).total for h in hs])
    if np.all(E <= 1e-14):
        return RefinementTable(hs, E, 0.0, 0.0, "BOUNDED")
    slope = float(np.polyfit(np.log(hs), np.log(np.maximum(E, 1e-300)), 1)[0])
    var = float((E.max() - E.min()) / E.max())
    if slope <= blowup_slope:
        verdict = "BLOWUP"
    elif var < bounded_variation:
        verdict = "BOUNDED"
    else:
        verdict = "INDETERMINATE"
    return RefinementTable(hs, E, slope, var, verdict)


# ------------------------------------------------------------------ G field


@dataclass
class GField:
    """``G[i, j]``: ball-averaged squared gradient at probe ``i`` and scale ``eps[j]``."""

    probes: np.ndarray
    eps: np.ndarray
    r: float
    G: np.ndarray
    slopes: np.ndarray
    trend: list[str]

    def rows(self):
        for i, p in enumerate(self.probes):
            for j, e in enumerate(self.eps):
                yield {"probe": i, **{f"x{a}": float(c) for a, c in enumerate(p)}, "eps": float(e), "G": float(self.G[i, j])}


def mollify(u: GridFunction, eps: float) -> np.ndarray:
    """Separable box filter of width ``eps`` (odd number of lattice cells)."""
    size = max(1, int(round(eps / u.h)))
    size += 1 - size % 2
    return uniform_filter(u.values, size=size, mode="nearest")


def degenerate_locus_energy(u: GridFunction, eps_list: Sequence[float], r: float, probes, vanish_tol: float = 1e-8) -> GField:
    """``G_{eps, r}(p)``: average over ``B_r(p)`` of ``|grad u_eps|^2``.

    ``trend`` per probe is ``GROWING`` when ``G`` increases as ``eps``
    decreases with log-log slope ``<= -1/2``, ``VANISHING`` when every value
    is below ``vanish_tol`` and ``BOUNDED`` otherwise.
    """
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    if probes.shape[1] != u.n:
        raise InvalidParameterError(f"probes must have {u.n} coordinates")
    if np.any(probes - r <= 0) or np.any(probes + r >= 1):
        raise InvalidParameterError("probe balls must lie inside the unit cube")
    eps = np.asarray(sorted(eps_list, reverse=True), dtype=float)
    coords = np.stack(u.mesh(), axis=-1)
    masks = [np.sum((coords - p) ** 2, axis=-1) <= r**2 for p in probes]
    G = np.zeros((len(probes), eps.size))
    for j, e in enumerate(eps):
        ue = mollify(u, e)
        grads = np.gradient(ue, u.h) if u.n > 1 else [np.gradient(ue, u.h)]
        g2 = sum(g**2 for g in grads)
        for i, m in enumerate(masks):
            G[i, j] = g2[m].mean()
    slopes = np.full(len(probes), np.nan)
    trend = []
    for i in range(len(probes)):
        if np.all(G[i] < vanish_tol):
            trend.append("VANISHING")
            continue
        pos = G[i] > 0
        if pos.sum() >= 2:
            slopes[i] = np.polyfit(np.log(eps[pos]), np.log(G[i, pos]), 1)[0]
        growing = np.all(np.diff(G[i]) > 0) and slopes[i] <= -0.5
        trend.append("GROWING" if growing else "BOUNDED")
    return GField(probes, eps, r, G, slopes, trend)


# ------------------------------------------------------------------ planted configurations


def half_indicator(k: int, n: int = 2, axis: int = 0, position: float = 0.5, width: float = 0.0) -> GridFunction:
    """``1`` for ``x_axis > position``; a linear ramp of ``width`` when positive."""
    x = np.linspace(0.0, 1.0, k)
    if width > 0:
        prof = np.clip((x - position + width / 2) / width, 0.0, 1.0)
    else:
        prof = (x > position).astype(float)
    shape = [1] * n
    shape[axis] = k
    return GridFunction(np.broadcast_to(prof.reshape(shape), (k,) * n).copy())


def annulus_indicator(k: int, n: int = 2, inner: float = 0.15, outer: float = 0.35, level: float = 1.0) -> GridFunction:
    """``level`` on the spherical shell about the cube center, ``0`` elsewhere."""
    g = GridFunction(np.zeros((k,) * n))
    rr = np.sqrt(sum((c - 0.5) ** 2 for c in g.mesh()))
    return GridFunction(np.where((rr >= inner) & (rr <= outer), level, 0.0))


PLANTED_KINDS = ("ones", "zeros", "above", "half", "annulus", "blocks")


def planted(kind: str, k: int, n: int, rng: np.random.Generator) -> tuple[GridFunction, str]:
    """Random configuration of a given kind and its expected gap verdict."""
    if kind == "ones":
        return GridFunction(np.ones((k,) * n)), "AllAbove"
    if kind == "zeros":
        return GridFunction(np.zeros((k,) * n)), "Trivial"
    if kind == "above":
        return GridFunction(1.0 + rng.uniform(0, 2, (k,) * n)), "AllAbove"
    if kind == "half":
        pos = rng.uniform(0.2, 0.8)
        u = half_indicator(k, n, axis=int(rng.integers(n)), position=pos)
        return GridFunction(u.values * rng.uniform(1, 3)), "Violation"
    if kind == "annulus":
        a = rng.uniform(0.1, 0.25)
        w = max(rng.uniform(0.1, 0.2), 2.5 / (k - 1))
        return annulus_indicator(k, n, a, a + w, level=rng.uniform(1, 2)), "Violation"
    if kind == "blocks":
        v = np.where(rng.random((k,) * n) < 0.5, 0.0, 1.0 + rng.uniform(0, 1, (k,) * n))
        if np.all(v == 0) or np.all(v > 0):
            v.flat[0], v.flat[-1] = 0.0, 1.0
        return GridFunction(v), "Violation"
    raise InvalidParameterError(f"unknown planted kind {kind!r}; known: {', '.join(PLANTED_KINDS)}")


def planted_suite(count: int, seed: int, k_choices=(9, 17, 33), n_choices=(1, 2, 3)) -> list[tuple[GridFunction, str, str]]:
    """``count`` seeded configurations as ``(u, kind, expected)``."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        kind = PLANTED_KINDS[i % len(PLANTED_KINDS)]
        n = int(rng.choice(n_choices))
        k = int(rng.choice(k_choices if n < 3 else k_choices[:2]))
        u, expected = planted(kind, k, n, rng)
        out.append((u, kind, expected))
    return out
