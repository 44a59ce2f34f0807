"""Weight families phi(t, z) on C_t x C^n_z with analytic derivatives.

Every weight exposes its value, the holomorphic gradients in ``t`` and ``z``
and the full complex Hessian ``H[j, k] = d^2 phi / dw_j dconj(w_k)`` in the
joint variable ``w = (t, z_1, ..., z_n)``.  Points are passed as a complex
scalar (or array) ``t`` and a complex array ``z`` of shape ``(..., n)``.
"""
from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidParameterError, NotPlurisubharmonicError


def _joint(t, z, n):
    z = np.asarray(z, dtype=complex)
    if z.shape == () or z.shape[-1] != n:
        z = z[..., None] if n == 1 else z
    if z.shape[-1] != n:
        raise InvalidParameterError(f"expected z with trailing dimension {n}, got {z.shape}")
    t = np.broadcast_to(np.asarray(t, dtype=complex), z.shape[:-1])
    return np.concatenate([t[..., None], z], axis=-1)


class WeightFamily(ABC):
    """Smooth real weight on C_t x C^n_z.

    Subclasses implement the four methods below on the joint variable.
    ``psh_certificate`` records a claim of plurisubharmonicity which
    :func:`check_psh` verifies on sample nodes.
    """

    n: int = 1
    psh_certificate: bool = False

    @abstractmethod
    def joint_value(self, w: np.ndarray) -> np.ndarray:
        """Value at joint points ``w`` of shape ``(..., n + 1)``."""

    @abstractmethod
    def joint_grad(self, w: np.ndarray) -> np.ndarray:
        """Holomorphic gradient ``d phi / dw_j``, shape ``(..., n + 1)``."""

    @abstractmethod
    def joint_hess(self, w: np.ndarray) -> np.ndarray:
        """Complex Hessian, shape ``(..., n + 1, n + 1)``."""

    def value(self, t, z):
        return self.joint_value(_joint(t, z, self.n))

    __call__ = value

    def grad_t(self, t, z):
        return self.joint_grad(_joint(t, z, self.n))[..., 0]

    def grad_z(self, t, z):
        return self.joint_grad(_joint(t, z, self.n))[..., 1:]

    def hess(self, t, z):
        return self.joint_hess(_joint(t, z, self.n))


class _Poly:
    """Complex polynomial in (w, conj w) stored as a term list."""

    def __init__(self, coefs, alphas, betas, dim):
        coefs = np.asarray(coefs, dtype=complex).reshape(-1)
        alphas = np.asarray(alphas, dtype=int).reshape(coefs.size, dim)
        betas = np.asarray(betas, dtype=int).reshape(coefs.size, dim)
        merged: dict = {}
        for c, a, b in zip(coefs, alphas, betas):
            key = (tuple(a), tuple(b))
            merged[key] = merged.get(key, 0.0) + c
        keys = [k for k, c in merged.items() if c != 0]
        self.coefs = np.array([merged[k] for k in keys], dtype=complex)
        d = dim
        self.alphas = np.array([k[0] for k in keys], dtype=int).reshape(-1, d)
        self.betas = np.array([k[1] for k in keys], dtype=int).reshape(-1, d)
        self.dim = d

    def __call__(self, w):
        w = np.asarray(w, dtype=complex)
        out = np.zeros(w.shape[:-1], dtype=complex)
        if self.coefs.size == 0:
            return out
        wc = np.conj(w)
        for c, a, b in zip(self.coefs, self.alphas, self.betas):
            term = np.full(w.shape[:-1], c, dtype=complex)
            for j in range(self.dim):
                if a[j]:
                    term = term * w[..., j] ** a[j]
                if b[j]:
                    term = term * wc[..., j] ** b[j]
            out = out + term
        return out

    def d_hol(self, j):
        keep = self.alphas[:, j] > 0
        a = self.alphas[keep].copy()
        c = self.coefs[keep] * a[:, j]
        a[:, j] -= 1
        return _Poly(c, a, self.betas[keep], self.dim)

    def d_antihol(self, j):
        keep = self.betas[:, j] > 0
        b = self.betas[keep].copy()
        c = self.coefs[keep] * b[:, j]
        b[:, j] -= 1
        return _Poly(c, self.alphas[keep], b, self.dim)


class PolynomialWeight(WeightFamily):
    """Real polynomial weight ``phi = Re sum c w^alpha conj(w)^beta``.

    Parameters
    ----------
    n : int
        Number of z-variables.
    terms : sequence of (coef, alpha, beta)
        ``alpha`` and ``beta`` are length ``n + 1`` exponent tuples over
        ``w = (t, z)``.  The real part of the sum is taken, so any term list
        defines a real weight.
    psh_certificate : bool
        Claim that the weight is plurisubharmonic.
    """

    def __init__(self, n: int, terms: Sequence, psh_certificate: bool = False, label: str = "polynomial"):
        self.n = int(n)
        self.psh_certificate = bool(psh_certificate)
        self.label = label
        d = self.n + 1
        coefs, alphas, betas = [], [], []
        for c, a, b in terms:
            a = tuple(int(v) for v in a)
            b = tuple(int(v) for v in b)
            if len(a) != d or len(b) != d:
                raise InvalidParameterError(f"exponents must have length {d}")
            # Re(c w^a wbar^b) = (c w^a wbar^b + conj(c) w^b wbar^a) / 2
            coefs += [0.5 * complex(c), 0.5 * np.conj(complex(c))]
            alphas += [a, b]
            betas += [b, a]
        if not coefs:
            coefs, alphas, betas = [0.0], [(0,) * d], [(0,) * d]
        self._phi = _Poly(coefs, alphas, betas, d)
        self._grad = [self._phi.d_hol(j) for j in range(d)]
        self._hess = [[self._grad[j].d_antihol(k) for k in range(d)] for j in range(d)]

    def joint_value(self, w):
        return self._phi(w).real

    def joint_grad(self, w):
        return np.stack([g(w) for g in self._grad], axis=-1)

    def joint_hess(self, w):
        rows = [np.stack([h(w) for h in row], axis=-1) for row in self._hess]
        return np.stack(rows, axis=-2)

    @classmethod
    def from_forms(cls, hermitian, symmetric=None, quartic: float = 0.0, psh_certificate=None, label="quadratic"):
        """Build ``w^T H conj(w) + Re(w^T S w) + quartic |z|^4``.

        ``hermitian`` must be Hermitian; its entry ``H[j, k]`` multiplies
        ``w_j conj(w_k)`` and equals the complex Hessian entry.
        """
        H = np.asarray(hermitian, dtype=complex)
        d = H.shape[0]
        if H.shape != (d, d) or not np.allclose(H, H.conj().T, atol=1e-14):
            raise InvalidParameterError("hermitian form must be a square Hermitian matrix")
        n = d - 1
        eye = np.eye(d, dtype=int)
        terms = []
        for j in range(d):
            for k in range(d):
                if H[j, k] != 0:
                    # the pair (j,k),(k,j) is Hermitian so the real part is exact
                    terms.append((H[j, k], eye[j], eye[k]))
        if symmetric is not None:
            S = np.asarray(symmetric, dtype=complex)
            for j in range(d):
                for k in range(d):
                    if S[j, k] != 0:
                        terms.append((S[j, k], eye[j] + eye[k], np.zeros(d, dtype=int)))
        if quartic:
            for j in range(1, d):
                for k in range(1, d):
                    terms.append((quartic, eye[j] + eye[k], eye[j] + eye[k]))
        if psh_certificate is None:
            psh_certificate = bool(np.linalg.eigvalsh(H).min() >= -1e-14 and quartic >= 0)
        return cls(n, terms, psh_certificate=psh_certificate, label=label)


class TranslatedWeight(WeightFamily):
    """``phi_a(t, z) = phi(t, z + t a)`` with chain-rule derivatives."""

    def __init__(self, base: WeightFamily, a):
        self.base = base
        self.n = base.n
        self.psh_certificate = base.psh_certificate
        a = np.atleast_1d(np.asarray(a, dtype=complex))
        if a.shape != (self.n,):
            raise InvalidParameterError(f"slope must have length {self.n}")
        self.a = a
        d = self.n + 1
        # J[p, j] = d w'_p / d w_j with w' = (t, z + t a)
        J = np.eye(d, dtype=complex)
        J[1:, 0] = a
        self._J = J

    def _shift(self, w):
        w = np.asarray(w, dtype=complex)
        ws = w.copy()
        ws[..., 1:] = w[..., 1:] + w[..., :1] * self.a
        return ws

    def joint_value(self, w):
        return self.base.joint_value(self._shift(w))

    def joint_grad(self, w):
        return self.base.joint_grad(self._shift(w)) @ self._J

    def joint_hess(self, w):
        H = self.base.joint_hess(self._shift(w))
        return self._J.T @ H @ self._J.conj()


class ScaledWeight(WeightFamily):
    """``m * phi`` for a positive scale ``m``."""

    def __init__(self, base: WeightFamily, m: float):
        if m <= 0:
            raise InvalidParameterError("scale must be positive")
        self.base = base
        self.m = float(m)
        self.n = base.n
        self.psh_certificate = base.psh_certificate

    def joint_value(self, w):
        return self.m * self.base.joint_value(w)

    def joint_grad(self, w):
        return self.m * self.base.joint_grad(w)

    def joint_hess(self, w):
        return self.m * self.base.joint_hess(w)


def translate_weight(phi: WeightFamily, a) -> WeightFamily:
    """Return ``phi_a(t, z) = phi(t, z + t a)``."""
    return TranslatedWeight(phi, a)


def scale_weight(phi: WeightFamily, m: float) -> WeightFamily:
    """Return ``m * phi`` (identity object when ``m == 1``)."""
    return phi if m == 1 else ScaledWeight(phi, m)


def _hermitian_from_params(params, d):
    """Hermitian d x d matrix from ``d`` diagonals then ``(re, im)`` pairs."""
    params = [float(p) for p in params]
    if len(params) != d * d:
        raise InvalidParameterError(f"Hermitian form in dimension {d} needs {d * d} parameters, got {len(params)}")
    H = np.diag(np.asarray(params[:d], dtype=complex))
    it = iter(params[d:])
    for j in range(d):
        for k in range(j + 1, d):
            H[j, k] = complex(next(it), next(it))
            H[k, j] = np.conj(H[j, k])
    return H


PRESET_NAMES = ("zero", "gaussian", "quadratic", "quartic_perturbed", "separable", "translation", "t_harmonic")


def preset_weight(name: str, params: Sequence[float] = (), n: int = 1) -> PolynomialWeight:
    """Construct a named weight preset.

    Parameter layouts (``d = n + 1``):

    ``zero``
        no parameters, ``phi = 0``.
    ``gaussian``
        ``[c]``: ``c |z|^2``.
    ``quadratic``
        ``d*d`` Hermitian-form coefficients over ``(t, z)``: the ``d``
        diagonal entries followed by ``(re, im)`` of each upper entry.
    ``quartic_perturbed``
        quadratic parameters followed by ``eps``: adds ``eps |z|^4``.
    ``separable``
        ``[alpha]`` followed by ``n*n`` Hermitian coefficients in ``z``.
    ``translation``
        ``[re a_1, im a_1, ...]``: ``|z - t a|^2``.
    ``t_harmonic``
        ``[beta]`` followed by ``n*n`` Hermitian coefficients in ``z``:
        adds ``beta Re(t^2)``.
    """
    d = n + 1
    params = list(params)
    if name == "zero":
        return PolynomialWeight(n, [], psh_certificate=True, label=name)
    if name == "gaussian":
        c = float(params[0]) if params else 1.0
        H = np.zeros((d, d), dtype=complex)
        H[1:, 1:] = c * np.eye(n)
        return PolynomialWeight.from_forms(H, label=name)
    if name == "quadratic":
        return PolynomialWeight.from_forms(_hermitian_from_params(params, d), label=name)
    if name == "quartic_perturbed":
        if len(params) != d * d + 1:
            raise InvalidParameterError(f"quartic_perturbed needs {d * d + 1} parameters")
        H = _hermitian_from_params(params[:-1], d)
        return PolynomialWeight.from_forms(H, quartic=float(params[-1]), label=name)
    if name in ("separable", "t_harmonic"):
        if len(params) != 1 + n * n:
            raise InvalidParameterError(f"{name} needs {1 + n * n} parameters")
        H = np.zeros((d, d), dtype=complex)
        H[1:, 1:] = _hermitian_from_params(params[1:], n)
        if name == "separable":
            H[0, 0] = float(params[0])
            return PolynomialWeight.from_forms(H, label=name)
        S = np.zeros((d, d), dtype=complex)
        S[0, 0] = float(params[0])
        return PolynomialWeight.from_forms(H, symmetric=S, label=name)
    if name == "translation":
        if len(params) != 2 * n:
            raise InvalidParameterError(f"translation needs {2 * n} parameters")
        a = np.array([complex(params[2 * j], params[2 * j + 1]) for j in range(n)])
        # z_j - t a_j = sum_p M[j, p] w_p, so |z - t a|^2 = w^T (M^T conj M) conj(w)
        M = np.zeros((n, d), dtype=complex)
        M[:, 0] = -a
        M[:, 1:] = np.eye(n)
        H = M.T @ M.conj()
        return PolynomialWeight.from_forms(H, label=name)
    raise InvalidParameterError(f"unknown weight preset {name!r}; known: {', '.join(PRESET_NAMES)}")


def random_psh_quadratic(rng: np.random.Generator, n: int = 1, scale: float = 1.0, floor: float = 0.25) -> PolynomialWeight:
    """Random plurisubharmonic quadratic weight with strictly convex z-block.

    The Hermitian part is ``A A^* + floor * I_z`` with Gaussian ``A``; a
    random pluriharmonic part ``Re(w^T S w)`` is added.
    """
    d = n + 1
    A = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) * (scale / np.sqrt(2 * d))
    H = A @ A.conj().T
    H[1:, 1:] += floor * np.eye(n)
    H = 0.5 * (H + H.conj().T)
    S = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) * (0.25 * scale)
    S = 0.5 * (S + S.T)
    return PolynomialWeight.from_forms(H, symmetric=S, psh_certificate=True, label="random_quadratic")


def hermitian_defect(phi: WeightFamily, t, z) -> float:
    """Largest relative deviation ``|H - H^*| / max|H|`` over the sample points."""
    H = phi.hess(t, z)
    scale = max(float(np.abs(H).max()), 1e-300)
    return float(np.abs(H - np.conj(np.swapaxes(H, -1, -2))).max() / scale)


def min_hessian_eigenvalue(phi: WeightFamily, t, z) -> tuple[float, int]:
    """Smallest eigenvalue of the complex Hessian and the node attaining it."""
    H = phi.hess(t, z)
    H = 0.5 * (H + np.conj(np.swapaxes(H, -1, -2)))
    ev = np.linalg.eigvalsh(H.reshape(-1, H.shape[-2], H.shape[-1]))[:, 0]
    idx = int(np.argmin(ev))
    return float(ev[idx]), idx


def check_psh(phi: WeightFamily, t, z, tol: float = 1e-10) -> float:
    """Verify a psh claim at sample nodes.

    Returns the smallest Hessian eigenvalue.  Raises
    :class:`NotPlurisubharmonicError` when the weight carries a psh
    certificate but some eigenvalue is below ``-tol``.
    """
    lam, idx = min_hessian_eigenvalue(phi, t, z)
    if phi.psh_certificate and lam < -tol:
        z = np.asarray(z)
        node = z.reshape(-1, phi.n)[idx] if z.size else None
        raise NotPlurisubharmonicError(f"weight claims psh but Hessian eigenvalue {lam:.3e} at node {node}", node=node, eigenvalue=lam)
    return lam
