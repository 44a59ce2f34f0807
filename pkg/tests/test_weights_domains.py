import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kahlerlab.domains import Polydisk, disk, disk_quadrature, make_parallelogram, polydisk_quadrature
from kahlerlab.errors import EvaluationError, InvalidDomainError, InvalidParameterError, NotPlurisubharmonicError
from kahlerlab.finite_diff import fd_complex_hessian, fd_complex_hessian_richardson, fd_joint_complex_hessian
from kahlerlab.weights import (
    PolynomialWeight,
    check_psh,
    hermitian_defect,
    preset_weight,
    random_psh_quadratic,
    translate_weight,
)

coord = st.floats(-0.6, 0.6, allow_nan=False)


# ------------------------------------------------------------------ domains


def test_parallelogram_zero_slope_is_product():
    fam = make_parallelogram(disk(0, 1), 0)
    for t in (0, 0.3 + 0.2j, -1j):
        assert fam.fiber(t).center == (0j,)
        assert fam.fiber(t).radius == 1


def test_parallelogram_unit_slope_shifts_fiber():
    fam = make_parallelogram(disk(0, 1), 1)
    assert fam.fiber(1j).center == (1j,)


def test_parallelogram_bidisk_center():
    fam = make_parallelogram(Polydisk((0, 0), 0.5), (1, 0))
    t = 0.2 - 0.4j
    assert np.allclose(fam.fiber(t).center, (t, 0))


@pytest.mark.parametrize("radius", [0.0, -1.0])
def test_nonpositive_radius_rejected(radius):
    with pytest.raises(InvalidDomainError):
        make_parallelogram(Polydisk((0,), radius), 0)


@given(coord, coord, coord, coord)
def test_fiber_translation_identity(tr, ti, ar, ai):
    base = disk(0.1 - 0.2j, 0.7)
    fam = make_parallelogram(base, complex(ar, ai))
    t = complex(tr, ti)
    c = np.array(fam.fiber(t).center) - t * complex(ar, ai)
    assert np.allclose(c, base.center, atol=1e-15)
    assert fam.fiber(0) == base


# ------------------------------------------------------------------ quadrature


@pytest.mark.parametrize(
    "integrand, exact",
    [(lambda z: np.ones_like(z), np.pi), (lambda z: np.abs(z) ** 2, np.pi / 2), (lambda z: z, 0.0)],
)
def test_disk_quadrature_examples(integrand, exact):
    g = disk_quadrature(1.0, 8, 16)
    assert abs(g.integrate(integrand(g.nodes[:, 0])) - exact) < 1e-12


@pytest.mark.parametrize("j,k", [(0, 0), (3, 3), (5, 2), (7, 7), (2, 9)])
def test_disk_quadrature_monomial_exactness(j, k):
    r = 0.8
    g = disk_quadrature(r, 8, 24)
    z = g.nodes[:, 0]
    exact = np.pi * r ** (2 * j + 2) / (j + 1) if j == k else 0.0
    assert abs(g.integrate(z**j * np.conj(z) ** k) - exact) < 1e-13


def test_quadrature_weights_positive_and_sum_to_volume():
    for g, vol in [(disk_quadrature(0.7, 6, 12, center=0.3j), np.pi * 0.49), (polydisk_quadrature(0.5, 5, 10), (np.pi * 0.25) ** 2)]:
        assert np.all(g.weights > 0)
        assert abs(g.weights.sum() - vol) / vol < 1e-10


@pytest.mark.parametrize("n_rad,n_ang", [(3, 16), (8, 7)])
def test_undersized_grid_rejected(n_rad, n_ang):
    with pytest.raises(InvalidParameterError):
        disk_quadrature(1.0, n_rad, n_ang)


# ------------------------------------------------------------------ weights


def test_translated_weight_substitution():
    phi = preset_weight("gaussian", [1.0])
    pa = translate_weight(phi, 1.0)
    t, z = 0.3 - 0.1j, np.array([[0.2 + 0.5j]])
    assert np.allclose(pa.value(t, z), np.abs(z[:, 0] + t) ** 2)


def test_translation_by_zero_is_identity():
    phi = preset_weight("quartic_perturbed", [1, 1, 0.3, 0, 0.2])
    pa = translate_weight(phi, 0.0)
    z = np.array([[0.1 + 0.2j], [-0.3j]])
    assert np.allclose(pa.value(0.2, z), phi.value(0.2, z))
    assert np.allclose(pa.hess(0.2, z), phi.hess(0.2, z))


def test_translated_gaussian_t_hessian_is_one():
    pa = translate_weight(preset_weight("gaussian", [1.0]), 1.0)
    assert abs(pa.hess(0.0, np.array([[0j]]))[0, 0, 0] - 1.0) < 1e-14
    assert abs(fd_complex_hessian(lambda t: pa.value(t, np.array([[0j]]))[0], 0.0, 1e-3) - 1.0) < 1e-8


@pytest.mark.parametrize("name,params,n", [
    ("quadratic", [1, 2, 0.3, 0.1], 1),
    ("quartic_perturbed", [1, 1, 0.3, 0, 0.2], 1),
    ("separable", [1, 1], 1),
    ("t_harmonic", [2, 1], 1),
    ("translation", [0.5, -0.2], 1),
    ("quartic_perturbed", [1, 1, 1.2, 0.3, 0, 0.2, 0, 0.1, 0, 0.1], 2),
])
def test_analytic_hessian_matches_fd(name, params, n):
    phi = preset_weight(name, params, n)
    w0 = np.array([0.2 - 0.1j] + [0.3 + 0.1j * j for j in range(n)])
    H = phi.joint_hess(w0)
    Hfd = fd_joint_complex_hessian(lambda w: phi.joint_value(w), w0, 1e-4)
    assert np.abs(H - Hfd).max() < 1e-6


@given(st.integers(0, 10_000), st.integers(1, 2))
def test_hessian_is_hermitian(seed, n):
    rng = np.random.default_rng(seed)
    phi = random_psh_quadratic(rng, n)
    z = rng.uniform(-0.5, 0.5, (6, n)) + 1j * rng.uniform(-0.5, 0.5, (6, n))
    assert hermitian_defect(phi, 0.1, z) < 1e-12


@given(st.integers(0, 10_000), st.integers(1, 2))
def test_random_psh_quadratic_passes_certificate(seed, n):
    rng = np.random.default_rng(seed)
    phi = random_psh_quadratic(rng, n)
    z = disk_quadrature(1.0, 4, 8).nodes if n == 1 else polydisk_quadrature(1.0, 4, 8).nodes
    assert check_psh(phi, 0.2j, z) >= -1e-10


def test_psh_check_catches_negative_weight():
    H = np.zeros((2, 2), dtype=complex)
    H[1, 1] = -1.0
    phi = PolynomialWeight.from_forms(H, psh_certificate=True, label="concave")
    with pytest.raises(NotPlurisubharmonicError) as err:
        check_psh(phi, 0.0, disk_quadrature(1.0, 4, 8).nodes)
    assert err.value.eigenvalue < 0


def test_unknown_preset_rejected():
    with pytest.raises(InvalidParameterError):
        preset_weight("cubic", [])


# ------------------------------------------------------------------ finite differences


@pytest.mark.parametrize("t0", [0.0, 0.4 - 0.3j, -1 + 2j])
def test_fd_hessian_modulus_squared(t0):
    assert abs(fd_complex_hessian(lambda t: abs(t) ** 2, t0, 1e-3) - 1.0) < 1e-8


def test_fd_hessian_pluriharmonic():
    assert abs(fd_complex_hessian(lambda t: (t * t).real, 0.3 + 0.2j, 1e-3)) < 1e-8


def test_fd_hessian_quartic():
    assert abs(fd_complex_hessian(lambda t: abs(t) ** 4, 1.0, 1e-3) - 4.0) < 1e-6


def test_fd_hessian_reports_bad_point():
    with pytest.raises(EvaluationError) as err, np.errstate(invalid="ignore"):
        fd_complex_hessian(lambda t: np.log(t.real - 1.0 + 2e-3), 1.0, 1e-3)
    assert err.value.point is not None


def test_richardson_estimate_bounds_error():
    F = lambda t: np.exp(t.real) * np.cos(t.imag) + abs(t) ** 6
    exact = 9 * abs(0.5 + 0.5j) ** 4
    val, est = fd_complex_hessian_richardson(F, 0.5 + 0.5j, 0.05)
    assert abs(val - exact) <= est


@given(coord, coord, coord, coord)
def test_translation_consistency_of_fd_hessian(ar, ai, zr, zi):
    phi = preset_weight("quartic_perturbed", [1, 1, 0.3, 0, 0.2])
    a, z0 = complex(ar, ai), complex(zr, zi)
    lhs = fd_complex_hessian(lambda t: phi.value(t, np.array([[z0 + t * a]]))[0], 0.0, 1e-3)
    v = np.array([1.0, a])
    H = phi.joint_hess(np.array([0.0, z0]))
    assert abs(lhs - (v @ H @ np.conj(v)).real) < 1e-6
