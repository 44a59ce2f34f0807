import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kahlerlab.domains import Polydisk, disk, make_parallelogram
from kahlerlab.errors import InvalidParameterError, NotPlurisubharmonicError, UnderresolvedAnsatzError
from kahlerlab.gamma import rhs_at, solve_gamma
from kahlerlab.hessian import (
    blowup_extract,
    decompose,
    gamma_split_check,
    hormander_constants,
    kappa,
    orth_residual,
    translated_kernel,
)
from kahlerlab.runners import default_params
from kahlerlab.weights import PolynomialWeight, preset_weight, random_psh_quadratic

Z = np.array([[0.2 + 0.1j]])


def preset(name, n=1):
    return preset_weight(name, default_params(name, n), n)


@pytest.fixture(scope="module")
def quartic_kernel():
    return translated_kernel(make_parallelogram(disk(), 0.5), preset("quartic_perturbed"), 0.0)


@pytest.fixture(scope="module")
def bidisk_kernel():
    fam = make_parallelogram(Polydisk((0, 0), 1.0), (0.5, 0))
    return translated_kernel(fam, preset("quartic_perturbed", 2), 0.0, degree=2)


# ------------------------------------------------------------------ closed-form models


def test_separable_model():
    d = decompose(disk(), preset("separable"), 0.2 + 0.1j, a=0.0)
    for got, want in [(d.lhs, 1), (d.curvature, 1), (d.dbar_gamma, 0), (d.kappa, 0)]:
        assert abs(got - want) < 1e-4


@pytest.mark.parametrize("z", [0.0, 0.1j, 0.4 - 0.3j])
def test_t_harmonic_model_is_flat(z):
    d = decompose(disk(), preset("t_harmonic"), z, a=0.0)
    # a t-harmonic term only changes the kernel by |e^{h(t)}|^2 with h holomorphic
    assert max(abs(d.lhs), abs(d.curvature), abs(d.dbar_gamma), abs(d.kappa)) < 1e-6


def test_translation_weight_kernel_is_t_constant():
    fam = make_parallelogram(disk(), 1.0)
    phi = preset_weight("translation", [1.0, 0.0])
    K0 = translated_kernel(fam, phi, 0.0)
    vals = [K0.at(t).diag(Z)[0] for t in (0.0, 0.3, -0.2j, 0.5 + 0.5j)]
    assert np.ptp(vals) < 1e-8 * vals[0]
    d = decompose(fam, phi, Z)
    assert max(abs(d.lhs), abs(d.curvature), abs(d.dbar_gamma), abs(d.kappa)) < 1e-8


# ------------------------------------------------------------------ identity and chain


@pytest.mark.parametrize("name", ["quadratic", "quartic_perturbed", "gaussian", "separable"])
@pytest.mark.parametrize("a", [0.0, 0.5j])
def test_decomposition_identity_and_chain(name, a):
    d = decompose(disk(), preset(name), Z, a=a)
    assert d.kappa >= -1e-10
    assert d.lhs >= -1e-6 * (1 + abs(d.lhs))
    assert d.chain_margin() >= 0
    assert abs(d.slack) < 1e-6 * (1 + abs(d.lhs))
    assert d.gamma_residual < 1e-10 and d.reproducing_residual < 1e-10


@settings(max_examples=10)
@given(st.integers(0, 2**31 - 1))
def test_random_quadratic_positivity(seed):
    rng = np.random.default_rng(seed)
    phi = random_psh_quadratic(rng)
    a = complex(*rng.uniform(-0.5, 0.5, 2))
    d = decompose(disk(), phi, complex(*rng.uniform(-0.3, 0.3, 2)), a=a)
    assert d.lhs >= -1e-6 * (1 + abs(d.lhs))
    assert d.kappa >= -1e-10 and d.chain_margin() >= 0


def test_quartic_kappa_regression():
    d = decompose(disk(), preset("quartic_perturbed"), Z, a=0.5)
    assert d.kappa == pytest.approx(0.3211889414478856, rel=1e-9)


def _coupled_quartic(hermitian: bool):
    H = np.zeros((2, 2), dtype=complex)
    H[1, 1] = 1.0
    S = np.zeros((2, 2), dtype=complex)
    if hermitian:
        H[0, 1] = H[1, 0] = 0.5
    else:
        S[0, 1] = S[1, 0] = 0.5
    return PolynomialWeight.from_forms(H, symmetric=S, quartic=0.2)


def test_kappa_positive_for_mixed_coupling():
    # |z|^2 + Re(conj(t) z) + quartic
    K = translated_kernel(make_parallelogram(disk(), 0.0), _coupled_quartic(True), 0.0)
    assert kappa(K, Z) == pytest.approx(0.0943211133756229, rel=1e-9)


def test_kappa_vanishes_for_pluriharmonic_coupling():
    # Re(t z) only rescales the kernel by |e^{t z / 2}|^2, so dbar_t K stays proportional to K
    K = translated_kernel(make_parallelogram(disk(), 0.0), _coupled_quartic(False), 0.0)
    assert abs(kappa(K, Z)) < 1e-12


def test_kappa_analytic_matches_fd(quartic_kernel):
    ka = kappa(quartic_kernel, Z)
    kf = kappa(quartic_kernel, Z, method="fd", h=1e-4)
    assert abs(ka - kf) < 1e-6 * max(1.0, ka)


def test_orthogonality_of_u(quartic_kernel):
    assert orth_residual(quartic_kernel, Z) < 1e-10


# ------------------------------------------------------------------ gamma solvers


def test_fourier_and_ansatz_agree_on_boundary_solution(quartic_kernel):
    f = solve_gamma(quartic_kernel, Z)
    a = solve_gamma(quartic_kernel, Z, method="ansatz")
    assert f.method == "fourier" and a.method == "ansatz"
    assert abs(f.dbar_norm2 - a.dbar_norm2) < 1e-8 * f.dbar_norm2
    assert max(f.boundary_residual, a.boundary_residual) < 1e-10


def test_min_dbar_not_above_boundary(quartic_kernel):
    b = solve_gamma(quartic_kernel, Z, method="ansatz")
    m = solve_gamma(quartic_kernel, Z, selection="min_dbar")
    assert m.residual < 1e-10
    assert m.dbar_norm2 <= b.dbar_norm2 * (1 + 1e-10)


def test_min_dbar_is_minimal_along_null_space(quartic_kernel, rng):
    sol = solve_gamma(quartic_kernel, Z, selection="min_dbar")
    c = sol.coefficients.reshape(-1)
    assert sol.dbar_norm2_of(c) == pytest.approx(sol.dbar_norm2, rel=1e-10)
    for _ in range(5):
        r = rng.standard_normal(sol.null_space.shape[1]) + 1j * rng.standard_normal(sol.null_space.shape[1])
        step = sol.null_space @ r
        step *= 1e-2 * np.linalg.norm(c) / np.linalg.norm(step)
        assert sol.dbar_norm2_of(c + step) >= sol.dbar_norm2 * (1 - 1e-10)


def test_gamma_solution_satisfies_equation_pointwise(quartic_kernel):
    sol = solve_gamma(quartic_kernel, Z)
    pts = np.array([[0.3 + 0.1j], [-0.5j], [0.7]])
    h = 1e-5
    gp, _ = sol.evaluate(pts + h)
    gm, _ = sol.evaluate(pts - h)
    gip, _ = sol.evaluate(pts + 1j * h)
    gim, _ = sol.evaluate(pts - 1j * h)
    g, _ = sol.evaluate(pts)
    dz = 0.25 * ((gp - gm) - 1j * (gip - gim)) / h
    psi_z = quartic_kernel.m * quartic_kernel.weight.grad_z(quartic_kernel.t, pts)[:, 0]
    lhs = dz[0] - psi_z * g[0]
    assert np.abs(lhs - rhs_at(quartic_kernel, Z, pts)).max() < 1e-6


def test_fourier_route_refuses_min_dbar(quartic_kernel):
    with pytest.raises(InvalidParameterError):
        solve_gamma(quartic_kernel, Z, selection="min_dbar", method="fourier")


# ------------------------------------------------------------------ n = 2


def test_bidisk_split_is_holomorphic(bidisk_kernel):
    assert gamma_split_check(bidisk_kernel, (0.5, 0.2), np.array([[0.1, 0.2]])) < 1e-10


@pytest.mark.slow
def test_bidisk_gamma_is_primitive(bidisk_kernel):
    sol = solve_gamma(bidisk_kernel, np.array([[0.1, 0.2]]), degree=6, escalate=False, tol=1.0)
    assert sol.primitivity_residual < 1e-8
    assert sol.residual < 0.1


@pytest.mark.slow
def test_bidisk_ansatz_reports_underresolution(bidisk_kernel):
    with pytest.raises(UnderresolvedAnsatzError) as err:
        solve_gamma(bidisk_kernel, np.array([[0.1, 0.2]]), degree=6, escalate=False)
    assert err.value.residual > 1e-6


# ------------------------------------------------------------------ blow-up


@pytest.fixture(scope="module")
def quadratic_blowup():
    return blowup_extract(disk(), preset("quadratic"), z=0.0, a=0.5, ms=(4, 9, 16, 25))


def test_blowup_gamma_over_kernel_bounded(quadratic_blowup):
    norms = np.array(quadratic_blowup.gamma_over_K_norm)
    assert norms.max() < 1.0
    assert abs(norms[-1] - norms[-2]) < 1e-3


def test_blowup_dbar_term_decays(quadratic_blowup):
    d = np.array(quadratic_blowup.dbar_tau_dlambda)
    assert np.all(np.diff(d) < 0) and d[-1] < 1e-6


def test_blowup_recovers_constant_direction(quadratic_blowup):
    assert abs(quadratic_blowup.vhat[-1] - 0.8) < 1e-6


def test_hormander_ratio_below_constant(quadratic_blowup):
    assert max(quadratic_blowup.hormander_gamma) <= quadratic_blowup.C_gamma * (1 + 1e-9)
    assert max(quadratic_blowup.hormander_u) <= quadratic_blowup.C_u * (1 + 1e-9)


def test_hormander_constants_gaussian():
    K = translated_kernel(make_parallelogram(disk(), 0.5), preset("gaussian"), 0.0)
    cu, cg = hormander_constants(K.weight, K)
    assert cu == pytest.approx(0.25) and cg == pytest.approx(1.0)


def test_hormander_constants_need_strict_psh():
    K = translated_kernel(make_parallelogram(disk(), 0.5), preset_weight("zero"), 0.0, degree=8)
    with pytest.raises(NotPlurisubharmonicError):
        hormander_constants(K.weight, K)


def test_translation_blowup_degenerates():
    rep = blowup_extract(make_parallelogram(disk(), 1.0), preset_weight("translation", [1.0, 0.0]), ms=(4, 9))
    assert max(rep.tau_norm) < 1e-10
    assert abs(rep.direction[-1] - 1.0) < 1e-10
