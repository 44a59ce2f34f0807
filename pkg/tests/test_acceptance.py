"""End-to-end acceptance checks; each prints one PASS/FAIL line."""
import json

import numpy as np
import pytest

from kahlerlab.bergman import beta_m, build_kernel, density_sweep
from kahlerlab.cli import main
from kahlerlab.domains import disk, make_parallelogram
from kahlerlab.gap_energy import degenerate_locus_energy, gap_verdict, half_indicator, planted_suite, refinement_scan
from kahlerlab.hessian import blowup_extract, decompose, log_kernel_hessian, translated_kernel
from kahlerlab.runners import default_params
from kahlerlab.toric import PATH_PRESETS, convexity_scan, gap_scan, path_preset, vector_field_residual
from kahlerlab.weights import PRESET_NAMES, preset_weight, random_psh_quadratic, translate_weight

# frozen regression bounds
BLOWUP_NORM_BOUND = 1.0
LOG_PSI_BOUND = 6.0
HORMANDER_C = 1.0
CONVEX_MARGIN = 5e-3

# presets strictly psh in z, where the Hormander constants exist
STRICT_PRESETS = [p for p in PRESET_NAMES if p != "zero"]
SLOPES = (0.0, 0.5, 0.3 - 0.4j)
POINTS = (0.0, 0.2 + 0.1j, -0.3j)


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'} {detail}")
        assert ok, detail

    return emit


def preset(name):
    return preset_weight(name, default_params(name))


def test_criterion_01_disk_kernel_oracle(report):
    K = build_kernel(disk(), preset_weight("zero"), degree=12)
    z = np.array([0.0, 0.1, 0.3j, 0.25 - 0.25j, 0.4, -0.5, 0.5j])
    exact = 1 / (np.pi * (1 - np.abs(z) ** 2) ** 2)
    rel = np.abs(K.diag(z[:, None]) - exact) / exact
    centre = abs(K.diag(np.zeros((1, 1)))[0] - 1 / np.pi)
    report(1, rel.max() < 1e-6 and centre < 1e-10, f"max rel err {rel.max():.2e}, |K(0,0) - 1/pi| {centre:.1e}")


def test_criterion_02_gaussian_m_kernel(report):
    ms = np.array([2.0, 5.0, 10.0, 20.0])
    rel = []
    for m in ms:
        exact = m / (np.pi * (1 - np.exp(-m)))
        rel.append(abs(build_kernel(disk(), preset("gaussian"), m=m).diag(np.zeros((1, 1)))[0] - exact) / exact)
    sweep = np.array([2.0, 4.0, 8.0, 16.0])
    err = np.array([abs(beta_m(build_kernel(disk(), preset("gaussian"), m=m), 0.0) - 1) for m in sweep])
    orders = np.diff(np.log(err)) / np.diff(np.log(sweep))
    superpoly = bool(np.all(np.diff(orders) < 0) and np.all(err[1:] < err[:-1]))
    report(2, max(rel) < 1e-8 and superpoly, f"max rel err {max(rel):.2e}; beta_m local orders {np.round(orders, 2).tolist()}")


def test_criterion_03_positivity(report):
    cases = [(preset(name), a, z) for name in PRESET_NAMES for a in SLOPES for z in POINTS]
    rng = np.random.default_rng(2024)
    for _ in range(50):
        a = complex(*rng.uniform(-0.6, 0.6, 2))
        cases.append((random_psh_quadratic(rng), a, complex(*rng.uniform(-0.3, 0.3, 2))))
    worst = np.inf
    for weight, a, z in cases:
        value, _ = log_kernel_hessian(make_parallelogram(disk(), a), weight, z)
        worst = min(worst, value + 1e-6 * (1 + abs(value)))
    report(3, worst >= 0, f"{len(cases)} cases, min margin {worst:.3e}")


def test_criterion_04_decomposition_chain(report):
    runs = [decompose(disk(), preset(name), z, a=a) for name in PRESET_NAMES for a in SLOPES[:2] for z in POINTS[:2]]
    kap = min(d.kappa for d in runs)
    chain = min(d.chain_margin() for d in runs)
    sep = decompose(disk(), preset("separable"), 0.2 + 0.1j, a=0.0)
    sep_err = max(abs(sep.lhs - 1), abs(sep.curvature - 1), abs(sep.dbar_gamma), abs(sep.kappa))
    th = decompose(disk(), preset("t_harmonic"), 0.2 + 0.1j, a=0.0)
    th_err = max(abs(th.lhs), abs(th.curvature), abs(th.dbar_gamma), abs(th.kappa))
    ok = kap >= -1e-10 and chain >= 0 and sep_err < 1e-4 and th_err < 1e-6
    report(4, ok, f"min kappa {kap:.2e}, min chain margin {chain:.2e}, separable err {sep_err:.1e}, t-harmonic err {th_err:.1e}")


def test_criterion_05_translation(report):
    fam = make_parallelogram(disk(), 1.0)
    phi = preset_weight("translation", [1.0, 0.0])
    K0 = translated_kernel(fam, phi, 0.0)
    z = np.array([[0.2 + 0.1j]])
    vals = np.array([K0.at(t).diag(z)[0] for t in (0.0, 0.3, -0.2j, 0.5 + 0.5j, -0.7)])
    variation = float(np.ptp(vals) / vals[0])
    d = decompose(fam, phi, z)
    terms = max(abs(d.lhs), abs(d.curvature), abs(d.dbar_gamma), abs(d.kappa))
    report(5, variation < 1e-8 and terms < 1e-8, f"kernel variation {variation:.1e}, largest term {terms:.1e}")


def test_criterion_06_blowup_bounds(report):
    ms = (4, 9, 16, 25)
    q = preset("quadratic")
    rep = blowup_extract(disk(), q, z=0.0, a=0.5, ms=ms)
    dens = density_sweep(disk(), translate_weight(q, 0.5), ms, R=2.0)
    norm = max(rep.gamma_over_K_norm)
    logpsi = max(dens.sup_log_psi)
    ratio = 0.0
    for name in STRICT_PRESETS:
        for a in (0.0, 0.5):
            r = blowup_extract(disk(), preset(name), z=0.0, a=a, ms=(4, 9, 16))
            ratio = max(ratio, max(r.hormander_gamma))
    ok = norm <= BLOWUP_NORM_BOUND and logpsi <= LOG_PSI_BOUND and ratio <= HORMANDER_C * (1 + 1e-9)
    report(6, ok, f"dlambda norm of gamma/K <= {norm:.4f}, sup|log Psi| {logpsi:.3f}, Hormander ratio {ratio:.6f} (C = {HORMANDER_C})")


def test_criterion_07_toric_convexity(report):
    tables = {name: convexity_scan(path_preset(name)) for name in PATH_PRESETS}
    worst = min(t.d2.min() for t in tables.values())
    holo, lift = vector_field_residual(path_preset("affine"), 0.5)
    linear = tables["affine"].verdict == "LINEAR"
    convex = tables["bump"].verdict == "STRICTLY-CONVEX" and tables["bump"].margin > CONVEX_MARGIN
    ok = worst >= -1e-6 and linear and convex and holo < 1e-5 and lift < 1e-5
    report(7, ok, f"min d2 {worst:.2e}; affine {tables['affine'].verdict} (vf {holo:.1e}, {lift:.1e}); bump {tables['bump'].verdict} margin {tables['bump'].margin:.6f}")


def test_criterion_08_truncation(report):
    ok, details = True, []
    for name in PATH_PRESETS:
        rep = gap_scan(path_preset(name))
        ok &= bool(np.all(np.diff(rep.M_A, axis=1) <= 1e-12))
        ok &= bool(np.all(rep.M_A >= rep.M[:, None] - 1e-12))
        ok &= bool(np.all(np.abs(rep.M_A[:, rep.A >= 40] - rep.M[:, None]) < 1e-8))
        if rep.linear:
            for i, A0 in enumerate(rep.A0):
                ok &= bool(np.all(np.abs(rep.M_A[i, rep.A >= A0] - rep.M[i]) < 1e-10))
            ok &= rep.eps0 > 0 and rep.gap_verdict == "NONDEGENERATE"
            details.append(f"{name} eps0 {rep.eps0:.4f}")
    report(8, ok, "; ".join(details))


def test_criterion_09_gap_suite(report):
    suite = planted_suite(200, 0)
    wrong = sum(gap_verdict(u).kind != expected for u, _, expected in suite)
    table = refinement_scan(lambda h: half_indicator(int(round(1 / h)) + 1, 2))
    g = degenerate_locus_energy(half_indicator(257, 2), [0.2, 0.1, 0.05, 0.025], 0.05, [[0.5, 0.5], [0.2, 0.3], [0.85, 0.5]])
    ok = wrong == 0 and -1.2 <= table.slope <= -0.8 and g.trend[0] == "GROWING" and np.all(g.G[1:] < 1e-8)
    report(9, ok, f"{wrong} misclassified of {len(suite)}; slope {table.slope:.3f}; G trends {g.trend}")


def test_criterion_10_determinism(report, tmp_path):
    configs = {
        "kernel": {"m_list": [1, 4], "points": [0.0, [0.3, 0.1]], "density_R": 1.0},
        "hessian": {"preset": "quadratic", "random_count": 5},
        "toric": {"preset": "bump"},
        "gap": {"planted_count": 60},
        "sweep": {},
    }
    differing = []
    for sub, body in configs.items():
        cfg = tmp_path / f"{sub}.json"
        cfg.write_text(json.dumps(body))
        bodies = []
        for run in ("a", "b"):
            out = tmp_path / f"{sub}_{run}"
            assert main([sub, "--config", str(cfg), "--out", str(out), "--seed", "11"]) == 0
            bodies.append({p.name: p.read_bytes() for p in sorted(out.glob("*.csv"))})
        if bodies[0] != bodies[1]:
            differing.append(sub)
    report(10, not differing, f"subcommands with differing CSV bodies: {differing or 'none'}")
