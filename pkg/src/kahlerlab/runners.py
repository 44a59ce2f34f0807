"""Suites behind the command-line subcommands.

Each runner takes a validated :class:`ExperimentConfig` and returns a
:class:`RunResult`: named tables (lists of row dicts) and a certificate.
Numerical failures become failed certificate rows rather than exceptions.
Work items are pure functions of their arguments, so ``jobs > 1`` only
changes scheduling, never output.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import gap_energy as ge
from . import toric
from .bergman import beta_m, build_kernel, rescaled_density
from .config import ExperimentConfig
from .domains import Polydisk, make_parallelogram
from .errors import KahlerLabError
from .hessian import blowup_extract, decompose
from .reports import Certificate
from .weights import preset_weight, random_psh_quadratic


@dataclass
class RunResult:
    tables: dict = field(default_factory=dict)
    certificate: Certificate | None = None


def parallel_map(func: Callable, items: Sequence, jobs: int = 1) -> list:
    """Order-preserving map over a bounded process pool."""
    if jobs <= 1 or len(items) <= 1:
        return [func(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(func, items))


def default_params(preset: str, n: int = 1) -> list[float]:
    """Parameters used when a config names a weight preset without ``params``."""
    eye = [1.0] * n + [0.0] * (n * (n - 1))
    if preset == "zero":
        return []
    if preset == "gaussian":
        return [1.0]
    if preset == "quadratic":
        return [1.0] * (n + 1) + [0.3, 0.0] + [0.0] * (n * (n + 1) - 2)
    if preset == "quartic_perturbed":
        return default_params("quadratic", n) + [0.2]
    if preset == "separable":
        return [1.0] + eye
    if preset == "t_harmonic":
        return [2.0] + eye
    if preset == "translation":
        return [1.0, 0.0] * n
    raise KahlerLabError(f"no default parameters for preset {preset!r}")


def _point_cols(prefix: str, z) -> dict:
    """``{prefix}_re`` / ``{prefix}_im`` columns (indexed when n > 1)."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    if z.size == 1:
        return {f"{prefix}_re": float(z[0].real), f"{prefix}_im": float(z[0].imag)}
    out = {}
    for j, c in enumerate(z, 1):
        out.update({f"{prefix}{j}_re": float(c.real), f"{prefix}{j}_im": float(c.imag)})
    return out


def _fmt_point(z) -> str:
    return ";".join(f"{complex(c).real!r}{complex(c).imag:+}j" for c in np.atleast_1d(z))


# ------------------------------------------------------------------ kernel


def _kernel_oracle(preset, params, n, radius, m, z):
    """Closed forms: unweighted polydisk kernel; Gaussian weight at the centre."""
    z = np.asarray(z, dtype=complex)
    if preset == "zero":
        return float(np.prod(radius**2 / (np.pi * (radius**2 - np.abs(z) ** 2) ** 2)))
    if preset == "gaussian" and np.all(z == 0):
        c = (params or [1.0])[0] * m
        return float((c / (np.pi * (-np.expm1(-c * radius**2)))) ** n)
    return None


def run_kernel(cfg: ExperimentConfig, jobs: int = 1) -> RunResult:
    p = cfg.params
    n = p["n"]
    params = p["params"] or default_params(p["preset"], n)
    weight = preset_weight(p["preset"], params, n)
    fiber = Polydisk((0.0,) * n, p["radius"])
    cert = Certificate("kernel")
    rows, dens_rows = [], []
    for m in p["m_list"]:
        try:
            K = build_kernel(fiber, weight, m=m, t=p["t"], degree=p["degree"], cond_max=p["cond_max"])
        except KahlerLabError as exc:
            cert.fail(f"build m={m!r}", "Gram factorization", str(exc))
            rows.append({"m": m, "error": type(exc).__name__})
            continue
        cert.check(f"condition m={m!r}", "Gram conditioning", np.log10(p["cond_max"]) - np.log10(K.condition))
        cert.check(f"factor residual m={m!r}", "Gram factorization", p["factor_tol"] - K.factor_residual)
        for z in p["points"]:
            if len(z) != n:
                cert.fail(f"point {_fmt_point(z)}", "configuration", f"point has {len(z)} coordinates, expected {n}")
                continue
            zp = np.array(z, dtype=complex).reshape(1, n)
            kd = float(K.diag(zp)[0])
            row = {"m": m, **_point_cols("z", z), "degree": K.basis.degree, "K_diag": kd, "beta_m": beta_m(K, zp), "condition": K.condition, "min_eigenvalue": K.min_eigenvalue, "factor_residual": K.factor_residual}
            oracle = _kernel_oracle(p["preset"], params, n, p["radius"], m, z)
            if oracle is not None:
                rel = abs(kd - oracle) / oracle
                row.update(oracle=oracle, rel_error=rel)
                cert.check(f"oracle m={m!r} z={_fmt_point(z)}", "closed-form kernel diagonal", p["oracle_tol"] - rel)
            rows.append(row)
        if p["density_R"] is not None and n == 1:
            try:
                rep = rescaled_density(K, p["density_R"])
                dens_rows.extend(rep.rows())
            except KahlerLabError as exc:
                cert.fail(f"density m={m!r}", "rescaled density", str(exc))
    tables = {"kernel": rows}
    if dens_rows:
        tables["density"] = dens_rows
    return RunResult(tables, cert)


# ------------------------------------------------------------------ hessian


def _hessian_task(args):
    label, weight, n, radius, a, z, m, degree, selection = args
    tag = f"z={_fmt_point(z)} m={m!r}"
    base = Polydisk((0.0,) * n, radius)
    fam = make_parallelogram(base, a)
    row = {"weight": label, **_point_cols("z", z), **_point_cols("a", a), "m": m}
    try:
        d = decompose(fam, weight, np.array(z), m=m, degree=degree, selection=selection)
        row.update(d.as_row())
        row["error"] = ""
    except KahlerLabError as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row, tag


def run_hessian(cfg: ExperimentConfig, jobs: int = 1) -> RunResult:
    p = cfg.params
    n = p["n"]
    params = p["params"] if p["params"] is not None else default_params(p["preset"], n)
    weight = preset_weight(p["preset"], params, n)
    a = p["a"] if len(p["a"]) == n else None
    cert = Certificate("hessian")
    if a is None:
        cert.fail("slope", "configuration", f"a has {len(p['a'])} coordinates, expected {n}")
        return RunResult({"hessian": []}, cert)
    tasks = [(p["preset"], weight, n, p["radius"], a, z, m, p["degree"], p["selection"]) for z in p["z"] for m in p["m_list"]]
    rng = np.random.default_rng(cfg.seed)
    for i in range(p["random_count"]):
        w = random_psh_quadratic(rng, n)
        slope = list(rng.uniform(-0.5, 0.5, n) + 1j * rng.uniform(-0.5, 0.5, n))
        tasks.append((f"random_{i}", w, n, p["radius"], slope, p["z"][0], 1.0, p["degree"], p["selection"]))
    results = parallel_map(_hessian_task, tasks, jobs)
    rows = [r for r, _ in results]
    for r, tag in results:
        tag = f"{r['weight']} {tag}"
        if r["error"]:
            cert.fail(tag, "log-kernel Hessian decomposition", r["error"])
            continue
        fd = p["fd_factor"] * r["lhs_fd_error"]
        cert.check(f"positivity {tag}", "lower bound of the log-kernel Hessian", r["lhs"], p["positivity_tol"] * (1 + abs(r["lhs"])))
        cert.check(f"kappa {tag}", "Cauchy-Schwarz defect is nonnegative", r["kappa"], p["kappa_tol"])
        cert.check(f"chain {tag}", "Hessian >= curvature term + dbar term", r["lhs"] - r["curvature"] - r["dbar_gamma"], fd)
        cert.check(f"dbar alone {tag}", "Hessian >= dbar term", r["lhs"] - r["dbar_gamma"], fd)
        cert.check(f"curvature {tag}", "curvature term nonnegative for psh weights", r["curvature"], p["kappa_tol"])
    tables = {"hessian": rows}
    if p["blowup"] is not None:
        tables["blowup"] = _blowup(cfg, weight, a, cert)
    return RunResult(tables, cert)


def _blowup(cfg, weight, a, cert):
    p = cfg.params
    opts = p["blowup"]
    if p["n"] != 1:
        cert.fail("blowup", "configuration", "blow-up extraction needs n = 1")
        return []
    try:
        rep = blowup_extract(Polydisk((0.0,), p["radius"]), weight, z=p["z"][0], a=a, ms=tuple(opts.get("ms", (9, 16, 25))), R=opts.get("R", 2.0), fit_radius=opts.get("fit_radius", 1.0))
    except KahlerLabError as exc:
        cert.fail("blowup", "rescaled gamma analysis", str(exc))
        return []
    rows = list(rep.rows())
    for r in rows:
        cert.check(f"hormander gamma m={r['m']!r}", "L2 estimate for gamma", rep.C_gamma - r["hormander_gamma"], 1e-9 * rep.C_gamma)
        cert.check(f"hormander u m={r['m']!r}", "L2 estimate for the t-derivative", rep.C_u - r["hormander_u"], 1e-9 * max(rep.C_u, 1.0))
    return rows


# ------------------------------------------------------------------ toric


def run_toric(cfg: ExperimentConfig, jobs: int = 1) -> RunResult:
    p = cfg.params
    cert = Certificate("toric")
    path = toric.path_preset(p["preset"])
    tab = toric.convexity_scan(path, n_t=p["n_t"], n_quad=p["n_quad"])
    cert.check("second differences", "convexity of the Mabuchi functional along geodesics", float(np.min(tab.d2)), p["convexity_tol"])
    expected = "LINEAR" if path.is_affine() else "STRICTLY-CONVEX"
    cert.check("classification", "linear exactly along holomorphic-flow geodesics", 0.0 if tab.verdict == expected else -1.0, 0.0, f"verdict {tab.verdict}, expected {expected}")
    vf_rows = []
    for t in p["vf_times"]:
        holo, lift = toric.vector_field_residual(path, t)
        defect = toric.geodesic_defect(path, t)
        vf_rows.append({"t": t, "geodesic_defect": defect, "holomorphy_residual": holo, "lift_residual": lift})
        cert.check(f"lift residual t={t!r}", "dbar_t identity for the fiber vector field", p["vf_tol"] - lift)
        if expected == "LINEAR":
            cert.check(f"holomorphy t={t!r}", "vector field holomorphic on linear geodesics", p["vf_tol"] - holo)
    rep = toric.gap_scan(path, n_t=p["n_t"], A_grid=p["A_grid"], n_quad=p["n_quad"], linear=tab.verdict == "LINEAR")
    trunc_rows = []
    for i, t in enumerate(rep.t):
        for k, A in enumerate(rep.A):
            trunc_rows.append({"t": float(t), "A": float(A), "M": float(rep.M[i]), "M_A": float(rep.M_A[i, k]), "A0": float(rep.A0[i]), "level_measure": float(rep.level_measure[i, k]), "inf_f": float(rep.inf_f[i])})
    conv_rows = []
    for i, t in enumerate(rep.t):
        b = toric.mabuchi(path.at(t), p["n_quad"])
        row = {"t": float(t), **b.as_row(), "d2": float(tab.d2[i - 1]) if 0 < i < len(rep.t) - 1 else None, "A0": float(rep.A0[i])}
        row.update({f"M_A[{float(A)!r}]": float(rep.M_A[i, k]) for k, A in enumerate(rep.A)})
        conv_rows.append(row)
    order = np.argsort(rep.A)
    MA = rep.M_A[:, order]
    cert.check("M_A nonincreasing in A", "monotonicity of the truncated functional", -float(np.max(np.diff(MA, axis=1), initial=0.0)), 1e-12)
    cert.check("M_A >= M", "truncation bounds the functional from above", float(np.min(rep.M_A - rep.M[:, None])), 1e-12)
    big = rep.A >= 40
    if np.any(big):
        cert.check("M_A = M for A >= 40", "truncation inactive for large A", p["truncation_tol"] - float(np.max(np.abs(rep.M_A[:, big] - rep.M[:, None]))))
    if tab.verdict == "LINEAR":
        mask = rep.A[None, :] >= rep.A0[:, None]
        if np.any(mask):
            dev = float(np.max(np.abs(rep.M_A - rep.M[:, None])[mask]))
            cert.check("M_A = M for A >= A0", "truncated functional coincides along the geodesic", p["coincidence_tol"] - dev)
        cert.check("inf f >= eps0 > 0", "uniform non-degeneracy on linear geodesics", rep.eps0, 0.0, f"eps0 = {rep.eps0!r}")
    summary = [{"preset": p["preset"], "verdict": tab.verdict, "w12_assumption": "not verified", "margin": tab.margin, "fd_estimate": tab.fd_estimate, "tolerance": tab.tolerance, "eps0": rep.eps0, "gap_verdict": rep.gap_verdict}]
    return RunResult({"toric": conv_rows, "vector_field": vf_rows, "truncation": trunc_rows, "summary": summary}, cert)


# ------------------------------------------------------------------ gap


def _family(kind: str, width: float):
    if kind == "half":
        return lambda h: ge.half_indicator(int(round(1 / h)) + 1)
    if kind == "mollified":
        return lambda h: ge.half_indicator(int(round(1 / h)) + 1, width=width)
    if kind == "smooth":
        return lambda h: ge.GridFunction.sample(lambda x, y: 1.0 + 0.5 * np.sin(np.pi * x) * y, int(round(1 / h)) + 1)
    return lambda h: ge.annulus_indicator(int(round(1 / h)) + 1)


_EXPECTED_REFINEMENT = {"half": "BLOWUP", "annulus": "BLOWUP", "mollified": "BOUNDED", "smooth": "BOUNDED"}


def _classify(item):
    u, kind, expected = item
    try:
        v = ge.gap_verdict(u)
    except KahlerLabError as exc:
        return {"kind": kind, "n": u.n, "k": u.k, "expected": expected, "verdict": type(exc).__name__, "witness_energy": None, "energy_bound": None}
    return {"kind": kind, "n": u.n, "k": u.k, "expected": expected, "verdict": v.kind, "witness_energy": v.witness_energy, "energy_bound": v.energy_bound}


def run_gap(cfg: ExperimentConfig, jobs: int = 1) -> RunResult:
    p = cfg.params
    cert = Certificate("gap")
    suite = ge.planted_suite(p["planted_count"], cfg.seed)
    planted = parallel_map(_classify, suite, jobs)
    miss = sum(r["verdict"] != r["expected"] for r in planted)
    cert.check("planted classification", "gap lemma verdicts", -float(miss), 0.0, f"{miss} misclassified of {len(planted)}")
    weak = [r for r in planted if r["verdict"] == "Violation" and r["witness_energy"] < r["energy_bound"]]
    cert.check("witness energy >= E_blowup", "slice energy of a crossing line", -float(len(weak)))
    ref_rows, summary = [], []
    lo, hi = min(p["slope_range"]), max(p["slope_range"])
    for kind in p["refinement"]:
        tab = ge.refinement_scan(_family(kind, p["width"]))
        ref_rows.extend({"family": kind, **r} for r in tab.rows())
        summary.append({"family": kind, "slope": tab.slope, "variation": tab.variation, "verdict": tab.verdict})
        exp = _EXPECTED_REFINEMENT[kind]
        cert.check(f"refinement {kind}", "energy blow-up at sharp interfaces", 0.0 if tab.verdict == exp else -1.0, 0.0, f"verdict {tab.verdict}, expected {exp}")
        if kind == "half":
            cert.check("sharp slope in range", "energy ~ 1/h at a jump", min(tab.slope - lo, hi - tab.slope))
        if kind == "mollified":
            rel = abs(tab.energy[-1] * p["width"] - 1.0)
            cert.check("ramp energy ~ 1/width", "exact ramp integral", 0.1 - rel)
    u = ge.half_indicator(p["probe_k"])
    probes = np.asarray(p["probes"], dtype=float)
    G_rows = []
    try:
        G = ge.degenerate_locus_energy(u, p["eps_list"], p["r"], probes, vanish_tol=p["vanish_tol"])
        G_rows = list(G.rows())
        for i, pr in enumerate(probes):
            dist = abs(pr[0] - 0.5)
            if dist < p["r"]:
                cert.check(f"G grows at probe {i}", "degenerate-locus energy blows up on the interface", 0.0 if G.trend[i] == "GROWING" else -1.0, 0.0, f"slope {G.slopes[i]!r}")
            elif dist > p["r"] + max(p["eps_list"]) / 2 + u.h:
                cert.check(f"G vanishes at probe {i}", "degenerate-locus energy vanishes away from the interface", p["vanish_tol"] - float(G.G[i].max()))
    except KahlerLabError as exc:
        cert.fail("G field", "degenerate-locus energy", str(exc))
    return RunResult({"gap": planted, "refinement": ref_rows, "refinement_summary": summary, "G": G_rows}, cert)


# ------------------------------------------------------------------ sweep


def _sweep_task(args):
    preset, params, radius, m, degree, z, target = args
    weight = preset_weight(preset, params, 1)
    row = {"m": m, "degree": degree}
    try:
        K = build_kernel(Polydisk((0.0,), radius), weight, m=m, degree=degree)
        zp = np.array([[z]])
        row["degree"] = K.basis.degree
        row["value"] = beta_m(K, zp) if target == "beta_m" else float(K.diag(zp)[0])
        row["condition"] = K.condition
        row["error"] = ""
    except KahlerLabError as exc:
        row["value"] = float("nan")
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def _fit_decay(x, err):
    """Residuals of ``log err`` fitted linearly in ``log x`` and in ``x``."""
    le = np.log(err)
    res_poly = np.linalg.lstsq(np.stack([np.ones_like(x), np.log(x)], 1), le, rcond=None)
    res_exp = np.linalg.lstsq(np.stack([np.ones_like(x), x], 1), le, rcond=None)
    rp = float(np.sum((np.stack([np.ones_like(x), np.log(x)], 1) @ res_poly[0] - le) ** 2))
    rx = float(np.sum((np.stack([np.ones_like(x), x], 1) @ res_exp[0] - le) ** 2))
    return float(res_poly[0][1]), float(res_exp[0][1]), rp, rx


def run_sweep(cfg: ExperimentConfig, jobs: int = 1) -> RunResult:
    p = cfg.params
    cert = Certificate("sweep")
    params = p["params"] or default_params(p["preset"], 1)
    values = p["values"]
    tasks = []
    for v in values:
        m = v if p["axis"] == "m" else p["m"]
        degree = int(v) if p["axis"] == "degree" else p["degree"]
        tasks.append((p["preset"], params, p["radius"], m, degree, p["z"], p["target"]))
    rows = parallel_map(_sweep_task, tasks, jobs)
    for r in rows:
        if r["error"]:
            cert.fail(f"point m={r['m']!r} degree={r['degree']!r}", "kernel build", r["error"])
    ok = [r for r in rows if not r["error"]]
    x = np.array([r[p["axis"]] for r in ok], dtype=float)
    vals = np.array([r["value"] for r in ok])
    if p["target"] == "beta_m":
        err = np.abs(vals - 1.0)
        for r, e in zip(ok, err):
            r["abs_error"] = float(e)
        for i in range(1, len(ok)):
            if err[i] > 0 and err[i - 1] > 0:
                ok[i]["local_order"] = float(np.log(err[i] / err[i - 1]) / np.log(x[i] / x[i - 1]))
        if p["axis"] == "m" and len(ok) >= 3 and np.all(err > 0):
            order, rate, rp, rx = _fit_decay(x, err)
            sup = rx < rp and ok[-1].get("local_order", 0.0) < ok[1].get("local_order", 0.0)
            for r in ok:
                r.update(fit_poly_order=order, fit_exp_rate=rate, super_polynomial=sup)
            cert.check("beta_m error decay", "beta_m -> 1 faster than any power", 0.0 if sup else -1.0, 0.0, f"poly order {order!r}, exp rate {rate!r}")
    elif p["axis"] == "degree" and len(ok) >= 2:
        d = np.diff(vals[np.argsort(x)])
        cert.check("K diagonal nondecreasing in degree", "subspace monotonicity of the kernel diagonal", float(d.min()), p["monotone_tol"] * float(np.abs(vals).max()))
    return RunResult({"sweep": rows}, cert)


RUNNERS = {"kernel": run_kernel, "hessian": run_hessian, "toric": run_toric, "gap": run_gap, "sweep": run_sweep}
