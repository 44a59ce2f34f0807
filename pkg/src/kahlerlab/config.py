"""Experiment configuration: JSON files validated against per-subcommand schemas."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

from .errors import ConfigError

SUBCOMMANDS = ("kernel", "hessian", "toric", "gap", "sweep")


def _num(positive=False, integer=False, nonneg=False):
    def check(key, v):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"{key}: expected a number, got {v!r}")
        if integer and int(v) != v:
            raise ConfigError(f"{key}: expected an integer, got {v!r}")
        if positive and not v > 0:
            raise ConfigError(f"{key}: must be > 0, got {v!r}")
        if nonneg and v < 0:
            raise ConfigError(f"{key}: must be >= 0, got {v!r}")
        return int(v) if integer else float(v)

    return check


def _opt(check):
    return lambda key, v: None if v is None else check(key, v)


def _str(choices=None):
    def check(key, v):
        if not isinstance(v, str):
            raise ConfigError(f"{key}: expected a string, got {v!r}")
        if choices is not None and v not in choices:
            raise ConfigError(f"{key}: {v!r} is not one of {', '.join(choices)}")
        return v

    return check


def _list(item, nonempty=False):
    def check(key, v):
        if not isinstance(v, list):
            raise ConfigError(f"{key}: expected a list, got {v!r}")
        if nonempty and not v:
            raise ConfigError(f"{key}: list must be nonempty")
        return [item(f"{key}[{i}]", x) for i, x in enumerate(v)]

    return check


def _complex(key, v):
    """``[re, im]`` pairs or plain reals."""
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return complex(v)
    if isinstance(v, list) and len(v) == 2 and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
        return complex(v[0], v[1])
    raise ConfigError(f"{key}: expected a real number or [re, im], got {v!r}")


def _point(key, v):
    """A point of C^n as a list of complex entries; a bare entry means n = 1."""
    if isinstance(v, list) and v and all(isinstance(x, list) for x in v):
        return [_complex(f"{key}[{i}]", x) for i, x in enumerate(v)]
    return [_complex(key, v)]


def _blowup(key, v):
    if not isinstance(v, dict):
        raise ConfigError(f"{key}: expected an object, got {v!r}")
    unknown = sorted(set(v) - {"ms", "R", "fit_radius"})
    if unknown:
        raise ConfigError(f"{key}: unknown key(s) {', '.join(unknown)}")
    out = {}
    if "ms" in v:
        out["ms"] = _list(POS, nonempty=True)(f"{key}.ms", v["ms"])
    for k in ("R", "fit_radius"):
        if k in v:
            out[k] = POS(f"{key}.{k}", v[k])
    return out


POS = _num(positive=True)
POS_INT = _num(positive=True, integer=True)
NONNEG_INT = _num(nonneg=True, integer=True)

_WEIGHTS = ("zero", "gaussian", "quadratic", "quartic_perturbed", "separable", "translation", "t_harmonic")

SCHEMAS: dict[str, dict[str, tuple[Any, Callable]]] = {
    "kernel": {
        "preset": ("gaussian", _str(_WEIGHTS)),
        "params": ([], _list(_num())),
        "n": (1, _num(positive=True, integer=True)),
        "radius": (1.0, POS),
        "degree": (None, _opt(POS_INT)),
        "m_list": ([1.0], _list(POS, nonempty=True)),
        "points": ([0.0], _list(_point, nonempty=True)),
        "t": (0.0, _complex),
        "density_R": (None, _opt(POS)),
        "cond_max": (1e12, POS),
        "factor_tol": (1e-10, POS),
        "oracle_tol": (1e-8, POS),
    },
    "hessian": {
        "preset": ("separable", _str(_WEIGHTS)),
        "params": (None, _opt(_list(_num()))),
        "n": (1, _num(positive=True, integer=True)),
        "radius": (1.0, POS),
        "a": (0.0, _point),
        "z": ([[0.2, 0.1]], _list(_point, nonempty=True)),
        "m_list": ([1.0], _list(POS, nonempty=True)),
        "degree": (None, _opt(POS_INT)),
        "selection": ("boundary", _str(("boundary", "min_dbar"))),
        "random_count": (0, NONNEG_INT),
        "positivity_tol": (1e-6, POS),
        "kappa_tol": (1e-10, POS),
        "fd_factor": (3.0, POS),
        "blowup": (None, _opt(_blowup)),
    },
    "toric": {
        "preset": ("affine", _str(("constant", "affine", "bump", "bump_affine"))),
        "n_t": (11, _num(positive=True, integer=True)),
        "n_quad": (400, POS_INT),
        "A_grid": ([0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 40.0], _list(_num(nonneg=True), nonempty=True)),
        "vf_times": ([0.3, 0.5, 0.7], _list(_num(nonneg=True), nonempty=True)),
        "convexity_tol": (1e-6, POS),
        "vf_tol": (1e-5, POS),
        "truncation_tol": (1e-8, POS),
        "coincidence_tol": (1e-10, POS),
    },
    "gap": {
        "planted_count": (200, NONNEG_INT),
        "refinement": (["half", "mollified", "smooth"], _list(_str(("half", "mollified", "smooth", "annulus")), nonempty=True)),
        "width": (0.1, POS),
        "probe_k": (257, POS_INT),
        "eps_list": ([0.2, 0.1, 0.05, 0.025], _list(POS, nonempty=True)),
        "r": (0.05, POS),
        "probes": ([[0.5, 0.5], [0.8, 0.5], [0.2, 0.3]], _list(_list(_num(), nonempty=True), nonempty=True)),
        "slope_range": ([-1.2, -0.8], _list(_num(), nonempty=True)),
        "vanish_tol": (1e-8, POS),
    },
    "sweep": {
        "target": ("beta_m", _str(("beta_m", "kernel_diag"))),
        "axis": ("m", _str(("m", "degree"))),
        "values": ([2.0, 4.0, 8.0, 16.0], _list(POS, nonempty=True)),
        "preset": ("gaussian", _str(_WEIGHTS)),
        "params": ([], _list(_num())),
        "radius": (1.0, POS),
        "m": (1.0, POS),
        "degree": (None, _opt(POS_INT)),
        "z": (0.0, _complex),
        "monotone_tol": (1e-12, POS),
    },
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated parameters of one subcommand run."""

    subcommand: str
    params: dict
    seed: int = 0

    def __getitem__(self, key):
        return self.params[key]

    def as_dict(self) -> dict:
        return {"subcommand": self.subcommand, "seed": self.seed, **self.params}


def validate(subcommand: str, raw: dict | None, seed: int = 0) -> ExperimentConfig:
    """Fill defaults and check every key against the subcommand schema.

    Raises
    ------
    ConfigError
        On unknown subcommands, unknown keys or malformed values.
    """
    if subcommand not in SCHEMAS:
        raise ConfigError(f"unknown subcommand {subcommand!r}; known: {', '.join(SUBCOMMANDS)}")
    raw = {} if raw is None else raw
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a JSON object")
    schema = SCHEMAS[subcommand]
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise ConfigError(f"unknown key(s) for {subcommand}: {', '.join(unknown)}")
    params = {}
    for key, (default, check) in schema.items():
        params[key] = check(key, raw[key]) if key in raw else (check(key, default) if default is not None else None)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError(f"seed must be an integer, got {seed!r}")
    return ExperimentConfig(subcommand, params, seed)


def load_config(path: str | Path, subcommand: str, seed: int = 0) -> ExperimentConfig:
    """Parse a JSON file; syntax errors report line and column."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return validate(subcommand, raw, seed)
