"""Deterministic CSV/JSON output and pass/fail certificates."""
from __future__ import annotations

import csv
import io
import json
import math
import os
import platform
import tempfile
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable

import numpy as np

from . import __version__

CONVENTIONS = {
    "c_n": "pi^n",
    "dV": "Lebesgue measure on C^n",
    "kernel_normalization": "K(z, z) = sup |f(z)|^2 / ||f||^2 with ||f||^2 = int |f|^2 e^{-m phi} dV",
    "beta_m": "(pi / m)^n K^(m)(z, z) e^{-m phi(z)}",
    "hessian_direction": "[1, a] via translation z -> z + t a",
    "mabuchi_background": "unit-volume Fubini-Study metric on CP^1, Ric = 4 omega, RBAR = 4",
    "gap_energy": "vertex lattice on [0,1]^n, trapezoid transverse weights, E_blowup(h) = 1/(4h)",
}


def format_value(v) -> str:
    """Stable text form: shortest round-trip for floats, ``re+imj`` for complex."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    if isinstance(v, (complex, np.complexfloating)):
        return f"{format_value(v.real)}{'+' if v.imag >= 0 or math.isnan(v.imag) else '-'}{format_value(abs(v.imag))}j"
    if v is None:
        return ""
    return str(v)


def csv_text(rows: Iterable[dict], columns: list[str] | None = None) -> str:
    """CSV body with columns in first-seen order (or as given)."""
    rows = list(rows)
    if columns is None:
        columns = []
        for r in rows:
            for k in r:
                if k not in columns:
                    columns.append(k)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([format_value(r.get(c)) for c in columns])
    return buf.getvalue()


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else format_value(v)
    if isinstance(v, (complex, np.complexfloating)):
        return [_jsonable(v.real), _jsonable(v.imag)]
    return v


def json_text(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def atomic_write(path: str | os.PathLike, text: str) -> Path:
    """Write through a temporary file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


@dataclass
class CertificateRow:
    """One checked inequality; ``margin >= 0`` means it holds."""

    name: str
    anchor: str
    margin: float
    tolerance: float
    passed: bool
    detail: str = ""

    def as_dict(self) -> dict:
        return {"name": self.name, "anchor": self.anchor, "margin": self.margin, "tolerance": self.tolerance, "pass": self.passed, "detail": self.detail}


@dataclass
class Certificate:
    subcommand: str
    rows: list[CertificateRow] = field(default_factory=list)
    environment: dict = field(default_factory=lambda: dict(CONVENTIONS))

    def check(self, name: str, anchor: str, margin: float, tolerance: float = 0.0, detail: str = "") -> bool:
        """Record ``margin + tolerance >= 0``; NaN margins fail."""
        ok = bool(np.isfinite(margin) and margin + tolerance >= 0)
        self.rows.append(CertificateRow(name, anchor, float(margin), float(tolerance), ok, detail))
        return ok

    def fail(self, name: str, anchor: str, detail: str) -> None:
        self.rows.append(CertificateRow(name, anchor, float("nan"), 0.0, False, detail))

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def as_dict(self) -> dict:
        return {"subcommand": self.subcommand, "pass": self.passed, "rows": [r.as_dict() for r in self.rows], "environment": self.environment}


def manifest(subcommand: str, config: dict, seed: int, files: list[str]) -> dict:
    """Run metadata; the only place timestamps and versions appear."""
    return {
        "subcommand": subcommand,
        "seed": seed,
        "config": config,
        "files": sorted(files),
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "versions": {"kahlerlab": __version__, "numpy": np.__version__, "python": platform.python_version()},
        "conventions": CONVENTIONS,
    }
