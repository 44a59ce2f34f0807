"""Command-line entry point: ``kahlerlab <subcommand> [--config FILE] [--out DIR]``.

Exit status is 0 when the certificate passes, 1 when any row fails and 2 on
configuration errors.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import SUBCOMMANDS, load_config, validate
from .errors import ConfigError
from .reports import atomic_write, csv_text, json_text, manifest
from .runners import RUNNERS

_PRESET_HELP = {
    "kernel": "weight preset",
    "hessian": "weight preset",
    "toric": "path preset (constant, affine, bump, bump_affine)",
    "gap": None,
    "sweep": "weight preset",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kahlerlab", description="Weighted Bergman kernels, log-kernel Hessians, toric Mabuchi functionals and gap energies.")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name, help=f"run the {name} suite")
        sp.add_argument("--config", type=Path, help="JSON configuration file")
        sp.add_argument("--out", type=Path, default=Path("results"), help="output directory (default: results)")
        sp.add_argument("--seed", type=int, default=0, help="seed for randomized suites (default: 0)")
        sp.add_argument("--jobs", type=int, default=1, help="worker processes (default: 1)")
        if _PRESET_HELP[name]:
            sp.add_argument("--preset", help=f"override the configured {_PRESET_HELP[name]}")
    return parser


def run(subcommand: str, config_path: Path | None, out: Path, seed: int = 0, jobs: int = 1, preset: str | None = None) -> int:
    """Execute one subcommand and write its files; returns the exit status."""
    if jobs < 1:
        raise ConfigError(f"--jobs must be positive, got {jobs}")
    if config_path is not None:
        cfg = load_config(config_path, subcommand, seed)
    else:
        cfg = validate(subcommand, {}, seed)
    if preset is not None:
        raw = dict(cfg.params)
        raw["preset"] = preset
        if subcommand in ("kernel", "hessian", "sweep"):
            raw["params"] = None if subcommand == "hessian" else []
        cfg = validate(subcommand, _to_json(raw), seed)
    result = RUNNERS[subcommand](cfg, jobs)
    files = []
    for name, rows in result.tables.items():
        fname = f"{name}.csv" if name == subcommand else f"{subcommand}_{name}.csv"
        atomic_write(out / fname, csv_text(rows))
        files.append(fname)
    atomic_write(out / "certificate.json", json_text(result.certificate.as_dict()))
    atomic_write(out / "manifest.json", json_text(manifest(subcommand, cfg.as_dict(), seed, files + ["certificate.json"])))
    failed = [r for r in result.certificate.rows if not r.passed]
    status = "PASS" if not failed else f"FAIL ({len(failed)} of {len(result.certificate.rows)} rows)"
    print(f"{subcommand}: {status}; wrote {len(files) + 2} files to {out}")
    for r in failed[:10]:
        print(f"  failed: {r.name} (margin {r.margin:.3e}, tolerance {r.tolerance:.1e}) {r.detail}")
    return 0 if not failed else 1


def _to_json(params: dict) -> dict:
    """Validated values back to their JSON form (complex as ``[re, im]``)."""

    def conv(v):
        if isinstance(v, complex):
            return [v.real, v.imag]
        if isinstance(v, list):
            return [conv(x) for x in v]
        return v

    return {k: conv(v) for k, v in params.items() if v is not None}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return run(args.subcommand, args.config, args.out, args.seed, args.jobs, getattr(args, "preset", None))
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
