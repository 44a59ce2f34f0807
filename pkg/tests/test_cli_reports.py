import json
import os

import numpy as np
import pytest

from kahlerlab.cli import main
from kahlerlab.config import SCHEMAS, load_config, validate
from kahlerlab.errors import ConfigError
from kahlerlab.reports import Certificate, atomic_write, csv_text, format_value, json_text
from kahlerlab.runners import parallel_map

SMALL = {
    "kernel": {"m_list": [1, 4], "points": [0.0, [0.3, 0.1]], "density_R": 1.0},
    "hessian": {"preset": "quadratic", "z": [[0.2, 0.1], [-0.1, 0.3]], "random_count": 3},
    "toric": {"preset": "affine", "n_t": 7, "vf_times": [0.5]},
    "gap": {"planted_count": 24, "probe_k": 129},
    "sweep": {"values": [2, 4, 8]},
}


def write_config(tmp_path, sub, body):
    path = tmp_path / f"{sub}.json"
    path.write_text(json.dumps(body))
    return path


def run_cli(tmp_path, sub, out, *extra, body=None):
    cfg = write_config(tmp_path, sub, SMALL[sub] if body is None else body)
    return main([sub, "--config", str(cfg), "--out", str(out), *extra])


def csv_bodies(out):
    return {p.name: p.read_bytes() for p in sorted(out.iterdir()) if p.suffix == ".csv"}


# ------------------------------------------------------------------ formatting


@pytest.mark.parametrize("value, text", [
    (0.1, "0.1"), (1e-20, "1e-20"), (np.float64(2.5), "2.5"), (3, "3"), (True, "true"),
    (1 - 2j, "1.0-2.0j"), (float("nan"), "nan"), (float("-inf"), "-inf"), (None, ""),
])
def test_format_value(value, text):
    assert format_value(value) == text


def test_format_value_round_trips():
    x = 0.1 + 0.2
    assert float(format_value(x)) == x


def test_csv_columns_first_seen_order():
    text = csv_text([{"b": 1, "a": 2.0}, {"a": 3.0, "c": "x"}])
    assert text.splitlines() == ["b,a,c", "1,2.0,", ",3.0,x"]


def test_json_text_is_sorted_and_handles_numpy():
    obj = json.loads(json_text({"z": np.arange(2), "a": 1j, "n": float("nan")}))
    assert list(obj) == ["a", "n", "z"]
    assert obj["a"] == [0.0, 1.0] and obj["n"] == "nan" and obj["z"] == [0, 1]


def test_atomic_write_leaves_no_temporaries(tmp_path):
    target = tmp_path / "sub" / "f.csv"
    atomic_write(target, "a\n")
    atomic_write(target, "b\n")
    assert target.read_text() == "b\n"
    assert os.listdir(target.parent) == ["f.csv"]


def test_atomic_write_keeps_old_file_on_failure(tmp_path):
    target = tmp_path / "f.csv"
    atomic_write(target, "old\n")

    with pytest.raises(TypeError):
        atomic_write(target, 12345)
    assert target.read_text() == "old\n"
    assert os.listdir(tmp_path) == ["f.csv"]


def test_certificate_logic():
    c = Certificate("kernel")
    assert c.check("ok", "x", 0.0)
    assert c.check("within tolerance", "x", -1e-9, 1e-8)
    assert c.passed
    assert not c.check("nan", "x", float("nan"), 1.0)
    assert not c.passed
    c.fail("boom", "x", "detail")
    assert [r["pass"] for r in c.as_dict()["rows"]] == [True, True, False, False]


# ------------------------------------------------------------------ config


def test_defaults_validate_for_every_subcommand():
    for sub in SCHEMAS:
        cfg = validate(sub, {}, seed=3)
        assert cfg.seed == 3 and set(cfg.params) == set(SCHEMAS[sub])


@pytest.mark.parametrize("sub, raw", [
    ("kernel", {"bogus": 1}),
    ("kernel", {"m_list": []}),
    ("kernel", {"m_list": [0.0]}),
    ("hessian", {"selection": "nearest"}),
    ("hessian", {"blowup": {"ms": [4], "radius": 2}}),
    ("toric", {"n_t": 2.5}),
    ("gap", {"planted_count": True}),
    ("sweep", {"z": [1, 2, 3]}),
    ("warp", {}),
])
def test_invalid_configs(sub, raw):
    with pytest.raises(ConfigError):
        validate(sub, raw)


def test_json_syntax_error_reports_position(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "m_list": [1,\n}')
    with pytest.raises(ConfigError, match="line 3"):
        load_config(p, "kernel")


def test_complex_and_point_parsing():
    cfg = validate("hessian", {"a": [0.5, -0.25], "z": [[[0.1, 0.0], [0.2, 0.3]]], "n": 2})
    assert cfg["a"] == [0.5 - 0.25j]
    assert cfg["z"] == [[0.1, 0.2 + 0.3j]]


# ------------------------------------------------------------------ CLI


@pytest.mark.parametrize("sub", list(SMALL))
def test_subcommands_pass_and_write_files(tmp_path, sub):
    out = tmp_path / "out"
    assert run_cli(tmp_path, sub, out) == 0
    names = set(os.listdir(out))
    assert {f"{sub}.csv", "certificate.json", "manifest.json"} <= names
    cert = json.loads((out / "certificate.json").read_text())
    assert cert["pass"] and cert["rows"]
    man = json.loads((out / "manifest.json").read_text())
    assert set(man["files"]) == names - {"manifest.json"}
    assert "created" in man and "created" not in cert


@pytest.mark.parametrize("sub", list(SMALL))
def test_repeated_runs_are_byte_identical(tmp_path, sub):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run_cli(tmp_path, sub, a, "--seed", "5") == 0
    assert run_cli(tmp_path, sub, b, "--seed", "5") == 0
    assert csv_bodies(a) == csv_bodies(b)
    assert (a / "certificate.json").read_bytes() == (b / "certificate.json").read_bytes()


@pytest.mark.parametrize("sub", ["hessian", "gap"])
def test_parallel_runs_match_serial(tmp_path, sub):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run_cli(tmp_path, sub, a) == 0
    assert run_cli(tmp_path, sub, b, "--jobs", "2") == 0
    assert csv_bodies(a) == csv_bodies(b)


def test_seed_changes_random_rows(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run_cli(tmp_path, "hessian", a, "--seed", "1")
    run_cli(tmp_path, "hessian", b, "--seed", "2")
    assert csv_bodies(a)["hessian.csv"] != csv_bodies(b)["hessian.csv"]


def test_failing_certificate_exit_code(tmp_path, capsys):
    out = tmp_path / "out"
    assert run_cli(tmp_path, "kernel", out, body={"oracle_tol": 1e-300, "m_list": [2.0]}) == 1
    assert "FAIL" in capsys.readouterr().out
    assert not json.loads((out / "certificate.json").read_text())["pass"]


def test_config_error_exit_code(tmp_path, capsys):
    assert run_cli(tmp_path, "kernel", tmp_path / "out", body={"bogus": 1}) == 2
    assert "bogus" in capsys.readouterr().err
    assert not (tmp_path / "out").exists()


def test_preset_override(tmp_path):
    out = tmp_path / "out"
    assert main(["hessian", "--out", str(out), "--preset", "gaussian"]) == 0
    assert json.loads((out / "manifest.json").read_text())["config"]["preset"] == "gaussian"


def test_kernel_columns(tmp_path):
    out = tmp_path / "out"
    run_cli(tmp_path, "kernel", out)
    header = (out / "kernel.csv").read_text().splitlines()[0].split(",")
    assert {"m", "z_re", "z_im"} <= set(header)


def test_parallel_map_preserves_order():
    assert parallel_map(abs, [-3, 1, -2], 2) == [3, 1, 2]
