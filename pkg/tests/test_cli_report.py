import json
import math

import pytest

from twistorlab import report as report_mod
from twistorlab.checks import CHECKS
from twistorlab.cli import EXIT_FAIL, EXIT_PASS, EXIT_USAGE, main
from twistorlab.gallery import build
from twistorlab.report import (
    SEED_ENV,
    RunConfig,
    UsageError,
    check_seed,
    inventory,
    run,
    strip_timing,
    to_json,
    verdict_for,
)

TOP_KEYS = ["tool", "version", "case", "description", "config", "conventions", "checks", "suite_verdict"]
RECORD_KEYS = ["name", "anchor", "expected", "residual", "tolerance", "verdict", "notes", "wall_time"]


@pytest.fixture(autouse=True)
def _no_env_seed(monkeypatch):
    monkeypatch.delenv(SEED_ENV, raising=False)


def test_flat_cn_all_pass(capsys):
    assert main(["verify", "flat_cn", "--samples", "2"]) == EXIT_PASS
    assert "suite: pass" in capsys.readouterr().out


def test_torus_negative_controls():
    rep = run(RunConfig(case="torus_02_control", samples=2))
    verdicts = {r["name"]: r["verdict"] for r in rep["checks"]}
    assert verdicts["twistor.nijenhuis_T_witness"] == "pass-negative-control"
    assert verdicts["connection.r02_nonzero"] == "pass-negative-control"
    assert rep["suite_verdict"] == "pass"


def test_tight_tolerance_fails(capsys):
    code = main(["verify", "hopf_skt", "--check", "twistor.nijenhuis_oracle", "--tol", "1e-300", "--samples", "1"])
    assert code == EXIT_FAIL


@pytest.mark.parametrize("argv", [
    ["verify", "flat_cn", "--samples", "0"],
    ["verify", "no_such_case"],
    ["verify", "flat_cn", "--check", "nothing.*"],
    ["verify", "flat_cn", "--fd-step", "-1"],
    ["verify", "flat_cn", "--tol", "nan"],
    ["verify", "flat_cn", "--threads", "0"],
    ["frobnicate"],
    [],
])
def test_usage_errors(argv, capsys):
    assert main(argv) == EXIT_USAGE
    assert "usage" in capsys.readouterr().err


def test_bad_env_seed(monkeypatch, capsys):
    monkeypatch.setenv(SEED_ENV, "twelve")
    assert main(["verify", "flat_cn"]) == EXIT_USAGE


def test_env_seed_echoed(monkeypatch):
    monkeypatch.setenv(SEED_ENV, "42")
    assert report_mod.default_seed() == (42, f"env:{SEED_ENV}")


def test_env_seed_in_json(monkeypatch, tmp_path):
    monkeypatch.setenv(SEED_ENV, "42")
    out = tmp_path / "r.json"
    assert main(["verify", "flat_cn", "--samples", "1", "--check", "fiber.*", "--json", str(out)]) == EXIT_PASS
    rep = json.loads(out.read_text(encoding="utf-8"))
    assert rep["config"]["seed"] == 42
    assert rep["config"]["seed_source"] == f"env:{SEED_ENV}"


def test_cli_seed_overrides_env(monkeypatch, capsys):
    monkeypatch.setenv(SEED_ENV, "42")
    main(["verify", "flat_cn", "--samples", "1", "--check", "fiber.*", "--seed", "3", "--json", "-"])
    rep = json.loads(capsys.readouterr().out)
    assert (rep["config"]["seed"], rep["config"]["seed_source"]) == (3, "cli")


def test_json_key_order():
    rep = run(RunConfig(case="flat_cn", samples=1, check_glob="fiber.*"))
    parsed = json.loads(to_json(rep))
    assert list(parsed) == TOP_KEYS
    for r in parsed["checks"]:
        assert list(r) == RECORD_KEYS
    names = [r["name"] for r in parsed["checks"]]
    assert names == sorted(names)
    assert "threads" not in parsed["config"]


def test_floats_round_trip():
    rep = run(RunConfig(case="flat_cn", samples=1, check_glob="fiber.embed_*"))
    back = json.loads(to_json(rep))
    for a, b in zip(rep["checks"], back["checks"]):
        assert a["residual"] == b["residual"]


def test_glob_filter():
    rep = run(RunConfig(case="hopf_skt", samples=1, check_glob="calculus.*"))
    assert [r["name"] for r in rep["checks"]] == ["calculus.dH", "calculus.dd_zero", "calculus.h_type"]


def test_thread_determinism():
    a = run(RunConfig(case="flat_cn", samples=2, seed=9))
    b = run(RunConfig(case="flat_cn", samples=2, seed=9, threads=3))
    assert to_json(strip_timing(a)) == to_json(strip_timing(b))


def test_seed_changes_samples():
    a = run(RunConfig(case="flat_cn", samples=2, seed=1, check_glob="twistor.nijenhuis_oracle"))
    b = run(RunConfig(case="flat_cn", samples=2, seed=2, check_glob="twistor.nijenhuis_oracle"))
    assert a["checks"][0]["residual"] != b["checks"][0]["residual"]


def test_check_seed_order_independent():
    assert check_seed(0, "flat_cn", "a") == check_seed(0, "flat_cn", "a")
    assert check_seed(0, "flat_cn", "a") != check_seed(0, "flat_cn", "b")
    assert 0 <= check_seed(2 ** 70, "x", "y") < 2 ** 63


@pytest.mark.parametrize("residual,expected,tol,verdict", [
    (1e-9, "pass", 1e-6, "pass"),
    (1e-3, "pass", 1e-6, "fail"),
    (0.5, "fail", 1e-2, "pass-negative-control"),
    (1e-5, "fail", 1e-2, "fail"),
    (float("nan"), "pass", 1e-6, "invalid"),
    (float("inf"), "fail", 1e-2, "invalid"),
    (None, "pass", 1e-6, "invalid"),
])
def test_verdict_logic(residual, expected, tol, verdict):
    assert verdict_for(residual, expected, tol) == verdict


def test_nan_residual_marks_invalid(monkeypatch):
    name = "fiber.dimensions"
    original = CHECKS[name]
    monkeypatch.setitem(CHECKS, name, type(original)(name, original.anchor, lambda case, ctx: (math.nan, {})))
    rep = run(RunConfig(case="flat_cn", samples=1, check_glob=name))
    rec = rep["checks"][0]
    assert rec["verdict"] == "invalid"
    assert rec["residual"] is None
    assert rep["suite_verdict"] == "fail"
    to_json(rep)  # no NaN reaches the serializer


def test_domain_error_marks_invalid(monkeypatch):
    from twistorlab.chart_calculus import DomainError

    def boom(case, ctx):
        raise DomainError("outside chart")

    name = "fiber.dimensions"
    monkeypatch.setitem(CHECKS, name, type(CHECKS[name])(name, "x", boom))
    rec = run(RunConfig(case="flat_cn", samples=1, check_glob=name))["checks"][0]
    assert rec["verdict"] == "invalid"
    assert "DomainError" in rec["notes"]["error"]


def test_tol_override_skips_negative_controls():
    rep = run(RunConfig(case="torus_02_control", samples=1, tol=1e-1))
    for r in rep["checks"]:
        if r["expected"] == "fail":
            assert r["tolerance"] == build("torus_02_control").expectation(r["name"]).tol
        else:
            assert r["tolerance"] == 1e-1


def test_run_config_validation():
    with pytest.raises(UsageError):
        run(RunConfig(case="flat_cn", samples=-3))
    with pytest.raises(UsageError):
        RunConfig(case="flat_cn", seed=-1).validate()


def test_list_inventory(capsys):
    assert main(["list"]) == EXIT_PASS
    out = capsys.readouterr().out
    assert "hopf_skt" in out
    inv = inventory()
    assert list(inv["cases"])[0] == "flat_cn"
    assert "hopf_skt" in inv["cases"]
    assert all(anchor.strip() for anchor in inv["checks"].values())
    assert list(inv["checks"]) == sorted(inv["checks"])


def test_list_json(capsys):
    assert main(["list", "--json"]) == EXIT_PASS
    inv = json.loads(capsys.readouterr().out)
    names = list(inv["checks"])
    assert len(names) == len(set(names))
    for info in inv["cases"].values():
        case_names = [c["name"] for c in info["checks"]]
        assert case_names == sorted(case_names)
        assert set(case_names) <= set(names)


def test_conventions_record_h_twist_sign():
    rep = run(RunConfig(case="hopf_skt", samples=1, check_glob="connection.h_twist_sign"))
    assert "h_twist_sign_measured" in rep["conventions"]
    assert "curvature_sign" in rep["conventions"]


def test_module_entry_point():
    import subprocess
    import sys

    proc = subprocess.run([sys.executable, "-m", "twistorlab", "list"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "hopf_skt" in proc.stdout
