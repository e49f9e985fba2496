"""Run gallery checks and build deterministic JSON reports."""

from __future__ import annotations

import fnmatch
import json
import math
import os
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__
from .chart_calculus import DEFAULT_STEP, DomainError
from .checks import CHECKS, CheckContext
from .gallery import CASE_KEYS, build
from .twistor_fiber import ChartDomainError

SEED_ENV = "TWISTORLAB_SEED"
DEFAULT_SAMPLES = 4

CONVENTIONS = {
    "curvature_sign": "R(X,Y) = [nabla_X, nabla_Y] - nabla_[X,Y]; R_kl = d_k A_l - d_l A_k + [A_k, A_l]",
    "transport": "parallel sections solve s' = -A(gamma') s; holonomy of a small (k,l) square is 1 - eps^2 R_kl",
    "three_form": "H = -d^c w = i((dw)^{2,1} - (dw)^{1,2}), w = g(I., .); nabla^+- = LC +- (1/2) g^{-1} H",
    "h_twist_sign": "nabla^- = Ch - (1/2) I [g^{-1}H, I]",
    "two_forms": "4d orientation is the sign of the Pfaffian of w; Lambda^- = Lambda^{1,1}_0",
}


class UsageError(ValueError):
    """Bad command-line configuration (exit code 2)."""


@dataclass(frozen=True)
class RunConfig:
    case: str
    samples: int = DEFAULT_SAMPLES
    seed: int = 0
    seed_source: str = "default"
    fd_step: float = DEFAULT_STEP
    tol: float | None = None
    check_glob: str | None = None
    threads: int = 1
    json_path: str | None = None

    def validate(self) -> "RunConfig":
        if self.case not in CASE_KEYS:
            raise UsageError(f"unknown case {self.case!r}; run 'list' for the inventory")
        if self.samples <= 0:
            raise UsageError("--samples must be a positive integer")
        if not (self.fd_step > 0 and math.isfinite(self.fd_step)):
            raise UsageError("--fd-step must be positive")
        if self.tol is not None and not (self.tol > 0 and math.isfinite(self.tol)):
            raise UsageError("--tol must be positive")
        if self.threads <= 0:
            raise UsageError("--threads must be positive")
        if self.seed < 0:
            raise UsageError("--seed must be nonnegative")
        return self


def default_seed() -> tuple[int, str]:
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw == "":
        return 0, "default"
    try:
        return int(raw), f"env:{SEED_ENV}"
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def check_seed(seed: int, case: str, name: str) -> int:
    """Per-check seed independent of execution order."""
    return (seed * 1_000_003 + zlib.crc32(f"{case}/{name}".encode())) % (2 ** 63)


def verdict_for(residual: float, expected: str, tol: float) -> str:
    if residual is None or not math.isfinite(residual):
        return "invalid"
    if expected == "pass":
        return "pass" if residual <= tol else "fail"
    return "pass-negative-control" if residual >= tol else "fail"


def selected_checks(case, pattern: str | None):
    names = sorted(e.check for e in case.expected)
    if pattern is None:
        return names
    chosen = [n for n in names if fnmatch.fnmatchcase(n, pattern)]
    if not chosen:
        raise UsageError(f"no check of case {case.key!r} matches {pattern!r}")
    return chosen


def _run_one(case, name: str, config: RunConfig) -> dict:
    exp = case.expectation(name)
    tol = exp.tol if (config.tol is None or exp.verdict == "fail") else config.tol
    ctx = CheckContext(np.random.default_rng(check_seed(config.seed, case.key, name)),
                       config.samples, config.fd_step)
    start = time.perf_counter()
    notes = {}
    try:
        with np.errstate(all="ignore"):
            residual, notes = CHECKS[name].fn(case, ctx)
        residual = float(residual)
    except (FloatingPointError, np.linalg.LinAlgError, DomainError, ChartDomainError) as exc:
        residual = float("nan")
        notes = {"error": f"{type(exc).__name__}: {exc}"}
    elapsed = time.perf_counter() - start
    verdict = verdict_for(residual, exp.verdict, tol)
    return {
        "name": name,
        "anchor": CHECKS[name].anchor,
        "expected": exp.verdict,
        "residual": residual if math.isfinite(residual) else None,
        "tolerance": tol,
        "verdict": verdict,
        "notes": {k: notes[k] for k in sorted(notes)},
        "wall_time": round(elapsed, 6),
    }


def run(config: RunConfig) -> dict:
    """Execute the configured checks and return the report as an ordered dict."""
    config.validate()
    case = build(config.case)
    names = selected_checks(case, config.check_glob)
    if config.threads == 1:
        records = [_run_one(case, n, config) for n in names]
    else:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            records = list(pool.map(lambda n: _run_one(case, n, config), names))
    records.sort(key=lambda r: r["name"])
    suite = "pass" if all(r["verdict"] in ("pass", "pass-negative-control") for r in records) else "fail"
    conventions = dict(CONVENTIONS)
    for r in records:
        if "h_twist_sign" in r["notes"]:
            conventions["h_twist_sign_measured"] = r["notes"]["h_twist_sign"]
    return {
        "tool": "twistorlab",
        "version": __version__,
        "case": case.key,
        "description": case.description,
        "config": {
            "samples": config.samples,
            "seed": config.seed,
            "seed_source": config.seed_source,
            "fd_step": config.fd_step,
            "tol_override": config.tol,
            "check_glob": config.check_glob,
        },
        "conventions": conventions,
        "checks": records,
        "suite_verdict": suite,
    }


def to_json(report: dict) -> str:
    """Serialize with fixed key order; the thread count is deliberately not echoed."""
    return json.dumps(report, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def strip_timing(report: dict) -> dict:
    out = dict(report)
    out["checks"] = [{k: v for k, v in r.items() if k != "wall_time"} for r in report["checks"]]
    return out


def inventory() -> dict:
    """Cases with their checks, and every check with its anchor, in stable order."""
    cases = {}
    for key in CASE_KEYS:
        case = build(key)
        cases[key] = {
            "description": case.description,
            "checks": [{"name": e.check, "expected": e.verdict, "tolerance": e.tol}
                       for e in sorted(case.expected, key=lambda e: e.check)],
        }
    checks = {name: CHECKS[name].anchor for name in sorted(CHECKS)}
    return {"cases": cases, "checks": checks}
