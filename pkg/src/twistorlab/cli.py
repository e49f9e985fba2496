"""Command-line interface: ``twistorlab verify <case>`` and ``twistorlab list``."""

from __future__ import annotations

import argparse
import json
import sys

from .report import RunConfig, UsageError, default_seed, inventory, run, to_json

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="twistorlab", description="Numerical checks for twistor-space integrability.")
    sub = p.add_subparsers(dest="command", required=True)
    v = sub.add_parser("verify", help="run the checks of a gallery case")
    v.add_argument("case")
    v.add_argument("--tol", type=float, default=None, help="tolerance for every positive check")
    v.add_argument("--fd-step", type=float, default=None)
    v.add_argument("--samples", type=int, default=None)
    v.add_argument("--seed", type=int, default=None)
    v.add_argument("--check", dest="check_glob", default=None, help="glob over check names")
    v.add_argument("--json", dest="json_path", default=None, help="write the JSON report here ('-' for stdout)")
    v.add_argument("--threads", type=int, default=1)
    sub.add_parser("list", help="list cases and checks").add_argument("--json", action="store_true")
    return p


def _summary(report: dict) -> str:
    lines = [f"case {report['case']}  seed {report['config']['seed']} ({report['config']['seed_source']})"]
    for r in report["checks"]:
        res = "nan" if r["residual"] is None else f"{r['residual']:.3e}"
        op = "<=" if r["expected"] == "pass" else ">="
        lines.append(f"  {r['verdict']:<22} {r['name']:<44} {res} {op} {r['tolerance']:.0e}")
    lines.append(f"suite: {report['suite_verdict']}")
    return "\n".join(lines)


def main(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
        if args.command == "list":
            inv = inventory()
            if args.json:
                print(json.dumps(inv, indent=2))
            else:
                for key, info in inv["cases"].items():
                    print(f"{key}: {info['description']}")
                    for c in info["checks"]:
                        print(f"    {c['name']} [{c['expected']}, tol {c['tolerance']:g}]")
                print("checks:")
                for name, anchor in inv["checks"].items():
                    print(f"    {name}: {anchor}")
            return EXIT_PASS
        seed, source = (args.seed, "cli") if args.seed is not None else default_seed()
        kw = {k: getattr(args, k) for k in ("samples", "fd_step") if getattr(args, k) is not None}
        config = RunConfig(case=args.case, seed=seed, seed_source=source, tol=args.tol,
                           check_glob=args.check_glob, threads=args.threads, json_path=args.json_path, **kw)
        report = run(config)
    except UsageError as exc:
        print(f"twistorlab: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    text = to_json(report)
    if config.json_path == "-":
        sys.stdout.write(text)
    else:
        if config.json_path:
            with open(config.json_path, "w", encoding="utf-8") as fh:
                fh.write(text)
        print(_summary(report))
    return EXIT_PASS if report["suite_verdict"] == "pass" else EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
