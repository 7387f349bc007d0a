"""``chemostat-biogas`` command line front end."""

from __future__ import annotations

import argparse
import sys

from . import experiments
from .config import load_file, resolve_panels
from .errors import BiogasError, ConfigError

COMMANDS = ("phase-portrait", "reward-surface", "compare-feedbacks", "value-surface", "appendix", "check")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="chemostat-biogas",
        description="Biogas-optimal chemostat feedbacks: figure reproductions and checks.",
    )
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", metavar="PATH", help="YAML or JSON panel config; merged over the built-in defaults")
    p.add_argument("--out", metavar="DIR", default="out", help="output directory (default: out)")
    p.add_argument("--jobs", metavar="N", type=int, default=None, help="worker processes (default: all cores)")
    p.add_argument("--step", metavar="H", type=float, default=None, help="override the integrator step")
    p.add_argument(
        "--seedless", action="store_true",
        help="no-op: every run is deterministic, there is no random seed",
    )
    return p


def _panels(args):
    user = load_file(args.config) if args.config else None
    if args.step is not None:
        if not args.step > 0:
            raise ConfigError("--step: must be positive")
        user = dict(user or {})
        if "panels" in user:
            user["panels"] = [experiments.merge_integrator(p, args.step) for p in user["panels"]]
        else:
            user = experiments.merge_integrator(user, args.step)
    return resolve_panels(experiments.DEFAULTS[args.command], user)


def _render(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, int)):
        return str(value)
    return repr(float(value))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        panels = _panels(args)
        if args.command == "check":
            report = experiments.cmd_check(panels, args.out, args.jobs)
            for check, target, ok, value, kind in report.rows:
                print(f"{'PASS' if ok else 'FAIL'},{check},{target},{value:.6g}")
            n_fail = sum(1 for r in report.rows if not r[2])
            print(f"summary,{len(report.rows) - n_fail} passed,{n_fail} failed")
            return report.exit_code()
        for key, value in experiments.COMMANDS[args.command](panels, args.out, args.jobs):
            print(f"{key},{_render(value)}")
    except BiogasError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
