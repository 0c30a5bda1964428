"""Command line: ``nhdqpt run <config>`` and ``nhdqpt validate <config>``.

Exit status 0 on success, 2 for unreadable or invalid configs, 3 when a
numerical precondition fails (exceptional point or closed gap on the grid).
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .config import load_config
from .errors import ConfigError, PreconditionError
from .nhband import near_ep
from .pipeline import compute, excluded_momenta, write

EXIT_OK, EXIT_CONFIG, EXIT_PRECONDITION = 0, 2, 3


def _threads(value: int) -> int:
    return (os.cpu_count() or 1) if value == 0 else max(1, value)


def cmd_run(args) -> int:
    config = load_config(args.config)
    out = args.out or config.output.directory
    result = compute(config, threads=_threads(args.threads))
    paths = write(result, out, config.output.formats)
    s = result.summary
    print(f"wrote {len(paths)} files to {out}")
    if s["nu0"] is not None:
        print(f"nu0 = {s['nu0']}, nu1 = {s['nu1']}, delta_nu = {s['delta_nu']}")
    print(f"critical momenta: {s['critical_momenta']}")
    print(f"first cusp: {s['first_cusp']}")
    return EXIT_OK


def _max_angle_step(z) -> float:
    z = np.concatenate([z, z[:1]])
    with np.errstate(all="ignore"):
        return float(np.nanmax(np.abs(np.angle(z[1:] / z[:-1]))))


def cmd_validate(args) -> int:
    config = load_config(args.config)
    scenario = config.scenario()
    k = scenario.k_grid.points()
    h0, h1 = scenario.h0_model(k), scenario.h1_model(k)
    problems = []
    for label, h in (("prequench", h0), ("postquench", h1)):
        bad = near_ep(h)
        if np.any(bad):
            ks = ", ".join(repr(float(x)) for x in k[bad])
            problems.append(f"warning: {label} model exceptional or gapless at k = {ks}")
    if problems:
        for line in problems:
            print(line)
        return EXIT_PRECONDITION
    for label, h in (("prequench", h0), ("postquench", h1)):
        for z in (h[0] - 1j * h[1], h[0] + 1j * h[1]):
            step = _max_angle_step(z)
            if step > np.pi / 4:
                print(f"warning: {label} flow turns {step:.3f} rad per grid step; consider more k points")
    print(f"ok, {excluded_momenta(scenario).size} excluded k points")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nhdqpt", description="Quench dynamics of two-band non-Hermitian lattices.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="compute all artifacts for a scenario")
    run.add_argument("config")
    run.add_argument("--out", default=None, help="output directory (overrides the config)")
    run.add_argument("--threads", type=int, default=1, help="worker threads, 0 = one per core")
    run.set_defaults(func=cmd_run)
    val = sub.add_parser("validate", help="check a scenario without computing")
    val.add_argument("config")
    val.add_argument("--out", default=None, help=argparse.SUPPRESS)
    val.add_argument("--threads", type=int, default=1, help=argparse.SUPPRESS)
    val.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PreconditionError as exc:
        print(f"precondition failed: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION


if __name__ == "__main__":
    sys.exit(main())
