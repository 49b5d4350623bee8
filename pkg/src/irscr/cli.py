"""Command-line entry points.

Exit codes: 0 success, 2 configuration error, 3 hard-assertion failure
(a produced solution failed its certificate, or a validated file failed).
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .errors import ConfigError, IrscrError
from .harness import (
    certify_solution,
    emit_results,
    load_config,
    load_solution_file,
    run_experiment,
)


def _add_common(p):
    p.add_argument("config", help="experiment config JSON")
    p.add_argument("--seed", type=int, default=None, help="override master seed")
    p.add_argument("--out-dir", default=None, help="override output directory")
    p.add_argument("--workers", type=int, default=None, help="worker process count")
    p.add_argument("--mc-samples", type=int, default=None,
                   help="Monte Carlo samples per certificate")


def _load(args):
    from dataclasses import replace

    cfg = load_config(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out_dir is not None:
        overrides["output_dir"] = args.out_dir
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.mc_samples is not None:
        overrides["mc_samples"] = args.mc_samples
    return replace(cfg, **overrides) if overrides else cfg


def _execute(cfg, feasibility_only=False):
    result = run_experiment(cfg, feasibility_only=feasibility_only)
    written = emit_results(result, cfg.output_dir)
    for path in written:
        print(f"wrote {path}")
    failures = result.summary["cert_failures"]
    rates = {}
    for key, schemes in result.summary["points"].items():
        for scheme, cell in schemes.items():
            rates[f"{key}:{scheme}"] = cell["feasibility_rate"]
    for name, rate in rates.items():
        print(f"feasibility {name} = {rate:.3f}")
    if failures:
        print(f"HARD FAILURE: {failures} solution(s) failed certificates", file=sys.stderr)
        return 3
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="irscr",
        description="Robust precoding and surface-phase optimization simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, hlp in (("run", "run schemes over the configured sweep"),
                      ("sweep", "alias of run; always emits plot data and figures"),
                      ("feasibility", "run feasibility checking only")):
        p = sub.add_parser(name, help=hlp)
        _add_common(p)

    pv = sub.add_parser("validate", help="re-certify a saved solution file")
    pv.add_argument("solution", help="solution JSON file")
    pv.add_argument("--mc-samples", type=int, default=10000)
    pv.add_argument("--seed", type=int, default=0)

    args = parser.parse_args(argv)
    try:
        if args.command == "validate":
            return _validate(args)
        cfg = _load(args)
        if args.command == "sweep":
            from dataclasses import replace

            cfg = replace(cfg, figures=True)
        return _execute(cfg, feasibility_only=args.command == "feasibility")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except IrscrError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


def _validate(args) -> int:
    scenario, model, W, phi, scheme = load_solution_file(args.solution)
    rng = np.random.default_rng(np.random.SeedSequence([args.seed, 9]))
    cert = certify_solution(scenario, model, W, phi, args.mc_samples, rng)
    power_dbm = 10.0 * np.log10(max(np.linalg.norm(W, "fro") ** 2, 1e-300) * 1000.0)
    print(f"scheme          : {scheme}")
    print(f"power           : {power_dbm:.3f} dBm")
    print(f"min rate margin : {np.min(cert['sinr_margins']):.3e}")
    if cert["mc_outage"] is not None:
        print(f"mc outage       : {cert['mc_outage']:.4f}")
    if cert["wc_margin"] is not None:
        print(f"worst-case slack: {cert['wc_margin']:.3e}")
    print(f"verdict         : {'PASS' if cert['pass'] else 'FAIL'}")
    return 0 if cert["pass"] else 3


if __name__ == "__main__":
    sys.exit(main())
