"""Command line: ``skewmc run | verify | c0``.

Exit codes: 0 success, 1 failed check or sampler failure, 2 usage or
configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import List, Optional

from .config import ConfigError, build_run, load_config
from .diagnostics import diagnose
from .samplers import ChainError, run_chains
from .traceio import write_trace
from .transforms import compute_c0, max_step_size
from .verify import ChainFileError, load_finite_chain
from .verify.suites import SUITES, run_suite

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _err(msg: str) -> None:
    print(f"skewmc: error: {msg}", file=sys.stderr)


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config).with_overrides(args.seed, args.chains, args.workers,
                                                      args.out)
        built = build_run(cfg)
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_USAGE
    for line in built.info:
        print(line)
    print(f"sampler {cfg.sampler.kind}: n_steps={cfg.sampler.n_steps} seed={cfg.sampler.seed} "
          f"chains={cfg.chains} workers={cfg.workers}")
    try:
        traces = run_chains(cfg.sampler, built.target, built.phi, built.transform, cfg.chains,
                            cfg.workers, g_minus=built.g_minus)
    except ChainError as exc:
        _err(str(exc))
        return EXIT_FAIL
    except (TypeError, ValueError) as exc:
        _err(f"cannot build sampler: {exc}")
        return EXIT_USAGE
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    reports = []
    for i, tr in enumerate(traces):
        write_trace(tr, out / f"{cfg.prefix}_{i}.csv")
        rep = diagnose(tr) if tr.n_steps >= 10 else None
        reports.append(None if rep is None else rep.to_dict())
    summary = {
        "config": cfg.source,
        "kind": cfg.sampler.kind,
        "seed": cfg.sampler.seed,
        "chains": cfg.chains,
        "log": built.info,
        "target_mean": None if built.target.mean is None else [float(v) for v in built.target.mean],
        "reports": reports,
    }
    (out / "diagnostics.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    for i, rep in enumerate(reports):
        if rep is not None:
            mean = ", ".join(f"{v:.4f}" for v in rep["mean"])
            ess = ", ".join(f"{v:.0f}" for v in rep["ess"])
            print(f"chain {i}: acceptance={rep['acceptance_rate']:.3f} "
                  f"flip_rate={rep['direction_flip_rate']:.3f} mean=[{mean}] ess=[{ess}]")
    print(f"wrote {len(traces)} trace file(s) and diagnostics.json to {out}")
    return EXIT_OK


def cmd_verify(args) -> int:
    chain = None
    if args.chain is not None:
        if args.suite not in ("finite", "all"):
            _err("--chain applies only to the finite suite")
            return EXIT_USAGE
        try:
            chain = load_finite_chain(args.chain)
        except ChainFileError as exc:
            _err(f"{args.chain}: {exc}")
            return EXIT_USAGE
    rep = run_suite(args.suite, chain=chain, seed=args.seed, n_chains=args.ks_chains)
    for line in rep.lines():
        print(line)
    n_fail = len(rep.failures)
    print(f"{args.suite}: {len(rep.checks)} checks, {n_fail} failed")
    if args.report:
        Path(args.report).parent.mkdir(parents=True, exist_ok=True)
        Path(args.report).write_text(json.dumps(rep.to_dict(), indent=2) + "\n", encoding="utf-8")
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_c0(args) -> int:
    if (args.L is None) != (args.m is None):
        _err("--L and --m must be given together")
        return EXIT_USAGE
    if args.L is not None and (args.L < 0 or args.m < 1):
        _err("need L >= 0 and m >= 1")
        return EXIT_USAGE
    print(f"c0 = {compute_c0():.10f}")
    if args.L is not None:
        print(f"h_max = {max_step_size(args.L, args.m):.10g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="skewmc", description=(
        "Skew-reversible MCMC samplers: run chains, verify invariants, compute step bounds."))
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the sampler described by a TOML config")
    run.add_argument("--config", required=True, help="path to the TOML run config")
    run.add_argument("--seed", type=_u64, help="override sampler.seed")
    run.add_argument("--chains", type=_positive, help="override run.chains")
    run.add_argument("--workers", type=_positive, help="override run.workers")
    run.add_argument("--out", help="override output.dir")
    run.set_defaults(func=cmd_run)

    ver = sub.add_parser("verify", help="run a verification suite")
    ver.add_argument("suite", choices=SUITES)
    ver.add_argument("--chain", help="finite-chain TOML file for the finite suite")
    ver.add_argument("--seed", type=_u64, help="override the suites' fixed default seeds")
    ver.add_argument("--ks-chains", type=_positive, default=10_000,
                     help="ensemble size for the stationarity suite")
    ver.add_argument("--report", help="write the JSON report here")
    ver.set_defaults(func=cmd_verify)

    c0 = sub.add_parser("c0", help="print c0 and the certified step bound")
    c0.add_argument("--L", type=float, help="Lipschitz constant of the drift maps")
    c0.add_argument("--m", type=int, help="number of leapfrog steps")
    c0.set_defaults(func=cmd_c0)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
