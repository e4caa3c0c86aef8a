"""Command-line entry point: run, replicate, sweep and validate."""

import argparse
import sys

from .config import load_config
from .errors import DronesimError
from .experiment import (build_game, build_params, build_samples, parse_grid, replicate,
                         run_experiment, sweep)
from .isbrag import validate_params

EXIT_OK, EXIT_INVARIANT, EXIT_CONFIG = 0, 1, 2


def _print_summary(res):
    s = res.summary
    print(f"{res.name}: final V {s['final_V']:.6g}, ceiling {s['ceiling']:.6g}, "
          f"eta residual {s['eta_residual_final']:.3g}, {res.runtime:.2f} s")
    for k, ok in res.invariants.items():
        print(f"  {'ok  ' if ok else 'FAIL'} {k}")


def cmd_run(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.run.seed = args.seed
    res = run_experiment(cfg, args.out, args.plots)
    _print_summary(res)
    return EXIT_OK if res.passed else EXIT_INVARIANT


def cmd_replicate(args):
    results, claims = replicate(args.case, out_dir=args.out, plots=args.plots, seed=args.seed)
    for r in results:
        _print_summary(r)
    for name, ok, detail in claims:
        print(f"{'PASS' if ok else 'FAIL'} {name} ({detail})")
    return EXIT_OK if all(r.passed for r in results) else EXIT_INVARIANT


def cmd_sweep(args):
    header, rows = sweep(args.config, parse_grid(args.grid), args.out, args.workers)
    print(",".join(header))
    for r in rows:
        print(",".join("" if r.get(h) is None else str(r.get(h)) for h in header))
    return EXIT_OK if all(r["status"] in ("ok",) or r["status"].startswith("invalid") for r in rows) \
        else EXIT_INVARIANT


def cmd_validate(args):
    cfg = load_config(args.config)
    samples, _, xboxes = build_samples(cfg)
    game = build_game(cfg, xboxes)
    rep = validate_params(build_params(cfg, game), game.diameters)
    if rep.ok:
        print(f"{cfg.run.name}: configuration valid")
        return EXIT_OK
    print(f"{cfg.run.name}: {rep.summary()}")
    return EXIT_CONFIG


def build_parser():
    ap = argparse.ArgumentParser(prog="dronesim", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one configured experiment")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--plots", action="store_true")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("replicate", help="run the built-in simulation cases")
    p.add_argument("case", type=int, choices=(1, 2))
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--plots", action="store_true")
    p.set_defaults(func=cmd_replicate)

    p = sub.add_parser("sweep", help="run a parameter grid")
    p.add_argument("--config", required=True)
    p.add_argument("--grid", required=True, help='e.g. "algorithm.alpha=0.01,0.1;algorithm.mu=0.5"')
    p.add_argument("--out", default=None)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("validate", help="check a config and its parameters without running")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_validate)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DronesimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
