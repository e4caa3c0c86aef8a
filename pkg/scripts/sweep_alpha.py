"""Sweep step size and gain on a config and tabulate ceilings and terminal Lyapunov values."""

import argparse

from dronesim.experiment import sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default="case1")
    ap.add_argument("--alphas", default="0.005,0.01,0.05,0.1,0.2")
    ap.add_argument("--mus", default="0.5")
    ap.add_argument("--horizon", type=int, default=2000)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="out/sweep")
    args = ap.parse_args()
    grid = {"algorithm.alpha": [float(a) for a in args.alphas.split(",")],
            "algorithm.mu": [float(m) for m in args.mus.split(",")],
            "run.horizon": [args.horizon]}
    header, rows = sweep(args.config, grid, args.out, args.workers)
    for r in rows:
        v = "-" if r["final_V"] is None else f"{r['final_V']:.4g}"
        print(f"alpha {r['algorithm.alpha']:<6g} mu {r['algorithm.mu']:<5g} V {v:<10} "
              f"ceiling {r['ceiling']:<10.4g} {r['status']}")


if __name__ == "__main__":
    main()
