"""Replicate the ring-network product game for the four (T_con, alpha) variants."""

import argparse

import numpy as np

from dronesim.experiment import replicate


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/case2")
    ap.add_argument("--plots", action="store_true")
    ap.add_argument("--seed", type=int, default=None)
    args = ap.parse_args()
    results, claims = replicate(2, out_dir=args.out, plots=args.plots, seed=args.seed)
    for r in results:
        s = r.summary
        print(f"{r.name:>22}: steady {np.round(s['steady_profile'], 3)}, converged at {s['steps_to_converge']}, "
              f"{r.runtime:.1f} s")
    for name, ok, detail in claims:
        print(f"{'PASS' if ok else 'FAIL'} {name} ({detail})")


if __name__ == "__main__":
    main()
