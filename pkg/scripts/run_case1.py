"""Replicate the six-agent tracking case for both step sizes and print the comparison."""

import argparse

from dronesim.experiment import replicate


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/case1")
    ap.add_argument("--plots", action="store_true")
    args = ap.parse_args()
    results, claims = replicate(1, out_dir=args.out, plots=args.plots)
    for r in results:
        s = r.summary
        print(f"{r.name:>18}: steady error {s['steady_ne_error']:.4f}, final error {s['final_ne_error']:.4f}, "
              f"enters 0.1-ball at {s['steps_to_ball']}, {r.runtime:.2f} s")
    for name, ok, detail in claims:
        print(f"{'PASS' if ok else 'FAIL'} {name} ({detail})")


if __name__ == "__main__":
    main()
