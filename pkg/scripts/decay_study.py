"""Long-time decay of ||u(t)|| for small M-data: halving times, tail slope, monotonicity.

Each run at T = 2e4, n_x = 511 takes a few minutes on one core.
"""
import argparse
import json
from pathlib import Path

from kdvcrit import kdv
from kdvcrit.arithmetic import build_length


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--eps", type=float, nargs="+", default=[0.1, 0.05])
    ap.add_argument("--T", type=float, default=2.0e4)
    ap.add_argument("--nx", type=int, default=511)
    ap.add_argument("--profile", choices=["M", "orth"], default="M")
    ap.add_argument("--out", default="decay_out")
    args = ap.parse_args()
    length = build_length(1, 1)
    grid = kdv.SimGrid(length.L, args.nx)
    summaries = []
    for eps in args.eps:
        res = kdv.decay_experiment(length, grid, eps, args.T, profile=args.profile)
        s = res.summary()
        summaries.append(s)
        kdv.write_outputs(Path(args.out) / f"eps_{eps:g}", res.record, s)
        print(json.dumps(s))
    if len(summaries) >= 2:
        a, b = sorted(summaries, key=lambda s: s["epsilon"])[:2]
        print(f"T_half({a['epsilon']:g}) / T_half({b['epsilon']:g}) = {a['t_half'] / b['t_half']:.3f}")


if __name__ == "__main__":
    main()
