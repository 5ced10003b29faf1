"""Trace error of the two-term expansion eps u1 + eps^2 u2 against the nonlinear run, vs eps."""
import argparse

from kdvcrit import kdv
from kdvcrit.arithmetic import build_length


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--k", type=int, default=1)
    ap.add_argument("--l", type=int, default=1)
    ap.add_argument("--T", type=float, default=20.0)
    ap.add_argument("--nx", type=int, default=511)
    ap.add_argument("--eps", type=float, nargs="+", default=[0.02, 0.01, 0.005, 0.0025])
    args = ap.parse_args()
    length = build_length(args.k, args.l)
    r = kdv.power_series_errors(length, kdv.SimGrid(length.L, args.nx), args.eps, args.T)
    for e, err in zip(r["eps"], r["error"]):
        print(f"eps = {e:<8g} trace error = {err:.6e}")
    print(f"fitted exponent {r['slope']:.4f} (expected 3), successive ratios {r['ratios']}")


if __name__ == "__main__":
    main()
