"""min over t >= 1 of ||u(t)|| t / ln(t + 2) for data eps u1(0) + eps^2 W(0)."""
import argparse

from kdvcrit import kdv
from kdvcrit.arithmetic import build_length


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--k", type=int, default=2)
    ap.add_argument("--l", type=int, default=1)
    ap.add_argument("--eps", type=float, nargs="+", default=[0.02, 0.01])
    ap.add_argument("--T", type=float, default=200.0)
    ap.add_argument("--nx", type=int, default=511)
    ap.add_argument("--profile", choices=["psi", "phi"], default="psi")
    args = ap.parse_args()
    length = build_length(args.k, args.l)
    grid = kdv.SimGrid(length.L, args.nx)
    for eps in args.eps:
        r = kdv.lower_bound_experiment(length, grid, eps, args.T, profile=args.profile)
        print(f"eps = {eps:g}: floor {r['floor']:.4e} at t = {r['t_at_floor']:.2f}, tail slope {r['tail_slope']:.3f}")


if __name__ == "__main__":
    main()
