"""Scan |s(k,l)| over 1 <= l < k <= kmax and print the minimizer."""
import argparse
import time

from kdvcrit.condition import sweep_s


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--kmax", type=int, default=2000)
    ap.add_argument("--out", default="sweep.csv")
    ap.add_argument("--threads", type=int, default=None)
    args = ap.parse_args()
    t0 = time.perf_counter()
    res = sweep_s(args.kmax, out=args.out, threads=args.threads)
    print(f"pairs scanned : {res.n_pairs}")
    print(f"min |s|       : {res.min_abs_s:.10e}")
    print(f"argmin (k, l) : {res.argmin}")
    print(f"wall time     : {time.perf_counter() - t0:.1f} s  (table in {args.out})")


if __name__ == "__main__":
    main()
