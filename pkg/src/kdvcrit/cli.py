"""Command-line entry point: kdvcrit <subcommand> [options].

Exit codes: 0 theorem applies / all green, 1 fails, 2 usage, 3 undecided.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import re
import sys
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import __version__
from .arithmetic import build_length, build_length_from_A, verify_lemma_double, verify_lemma_half

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_UNDECIDED = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _prep(obj):
    if isinstance(obj, dict):
        return {str(k): _prep(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_prep(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [_prep(float(obj.real)), _prep(float(obj.imag))]
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not math.isfinite(v):
            return None
        return f"@@{v:.17g}@@"
    if isinstance(obj, np.ndarray):
        return _prep(obj.tolist())
    return obj


def dumps17(obj, indent: int | None = 1) -> str:
    """JSON with every float written to 17 significant digits."""
    return re.sub(r'"@@(.*?)@@"', r"\1", json.dumps(_prep(obj), indent=indent))


def fmt17(v: float) -> str:
    return f"{float(v):.17g}"


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


@dataclass
class RunManifest:
    command_line: list[str]
    config_hash: str
    version: str
    wall_time: float = 0.0
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    exit_code: int = 0

    @classmethod
    def start(cls, argv: list[str], args: argparse.Namespace) -> "RunManifest":
        cfg = {k: v for k, v in sorted(vars(args).items())
               if k not in ("manifest", "threads", "func") and not callable(v)}
        digest = hashlib.sha256(json.dumps(cfg, sort_keys=True, default=str).encode()).hexdigest()
        return cls(["kdvcrit"] + list(argv), digest, __version__)

    def add_input(self, path) -> None:
        self.inputs[str(path)] = _sha256(Path(path))

    def add_output(self, path) -> None:
        self.outputs[str(path)] = _sha256(Path(path))

    def emit(self, path: Path | None) -> None:
        text = dumps17(asdict(self))
        if path is None:
            sys.stderr.write(json.dumps(json.loads(text)) + "\n")
        else:
            Path(path).parent.mkdir(parents=True, exist_ok=True)
            Path(path).write_text(text + "\n", encoding="utf-8", newline="\n")


def _pair(args) -> tuple[int, int]:
    k, l = args.k, args.l
    if k is None or l is None or k < 1 or l < 1 or l > k:
        raise UsageError("need integers k >= l >= 1")
    return k, l


# ---------------------------------------------------------------- subcommands

def cmd_lengths(args, man) -> int:
    if args.A is not None:
        if args.A < 1:
            raise UsageError("A must be a positive integer")
        length = build_length_from_A(args.A)
        if not length.pairs:
            print(dumps17({"A": args.A, "pairs": [], "n_L": 0, "dim_M": 0}))
            return EXIT_OK
    else:
        length = build_length(*_pair(args))
    rec = length.to_record()
    rec["p_set"] = list(length.p_set)
    print(dumps17(rec))
    return EXIT_OK


def cmd_check(args, man) -> int:
    from .condition import check_condition

    length = build_length(*_pair(args))
    rep = check_condition(length, tol=args.tol)
    print(f"verdict: {rep.verdict} (L = {fmt17(length.L)}, A = {length.A}, dim_M = {length.dim_M})")
    print("k,l,p,abs_s,status")
    for r in rep.rows:
        s = "" if r["abs_s"] is None else r["abs_s_text"]
        print(f"{r['k']},{r['l']},{fmt17(r['p'])},{s},{r['status']}")
    if args.json:
        print(dumps17(rep.to_record()))
    return rep.exit_code


def cmd_sweep(args, man) -> int:
    from .condition import sweep_s

    if args.kmax < 2:
        raise UsageError("--kmax must be >= 2")
    if args.checkpoint and Path(args.checkpoint).exists():
        man.add_input(args.checkpoint)
    res = sweep_s(args.kmax, out=args.out, threads=args.threads, checkpoint=args.checkpoint)
    print(f"min |s(k,l)| = {fmt17(res.min_abs_s)} at (k,l) = ({res.argmin[0]},{res.argmin[1]}) over {res.n_pairs} pairs")
    if args.out:
        man.add_output(args.out)
    return EXIT_OK


def cmd_aux(args, man) -> int:
    from .auxiliary import _build

    length = build_length(*_pair(args))
    m1, m2 = args.pair if args.pair else (0, 0)
    if not (0 <= m1 < length.n_L and 0 <= m2 < length.n_L):
        raise UsageError(f"pair indices must lie in [0, {length.n_L})")
    try:
        sol = _build(length, m1, m2, args.conjugate)
    except ValueError as exc:
        print(f"rejected: {exc}", file=sys.stderr)
        return EXIT_FAIL
    x = np.linspace(0.0, length.L, args.samples)
    f, df = sol(x), sol.dx(x)
    res = sol.residuals()
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("x,re_phi,im_phi,re_dphi,im_dphi\n")
        for row in zip(x, f.real, f.imag, df.real, df.imag):
            fh.write(",".join(fmt17(v) for v in row) + "\n")
    man.add_output(out)
    print(dumps17({"case": sol.case_tag, "z": sol.z, "residuals": res}))
    ok = res["boundary"] < 1e-9 and res["ode"] < 1e-8
    return EXIT_OK if ok else EXIT_FAIL


def cmd_trace(args, man) -> int:
    from .quasi import TraceSignal, find_nonvanishing, g_eval, window_norm

    man.add_input(args.config)
    sig = TraceSignal.from_json(Path(args.config).read_text(encoding="utf-8"))
    bad = sig.violations()
    if args.tau <= 0:
        raise UsageError("--tau must be positive")
    t = np.linspace(0.0, 2 * args.tau, args.samples)
    g = g_eval(sig, t)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("t,re_g,im_g\n")
        for row in zip(t, g.real, g.imag):
            fh.write(",".join(fmt17(v) for v in row) + "\n")
    man.add_output(out)
    wn = window_norm(sig, args.tau, args.quad_points)
    tmax, gmax = find_nonvanishing(sig, 2 * args.tau)
    print(dumps17({"window_norm": wn, "tau": args.tau, "argmax_t": tmax, "max_abs_g": gmax,
                   "admissibility_violations": bad}))
    return EXIT_OK if wn > 0 and not bad else EXIT_FAIL


def cmd_simulate(args, man) -> int:
    from . import kdv

    length = build_length(*_pair(args))
    grid = kdv.SimGrid(length.L, args.nx, args.dt)
    eps = kdv.default_epsilon(length.L) if args.eps is None else args.eps
    out = Path(args.out)
    fit: dict = {"mode": args.mode, "epsilon": eps, "T": args.T, "grid": grid.bookkeeping()}
    rec = None
    if args.mode in ("linear", "nonlinear"):
        u0 = eps * kdv.m_profile(length, grid)
        rec = kdv.run(grid, u0, args.T, args.mode, record_every=args.record_every)
        fit.update(energy_residual_rate=rec.energy_residual_rate(), max_norm_increase=rec.max_norm_increase,
                   tail_slope=kdv.tail_slope(rec.t, rec.norm) if args.T > 2 else None)
    elif args.mode == "forced":
        alpha = np.zeros(length.n_L, dtype=complex)
        alpha[0] = -1j if length.pairs[0].p == 0 else 1.0
        fit["w_consistency_error"] = kdv.forced_vs_w(length, grid, alpha, args.T)
        fit["w_local_residual"] = kdv.w_residual(length, grid, alpha)
    elif args.mode == "power-series":
        eps_list = [eps, eps / 2, eps / 4, eps / 8]
        fit.update(kdv.power_series_errors(length, grid, eps_list, args.T))
    elif args.mode == "decay":
        r = kdv.decay_experiment(length, grid, eps, args.T, record_every=args.record_every or 1.0)
        rec = r.record
        fit.update(r.summary())
    elif args.mode == "lower-bound":
        r = kdv.lower_bound_experiment(length, grid, eps, args.T, profile=args.profile,
                                       record_every=args.record_every or 1.0)
        rec = r.pop("record")
        fit.update(r)
    if rec is None:
        out.mkdir(parents=True, exist_ok=True)
        p = out / "fit.json"
        p.write_text(dumps17(fit) + "\n", encoding="utf-8", newline="\n")
        paths = [p]
    else:
        paths = kdv.write_outputs(out, rec, {})
        paths[-1].write_text(dumps17(fit) + "\n", encoding="utf-8", newline="\n")
    for p in paths:
        man.add_output(p)
    print(dumps17(fit))
    return EXIT_OK


# ---------------------------------------------------------------- verify

def _verify_checks(full: bool) -> list[tuple[str, bool, str]]:
    from .auxiliary import _build, d_value, e_value, sample_configurations
    from .arithmetic import b_value, norm_form
    from .condition import check_condition, s_from_sigma, sigma_batch
    from . import kdv

    out = []

    def add(name, ok, info=""):
        out.append((name, bool(ok), info))

    bound = 5000 if full else 300
    ok, cx = verify_lemma_half(bound)
    add(f"lemma_half({bound})", ok, str(cx))
    ok, cx = verify_lemma_double(20000)
    add("lemma_double(20000)", ok, str(cx))

    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100 if full else 20):
        l = int(rng.integers(1, 500))
        k = int(rng.integers(l + 1, l + 500))
        es, ec = e_value(k, l)
        worst = max(worst, abs(es - ec) / abs(ec))
        length = build_length(k, l)
        m = length.index_of(k, l)
        worst = max(worst, abs(d_value(length, m, m) - ec**2 / 3) / (ec**2 / 3))
    add("E identity and D = E^2/3", worst < 1e-12, f"max rel {worst:.3e}")

    # tolerance scales with the cancellation in s: sum |sigma_j|^2 / |s| times long-double eps
    worst = 0.0
    for k, l in ((2, 1), (3, 1), (5, 3), (736, 611), (1000, 999)):
        sig = sigma_batch(np.array([norm_form(k, l)]), np.array([b_value(k, l)]))
        base = abs(s_from_sigma(sig, k, l)[0])
        kappa = float(np.sum(np.abs(sig) ** 2) / base)
        tol = 1e3 * float(np.finfo(np.longdouble).eps) * max(kappa, 1.0)
        for perm in ((1, 2, 0), (2, 0, 1), (1, 0, 2), (0, 2, 1), (2, 1, 0)):
            v = abs(s_from_sigma(sig[:, perm], k, l)[0])
            worst = max(worst, float(abs(v - base) / base) / tol)
    add("|s| permutation invariance", worst < 1.0, f"max error/tolerance {worst:.3e}")

    rep = check_condition(build_length(736, 611))
    add("check (736,611) holds", rep.exit_code == 0, rep.verdict)

    bmax = omax = 0.0
    for length, m1, m2, conj in sample_configurations(50 if full else 20):
        r = _build(length, m1, m2, conj).residuals()
        bmax, omax = max(bmax, r["boundary"]), max(omax, r["ode"])
    add("auxiliary residuals", bmax < 1e-9 and omax < 1e-8, f"boundary {bmax:.3e} ode {omax:.3e}")

    L1 = build_length(1, 1)
    grid = kdv.SimGrid(L1.L, 511 if full else 255)
    rec = kdv.run(grid, 0.05 * kdv.m_profile(L1, grid), 50.0 if full else 5.0, "nonlinear", record_every=1.0)
    rate = rec.energy_residual_rate()
    add("energy identity", rate < 1e-6, f"rate {rate:.3e}")
    return out


def cmd_verify(args, man) -> int:
    checks = _verify_checks(args.full)
    bad = 0
    for name, ok, info in checks:
        print(f"{'PASS' if ok else 'FAIL'}  {name}  {info}")
        bad += not ok
    print(f"{len(checks) - bad}/{len(checks)} checks passed")
    return EXIT_OK if bad == 0 else EXIT_FAIL


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kdvcrit", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"kdvcrit {__version__}")
    ap.add_argument("--threads", type=int, default=None, help="worker pool size (KDVCRIT_THREADS overrides)")
    ap.add_argument("--manifest", type=Path, default=None, help="where to write the run manifest")
    sub = ap.add_subparsers(dest="command", required=True)

    def kl(p, required=True):
        p.add_argument("--k", type=int, required=required)
        p.add_argument("--l", type=int, required=required)

    p = sub.add_parser("lengths", help="critical length record as JSON")
    kl(p, required=False)
    p.add_argument("--A", type=int)
    p.set_defaults(func=cmd_lengths)

    p = sub.add_parser("check", help="decide the nondegeneracy condition")
    kl(p)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("sweep", help="min |s(k,l)| over 1 <= l < k <= kmax")
    p.add_argument("--kmax", type=int, required=True)
    p.add_argument("--out", type=str)
    p.add_argument("--checkpoint", type=str)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("aux", help="sample an auxiliary function")
    kl(p)
    p.add_argument("--pair", type=int, nargs=2)
    p.add_argument("--conjugate", action="store_true")
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--out", type=str, required=True)
    p.set_defaults(func=cmd_aux)

    p = sub.add_parser("trace", help="evaluate g(t) and its window norm")
    p.add_argument("--config", type=str, required=True)
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--out", type=str, required=True)
    p.add_argument("--samples", type=int, default=2001)
    p.add_argument("--quad-points", type=int, default=64)
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("simulate", help="finite-difference KdV runs")
    kl(p)
    p.add_argument("--eps", type=float)
    p.add_argument("--T", type=float, default=20.0)
    p.add_argument("--nx", type=int, default=511)
    p.add_argument("--dt", type=float)
    p.add_argument("--mode", choices=["linear", "nonlinear", "forced", "power-series", "decay", "lower-bound"],
                   default="nonlinear")
    p.add_argument("--profile", choices=["phi", "psi"], default="psi")
    p.add_argument("--record-every", type=float, default=0.0)
    p.add_argument("--out", type=str, required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="invariant suite")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--quick", action="store_true")
    g.add_argument("--full", action="store_true")
    p.set_defaults(func=cmd_verify)
    return ap


def _manifest_path(args) -> Path | None:
    if args.manifest is not None:
        return args.manifest
    out = getattr(args, "out", None)
    if not out:
        return None
    if args.command == "simulate":
        return Path(out) / "manifest.json"
    return Path(str(out) + ".manifest.json")


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command == "sweep" and args.threads is not None and args.threads < 1:
        ap.print_usage(sys.stderr)
        return EXIT_USAGE
    man = RunManifest.start(argv, args)
    t0 = time.perf_counter()
    try:
        code = args.func(args, man)
    except UsageError as exc:
        print(f"kdvcrit {args.command}: error: {exc}", file=sys.stderr)
        code = EXIT_USAGE
    man.wall_time = time.perf_counter() - t0
    man.exit_code = code
    man.emit(_manifest_path(args))
    return code


if __name__ == "__main__":
    sys.exit(main())
