"""Cubic roots, the quantity s(k, l), the Q matrices and the s-sweep.

s(k, l) is evaluated in extended precision (numpy longdouble).  Near the
minimum of the sweep the individual terms are ~1e7 while the sum is ~1e-5,
so double precision leaves only two or three correct digits.
"""
from __future__ import annotations

import math
import os
import shutil
from dataclasses import dataclass, field
from multiprocessing import get_context
from typing import Iterable, Sequence

import numpy as np

from .arithmetic import (
    P_DEGENERATE,
    CriticalLength,
    b_value,
    norm_form,
)

S_NONZERO_TOL = 1e-9
S_UNDECIDED_FLOOR = 1e-12
CSV_HEADER = "k,l,A,p,re_s,im_s,abs_s"
CHUNK_PAIRS = 100_000

LD = np.longdouble
CLD = np.clongdouble


# ---------------------------------------------------------------- cubics

@dataclass(frozen=True)
class CubicRoots:
    roots: tuple[complex, complex, complex]
    discriminant_degenerate: bool


def _canonical_order(r: Sequence[complex], scale: float) -> list[complex]:
    # Quantize before sorting so that rounding noise does not flip ties.
    q = max(scale, 1e-300) * 1e-9
    return sorted(r, key=lambda z: (-round(z.real / q), -round(z.imag / q)))


def _cardano(c2: complex, c1: complex, c0: complex) -> list[complex]:
    shift = c2 / 3.0
    p = c1 - c2 * c2 / 3.0
    q = 2.0 * c2 ** 3 / 27.0 - c2 * c1 / 3.0 + c0
    if p == 0:
        u = (-q + 0j) ** (1.0 / 3.0)
        ys = [u * w for w in (1.0, complex(-0.5, math.sqrt(3) / 2), complex(-0.5, -math.sqrt(3) / 2))]
        return [y - shift for y in ys]
    d = np.sqrt(complex(q * q / 4.0 + p ** 3 / 27.0))
    a, b = -q / 2.0 + d, -q / 2.0 - d
    u3 = a if abs(a) >= abs(b) else b
    u = complex(u3) ** (1.0 / 3.0)
    if u == 0:
        # p, q underflowed (subnormal coefficients): fall back to the companion matrix
        r = [complex(v) for v in np.roots([1.0, c2, c1, c0])]
        return r + [0j] * (3 - len(r))
    out = []
    for w in (1.0, complex(-0.5, math.sqrt(3) / 2), complex(-0.5, -math.sqrt(3) / 2)):
        uw = u * w
        out.append(uw - p / (3.0 * uw) - shift)
    return out


def cubic_roots(c2: complex, c1: complex, c0: complex) -> CubicRoots:
    """Roots of x^3 + c2 x^2 + c1 x + c0, polished by one Newton step."""
    c2, c1, c0 = complex(c2), complex(c1), complex(c0)
    roots = _cardano(c2, c1, c0)
    scale = max(1.0, abs(c2), abs(c1) ** 0.5, abs(c0) ** (1 / 3))
    gap = min(abs(roots[i] - roots[j]) for i in range(3) for j in range(i + 1, 3))
    degenerate = gap < 1e-6 * scale
    polished = []
    for x in roots:
        f = ((x + c2) * x + c1) * x + c0
        df = (3 * x + 2 * c2) * x + c1
        # Newton is useless (and unstable) on a double root.
        if not degenerate and df != 0:
            x = x - f / df
        polished.append(x)
    if degenerate:
        # a repeated root is only resolved to sqrt(eps); report it as exactly repeated
        i, j = min(((i, j) for i in range(3) for j in range(i + 1, 3)),
                   key=lambda ij: abs(polished[ij[0]] - polished[ij[1]]))
        m = 0.5 * (polished[i] + polished[j])
        polished[i] = polished[j] = m
    return CubicRoots(tuple(_canonical_order(polished, scale)), degenerate)


def lambda_roots(z: complex) -> CubicRoots:
    """Roots of lambda^3 + lambda - i z = 0."""
    return cubic_roots(0.0, 1.0, -1j * z)


# ---------------------------------------------------------------- sigma, s

def _omega(k: np.ndarray, l: np.ndarray) -> np.ndarray:
    """exp(4 pi i (k-l)/3) computed exactly from (k - l) mod 3."""
    r = np.mod(np.asarray(k) - np.asarray(l), 3)
    h = np.sqrt(LD(3)) / 2
    re = np.where(r == 0, LD(1), LD(-0.5)).astype(LD)
    im = np.select([r == 1, r == 2], [-h, h], LD(0)).astype(LD)
    return re + 1j * im.astype(CLD)


def sigma_batch(A: np.ndarray, B: np.ndarray, newton: int = 2) -> np.ndarray:
    """Roots of sigma^3 - 3 A sigma + 2 B for arrays A, B; shape (n, 3), clongdouble."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    p = -3.0 * A
    q = 2.0 * B
    d = np.sqrt((q * q / 4.0 + p ** 3 / 27.0).astype(np.complex128))
    a = -q / 2.0 + d
    b = -q / 2.0 - d
    u3 = np.where(np.abs(a) >= np.abs(b), a, b)
    u = np.power(u3, 1.0 / 3.0)
    w = np.array([1.0, complex(-0.5, math.sqrt(3) / 2), complex(-0.5, -math.sqrt(3) / 2)])
    uw = u[:, None] * w[None, :]
    r = (uw - p[:, None] / (3.0 * uw)).astype(CLD)
    A3 = (3 * np.asarray(A, dtype=LD))[:, None]
    B2 = (2 * np.asarray(B, dtype=LD))[:, None]
    for _ in range(newton):
        f = (r * r - A3) * r + B2
        r = r - f / (3 * r * r - A3)
    return r


def s_from_sigma(sig: np.ndarray, k, l) -> np.ndarray:
    """sum_j sigma_j (sigma_{j+2} - sigma_{j+1}) (w e^{2 pi i sigma_j/3} + e^{-2 pi i sigma_j/3}).

    sig has shape (n, 3); w = exp(4 pi i (k-l)/3).
    """
    sig = np.asarray(sig, dtype=CLD)
    if sig.ndim == 1:
        sig = sig[None, :]
    w = _omega(np.atleast_1d(k), np.atleast_1d(l))
    # numpy has no longdouble pi constant; 4 atan(1) is exact to working precision
    ph = (8 * np.arctan(LD(1)) / 3) * 1j * sig
    fac = w[:, None] * np.exp(ph) + np.exp(-ph)
    s = np.zeros(sig.shape[0], dtype=CLD)
    for j in range(3):
        s += sig[:, j] * (sig[:, (j + 2) % 3] - sig[:, (j + 1) % 3]) * fac[:, j]
    return s


@dataclass(frozen=True)
class SigmaTriple:
    k: int
    l: int
    sigma: tuple[complex, complex, complex]
    s: complex | None = None


def _check_kl(k: int, l: int) -> None:
    if not (k >= l >= 1):
        raise ValueError(f"need k >= l >= 1, got ({k}, {l})")
    if k == l:
        raise ValueError("s is only defined for p != 0, i.e. k != l")


def sigma_roots(k: int, l: int) -> SigmaTriple:
    _check_kl(k, l)
    A, B = norm_form(k, l), b_value(k, l)
    r = sigma_batch(np.array([A]), np.array([B]))[0]
    scale = 2 * math.sqrt(A)
    order = _canonical_order([complex(z) for z in r], scale)
    return SigmaTriple(k, l, tuple(order))


def s_value_ld(k: int, l: int) -> np.clongdouble:
    _check_kl(k, l)
    A, B = norm_form(k, l), b_value(k, l)
    r = sigma_batch(np.array([A]), np.array([B]))
    return s_from_sigma(r, k, l)[0]


def s_value(k: int, l: int) -> complex:
    return complex(s_value_ld(k, l))


# ---------------------------------------------------------------- condition

@dataclass
class ConditionReport:
    verdict: str
    exit_code: int
    rows: list[dict] = field(default_factory=list)
    offending: tuple[int, int] | None = None

    def to_record(self) -> dict:
        return {"verdict": self.verdict, "exit_code": self.exit_code,
                "offending": self.offending, "pairs": self.rows}


def check_condition(length: CriticalLength, tol: float = S_NONZERO_TOL,
                    floor: float = S_UNDECIDED_FLOOR) -> ConditionReport:
    """Decide whether dim M = 1 or every pair has p != 0 and s != 0."""
    rows = []
    status = []
    for pr in length.pairs:
        row = {"k": pr.k, "l": pr.l, "p": pr.p}
        if pr.p == 0:
            row.update(abs_s=None, status="p=0")
            status.append("p=0")
        else:
            a_ld = abs(s_value_ld(pr.k, pr.l))
            with np.errstate(over="ignore"):
                a = float(a_ld)
            row["abs_s"] = a
            row["abs_s_text"] = _sci_ld(np.array([a_ld]))[0]
            st = "nonzero" if a > tol else ("undecided" if a >= floor else "zero")
            row["status"] = st
            status.append(st)
        rows.append(row)
    if length.dim_M == 1:
        return ConditionReport("dim M = 1", 0, rows)
    for pr, st in zip(length.pairs, status):
        if st in ("p=0", "zero"):
            return ConditionReport("condition fails", 1, rows, (pr.k, pr.l))
    for pr, st in zip(length.pairs, status):
        if st == "undecided":
            return ConditionReport("undecided", 3, rows, (pr.k, pr.l))
    return ConditionReport("condition holds", 0, rows)


# ---------------------------------------------------------------- sweep

@dataclass
class SweepResult:
    min_abs_s: float
    argmin: tuple[int, int]
    n_pairs: int
    table: dict | None = None


def _k_chunks(k_lo: int, k_max: int, target: int = CHUNK_PAIRS) -> list[tuple[int, int]]:
    chunks, start, count = [], k_lo, 0
    for k in range(k_lo, k_max + 1):
        count += k - 1
        if count >= target:
            chunks.append((start, k))
            start, count = k + 1, 0
    if start <= k_max:
        chunks.append((start, k_max))
    return chunks


def _sweep_chunk(bounds: tuple[int, int]):
    k0, k1 = bounds
    ks = np.concatenate([np.full(k - 1, k, dtype=np.int64) for k in range(k0, k1 + 1)])
    ls = np.concatenate([np.arange(1, k, dtype=np.int64) for k in range(k0, k1 + 1)])
    A = ks * ks + ks * ls + ls * ls
    B = (2 * ks + ls) * (2 * ls + ks) * (ks - ls)
    with np.errstate(over="ignore", invalid="ignore"):
        s = s_from_sigma(sigma_batch(A, B), ks, ls)
        a = np.abs(s)
    p = B / (3.0 * np.sqrt(3.0) * A.astype(np.float64) ** 1.5)
    return ks, ls, A, p, s.real, s.imag, a


def _sci_ld(x: np.ndarray) -> list[str]:
    """17-significant-digit scientific strings for longdouble values beyond the double range."""
    x = np.asarray(x, dtype=LD)
    ax = np.abs(x)
    nz = ax > 0
    e = np.zeros(x.shape, dtype=np.int64)
    with np.errstate(divide="ignore"):
        e[nz] = np.floor(np.log10(ax[nz])).astype(np.int64)
    m = np.where(nz, x / np.power(LD(10), e.astype(LD)), LD(0))
    m64 = np.round(m.astype(np.float64), 16)
    fix = np.abs(m64) >= 10.0
    m64[fix] /= 10.0
    e[fix] += 1
    fix = nz & (np.abs(m64) < 1.0)
    m64[fix] *= 10.0
    e[fix] -= 1
    return ["%.16fe%+03d" % (a, b) for a, b in zip(m64.tolist(), e.tolist())]


def _format_rows(ks, ls, A, p, re, im, ab) -> str:
    # |s| grows like exp(2 pi |Im sigma| / 3) and exceeds the double range for
    # many pairs with complex sigma; those rows are printed from longdouble.
    with np.errstate(over="ignore"):
        re64, im64, ab64 = re.astype(np.float64), im.astype(np.float64), ab.astype(np.float64)
    fmt = "%d,%d,%d,%.16e,%.16e,%.16e,%.16e\n"
    lines = [fmt % row for row in zip(ks.tolist(), ls.tolist(), A.tolist(), p.tolist(),
                                      re64.tolist(), im64.tolist(), ab64.tolist())]
    wide = np.flatnonzero(~(np.isfinite(re64) & np.isfinite(im64) & np.isfinite(ab64)))
    if wide.size:
        sre, sim, sab = _sci_ld(re[wide]), _sci_ld(im[wide]), _sci_ld(ab[wide])
        for n, i in enumerate(wide.tolist()):
            lines[i] = "%d,%d,%d,%.16e,%s,%s,%s\n" % (
                ks[i], ls[i], A[i], p[i], sre[n], sim[n], sab[n])
    return "".join(lines)


def _chunk_min(ks, ls, ab) -> tuple[float, int, int]:
    # NaN never wins; strict < with lexicographic tie-break on (k, l).
    with np.errstate(over="ignore"):
        ab = ab.astype(np.float64)
    ab = np.where(np.isnan(ab), np.inf, ab)
    m = ab.min()
    idx = np.flatnonzero(ab == m)
    best = min(idx, key=lambda i: (ks[i], ls[i]))
    return float(m), int(ks[best]), int(ls[best])


def _read_checkpoint(path: str) -> tuple[int, tuple[float, int, int] | None, int]:
    """Return (last fully written k, running min, pair count); trims a torn tail."""
    if not os.path.exists(path):
        return 1, None, 0
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError(f"{path}: not a sweep checkpoint")
    body = [ln for ln in lines[1:] if ln]
    if lines[-1] != "" and body:
        body = body[:-1]  # last line was not newline-terminated
    counts: dict[int, int] = {}
    for ln in body:
        k = int(ln.split(",", 1)[0])
        counts[k] = counts.get(k, 0) + 1
    complete = [k for k, c in counts.items() if c == k - 1]
    last = 1
    for k in sorted(counts):
        if k in complete and k == last + 1:
            last = k
        else:
            break
    keep = [ln for ln in body if int(ln.split(",", 1)[0]) <= last]
    best = None
    for ln in keep:
        f = ln.split(",")
        cand = (float(f[6]), int(f[0]), int(f[1]))
        if cand[0] != cand[0]:
            continue
        if best is None or cand < best:
            best = cand
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(CSV_HEADER + "\n")
        fh.write("".join(ln + "\n" for ln in keep))
    return last, best, len(keep)


def resolve_threads(threads: int | None) -> int:
    env = os.environ.get("KDVCRIT_THREADS")
    if env:
        return max(1, int(env))
    if threads:
        return max(1, int(threads))
    return os.cpu_count() or 1


def sweep_s(k_max: int, out: str | None = None, threads: int | None = None,
            checkpoint: str | None = None, keep_table: bool = False) -> SweepResult:
    """min |s(k, l)| over 1 <= l < k <= k_max, deterministic for any worker count."""
    if k_max < 2:
        raise ValueError("k_max must be >= 2")
    nthreads = resolve_threads(threads)
    k_start, best, n_done = 1, None, 0
    stream = None
    if checkpoint:
        k_start, best, n_done = _read_checkpoint(checkpoint)
        stream = open(checkpoint, "a", encoding="utf-8", newline="\n")
        if os.path.getsize(checkpoint) == 0:
            stream.write(CSV_HEADER + "\n")
    elif out:
        stream = open(out, "w", encoding="utf-8", newline="\n")
        stream.write(CSV_HEADER + "\n")
    chunks = _k_chunks(max(2, k_start + 1), k_max)
    tables = []
    n = n_done

    def consume(res):
        nonlocal best, n
        ks, ls, A, p, re, im, ab = res
        cand = _chunk_min(ks, ls, ab)
        if best is None or cand < best:
            best = cand
        n += ks.size
        if stream is not None:
            stream.write(_format_rows(ks, ls, A, p, re, im, ab))
            stream.flush()
        if keep_table:
            tables.append(res)

    try:
        if nthreads == 1 or len(chunks) <= 1:
            for c in chunks:
                consume(_sweep_chunk(c))
        else:
            with get_context("spawn").Pool(nthreads) as pool:
                for res in pool.imap(_sweep_chunk, chunks):
                    consume(res)
    finally:
        if stream is not None:
            stream.close()
    if checkpoint and out and os.path.abspath(out) != os.path.abspath(checkpoint):
        shutil.copyfile(checkpoint, out)
    table = None
    if keep_table and tables:
        cols = ("k", "l", "A", "p", "re_s", "im_s", "abs_s")
        table = {c: np.concatenate([t[i] for t in tables]) for i, c in enumerate(cols)}
        for c in ("re_s", "im_s", "abs_s"):
            with np.errstate(over="ignore"):
                table[c] = table[c].astype(np.float64)
    assert best is not None
    return SweepResult(best[0], (best[1], best[2]), n, table)


# ---------------------------------------------------------------- Q matrices

@dataclass(frozen=True)
class QMatrix:
    z: complex
    lam: tuple[complex, ...]
    entries: np.ndarray
    det: complex
    degenerate: bool

    @property
    def scale(self) -> float:
        """Hadamard bound: product of column norms, so |det| <= scale."""
        return float(np.prod(np.linalg.norm(self.entries, axis=0)))


def is_degenerate_z(z: complex, tol: float = 1e-12) -> bool:
    return abs(abs(complex(z)) - P_DEGENERATE) < tol and abs(complex(z).imag) < tol


def q_matrix(z: complex, L: float) -> QMatrix:
    cr = lambda_roots(z)
    lam = np.array(cr.roots)
    e = np.exp(lam * L)
    Q = np.vstack([np.ones(3, dtype=complex), e, lam * e])
    return QMatrix(complex(z), tuple(cr.roots), Q, complex(np.linalg.det(Q)),
                   cr.discriminant_degenerate or is_degenerate_z(z))


def degenerate_lambdas(sign: int = 1) -> tuple[complex, complex]:
    """(lambda_1, lambda_2 = lambda_3) at z = sign * 2/(3 sqrt 3)."""
    return (-sign * 2j / math.sqrt(3), sign * 1j / math.sqrt(3))


def q1_matrix(L: float) -> QMatrix:
    l1, l2 = degenerate_lambdas(1)
    e1, e2 = np.exp(l1 * L), np.exp(l2 * L)
    Q = np.array([[1, 1, 0],
                  [e1, e2, L * e2],
                  [l1 * e1, l2 * e2, (l2 * L + 1) * e2]], dtype=complex)
    return QMatrix(P_DEGENERATE, (l1, l2, l2), Q, complex(np.linalg.det(Q)), True)


def det_q2_closed(L: float) -> complex:
    """det of Q1 after row3 -= lambda_2 * row2, in closed form."""
    l1, l2 = degenerate_lambdas(1)
    return complex(np.exp(2 * l2 * L) - (1 - L * (l1 - l2)) * np.exp((l1 + l2) * L))


def det_K2(lam_hat: Sequence[complex], alpha: complex) -> complex:
    """sum_j lh_j (lh_{j+1} - lh_{j+2}) (e^{-lh_j} + alpha e^{lh_j})."""
    lh = [complex(x) for x in lam_hat]
    return sum(lh[j] * (lh[(j + 1) % 3] - lh[(j + 2) % 3])
               * (np.exp(-lh[j]) + alpha * np.exp(lh[j])) for j in range(3))


def det_K2_matrix(lam_hat: Sequence[complex], alpha: complex) -> complex:
    lh = np.asarray(lam_hat, dtype=complex)
    e = np.exp(lh)
    K = np.vstack([lh, lh * e, e - alpha])
    return complex(np.linalg.det(K))


def zero_set_scan(length: CriticalLength, z_grid: Iterable[float], gap: float = 1e-3):
    """|det Q(z)|/scale on the grid, skipping points within gap of P_L or the degenerate value."""
    bad = list(length.p_set) + [P_DEGENERATE]
    out = []
    for z in z_grid:
        if min(abs(z - b) for b in bad) < gap:
            continue
        qm = q_matrix(z, length.L)
        out.append((z, abs(qm.det) / qm.scale))
    return out
