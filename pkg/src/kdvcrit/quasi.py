"""The quasi-periodic trace g(t) and its sliding-window L2 norms."""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson
from scipy.optimize import minimize_scalar

from .arithmetic import CriticalLength
from .auxiliary import w_coefficients

POINTS_PER_PERIOD = 20


@dataclass
class TraceSignal:
    alpha: np.ndarray
    q: np.ndarray
    M: np.ndarray
    N: np.ndarray

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=complex)
        self.q = np.asarray(self.q, dtype=float)
        self.M = np.asarray(self.M, dtype=complex)
        self.N = np.asarray(self.N, dtype=complex)
        n = self.alpha.size
        if self.q.shape != (n,) or self.M.shape != (n, n) or self.N.shape != (n, n):
            raise ValueError("alpha, q, M, N sizes disagree")

    @property
    def n(self) -> int:
        return self.alpha.size

    @property
    def max_frequency(self) -> float:
        return 2.0 * float(self.q.max()) if self.n else 0.0

    def violations(self, tol: float = 1e-12) -> list[str]:
        """Which admissibility hypotheses fail (empty list when admissible)."""
        out = []
        q = np.sort(self.q)
        if np.any(np.diff(q) <= 0):
            out.append("q values not pairwise distinct")
        for j in range(self.n):
            if abs(self.M[j, j]) == 0:
                out.append(f"M[{j},{j}] = 0")
            if self.q[j] == 0:
                if abs(self.M[j, j].imag) > tol * max(1.0, abs(self.M[j, j])):
                    out.append(f"M[{j},{j}] not real with q = 0")
                if self.N[j, j] == 0:
                    out.append(f"N[{j},{j}] = 0 with q = 0")
                if abs(self.alpha[j].real) > tol * max(1.0, abs(self.alpha[j])):
                    out.append(f"alpha[{j}] not imaginary with q = 0")
        if not np.any(self.alpha != 0):
            out.append("alpha = 0")
        return out

    def to_json(self) -> str:
        cplx = lambda a: [[float(v.real), float(v.imag)] for v in np.ravel(a)]
        mat = lambda A: [cplx(row) for row in A]
        return json.dumps({"alpha": cplx(self.alpha), "q": self.q.tolist(),
                           "M": mat(self.M), "N": mat(self.N)}, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "TraceSignal":
        d = json.loads(text)
        cv = lambda v: complex(v[0], v[1]) if isinstance(v, (list, tuple)) else complex(v)
        alpha = [cv(v) for v in d["alpha"]]
        M = [[cv(v) for v in row] for row in d["M"]]
        N = [[cv(v) for v in row] for row in d["N"]]
        return cls(np.array(alpha), np.array(d["q"], dtype=float), np.array(M), np.array(N))


def signal_from_length(length: CriticalLength, alpha) -> TraceSignal:
    M, N = w_coefficients(length)
    return TraceSignal(np.asarray(alpha, dtype=complex), np.array(length.p_set), M, N)


def g_eval(signal: TraceSignal, t):
    """g(t) = sum_{j1,j2} a a M e^{-i(q1+q2)t} + conj(...) + 2 a conj(a) N e^{-i(q1-q2)t}."""
    t = np.asarray(t, dtype=float)
    a, q, M, N = signal.alpha, signal.q, signal.M, signal.N
    aa = np.outer(a, a) * M
    an = 2.0 * np.outer(a, np.conj(a)) * N
    qs = np.add.outer(q, q).ravel()
    qd = np.subtract.outer(q, q).ravel()
    ph_s = np.exp(-1j * np.multiply.outer(t, qs))
    first = ph_s @ aa.ravel()
    return first + np.conj(first) + np.exp(-1j * np.multiply.outer(t, qd)) @ an.ravel()


def _simpson_norm(signal, tau, n):
    t = np.linspace(tau, 2 * tau, n + 1)
    return float(np.sqrt(simpson(np.abs(g_eval(signal, t)) ** 2, x=t)))


def window_norm(signal: TraceSignal, tau: float, quad_points: int = 64,
                rtol: float = 1e-8, max_doublings: int = 12) -> float:
    """sqrt(int_tau^{2 tau} |g|^2 dt) by composite Simpson, doubled until converged."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    n = max(int(quad_points), 64)
    fmax = signal.max_frequency
    if fmax > 0:
        floor = int(np.ceil(POINTS_PER_PERIOD * tau * fmax / (2 * np.pi)))
        if n < floor:
            warnings.warn(f"quad_points={n} below {POINTS_PER_PERIOD} points per period; raised to {floor}")
            n = floor
    n += n % 2
    prev = _simpson_norm(signal, tau, n)
    for _ in range(max_doublings):
        n *= 2
        cur = _simpson_norm(signal, tau, n)
        if abs(cur - prev) <= rtol * max(abs(cur), 1e-300):
            return cur
        prev = cur
    warnings.warn("window_norm did not converge to the requested tolerance")
    return prev


def window_norm_exact_single(signal: TraceSignal, tau: float) -> float:
    """Closed-form window norm for n = 1 (g = M e^{-2iqt} + conj + 2|a|^2 N, times a^2 factors)."""
    if signal.n != 1:
        raise ValueError("n = 1 only")
    a, q = signal.alpha[0], signal.q[0]
    c1 = a * a * signal.M[0, 0]
    c0 = 2 * abs(a) ** 2 * signal.N[0, 0]
    # g = c1 e^{-iwt} + conj(c1) e^{iwt} + c0 with w = 2q
    w = 2 * q
    if w == 0:
        return float(abs(c1 + np.conj(c1) + c0) * np.sqrt(tau))
    coef = {-w: c1, w: np.conj(c1), 0.0: c0}
    total = 0.0 + 0j
    for f1, a1 in coef.items():
        for f2, a2 in coef.items():
            d = f1 - f2  # |g|^2 term: a1 conj(a2) e^{i(f1 - f2) t}
            amp = a1 * np.conj(a2)
            if d == 0:
                total += amp * tau
            else:
                total += amp * (np.exp(1j * d * 2 * tau) - np.exp(1j * d * tau)) / (1j * d)
    return float(np.sqrt(total.real))


def find_nonvanishing(signal: TraceSignal, t_max: float) -> tuple[float, float]:
    """argmax of |g| on a grid of step (2 pi / max frequency)/40, then bounded refinement."""
    fmax = max(signal.max_frequency, float(np.abs(np.subtract.outer(signal.q, signal.q)).max()))
    step = (2 * np.pi / fmax) / 40 if fmax > 0 else t_max / 400
    t = np.arange(0.0, t_max + step, step)
    v = np.abs(g_eval(signal, t))
    i = int(np.argmax(v))
    lo, hi = max(0.0, t[i] - step), min(t_max, t[i] + step)
    if hi > lo:
        res = minimize_scalar(lambda s: -abs(complex(g_eval(signal, s))), bounds=(lo, hi),
                              method="bounded", options={"xatol": 1e-12 * max(1.0, hi)})
        if -res.fun > v[i]:
            return float(res.x), float(-res.fun)
    return float(t[i]), float(v[i])


def sample_alpha(q, gamma1: float, gamma2: float, rng: np.random.Generator) -> np.ndarray:
    """Random coefficients with gamma1 <= sum |alpha|^2 <= gamma2 and alpha_j in iR when q_j = 0."""
    q = np.asarray(q, dtype=float)
    a = rng.normal(size=q.size) + 1j * rng.normal(size=q.size)
    a[q == 0] = 1j * a[q == 0].imag
    if not np.any(a):
        a[0] = 1j
    target = rng.uniform(gamma1, gamma2)
    return a * np.sqrt(target / np.sum(np.abs(a) ** 2))


@dataclass
class GammaEstimate:
    gamma0_hat: float
    worst_alpha: np.ndarray
    worst_tau: float
    samples: int


def gamma_floor(signal: TraceSignal, gamma1: float, gamma2: float, sample_count: int,
                tau_list, seed: int = 0, quad_points: int = 64) -> GammaEstimate:
    """Empirical minimum of window norms over a sampled coefficient family (an estimate only)."""
    if not 0 < gamma1 <= gamma2:
        raise ValueError("need 0 < gamma1 <= gamma2")
    rng = np.random.default_rng(seed)
    best = (np.inf, None, None)
    for _ in range(sample_count):
        a = sample_alpha(signal.q, gamma1, gamma2, rng)
        s = TraceSignal(a, signal.q, signal.M, signal.N)
        for tau in tau_list:
            v = window_norm(s, tau, quad_points)
            if v < best[0]:
                best = (v, a, tau)
    return GammaEstimate(best[0], best[1], best[2], sample_count)
