"""Auxiliary functions phi_{m1,m2} and phi~_{m1,m2}.

phi solves  -i(p1+p2) phi + phi' + phi''' + (psi_{m1} psi_{m2})' = 0,
phi~ solves -i(p1-p2) phi + phi' + phi''' + (psi_{m1} conj(psi_{m2}))' = 0,
both with phi(0) = phi(L) = phi'(L) = 0.  Every solution is a particular
exponential sum chi plus a homogeneous part built on the roots of
lambda^3 + lambda - i z = 0.  Evaluators are closed-form exponential sums.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .arithmetic import P_DEGENERATE, CriticalLength, CriticalPair
from .condition import lambda_roots, q1_matrix, q_matrix

RES_TOL = 1e-9  # relative tolerance for membership tests like p1 + p2 in P_L

GENERIC, RESONANT, DEGENERATE, ZERO_P = "generic", "resonant", "degenerate", "zero_p"


def _deltas(eta):
    return [eta[(j + 1) % 3] - eta[j] for j in range(3)]


def _etas(pair: CriticalPair, conjugate: bool):
    e = np.array(pair.eta)
    return np.conj(e) if conjugate else e


def _double_sum_terms(pr1: CriticalPair, pr2: CriticalPair, conjugate: bool):
    """(weights, exponents) of Delta_j Delta'_k e^{(eta_{j+2} + eta'_{k+2}) x}, 9 terms."""
    e1 = np.array(pr1.eta)
    e2 = _etas(pr2, conjugate)
    d1, d2 = _deltas(e1), _deltas(e2)
    w, mu, den = [], [], []
    for j in range(3):
        for k in range(3):
            w.append(d1[j] * d2[k])
            mu.append(e1[(j + 2) % 3] + e2[(k + 2) % 3])
            den.append(3 * e1[(j + 2) % 3] * e2[(k + 2) % 3])
    return np.array(w), np.array(mu), np.array(den)


def _expsum(c, mu, x, order=0):
    x = np.asarray(x, dtype=float)
    return np.exp(np.multiply.outer(x, mu)) @ (c * mu ** order)


def forcing_derivative(length: CriticalLength, m1: int, m2: int, conjugate: bool = False):
    """x -> (psi_{m1} psi_{m2})'(x), or (psi_{m1} conj psi_{m2})'(x) when conjugate."""
    w, mu, _ = _double_sum_terms(length.pairs[m1], length.pairs[m2], conjugate)
    return lambda x: _expsum(w, mu, x, order=1)


def e_value_sum(k: int, l: int) -> complex:
    if k == l:
        raise ValueError("E is defined for p != 0 only")
    e = CriticalPair.from_kl(k, l).eta
    return sum((e[(j + 1) % 3] - e[j]) / e[(j + 2) % 3] for j in range(3))


def e_value_closed(k: int, l: int) -> float:
    if k == l:
        raise ValueError("E is defined for p != 0 only")
    return -27.0 * k * l * (k + l) / ((k + 2 * l) * (2 * k + l) * (k - l))


def e_value(k: int, l: int) -> tuple[complex, float]:
    """Both forms of E (eta-sum and closed form)."""
    return e_value_sum(k, l), e_value_closed(k, l)


def _require_nonzero_p(length, m1, m2):
    if length.pairs[m1].p == 0 or length.pairs[m2].p == 0:
        raise ValueError("D and chi are defined only when both p values are nonzero")


def chi_terms(length: CriticalLength, m1: int, m2: int, conjugate: bool = False):
    """Coefficients c and exponents mu with chi(x) = -sum c e^{mu x}; D = sum c."""
    _require_nonzero_p(length, m1, m2)
    w, mu, den = _double_sum_terms(length.pairs[m1], length.pairs[m2], conjugate)
    return w / den, mu


def d_value(length: CriticalLength, m1: int, m2: int, conjugate: bool = False) -> complex:
    c, _ = chi_terms(length, m1, m2, conjugate)
    return complex(c.sum())


@dataclass
class Chi:
    c: np.ndarray
    mu: np.ndarray

    def __call__(self, x, order: int = 0):
        return -_expsum(self.c, self.mu, x, order)


def chi(length: CriticalLength, m1: int, m2: int, conjugate: bool = False) -> Chi:
    return Chi(*chi_terms(length, m1, m2, conjugate))


@dataclass
class AuxSolution:
    case_tag: str
    m1: int
    m2: int
    conjugate: bool
    z: float
    L: float
    lam: tuple
    a: np.ndarray
    D: complex | None
    chi: Chi | None = None
    forcing: object = field(default=None, repr=False)
    const: complex = 0.0
    closed_sign: float = 0.0  # for zero_p: +1 (phi) or -1 (phi~)

    def _homog(self, x, order):
        x = np.asarray(x, dtype=float)
        lam = np.asarray(self.lam)
        if self.case_tag == DEGENERATE:
            l1, l2 = lam[0], lam[1]
            a1, a2, a3 = self.a
            e1, e2 = np.exp(l1 * x), np.exp(l2 * x)
            # d^n/dx^n (a2 + a3 x) e^{l2 x} = (a2 l2^n + a3 (n l2^{n-1} + x l2^n)) e^{l2 x}
            nterm = order * l2 ** (order - 1) if order else 0.0
            return a1 * l1 ** order * e1 + (a2 * l2 ** order + a3 * (nterm + x * l2 ** order)) * e2
        return np.exp(np.multiply.outer(x, lam)) @ (self.a * lam ** order)

    def _closed(self, x, order):
        x = np.asarray(x, dtype=float)
        L = self.L
        s, c = np.sin(x), np.cos(x)
        if order == 0:
            v = L * s + 1 / 6 - x * s - np.cos(2 * x) / 6
        elif order == 1:
            v = L * c - s - x * c + np.sin(2 * x) / 3
        elif order == 2:
            v = -L * s - 2 * c + x * s + 2 * np.cos(2 * x) / 3
        elif order == 3:
            v = -L * c + 3 * s + x * c - 4 * np.sin(2 * x) / 3
        else:
            raise ValueError("order <= 3")
        return (4.0 * self.closed_sign * v).astype(complex)

    def derivative(self, x, order: int = 0):
        if self.case_tag == ZERO_P:
            return self._closed(x, order)
        out = self.chi(x, order) + self._homog(x, order)
        if order == 0 and self.const:
            out = out + self.const
        return out

    def __call__(self, x):
        return self.derivative(x, 0)

    def dx(self, x):
        return self.derivative(x, 1)

    def ode_residual(self, x):
        return (-1j * self.z * self.derivative(x, 0) + self.derivative(x, 1)
                + self.derivative(x, 3) + self.forcing(x))

    def residuals(self, n: int = 200) -> dict:
        x = np.linspace(0.0, self.L, n)
        v = self(x)
        scale = max(float(np.abs(v).max()), 1e-300)
        b = [abs(complex(self(0.0))), abs(complex(self(self.L))), abs(complex(self.dx(self.L)))]
        ode = float(np.abs(self.ode_residual(x)).max())
        return {"scale": scale, "boundary": max(b) / scale, "ode": ode / scale}


def _in_set(z: float, values, tol: float = RES_TOL) -> bool:
    return any(abs(z - v) <= tol * max(1.0, abs(v)) for v in values)


def classify(length: CriticalLength, m1: int, m2: int, conjugate: bool = False) -> str:
    p1, p2 = length.pairs[m1].p, length.pairs[m2].p
    if p1 == 0 and p2 == 0:
        return ZERO_P
    if p1 == 0 or p2 == 0:
        raise ValueError("mixed case p1 = 0 != p2 has no construction")
    positive = [p for p in length.p_set if p > 0]
    if conjugate:
        if m1 == m2:
            return DEGENERATE  # z = 0: chi~ + D~ (the explicit two-term formula)
        # det Q(-z) = conj det Q(z), so the resonance test uses |p1 - p2|
        z = abs(p1 - p2)
        return RESONANT if _in_set(z, positive) else GENERIC
    z = p1 + p2
    if abs(z - P_DEGENERATE) <= RES_TOL:
        return DEGENERATE
    return RESONANT if _in_set(z, positive) else GENERIC


def solve_boundary(z: float, L: float, rhs, degenerate: bool = False):
    """Coefficients of the homogeneous part meeting (value at 0, value at L, slope at L) = rhs."""
    if degenerate:
        qm = q1_matrix(L)
        lam = qm.lam
    else:
        qm = q_matrix(z, L)
        lam = qm.lam
    a = np.linalg.solve(qm.entries, np.asarray(rhs, dtype=complex))
    return np.asarray(lam), a


def solve_resonant(D: complex, lam) -> np.ndarray:
    """Minimal-norm a with a1 + a2 + a3 = D and sum lambda_j a_j = 0."""
    lam = np.asarray(lam, dtype=complex)
    K = np.vstack([np.ones(3, dtype=complex), lam])
    return np.linalg.pinv(K) @ np.array([D, 0.0], dtype=complex)


def _zero_p_solution(length, m1, m2, conjugate):
    sign = -1.0 if conjugate else 1.0
    return AuxSolution(ZERO_P, m1, m2, conjugate, 0.0, length.L, (), np.zeros(3), None,
                       forcing=forcing_derivative(length, m1, m2, conjugate), closed_sign=sign)


def _build(length: CriticalLength, m1: int, m2: int, conjugate: bool) -> AuxSolution:
    case = classify(length, m1, m2, conjugate)
    if case == ZERO_P:
        return _zero_p_solution(length, m1, m2, conjugate)
    pr1, pr2 = length.pairs[m1], length.pairs[m2]
    L = length.L
    z = pr1.p - pr2.p if conjugate else pr1.p + pr2.p
    ch = chi(length, m1, m2, conjugate)
    D = complex(ch.c.sum())
    e1 = pr2.eta[0].conjugate() if conjugate else pr2.eta[0]
    rhs = D * np.array([1.0, np.exp((pr1.eta[0] + e1) * L), 0.0])
    F = forcing_derivative(length, m1, m2, conjugate)
    if conjugate and case == DEGENERATE:
        # z = 0 and m1 = m2: the constant D~ completes chi~
        lam = lambda_roots(0.0).roots
        return AuxSolution(DEGENERATE, m1, m2, True, 0.0, L, tuple(lam), np.zeros(3, complex), D,
                           chi=ch, forcing=F, const=D)
    if case == GENERIC:
        lam, a = solve_boundary(z, L, rhs)
    elif case == RESONANT:
        lam = np.asarray(lambda_roots(z).roots)
        a = solve_resonant(D, lam)
    else:
        lam, a = solve_boundary(z, L, rhs, degenerate=True)
    return AuxSolution(case, m1, m2, conjugate, z, L, tuple(lam), a, D, chi=ch, forcing=F)


def solve_phi(length: CriticalLength, m1: int, m2: int) -> AuxSolution:
    return _build(length, m1, m2, False)


def solve_phi_tilde(length: CriticalLength, m1: int, m2: int) -> AuxSolution:
    return _build(length, m1, m2, True)


def phi_prime_zero(length: CriticalLength, m: int) -> complex:
    return complex(solve_phi(length, m, m).dx(0.0))


def w_coefficients(length: CriticalLength) -> tuple[np.ndarray, np.ndarray]:
    """M = phi'_{m1,m2}(0)/8 and N = phi~'_{m1,m2}(0)/8."""
    n = length.n_L
    M = np.zeros((n, n), dtype=complex)
    N = np.zeros((n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            M[i, j] = complex(solve_phi(length, i, j).dx(0.0)) / 8
            N[i, j] = complex(solve_phi_tilde(length, i, j).dx(0.0)) / 8
    return M, N


@dataclass
class WField:
    """W = (V1 + conj V1 + 2 V2)/8 for coefficients alpha on one length."""
    length: CriticalLength
    alpha: np.ndarray
    phis: dict
    phits: dict

    @classmethod
    def build(cls, length: CriticalLength, alpha) -> "WField":
        alpha = np.asarray(alpha, dtype=complex)
        n = length.n_L
        phis = {(i, j): solve_phi(length, i, j) for i in range(n) for j in range(n)}
        phits = {(i, j): solve_phi_tilde(length, i, j) for i in range(n) for j in range(n)}
        return cls(length, alpha, phis, phits)

    def __call__(self, t: float, x, order: int = 0):
        p = self.length.p_set
        a = self.alpha
        v1 = 0.0
        v2 = 0.0
        for (i, j), ph in self.phis.items():
            v1 = v1 + a[i] * a[j] * ph.derivative(x, order) * np.exp(-1j * (p[i] + p[j]) * t)
        for (i, j), ph in self.phits.items():
            v2 = v2 + a[i] * np.conj(a[j]) * ph.derivative(x, order) * np.exp(-1j * (p[i] - p[j]) * t)
        return (v1 + np.conj(v1) + 2 * v2) / 8

    def u1(self, t: float, x):
        """Re sum alpha_m Psi_m(t, x)."""
        out = 0.0
        for m, pr in enumerate(self.length.pairs):
            out = out + self.alpha[m] * pr.Psi(t, x)
        return np.real(out)


def residual_suite(length: CriticalLength, n: int = 200) -> list[dict]:
    """Residuals of every constructible phi and phi~ on one length."""
    out = []
    for i in range(length.n_L):
        for j in range(length.n_L):
            for conj in (False, True):
                try:
                    sol = _build(length, i, j, conj)
                except ValueError:
                    continue
                r = sol.residuals(n)
                r.update(A=length.A, m1=i, m2=j, conjugate=conj, case=sol.case_tag)
                out.append(r)
    return out


def manufactured_degenerate(L: float, mu=(0.3 + 0.7j, -0.2 + 1.9j), c=(1.0, 0.5 - 0.25j)) -> AuxSolution:
    """A synthetic problem at z = 2/(3 sqrt 3) exercising the degenerate basis.

    chi is an arbitrary exponential sum; the forcing is chosen so that chi is a
    particular solution, and the boundary data are taken from chi itself.
    """
    z = P_DEGENERATE
    ch = Chi(np.asarray(c, dtype=complex), np.asarray(mu, dtype=complex))
    forcing = lambda x: -(-1j * z * ch(x) + ch(x, 1) + ch(x, 3))
    rhs = -np.array([complex(ch(0.0)), complex(ch(L)), complex(ch(L, 1))])
    lam, a = solve_boundary(z, L, rhs, degenerate=True)
    return AuxSolution(DEGENERATE, 0, 0, False, z, L, tuple(lam), a, None, chi=ch, forcing=forcing)


def manufactured_resonant(length: CriticalLength, m: int, D: complex = 1.0 + 0.5j) -> AuxSolution:
    """Synthetic check of the minimal-norm rule at a resonant frequency z = p_m.

    chi = -D1 e^{nu1 x} - D2 e^{nu2 x} with nu_n = lambda_1 + 2 pi i n / L mimics
    the structure of the true chi: chi(0) = -D, chi(L) = -D e^{lambda_1 L} and
    chi'(L) = 0.  The two resonant conditions must then close the system.
    """
    pr = length.pairs[m]
    z, L = pr.p, length.L
    lam = np.asarray(lambda_roots(z).roots)
    nu1 = lam[0] + 2j * np.pi / L
    nu2 = lam[0] + 4j * np.pi / L
    D1, D2 = D * nu2 / (nu2 - nu1), -D * nu1 / (nu2 - nu1)
    ch = Chi(np.array([D1, D2]), np.array([nu1, nu2]))
    forcing = lambda x: -(-1j * z * ch(x) + ch(x, 1) + ch(x, 3))
    a_ = solve_resonant(D, lam)
    return AuxSolution(RESONANT, m, m, False, z, L, tuple(lam), a_, D, chi=ch, forcing=forcing)


def sample_configurations(count: int = 50, A_max: int = 400) -> list[tuple[CriticalLength, int, int, bool]]:
    """Deterministic list of (length, m1, m2, conjugate) spanning the constructible cases."""
    from .arithmetic import build_length_from_A, critical_lengths_up_to

    out = []
    for A in critical_lengths_up_to(A_max):
        length = build_length_from_A(A)
        for i in range(length.n_L):
            for j in range(length.n_L):
                for conj in (False, True):
                    try:
                        classify(length, i, j, conj)
                    except ValueError:
                        continue
                    out.append((length, i, j, conj))
    # keep the zero-p and multi-pair configurations, then fill up in order
    key = lambda t: (0 if (t[0].pairs[t[1]].p == 0 or t[0].n_L > 1) else 1)
    ordered = sorted(out, key=key)
    chosen = ordered[:count]
    return sorted(chosen, key=lambda t: (t[0].A, t[1], t[2], t[3]))


def chi_at_boundaries(length: CriticalLength, m1: int, m2: int, conjugate: bool = False) -> dict:
    ch = chi(length, m1, m2, conjugate)
    D = complex(ch.c.sum())
    pr1, pr2 = length.pairs[m1], length.pairs[m2]
    e1 = pr2.eta[0].conjugate() if conjugate else pr2.eta[0]
    return {
        "chi0": complex(ch(0.0)),
        "chiL": complex(ch(length.L)),
        "dchiL": complex(ch(length.L, 1)),
        "D": D,
        "DeL": D * complex(np.exp((pr1.eta[0] + e1) * length.L)),
    }

