"""Critical pairs (k, l), their lengths, p-values and eta-values.

A length L = 2*pi*sqrt(A/3) is critical when A = k^2 + k*l + l^2 for some
integers k >= l >= 1.  Every representation of A contributes one pair.
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * math.pi
P_DEGENERATE = 2.0 / (3.0 * math.sqrt(3.0))


def norm_form(k: int, l: int) -> int:
    return k * k + k * l + l * l


def b_value(k: int, l: int) -> int:
    """(2k+l)(2l+k)(k-l), the integer numerator of p(k, l)."""
    return (2 * k + l) * (2 * l + k) * (k - l)


def length_from_A(A: int) -> float:
    return TWO_PI * math.sqrt(A / 3.0)


def p_value(k: int, l: int) -> float:
    if not (k >= l >= 1):
        raise ValueError(f"need k >= l >= 1, got ({k}, {l})")
    A = norm_form(k, l)
    return b_value(k, l) / (3.0 * math.sqrt(3.0) * A ** 1.5)


def eta_values(k: int, l: int) -> tuple[complex, complex, complex]:
    L = length_from_A(norm_form(k, l))
    c = TWO_PI / (3.0 * L)
    return (-1j * c * (2 * k + l), 1j * c * (k - l), 1j * c * (k + 2 * l))


def enumerate_pairs(A: int) -> list[tuple[int, int]]:
    """All (k, l) with k >= l >= 1 and k^2 + kl + l^2 = A, by descending k."""
    out = []
    if A < 3:
        return out
    for l in range(1, math.isqrt(A // 3) + 1):
        disc = 4 * A - 3 * l * l
        r = math.isqrt(disc)
        if r * r != disc or (r - l) % 2:
            continue
        k = (r - l) // 2
        if k >= l and norm_form(k, l) == A:
            out.append((k, l))
    out.sort(reverse=True)
    return out


@dataclass(frozen=True)
class CriticalPair:
    k: int
    l: int
    A: int
    L: float
    p: float
    eta: tuple[complex, complex, complex]

    @classmethod
    def from_kl(cls, k: int, l: int) -> "CriticalPair":
        if not (k >= l >= 1):
            raise ValueError(f"need k >= l >= 1, got ({k}, {l})")
        A = norm_form(k, l)
        return cls(k, l, A, length_from_A(A), p_value(k, l), eta_values(k, l))

    @property
    def B(self) -> int:
        return b_value(self.k, self.l)

    def psi(self, x):
        """psi(x) = sum_j (eta_{j+1} - eta_j) exp(eta_{j+2} x)."""
        x = np.asarray(x, dtype=float)
        e = self.eta
        return sum((e[(j + 1) % 3] - e[j]) * np.exp(e[(j + 2) % 3] * x) for j in range(3))

    def dpsi(self, x):
        x = np.asarray(x, dtype=float)
        e = self.eta
        return sum((e[(j + 1) % 3] - e[j]) * e[(j + 2) % 3] * np.exp(e[(j + 2) % 3] * x)
                   for j in range(3))

    def Psi(self, t, x):
        return np.exp(-1j * self.p * t) * self.psi(x)

    def to_record(self) -> dict:
        return {
            "k": self.k,
            "l": self.l,
            "p": float(f"{self.p:.17g}"),
            "eta": [[e.real, e.imag] for e in self.eta],
        }


@dataclass(frozen=True)
class CriticalLength:
    L: float
    A: int
    pairs: tuple[CriticalPair, ...]
    notes: tuple[str, ...] = field(default=())

    @property
    def n_L(self) -> int:
        return len(self.pairs)

    @property
    def dim_M(self) -> int:
        return sum(2 if pr.p != 0 else 1 for pr in self.pairs)

    @property
    def p_set(self) -> tuple[float, ...]:
        return tuple(pr.p for pr in self.pairs)

    def index_of(self, k: int, l: int) -> int:
        for i, pr in enumerate(self.pairs):
            if (pr.k, pr.l) == (k, l):
                return i
        raise KeyError((k, l))

    def to_record(self) -> dict:
        return {
            "L": float(f"{self.L:.17g}"),
            "A": self.A,
            "pairs": [pr.to_record() for pr in self.pairs],
            "n_L": self.n_L,
            "dim_M": self.dim_M,
            "notes": list(self.notes),
        }


def build_length_from_A(A: int) -> CriticalLength:
    pairs = tuple(CriticalPair.from_kl(k, l) for k, l in enumerate_pairs(A))
    notes = []
    for pr in pairs:
        if pr.k == pr.l and pr.k > 1:
            # A k = l pair only contributes Im psi (Re psi vanishes identically).
            notes.append(f"pair ({pr.k},{pr.l}) has p = 0 and contributes one dimension to M")
    return CriticalLength(length_from_A(A), A, pairs, tuple(notes))


def build_length(k: int, l: int) -> CriticalLength:
    if not (k >= l >= 1):
        raise ValueError(f"need k >= l >= 1, got ({k}, {l})")
    return build_length_from_A(norm_form(k, l))


def verify_lemma_half(bound: int) -> tuple[bool, tuple[int, int] | None]:
    """Check ((2k+l)(2l+k)(k-l))^2 != (k^2+kl+l^2)^3 for 1 <= l <= k <= bound.

    Python integers are unbounded, so neither side can overflow.
    """
    for k in range(1, bound + 1):
        for l in range(1, k + 1):
            B = (2 * k + l) * (2 * l + k) * (k - l)
            A = k * k + k * l + l * l
            if B * B == A * A * A:
                return False, (k, l)
    return True, None


def verify_lemma_double(A_max: int) -> tuple[bool, tuple[int, int, int, int] | None]:
    """No two pairs (k1,l1), (k2,l2) with k > l at the same A and B2 = 2 B1."""
    fam: dict[int, list[tuple[int, int, int]]] = defaultdict(list)
    kmax = math.isqrt(A_max) + 1
    for k in range(2, kmax + 1):
        for l in range(1, k):
            A = norm_form(k, l)
            if A > A_max:
                break
            fam[A].append((k, l, b_value(k, l)))
    for A in sorted(fam):
        ps = fam[A]
        for k1, l1, B1 in ps:
            for k2, l2, B2 in ps:
                if B2 == 2 * B1:
                    return False, (k1, l1, k2, l2)
    return True, None


def critical_lengths_up_to(A_max: int) -> list[int]:
    """Sorted representable A values with 3 <= A <= A_max."""
    seen = set()
    for k in range(1, math.isqrt(A_max) + 1):
        for l in range(1, k + 1):
            A = norm_form(k, l)
            if A > A_max:
                break
            seen.add(A)
    return sorted(seen)
