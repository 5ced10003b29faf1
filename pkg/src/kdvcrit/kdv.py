"""Finite-difference KdV solver on (0, L) with u(0) = u(L) = u_x(L) = 0.

Central differences in space, trapezoidal (Crank-Nicolson) in time.  The
third derivative uses the 5-point central stencil; the ghost value left of
x = 0 comes from cubic extrapolation through u(0) = 0, and the ghost right
of x = L from the reflection u_{N+2} = u_N that encodes u_x(L) = 0.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .arithmetic import CriticalLength, build_length
from .auxiliary import WField, solve_phi

FP_TOL = 1e-10
FP_MAXIT = 50
MONO_TOL = 1e-12  # per-step relative tolerance on ||u||^2 growth


class FixedPointError(RuntimeError):
    pass


class EnergyBreakdown(RuntimeError):
    pass


@dataclass(frozen=True)
class SimGrid:
    L: float
    n_x: int = 511
    dt: float | None = None
    theta: float = 0.5
    nonlinear_form: str = "skew_symmetric"

    def __post_init__(self):
        if self.L <= 0 or self.n_x < 8:
            raise ValueError("need L > 0 and n_x >= 8")
        if self.dt is None:
            object.__setattr__(self, "dt", self.dx)
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.theta != 0.5:
            raise ValueError("only the trapezoidal rule (theta = 0.5) is implemented")

    @property
    def dx(self) -> float:
        return self.L / (self.n_x + 1)

    @property
    def x(self) -> np.ndarray:
        return self.dx * np.arange(1, self.n_x + 1)

    def bookkeeping(self) -> dict:
        return {"dx": self.dx, "dt": self.dt, "dt_over_dx": self.dt / self.dx,
                "accuracy_floor_ok": self.dt <= self.dx * (1 + 1e-12)}

    def refined(self) -> "SimGrid":
        """Half dx and half dt."""
        return SimGrid(self.L, 2 * self.n_x + 1, self.dt / 2)


@dataclass
class SimState:
    t: float
    u: np.ndarray
    trace_accumulator: float = 0.0


class Operator:
    """Spatial operator A ~ d/dx + d^3/dx^3 and the one-sided trace u_x(0)."""

    def __init__(self, grid: SimGrid, dt: float | None = None):
        self.grid = grid
        n, h = grid.n_x, grid.dx
        self.dt = grid.dt if dt is None else dt
        d1 = sp.diags([np.full(n - 1, 1.0), np.full(n - 1, -1.0)], [1, -1]) / (2 * h)
        diag = {2: 0.5, 1: -1.0, 0: 0.0, -1: 1.0, -2: -0.5}
        S = sp.diags([np.full(n - abs(o), v) for o, v in diag.items()], list(diag)).tolil()
        # left ghost u_{-1} = 4u_0 - 6u_1 + 4u_2 - u_3 with u_0 = 0, weight -1/2 in row 1
        S[0, 0] += 3.0
        S[0, 1] += -2.0
        S[0, 2] += 0.5
        # right ghost u_{N+2} = u_N, weight +1/2 in row N
        S[n - 1, n - 1] += 0.5
        self.A = (d1 + S.tocsr() / h**3).tocsc()
        self.trace_weights = np.array([4.0, -1.0]) / (2 * h)
        eye = sp.identity(n, format="csc")
        self._lu = splu((eye + 0.5 * self.dt * self.A).tocsc())
        self._rhs = (eye - 0.5 * self.dt * self.A).tocsr()

    def trace(self, u) -> float | complex:
        """Second-order one-sided u_x(0) with u(0) = 0."""
        return self.trace_weights[0] * u[0] + self.trace_weights[1] * u[1]

    def solve(self, b):
        if np.iscomplexobj(b):
            return self._lu.solve(np.ascontiguousarray(b.real)) + 1j * self._lu.solve(np.ascontiguousarray(b.imag))
        return self._lu.solve(b)

    def explicit(self, u):
        return self._rhs @ u

    def nonlinear(self, v):
        """Skew form (1/3)(v^2)_x + (1/3) v v_x, energy-neutral in the discrete inner product."""
        h = self.grid.dx
        w = np.concatenate(([0.0], v, [0.0]))
        return (w[2:] + w[1:-1] + w[:-2]) * (w[2:] - w[:-2]) / (6 * h)


def norm(u, dx: float) -> float:
    return float(np.sqrt(dx * np.sum(np.abs(u) ** 2)))


def _advance_trace(op: Operator, state: SimState, u_new, dt: float, rule: str) -> float:
    if rule == "midpoint":
        return state.trace_accumulator + dt * abs(op.trace(0.5 * (state.u + u_new))) ** 2
    return state.trace_accumulator + 0.5 * dt * (abs(op.trace(state.u)) ** 2 + abs(op.trace(u_new)) ** 2)


def step_linear(state: SimState, op: Operator, rule: str = "trapezoid") -> SimState:
    u_new = op.solve(op.explicit(state.u))
    return SimState(state.t + op.dt, u_new, _advance_trace(op, state, u_new, op.dt, rule))


def step_forced(state: SimState, op: Operator, forcing, rule: str = "trapezoid") -> SimState:
    """Linear step with source: forcing is the midpoint value of the nonlinear term (moved to the left side)."""
    u_new = op.solve(op.explicit(state.u) - op.dt * np.asarray(forcing))
    return SimState(state.t + op.dt, u_new, _advance_trace(op, state, u_new, op.dt, rule))


def step_nonlinear(state: SimState, op: Operator, rule: str = "trapezoid",
                   tol: float = FP_TOL, maxit: int = FP_MAXIT) -> SimState:
    """Implicit midpoint for the nonlinear term, resolved by fixed-point iteration."""
    u = state.u
    base = op.explicit(u)
    nxt = op.solve(base - op.dt * op.nonlinear(u))
    scale = max(float(np.max(np.abs(u))), 1e-300)
    for _ in range(maxit):
        with np.errstate(over="ignore", invalid="ignore"):
            cand = op.solve(base - op.dt * op.nonlinear(0.5 * (u + nxt)))
            delta = float(np.max(np.abs(cand - nxt)))
        if not math.isfinite(delta):
            raise FixedPointError(f"fixed point diverged at t={state.t:.6g}")
        nxt = cand
        if delta <= tol * scale:
            break
    else:
        raise FixedPointError(f"fixed point did not converge in {maxit} iterations at t={state.t:.6g}")
    return SimState(state.t + op.dt, nxt, _advance_trace(op, state, nxt, op.dt, rule))


@dataclass
class RunRecord:
    t: np.ndarray
    norm: np.ndarray
    trace_accum: np.ndarray
    trace_t: np.ndarray
    trace: np.ndarray
    max_energy_residual: float = 0.0
    max_norm_increase: float = 0.0
    final: np.ndarray | None = None
    increase_steps: int = 0
    last_increase_t: float = 0.0

    def energy_residual_rate(self) -> float:
        """max over t of |norm^2 + trace_accum - norm0^2| / (norm0^2 t)."""
        e0 = self.norm[0] ** 2
        if e0 == 0:
            return 0.0
        t = self.t[1:]
        r = np.abs(self.norm[1:] ** 2 + self.trace_accum[1:] - e0) / (e0 * t)
        return float(r.max()) if r.size else 0.0


def run(grid: SimGrid, u0, T: float, mode: str = "nonlinear", record_every: float = 0.0,
        trace_every: int = 1, rule: str = "trapezoid", abort_residual: float | None = None) -> RunRecord:
    """Integrate to time T; mode is 'linear' or 'nonlinear'.

    record_every = 0 stores every step.  trace_every thins the u_x(t,0) series.
    """
    if mode not in ("linear", "nonlinear"):
        raise ValueError(f"unknown mode {mode!r}")
    nsteps = max(1, int(math.ceil(T / grid.dt - 1e-9)))
    dt = T / nsteps
    op = Operator(grid, dt)
    dx = grid.dx
    u = np.array(u0, dtype=complex if np.iscomplexobj(u0) else float)
    st = SimState(0.0, u)
    e0 = norm(u, dx) ** 2
    stride = max(1, int(round(record_every / dt))) if record_every > 0 else 1
    ts, ns, acc, tt, tr = [0.0], [math.sqrt(e0)], [0.0], [0.0], [op.trace(u)]
    max_res = 0.0
    max_inc = 0.0
    n_inc, last_inc = 0, 0.0
    prev = e0
    stepper = step_linear if mode == "linear" else step_nonlinear
    for i in range(1, nsteps + 1):
        st = stepper(st, op, rule)
        en = norm(st.u, dx) ** 2
        if prev > 0:
            rel = (en - prev) / prev
            max_inc = max(max_inc, rel)
            if rel > MONO_TOL:
                n_inc += 1
                last_inc = i * dt
        prev = en
        if i % stride == 0 or i == nsteps:
            res = abs(en + st.trace_accumulator - e0)
            max_res = max(max_res, res)
            if abort_residual is not None and e0 > 0 and res > abort_residual * e0 * max(st.t, 1.0):
                raise EnergyBreakdown(f"energy residual {res / e0:.3e} at t={st.t:.6g}")
            ts.append(i * dt)
            ns.append(math.sqrt(en))
            acc.append(st.trace_accumulator)
        if i % trace_every == 0:
            tt.append(i * dt)
            tr.append(op.trace(st.u))
    return RunRecord(np.array(ts), np.array(ns), np.array(acc), np.array(tt), np.array(tr),
                     max_res, max_inc, st.u, n_inc, last_inc)


# M-projection -------------------------------------------------------------

@dataclass
class MProjection:
    basis: np.ndarray
    labels: list
    gram: np.ndarray
    coeffs: np.ndarray
    alpha: np.ndarray
    u01: np.ndarray
    u02: np.ndarray


def m_basis(length: CriticalLength, x, rel_tol: float = 1e-12):
    """Real functions Re psi_m, Im psi_m sampled on x, identically zero ones dropped."""
    funcs, labels = [], []
    for m, pr in enumerate(length.pairs):
        v = pr.psi(x)
        for part, f in (("re", v.real), ("im", v.imag)):
            if np.max(np.abs(f)) > rel_tol * max(1.0, np.max(np.abs(v))):
                funcs.append(f)
                labels.append((m, part))
    return np.array(funcs), labels


def project_M(u0, length: CriticalLength, grid: SimGrid, cond_max: float = 1e12) -> MProjection:
    u0 = np.asarray(u0, dtype=float)
    B, labels = m_basis(length, grid.x)
    G = grid.dx * B @ B.T
    if np.linalg.cond(G) > cond_max:
        raise np.linalg.LinAlgError("Gram matrix ill-conditioned; refine the grid")
    c = np.linalg.solve(G, grid.dx * B @ u0)
    u01 = c @ B
    alpha = np.zeros(length.n_L, dtype=complex)
    # Re(alpha psi) = Re(alpha) Re(psi) - Im(alpha) Im(psi)
    for ci, (m, part) in zip(c, labels):
        alpha[m] += ci if part == "re" else -1j * ci
    return MProjection(B, labels, G, c, alpha, u01, u0 - u01)


def m_profile(length: CriticalLength, grid: SimGrid, m: int = 0) -> np.ndarray:
    """Unit-norm element of M: Im psi_m (or Re psi_m if Im vanishes)."""
    v = length.pairs[m].psi(grid.x)
    f = v.imag if np.max(np.abs(v.imag)) > 1e-12 * np.max(np.abs(v)) else v.real
    return f / norm(f, grid.dx)


def orthogonal_profile(length: CriticalLength, grid: SimGrid) -> np.ndarray:
    """Unit-norm sin(2 pi x/L) * x(L - x) with the M-component removed."""
    x = grid.x
    f = np.sin(2 * np.pi * x / length.L) * x * (length.L - x) ** 2
    f = project_M(f, length, grid).u02
    return f / norm(f, grid.dx)


# Experiments --------------------------------------------------------------

def default_epsilon(L: float) -> float:
    return 0.05 * min(1.0, 1.0 / L)


def _l2_time(values, dt) -> float:
    v = np.abs(np.asarray(values)) ** 2
    return float(np.sqrt(dt * (v.sum() - 0.5 * (v[0] + v[-1]))))


def power_series_errors(length: CriticalLength, grid: SimGrid, eps_list, T: float, m: int = 0) -> dict:
    """e(eps) = ||(eps u1 + eps^2 u2 - u)_x(., 0)||_{L2(0,T)} and the log-log slope."""
    nsteps = max(1, int(math.ceil(T / grid.dt - 1e-9)))
    dt = T / nsteps
    op = Operator(grid, dt)
    u0 = m_profile(length, grid, m)
    # eps-independent pieces first
    s1 = SimState(0.0, u0.copy())
    s2 = SimState(0.0, np.zeros_like(u0))
    tr1, tr2 = [op.trace(u0)], [0.0]
    for _ in range(nsteps):
        n1 = step_linear(s1, op)
        s2 = step_forced(s2, op, op.nonlinear(0.5 * (s1.u + n1.u)))
        s1 = n1
        tr1.append(op.trace(s1.u))
        tr2.append(op.trace(s2.u))
    tr1, tr2 = np.array(tr1), np.array(tr2)
    errs = []
    for eps in eps_list:
        if eps == 0:
            errs.append(0.0)
            continue
        st = SimState(0.0, eps * u0)
        tr = [op.trace(st.u)]
        for _ in range(nsteps):
            st = step_nonlinear(st, op)
            tr.append(op.trace(st.u))
        errs.append(_l2_time(eps * tr1 + eps**2 * tr2 - np.array(tr), dt))
    eps_arr = np.array([e for e in eps_list if e > 0])
    err_arr = np.array([e for e, ep in zip(errs, eps_list) if ep > 0])
    slope = float(np.polyfit(np.log(eps_arr), np.log(err_arr), 1)[0]) if eps_arr.size >= 2 else float("nan")
    return {"eps": list(eps_list), "error": errs, "slope": slope,
            "ratios": [errs[i] / errs[i + 1] for i in range(len(errs) - 1) if errs[i + 1] > 0]}


def halving_time(t, nrm) -> float:
    """First time ||u|| <= ||u0||/2, linearly interpolated; inf if never."""
    t, nrm = np.asarray(t), np.asarray(nrm)
    idx = np.nonzero(nrm <= 0.5 * nrm[0])[0]
    if idx.size == 0:
        return float("inf")
    i = idx[0]
    if i == 0:
        return 0.0
    f = (nrm[i - 1] - 0.5 * nrm[0]) / (nrm[i - 1] - nrm[i])
    return float(t[i - 1] + f * (t[i] - t[i - 1]))


def tail_slope(t, nrm, frac: float = 0.5) -> float:
    """Least-squares slope of log||u|| vs log t on the last `frac` of the horizon."""
    t, nrm = np.asarray(t), np.asarray(nrm)
    sel = (t >= (1 - frac) * t[-1]) & (t > 0)
    return float(np.polyfit(np.log(t[sel]), np.log(nrm[sel]), 1)[0])


@dataclass
class DecayResult:
    epsilon: float
    T: float
    record: RunRecord
    t_half: float
    slope: float
    monotone: bool
    max_norm_increase: float
    energy_residual_rate: float

    def summary(self) -> dict:
        return {"epsilon": self.epsilon, "T": self.T, "t_half": self.t_half, "tail_slope": self.slope,
                "monotone": self.monotone, "max_norm_increase": self.max_norm_increase,
                "energy_residual_rate": self.energy_residual_rate,
                "increase_steps": self.record.increase_steps, "last_increase_t": self.record.last_increase_t,
                "final_norm": float(self.record.norm[-1])}


def decay_experiment(length: CriticalLength, grid: SimGrid, epsilon: float, T: float,
                     profile: str = "M", record_every: float = 1.0, mono_tol: float = MONO_TOL,
                     abort_residual: float = 1e-3) -> DecayResult:
    """Long nonlinear run from epsilon * (unit profile); profile 'M' lies in M, 'orth' is orthogonal to it."""
    u0 = m_profile(length, grid) if profile == "M" else orthogonal_profile(length, grid)
    rec = run(grid, epsilon * u0, T, "nonlinear", record_every=record_every,
              trace_every=max(1, int(round(record_every / grid.dt))), abort_residual=abort_residual)
    return DecayResult(epsilon, T, rec, halving_time(rec.t, rec.norm), tail_slope(rec.t, rec.norm),
                       rec.max_norm_increase <= mono_tol, rec.max_norm_increase, rec.energy_residual_rate())


def lower_bound_experiment(length: CriticalLength, grid: SimGrid, epsilon: float, T: float,
                           m: int = 0, profile: str = "psi", record_every: float = 1.0) -> dict:
    """Run from eps u1(0) + eps^2 W(0) and report min_t ||u|| t / ln(t+2) over t >= 1."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if profile not in ("phi", "psi"):
        raise ValueError("profile is 'phi' or 'psi'")
    x = grid.x
    alpha = np.zeros(length.n_L, dtype=complex)
    alpha[m] = -1j
    W = WField.build(length, alpha)
    if profile == "psi":
        u1 = W.u1(0.0, x)
    else:
        u1 = np.real(alpha[m] * solve_phi(length, m, m)(x))
    u0 = epsilon * u1 + epsilon**2 * np.real(W(0.0, x))
    rec = run(grid, u0, T, "nonlinear", record_every=record_every,
              trace_every=max(1, int(round(record_every / grid.dt))))
    sel = rec.t >= 1.0
    vals = rec.norm[sel] * rec.t[sel] / np.log(rec.t[sel] + 2)
    i = int(np.argmin(vals))
    return {"epsilon": epsilon, "profile": profile, "floor": float(vals[i]),
            "t_at_floor": float(rec.t[sel][i]), "tail_slope": tail_slope(rec.t, rec.norm),
            "record": rec}


def w_residual(length: CriticalLength, grid: SimGrid, alpha, t0: float = 0.3) -> float:
    """Discrete CN residual of the closed-form W with forcing u1 u1_x, relative to max|W|."""
    op = Operator(grid)
    dt, x = op.dt, grid.x
    W = WField.build(length, alpha)
    w0, w1 = np.real(W(t0, x)), np.real(W(t0 + dt, x))
    a0, a1 = W.u1(t0, x), W.u1(t0 + dt, x)
    r = (w1 - w0) / dt + op.A @ (0.5 * (w0 + w1)) + op.nonlinear(0.5 * (a0 + a1))
    return float(np.max(np.abs(r)) / max(np.max(np.abs(w0)), 1e-300))


def forced_vs_w(length: CriticalLength, grid: SimGrid, alpha, T: float = 5.0) -> float:
    """Run the forced scheme from W(0) with forcing from the exact u1; relative max error against W(T)."""
    nsteps = max(1, int(math.ceil(T / grid.dt - 1e-9)))
    op = Operator(grid, T / nsteps)
    x = grid.x
    W = WField.build(length, alpha)
    st = SimState(0.0, np.real(W(0.0, x)))
    for _ in range(nsteps):
        f = op.nonlinear(W.u1(st.t + 0.5 * op.dt, x))
        st = step_forced(st, op, f)
    ref = np.real(W(st.t, x))
    return float(np.max(np.abs(st.u - ref)) / np.max(np.abs(ref)))


def mode_error(length: CriticalLength, grid: SimGrid, T: float, m: int = 0) -> float:
    """Linear solver error against e^{-ipt} psi_m at time T, relative L2."""
    pr = length.pairs[m]
    rec = run(grid, pr.psi(grid.x), T, "linear", record_every=T)
    ex = pr.Psi(T, grid.x)
    return norm(rec.final - ex, grid.dx) / norm(ex, grid.dx)


# Output -------------------------------------------------------------------

def _fmt(v) -> str:
    return repr(float(v)) if abs(v) == 0 or not math.isfinite(v) else f"{float(v):.17g}"


def write_outputs(out: Path, rec: RunRecord, fit: dict) -> list[Path]:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    e = out / "energy.csv"
    with e.open("w", newline="\n") as fh:
        fh.write("t,norm,trace_accum\n")
        for a, b, c in zip(rec.t, rec.norm, rec.trace_accum):
            fh.write(f"{_fmt(a)},{_fmt(b)},{_fmt(c)}\n")
    tpath = out / "trace.csv"
    with tpath.open("w", newline="\n") as fh:
        fh.write("t,ux0\n")
        for a, b in zip(rec.trace_t, rec.trace):
            fh.write(f"{_fmt(a)},{_fmt(np.real(b))}\n")
    f = out / "fit.json"
    f.write_text(json.dumps(fit, indent=1, default=float) + "\n")
    return [e, tpath, f]


def length_for(k: int, l: int) -> CriticalLength:
    return build_length(k, l)
