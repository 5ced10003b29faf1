import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kdvcrit.arithmetic import build_length, build_length_from_A
from kdvcrit.auxiliary import (
    DEGENERATE, GENERIC, ZERO_P, chi_at_boundaries, classify, d_value, e_value, e_value_closed,
    e_value_sum, manufactured_degenerate, manufactured_resonant, phi_prime_zero, residual_suite,
    sample_configurations, solve_phi, solve_phi_tilde, w_coefficients,
)

kl_nonzero = st.integers(1, 500).flatmap(lambda l: st.tuples(st.integers(l + 1, 1000), st.just(l)))


def test_E_spot_value():
    # [PAPER] E(2,1) = -8.1
    assert e_value_closed(2, 1) == pytest.approx(-8.1, rel=1e-15)
    assert e_value_sum(2, 1).real == pytest.approx(-8.1, rel=1e-13)


@given(kl_nonzero)
def test_E_sum_equals_closed(kl):
    es, ec = e_value(*kl)
    assert abs(es - ec) <= 1e-12 * abs(ec)
    assert abs(es.imag) <= 1e-12 * abs(ec)


@settings(max_examples=40)
@given(kl_nonzero.filter(lambda kl: kl[0] <= 300))
def test_D_is_E_squared_over_3(kl):
    length = build_length(*kl)
    m = length.index_of(*kl)
    ec = e_value_closed(*kl)
    assert abs(d_value(length, m, m) - ec**2 / 3) <= 1e-12 * ec**2 / 3


def test_D_spot(length_21):
    assert d_value(length_21, 0, 0) == pytest.approx(8.1**2 / 3, rel=1e-13)


def test_chi_boundary_values(length_21):
    b = chi_at_boundaries(length_21, 0, 0)
    D = abs(b["D"])
    assert abs(b["chi0"] + b["D"]) < 1e-12 * D
    assert abs(b["chiL"] + b["DeL"]) < 1e-12 * D
    assert abs(b["dchiL"]) < 1e-12 * D


@pytest.mark.parametrize("kl", [(2, 1), (3, 1), (5, 3), (11, 2), (13, 5)])
def test_residuals_generic(kl):
    for r in residual_suite(build_length(*kl)):
        assert r["boundary"] < 1e-9, r
        assert r["ode"] < 1e-8, r


def test_zero_p_closed_form(length_11):
    sol = solve_phi(length_11, 0, 0)
    assert sol.case_tag == ZERO_P
    # [DERIVED] phi'(0) = 4L for the printed closed form
    assert complex(sol.dx(0.0)) == pytest.approx(4 * length_11.L, rel=1e-14)
    assert phi_prime_zero(length_11, 0) == pytest.approx(8 * math.pi, rel=1e-14)
    r = sol.residuals()
    assert r["boundary"] < 1e-12 and r["ode"] < 1e-12


def test_w_coefficients_single_zero_p(length_11):
    M, N = w_coefficients(length_11)
    assert M[0, 0] == pytest.approx(length_11.L / 2, rel=1e-14)
    assert N[0, 0] == pytest.approx(-length_11.L / 2, rel=1e-14)


def test_w_coefficients_single_nonzero_p(length_21):
    M, N = w_coefficients(length_21)
    assert abs(M[0, 0]) > 1.0
    assert abs(phi_prime_zero(length_21, 0)) > 0


def test_conjugate_diagonal_is_real(length_21):
    sol = solve_phi_tilde(length_21, 0, 0)
    assert sol.case_tag == DEGENERATE
    x = np.linspace(0, length_21.L, 101)
    v = sol(x)
    assert np.max(np.abs(v.imag)) < 1e-12 * np.max(np.abs(v))


def test_phi_tilde_hermitian_symmetry():
    for A in (49, 91, 133):
        length = build_length_from_A(A)
        if length.n_L < 2 or min(length.p_set) == 0:
            continue
        x = np.linspace(0, length.L, 200)
        a = solve_phi_tilde(length, 0, 1)(x)
        b = solve_phi_tilde(length, 1, 0)(x)
        scale = max(np.max(np.abs(a)), 1e-300)
        assert np.max(np.abs(a - np.conj(b))) < 1e-9 * scale


def test_mixed_zero_nonzero_rejected():
    length = build_length_from_A(147)  # (11,2) and (7,7)
    with pytest.raises(ValueError):
        classify(length, 0, 1)
    with pytest.raises(ValueError):
        solve_phi(length, 0, 1)


def test_generic_case_classification(length_21):
    assert classify(length_21, 0, 0) == GENERIC


def test_derivative_matches_finite_difference(length_21):
    sol = solve_phi(length_21, 0, 0)
    x = np.linspace(0.5, length_21.L - 0.5, 40)
    errs = []
    for h in (1e-2, 5e-3):
        fd = (sol(x + h) - sol(x - h)) / (2 * h)
        errs.append(np.max(np.abs(fd - sol.dx(x))))
    assert errs[0] / errs[1] == pytest.approx(4, rel=0.05)


def test_manufactured_degenerate():
    sol = manufactured_degenerate(7.3)
    r = sol.residuals()
    assert r["boundary"] < 1e-9 and r["ode"] < 1e-8


def test_manufactured_resonant(length_21):
    sol = manufactured_resonant(length_21, 0)
    r = sol.residuals()
    assert r["boundary"] < 1e-9 and r["ode"] < 1e-8
    # minimal-norm choice: repeated construction is deterministic
    assert np.array_equal(sol.a, manufactured_resonant(length_21, 0).a)


def test_sample_configurations_cover_cases():
    confs = sample_configurations(50)
    assert len(confs) == 50
    tags = {classify(*c) for c in confs}
    assert {GENERIC, DEGENERATE, ZERO_P} <= tags
