import numpy as np
import pytest
from hypothesis import given, strategies as st

from kdvcrit.quasi import (
    TraceSignal, find_nonvanishing, g_eval, gamma_floor, sample_alpha, signal_from_length,
    window_norm, window_norm_exact_single,
)

pytestmark = pytest.mark.filterwarnings("ignore:quad_points")


def _single(alpha, q, M, N):
    return TraceSignal(np.array([alpha]), np.array([q]), np.array([[M]]), np.array([[N]]))


def test_zero_alpha_gives_zero():
    s = _single(0.0, 0.3, 1.0 + 1j, 2.0)
    assert np.all(g_eval(s, np.linspace(0, 10, 11)) == 0)
    assert "alpha = 0" in s.violations()


def test_single_frequency_expansion():
    M, N, q = 0.7 - 0.2j, 1.3, 0.4
    s = _single(1.0, q, M, N)
    t = np.linspace(0, 30, 301)
    ref = M * np.exp(-2j * q * t) + np.conj(M) * np.exp(2j * q * t) + 2 * N
    np.testing.assert_allclose(g_eval(s, t), ref, atol=1e-13)


def test_window_norm_constant():
    s = _single(0.5j, 0.0, 2.0, 3.0)
    g0 = complex(g_eval(s, 0.0))
    for tau in (1.0, 7.5, 40.0):
        assert window_norm(s, tau) == pytest.approx(abs(g0) * np.sqrt(tau), rel=1e-10)


@given(st.floats(0.05, 3.0), st.floats(1.0, 60.0), st.complex_numbers(max_magnitude=2, min_magnitude=0.1,
                                                                          allow_nan=False, allow_infinity=False))
def test_window_norm_matches_closed_form(q, tau, alpha):
    s = _single(alpha, q, 0.8 + 0.3j, 0.6 - 0.1j)
    assert window_norm(s, tau) == pytest.approx(window_norm_exact_single(s, tau), rel=1e-8)


def test_window_norm_converged_under_doubling(length_21):
    s = signal_from_length(length_21, [0.6 + 0.3j])
    a = window_norm(s, 20.0, 256)
    b = window_norm(s, 20.0, 512)
    assert abs(a - b) <= 1e-8 * a


def test_window_norm_warns_when_underresolved():
    s = _single(1.0, 5.0, 1.0, 1.0)
    with pytest.warns(UserWarning):
        window_norm(s, 50.0, 64)


def test_window_norm_rejects_bad_tau():
    with pytest.raises(ValueError):
        window_norm(_single(1.0, 1.0, 1.0, 1.0), 0.0)


def test_find_nonvanishing_constant():
    s = _single(0.5j, 0.0, 2.0, 3.0)
    t, v = find_nonvanishing(s, 10.0)
    assert v == pytest.approx(abs(complex(g_eval(s, 0.0))))


def test_find_nonvanishing_random_admissible():
    rng = np.random.default_rng(11)
    for _ in range(1000):
        n = int(rng.integers(1, 4))
        q = np.sort(rng.uniform(0, 1, n))
        if rng.random() < 0.3:
            q[0] = 0.0
        M = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        N = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        for j in range(n):
            if q[j] == 0:
                M[j, j] = M[j, j].real
        a = sample_alpha(q, 0.5, 1.0, rng)
        s = TraceSignal(a, q, M, N)
        assert not s.violations()
        gap = np.diff(np.concatenate(([0.0], q)))
        gap = gap[gap > 0]
        t_max = 2 * np.pi / gap.min() if gap.size else 10.0
        _, v = find_nonvanishing(s, min(t_max, 200.0))
        assert v > 0


def test_signal_from_length_is_real(length_21):
    s = signal_from_length(length_21, [0.6 + 0.3j])
    t = np.linspace(0, 100, 2001)
    g = g_eval(s, t)
    assert np.max(np.abs(g.imag)) < 1e-9 * np.max(np.abs(g))


def test_sampler_respects_bounds():
    rng = np.random.default_rng(2)
    q = np.array([0.0, 0.3])
    for _ in range(200):
        a = sample_alpha(q, 0.9, 1.0, rng)
        assert 0.9 - 1e-12 <= np.sum(np.abs(a) ** 2) <= 1.0 + 1e-12
        assert a[0].real == 0


def test_gamma_floor_single_signal(length_21):
    s = signal_from_length(length_21, [1.0])
    est = gamma_floor(s, 1.0, 1.0, 1, [10.0], seed=0)
    direct = window_norm(TraceSignal(est.worst_alpha, s.q, s.M, s.N), 10.0)
    assert est.gamma0_hat == pytest.approx(direct)


def test_gamma_floor_positive_zero_p(length_11):
    s = signal_from_length(length_11, [1j])
    est = gamma_floor(s, 0.5, 1.0, 40, [10.0, 20.0], seed=4)
    assert est.gamma0_hat > 0


def test_json_round_trip(length_21):
    s = signal_from_length(length_21, [0.6 + 0.3j])
    r = TraceSignal.from_json(s.to_json())
    np.testing.assert_array_equal(r.M, s.M)
    np.testing.assert_array_equal(r.alpha, s.alpha)
