import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ddkit import decoherence as dc
from ddkit import sequences as sq
from ddkit.errors import FitFailure, InvalidArgument, NotFound
from ddkit.noise import LorentzianBath, TabulatedBath

BUILDERS = {
    "free": lambda n, T, eta: sq.free_evolution(T),
    "cpmg": lambda n, T, eta: sq.cpmg(n, T),
    "eta": lambda n, T, eta: sq.eta_family(n, T, eta),
    "udd": lambda n, T, eta: sq.udd(n, T),
}


def _oracle_seq(case):
    return BUILDERS[case["family"]](case["n"], case["total_time"], case.get("eta"))


# -- filter function ----------------------------------------------------------


def test_filter_closed_forms():
    x = np.linspace(0.0, 100.0, 20001)
    F0 = dc.filter_function(sq.free_evolution(1.0), x)
    F1 = dc.filter_function(sq.cpmg(1, 1.0), x)
    np.testing.assert_allclose(F0, 2 * np.sin(x / 2) ** 2, rtol=0, atol=1e-12)
    np.testing.assert_allclose(F1, 8 * np.sin(x / 4) ** 4, rtol=0, atol=1e-12)
    assert dc.filter_function(sq.free_evolution(1.0), math.pi) == pytest.approx(2.0, abs=1e-15)
    assert dc.filter_function(sq.cpmg(1, 1.0), 2 * math.pi) == pytest.approx(8.0, abs=1e-14)


def test_filter_is_even():
    s = sq.udd(5, 0.7)
    w = np.linspace(0.1, 300, 50)
    np.testing.assert_array_equal(dc.filter_function(s, -w), dc.filter_function(s, w))


@given(st.integers(0, 60), st.floats(0.01, 10.0), st.floats(0.0, 1e4))
def test_filter_bounds(n, T, w):
    s = sq.udd(n, T) if n else sq.free_evolution(T)
    F = dc.filter_function(s, w)
    assert 0.0 <= F <= 2 * (n + 2) ** 2
    assert dc.filter_function(s, 0.0) == 0.0


@given(st.integers(1, 80), st.floats(0.01, 10.0), st.floats(0.0, 1e3))
def test_cpmg_filter_time_reversal(n, T, w):
    s = sq.cpmg(n, T)
    a = dc.filter_function(s, w)
    b = dc.filter_function(s.reversed(), w)
    assert a == pytest.approx(b, rel=1e-9, abs=1e-12)


@given(
    st.lists(st.floats(0.01, 0.99), min_size=1, max_size=12, unique=True),
    st.floats(0.05, 5.0),
)
def test_time_reversal_holds_for_any_sequence(fracs, T):
    fracs = sorted(fracs)
    if np.min(np.diff([0.0, *fracs, 1.0])) < 1e-6:
        return
    s = sq.custom(tuple(T * f for f in fracs), T)
    w = np.linspace(0, 200 / T, 37)
    np.testing.assert_allclose(dc.filter_function(s, w), dc.filter_function(s.reversed(), w), atol=1e-9)


@pytest.mark.parametrize(
    "seq", [sq.free_evolution(0.3), sq.cpmg(1, 0.5), sq.udd(7, 1.0), sq.eta_family(20, 1.0, 0.7), sq.custom((0.1, 0.5), 1.0)]
)
def test_small_omega_limit(seq, reference_bath):
    mpmath = pytest.importorskip("mpmath")
    w = 1e-8
    with mpmath.workdps(60):
        z = sum(mpmath.mpf(c) * mpmath.expj(mpmath.mpf(w) * mpmath.mpf(b)) for b, c in zip(seq.boundaries(), seq.coefficients()))
        ref = float(abs(z) ** 2 / 2 / mpmath.mpf(w) ** 2)
    # UDD moments cancel to rounding, leaving a limit of 0 up to ~1e-32 T^2
    floor = 1e-24 * seq.total_time**2
    assert dc.filter_over_omega_sq(seq, w) == pytest.approx(ref, rel=1e-6, abs=floor)
    val = dc.integrand(seq, reference_bath, w)
    assert val == pytest.approx(reference_bath.spectrum(w) * ref / math.pi, rel=1e-6, abs=floor * reference_bath.spectrum(0.0))


# -- exponent ---------------------------------------------------------------------


def test_exponent_matches_frozen_oracle(oracles, reference_bath):
    for case in oracles["exponents"]:
        seq = _oracle_seq(case)
        q = dc.decay_exponent(seq, reference_bath, 1e-10)
        e = dc.decay_exponent(seq, reference_bath, method="exact")
        assert q.value == pytest.approx(case["chi"], rel=1e-8, abs=1e-10), case
        assert e.value == pytest.approx(case["chi"], rel=1e-10), case
        assert q.error <= 1e-10


def test_exponent_auto_uses_exact_for_lorentzian(reference_bath):
    assert dc.decay_exponent(sq.cpmg(10, 1.0), reference_bath, method="auto").method == "exact"
    tab = TabulatedBath((0.0, 10.0, 20.0), (1.0, 1.0, 0.0))
    assert dc.decay_exponent(sq.cpmg(10, 1.0), tab, method="auto").method == "quadrature"
    with pytest.raises(InvalidArgument):
        dc.decay_exponent(sq.cpmg(10, 1.0), tab, method="exact")


def test_quadrature_with_symbolic_filter_forms(reference_bath):
    free = sq.free_evolution(0.2)
    hahn = sq.cpmg(1, 0.2)
    for seq, form in (
        (free, lambda w: 2 * np.sin(w * 0.2 / 2) ** 2),
        (hahn, lambda w: 8 * np.sin(w * 0.2 / 4) ** 4),
    ):
        ours = dc.decay_exponent(seq, reference_bath, 1e-12).value
        sym = dc.decay_exponent(seq, reference_bath, 1e-12, filter_func=form).value
        assert sym == pytest.approx(ours, abs=1e-10)


def test_static_limit_free_decay():
    bath = LorentzianBath(23.8, 1.0)  # gamma * t = 0.01
    c = dc.coherence(sq.free_evolution(0.01), bath)
    assert c == pytest.approx(math.exp(-(23.8 * 0.01) ** 2 / 2), rel=5e-3)
    assert c == pytest.approx(0.9721, abs=5e-4)


def test_zero_noise_bath():
    bath = LorentzianBath(0.0, 37.5)
    assert dc.coherence(sq.udd(9, 2.0), bath) == 1.0
    assert dc.decay_exponent(sq.cpmg(3, 1.0), bath).value == 0.0


def test_tol_validation(reference_bath):
    for tol in (0.0, -1.0, 2e-3, math.nan):
        with pytest.raises(InvalidArgument):
            dc.coherence(sq.cpmg(1, 1.0), reference_bath, tol)


def test_omega_override(reference_bath):
    seq = sq.cpmg(4, 0.5)
    ref = dc.decay_exponent(seq, reference_bath, 1e-10).value
    big = dc.decay_exponent(seq, reference_bath, 1e-10, omega_max=5000.0)
    # rounded up to whole mesh panels of width pi / (4 T)
    assert 5000.0 <= big.omega_max < 5000.0 + math.pi / (4 * seq.total_time)
    assert big.value == pytest.approx(ref, abs=1e-10)
    with pytest.raises(InvalidArgument):
        dc.decay_exponent(seq, reference_bath, 1e-10, omega_max=10.0)


def test_tabulated_bath_quadrature_matches_lorentzian_when_cut_high():
    lor = LorentzianBath(5.0, 3.0)
    w = np.concatenate([[0.0], np.geomspace(1e-3, 4000, 20000)])
    tab = TabulatedBath(tuple(w), tuple(lor.spectrum(w)))
    seq = sq.cpmg(3, 0.4)
    # the cut tail above 4000 rad/s is below 1e-8 for this bath
    assert dc.decay_exponent(seq, tab, 1e-9).value == pytest.approx(
        dc.decay_exponent(seq, lor, method="exact").value, rel=1e-5
    )


@settings(max_examples=25)
@given(st.integers(0, 40), st.floats(0.05, 3.0), st.floats(0.5, 50.0), st.floats(1.0, 100.0), st.floats(0.1, 10.0))
def test_exponent_linear_in_variance(n, T, sigma, gamma, k):
    seq = sq.cpmg(n, T) if n else sq.free_evolution(T)
    bath = LorentzianBath(sigma, gamma)
    base = dc.decay_exponent(seq, bath, method="exact").value
    scaled = dc.decay_exponent(seq, bath.scaled(k), method="exact").value
    assert scaled == pytest.approx(k * base, rel=1e-10)


def test_exponent_doubles_with_variance_quadrature(reference_bath):
    seq = sq.udd(12, 1.0)
    a = dc.decay_exponent(seq, reference_bath, 1e-12).value
    b = dc.decay_exponent(seq, reference_bath.scaled(2.0), 1e-12).value
    assert b == pytest.approx(2 * a, rel=1e-10)


@settings(max_examples=20)
@given(st.integers(1, 30), st.floats(0.05, 3.0), st.floats(0.5, 50.0), st.floats(1.0, 100.0))
def test_quadrature_agrees_with_exact(n, T, sigma, gamma):
    bath = LorentzianBath(sigma, gamma)
    seq = sq.udd(n, T)
    q = dc.decay_exponent(seq, bath, 1e-9)
    e = dc.decay_exponent(seq, bath, method="exact")
    assert abs(q.value - e.value) <= 1e-9 + 1e-12 * e.value


def test_monotone_in_pulse_count(reference_bath):
    vals = [dc.coherence(sq.cpmg(n, 1.0), reference_bath, 1e-10) for n in (1, 2, 4, 8, 16, 32, 64, 128, 256)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))


# -- curves and coherence times ---------------------------------------------------


def test_curve_basics(reference_bath):
    gen = sq.fixed_rate(35.0)
    curve = dc.coherence_curve(gen, reference_bath, [0.0, 0.5, 1.0])
    assert curve.values[0] == 1.0
    assert curve.method == "quadrature"
    assert dc.coherence_curve(gen, reference_bath, [0.0]).values == (1.0,)
    assert dc.coherence_curve(gen, reference_bath, [0.5], method="exact").method == "analytic"
    with pytest.raises(InvalidArgument):
        dc.coherence_curve(gen, reference_bath, [0.5, 0.2])


def test_curve_workers_identical(reference_bath):
    times = np.linspace(0.1, 2.0, 8)
    a = dc.coherence_curve(sq.fixed_rate(20.0), reference_bath, times)
    b = dc.coherence_curve(sq.fixed_rate(20.0), reference_bath, times, workers=4)
    assert a.values == b.values


def test_semilog_linearity(reference_bath):
    gen = sq.fixed_rate(35.0)
    tau = dc.coherence_time(lambda t: dc.coherence(gen(t), reference_bath, method="exact")).tau_c
    t = np.linspace(5 / reference_bath.gamma, tau, 40)
    curve = dc.coherence_curve(gen, reference_bath, t, method="exact")
    y = np.log(curve.values)
    p = np.polyfit(t, y, 1)
    assert np.max(np.abs(np.polyval(p, t) - y)) / np.max(np.abs(y)) < 0.01


def test_coherence_time_exponential_input():
    f = lambda t: math.exp(-t / 2.4)  # noqa: E731
    assert dc.coherence_time(f).tau_c == pytest.approx(2.4, rel=1e-4)
    fit = dc.coherence_time(f, "exponential_fit")
    assert fit.tau_c == pytest.approx(2.4, rel=1e-6)
    assert fit.fit_residual < 1e-10
    t = np.linspace(0.1, 6, 30)
    curve = dc.CoherenceCurve(tuple(t), tuple(np.exp(-t / 2.4)), "measured")
    assert dc.coherence_time(curve).tau_c == pytest.approx(2.4, rel=1e-6)
    assert dc.coherence_time(curve, "exponential_fit").tau_c == pytest.approx(2.4, rel=1e-9)


def test_coherence_time_not_found():
    with pytest.raises(NotFound) as info:
        dc.coherence_time(lambda t: 0.99, t_max=10.0)
    assert info.value.last_value == 0.99
    with pytest.raises(InvalidArgument):
        dc.coherence_time(lambda t: 0.5, "median")


def test_free_decay_law():
    assert dc.free_decay_3d(23.8, 0.0) == 1.0
    tau1 = dc.free_decay_3d_time(23.8)
    assert tau1 * 23.8 == pytest.approx(math.sqrt(3 * (math.exp(2 / 3) - 1)), rel=1e-14)
    assert tau1 * 23.8 == pytest.approx(1.69, abs=0.005)
    assert dc.free_decay_3d(23.8, 0.071) == pytest.approx(math.exp(-1), rel=5e-3)
    root = dc.coherence_time(lambda t: dc.free_decay_3d(23.8, t))
    assert root.tau_c == pytest.approx(0.0710, abs=2e-4)
    assert root.tau_c == pytest.approx(tau1, rel=1e-4)


def test_tau_delta_estimator(reference_bath):
    est = dc.tau_c_delta_approx(35.0, reference_bath)
    assert est == pytest.approx((37.5**2 + (2 * math.pi * 35) ** 2) / (2 * 37.5 * 23.8**2), rel=1e-14)
    assert est == pytest.approx(1.17, abs=0.01)
    ratio = dc.tau_c_delta_approx(400.0, reference_bath) / dc.tau_c_delta_approx(200.0, reference_bath)
    assert ratio == pytest.approx(4.0, rel=(37.5 / (2 * math.pi * 200)) ** 2)
    assert dc.tau_c_delta_approx(1e-9, reference_bath) == pytest.approx(37.5 / (2 * 23.8**2), rel=1e-9)
    with pytest.raises(InvalidArgument):
        dc.tau_c_delta_approx(0.0, reference_bath)


def test_quadrature_tau_at_35hz(reference_bath):
    gen = sq.fixed_rate(35.0)
    tau = dc.coherence_time(lambda t: dc.coherence(gen(t), reference_bath, 1e-8), "exponential_fit").tau_c
    assert 2.2 <= tau <= 4.0


# -- sigma fit ----------------------------------------------------------------------


def _free_curve(sigma, noise=0.0, rng=None):
    t = np.linspace(0.005, 0.2, 40)
    c = dc.free_decay_3d(sigma, t)
    if noise:
        c = c + noise * rng.standard_normal(t.size)
    return dc.CoherenceCurve(tuple(t), tuple(c), "measured")


def test_fit_sigma_round_trip():
    assert dc.fit_sigma_delta(_free_curve(23.8)).sigma_delta == pytest.approx(23.8, rel=1e-3)


def test_fit_sigma_with_noise():
    # resampling oracle: spread of estimates over independent 1% noise draws
    rng = np.random.default_rng(7)
    est = np.array([dc.fit_sigma_delta(_free_curve(23.8, 0.01, rng)).sigma_delta for _ in range(200)])
    assert np.all(np.abs(est / 23.8 - 1) < 0.02)
    assert abs(est.mean() / 23.8 - 1) < 0.005


def test_fit_sigma_failures():
    t = np.linspace(0.01, 1, 20)
    with pytest.raises(FitFailure):
        dc.fit_sigma_delta(dc.CoherenceCurve(tuple(t), (1.0,) * 20, "measured"))
    with pytest.raises(FitFailure):
        dc.fit_sigma_delta(dc.CoherenceCurve((0.1, 0.2, 0.3), (0.5, 0.4, 0.3), "measured"))
    wiggly = np.where(np.arange(20) % 2, 0.2, 0.8)
    with pytest.raises(FitFailure):
        dc.fit_sigma_delta(dc.CoherenceCurve(tuple(t), tuple(wiggly), "measured"))
