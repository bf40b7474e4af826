import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from ddkit import noise
from ddkit.errors import InvalidArgument
from ddkit.noise import LorentzianBath, TabulatedBath, _inv_quartic_lorentz_derivs

sigmas = st.floats(min_value=0.1, max_value=100.0)
gammas = st.floats(min_value=0.1, max_value=200.0)


def test_lorentzian_values(reference_bath):
    assert reference_bath.spectrum(0.0) == pytest.approx(2 * 23.8**2 / 37.5)
    assert reference_bath.correlation(0.0) == pytest.approx(23.8**2)
    assert reference_bath.correlation(1 / 37.5) == pytest.approx(23.8**2 / math.e)
    assert reference_bath.variance == 23.8**2


def test_spectrum_integrates_to_variance(reference_bath):
    # (1/pi) int_0^inf S = Phi(0)
    val, _ = integrate.quad(reference_bath.spectrum, 0, np.inf, epsabs=1e-12)
    assert val / math.pi == pytest.approx(reference_bath.variance, rel=1e-9)


@pytest.mark.parametrize("omega", [0.0, 5.0, 37.5, 220.0, 2000.0])
def test_wiener_khinchin_lorentzian(reference_bath, omega):
    # S(w) = 2 int_0^inf Phi(tau) cos(w tau) dtau, truncated where Phi/Phi(0) < 1e-26
    upper = 60.0 / reference_bath.gamma
    if omega == 0.0:
        val, _ = integrate.quad(reference_bath.correlation, 0, upper, epsabs=0, epsrel=1e-12)
    else:
        val, _ = integrate.quad(
            reference_bath.correlation, 0, upper, weight="cos", wvar=omega, epsabs=0, epsrel=1e-12, limit=500
        )
    assert 2 * val == pytest.approx(reference_bath.spectrum(omega), rel=1e-6)


def test_wiener_khinchin_tabulated():
    w = np.linspace(0, 50, 201)
    bath = TabulatedBath(tuple(w), tuple(np.exp(-w / 10)))
    for tau in (0.0, 0.03, 0.4, 2.0):
        # piecewise over the table so quad never straddles a kink
        val = sum(
            integrate.quad(lambda x: bath.spectrum(x) * math.cos(x * tau), a, b, epsabs=1e-14)[0]
            for a, b in zip(w[:-1], w[1:])
        )
        assert bath.correlation(tau) == pytest.approx(val / math.pi, rel=1e-6, abs=1e-12)


def test_tabulated_interpolation_and_cutoff():
    bath = TabulatedBath((0.0, 1.0, 2.0), (2.0, 1.0, 0.0))
    assert bath.spectrum(0.5) == 1.5
    assert bath.spectrum(-0.5) == 1.5
    assert bath.spectrum(3.0) == 0.0
    assert bath.cutoff == 2.0
    with pytest.raises(InvalidArgument):
        TabulatedBath((0.5, 1.0), (1.0, 1.0))
    with pytest.raises(InvalidArgument):
        TabulatedBath((0.0, 1.0), (1.0, -1.0))


def test_collision_rate_mapping():
    assert noise.collision_rate_to_gamma(2.7 * 37.5) == pytest.approx(37.5)
    assert noise.gamma_to_collision_rate(37.5) == pytest.approx(101.25)
    with pytest.raises(InvalidArgument):
        noise.collision_rate_to_gamma(-1.0)


def test_bath_validation():
    LorentzianBath(0.0, 1.0)
    for s, g in ((-1.0, 1.0), (1.0, 0.0), (math.nan, 1.0)):
        with pytest.raises(InvalidArgument):
            LorentzianBath(s, g)


def test_bath_from_dict(reference_bath):
    assert noise.bath_from_dict(reference_bath.to_dict()) == reference_bath
    with pytest.raises(InvalidArgument, match="unknown keys"):
        noise.bath_from_dict({**reference_bath.to_dict(), "extra": 1})
    with pytest.raises(InvalidArgument):
        noise.bath_from_dict({"model": "ohmic"})


def test_tail_derivatives_match_sympy():
    sympy = pytest.importorskip("sympy")
    w = sympy.symbols("w", positive=True)
    for g in (0.3, 1.0, 4.0):
        f = 1 / (w**2 * (w**2 + g**2))
        for w0 in (1.0, 2.5, 10.0):
            ours = _inv_quartic_lorentz_derivs(w0, g, 5)
            for k in range(6):
                ref = float(sympy.diff(f, w, k).subs(w, w0))
                assert ours[k] == pytest.approx(ref, rel=1e-12)


@given(sigmas, gammas, st.floats(min_value=2.0, max_value=1e3))
def test_tail_integral_matches_quadrature(sigma, gamma, x):
    bath = LorentzianBath(sigma, gamma)
    omega = x * gamma
    integral, h = bath.tail_envelope(omega, 2)
    ref, _ = integrate.quad(lambda w: bath.spectrum(w) / (math.pi * w * w), omega, np.inf, epsabs=0, epsrel=1e-11)
    assert integral == pytest.approx(ref, rel=1e-8)
    assert h[0] == pytest.approx(bath.spectrum(omega) / (math.pi * omega**2), rel=1e-12)


@given(sigmas, gammas, st.floats(min_value=0.01, max_value=100.0))
def test_scaling_multiplies_spectrum(sigma, gamma, factor):
    bath = LorentzianBath(sigma, gamma)
    assert bath.scaled(factor).spectrum(3.0) == pytest.approx(factor * bath.spectrum(3.0), rel=1e-12)
