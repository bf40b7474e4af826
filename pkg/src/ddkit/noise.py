"""Bath models for detuning noise.

A bath is described by its detuning autocorrelation Phi(tau) and the power
spectrum S(omega) = int Phi(tau) exp(i omega tau) dtau. The collisional bath
is Lorentzian:

    Phi(tau) = sigma^2 exp(-Gamma |tau|)
    S(omega) = 2 Gamma sigma^2 / (Gamma^2 + omega^2)

Besides S and Phi, a bath exposes the high-frequency envelope
h(omega) = S(omega) / (pi omega^2) used by the coherence quadrature to close
the integral analytically beyond a cutoff.
"""
from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument

__all__ = [
    "BathModel",
    "LorentzianBath",
    "TabulatedBath",
    "COLLISION_RATE_FACTOR",
    "spectrum",
    "correlation",
    "collision_rate_to_gamma",
    "gamma_to_collision_rate",
    "bath_from_dict",
]

# Gamma_col = 2.7 * Gamma for cold collisions in a 3D harmonic trap
# (Monroe, Cornell, Sackett, Myatt, Wieman, PRL 70, 414 (1993)).
COLLISION_RATE_FACTOR = 2.7


class BathModel(ABC):
    """Stationary detuning noise with an even, non-negative spectrum."""

    #: Spectrum vanishes identically above this angular frequency.
    cutoff: float = math.inf
    #: Above this frequency the derivatives of S / (pi omega^2) are monotone.
    tail_onset: float = 0.0

    @abstractmethod
    def spectrum(self, omega):
        """S(omega) in (rad/s)^2 per rad/s."""

    @abstractmethod
    def correlation(self, tau):
        """Phi(tau) in (rad/s)^2."""

    @property
    def variance(self) -> float:
        return float(self.correlation(0.0))

    def tail_envelope(self, omega: float, order: int):
        """Integral and derivatives of h = S / (pi omega^2) at ``omega``.

        Returns ``(int_omega^inf h, [h, h', ..., h^(order)])``. Only needed
        for baths without a finite cutoff.
        """
        raise NotImplementedError(f"{type(self).__name__} does not provide a high-frequency tail")

    def scaled(self, factor: float) -> BathModel:
        """Same bath with the spectrum multiplied by ``factor``."""
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


def _x_minus_arctan(x):
    # x - arctan(x) without cancellation for small x
    if x < 1e-2:
        x2 = x * x
        return x * x2 * (1 / 3 - x2 * (1 / 5 - x2 * (1 / 7 - x2 / 9)))
    return x - math.atan(x)


@dataclass(frozen=True)
class LorentzianBath(BathModel):
    """Exponentially correlated detuning (collision-limited jump process).

    Parameters
    ----------
    sigma_delta : float
        Standard deviation of the stationary detuning distribution, rad/s.
        Zero is allowed and gives a noiseless bath.
    gamma : float
        Correlation decay rate Gamma, 1/s. Must be positive.
    """

    sigma_delta: float
    gamma: float

    def __post_init__(self):
        if not (math.isfinite(self.sigma_delta) and self.sigma_delta >= 0):
            raise InvalidArgument(f"sigma_delta must be >= 0, got {self.sigma_delta!r}")
        if not (math.isfinite(self.gamma) and self.gamma > 0):
            raise InvalidArgument(f"gamma must be > 0, got {self.gamma!r}")

    def spectrum(self, omega):
        w = np.asarray(omega, dtype=float)
        g = self.gamma
        out = 2.0 * g * self.sigma_delta**2 / (g * g + w * w)
        return out if out.ndim else float(out)

    def correlation(self, tau):
        t = np.abs(np.asarray(tau, dtype=float))
        out = self.sigma_delta**2 * np.exp(-self.gamma * t)
        return out if out.ndim else float(out)

    @property
    def variance(self) -> float:
        return self.sigma_delta**2

    @property
    def tail_onset(self) -> float:
        return 2.0 * self.gamma

    def scaled(self, factor: float) -> LorentzianBath:
        return LorentzianBath(self.sigma_delta * math.sqrt(factor), self.gamma)

    def tail_envelope(self, omega: float, order: int):
        g = self.gamma
        w = float(omega)
        pref = 2.0 * g * self.sigma_delta**2 / math.pi
        integral = (2.0 * self.sigma_delta**2 / (math.pi * g * g)) * _x_minus_arctan(g / w)
        derivs = [pref * d for d in _inv_quartic_lorentz_derivs(w, g, order)]
        return integral, derivs

    def to_dict(self) -> dict:
        return {
            "schema": "ddkit/v1",
            "model": "lorentzian",
            "sigma_delta_rad_s": self.sigma_delta,
            "gamma_per_s": self.gamma,
        }


def _inv_quartic_lorentz_derivs(w, g, order):
    """Derivatives 0..order of 1 / (w^2 (w^2 + g^2))."""
    r = g / w
    if r < 0.5:
        # sum_m (-g^2)^m w^(-4-2m), differentiated term by term
        out = []
        for k in range(order + 1):
            total = 0.0
            for m in range(200):
                p = 4 + 2 * m
                rising = math.prod(range(p, p + k))  # p (p+1) ... (p+k-1)
                term = (-1) ** k * rising * (-(g * g)) ** m * w ** (-p - k)
                total += term
                if m > 2 and abs(term) < 1e-18 * abs(total):
                    break
            out.append(total)
        return out
    # partial fractions: (1/w^2 - 1/(w^2+g^2)) / g^2, 1/(w^2+g^2) = Im[1/(w - ig)] / g
    z = complex(w, -g)
    out = []
    for k in range(order + 1):
        fact = math.factorial(k)
        d_inv_sq = (-1) ** k * (k + 1) * fact * w ** (-k - 2)
        d_lor = ((-1) ** k * fact / z ** (k + 1)).imag / g
        out.append((d_inv_sq - d_lor) / (g * g))
    return out


@dataclass(frozen=True)
class TabulatedBath(BathModel):
    """Spectrum given on a grid, linearly interpolated, zero beyond the last point.

    ``omega`` must start at 0 and increase strictly; the spectrum is
    extended evenly to negative frequencies.
    """

    omega: tuple
    s_omega: tuple

    def __post_init__(self):
        w = np.asarray(self.omega, dtype=float)
        s = np.asarray(self.s_omega, dtype=float)
        if w.ndim != 1 or w.shape != s.shape or w.size < 2:
            raise InvalidArgument("tabulated bath needs matching 1-D omega and S arrays (>= 2 points)")
        if w[0] != 0.0 or np.any(np.diff(w) <= 0):
            raise InvalidArgument("omega grid must start at 0 and be strictly increasing")
        if np.any(s < 0) or not np.all(np.isfinite(s)):
            raise InvalidArgument("spectrum values must be finite and non-negative")
        object.__setattr__(self, "omega", tuple(w))
        object.__setattr__(self, "s_omega", tuple(s))

    @property
    def cutoff(self) -> float:
        return self.omega[-1]

    def spectrum(self, omega):
        w = np.abs(np.asarray(omega, dtype=float))
        out = np.interp(w, self.omega, self.s_omega, right=0.0)
        return out if out.ndim else float(out)

    def correlation(self, tau):
        """Cosine transform (1/pi) int_0^cutoff S cos(omega tau), exact for the linear interpolant."""
        t = np.abs(np.atleast_1d(np.asarray(tau, dtype=float)))
        w = np.asarray(self.omega)
        s = np.asarray(self.s_omega)
        w0, w1 = w[:-1], w[1:]
        s0, s1 = s[:-1], s[1:]
        slope = (s1 - s0) / (w1 - w0)
        out = np.empty(t.shape)
        for i, x in enumerate(t):
            if x * w[-1] < 1e-6:
                out[i] = np.sum(0.5 * (s0 + s1) * (w1 - w0))
                continue
            seg = (s1 * np.sin(w1 * x) - s0 * np.sin(w0 * x)) / x + slope * (
                np.cos(w1 * x) - np.cos(w0 * x)
            ) / (x * x)
            out[i] = seg.sum()
        out /= math.pi
        return out if np.ndim(tau) else float(out[0])

    def scaled(self, factor: float) -> TabulatedBath:
        return TabulatedBath(self.omega, tuple(factor * np.asarray(self.s_omega)))

    def to_dict(self) -> dict:
        return {
            "schema": "ddkit/v1",
            "model": "tabulated",
            "omega_rad_s": list(self.omega),
            "s_omega": list(self.s_omega),
        }


def spectrum(bath: BathModel, omega):
    return bath.spectrum(omega)


def correlation(bath: BathModel, tau):
    return bath.correlation(tau)


def collision_rate_to_gamma(gamma_col: float) -> float:
    """Correlation decay rate Gamma from the collision rate Gamma_col."""
    if not math.isfinite(gamma_col) or gamma_col < 0:
        raise InvalidArgument(f"collision rate must be non-negative, got {gamma_col!r}")
    return gamma_col / COLLISION_RATE_FACTOR


def gamma_to_collision_rate(gamma: float) -> float:
    if not math.isfinite(gamma) or gamma < 0:
        raise InvalidArgument(f"gamma must be non-negative, got {gamma!r}")
    return gamma * COLLISION_RATE_FACTOR


def bath_from_dict(data: dict) -> BathModel:
    """Build a bath from its JSON descriptor."""
    if not isinstance(data, dict):
        raise InvalidArgument("bath descriptor must be a JSON object")
    model = data.get("model")
    allowed = {
        "lorentzian": {"schema", "model", "sigma_delta_rad_s", "gamma_per_s"},
        "tabulated": {"schema", "model", "omega_rad_s", "s_omega"},
    }
    if model not in allowed:
        raise InvalidArgument(f"unknown bath model {model!r}")
    extra = set(data) - allowed[model]
    if extra:
        raise InvalidArgument(f"unknown keys in bath descriptor: {sorted(extra)}")
    try:
        if model == "lorentzian":
            return LorentzianBath(float(data["sigma_delta_rad_s"]), float(data["gamma_per_s"]))
        return TabulatedBath(tuple(data["omega_rad_s"]), tuple(data["s_omega"]))
    except KeyError as exc:
        raise InvalidArgument(f"bath descriptor missing field {exc}") from None
