"""Dynamical-decoupling pulse sequences.

Pulses are ideal and instantaneous. A sequence is the list of pi-pulse
times inside ``(0, total_time)``; the phase of each pulse is carried as
metadata only (nothing in the package consumes it yet).

Families
--------
cpmg        t_k = (2k - 1) / (2n) * T
eta         t_i = (eta + i - 1) / (n - 1 + 2 eta) * T     (eta = 0.5 is CPMG)
udd         t_j = T * sin^2(j pi / (2 (n + 1)))
custom      arbitrary strictly increasing times
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import InvalidArgument

__all__ = [
    "PulseSequence",
    "free_evolution",
    "cpmg",
    "eta_family",
    "udd",
    "custom",
    "effective_rate",
    "fixed_rate",
    "pulses_for_rate",
    "default_phases",
]

FAMILIES = ("free", "cpmg", "udd", "eta", "custom")


def default_phases(n: int) -> tuple[float, ...]:
    """Alternating-pair phase pattern {+pi, +pi, -pi, -pi, ...}."""
    return tuple(math.pi if (k // 2) % 2 == 0 else -math.pi for k in range(n))


@dataclass(frozen=True)
class PulseSequence:
    """Ordered pi-pulse times within a total evolution time.

    Attributes
    ----------
    total_time : float
        Evolution time T in seconds.
    pulse_times : tuple of float
        Absolute pulse times, strictly inside (0, T) and strictly increasing.
    phases : tuple of float
        Pulse phases in radians (metadata).
    family : str
        One of ``free``, ``cpmg``, ``udd``, ``eta``, ``custom``.
    family_params : dict
        Constructor parameters (n, eta, ...) plus flags such as
        ``eta_in_range``.
    """

    total_time: float
    pulse_times: tuple[float, ...] = ()
    phases: tuple[float, ...] | None = None
    family: str = "custom"
    family_params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        T = float(self.total_time)
        if not math.isfinite(T) or T <= 0:
            raise InvalidArgument(f"total_time must be positive and finite, got {self.total_time!r}")
        times = tuple(float(x) for x in self.pulse_times)
        object.__setattr__(self, "total_time", T)
        object.__setattr__(self, "pulse_times", times)
        _check_times(times, T)
        if self.phases is None:
            object.__setattr__(self, "phases", default_phases(len(times)))
        else:
            phases = tuple(float(p) for p in self.phases)
            if len(phases) != len(times):
                raise InvalidArgument(
                    f"phases has {len(phases)} entries but there are {len(times)} pulses"
                )
            object.__setattr__(self, "phases", phases)
        if self.family not in FAMILIES:
            raise InvalidArgument(f"unknown family {self.family!r}")

    @property
    def n(self) -> int:
        return len(self.pulse_times)

    @property
    def times(self) -> np.ndarray:
        return np.asarray(self.pulse_times, dtype=float)

    @property
    def fractions(self) -> np.ndarray:
        return self.times / self.total_time

    def boundaries(self) -> np.ndarray:
        """Switching instants ``(0, t_1, ..., t_n, T)``."""
        out = np.empty(self.n + 2)
        out[0] = 0.0
        out[1:-1] = self.pulse_times
        out[-1] = self.total_time
        return out

    def coefficients(self) -> np.ndarray:
        """Weights c_j such that the sign-switched integral of any f is sum_j c_j f(b_j).

        With b = boundaries(), ``int_0^T s(u) g'(u) du = sum_j c_j g(b_j)``
        where s is +1 before the first pulse and flips at every pulse. The
        weights are (-1, 2, -2, 2, ..., (-1)^n) and always sum to zero.
        """
        n = self.n
        c = np.empty(n + 2)
        c[0] = -1.0
        c[1:-1] = 2.0 * np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
        c[-1] = 1.0 if n % 2 == 0 else -1.0
        return c

    def reversed(self) -> PulseSequence:
        """Time-reversed sequence ``t_k -> T - t_{n+1-k}``."""
        T = self.total_time
        rev = tuple(T - x for x in reversed(self.pulse_times))
        return PulseSequence(T, rev, tuple(reversed(self.phases)), "custom", {"reversed_from": self.family})

    def to_dict(self) -> dict:
        return {
            "schema": "ddkit/v1",
            "total_time_s": self.total_time,
            "pulse_times_s": list(self.pulse_times),
            "pulse_fractions": [x / self.total_time for x in self.pulse_times],
            "phases_rad": list(self.phases),
            "family": self.family,
            "family_params": dict(self.family_params),
        }

    @classmethod
    def from_dict(cls, data: dict) -> PulseSequence:
        try:
            T = data["total_time_s"]
            times = data.get("pulse_times_s", [])
        except (KeyError, TypeError) as exc:
            raise InvalidArgument(f"sequence descriptor missing field: {exc}") from None
        return cls(
            T,
            tuple(times),
            tuple(data["phases_rad"]) if data.get("phases_rad") is not None else None,
            data.get("family", "custom"),
            dict(data.get("family_params", {})),
        )


def _check_times(times, T):
    prev = 0.0
    for i, x in enumerate(times):
        if not math.isfinite(x):
            raise InvalidArgument(f"pulse {i} time is not finite: {x!r}")
        if x <= 0.0:
            raise InvalidArgument(f"pulse {i} at {x!r} is on or before the start boundary 0")
        if x >= T:
            raise InvalidArgument(f"pulse {i} at {x!r} is on or after the end boundary {T!r}")
        if i > 0 and x <= prev:
            raise InvalidArgument(
                f"pulse times not strictly increasing at index {i}: {prev!r} >= {x!r}"
            )
        prev = x


def _check_n(n):
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 1:
        raise InvalidArgument(f"pulse count must be a positive integer, got {n!r}")
    return int(n)


def _check_T(total_time):
    T = float(total_time)
    if not math.isfinite(T) or T <= 0:
        raise InvalidArgument(f"total_time must be positive, got {total_time!r}")
    return T


def free_evolution(total_time: float) -> PulseSequence:
    """No pulses (Ramsey / free induction)."""
    return PulseSequence(_check_T(total_time), (), (), "free", {"n": 0})


def cpmg(n: int, total_time: float) -> PulseSequence:
    n = _check_n(n)
    T = _check_T(total_time)
    k = np.arange(1, n + 1)
    times = (2 * k - 1) / (2 * n) * T
    return PulseSequence(T, tuple(times), None, "cpmg", {"n": n})


def eta_family(n: int, total_time: float, eta: float) -> PulseSequence:
    """Equally spaced interior pulses with edge gaps set by ``eta``.

    ``eta = 0.5`` reproduces CPMG exactly. Values outside [0.5, 1] are
    allowed (for scans) and flagged via ``family_params["eta_in_range"]``.
    """
    n = _check_n(n)
    T = _check_T(total_time)
    eta = float(eta)
    if not math.isfinite(eta) or eta <= 0:
        raise InvalidArgument(f"eta must be positive, got {eta!r}")
    i = np.arange(1, n + 1)
    if eta == 0.5:
        # same floating-point path as cpmg so the two agree bit for bit
        times = (2 * i - 1) / (2 * n) * T
    else:
        times = (eta + i - 1) / (n - 1 + 2 * eta) * T
    params = {"n": n, "eta": eta, "eta_in_range": 0.5 <= eta <= 1.0}
    return PulseSequence(T, tuple(times), None, "eta", params)


def udd(n: int, total_time: float) -> PulseSequence:
    n = _check_n(n)
    T = _check_T(total_time)
    j = np.arange(1, n + 1)
    times = T * np.sin(j * np.pi / (2 * (n + 1))) ** 2
    return PulseSequence(T, tuple(times), None, "udd", {"n": n})


def custom(pulse_times, total_time: float, phases=None) -> PulseSequence:
    T = _check_T(total_time)
    return PulseSequence(T, tuple(pulse_times), phases, "custom", {"n": len(pulse_times)})


def effective_rate(seq: PulseSequence) -> float:
    """Effective decoupling rate f_DD = n / (2T) in Hz."""
    return seq.n / (2.0 * seq.total_time)


def pulses_for_rate(f_dd: float, total_time: float) -> int:
    """Pulse count n = round(2 f_DD T), halves rounded up."""
    return int(math.floor(2.0 * f_dd * total_time + 0.5))


_BUILDERS = {"cpmg": cpmg, "udd": udd}


def fixed_rate(f_dd: float, family: str = "cpmg", eta: float | None = None) -> Callable[[float], PulseSequence]:
    """Sequence generator holding f_DD fixed while the total time varies.

    Returns ``t -> sequence`` with ``n = round(2 f_DD t)``; times where n
    rounds to zero give free evolution.
    """
    f_dd = float(f_dd)
    if not math.isfinite(f_dd) or f_dd < 0:
        raise InvalidArgument(f"f_dd must be non-negative, got {f_dd!r}")
    if family == "eta":
        if eta is None:
            raise InvalidArgument("eta family needs an eta value")
        build = lambda n, t: eta_family(n, t, eta)  # noqa: E731
    elif family in _BUILDERS:
        build = _BUILDERS[family]
    else:
        raise InvalidArgument(f"unknown family {family!r}")

    def generate(t: float) -> PulseSequence:
        n = pulses_for_rate(f_dd, t)
        return build(n, t) if n > 0 else free_evolution(t)

    generate.f_dd = f_dd
    generate.family = family
    return generate
