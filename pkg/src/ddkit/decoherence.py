"""Filter functions, the Gaussian-phase coherence integral and coherence times.

For a pulse sequence with switching instants b = (0, t_1, ..., t_n, T) the
filter function is

    F(omega) = 1/2 |sum_k (-1)^k (exp(i omega b_{k+1}) - exp(i omega b_k))|^2
             = 1/2 |sum_j c_j exp(i omega b_j)|^2,   c = (-1, 2, -2, ..., (-1)^n)

and the ensemble coherence at the end of the sequence is C = exp(-chi) with

    chi = int_0^inf S(omega) F(omega) / (pi omega^2) domega.

``chi`` is computed by adaptive Gauss-Kronrod quadrature on [0, Omega] plus an
analytic high-frequency tail. For Lorentzian baths the same exponent also has
a closed time-domain form, chi = Var(phi) / 2, available as ``method="exact"``.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import optimize as sopt

from . import quadrature
from .errors import FitFailure, InvalidArgument, NotFound, NumericFailure
from .noise import BathModel, LorentzianBath
from .sequences import PulseSequence

__all__ = [
    "CoherenceCurve",
    "CoherenceTime",
    "Exponent",
    "SigmaFit",
    "filter_function",
    "filter_over_omega_sq",
    "integrand",
    "decay_exponent",
    "coherence",
    "coherence_curve",
    "free_decay_3d",
    "free_decay_3d_time",
    "FREE_DECAY_3D_FACTOR",
    "coherence_time",
    "tau_c_delta_approx",
    "fit_sigma_delta",
]

E_INV = math.exp(-1.0)
# "measured" tags externally supplied data such as a Ramsey record
CURVE_METHODS = ("analytic", "quadrature", "monte_carlo", "measured")
# C(tau_1) = 1/e for C(t) = [1 + (sigma t)^2 / 3]^(-3/2)
FREE_DECAY_3D_FACTOR = math.sqrt(3.0 * (math.exp(2.0 / 3.0) - 1.0))

# below this omega*T the integrand uses its Taylor expansion
_SMALL_OMEGA_T = 1e-4
# asymptotic tail terms kept before bounding the remainder
_TAIL_ORDER = 4
_MESH_CHUNK = 2048


# ---------------------------------------------------------------------------
# filter function


def _phase_sum(b, c, omega):
    w = np.asarray(omega, dtype=float)
    return np.exp(1j * w[..., None] * b) @ c


def filter_function(seq: PulseSequence, omega):
    """F(omega) for a pulse sequence; even in omega, F(0) = 0."""
    z = _phase_sum(seq.boundaries(), seq.coefficients(), omega)
    out = 0.5 * (z.real**2 + z.imag**2)
    return out if np.ndim(out) else float(out)


def _moments(b, c, pmax=5):
    return np.array([np.sum(c * b**p) for p in range(1, pmax + 1)])


def _small_omega_series(moments, omega):
    # z / omega = i sum_{p>=1} (i omega)^(p-1) M_p / p!
    acc = np.zeros(np.shape(omega), dtype=complex)
    for p in range(len(moments), 0, -1):
        acc = acc * (1j * omega) + moments[p - 1] / math.factorial(p)
    return 0.5 * np.abs(acc) ** 2


def _f_over_w2(b, c, omega):
    w = np.asarray(omega, dtype=float)
    T = b[-1]
    out = np.empty(w.shape)
    small = np.abs(w) * T < _SMALL_OMEGA_T
    big = ~small
    if np.any(big):
        z = _phase_sum(b, c, w[big])
        out[big] = 0.5 * (z.real**2 + z.imag**2) / w[big] ** 2
    if np.any(small):
        out[small] = _small_omega_series(_moments(b, c), w[small])
    return out


def filter_over_omega_sq(seq: PulseSequence, omega):
    """F(omega) / omega^2 with the removable singularity at 0 handled by series.

    The limit at omega -> 0 is ``(sum_j c_j b_j)^2 / 2``.
    """
    out = _f_over_w2(seq.boundaries(), seq.coefficients(), omega)
    return out if np.ndim(out) else float(out)


def integrand(seq: PulseSequence, bath: BathModel, omega):
    """S(omega) F(omega) / (pi omega^2)."""
    w = np.asarray(omega, dtype=float)
    out = bath.spectrum(w) * _f_over_w2(seq.boundaries(), seq.coefficients(), w) / math.pi
    return out if np.ndim(out) else float(out)


# ---------------------------------------------------------------------------
# coherence exponent


@dataclass(frozen=True)
class Exponent:
    """Decay exponent chi with C = exp(-chi)."""

    value: float
    error: float
    method: str
    omega_max: float = math.nan
    panels: int = 0


def _pair_terms(b, c):
    j, k = np.triu_indices(len(b), 1)
    return b[k] - b[j], c[j] * c[k]


def _tail(bath, omega_max, b, c):
    """Analytic integral of the integrand over [omega_max, inf) and its error bound."""
    integral, h = bath.tail_envelope(omega_max, _TAIL_ORDER)
    mean_part = 0.5 * np.sum(c * c) * integral
    d, w = _pair_terms(b, c)
    if d.size == 0:
        return mean_part, 0.0
    phase = np.exp(1j * omega_max * d)
    series = np.zeros(d.shape, dtype=complex)
    for m in range(_TAIL_ORDER):
        series += (-1) ** m * h[m] / (1j * d) ** (m + 1)
    osc = float(np.sum(w * (-phase * series).real))
    bound = 4.0 * abs(h[_TAIL_ORDER]) * float(np.sum(np.abs(w) / d ** (_TAIL_ORDER + 1)))
    return mean_part + osc, bound


def _tail_bound(bath, omega_max, abs_w_over_d):
    _, h = bath.tail_envelope(omega_max, _TAIL_ORDER)
    return 4.0 * abs(h[_TAIL_ORDER]) * abs_w_over_d


def _choose_cutoff(bath, b, c, budget):
    T = b[-1]
    n = len(b) - 2
    d, w = _pair_terms(b, c)
    s = float(np.sum(np.abs(w) / d ** (_TAIL_ORDER + 1)))
    omega = max(8.0 * math.pi * (n + 1) / T, bath.tail_onset, 1.0 / T)
    for _ in range(200):
        if _tail_bound(bath, omega, s) <= budget:
            return omega
        omega *= 1.5
    raise NumericFailure("could not find a quadrature cutoff meeting the tail tolerance")


def _mesh_values(bath, b, c, w0, panels):
    """Integrand on the K15 nodes of the uniform mesh [p w0, (p+1) w0].

    exp(i (p w0 + x) b_j) factorises into a panel part and a node part, so
    the phase sums over all panels reduce to one matrix product per chunk.
    """
    x = 0.5 * (quadrature.NODES + 1.0) * w0
    node_part = np.exp(1j * np.outer(b, x)) * c[:, None]
    out = np.empty((panels, x.size))
    moments = None
    T = b[-1]
    for start in range(0, panels, _MESH_CHUNK):
        p = np.arange(start, min(panels, start + _MESH_CHUNK))
        z = np.exp(1j * np.outer(p * w0, b)) @ node_part
        omega = p[:, None] * w0 + x[None, :]
        vals = 0.5 * (z.real**2 + z.imag**2)
        small = omega * T < _SMALL_OMEGA_T
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = vals / omega**2
        if np.any(small):
            if moments is None:
                moments = _moments(b, c)
            vals[small] = _small_omega_series(moments, omega[small])
        out[p] = bath.spectrum(omega) * vals / math.pi
    return out


def _exponent_quadrature(seq, bath, tol, omega_max=None, filter_func=None):
    b = seq.boundaries()
    c = seq.coefficients()
    T = seq.total_time
    w0 = math.pi / (4.0 * T)

    finite = math.isfinite(bath.cutoff)
    if finite:
        # spectrum vanishes above the cutoff, so there is no tail
        if omega_max is not None and omega_max < bath.cutoff:
            raise InvalidArgument("omega_max below the bath cutoff would drop spectral weight")
        omega_cut = bath.cutoff
    else:
        omega_cut = omega_max if omega_max is not None else _choose_cutoff(bath, b, c, tol / 10.0)
        if omega_cut < bath.tail_onset:
            raise InvalidArgument(
                f"omega_max must exceed {bath.tail_onset:g} rad/s for the analytic tail"
            )

    panels = max(1, math.ceil(omega_cut / w0 - 1e-9))
    edges = np.arange(panels + 1) * w0
    if finite:
        edges[-1] = omega_cut
        tail_value, tail_err = 0.0, 0.0
    else:
        tail_value, tail_err = _tail(bath, edges[-1], b, c)
    uniform = edges[-1] == panels * w0

    if filter_func is None:
        func = lambda w: bath.spectrum(w) * _f_over_w2(b, c, w) / math.pi  # noqa: E731
        initial = _mesh_values(bath, b, c, w0, panels) if uniform else None
    else:
        def func(w):
            w = np.asarray(w, dtype=float)
            with np.errstate(divide="ignore", invalid="ignore"):
                f = np.where(w > 0, filter_func(w) / w**2, 0.0)
            return bath.spectrum(w) * f / math.pi
        initial = None

    quad_tol = max(tol - tail_err, 0.5 * tol)
    try:
        res = quadrature.integrate(func, edges, quad_tol, initial_values=initial)
    except NumericFailure as exc:
        raise NumericFailure(
            str(exc),
            estimate=exc.estimate + tail_value,
            error_bound=exc.error_bound + tail_err,
        ) from None
    value = res.value + tail_value
    error = res.error + tail_err
    if error > tol:
        raise NumericFailure(
            f"coherence exponent error bound {error:.3g} exceeds tol {tol:.3g}",
            estimate=value,
            error_bound=error,
        )
    return Exponent(float(value), float(error), "quadrature", float(edges[-1]), res.panels)


def _segment_integrals(length, g):
    """(int over a segment of exp(-g u), double integral of exp(-g|u-v|) over the segment)."""
    x = g * length
    single = np.where(x > 0, -np.expm1(-x) / np.where(g > 0, g, 1.0), length)
    small = x < 1e-3
    xs = np.where(small, x, 0.0)
    diag_small = length**2 * (1.0 - xs / 3.0 + xs**2 / 12.0 - xs**3 / 60.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        diag_big = 2.0 * (np.expm1(-x) + x) / (g * g)
    return single, np.where(small, diag_small, diag_big)


def _exponent_lorentzian_exact(seq: PulseSequence, bath: LorentzianBath) -> float:
    """chi = (1/2) int int s(u) s(v) sigma^2 exp(-Gamma |u - v|) du dv, segment by segment."""
    b = seq.boundaries()
    length = np.diff(b)
    g = bath.gamma
    sign = np.where(np.arange(length.size) % 2 == 0, 1.0, -1.0)
    single, diag = _segment_integrals(length, g)
    decay = np.exp(-g * length)
    sa = sign * single
    running = 0.0
    cross = 0.0
    for k in range(length.size):
        cross += sa[k] * running
        running = running * decay[k] + sa[k]
    var = bath.sigma_delta**2 * (diag.sum() + 2.0 * cross)
    return 0.5 * var


def decay_exponent(
    seq: PulseSequence,
    bath: BathModel,
    tol: float = 1e-8,
    *,
    omega_max: float | None = None,
    method: str = "quadrature",
    filter_func: Callable | None = None,
) -> Exponent:
    """Coherence exponent chi for ``seq`` under ``bath``.

    Parameters
    ----------
    tol : float
        Absolute error target on chi, in (0, 1e-3].
    omega_max : float, optional
        Override the automatically chosen quadrature cutoff.
    method : {"quadrature", "exact", "auto"}
        ``exact`` uses the closed time-domain form (Lorentzian baths only);
        ``auto`` picks it when available.
    filter_func : callable, optional
        Replace the complex-sum filter function with another vectorized
        F(omega), e.g. a symbolic closed form.
    """
    if not (0.0 < tol <= 1e-3):
        raise InvalidArgument(f"tol must lie in (0, 1e-3], got {tol!r}")
    if method == "auto":
        method = "exact" if isinstance(bath, LorentzianBath) and filter_func is None else "quadrature"
    if bath.variance == 0.0 and filter_func is None:
        return Exponent(0.0, 0.0, method)
    if method == "exact":
        if not isinstance(bath, LorentzianBath):
            raise InvalidArgument("exact exponent is only available for Lorentzian baths")
        return Exponent(_exponent_lorentzian_exact(seq, bath), 1e-14, "exact")
    if method != "quadrature":
        raise InvalidArgument(f"unknown method {method!r}")
    return _exponent_quadrature(seq, bath, tol, omega_max, filter_func)


def coherence(seq: PulseSequence, bath: BathModel, tol: float = 1e-8, **kwargs) -> float:
    """Ensemble coherence C = exp(-chi) at the end of ``seq``."""
    return math.exp(-decay_exponent(seq, bath, tol, **kwargs).value)


# ---------------------------------------------------------------------------
# curves and coherence times


@dataclass(frozen=True)
class CoherenceCurve:
    times: tuple
    values: tuple
    method: str
    params: dict = field(default_factory=dict, compare=False)
    errors: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "times", tuple(float(t) for t in self.times))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if len(self.times) != len(self.values):
            raise InvalidArgument("times and values differ in length")
        if self.method not in CURVE_METHODS:
            raise InvalidArgument(f"unknown curve method {self.method!r}")
        if self.errors is not None:
            object.__setattr__(self, "errors", tuple(float(e) for e in self.errors))

    @property
    def t(self) -> np.ndarray:
        return np.asarray(self.times)

    @property
    def c(self) -> np.ndarray:
        return np.asarray(self.values)


@dataclass(frozen=True)
class CoherenceTime:
    tau_c: float
    method: str
    fit_residual: float = math.nan
    lower_bound: bool = False


def coherence_curve(
    seq_family: Callable[[float], PulseSequence],
    bath: BathModel,
    times: Sequence[float],
    tol: float = 1e-8,
    *,
    method: str = "quadrature",
    workers: int = 1,
    omega_max: float | None = None,
) -> CoherenceCurve:
    """Sample C(t) with ``seq_family(t)`` supplying the sequence at each time."""
    ts = [float(t) for t in times]
    if any(t < 0 for t in ts) or any(b < a for a, b in zip(ts, ts[1:])):
        raise InvalidArgument("times must be non-negative and ascending")

    def point(t):
        if t == 0.0:
            return 1.0
        return coherence(seq_family(t), bath, tol, method=method, omega_max=omega_max)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(point, ts))
    else:
        values = [point(t) for t in ts]
    params = {"bath": bath.to_dict() if hasattr(bath, "to_dict") else repr(bath)}
    if hasattr(seq_family, "f_dd"):
        params["f_dd_hz"] = seq_family.f_dd
        params["family"] = seq_family.family
    exact = method == "exact" or (method == "auto" and isinstance(bath, LorentzianBath))
    curve_method = "analytic" if exact else "quadrature"
    return CoherenceCurve(ts, values, curve_method, params)


def free_decay_3d(sigma_delta, t):
    """Collisionless free decay in a 3D harmonic trap, [1 + (sigma t)^2 / 3]^(-3/2)."""
    x = np.asarray(sigma_delta, dtype=float) * np.asarray(t, dtype=float)
    out = (1.0 + x * x / 3.0) ** -1.5
    return out if np.ndim(out) else float(out)


def free_decay_3d_time(sigma_delta: float) -> float:
    """1/e time of :func:`free_decay_3d`, about 1.69 / sigma."""
    if sigma_delta <= 0:
        return math.inf
    return FREE_DECAY_3D_FACTOR / sigma_delta


def _exp_fit(t, c):
    t = np.asarray(t, dtype=float)
    c = np.asarray(c, dtype=float)
    if np.count_nonzero(c < 0.9) < 4:
        raise FitFailure("exponential fit needs at least 4 points with C < 0.9")
    pos = (c > 0) & (t > 0)
    # log-linear start, then least squares on C itself
    guess = -np.sum(t[pos] ** 2) / np.sum(t[pos] * np.log(c[pos])) if np.any(pos) else t.max()
    if not np.isfinite(guess) or guess <= 0:
        guess = float(t.max())
    res = sopt.least_squares(
        lambda p: np.exp(-t / np.exp(p[0])) - c, [math.log(guess)], x_scale=1.0, xtol=1e-12, ftol=1e-14
    )
    tau = float(np.exp(res.x[0]))
    rms = float(np.sqrt(np.mean(res.fun**2)))
    return tau, rms


def _root_from_samples(t, c):
    t = np.asarray(t, dtype=float)
    c = np.asarray(c, dtype=float)
    below = np.nonzero(c < E_INV)[0]
    if below.size == 0:
        raise NotFound("curve never drops below 1/e", last_value=float(c[-1]))
    i = below[0]
    if i == 0:
        return float(t[0])
    # linear interpolation in ln C
    y0, y1 = math.log(max(c[i - 1], 1e-300)), math.log(max(c[i], 1e-300))
    return float(t[i - 1] + (t[i] - t[i - 1]) * (-1.0 - y0) / (y1 - y0))


def _root_bisect(evaluator, t_start, t_max, rtol):
    lo, hi = 0.0, t_start
    c_hi = evaluator(hi)
    while c_hi >= E_INV:
        lo = hi
        if hi >= t_max:
            raise NotFound(f"C stays above 1/e up to t_max={t_max:g}", last_value=c_hi)
        hi = min(2.0 * hi, t_max)
        c_hi = evaluator(hi)
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if evaluator(mid) >= E_INV:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def coherence_time(
    source,
    method: str = "root_e_crossing",
    *,
    t_max: float = 1e3,
    t_start: float | None = None,
    rtol: float = 1e-4,
    fit_points: int = 12,
) -> CoherenceTime:
    """Coherence time from a sampled curve or from an evaluator ``t -> C(t)``.

    ``root_e_crossing`` solves C(tau) = 1/e (bisection on an evaluator,
    log-linear interpolation on a curve). ``exponential_fit`` least-squares
    fits exp(-t / tau) to the curve; for an evaluator it first locates the
    1/e crossing and then fits ``fit_points`` samples on [tau/8, 2 tau].
    """
    if method not in ("root_e_crossing", "exponential_fit"):
        raise InvalidArgument(f"unknown method {method!r}")
    if isinstance(source, CoherenceCurve):
        if method == "root_e_crossing":
            return CoherenceTime(_root_from_samples(source.t, source.c), method)
        tau, rms = _exp_fit(source.t, source.c)
        return CoherenceTime(tau, method, rms)
    if not callable(source):
        raise InvalidArgument("source must be a CoherenceCurve or a callable t -> C")
    start = t_start if t_start is not None else t_max * 1e-6
    root = _root_bisect(source, start, t_max, rtol)
    if method == "root_e_crossing":
        return CoherenceTime(root, method)
    ts = np.linspace(root / 8.0, 2.0 * root, fit_points)
    cs = np.array([source(t) for t in ts])
    tau, rms = _exp_fit(ts, cs)
    return CoherenceTime(tau, method, rms)


def tau_c_delta_approx(f_dd: float, bath: LorentzianBath) -> float:
    """Order-of-magnitude coherence time 1 / S(2 pi f_DD).

    Grows as f_DD^2 / (sigma^2 Gamma) once 2 pi f_DD >> Gamma and saturates
    at Gamma / (2 sigma^2) as f_DD -> 0.
    """
    if not (f_dd > 0):
        raise InvalidArgument(f"f_dd must be positive, got {f_dd!r}")
    s = bath.spectrum(2.0 * math.pi * f_dd)
    return math.inf if s == 0 else 1.0 / s


@dataclass(frozen=True)
class SigmaFit:
    sigma_delta: float
    residual: float


def fit_sigma_delta(curve: CoherenceCurve) -> SigmaFit:
    """Least-squares fit of the collisionless 3D-trap free decay to a measured curve."""
    t = curve.t
    c = curve.c
    if t.size < 4:
        raise FitFailure("need at least 4 samples to fit sigma_delta")
    if np.min(c) > 0.9:
        raise FitFailure("curve does not decay (min C > 0.9); sigma_delta is unconstrained")
    running_min = np.minimum.accumulate(c)
    if np.any(c - running_min > 0.1):
        raise FitFailure("curve is not monotone decreasing")
    guess_t = _root_from_samples(t, c) if np.min(c) < E_INV else t[np.argmin(c)]
    guess = FREE_DECAY_3D_FACTOR / max(guess_t, 1e-300)
    res = sopt.least_squares(
        lambda p: free_decay_3d(np.exp(p[0]), t) - c, [math.log(guess)], xtol=1e-14, ftol=1e-15
    )
    return SigmaFit(float(np.exp(res.x[0])), float(np.sqrt(np.mean(res.fun**2))))
