"""Pulse-timing optimization and sequence-family comparisons.

Timings are optimized with a plain Nelder-Mead simplex over unconstrained
coordinates. Ordering is built into the parametrization: with gaps

    g_k = T * softplus(x_k / T),   k = 0 .. n-1,     g_n fixed,
    t_i = T * (g_0 + ... + g_{i-1}) / (g_0 + ... + g_n),

every x in R^n gives strictly increasing pulse times inside (0, T). Fixing the
last gap removes the overall scale of the gaps, which the normalization makes
redundant.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import optimize as sopt

from . import sequences as seqs
from .decoherence import decay_exponent
from .errors import InvalidArgument
from .noise import BathModel
from .sequences import PulseSequence

__all__ = [
    "NelderMeadResult",
    "OptimizationResult",
    "EtaPoint",
    "ComparisonRow",
    "nelder_mead",
    "gaps_to_times",
    "times_to_coordinates",
    "eta_projection",
    "perturbed_sequence",
    "optimize_timings",
    "eta_scan",
    "compare_cpmg_udd",
]


@dataclass(frozen=True)
class NelderMeadResult:
    x: np.ndarray
    fun: float
    iterations: int
    evaluations: int
    converged: bool


def nelder_mead(
    func: Callable[[np.ndarray], float],
    x0,
    step: float | Sequence[float],
    *,
    max_iter: int = 10_000,
    xtol: float = 1e-8,
    ftol: float = 1e-12,
    alpha: float = 1.0,
    gamma: float = 2.0,
    rho: float = 0.5,
    sigma: float = 0.5,
) -> NelderMeadResult:
    """Minimize ``func`` with the Nelder-Mead downhill simplex.

    The initial simplex is ``x0`` plus ``step`` along each axis. Stops when
    the simplex diameter (max-norm distance of any vertex from the best one)
    is below ``xtol`` and the spread of objective values is below ``ftol``.
    Requiring both keeps a flat objective from stopping a wide simplex.
    """
    x0 = np.asarray(x0, dtype=float)
    dim = x0.size
    simplex = np.tile(x0, (dim + 1, 1))
    simplex[1:] += np.diag(np.broadcast_to(np.asarray(step, dtype=float), (dim,)))
    fvals = np.array([func(v) for v in simplex])
    nfev = dim + 1

    it = 0
    converged = False
    while True:
        order = np.argsort(fvals, kind="stable")
        simplex, fvals = simplex[order], fvals[order]
        if np.max(np.abs(simplex[1:] - simplex[0])) < xtol and fvals[-1] - fvals[0] < ftol:
            converged = True
            break
        if it >= max_iter:
            break
        it += 1
        centroid = simplex[:-1].mean(axis=0)
        worst = simplex[-1]
        xr = centroid + alpha * (centroid - worst)
        fr = func(xr)
        nfev += 1
        if fr < fvals[0]:
            xe = centroid + gamma * (xr - centroid)
            fe = func(xe)
            nfev += 1
            if fe < fr:
                simplex[-1], fvals[-1] = xe, fe
            else:
                simplex[-1], fvals[-1] = xr, fr
            continue
        if fr < fvals[-2]:
            simplex[-1], fvals[-1] = xr, fr
            continue
        # contraction: outside if the reflection helped at all, inside otherwise
        if fr < fvals[-1]:
            xc = centroid + rho * (xr - centroid)
        else:
            xc = centroid + rho * (worst - centroid)
        fc = func(xc)
        nfev += 1
        if fc < min(fr, fvals[-1]):
            simplex[-1], fvals[-1] = xc, fc
            continue
        simplex[1:] = simplex[0] + sigma * (simplex[1:] - simplex[0])
        fvals[1:] = [func(v) for v in simplex[1:]]
        nfev += dim
    return NelderMeadResult(simplex[0].copy(), float(fvals[0]), it, nfev, converged)


def _softplus(x):
    return np.logaddexp(0.0, x)


def _softplus_inv(y):
    return y + np.log(-np.expm1(-y))


def gaps_to_times(x, last_gap: float, total_time: float) -> np.ndarray:
    """Pulse times from unconstrained coordinates (see module docstring)."""
    T = total_time
    g = np.empty(len(x) + 1)
    g[:-1] = T * _softplus(np.asarray(x, dtype=float) / T)
    g[-1] = last_gap
    cum = np.cumsum(g)
    return T * cum[:-1] / cum[-1]


def times_to_coordinates(seq: PulseSequence) -> tuple[np.ndarray, float]:
    """Inverse of :func:`gaps_to_times`: coordinates and the fixed last gap."""
    T = seq.total_time
    gaps = np.diff(seq.boundaries())
    return T * _softplus_inv(gaps[:-1] / T), float(gaps[-1])


def eta_projection(seq: PulseSequence) -> tuple[float, float]:
    """Closest member of the eta family in the least-squares sense.

    Returns ``(eta, residual)`` where the residual is the largest per-pulse
    timing difference divided by the total time.
    """
    n = seq.n
    if n < 1:
        raise InvalidArgument("eta projection needs at least one pulse")
    frac = seq.fractions
    i = np.arange(1, n + 1)

    def fam(eta):
        return (eta + i - 1) / (n - 1 + 2 * eta)

    res = sopt.minimize_scalar(
        lambda e: float(np.sum((fam(e) - frac) ** 2)),
        bounds=(1e-6, 2.0),
        method="bounded",
        options={"xatol": 1e-10},
    )
    eta = float(res.x)
    return eta, float(np.max(np.abs(fam(eta) - frac)))


def perturbed_sequence(seq: PulseSequence, scale: float, rng: np.random.Generator) -> PulseSequence:
    """Multiply every gap by exp(scale * N(0, 1)), then rescale to the total time."""
    gaps = np.diff(seq.boundaries()) * np.exp(scale * rng.standard_normal(seq.n + 1))
    times = seq.total_time * np.cumsum(gaps)[:-1] / gaps.sum()
    return seqs.custom(tuple(times), seq.total_time)


@dataclass(frozen=True)
class OptimizationResult:
    best_sequence: PulseSequence
    best_coherence: float
    iterations: int
    converged: bool
    eta_equivalent: float | None
    eta_residual: float | None
    evaluations: int = 0
    restarts: int = 0

    def to_dict(self) -> dict:
        return {
            "schema": "ddkit/v1",
            "best_sequence": self.best_sequence.to_dict(),
            "best_coherence": self.best_coherence,
            "iterations": self.iterations,
            "evaluations": self.evaluations,
            "restarts": self.restarts,
            "converged": self.converged,
            "eta_equivalent": self.eta_equivalent,
            "eta_residual": self.eta_residual,
        }


def _seed(n, T, seed_sequence):
    if isinstance(seed_sequence, PulseSequence):
        if seed_sequence.n != n or seed_sequence.total_time != T:
            raise InvalidArgument("seed sequence does not match n and total_time")
        return seed_sequence
    if seed_sequence == "cpmg":
        return seqs.cpmg(n, T)
    if seed_sequence == "udd":
        return seqs.udd(n, T)
    raise InvalidArgument(f"unknown seed sequence {seed_sequence!r}")


def optimize_timings(
    n: int,
    total_time: float,
    bath: BathModel,
    tol: float = 1e-10,
    max_iter: int = 50_000,
    *,
    seed_sequence: str | PulseSequence = "cpmg",
    max_restarts: int = 20,
    method: str = "auto",
) -> OptimizationResult:
    """Maximize C over pulse timings for ``n`` pulses in ``total_time``.

    Minimizes the exponent -ln C from the seed sequence, restarting the
    simplex around the incumbent until a restart no longer improves the
    objective by more than the objective-spread tolerance. ``method`` is
    passed to :func:`decay_exponent`; ``auto`` uses the closed time-domain
    form for Lorentzian baths, which is what makes 70-pulse runs cheap.
    """
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 1:
        raise InvalidArgument(f"n must be a positive integer, got {n!r}")
    T = float(total_time)
    seed = _seed(int(n), T, seed_sequence)
    x, last_gap = times_to_coordinates(seed)
    ftol = 1e-10

    def objective(v):
        return decay_exponent(
            seqs.PulseSequence(T, tuple(gaps_to_times(v, last_gap, T)), None, "custom"),
            bath,
            max(tol, 1e-12) if method == "quadrature" else 1e-8,
            method=method,
        ).value

    start_val = objective(x)
    best_x, best_f = x, start_val
    iterations = evaluations = restarts = 0
    converged = False
    budget = max_iter
    for restarts in range(max_restarts + 1):
        r = nelder_mead(objective, best_x, 0.01 * T, max_iter=budget, xtol=1e-6 * T, ftol=ftol)
        iterations += r.iterations
        evaluations += r.evaluations
        budget -= r.iterations
        improved = best_f - r.fun
        if r.fun < best_f:
            best_x, best_f = r.x, r.fun
        converged = r.converged
        if not converged or budget <= 0 or improved <= ftol:
            break

    times = gaps_to_times(best_x, last_gap, T)
    if np.any(np.diff(times) <= 0) or times[0] <= 0 or times[-1] >= T:
        raise AssertionError("optimizer produced unordered pulse times")
    best = seqs.custom(tuple(times), T)
    if best_f > start_val:
        best, best_f = seed, start_val
    eta, resid = eta_projection(best)
    return OptimizationResult(
        best, math.exp(-best_f), iterations, converged, eta, resid, evaluations, restarts
    )


@dataclass(frozen=True)
class EtaPoint:
    eta: float
    tau_c: float
    coherence: float


def _tau_from_exponent(chi, T):
    return math.inf if chi == 0 else T / chi


def eta_scan(
    n: int,
    total_time: float,
    bath: BathModel,
    eta_grid: Sequence[float],
    tol: float = 1e-10,
    *,
    method: str = "quadrature",
    workers: int = 1,
) -> list[EtaPoint]:
    """Coherence and coherence time across the eta family at fixed n and T.

    With C(T) = exp(-T / tau_c), the coherence time at the evaluation time
    is tau_c = T / chi.
    """
    grid = [float(e) for e in eta_grid]
    if any(not (0.0 < e <= 2.0) for e in grid):
        raise InvalidArgument("eta grid values must lie in (0, 2]")

    def point(eta):
        chi = decay_exponent(seqs.eta_family(n, total_time, eta), bath, tol, method=method).value
        return EtaPoint(eta, _tau_from_exponent(chi, total_time), math.exp(-chi))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(point, grid))
    return [point(e) for e in grid]


@dataclass(frozen=True)
class ComparisonRow:
    n: int
    tau_c_cpmg: float
    tau_c_udd: float

    @property
    def udd_deficit(self) -> float:
        """Fractional shortfall of UDD relative to CPMG."""
        return 1.0 - self.tau_c_udd / self.tau_c_cpmg


def compare_cpmg_udd(
    n_values: Sequence[int],
    total_time: float,
    bath: BathModel,
    tol: float = 1e-10,
    *,
    method: str = "quadrature",
    workers: int = 1,
) -> list[ComparisonRow]:
    """Coherence times of CPMG and UDD with the same pulse count, bath and time."""
    ns = [int(n) for n in n_values]
    if any(n < 1 for n in ns):
        raise InvalidArgument("pulse counts must be >= 1")

    def row(n):
        taus = []
        for build in (seqs.cpmg, seqs.udd):
            chi = decay_exponent(build(n, total_time), bath, tol, method=method).value
            taus.append(_tau_from_exponent(chi, total_time))
        return ComparisonRow(n, *taus)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(row, ns))
    return [row(n) for n in ns]
