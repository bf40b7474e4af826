"""Seeded Monte Carlo ensemble of dephasing atoms.

Each atom carries a detuning that is piecewise constant in time and fully
redrawn from its stationary distribution at Poisson events of rate Gamma.
Full resampling gives the autocorrelation sigma^2 exp(-Gamma |tau|) exactly.
Phases are integrated event by event with no time step: with D(u) the
running integral of the detuning, the sign-switched phase at the end of a
sequence with boundaries b_j is sum_j c_j D(b_j).

Reproducibility
---------------
Atom ``a`` draws everything from its own stream
``SeedSequence(seed, spawn_key=(a,))``. Atoms are processed in fixed blocks
and block partial sums are reduced in block order, so results are a pure
function of (seed, config, inputs) whatever the number of workers.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .decoherence import E_INV, CoherenceCurve, _exp_fit
from .errors import FitFailure, InvalidArgument
from .sequences import PulseSequence, fixed_rate, free_evolution

__all__ = [
    "EnsembleConfig",
    "AtomState",
    "SimulationResult",
    "PhaseDistribution",
    "AutocorrelationEstimate",
    "TauScanPoint",
    "BLOCK_SIZE",
    "sample_detuning",
    "atom_rng",
    "simulate",
    "simulate_atom",
    "detuning_autocorrelation",
    "phase_distribution",
    "tau_c_scan",
]

ENERGY_MODELS = ("gamma3", "gaussian")
# atoms per reduction block; part of the reproducibility contract
BLOCK_SIZE = 512


@dataclass(frozen=True)
class EnsembleConfig:
    """Ensemble parameters.

    ``gamma`` is the detuning correlation decay rate (resampling rate), not
    the collision rate; see :func:`ddkit.noise.collision_rate_to_gamma`.
    """

    n_atoms: int
    sigma_delta: float
    gamma: float
    seed: int = 0
    energy_model: str = "gamma3"

    def __post_init__(self):
        if isinstance(self.n_atoms, bool) or int(self.n_atoms) != self.n_atoms or self.n_atoms < 1:
            raise InvalidArgument(f"n_atoms must be a positive integer, got {self.n_atoms!r}")
        if not (math.isfinite(self.sigma_delta) and self.sigma_delta >= 0):
            raise InvalidArgument(f"sigma_delta must be >= 0, got {self.sigma_delta!r}")
        if not (math.isfinite(self.gamma) and self.gamma >= 0):
            raise InvalidArgument(f"gamma must be >= 0, got {self.gamma!r}")
        if not (0 <= int(self.seed) < 2**64):
            raise InvalidArgument("seed must fit in 64 unsigned bits")
        if self.energy_model not in ENERGY_MODELS:
            raise InvalidArgument(f"energy_model must be one of {ENERGY_MODELS}")
        object.__setattr__(self, "n_atoms", int(self.n_atoms))
        object.__setattr__(self, "seed", int(self.seed))

    def to_dict(self) -> dict:
        return {
            "schema": "ddkit/v1",
            "n_atoms": self.n_atoms,
            "sigma_delta_rad_s": self.sigma_delta,
            "gamma_per_s": self.gamma,
            "seed": self.seed,
            "energy_model": self.energy_model,
        }


@dataclass
class AtomState:
    """Instantaneous state of one simulated atom."""

    detuning: float
    phase: float = 0.0
    sign: int = 1
    rng_stream: int = 0

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise InvalidArgument("sign must be +1 or -1")

    def advance(self, dt: float) -> None:
        self.phase += self.sign * self.detuning * dt

    def flip(self) -> None:
        self.sign = -self.sign


def atom_rng(seed: int, atom: int) -> np.random.Generator:
    """Independent generator for one atom, derived from the master seed."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(atom,))))


def sample_detuning(config: EnsembleConfig, rng: np.random.Generator, size=None):
    """Draw detunings with zero mean and standard deviation sigma_delta.

    ``gamma3``: delta = (sigma / sqrt 3) (E - 3) with E ~ Gamma(3, 1), the
    thermal energy distribution of a 3D harmonic oscillator in units of kT.
    Its characteristic function reproduces [1 + (sigma t)^2 / 3]^(-3/2).
    ``gaussian``: delta ~ N(0, sigma^2).
    """
    s = config.sigma_delta
    if config.energy_model == "gamma3":
        return (s / math.sqrt(3.0)) * (rng.gamma(3.0, 1.0, size) - 3.0)
    return s * rng.standard_normal(size)


def _draw_history(config, rng, t_end):
    """Event times (with a leading 0) and the detuning on each interval."""
    k = rng.poisson(config.gamma * t_end) if config.gamma > 0 else 0
    events = np.empty(k + 1)
    events[0] = 0.0
    events[1:] = np.sort(rng.uniform(0.0, t_end, k))
    return events, sample_detuning(config, rng, k + 1)


def _cumulative_phase(events, detuning, query):
    """Running integral D(u) of the piecewise-constant detuning at ``query``."""
    acc = np.empty(events.size)
    acc[0] = 0.0
    np.cumsum(detuning[:-1] * np.diff(events), out=acc[1:])
    idx = np.searchsorted(events, query, side="right") - 1
    return acc[idx] + detuning[idx] * (query - events[idx])


@dataclass(frozen=True)
class _Plan:
    """Flattened boundaries and weights of all sampled sequences."""

    query: np.ndarray
    weights: np.ndarray
    owner: np.ndarray
    n_times: int
    t_end: float


def _plan(sequences: Sequence[PulseSequence | None], t_end: float) -> _Plan:
    q, w, o = [], [], []
    for i, seq in enumerate(sequences):
        if seq is None:  # t = 0
            continue
        b = seq.boundaries()
        q.append(b)
        w.append(seq.coefficients())
        o.append(np.full(b.size, i))
    if not q:
        empty = np.empty(0)
        return _Plan(empty, empty, np.empty(0, dtype=int), len(sequences), t_end)
    return _Plan(np.concatenate(q), np.concatenate(w), np.concatenate(o), len(sequences), t_end)


def _atom_phases(config, atom, plan):
    rng = atom_rng(config.seed, atom)
    events, detuning = _draw_history(config, rng, plan.t_end)
    d = _cumulative_phase(events, detuning, plan.query)
    return np.bincount(plan.owner, weights=plan.weights * d, minlength=plan.n_times)


def _block_stats(args):
    """Per-block sums: sum e^{i phi}, sum e^{2 i phi}, and phase mean / M2."""
    config, plan, start, stop = args
    phi = np.empty((stop - start, plan.n_times))
    for row, atom in enumerate(range(start, stop)):
        phi[row] = _atom_phases(config, atom, plan)
    z = np.exp(1j * phi)
    mean = phi.mean(axis=0)
    m2 = np.sum((phi - mean) ** 2, axis=0)
    return stop - start, z.sum(axis=0), (z * z).sum(axis=0), mean, m2


def _run_blocks(config, plan, workers):
    bounds = [(s, min(s + BLOCK_SIZE, config.n_atoms)) for s in range(0, config.n_atoms, BLOCK_SIZE)]
    jobs = [(config, plan, a, b) for a, b in bounds]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(_block_stats, jobs))
    else:
        blocks = [_block_stats(j) for j in jobs]

    counts = np.array([b[0] for b in blocks], dtype=float)
    s1 = np.sum(np.stack([b[1] for b in blocks]), axis=0)
    s2 = np.sum(np.stack([b[2] for b in blocks]), axis=0)
    # Chan et al. pairwise merge of block means and M2, in block order
    n_acc, mean_acc, m2_acc = 0.0, np.zeros(plan.n_times), np.zeros(plan.n_times)
    for nb, (_, _, _, mean_b, m2_b) in zip(counts, blocks):
        delta = mean_b - mean_acc
        tot = n_acc + nb
        mean_acc = mean_acc + delta * nb / tot
        m2_acc = m2_acc + m2_b + delta**2 * n_acc * nb / tot
        n_acc = tot
    return s1, s2, m2_acc / n_acc


@dataclass(frozen=True)
class SimulationResult:
    coherence_curve: CoherenceCurve
    phase_variance: tuple
    statistical_error: tuple
    config: EnsembleConfig = field(compare=False, default=None)

    def to_rows(self) -> list[dict]:
        c = self.coherence_curve
        return [
            {"time_s": t, "coherence": v, "stat_err": e, "phase_var": p}
            for t, v, e, p in zip(c.times, c.values, self.statistical_error, self.phase_variance)
        ]


def _sequences_for(seq_family, times):
    out = []
    for t in times:
        out.append(None if t == 0.0 else seq_family(t))
    return out


def simulate(
    config: EnsembleConfig,
    seq_family: Callable[[float], PulseSequence],
    sample_times: Sequence[float],
    *,
    workers: int = 1,
) -> SimulationResult:
    """Ensemble coherence |<exp(i phi(t))>| at each sample time.

    Every sample time uses ``seq_family(t)``; all of them are evaluated on the
    same set of atom histories. The 1-sigma error is the standard error of
    the projection of exp(i phi) onto the mean phasor.
    """
    times = [float(t) for t in sample_times]
    if not times:
        raise InvalidArgument("sample_times is empty")
    if any(t < 0 for t in times) or any(b < a for a, b in zip(times, times[1:])):
        raise InvalidArgument("sample_times must be non-negative and ascending")
    seqs = _sequences_for(seq_family, times)
    plan = _plan(seqs, max(times))
    s1, s2, var = _run_blocks(config, plan, workers)

    n = config.n_atoms
    m = s1 / n
    mag = np.abs(m)
    theta = np.angle(m)
    # Var[cos(phi - theta)] = (1 + Re<e^{2i(phi - theta)}>) / 2 - |m|^2
    proj_var = np.maximum(0.5 * (1.0 + (s2 / n * np.exp(-2j * theta)).real) - mag**2, 0.0)
    err = np.sqrt(proj_var / n)
    params = config.to_dict()
    for attr in ("f_dd", "family"):
        if hasattr(seq_family, attr):
            params[attr] = getattr(seq_family, attr)
    curve = CoherenceCurve(times, np.minimum(mag, 1.0), "monte_carlo", params, tuple(err))
    return SimulationResult(curve, tuple(var.tolist()), tuple(err.tolist()), config)


def simulate_atom(config: EnsembleConfig, atom: int, seq: PulseSequence) -> AtomState:
    """Step one atom through its collision and pulse events in time order.

    Walks the merged event stream with an explicit sign flip at each pulse.
    It shares the atom's random stream with :func:`simulate` and serves as an
    independent check of the vectorized phase sum.
    """
    rng = atom_rng(config.seed, atom)
    events, detuning = _draw_history(config, rng, seq.total_time)
    timeline = sorted(
        [(float(t), 0, i) for i, t in enumerate(events[1:], start=1)]
        + [(float(t), 1, -1) for t in seq.pulse_times]
    )
    state = AtomState(float(detuning[0]), rng_stream=atom)
    now = 0.0
    for t, kind, idx in timeline:
        state.advance(t - now)
        now = t
        if kind == 0:
            state.detuning = float(detuning[idx])
        else:
            state.flip()
    state.advance(seq.total_time - now)
    return state


@dataclass(frozen=True)
class AutocorrelationEstimate:
    lags: tuple
    values: tuple
    errors: tuple


def detuning_autocorrelation(
    config: EnsembleConfig,
    lag_grid: Sequence[float],
    duration: float,
    samples_per_atom: int = 200,
) -> AutocorrelationEstimate:
    """Time-and-ensemble average of delta(t + tau) delta(t).

    Each atom contributes the average over ``samples_per_atom`` equally
    spaced origins in [0, duration]; the error is the standard error over
    atoms.
    """
    lags = np.asarray(lag_grid, dtype=float)
    if np.any(lags < 0):
        raise InvalidArgument("lags must be non-negative")
    if not duration > 0:
        raise InvalidArgument("duration must be positive")
    origins = np.linspace(0.0, duration, samples_per_atom, endpoint=False)
    t_end = duration + float(lags.max(initial=0.0))
    per_atom = np.empty((config.n_atoms, lags.size))
    for a in range(config.n_atoms):
        events, detuning = _draw_history(config, atom_rng(config.seed, a), t_end)
        at = lambda u: detuning[np.searchsorted(events, u, side="right") - 1]  # noqa: E731
        base = at(origins)
        per_atom[a] = (at(origins[None, :] + lags[:, None]) * base).mean(axis=1)
    vals = per_atom.mean(axis=0)
    errs = per_atom.std(axis=0, ddof=1) / math.sqrt(config.n_atoms) if config.n_atoms > 1 else np.full(lags.size, np.inf)
    return AutocorrelationEstimate(tuple(lags), tuple(vals), tuple(errs))


@dataclass(frozen=True)
class PhaseDistribution:
    counts: np.ndarray
    edges: np.ndarray
    variance: float
    coherence_direct: float
    coherence_gaussian: float
    phases: np.ndarray = field(repr=False, compare=False, default=None)


def phase_distribution(config: EnsembleConfig, seq: PulseSequence | None, t: float, bins: int = 64) -> PhaseDistribution:
    """Histogram of accumulated phases at time ``t`` and both coherence estimates.

    ``seq`` may be a sequence ending at ``t``, a generator ``t -> sequence``,
    or None for free evolution.
    The Gaussian estimate is exp(-var(phi) / 2); the direct one is
    |<exp(i phi)>|.
    """
    if t < 0:
        raise InvalidArgument("t must be non-negative")
    if t == 0:
        phi = np.zeros(config.n_atoms)
    else:
        if seq is None:
            s = free_evolution(t)
        else:
            s = seq(t) if callable(seq) and not isinstance(seq, PulseSequence) else seq
        if not isinstance(s, PulseSequence) or s.total_time != t:
            raise InvalidArgument("sequence must end at t")
        plan = _plan([s], t)
        phi = np.array([_atom_phases(config, a, plan)[0] for a in range(config.n_atoms)])
    var = float(phi.var())
    counts, edges = np.histogram(phi, bins=bins)
    direct = float(abs(np.mean(np.exp(1j * phi))))
    return PhaseDistribution(counts, edges, var, min(direct, 1.0), math.exp(-0.5 * var), phi)


@dataclass(frozen=True)
class TauScanPoint:
    f_dd: float
    tau_c: float
    lower_bound: bool
    fit_residual: float = math.nan
    stat_err: float = math.nan


def _first_crossing(times, values):
    below = np.nonzero(np.asarray(values) < E_INV)[0]
    if below.size == 0:
        return None
    i = below[0]
    if i == 0:
        return times[0]
    y0, y1 = math.log(values[i - 1]), math.log(max(values[i], 1e-300))
    return times[i - 1] + (times[i] - times[i - 1]) * (-1.0 - y0) / (y1 - y0)


def _tau_error(curve: CoherenceCurve, tau: float) -> float:
    """1-sigma error of a fitted tau from the per-point statistical errors."""
    t = curve.t
    err = np.asarray(curve.errors)
    slope = t / tau**2 * np.exp(-t / tau)
    ok = err > 0
    if not np.any(ok):
        return 0.0
    return float(1.0 / math.sqrt(np.sum((slope[ok] / err[ok]) ** 2)))


def tau_c_scan(
    config: EnsembleConfig,
    f_dd_grid: Sequence[float],
    t_max: float,
    *,
    family: str = "cpmg",
    fit_points: int = 12,
    pilot_points: int = 24,
    workers: int = 1,
) -> list[TauScanPoint]:
    """Monte Carlo coherence time versus decoupling rate.

    A geometric pilot grid on [t_max / 1000, t_max] locates the 1/e crossing;
    the curve is then resampled on ``fit_points`` times spanning
    [tau / 8, 2 tau] (capped at t_max) and fitted with exp(-t / tau_c).
    Curves that never reach 1/e by t_max report ``tau_c = t_max`` as a lower
    bound, as do fits beyond t_max.
    """
    if not t_max > 0:
        raise InvalidArgument("t_max must be positive")
    out = []
    for f in f_dd_grid:
        f = float(f)
        if not f > 0:
            raise InvalidArgument("f_dd grid values must be positive")
        gen = fixed_rate(f, family)
        pilot_t = np.geomspace(t_max / 1000.0, t_max, pilot_points)
        pilot = simulate(config, gen, pilot_t, workers=workers).coherence_curve
        cross = _first_crossing(pilot_t, pilot.c)
        if cross is None:
            out.append(TauScanPoint(f, t_max, True))
            continue
        ts = np.linspace(cross / 8.0, min(2.0 * cross, t_max), fit_points)
        curve = simulate(config, gen, ts, workers=workers).coherence_curve
        try:
            tau, rms = _exp_fit(curve.t, curve.c)
        except FitFailure:
            tau, rms = cross, math.nan
        if tau > t_max:
            out.append(TauScanPoint(f, t_max, True, rms))
        else:
            out.append(TauScanPoint(f, tau, False, rms, _tau_error(curve, tau)))
    return out
