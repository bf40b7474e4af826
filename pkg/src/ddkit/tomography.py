"""Single-qubit states, channels, state and process tomography.

Conventions
-----------
Matrices are written in the ordered basis (|1>, |2>). The Pauli operators are

    X = [[0, 1], [1, 0]],  Y = [[0, -i], [i, 0]],  Z = [[-1, 0], [0, 1]],

so that |2> sits at +z, (|1> + |2>)/sqrt 2 at +x and (|1> + i|2>)/sqrt 2 at
+y. With Z = |2><2| - |1><1| the triple (X, Y, Z) satisfies XY = -iZ, which
makes the Bloch frame left-handed; rotations below are defined directly on
Bloch vectors so the handedness never leaks into results.

Process matrices use the operator basis E = (I, X, -iY, Z):

    rho_out = sum_{k,l} chi_{kl} E_k rho_in E_l^dagger.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import optimize as sopt

from .errors import InvalidArgument

__all__ = [
    "I2",
    "X",
    "Y",
    "Z",
    "PAULI",
    "CHI_BASIS",
    "CHI_BASIS_LABEL",
    "PROBE_STATES",
    "ChannelParams",
    "ChiMatrix",
    "WorstCase",
    "ket1",
    "ket2",
    "psi1",
    "psi2",
    "pure_state",
    "check_density_matrix",
    "bloch",
    "bloch_to_rho",
    "bloch_from_angles",
    "rotate_bloch",
    "memory_channel",
    "apply_channel",
    "channel_function",
    "affine_map",
    "channel_to_chi",
    "chi_apply",
    "chi_to_choi",
    "worst_case_fidelity",
    "population_oracle",
    "state_tomography",
    "process_tomography",
    "fringe_scan",
    "fringe_fit",
]

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[-1, 0], [0, 1]], dtype=complex)
PAULI = (X, Y, Z)
CHI_BASIS = (I2, X, -1j * Y, Z)
CHI_BASIS_LABEL = "I,X,-iY,Z"

_ATOL_TRACE = 1e-10
_ATOL_EIG = 1e-9
_ATOL_BLOCH = 1e-9


def ket1() -> np.ndarray:
    return np.array([1.0, 0.0], dtype=complex)


def ket2() -> np.ndarray:
    return np.array([0.0, 1.0], dtype=complex)


def psi1() -> np.ndarray:
    """(|1> + |2>)/sqrt 2, the +x state."""
    return np.array([1.0, 1.0], dtype=complex) / math.sqrt(2.0)


def psi2() -> np.ndarray:
    """(|1> + i|2>)/sqrt 2, the +y state."""
    return np.array([1.0, 1j], dtype=complex) / math.sqrt(2.0)


def pure_state(ket) -> np.ndarray:
    k = np.asarray(ket, dtype=complex)
    k = k / np.linalg.norm(k)
    return np.outer(k, k.conj())


# probe inputs for process tomography: |1>, |2>, +x, +y
PROBE_STATES = (pure_state(ket1()), pure_state(ket2()), pure_state(psi1()), pure_state(psi2()))


def check_density_matrix(rho, *, atol_eig: float = _ATOL_EIG) -> np.ndarray:
    """Validate and return ``rho`` as a 2x2 complex array."""
    r = np.asarray(rho, dtype=complex)
    if r.shape != (2, 2):
        raise InvalidArgument(f"density matrix must be 2x2, got shape {r.shape}")
    if not np.allclose(r, r.conj().T, atol=1e-10, rtol=0):
        raise InvalidArgument("density matrix is not Hermitian")
    if abs(np.trace(r) - 1.0) > _ATOL_TRACE:
        raise InvalidArgument(f"density matrix trace is {np.trace(r).real!r}, not 1")
    if np.linalg.eigvalsh(r).min() < -atol_eig:
        raise InvalidArgument("density matrix has a negative eigenvalue")
    return r


def bloch(rho) -> np.ndarray:
    """Bloch vector (tr X rho, tr Y rho, tr Z rho)."""
    r = check_density_matrix(rho)
    return np.array([np.trace(p @ r).real for p in PAULI])


def bloch_to_rho(r) -> np.ndarray:
    """(I + r . sigma) / 2."""
    v = np.asarray(r, dtype=float)
    if v.shape != (3,):
        raise InvalidArgument("Bloch vector must have 3 components")
    if np.linalg.norm(v) > 1.0 + _ATOL_BLOCH:
        raise InvalidArgument(f"Bloch vector length {np.linalg.norm(v)!r} exceeds 1")
    return 0.5 * (I2 + v[0] * X + v[1] * Y + v[2] * Z)


def bloch_from_angles(theta, phi) -> np.ndarray:
    """Unit vectors at polar angle theta from +z and azimuth phi from +x."""
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta) * np.ones_like(phi)], axis=-1)


def rotate_bloch(r, axis, angle: float) -> np.ndarray:
    """Rotate Bloch vector(s) by ``angle`` about ``axis`` (right-hand rule on coordinates)."""
    n = np.asarray(axis, dtype=float)
    n = n / np.linalg.norm(n)
    v = np.asarray(r, dtype=float)
    c, s = math.cos(angle), math.sin(angle)
    return v * c + np.cross(n, v) * s + np.outer(v @ n, n).reshape(v.shape) * (1.0 - c)


# ---------------------------------------------------------------------------
# channel model


def _rate(tau):
    if tau is None or tau == math.inf:
        return 0.0
    return 1.0 / tau


@dataclass(frozen=True)
class ChannelParams:
    """Phase damping, depolarizing decay and a residual rotation about z.

    Bloch action after time t: (x, y) contracted by exp(-t/dephasing_tau)
    * exp(-t/depolarizing_t1) and rotated by rotation_rate * t about z;
    z contracted by exp(-t/depolarizing_t1) toward the maximally mixed
    state. Infinite times mean no decay.
    """

    dephasing_tau: float = math.inf
    depolarizing_t1: float = math.inf
    rotation_rate: float = 0.0

    def __post_init__(self):
        for name in ("dephasing_tau", "depolarizing_t1"):
            v = getattr(self, name)
            v = math.inf if v is None else float(v)
            if not v > 0:
                raise InvalidArgument(f"{name} must be positive (inf for no decay), got {v!r}")
            object.__setattr__(self, name, v)
        if not (math.isfinite(self.rotation_rate) and self.rotation_rate >= 0):
            raise InvalidArgument("rotation_rate must be finite and non-negative")

    @property
    def transverse_time(self) -> float:
        """Total decay time of the equatorial Bloch components."""
        rate = _rate(self.dephasing_tau) + _rate(self.depolarizing_t1)
        return math.inf if rate == 0 else 1.0 / rate

    @classmethod
    def from_coherence_time(cls, coherence_time: float, t1: float = math.inf, rotation_rate: float = 0.0) -> ChannelParams:
        """Split a total transverse decay time into pure dephasing plus T1."""
        rate = _rate(coherence_time) - _rate(t1)
        if rate < 0:
            raise InvalidArgument("coherence time cannot exceed T1 in this channel model")
        return cls(math.inf if rate == 0 else 1.0 / rate, t1, rotation_rate)

    def without_rotation(self) -> ChannelParams:
        return ChannelParams(self.dephasing_tau, self.depolarizing_t1, 0.0)

    def to_dict(self) -> dict:
        fin = lambda v: None if v == math.inf else v  # noqa: E731
        return {
            "schema": "ddkit/v1",
            "dephasing_tau_s": fin(self.dephasing_tau),
            "depolarizing_t1_s": fin(self.depolarizing_t1),
            "rotation_rate_rad_s": self.rotation_rate,
        }

    @classmethod
    def from_dict(cls, data: dict) -> ChannelParams:
        allowed = {
            "schema",
            "dephasing_tau_s",
            "coherence_time_s",
            "depolarizing_t1_s",
            "rotation_rate_rad_s",
            "rotation_rate_deg_s",
        }
        extra = set(data) - allowed
        if extra:
            raise InvalidArgument(f"unknown keys in channel descriptor: {sorted(extra)}")
        if "dephasing_tau_s" in data and "coherence_time_s" in data:
            raise InvalidArgument("give either dephasing_tau_s or coherence_time_s, not both")
        if "rotation_rate_rad_s" in data and "rotation_rate_deg_s" in data:
            raise InvalidArgument("give the rotation rate in one unit only")
        inf = lambda v: math.inf if v is None else float(v)  # noqa: E731
        t1 = inf(data.get("depolarizing_t1_s"))
        rot = float(data.get("rotation_rate_rad_s", math.radians(data.get("rotation_rate_deg_s", 0.0))))
        if "coherence_time_s" in data:
            return cls.from_coherence_time(inf(data["coherence_time_s"]), t1, rot)
        return cls(inf(data.get("dephasing_tau_s")), t1, rot)


def memory_channel(rotation: bool = True) -> ChannelParams:
    """Memory channel with a 2.4 s transverse decay time, T1 = 6 s and a 9 deg/s drift."""
    return ChannelParams.from_coherence_time(2.4, 6.0, math.radians(9.0) if rotation else 0.0)


def affine_map(params: ChannelParams, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Bloch-space form r -> M r + b of the channel after time t."""
    if t < 0:
        raise InvalidArgument("t must be non-negative")
    lon = math.exp(-t * _rate(params.depolarizing_t1))
    tr = lon * math.exp(-t * _rate(params.dephasing_tau))
    a = params.rotation_rate * t
    c, s = math.cos(a), math.sin(a)
    m = np.array([[tr * c, -tr * s, 0.0], [tr * s, tr * c, 0.0], [0.0, 0.0, lon]])
    return m, np.zeros(3)


def apply_channel(params: ChannelParams, t: float, rho) -> np.ndarray:
    m, b = affine_map(params, t)
    return bloch_to_rho(m @ bloch(rho) + b)


def channel_function(params: ChannelParams, t: float) -> Callable[[np.ndarray], np.ndarray]:
    """The channel at time t as a linear map on 2x2 matrices.

    Works on any matrix, not only states, so it can be probed with
    operator bases.
    """
    m, b = affine_map(params, t)

    def run(rho):
        r = np.asarray(rho, dtype=complex)
        tr = np.trace(r)
        v = np.array([np.trace(p @ r) for p in PAULI])
        out = m @ v + b * tr
        return 0.5 * (tr * I2 + out[0] * X + out[1] * Y + out[2] * Z)

    return run


# ---------------------------------------------------------------------------
# chi matrix


def _vec(a):
    return np.asarray(a).reshape(-1, order="F")


# vec(E_k rho E_l^dagger) = (conj(E_l) kron E_k) vec(rho)
_CHI_TO_SUPER = np.stack(
    [_vec(np.kron(CHI_BASIS[l].conj(), CHI_BASIS[k])) for k in range(4) for l in range(4)], axis=1
)


@dataclass(frozen=True)
class ChiMatrix:
    """Process matrix in the (I, X, -iY, Z) basis plus reconstruction diagnostics."""

    matrix: np.ndarray
    tp_residual: float = 0.0
    clipped_mass: float = 0.0
    basis: str = field(default=CHI_BASIS_LABEL)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (4, 4):
            raise InvalidArgument("chi must be 4x4")
        object.__setattr__(self, "matrix", m)

    def tp_operator(self) -> np.ndarray:
        """sum chi_kl E_l^dagger E_k; equals the identity for trace-preserving maps."""
        return sum(
            self.matrix[k, l] * CHI_BASIS[l].conj().T @ CHI_BASIS[k] for k in range(4) for l in range(4)
        )

    def tp_error(self) -> float:
        return float(np.max(np.abs(self.tp_operator() - I2)))

    def min_choi_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(chi_to_choi(self)).min())

    def is_physical(self, tp_atol: float = 1e-8, cp_atol: float = 1e-6) -> bool:
        herm = np.allclose(self.matrix, self.matrix.conj().T, atol=tp_atol, rtol=0)
        return herm and self.tp_error() <= tp_atol and self.min_choi_eigenvalue() >= -cp_atol

    def to_dict(self) -> dict:
        return {
            "schema": "ddkit/v1",
            "basis": self.basis,
            "chi": [[[float(z.real), float(z.imag)] for z in row] for row in self.matrix],
            "tp_residual": self.tp_residual,
            "clipped_mass": self.clipped_mass,
        }

    @classmethod
    def from_dict(cls, data: dict) -> ChiMatrix:
        if data.get("basis", CHI_BASIS_LABEL) != CHI_BASIS_LABEL:
            raise InvalidArgument(f"unsupported chi basis {data.get('basis')!r}")
        try:
            m = np.array([[complex(re, im) for re, im in row] for row in data["chi"]])
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidArgument(f"malformed chi descriptor: {exc}") from None
        return cls(m, float(data.get("tp_residual", 0.0)), float(data.get("clipped_mass", 0.0)))


def chi_apply(chi: ChiMatrix | np.ndarray, rho) -> np.ndarray:
    """sum_{k,l} chi_kl E_k rho E_l^dagger, evaluated term by term."""
    m = chi.matrix if isinstance(chi, ChiMatrix) else np.asarray(chi, dtype=complex)
    r = np.asarray(rho, dtype=complex)
    out = np.zeros((2, 2), dtype=complex)
    for k in range(4):
        for l in range(4):
            if m[k, l] != 0:
                out += m[k, l] * CHI_BASIS[k] @ r @ CHI_BASIS[l].conj().T
    return out


def chi_to_choi(chi: ChiMatrix | np.ndarray) -> np.ndarray:
    """Choi matrix sum_ij |i><j| (x) E(|i><j|); trace 2 for trace-preserving maps."""
    m = chi.matrix if isinstance(chi, ChiMatrix) else np.asarray(chi, dtype=complex)
    v = np.stack([_vec(e) for e in CHI_BASIS], axis=1)
    return v @ m @ v.conj().T


def _superoperator(channel, probes=PROBE_STATES):
    ins = np.stack([_vec(p) for p in probes], axis=1)
    outs = np.stack([_vec(channel(p)) for p in probes], axis=1)
    return outs @ np.linalg.inv(ins)


def _chi_from_superoperator(s):
    sol = np.linalg.solve(_CHI_TO_SUPER, _vec(s))
    return sol.reshape(4, 4)


def channel_to_chi(channel: Callable[[np.ndarray], np.ndarray]) -> ChiMatrix:
    """Linear-inversion chi from the outputs of the four probe states.

    Trace preservation is not assumed; the largest deviation of the TP
    operator from the identity is returned as ``tp_residual``.
    """
    m = _chi_from_superoperator(_superoperator(channel))
    chi = ChiMatrix(m)
    return ChiMatrix(m, chi.tp_error())


def _physical_projection(chi: np.ndarray) -> tuple[np.ndarray, float]:
    """Clip negative chi eigenvalues, then restore trace preservation.

    After clipping, the channel rho -> E(A^{-1/2} rho A^{-1/2}) with A the TP
    operator is again trace preserving and remains completely positive.
    """
    h = 0.5 * (chi + chi.conj().T)
    w, v = np.linalg.eigh(h)
    clipped = float(-w[w < 0].sum())
    if clipped == 0.0:
        return h, 0.0
    h = (v * np.maximum(w, 0.0)) @ v.conj().T
    a = ChiMatrix(h).tp_operator()
    aw, av = np.linalg.eigh(0.5 * (a + a.conj().T))
    a_inv_sqrt = (av / np.sqrt(aw)) @ av.conj().T
    # E_k A^{-1/2} = sum_m coef[m, k] E_m, using tr(E_m^dagger E_n) = 2 delta_mn
    coef = np.array(
        [[np.trace(CHI_BASIS[m].conj().T @ CHI_BASIS[k] @ a_inv_sqrt) / 2.0 for k in range(4)] for m in range(4)]
    )
    out = coef @ h @ coef.conj().T
    return 0.5 * (out + out.conj().T), clipped


# ---------------------------------------------------------------------------
# fidelity


@dataclass(frozen=True)
class WorstCase:
    fidelity: float
    bloch: np.ndarray


def _chi_affine(m):
    ch = lambda r: chi_apply(m, r)  # noqa: E731
    half = ch(0.5 * I2)
    b = np.array([np.trace(p @ half).real for p in PAULI])
    cols = []
    for p in PAULI:
        out = ch(0.5 * p)
        cols.append([np.trace(q @ out).real for q in PAULI])
    return np.array(cols).T, b


def worst_case_fidelity(chi: ChiMatrix | np.ndarray, *, return_state: bool = False):
    """min over pure inputs of <psi| E(|psi><psi|) |psi>.

    For a unit Bloch vector r the fidelity is (1 + r . (M r + b)) / 2 with
    (M, b) the channel's Bloch-space affine form. A 64 x 128 grid over
    (theta, phi) seeds a Nelder-Mead refinement.
    """
    m = chi.matrix if isinstance(chi, ChiMatrix) else np.asarray(chi, dtype=complex)
    mm, b = _chi_affine(m)

    def fid(angles):
        r = bloch_from_angles(angles[..., 0], angles[..., 1])
        return 0.5 * (1.0 + np.einsum("...i,...i->...", r, r @ mm.T + b))

    th = (np.arange(64) + 0.5) * math.pi / 64
    ph = np.arange(128) * 2.0 * math.pi / 128
    grid = np.stack(np.meshgrid(th, ph, indexing="ij"), axis=-1)
    vals = fid(grid)
    i, j = np.unravel_index(np.argmin(vals), vals.shape)
    res = sopt.minimize(
        lambda a: float(fid(np.asarray(a))),
        grid[i, j],
        method="Nelder-Mead",
        options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 10_000},
    )
    best = min(float(res.fun), float(vals[i, j]))
    angles = res.x if res.fun <= vals[i, j] else grid[i, j]
    if return_state:
        return WorstCase(best, bloch_from_angles(angles[0], angles[1]))
    return best


# ---------------------------------------------------------------------------
# tomography

# Bloch rotations applied before reading the |2> population: each maps the
# measured axis onto +z, so P2 = (1 + r_axis) / 2.
_SETTINGS = {
    "z": None,
    "x": ((0.0, 1.0, 0.0), -math.pi / 2),  # pi/2 about y: +x -> +z
    "y": ((1.0, 0.0, 0.0), math.pi / 2),  # pi/2 about x: +y -> +z
}
SETTINGS = tuple(_SETTINGS)


def _population_2(rho, setting):
    r = bloch(rho)
    rot = _SETTINGS[setting]
    if rot is not None:
        r = rotate_bloch(r, *rot)
    return float(min(max(0.5 * (1.0 + r[2]), 0.0), 1.0))


def population_oracle(rho, rng: np.random.Generator | None = None) -> Callable[[str, int], float]:
    """Measurement oracle for a fixed state.

    Returns ``measure(setting, shots)`` giving the |2> population after the
    setting's analysis pulse; binomial with ``shots`` trials when ``rng`` is
    given, exact otherwise.
    """
    r = check_density_matrix(rho)

    def measure(setting, shots):
        p = _population_2(r, setting)
        if rng is None:
            return p
        return rng.binomial(shots, p) / shots

    return measure


def state_tomography(measure: Callable[[str, int], float], shots: int) -> np.ndarray:
    """Density matrix from |2> populations in the z, x and y settings.

    r_i = 2 P_i - 1; estimates outside the Bloch ball are scaled back radially.
    """
    if isinstance(shots, bool) or int(shots) != shots or shots < 1:
        raise InvalidArgument(f"shots must be a positive integer, got {shots!r}")
    r = np.array([2.0 * measure(s, int(shots)) - 1.0 for s in ("x", "y", "z")])
    norm = np.linalg.norm(r)
    if norm > 1.0:
        r = r / norm
    return bloch_to_rho(r)


def process_tomography(
    oracle: Callable[[np.ndarray], Callable[[str, int], float]] | Callable[[np.ndarray], np.ndarray],
    shots: int | None = None,
) -> ChiMatrix:
    """Chi matrix from state tomography of the four probe outputs.

    ``oracle(rho_in)`` returns either the output density matrix
    (``shots=None``, noiseless) or a measurement function as produced by
    :func:`population_oracle` (finite ``shots``). The reconstruction is
    linear inversion followed by Hermitization, Choi-eigenvalue clipping and
    restoration of trace preservation; the clipped eigenvalue mass is
    reported on the result.
    """
    if shots is None:
        outs = [np.asarray(oracle(p), dtype=complex) for p in PROBE_STATES]
    else:
        outs = [state_tomography(oracle(p), shots) for p in PROBE_STATES]
    lookup = {id(p): o for p, o in zip(PROBE_STATES, outs)}
    raw = _chi_from_superoperator(_superoperator(lambda p: lookup[id(p)]))
    m, clipped = _physical_projection(raw)
    chi = ChiMatrix(m)
    return ChiMatrix(m, chi.tp_error(), clipped)


def fringe_scan(initial, channel: Callable[[np.ndarray], np.ndarray] | None, phases: Sequence[float]) -> np.ndarray:
    """|2> population after a pi/2 analysis pulse of phase alpha.

    The pulse rotates the Bloch vector by pi/2 about (cos alpha, sin alpha, 0).
    For an output with equatorial length rho_xy and azimuth beta the result
    is (1 + rho_xy sin(beta - alpha)) / 2, independent of the z component.
    """
    out = channel(initial) if channel is not None else np.asarray(initial, dtype=complex)
    r = bloch(out)
    a = np.asarray(phases, dtype=float)
    axes = np.stack([np.cos(a), np.sin(a), np.zeros_like(a)], axis=-1)
    # Rodrigues at pi/2: r' = n x r + n (n . r), and n_z = 0
    z = np.cross(axes, r)[..., 2]
    return 0.5 * (1.0 + z)


def fringe_fit(phases, populations) -> tuple[float, float, float]:
    """Linear least-squares fit P = m + A sin(beta - alpha); returns (contrast A, beta, m)."""
    a = np.asarray(phases, dtype=float)
    p = np.asarray(populations, dtype=float)
    # A sin(beta - a) = A sin(beta) cos(a) - A cos(beta) sin(a)
    design = np.stack([np.ones_like(a), np.cos(a), -np.sin(a)], axis=1)
    (mean, s, c), *_ = np.linalg.lstsq(design, p, rcond=None)
    amp = 2.0 * math.hypot(s, c)
    return amp, math.atan2(s, c), mean
