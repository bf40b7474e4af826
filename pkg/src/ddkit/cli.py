"""Command-line interface.

Units: sigma_delta in rad/s, gamma in 1/s, decoupling rates f_DD in Hz and
times in seconds. f_DD is converted to angular frequency only inside
:func:`ddkit.decoherence.tau_c_delta_approx`.

Exit codes: 0 success, 2 usage or configuration error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import math
import sys
from typing import Sequence

import numpy as np

from . import decoherence as dc
from . import io
from . import montecarlo as mc
from . import optimize as opt
from . import sequences as sq
from . import tomography as tm
from .errors import FitFailure, InvalidArgument, NotFound, NumericFailure
from .noise import LorentzianBath, bath_from_dict

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3

DEFAULT_SIGMA = 23.8
DEFAULT_GAMMA = 37.5


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(message)


class _UsageError(Exception):
    pass


def _floats(text: str) -> list[float]:
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    return vals


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _common() -> argparse.ArgumentParser:
    p = _Parser(add_help=False)
    g = p.add_argument_group("common options")
    g.add_argument("--config", help="JSON file of option defaults; unknown keys are rejected")
    g.add_argument("--seed", type=_seed, default=0, help="master RNG seed (u64)")
    g.add_argument("--out", default="-", help="output path, '-' for stdout")
    g.add_argument("--tol", type=float, default=1e-8, help="absolute tolerance on the decay exponent")
    g.add_argument("--omega-cutoff", type=float, default=None, help="override the quadrature cutoff Omega (rad/s)")
    return p


def _bath_options(p):
    g = p.add_argument_group("bath")
    g.add_argument("--bath", help="bath descriptor JSON")
    g.add_argument("--sigma-delta", type=float, default=DEFAULT_SIGMA, help="detuning spread, rad/s")
    g.add_argument("--gamma", type=float, default=DEFAULT_GAMMA, help="correlation decay rate, 1/s")


def _bath(args):
    if args.bath:
        return bath_from_dict(io.read_json(args.bath))
    return LorentzianBath(args.sigma_delta, args.gamma)


def _sequence(args, t: float) -> sq.PulseSequence:
    fam = args.family
    if fam == "free" or args.n == 0:
        return sq.free_evolution(t)
    if fam == "cpmg":
        return sq.cpmg(args.n, t)
    if fam == "udd":
        return sq.udd(args.n, t)
    if fam == "eta":
        if args.eta is None:
            raise InvalidArgument("--eta is required for the eta family")
        return sq.eta_family(args.n, t, args.eta)
    raise InvalidArgument(f"unknown family {fam!r}")


# ---------------------------------------------------------------------------
# commands


def cmd_filter(args) -> int:
    if args.sequence:
        seq = sq.PulseSequence.from_dict(io.read_json(args.sequence))
    else:
        seq = _sequence(args, args.t)
    if args.points < 1 or not args.omega_max_grid > 0:
        raise InvalidArgument("omega grid is empty: need --points >= 1 and --omega-max > 0")
    omega = np.linspace(0.0, args.omega_max_grid, args.points)
    f = dc.filter_function(seq, omega)
    io.write_csv(
        ({"omega_rad_s": w, "filter": v} for w, v in zip(omega.tolist(), np.atleast_1d(f).tolist())),
        ("omega_rad_s", "filter"),
        args.out,
    )
    return EXIT_OK


def cmd_coherence(args) -> int:
    bath = _bath(args)
    if args.fdd is not None:
        gen = sq.fixed_rate(args.fdd, args.family if args.family in ("cpmg", "udd") else "cpmg")
    else:
        gen = lambda t: _sequence(args, t)  # noqa: E731
    times = args.t
    if not times:
        raise InvalidArgument("--t needs at least one time")
    curve = dc.coherence_curve(gen, bath, times, args.tol, method=args.method, omega_max=args.omega_cutoff)
    if args.fdd is None:
        curve.params["f_dd_hz"] = None
    io.write_csv(io.curve_rows(curve), io.CURVE_COLUMNS, args.out)
    return EXIT_OK


def _quadrature_tau(f, bath, args):
    if f == 0:
        if not isinstance(bath, LorentzianBath):
            raise InvalidArgument("the free-decay law needs a Lorentzian bath descriptor")
        tau = dc.free_decay_3d_time(bath.sigma_delta)
        return tau, not math.isfinite(tau) or tau > args.tmax
    gen = sq.fixed_rate(f)
    evaluator = lambda t: dc.coherence(  # noqa: E731
        gen(t), bath, args.tol, method=args.method, omega_max=args.omega_cutoff
    )
    try:
        ct = dc.coherence_time(evaluator, args.fit, t_max=args.tmax, t_start=min(0.01, args.tmax))
    except NotFound:
        return args.tmax, True
    return ct.tau_c, ct.tau_c > args.tmax


def cmd_taucurve(args) -> int:
    bath = _bath(args)
    grid = args.fdd
    if not grid or any(f < 0 for f in grid):
        raise InvalidArgument("--fdd needs one or more non-negative rates")
    rows = []
    cols = ["f_dd_hz"]
    if args.engine in ("quadrature", "both"):
        cols += ["tau_c", "unbounded"]
    if args.engine in ("mc", "both"):
        cols += ["tau_c_mc", "stat_err", "mc_lower_bound"]
    mc_points = {}
    if args.engine in ("mc", "both"):
        if not isinstance(bath, LorentzianBath):
            raise InvalidArgument("the Monte Carlo engine needs a Lorentzian bath")
        cfg = mc.EnsembleConfig(args.atoms, bath.sigma_delta, bath.gamma, args.seed, args.energy_model)
        positive = [f for f in grid if f > 0]
        for p in mc.tau_c_scan(cfg, positive, args.tmax, workers=args.workers):
            mc_points[p.f_dd] = p
    for f in grid:
        row = {"f_dd_hz": f}
        if args.engine in ("quadrature", "both"):
            row["tau_c"], row["unbounded"] = _quadrature_tau(f, bath, args)
            row["unbounded"] = int(row["unbounded"])
        if args.engine in ("mc", "both"):
            p = mc_points.get(f)
            if p is not None:
                row.update(tau_c_mc=p.tau_c, stat_err=p.stat_err, mc_lower_bound=int(p.lower_bound))
        rows.append(row)
    io.write_csv(rows, cols, args.out)
    return EXIT_OK


def cmd_optimize(args) -> int:
    bath = _bath(args)
    seed_seq = args.seed_sequence
    if args.perturb > 0:
        base = sq.cpmg(args.n, args.t) if seed_seq == "cpmg" else sq.udd(args.n, args.t)
        seed_seq = opt.perturbed_sequence(base, args.perturb, np.random.default_rng(args.seed))
    res = opt.optimize_timings(args.n, args.t, bath, max_iter=args.max_iter, seed_sequence=seed_seq)
    io.write_json(res.to_dict(), args.out)
    if args.timings_out:
        io.write_csv(
            ({"index": i + 1, "time_s": t, "fraction": t / args.t} for i, t in enumerate(res.best_sequence.pulse_times)),
            ("index", "time_s", "fraction"),
            args.timings_out,
        )
    return EXIT_OK


def cmd_compare_udd(args) -> int:
    bath = _bath(args)
    rows = opt.compare_cpmg_udd(args.n, args.t, bath, args.tol, method=args.method)
    io.write_csv(
        (
            {"n": r.n, "tau_c_cpmg": r.tau_c_cpmg, "tau_c_udd": r.tau_c_udd, "udd_deficit": r.udd_deficit}
            for r in rows
        ),
        ("n", "tau_c_cpmg", "tau_c_udd", "udd_deficit"),
        args.out,
    )
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = mc.EnsembleConfig(args.atoms, args.sigma_delta, args.gamma, args.seed, args.energy_model)
    if args.points < 1 or not args.tmax > 0:
        raise InvalidArgument("need --points >= 1 and --tmax > 0")
    times = np.linspace(0.0, args.tmax, args.points + 1)[1:] if args.points > 1 else [args.tmax]
    times = np.concatenate([[0.0], times])
    gen = sq.fixed_rate(args.fdd, args.family)
    res = mc.simulate(cfg, gen, times, workers=args.workers)
    io.write_csv(res.to_rows(), io.SIMULATION_COLUMNS, args.out)
    return EXIT_OK


def cmd_qpt(args) -> int:
    params = tm.ChannelParams.from_dict(io.read_json(args.channel)) if args.channel else tm.memory_channel()
    rng = np.random.default_rng(args.seed) if args.shots else None
    phases = np.linspace(0.0, 2.0 * math.pi, args.fringe_points, endpoint=False)
    report = {"channel": params.to_dict(), "shots": args.shots, "seed": args.seed, "times": []}
    for t in args.t:
        def oracle(rho, t=t):
            out = tm.apply_channel(params, t, rho)
            return tm.population_oracle(out, rng) if args.shots else out

        chi = tm.process_tomography(oracle, args.shots or None)
        wc = tm.worst_case_fidelity(chi, return_state=True)
        fringes = {}
        for name, ket in (("psi1", tm.psi1()), ("psi2", tm.psi2())):
            pops = tm.fringe_scan(tm.pure_state(ket), lambda r: tm.chi_apply(chi, r), phases)
            contrast, offset, mean = tm.fringe_fit(phases, pops)
            fringes[name] = {
                "phases_rad": phases.tolist(),
                "population_2": pops.tolist(),
                "contrast": contrast,
                "phase_offset_rad": offset,
            }
        report["times"].append(
            {
                "t_s": t,
                "chi": chi.to_dict(),
                "worst_case_fidelity": wc.fidelity,
                "worst_case_bloch": wc.bloch.tolist(),
                "fringes": fringes,
            }
        )
    report["fidelities"] = [r["worst_case_fidelity"] for r in report["times"]]
    io.write_json(report, args.out)
    return EXIT_OK


def cmd_fit_sigma(args) -> int:
    curve = io.read_curve(args.curve)
    fit = dc.fit_sigma_delta(curve)
    io.write_json(
        {
            "sigma_delta_rad_s": fit.sigma_delta,
            "residual": fit.residual,
            "tau_1_s": dc.free_decay_3d_time(fit.sigma_delta),
        },
        args.out,
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="ddkit", description="Dynamical decoupling of dephasing ensembles.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("filter", parents=[common], help="filter function on an omega grid")
    p.add_argument("--family", choices=("free", "cpmg", "udd", "eta"), default="cpmg")
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--eta", type=float)
    p.add_argument("--sequence", help="sequence descriptor JSON (overrides --family)")
    p.add_argument("--omega-max", dest="omega_max_grid", type=float, default=50.0, help="grid end, rad/s")
    p.add_argument("--points", type=int, default=1000)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("coherence", parents=[common], help="coherence curve C(t)")
    _bath_options(p)
    p.add_argument("--family", choices=("free", "cpmg", "udd", "eta"), default="cpmg")
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--eta", type=float)
    p.add_argument("--fdd", type=float, help="hold f_DD fixed (Hz) instead of n")
    p.add_argument("--t", type=_floats, default=[1.0], help="comma-separated times, s")
    p.add_argument("--method", choices=("quadrature", "exact", "auto"), default="quadrature")
    p.set_defaults(func=cmd_coherence)

    p = sub.add_parser("taucurve", parents=[common], help="coherence time versus f_DD")
    _bath_options(p)
    p.add_argument("--fdd", type=_floats, default=[2.0, 5.0, 10.0, 20.0, 35.0])
    p.add_argument("--engine", choices=("quadrature", "mc", "both"), default="quadrature")
    p.add_argument("--fit", choices=("exponential_fit", "root_e_crossing"), default="exponential_fit")
    p.add_argument("--method", choices=("quadrature", "exact", "auto"), default="quadrature")
    p.add_argument("--tmax", type=float, default=100.0)
    p.add_argument("--atoms", type=int, default=1000)
    p.add_argument("--energy-model", choices=mc.ENERGY_MODELS, default="gamma3")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_taucurve)

    p = sub.add_parser("optimize", parents=[common], help="Nelder-Mead pulse-timing optimization")
    _bath_options(p)
    p.add_argument("--n", type=int, default=70)
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--seed-sequence", choices=("cpmg", "udd"), default="cpmg")
    p.add_argument("--perturb", type=float, default=0.0, help="log-normal gap perturbation of the start")
    p.add_argument("--max-iter", type=int, default=50_000)
    p.add_argument("--timings-out", help="CSV of optimized pulse times")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("compare-udd", parents=[common], help="CPMG versus UDD coherence times")
    _bath_options(p)
    p.add_argument("--n", type=_ints, default=[4, 8, 16, 32, 64, 128])
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--method", choices=("quadrature", "exact", "auto"), default="quadrature")
    p.set_defaults(func=cmd_compare_udd)

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo ensemble coherence")
    p.add_argument("--atoms", type=int, default=1000)
    p.add_argument("--sigma-delta", type=float, default=DEFAULT_SIGMA)
    p.add_argument("--gamma", type=float, default=DEFAULT_GAMMA)
    p.add_argument("--fdd", type=float, default=35.0)
    p.add_argument("--family", choices=("cpmg", "udd"), default="cpmg")
    p.add_argument("--tmax", type=float, default=4.0)
    p.add_argument("--points", type=int, default=40)
    p.add_argument("--energy-model", choices=mc.ENERGY_MODELS, default="gamma3")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("qpt", parents=[common], help="process tomography of a memory channel")
    p.add_argument("--channel", help="channel descriptor JSON (default: 2.4 s / T1 6 s / 9 deg/s)")
    p.add_argument("--t", type=_floats, default=[1.0, 2.0, 3.0])
    p.add_argument("--shots", type=int, default=0, help="shots per setting; 0 for noiseless")
    p.add_argument("--fringe-points", type=int, default=36)
    p.set_defaults(func=cmd_qpt)

    p = sub.add_parser("fit-sigma", parents=[common], help="fit sigma_delta to a free-decay curve")
    p.add_argument("--curve", required=True, help="CSV with time_s and coherence columns")
    p.set_defaults(func=cmd_fit_sigma)
    return parser


def _apply_config(parser, argv):
    """Re-parse with defaults taken from --config, rejecting unknown keys."""
    args = parser.parse_args(argv)
    if not args.config:
        return args
    data = io.read_json(args.config)
    data.pop("schema", None)
    known = set(vars(args)) - {"func", "command", "config"}
    norm = {k.replace("-", "_"): v for k, v in data.items()}
    unknown = sorted(set(norm) - known)
    if unknown:
        raise InvalidArgument(f"unknown keys in config {args.config}: {unknown}")
    sub = parser._subparsers._group_actions[0].choices[args.command]
    sub.set_defaults(**norm)
    return parser.parse_args(argv)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = _apply_config(parser, argv)
        if getattr(args, "tol", 1e-8) is not None and not (0 < args.tol <= 1e-3):
            raise InvalidArgument("--tol must lie in (0, 1e-3]")
        return args.func(args)
    except _UsageError as exc:
        print(f"ddkit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InvalidArgument, FitFailure, NotFound) as exc:
        print(f"ddkit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericFailure as exc:
        print(
            f"ddkit: numeric failure: {exc} (estimate={exc.estimate}, error bound={exc.error_bound})",
            file=sys.stderr,
        )
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
