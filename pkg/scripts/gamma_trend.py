"""Inverse coherence time against the correlation decay rate at a fixed pulse rate.

    python3 scripts/gamma_trend.py --fdd 8 --gammas 5 10 20 37.5 60
"""
import argparse

import numpy as np
from scipy import stats

from ddkit import decoherence as dc
from ddkit import io
from ddkit import montecarlo as mc
from ddkit import sequences as sq
from ddkit.noise import LorentzianBath, gamma_to_collision_rate


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sigma-delta", type=float, default=23.8)
    ap.add_argument("--fdd", type=float, default=8.0)
    ap.add_argument("--gammas", type=float, nargs="+", default=[10.0, 20.0, 37.5])
    ap.add_argument("--atoms", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=4)
    ap.add_argument("--workers", type=int, default=4)
    ap.add_argument("--out", default="-")
    args = ap.parse_args()

    gen = sq.fixed_rate(args.fdd)
    rows = []
    for g in args.gammas:
        bath = LorentzianBath(args.sigma_delta, g)
        tau_q = dc.coherence_time(lambda t: dc.coherence(gen(t), bath, 1e-8), "exponential_fit").tau_c
        (p,) = mc.tau_c_scan(mc.EnsembleConfig(args.atoms, args.sigma_delta, g, args.seed), [args.fdd], 100.0, workers=args.workers)
        rows.append(
            {
                "gamma_per_s": g,
                "collision_rate_per_s": gamma_to_collision_rate(g),
                "inv_tau_quadrature": 1.0 / tau_q,
                "inv_tau_mc": 1.0 / p.tau_c,
                "inv_tau_mc_err": p.stat_err / p.tau_c**2,
            }
        )
    io.write_csv(rows, list(rows[0]), args.out)
    x = np.array(args.gammas)
    for key in ("inv_tau_quadrature", "inv_tau_mc"):
        lr = stats.linregress(x, [r[key] for r in rows])
        print(f"# {key}: slope {lr.slope:.4f}, intercept {lr.intercept:.3f} +- {lr.intercept_stderr:.3f}, R^2 {lr.rvalue**2:.4f}")


if __name__ == "__main__":
    main()
