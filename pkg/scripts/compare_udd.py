"""CPMG against UDD coherence times at equal pulse count.

    python3 scripts/compare_udd.py --n 1 2 4 8 16 32 64 70 128
"""
import argparse

from ddkit import io
from ddkit import optimize as op
from ddkit.noise import LorentzianBath


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, nargs="+", default=[1, 2, 4, 8, 16, 32, 64, 70, 128])
    ap.add_argument("--t", type=float, default=1.0)
    ap.add_argument("--sigma-delta", type=float, default=23.8)
    ap.add_argument("--gamma", type=float, default=37.5)
    ap.add_argument("--out", default="-")
    args = ap.parse_args()

    rows = op.compare_cpmg_udd(args.n, args.t, LorentzianBath(args.sigma_delta, args.gamma), 1e-10, workers=4)
    io.write_csv(
        ({"n": r.n, "tau_c_cpmg": r.tau_c_cpmg, "tau_c_udd": r.tau_c_udd, "udd_deficit": r.udd_deficit} for r in rows),
        ("n", "tau_c_cpmg", "tau_c_udd", "udd_deficit"),
        args.out,
    )


if __name__ == "__main__":
    main()
