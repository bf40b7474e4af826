"""Compute reference values with routes independent of the package and freeze them.

The Lorentzian exponent is evaluated as the raw double integral

    chi = (sigma^2 / 2) int_0^T int_0^T s(u) s(v) exp(-Gamma |u - v|) du dv

with scipy's dblquad on every pair of constant-sign segments (diagonal
blocks split along u = v). Only pulse times are taken from the package.

Usage: python3 scripts/freeze_oracles.py [--out tests/data/oracles.json]
"""
from __future__ import annotations

import argparse
import json
import math
import time
from pathlib import Path

import numpy as np
import sympy as sp
from scipy import integrate

from ddkit import sequences as sq

SIGMA, GAMMA = 23.8, 37.5


def chi_double_integral(times, T, sigma, gamma):
    b = np.concatenate([[0.0], np.asarray(times, dtype=float), [T]])
    sign = [(-1) ** a for a in range(len(b) - 1)]
    total = 0.0
    kern = lambda v, u: math.exp(-gamma * abs(u - v))  # noqa: E731
    opts = dict(epsabs=1e-14, epsrel=1e-12)
    for a in range(len(b) - 1):
        lo, hi = b[a], b[a + 1]
        # diagonal block: twice the triangle v < u
        val, _ = integrate.dblquad(kern, lo, hi, lambda u: lo, lambda u: u, **opts)
        total += 2.0 * val
        for c in range(a + 1, len(b) - 1):
            val, _ = integrate.dblquad(kern, lo, hi, lambda u: b[c], lambda u: b[c + 1], **opts)
            total += 2.0 * sign[a] * sign[c] * val
    return 0.5 * sigma**2 * total


def symbolic_filters():
    w, t = sp.symbols("omega t", positive=True)
    i = sp.I

    def filt(bounds):
        z = sum((-1) ** k * (sp.exp(i * w * bounds[k + 1]) - sp.exp(i * w * bounds[k])) for k in range(len(bounds) - 1))
        return sp.simplify(sp.expand(z * sp.conjugate(z) / 2, complex=True).rewrite(sp.cos))

    free = filt([0, t])
    hahn = filt([0, t / 2, t])
    ok_free = sp.simplify(free - 2 * sp.sin(w * t / 2) ** 2) == 0
    ok_hahn = sp.simplify((hahn - 8 * sp.sin(w * t / 4) ** 4).rewrite(sp.exp)) == 0
    return {"free_is_2sin2": bool(ok_free), "hahn_is_8sin4": bool(ok_hahn)}


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=str(Path(__file__).resolve().parents[1] / "tests" / "data" / "oracles.json"))
    args = ap.parse_args(argv)
    out = {"bath": {"sigma_delta": SIGMA, "gamma": GAMMA}, "exponents": []}

    cases = [
        ("free", sq.free_evolution(0.01)),
        ("free", sq.free_evolution(0.3)),
        ("cpmg", sq.cpmg(1, 0.5)),
        ("cpmg", sq.cpmg(20, 1.0)),
        ("eta", sq.eta_family(20, 1.0, 0.705)),
        ("cpmg", sq.cpmg(70, 1.0)),
        ("eta", sq.eta_family(70, 1.0, 0.565)),
        ("udd", sq.udd(3, 0.2)),
    ]
    for n in (4, 8, 16, 32, 64, 128):
        cases += [("cpmg", sq.cpmg(n, 1.0)), ("udd", sq.udd(n, 1.0))]
    for fam, seq in cases:
        t0 = time.time()
        chi = chi_double_integral(seq.pulse_times, seq.total_time, SIGMA, GAMMA)
        out["exponents"].append(
            {
                "family": fam,
                "n": seq.n,
                "total_time": seq.total_time,
                "eta": seq.family_params.get("eta"),
                "chi": chi,
            }
        )
        print(f"{fam:5s} n={seq.n:4d} T={seq.total_time:5.2f} chi={chi:.15g} ({time.time() - t0:.1f}s)", flush=True)

    out["symbolic"] = symbolic_filters()
    print(out["symbolic"])
    Path(args.out).write_text(json.dumps(out, indent=2) + "\n")


if __name__ == "__main__":
    main()
