"""Process tomography of the memory channel (2.4 s transverse decay, T1 6 s,
9 deg/s drift) with and without shot noise.

    python3 scripts/memory_tomography.py --shots 275000 --repeats 50
"""
import argparse
import math

import numpy as np

from ddkit import io
from ddkit import tomography as tm


def fidelities(params, times, shots, rng):
    out = []
    for t in times:
        f = tm.channel_function(params, t)
        if shots:
            chi = tm.process_tomography(lambda rho: tm.population_oracle(f(rho), rng), shots)
        else:
            chi = tm.process_tomography(f)
        out.append(tm.worst_case_fidelity(chi))
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--times", type=float, nargs="+", default=[1.0, 2.0, 3.0])
    ap.add_argument("--shots", type=int, default=275_000)
    ap.add_argument("--repeats", type=int, default=20)
    ap.add_argument("--seed", type=int, default=2011)
    ap.add_argument("--out", default="-")
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    params = tm.memory_channel()
    clean = fidelities(params, args.times, 0, rng)
    no_drift = fidelities(params.without_rotation(), args.times, 0, rng)
    noisy = np.array([fidelities(params, args.times, args.shots, rng) for _ in range(args.repeats)])
    chi1 = tm.process_tomography(tm.channel_function(params, args.times[0]))
    io.write_json(
        {
            "channel": params.to_dict(),
            "times_s": args.times,
            "fidelity_noiseless": clean,
            "fidelity_without_drift": no_drift,
            "fidelity_shot_noise_mean": noisy.mean(axis=0).tolist(),
            "fidelity_shot_noise_std": noisy.std(axis=0, ddof=1).tolist() if args.repeats > 1 else None,
            "shots": args.shots,
            "chi_first_time": chi1.to_dict(),
            "equatorial_contrast": [math.exp(-t / params.transverse_time) for t in args.times],
        },
        args.out,
    )


if __name__ == "__main__":
    main()
