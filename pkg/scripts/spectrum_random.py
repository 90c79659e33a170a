"""Lyapunov spectra of random symmetric IETs in d = 4 and d = 5."""
import argparse
import json
import time

import numpy as np

from gietrenorm.cocycle import lyapunov_spectrum
from gietrenorm.combinatorics import symmetric_pair
from gietrenorm.fixtures import random_iet
from gietrenorm.renorm import LengthOrbit


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=10_000)
    ap.add_argument("--seeds", type=int, default=5)
    args = ap.parse_args()
    rows = []
    for d in (4, 5):
        for seed in range(args.seeds):
            t0 = time.time()
            T = random_iet(np.random.default_rng(seed), d, symmetric_pair(d))
            orb = LengthOrbit(T).run(args.steps)
            th = np.sort(lyapunov_spectrum(orb.zorich_matrices).thetas)[::-1]
            rows.append({"d": d, "seed": seed, "thetas": th.tolist(),
                         "normalized": (th / th[0]).tolist(), "seconds": time.time() - t0})
    print(json.dumps(rows, indent=1))


if __name__ == "__main__":
    main()
