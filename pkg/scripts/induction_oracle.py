"""Word-based induced maps against brute-force first returns on random fixtures."""
import argparse
import json

import numpy as np

from gietrenorm.fixtures import moebius_conjugate, random_path_aiet
from gietrenorm.renorm import RenormState, induced_map_error


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--fixtures", type=int, default=50)
    ap.add_argument("--steps", type=int, default=20)
    ap.add_argument("--points", type=int, default=100)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    out = []
    for k in range(args.fixtures):
        d = (2, 4, 5)[k % 3]
        kind = ("standard", "affine", "moebius")[(k // 3) % 3]
        T = random_path_aiet(rng, d, args.steps, 0.0 if kind == "standard" else 0.3)
        if kind == "moebius":
            T = moebius_conjugate(T, rng.uniform(-1, 1))
        st = RenormState(T, height_budget=10**7)
        errs = []
        for _ in range(args.steps):
            st.step_zorich()
            errs.append(induced_map_error(st, args.points, rng))
        out.append({"fixture": k, "d": d, "kind": kind, "max_error": max(errs)})
    print(json.dumps(out, indent=1))
    print("overall max error", max(r["max_error"] for r in out))


if __name__ == "__main__":
    main()
