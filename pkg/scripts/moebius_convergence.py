"""Decay of nonlinearity and C1 distance under renormalization of Moebius
conjugates of periodic-type IETs, plus conjugacy reconstruction."""
import json
import math

import numpy as np

from gietrenorm import diffeo
from gietrenorm.analysis import distances, linear_fit, reconstruct_conjugacy
from gietrenorm.fixtures import d4_loop, golden_iet, moebius_conjugate, periodic_iet
from gietrenorm.renorm import LengthOrbit


def rate(y, floor=1e-10):
    y = np.asarray(y)
    below = np.nonzero(y < floor)[0]
    end = int(below[0]) if below.size else y.size
    f = linear_fit(np.arange(end), np.log(y[:end]))
    return {"alpha": math.exp(f.slope), "r2": f.r2, "window": end}


def main(steps=40):
    out = []
    for name, T0 in (("golden", golden_iet()), ("d4", periodic_iet(d4_loop()))):
        for u in (0.3, 0.8):
            T = moebius_conjugate(T0, u)
            orb = LengthOrbit(T)
            N, C = [orb.total_nonlinearity()], [distances(orb.current_map()).d_c1_standard]
            for _ in range(steps):
                orb.step_zorich()
                N.append(orb.total_nonlinearity())
                C.append(distances(orb.current_map()).d_c1_standard)
            cand = reconstruct_conjugacy(T, T0)
            out.append({"base": name, "u": u, "N": rate(N), "C1": rate(C),
                        "defect": cand.defect,
                        "distance": cand.distance_to(diffeo.Moebius(u).inverse)})
    print(json.dumps(out, indent=1))


if __name__ == "__main__":
    main()
