"""Series diagnostics at good returns of the d = 4 periodic loop."""
import json
import math

import numpy as np

from gietrenorm.cocycle import lyapunov_spectrum, oseledets_spaces, rdc_report
from gietrenorm.fixtures import d4_loop, periodic_iet, zorich_blocks, zorich_period
from gietrenorm.renorm import LengthOrbit


def main(returns=30, window=120, dps=160):
    loop = d4_loop()
    p = zorich_period(loop)
    blocks = zorich_blocks(loop)
    spacing = 2 * p
    orb = LengthOrbit(periodic_iet(loop, dps), "extended", dps).run(returns * spacing + 2 * window)
    mats = orb.zorich_matrices
    times = list(range(0, returns * spacing + 1, spacing))
    splits = {n: oseledets_spaces(mats, n, window, 2, 1, past=blocks * (2 * window // p)) for n in times}
    rep = rdc_report(mats, times, splits)
    theta = np.sort(lyapunov_spectrum(blocks * 120).thetas)[::-1]
    print(json.dumps({"ratio_B": rep.fitted_ratio_B, "ratio_F": rep.fitted_ratio_F,
                      "target": math.exp(-theta[1] * spacing), "S": list(rep.subexp_stat),
                      "delta": rep.delta_hat}, indent=1))


if __name__ == "__main__":
    main()
