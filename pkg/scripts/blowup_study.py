"""Growth of the type indicator and r_j against log a_j for the Whitney run.

Fits delta_j and r_j linearly in log a_j at two resolutions and extrapolates
the curvature range a 3x growth of delta_j would need.

    python3 scripts/blowup_study.py [--n 512 1024] [--a-stop-factor 60]
"""

import argparse
import math
import time

import numpy as np

from ecsflow.blowup import blowup_analysis
from ecsflow.flow import FlowConfig, run
from ecsflow.seeds import whitney_lobe


def study(n, a_stop_factor):
    t0 = time.perf_counter()
    h = run(whitney_lobe(2, n), FlowConfig(a_stop_factor=a_stop_factor))
    res = blowup_analysis(h, a0=10.0 * h.series["maxk"][0])
    a = np.array([f.a for f in res["frames"]])
    delta = res["type"].delta
    r = res["r"]
    resid = np.array([f.residual for f in res["fits"]])
    print(f"N={n}  steps={int(h.series['step'][-1])}  T_hat={res['type'].T_hat:.10f}  "
          f"time={time.perf_counter() - t0:.1f}s")
    print("   j        a_j     delta_j        r_j   residual       c")
    for f, d, rr, fit in zip(res["frames"], delta, r, res["fits"]):
        print(f"  {f.j:2d} {f.a:10.3f} {d:11.4f} {rr:10.4f} {fit.residual:10.4f} {fit.c:7.4f}")
    la = np.log(a)
    bd = np.polyfit(la, delta, 1)[0]
    br = np.polyfit(la, r, 1)[0]
    need_d = (2 * delta[0]) / bd if bd > 0 else math.inf  # delta[0] -> 3 delta[0]
    need_r = (3 * r[0]) / br if br > 0 else math.inf
    print(f"  d delta / d log a = {bd:.3f}  -> 3x growth needs a_last/a_first ~ e^{need_d:.1f}")
    print(f"  d r / d log a     = {br:.3f}  -> 4x growth needs a_last/a_first ~ e^{need_r:.1f}")
    print(f"  residual slope per log a = {np.polyfit(la, resid, 1)[0]:.4f}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, nargs="+", default=[512, 1024])
    ap.add_argument("--a-stop-factor", type=float, default=60.0)
    args = ap.parse_args()
    for n in args.n:
        study(n, args.a_stop_factor)


if __name__ == "__main__":
    main()
