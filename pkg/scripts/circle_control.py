"""Circle control: exact shrink law and the type-I indicator for several m.

    python3 scripts/circle_control.py [--m 2 3 4] [--n 512]
"""

import argparse

import numpy as np

from ecsflow.blowup import blowup_analysis
from ecsflow.flow import FlowConfig, run
from ecsflow.seeds import circle


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--m", type=int, nargs="+", default=[2, 3, 4])
    ap.add_argument("--n", type=int, default=512)
    ap.add_argument("--radius", type=float, default=1.0)
    args = ap.parse_args()
    R0 = args.radius
    print("  m   T exact      T_hat        max R err (to R0/4)  delta_j                 r_j flat  reaper residual")
    for m in args.m:
        h = run(circle(m, args.n, R0), FlowConfig(a_stop_factor=60.0))
        t = h.series["t"]
        sq = R0**2 - 2 * m * t
        sel = sq >= (R0 / 4) ** 2
        err = np.max(np.abs(1 / h.series["maxk"][sel] / np.sqrt(sq[sel]) - 1))
        b = blowup_analysis(h, a0=10.0 / R0)
        print(f"  {m}  {R0**2 / (2 * m):.8f}  {b['type'].T_hat:.8f}  {err:19.2e}  "
              f"{' '.join(f'{d:.4f}' for d in b['type'].delta[:4])}  "
              f"{str(np.allclose(b['r'], 1.0, rtol=1e-6)):8s}  {b['fits'][-1].residual:.3f}")


if __name__ == "__main__":
    main()
