"""Refinement study: identity residuals on the seed and run-level quantities versus N.

    python3 scripts/resolution_study.py [--n 256 512 1024]
"""

import argparse

import numpy as np

from ecsflow.blowup import estimate_T
from ecsflow.curve import identity_residuals
from ecsflow.flow import FlowConfig, run
from ecsflow.monitors import check_history
from ecsflow.seeds import whitney_lobe


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, nargs="+", default=[256, 512, 1024])
    ap.add_argument("--a-stop-factor", type=float, default=25.0)
    args = ap.parse_args()

    print("seed identities  (|grad r|^2 + r^2 p^2 - 1,  lap r - r p (p - k))")
    prev = None
    for n in (512, 1024, 2048, 4096):
        e = np.array(identity_residuals(whitney_lobe(2, n)))
        order = "" if prev is None else "  order " + " ".join(f"{x:.3f}" for x in np.log2(prev / e))
        print(f"  N={n:5d}  {e[0]:.3e}  {e[1]:.3e}{order}")
        prev = e

    print(f"\nflow to {args.a_stop_factor:g}x max|A|")
    print("      N      T_hat     I_kp drift   min p/r   verdicts")
    for n in args.n:
        h = run(whitney_lobe(2, n), FlowConfig(a_stop_factor=args.a_stop_factor))
        T, _ = estimate_T(h.series["t"], h.series["maxk"])
        ikp = h.series["I_kp"]
        rep = check_history(h)
        failing = [v.name for v in rep.verdicts if v.status != "pass"]
        print(f"  {n:5d}  {T:.10f}  {np.max(np.abs(ikp / ikp[0] - 1)):.2e}  "
              f"{h.series['min_p_over_r'].min():.6f}  {'all pass' if not failing else failing}")


if __name__ == "__main__":
    main()
