"""Perturbed Whitney seeds: monitor verdicts and blow-up statistics across eps and m.

    python3 scripts/perturbed_sweep.py [--eps 0 0.05 0.1] [--m 2 3] [--n 512]
"""

import argparse

from ecsflow.blowup import BlowupError, blowup_analysis
from ecsflow.flow import FlowConfig, run
from ecsflow.monitors import check_history
from ecsflow.seeds import SeedValidationError, perturbed_seed


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--eps", type=float, nargs="+", default=[0.0, 0.05, 0.1])
    ap.add_argument("--m", type=int, nargs="+", default=[2, 3])
    ap.add_argument("--n", type=int, default=512)
    ap.add_argument("--a-stop-factor", type=float, default=40.0)
    args = ap.parse_args()
    print("  m   eps   verdicts   T_hat        frames  delta growth  r growth  final residual")
    for m in args.m:
        for eps in args.eps:
            try:
                seed = perturbed_seed(m, args.n, eps)
            except SeedValidationError as exc:
                print(f"  {m}  {eps:5.3f}  seed rejected: {exc}")
                continue
            h = run(seed, FlowConfig(a_stop_factor=args.a_stop_factor))
            rep = check_history(h)
            ok = "all pass" if rep.ok else "FAIL"
            try:
                b = blowup_analysis(h, a0=10.0 * h.series["maxk"][0])
            except BlowupError as exc:
                print(f"  {m}  {eps:5.3f}  {ok:9s}  blow-up analysis failed: {exc}")
                continue
            r = b["r"]
            print(f"  {m}  {eps:5.3f}  {ok:9s}  {b['type'].T_hat:.8f}  {len(b['frames']):6d}  "
                  f"{b['type'].growth:12.3f}  {r[-1] / r[0]:8.3f}  {b['fits'][-1].residual:14.4f}")


if __name__ == "__main__":
    main()
