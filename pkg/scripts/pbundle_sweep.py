"""Extremal profile positivity across the Hirzebruch-type family d=1, xi=1, c=2 as Scal varies."""

import argparse

from vwtoric.pbundle import AdmissibleData, stability_report
from vwtoric.weights import constant


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--scal", type=int, nargs="*", default=[-50, -10, 0, 4, 10, 50])
    ap.add_argument("--pipeline", choices=["exact", "float"], default="exact")
    args = ap.parse_args()
    one = constant(1, 1)
    print(f"{'Scal':>6s} {'A1':>12s} {'A2':>12s} {'margin':>12s} {'identity':>10s}  verdict")
    for s in args.scal:
        rep = stability_report(AdmissibleData([(1, s, 1, 2)], one, one), pipeline=args.pipeline)
        sol = rep.solution
        print(f"{s:6d} {float(sol.A1):12.6g} {float(sol.A2):12.6g} {rep.positivity.margin:12.4g} "
              f"{rep.identity_residual:10.2e}  {rep.verdict}")


if __name__ == "__main__":
    main()
