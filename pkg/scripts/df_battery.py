"""Donaldson-Futaki invariant vs polytope Futaki functional over a battery of PL functions."""

import argparse
from fractions import Fraction

from vwtoric.geometry import interval
from vwtoric.invariants import PLConvex
from vwtoric.testconfig import DISCREPANCY_NOTE, build_config, donaldson_futaki
from vwtoric.weights import parse_weight

BATTERY = [
    [((1,), 0), ((-1,), 0)],
    [((1,), Fraction(-1, 2)), ((0,), 0)],
    [((-1,), Fraction(-1, 3)), ((0,), 0)],
    [((2,), 0), ((0,), Fraction(1, 2)), ((-1,), 0)],
    [((Fraction(1, 2),), Fraction(1, 4)), ((-3,), -1), ((0,), 0)],
    [((1,), 1), ((0,), 1)],
]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--v", default="1")
    ap.add_argument("--w", default="1")
    ap.add_argument("--pipeline", choices=["exact", "float"], default=None)
    args = ap.parse_args()
    P = interval(-1, 1)
    v, w = parse_weight(args.v, 1), parse_weight(args.w, 1)
    print(f"{'f':44s} {'DF':>14s} {'F^P':>14s} {'ratio':>10s}")
    for pairs in BATTERY:
        f = PLConvex.from_pairs(pairs)
        R = max(f.exact(vert) for vert in P.vertices) + 1
        rec = donaldson_futaki(build_config(P, f, R), v, w, pipeline=args.pipeline)
        label = "max(" + ", ".join(f"{a[0]}*p + {b}" for a, b in pairs) + ")"
        print(f"{label:44s} {float(rec.DF):14.8g} {float(rec.F_P):14.8g} {str(rec.ratio):>10s}")
    print(DISCREPANCY_NOTE)


if __name__ == "__main__":
    main()
