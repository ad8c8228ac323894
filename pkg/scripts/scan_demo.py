"""Single-crease destabilizer scan on [-1, 1] for v = 1 and a skewed w = (p + a)^(-4)."""

import argparse
from fractions import Fraction

from vwtoric.geometry import interval
from vwtoric.invariants import ScanGrid, scan_destabilizers
from vwtoric.weights import affine_power, constant


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--a", default="101/100", help="shift a > 1 of the weight base p + a")
    ap.add_argument("--offsets", type=int, default=9)
    ap.add_argument("--top", type=int, default=5)
    args = ap.parse_args()
    P = interval(-1, 1)
    one = constant(1, 1)
    for name, w in [("w = 1", one), (f"w = (p + {args.a})^-4", affine_power((1,), Fraction(args.a), -4))]:
        res = scan_destabilizers(P, one, w, ScanGrid.lattice(1, 1, args.offsets))
        print(name)
        for r in res[: args.top]:
            print("  ", r.to_json())


if __name__ == "__main__":
    main()
