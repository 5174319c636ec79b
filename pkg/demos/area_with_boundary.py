"""Fractional area of a half-circle inside the window B(0, 2).

The curve has two endpoints, so it does not bound a set; the area counts
pairs whose segment crosses it an odd number of times. Pairs closer than
a width delta are integrated deterministically, the rest by sampling lines.
As s -> 1/2 the rescaled area tends to the arc length pi.

    python3 demos/area_with_boundary.py [--N 200000] [--seed 7]
"""

import argparse
import math

from fracsurf import functionals as f
from fracsurf import geometry as g
from fracsurf.quadrature import FractionalOrder
from fracsurf.sets import Ball


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--N", type=int, default=200_000)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    arc = g.make_arc([0, 0], 1, 0, math.pi)
    window = Ball([0, 0], 2)

    def ev(s):
        r = f.s_area(arc, window, FractionalOrder(s), N=args.N, seed=args.seed)
        x = r.extra
        print(f"  s={s:<5} area {r.value:9.4f} +- {r.std_error:.4f}"
              f"   near {x['near']:.4f} (delta {x['delta']:.3g})  far {x['far']:.4f}")
        return r.value, r.std_error

    sw = f.scaled_limit_sweep(ev, [0.30, 0.40, 0.45, 0.49])
    print("(1 - 2s) area: " + ", ".join(f"{v:.4f}" for v in sw.scaled))
    print(f"extrapolated {sw.limit:.4f} +- {sw.limit_error:.4f}; pi = {math.pi:.4f}")


if __name__ == "__main__":
    main()
