"""Fractional perimeter of the unit disk and its rescaled limit.

Two estimators of the same quantity are run side by side: one uses the
solid set (membership along lines), the other only the boundary curve
(odd-crossing pairs). Then (1 - 2s) times the perimeter relative to the
window B(0, 2) is followed towards s = 1/2 and extrapolated; the limit is
the classical length 2*pi of the circle.

    python3 demos/perimeter_to_length.py [--N 200000] [--seed 7]
"""

import argparse
import math

from scipy.special import gamma

from fracsurf import functionals as f
from fracsurf.quadrature import FractionalOrder
from fracsurf.sets import Ball


def disk_closed_form(s):
    return (math.pi / 2) * 2 ** (1 - 2 * s) / (2 * s * (1 - 2 * s)) * (
        2 * math.sqrt(math.pi) * gamma(1.5 - s) / gamma(2 - s))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--N", type=int, default=200_000)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    disk = Ball([0, 0], 1)
    print("s      SetPairs            CrossingParity      closed form")
    for s in (0.1, 0.25, 0.4):
        o = FractionalOrder(s)
        a = f.s_perimeter(disk, o, f.SET_PAIRS, args.N, args.seed)
        b = f.s_perimeter(disk, o, f.CROSSING_PARITY, args.N, args.seed)
        print(f"{s:<6} {a.value:8.4f} +- {a.std_error:6.4f}  "
              f"{b.value:8.4f} +- {b.std_error:6.4f}  {disk_closed_form(s):8.4f}")

    window = Ball([0, 0], 2)

    def ev(s):
        r = f.s_perimeter_relative(disk, window, FractionalOrder(s), args.N, args.seed)
        return r.value, r.std_error

    sw = f.scaled_limit_sweep(ev, [0.30, 0.40, 0.45, 0.49])
    print("\n(1 - 2s) Per_s(B1, B2):")
    for s, v, e in zip(sw.s_grid, sw.scaled, sw.scaled_errors):
        print(f"  s={s:<5} {v:8.4f} +- {e:.4f}")
    print(f"extrapolated {sw.limit:.4f} +- {sw.limit_error:.4f}; 2*pi = {2 * math.pi:.4f}")


if __name__ == "__main__":
    main()
