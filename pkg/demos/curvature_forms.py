"""Nonlocal mean curvature computed four ways, and its classical limit.

On a circle every form (volume principal value, surface flux, a single
tangent direction, and the average over directions) must agree with the
closed form. On a half-circle the missing half weakens the value, while
flux and volume still agree. On a sphere mesh the flat facets bias the
value by an amount that shrinks as the mesh is refined.

    python3 demos/curvature_forms.py
"""

import math

from scipy.special import gamma

from fracsurf import curvature as cv
from fracsurf import geometry as g
from fracsurf.quadrature import FractionalOrder


def circle_closed_form(s, R=1.0):
    return -(2 * R) ** (-2 * s) * math.sqrt(math.pi) * gamma(0.5 - s) / (2 * s * gamma(1 - s))


def ball_closed_form(s, R=1.0):
    return -(1 / s) * (2 * R) ** (-2 * s) / (1 - 2 * s)


def forms(S, z, o):
    e = S.tangent_basis_at(z)[0]
    return {"volume": cv.mean_curvature_volume(S, z, o),
            "flux": cv.mean_curvature_flux(S, z, o),
            "directional": cv.directional_curvature(S, z, e, o),
            "average": cv.mean_from_directional(S, z, o)}


def show(title, S, z, s, exact=None):
    o = FractionalOrder(s)
    print(f"{title}, s={s}" + (f"  (closed form {exact:.8f})" if exact is not None else ""))
    for name, r in forms(S, z, o).items():
        print(f"  {name:<12} {r.value:14.8f}  err {r.error_estimate:.1e}")


def main():
    circle = g.make_circle([0, 0], 1)
    show("unit circle at (1, 0)", circle, [1.0, 0.0], 0.25, circle_closed_form(0.25))
    arc = g.make_arc([0, 0], 1, 0, math.pi)
    show("\nhalf-circle at (0, 1)", arc, [0.0, 1.0], 0.25)

    print("\nsphere mesh, facet centroid, s=0.25:")
    exact = ball_closed_form(0.25)
    for level in (2, 3, 4):
        m = g.make_sphere_mesh([0, 0, 0], 1, level)
        z = m.vertices[m.triangles[0]].mean(axis=0)
        v = cv.mean_curvature_volume(m, z, FractionalOrder(0.25)).value
        print(f"  level {level}: {v:.5f}  ({v / exact - 1:+.2%} from the round ball)")

    print("\n(1 - 2s) H_s towards s = 1/2 (classical curvature with the sign convention):")
    for R in (1.0, 2.0):
        c = g.make_circle([0, 0], R)
        sw = cv.local_limit_estimate(c, [R, 0.0], [0.30, 0.40, 0.45, 0.49])
        print(f"  R={R:g}: " + ", ".join(f"{v:.4f}" for v in sw.scaled)
              + f" -> {sw.limit:.5f} (classical {cv.classical_curvature(c, [R, 0.0]):+.3f})")


if __name__ == "__main__":
    main()
