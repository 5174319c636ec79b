"""Fractional perimeters, interactions and relative s-areas.

All double integrals of the kernel ``kappa(x, y) = |x - y|^(-n-2s) / alpha_{n-1}``
are evaluated on lines. A surface point ``z`` and a direction ``u`` are
drawn at random; the rest of the four-fold integral (the positions of
``x`` and ``y`` on the line) is done in closed form from the lists of
crossings or set intervals along that line. This keeps the estimators
finite-variance for every ``s`` in (0, 1/2), including the regime close
to 1/2 where almost all of the mass sits at tiny ``|x - y|``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .crossing import line_profiles
from .quadrature import (ALPHA, OMEGA_SPHERE, FractionalOrder, QuadratureConfig,
                         config_hash, cov_near_diagonal_integral, crossing_rectangles,
                         mc_integral, neville_limit, pow_diff, rect_kernel_integral,
                         sphere_directions)
from .sets import Ball, Box, Complement, HalfSpace, Intersection, clip_intervals

__all__ = [
    "FunctionalResult", "interaction", "s_perimeter", "s_perimeter_relative",
    "s_area", "scaled_limit_sweep", "SweepResult", "SET_PAIRS", "CROSSING_PARITY",
]

SET_PAIRS = "SetPairs"
CROSSING_PARITY = "CrossingParity"
_STREAM_TAGS = {SET_PAIRS: 1, CROSSING_PARITY: 2, "interaction": 3, "area": 4,
                "separated": 5}


@dataclass
class FunctionalResult:
    value: float
    std_error: float
    bias_bound: float = 0.0
    sample_count: int = 0
    seed: int | None = None
    config_hash: str = ""
    method: str = ""
    extra: dict = field(default_factory=dict)

    def to_record(self):
        rec = {"value": self.value, "std_error": self.std_error, "bias_bound": self.bias_bound,
               "sample_count": self.sample_count, "seed": self.seed,
               "config_hash": self.config_hash, "method": self.method}
        rec.update(self.extra)
        return rec


def _seed(seed, tag, *more):
    return [int(seed), _STREAM_TAGS[tag], *map(int, more)]


# ---------------------------------------------------------------------------
# anchor surfaces that can be sampled uniformly
# ---------------------------------------------------------------------------

class _SphereAnchor:
    """Exact round sphere (or circle) as an anchor for line integrals."""

    def __init__(self, center, radius):
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)
        self.dim = len(self.center)
        self.measure = OMEGA_SPHERE[self.dim] * self.radius ** (self.dim - 1)

    def sample(self, rng, m):
        u = sphere_directions(self.dim, rng, m)
        return self.center + self.radius * u, u


class _SurfaceAnchor:
    def __init__(self, S):
        self.S = S
        self.dim = S.dim
        self.measure = S.classical_measure()

    def sample(self, rng, m):
        return self.S.sample(rng, m)


class _PlanePatch:
    """Flat (n-1)-disk ``{(y - p).nu = 0, |y - c| < r}``, normal ``nu``."""

    def __init__(self, point, normal, center, radius):
        nu = np.asarray(normal, dtype=float)
        nu = nu / np.linalg.norm(nu)
        c = np.asarray(center, dtype=float)
        p = np.asarray(point, dtype=float)
        h = float(np.dot(c - p, nu))
        self.dim = len(nu)
        self.normal = nu
        self.center = c - h * nu
        rho2 = radius ** 2 - h ** 2
        if rho2 <= 0:
            raise ValueError("plane misses the anchor ball")
        self.rho = math.sqrt(rho2)
        if self.dim == 2:
            self.tangents = np.array([[-nu[1], nu[0]]])
            self.measure = 2.0 * self.rho
        else:
            a = np.zeros(3)
            a[int(np.argmin(np.abs(nu)))] = 1.0
            e1 = np.cross(nu, a)
            e1 /= np.linalg.norm(e1)
            self.tangents = np.array([e1, np.cross(nu, e1)])
            self.measure = math.pi * self.rho ** 2

    def sample(self, rng, m):
        if self.dim == 2:
            c = rng.uniform(-self.rho, self.rho, m)[:, None]
        else:
            r = self.rho * np.sqrt(rng.uniform(size=m))
            th = rng.uniform(0.0, 2.0 * math.pi, m)
            c = np.stack([r * np.cos(th), r * np.sin(th)], 1)
        pts = self.center + c @ self.tangents
        return pts, np.broadcast_to(self.normal, pts.shape).copy()


def _anchor_for(E, within=None):
    """Uniform sampler on ``boundary(E)`` (intersected with the ball ``within``)."""
    if isinstance(E, HalfSpace):
        if within is None:
            raise ValueError("an unbounded boundary needs a bounding ball")
        return _PlanePatch(E.point, E.normal, within.center, within.radius), within
    if isinstance(E, Ball):
        return _SphereAnchor(E.center, E.radius), within
    if hasattr(E, "boundary"):
        return _SurfaceAnchor(E.boundary()), within
    raise TypeError(f"no anchor surface for {type(E).__name__}")


# ---------------------------------------------------------------------------
# line estimators
# ---------------------------------------------------------------------------

def _anchored_sampler(anchor, A, B, s, within=None):
    """Per-sample integrand for ``I(A, B)`` anchored on a surface crossed once by every segment."""
    n = anchor.dim
    scale = anchor.measure * OMEGA_SPHERE[n] / ALPHA[n]

    def fn(rng, m):
        z, nz = anchor.sample(rng, m)
        u = sphere_directions(n, rng, m)
        ia = clip_intervals(_snap(A.intervals(z, u)), -np.inf, 0.0)
        ib = clip_intervals(_snap(B.intervals(z, u)), 0.0, np.inf)
        # t = -lambda on the A side
        t0, t1 = -ia[..., 1], -ia[..., 0]
        g = rect_kernel_integral(ib[:, :, None, 0], ib[:, :, None, 1],
                                 t0[:, None, :], t1[:, None, :], s)
        val = scale * np.abs(np.einsum("ij,ij->i", u, nz)) * np.nansum(g, axis=(1, 2))
        if within is not None:
            val = np.where(within.contains(z), val, 0.0)
        return val
    return fn


def _snap(iv, tol=1e-9):
    # the anchor lies on the interface: an interval end within rounding of
    # it must be exactly 0, since for s near 1/2 a sliver of width 1e-16
    # next to the anchor still carries O(1) mass
    return np.where(np.abs(iv) < tol, 0.0, iv)


def _bounded_part(A):
    if isinstance(A, (Ball, Box)):
        return A
    if isinstance(A, Intersection):
        for p in A.parts:
            if isinstance(p, (Ball, Box)):
                return p
    raise ValueError(f"{A!r} has no bounded part to sample from")


def _separated_sampler(A, B, s):
    """``x`` uniform in ``A`` (by rejection from a bounded part), exact radial integral into ``B``."""
    base = _bounded_part(A)
    n = base.dim
    scale = base.volume * OMEGA_SPHERE[n] / ALPHA[n]

    def fn(rng, m):
        x = base.sample(rng, m)
        inA = A.contains(x)
        u = sphere_directions(n, rng, m)
        iv = clip_intervals(B.intervals(x, u), 0.0, np.inf)
        lo = np.where(np.isnan(iv[..., 0]), 1.0, iv[..., 0])
        hi = np.where(np.isnan(iv[..., 1]), 1.0, iv[..., 1])
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(np.isnan(iv[..., 0]), 0.0, pow_diff(lo, hi, -2.0 * s))
        return np.where(inA, scale * r.sum(axis=1), 0.0)
    return fn


def _check_disjoint(A, B, seed):
    try:
        base = _bounded_part(A)
    except ValueError:
        return
    rng = np.random.default_rng([int(seed), 99])
    x = base.sample(rng, 4096)
    x = x[A.contains(x)]
    if len(x) and np.mean(B.contains(x)) > 1e-3:
        raise ValueError("interaction domains overlap")


def interaction(A, B, order, N, seed, *, interface=None, workers=1, chunk_size=1 << 15):
    """``I(A, B) = int_A int_B kappa``, Monte Carlo over lines.

    With ``interface`` (an object with ``sample`` and ``measure``, e.g. a
    surface or anchor patch) the lines are anchored on a hypersurface that
    every segment from ``A`` to ``B`` crosses exactly once; this is the
    variant to use when ``A`` and ``B`` touch along a face. Without it,
    ``x`` is drawn uniformly from ``A`` and the integral over ``B`` along
    each ray is done exactly; that estimator has infinite variance for
    ``s >= 1/4`` when the sets share a face, so it is meant for sets that
    are separated or touch at points.
    """
    s = order.s if isinstance(order, FractionalOrder) else FractionalOrder(order).s
    _check_disjoint(A, B, seed)
    if interface is not None:
        anchor = interface if hasattr(interface, "measure") else _SurfaceAnchor(interface)
        fn = _anchored_sampler(anchor, A, B, s)
        method = "anchored"
    else:
        if not getattr(A, "bounded", True) and getattr(B, "bounded", True):
            A, B = B, A
        fn = _separated_sampler(A, B, s)
        method = "separated"
    mean, err = mc_integral(fn, N, _seed(seed, "interaction"), chunk_size, workers)
    return FunctionalResult(mean, err, 0.0, int(N), seed,
                            config_hash({"op": "interaction", "A": repr(A), "B": repr(B),
                                         "s": s, "N": int(N), "method": method}),
                            method)


def _crossing_sampler(S, s, weight_window=None, delta_split=None, half=True):
    """Per-sample value of ``(1/2) int_{X(S)} kappa [window]`` anchored on ``S``."""
    n = S.dim
    scale = S.classical_measure() * OMEGA_SPHERE[n] / ALPHA[n] * (0.5 if half else 1.0)

    def fn(rng, m):
        z, nz = S.sample(rng, m)
        u = sphere_directions(n, rng, m)
        pos, neg, code = line_profiles(S, z, nz, u)
        # degenerate lines are redrawn
        for _ in range(20):
            bad = code != 0
            if not bad.any():
                break
            z2, n2 = S.sample(rng, int(bad.sum()))
            u2 = sphere_directions(n, rng, int(bad.sum()))
            p2, q2, c2 = line_profiles(S, z2, n2, u2)
            z, nz, u = z.copy(), nz.copy(), u.copy()
            z[bad], nz[bad], u[bad] = z2, n2, u2
            pos = _merge(pos, bad, p2)
            neg = _merge(neg, bad, q2)
            code = code.copy()
            code[bad] = c2
        win = None
        if weight_window is not None:
            iv = weight_window.intervals(z, u)
            win = (iv[:, 0, 0], iv[:, 0, 1])
        g = crossing_rectangles(pos, neg, s, math.inf, win)
        if delta_split is not None:
            g = g - crossing_rectangles(pos, neg, s, delta_split, win)
        return np.where(code != 0, 0.0, scale * np.abs(np.einsum("ij,ij->i", u, nz)) * g)
    return fn


def _merge(base, mask, repl):
    k = max(base.shape[1], repl.shape[1])
    out = np.full((len(base), k), np.nan)
    out[:, :base.shape[1]] = base
    out[mask] = np.nan
    out[mask, :repl.shape[1]] = repl
    return out


def s_perimeter(E, order, method=SET_PAIRS, N=100_000, seed=0, *, workers=1,
                chunk_size=1 << 15):
    """Fractional perimeter of a bounded solid ``E``.

    ``SetPairs`` integrates ``kappa`` over ``E x CE`` using membership of
    ``E`` along each line. ``CrossingParity`` integrates half of ``kappa``
    over pairs whose segment crosses ``boundary(E)`` an odd number of
    times, using only the surface. The two use independent streams.
    """
    s = order.s
    if not getattr(E, "bounded", True):
        raise ValueError("s_perimeter needs a bounded set; use s_perimeter_relative")
    if method == SET_PAIRS:
        anchor, _ = _anchor_for(E)
        fn = _anchored_sampler(anchor, E, Complement(E), s)
    elif method == CROSSING_PARITY:
        S = E.boundary()
        fn = _crossing_sampler(S, s)
    else:
        raise ValueError(f"unknown method {method!r}")
    mean, err = mc_integral(fn, N, _seed(seed, method), chunk_size, workers)
    return FunctionalResult(mean, err, 0.0, int(N), seed,
                            config_hash({"op": "s_perimeter", "E": repr(E), "s": s,
                                         "N": int(N), "method": method}), method)


def s_perimeter_relative(E, Omega, order, N=100_000, seed=0, *, workers=1,
                         chunk_size=1 << 15):
    """``I(E n O, CE n O) + I(E n O, CE n CO) + I(E n CO, CE n O)`` for a ball ``O``.

    ``E`` must be convex (a ball, box or half-space) so that segments from
    ``E`` to its complement cross ``boundary(E)`` once. The terms are
    regrouped as ``I(E n O, CE) + I(CE n O, E n CO)`` and each is split at
    the doubled ball ``O'``: pairs inside ``O'`` are anchored on
    ``boundary(E) n O'``, the remainder is separated from ``O`` by a gap
    and is integrated along rays out to infinity in closed form, so no
    truncation bias arises.
    """
    s = order.s
    if not isinstance(Omega, Ball):
        raise TypeError("relative perimeter supports ball windows")
    big = Ball(Omega.center, 2.0 * Omega.radius)
    anchor, within = _anchor_for(E, big)
    cE = Complement(E)
    terms = [
        ("anchored", _anchored_sampler(anchor, Intersection(E, Omega), Intersection(cE, big), s,
                                       within)),
        ("anchored", _anchored_sampler(anchor, Intersection(cE, Omega),
                                       Intersection(E, Complement(Omega), big), s, within)),
        ("separated", _separated_sampler(Intersection(E, Omega),
                                         Intersection(cE, Complement(big)), s)),
        ("separated", _separated_sampler(Intersection(cE, Omega),
                                         Intersection(E, Complement(big)), s)),
    ]
    vals, errs = [], []
    for i, (kind, fn) in enumerate(terms):
        m, e = mc_integral(fn, N, _seed(seed, "separated" if kind == "separated" else SET_PAIRS, i),
                           chunk_size, workers)
        vals.append(m)
        errs.append(e)
    return FunctionalResult(math.fsum(vals), math.sqrt(math.fsum(e * e for e in errs)), 0.0,
                            4 * int(N), seed,
                            config_hash({"op": "s_perimeter_relative", "E": repr(E),
                                         "Omega": repr(Omega), "s": s, "N": int(N)}),
                            "relative", {"terms": vals, "term_errors": errs})


def _distance_to_window_boundary(S, Omega, n_probe=4096):
    pts, _ = S.sample(np.random.default_rng(12345), n_probe)
    if isinstance(Omega, Ball):
        d = Omega.radius - np.linalg.norm(pts - Omega.center, axis=1)
        if hasattr(S, "boundary") and isinstance(S.boundary, np.ndarray) and len(S.boundary):
            d = np.concatenate([d, Omega.radius - np.linalg.norm(S.boundary - Omega.center, axis=1)])
        if hasattr(S, "vertices"):
            d = np.concatenate([d, Omega.radius - np.linalg.norm(S.vertices - Omega.center, axis=1)])
        return float(d.min())
    d = np.minimum(pts - Omega.lo, Omega.hi - pts).min(axis=1)
    return float(d.min())


def s_area(S, Omega, order, config=None, N=200_000, seed=0, *, delta=None, workers=1):
    """Relative s-area ``(1/2) int_{X(S)} kappa max(chi_O(x), chi_O(y))``.

    Split at ``|x - y| = delta``: the near part is a deterministic product
    rule over the surface and directions; the far part is Monte Carlo over
    anchored lines. ``delta`` defaults to ``min(0.1 * feature size,
    dist(S, boundary of O))`` and is halved until the single-crossing check
    passes. Returns a ``FunctionalResult`` whose ``std_error`` combines
    the quadrature and sampling errors.
    """
    cfg = config or QuadratureConfig()
    s = order.s
    gap = _distance_to_window_boundary(S, Omega)
    if gap <= 0:
        raise ValueError("the surface must lie inside the window")
    if delta is None:
        delta = min(0.1 * S.feature_size, gap)
    for _ in range(8):
        try:
            near, near_err = cov_near_diagonal_integral(S, Omega, order, delta, cfg)
            break
        except ValueError:
            delta *= 0.5
    else:
        raise ValueError("no admissible near-diagonal width found")
    fn = _crossing_sampler(S, s, weight_window=Omega, delta_split=delta)
    far, far_err = mc_integral(fn, N, _seed(seed, "area"), cfg.chunk_size, workers)
    return FunctionalResult(near + far, math.hypot(near_err, far_err), 0.0, int(N), seed,
                            config_hash({"op": "s_area", "S": repr(S), "Omega": repr(Omega),
                                         "s": s, "N": int(N), "delta": delta,
                                         "cfg": cfg.to_dict()}),
                            "near+far", {"near": near, "near_error": near_err, "far": far,
                                         "far_error": far_err, "delta": delta})


@dataclass
class SweepResult:
    s_grid: list
    scaled: list
    scaled_errors: list
    limit: float
    limit_error: float

    def to_record(self):
        return {"s_grid": self.s_grid, "scaled": self.scaled, "scaled_errors": self.scaled_errors,
                "limit": self.limit, "limit_error": self.limit_error}


def scaled_limit_sweep(evaluator, s_grid, extrapolation="neville"):
    """Evaluate ``(1 - 2s) * value(s)`` on ``s_grid`` and extrapolate to ``s = 1/2``.

    ``evaluator(s)`` returns ``(value, error)``. Extrapolation is by the
    interpolating polynomial in ``t = 1 - 2s``.
    """
    s_grid = [float(s) for s in s_grid]
    if len(s_grid) < 3:
        raise ValueError("need at least three values of s")
    if any(b <= a for a, b in zip(s_grid, s_grid[1:])):
        raise ValueError("s grid must be strictly increasing")
    for s in s_grid:
        FractionalOrder(s)
    if extrapolation != "neville":
        raise ValueError(f"unknown extrapolation {extrapolation!r}")
    vals, errs = [], []
    for s in s_grid:
        v, e = evaluator(s)
        vals.append((1.0 - 2.0 * s) * v)
        errs.append((1.0 - 2.0 * s) * e)
    t = [1.0 - 2.0 * s for s in s_grid]
    limit, lerr = neville_limit(t, vals, errs)
    return SweepResult(s_grid, vals, errs, limit, lerr)
