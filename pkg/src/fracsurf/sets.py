"""Solid sets and windows, described by their intersections with lines.

Everything the pair integrators need from a set is the list of parameter
intervals ``{t : o + t d in set}`` along a batch of lines. These are
returned as padded ``(N, K, 2)`` arrays; unused slots hold ``nan``.
Intervals are closed-vs-open agnostic since boundaries are null sets.
"""

from __future__ import annotations

import math

import numpy as np

from . import _kernels

__all__ = [
    "SolidSet", "Ball", "Box", "HalfSpace", "ConvexPolyhedron",
    "Complement", "Intersection", "Region", "intersect_intervals",
    "complement_intervals", "clip_intervals", "unit_ball_volume",
]


def unit_ball_volume(n):
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1)


def _empty(n, k=1):
    return np.full((n, k, 2), np.nan)


def _compact(iv):
    """Drop empty slots (nan or lo >= hi) and sort by left end."""
    lo, hi = iv[..., 0], iv[..., 1]
    ok = ~np.isnan(lo) & (hi > lo)
    key = np.where(ok, lo, np.inf)
    order = np.argsort(key, axis=1, kind="stable")
    iv = np.take_along_axis(iv, order[..., None], 1)
    ok = np.take_along_axis(ok, order, 1)
    k = max(int(ok.sum(axis=1).max(initial=0)), 1)
    iv = iv[:, :k].copy()
    iv[~ok[:, :k]] = np.nan
    return iv


def intersect_intervals(a, b):
    """Pairwise intersection of two padded interval lists (each sorted, disjoint)."""
    lo = np.maximum(a[:, :, None, 0], b[:, None, :, 0])
    hi = np.minimum(a[:, :, None, 1], b[:, None, :, 1])
    out = np.stack([lo, hi], axis=-1).reshape(len(a), -1, 2)
    return _compact(out)


def complement_intervals(a):
    """Complement in the whole real line of a sorted disjoint list."""
    n, k, _ = a.shape
    lo = a[..., 0]
    hi = a[..., 1]
    valid = ~np.isnan(lo)
    # gaps: (-inf, lo0), (hi_i, lo_{i+1}), (hi_last, inf)
    left = np.concatenate([np.full((n, 1), -np.inf), np.where(valid, hi, np.nan)], axis=1)
    nxt = np.where(valid, lo, np.nan)
    cnt = valid.sum(axis=1)
    right = np.concatenate([nxt, np.full((n, 1), np.nan)], axis=1)
    right[np.arange(n), cnt] = np.inf
    left[:, 1:][~valid] = np.nan
    return _compact(np.stack([left, right], axis=-1))


def clip_intervals(a, lo, hi):
    out = a.copy()
    out[..., 0] = np.maximum(out[..., 0], lo)
    out[..., 1] = np.minimum(out[..., 1], hi)
    return _compact(out)


def _single(lo, hi):
    iv = np.stack([lo, hi], axis=-1)[:, None, :]
    return _compact(iv)


class SolidSet:
    """Base class; subclasses implement ``intervals`` and ``contains``."""

    dim: int
    bounded = True

    def intervals(self, origins, dirs):
        raise NotImplementedError

    def contains(self, points):
        raise NotImplementedError

    def __invert__(self):
        return Complement(self)

    def __and__(self, other):
        return Intersection(self, other)


class Ball(SolidSet):
    """Open ball; a disk when the center is 2D."""

    def __init__(self, center, radius):
        if not radius > 0:
            raise ValueError("radius must be positive")
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)
        self.dim = len(self.center)

    def __repr__(self):
        return f"Ball(center={self.center.tolist()}, radius={self.radius})"

    @property
    def volume(self):
        return unit_ball_volume(self.dim) * self.radius ** self.dim

    @property
    def diameter(self):
        return 2.0 * self.radius

    def bounding_ball(self):
        return self.center, self.radius

    def contains(self, points):
        return np.linalg.norm(np.asarray(points) - self.center, axis=-1) < self.radius

    def intervals(self, origins, dirs):
        o = np.asarray(origins, dtype=float) - self.center
        d = np.asarray(dirs, dtype=float)
        a = np.einsum("ij,ij->i", d, d)
        b = np.einsum("ij,ij->i", d, o)
        c = np.einsum("ij,ij->i", o, o) - self.radius ** 2
        disc = b * b - a * c
        sq = np.sqrt(np.where(disc > 0, disc, 0.0))
        # stable roots of a t^2 + 2 b t + c
        q = -(b + np.where(b >= 0, sq, -sq))
        with np.errstate(divide="ignore", invalid="ignore"):
            r1 = q / a
            r2 = np.where(q != 0, c / q, r1)
        lo = np.where(disc > 0, np.minimum(r1, r2), np.nan)
        hi = np.where(disc > 0, np.maximum(r1, r2), np.nan)
        return _single(lo, hi)

    def boundary(self, subdivision_level=4):
        from .geometry import make_circle, make_sphere_mesh
        if self.dim == 2:
            return make_circle(self.center, self.radius)
        return make_sphere_mesh(self.center, self.radius, subdivision_level)

    def sample(self, rng, n):
        g = rng.standard_normal((n, self.dim))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        r = self.radius * rng.uniform(size=n) ** (1.0 / self.dim)
        return self.center + r[:, None] * g


class Box(SolidSet):
    def __init__(self, lo, hi):
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        if self.lo.shape != self.hi.shape or np.any(self.lo >= self.hi):
            raise ValueError("box needs min corner < max corner componentwise")
        self.dim = len(self.lo)

    def __repr__(self):
        return f"Box(lo={self.lo.tolist()}, hi={self.hi.tolist()})"

    @property
    def volume(self):
        return float(np.prod(self.hi - self.lo))

    @property
    def diameter(self):
        return float(np.linalg.norm(self.hi - self.lo))

    def bounding_ball(self):
        return 0.5 * (self.lo + self.hi), 0.5 * self.diameter

    def contains(self, points):
        p = np.asarray(points)
        return np.all((p > self.lo) & (p < self.hi), axis=-1)

    def intervals(self, origins, dirs):
        o = np.asarray(origins, dtype=float)
        d = np.asarray(dirs, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (self.lo - o) / d
            t2 = (self.hi - o) / d
        inside = (o > self.lo) & (o < self.hi)
        par = d == 0
        tlo = np.where(par, np.where(inside, -np.inf, np.inf), np.minimum(t1, t2))
        thi = np.where(par, np.where(inside, np.inf, -np.inf), np.maximum(t1, t2))
        return _single(tlo.max(axis=1), thi.min(axis=1))

    def boundary(self):
        from .geometry import make_polyline
        if self.dim != 2:
            raise NotImplementedError("box boundary only provided in 2D")
        (x0, y0), (x1, y1) = self.lo, self.hi
        return make_polyline([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], closed=True)

    def sample(self, rng, n):
        return self.lo + (self.hi - self.lo) * rng.uniform(size=(n, self.dim))


class HalfSpace(SolidSet):
    """``{y : (y - point) . normal < 0}``; the normal points out of the set."""

    bounded = False

    def __init__(self, point, normal):
        self.point = np.asarray(point, dtype=float)
        nrm = np.asarray(normal, dtype=float)
        self.normal = nrm / np.linalg.norm(nrm)
        self.dim = len(self.point)

    def __repr__(self):
        return f"HalfSpace(point={self.point.tolist()}, normal={self.normal.tolist()})"

    volume = math.inf

    def contains(self, points):
        return (np.asarray(points) - self.point) @ self.normal < 0

    def intervals(self, origins, dirs):
        num = (self.point - np.asarray(origins)) @ self.normal
        den = np.asarray(dirs) @ self.normal
        with np.errstate(divide="ignore", invalid="ignore"):
            t = num / den
        lo = np.where(den < 0, t, -np.inf)
        hi = np.where(den > 0, t, np.inf)
        par = den == 0
        lo = np.where(par & (num <= 0), np.nan, lo)
        hi = np.where(par & (num <= 0), np.nan, hi)
        return _single(lo, hi)


class ConvexPolyhedron(SolidSet):
    """Intersection of half-spaces ``(x - p_f) . n_f <= 0`` in 3D."""

    def __init__(self, plane_points, plane_normals):
        self.plane_points = np.ascontiguousarray(plane_points, dtype=float)
        self.plane_normals = np.ascontiguousarray(plane_normals, dtype=float)
        self.dim = 3

    @classmethod
    def from_mesh(cls, mesh):
        """Solid bounded by a closed convex outward-oriented triangle mesh."""
        cen = mesh.vertices[mesh.triangles].mean(axis=1)
        poly = cls(cen, mesh.face_normals * mesh.orientation)
        poly.volume = float(np.sum(np.einsum("ij,ij->i", cen, mesh.face_normals * mesh.orientation)
                                   * mesh.areas) / 3.0)
        poly._mesh = mesh
        return poly

    def contains(self, points):
        return _kernels.convex_contains(np.ascontiguousarray(points, dtype=float),
                                        self.plane_points, self.plane_normals)

    def intervals(self, origins, dirs):
        iv = _kernels.convex_line_interval(np.ascontiguousarray(origins, dtype=float),
                                           np.ascontiguousarray(dirs, dtype=float),
                                           self.plane_points, self.plane_normals)
        return _single(iv[:, 0], iv[:, 1])

    def boundary(self):
        return self._mesh


class Complement(SolidSet):
    bounded = False

    def __init__(self, base):
        self.base = base
        self.dim = base.dim

    def __repr__(self):
        return f"Complement({self.base!r})"

    volume = math.inf

    def contains(self, points):
        return ~self.base.contains(points)

    def intervals(self, origins, dirs):
        return complement_intervals(self.base.intervals(origins, dirs))


class Intersection(SolidSet):
    def __init__(self, *parts):
        self.parts = parts
        self.dim = parts[0].dim
        self.bounded = any(p.bounded for p in parts)

    def __repr__(self):
        return "Intersection(" + ", ".join(map(repr, self.parts)) + ")"

    def contains(self, points):
        out = self.parts[0].contains(points)
        for p in self.parts[1:]:
            out = out & p.contains(points)
        return out

    def intervals(self, origins, dirs):
        iv = self.parts[0].intervals(origins, dirs)
        for p in self.parts[1:]:
            iv = intersect_intervals(iv, p.intervals(origins, dirs))
        return iv

    def bounding_ball(self):
        for p in self.parts:
            if p.bounded:
                return p.bounding_ball()
        raise ValueError("unbounded intersection")

    def sample(self, rng, n):
        """Rejection sampling from the first bounded part."""
        base = next(p for p in self.parts if p.bounded)
        out, tries = [], 0
        need = n
        while need > 0:
            cand = base.sample(rng, max(2 * need, 64))
            cand = cand[self.contains(cand)]
            out.append(cand[:need])
            need -= len(out[-1])
            tries += 1
            if tries > 1000:
                raise ValueError("rejection sampling failed: intersection nearly empty")
        return np.concatenate(out)


Region = (Ball, Box)
