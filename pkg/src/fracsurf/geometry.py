"""Oriented surfaces: analytic circles and arcs, polylines, triangle meshes.

Every surface answers the same small set of queries: unit normals,
tangent frames, classical measure, area-uniform samples, quadrature
nodes, and the intersections of straight lines with the surface. The
last one is what the crossing-parity machinery is built on.

Normals are stored for the *canonical* orientation of each
representation and multiplied by ``orientation`` (+1 or -1) on the way
out. Tangent frames and ray fans are built from the canonical normal
so that flipping the orientation changes signs and nothing else.
"""

from __future__ import annotations

import hashlib
import io
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import _kernels
from ._kernels import HIT_EDGE, HIT_OK, HIT_TANGENT

TOL_TANGENT = 1e-8
TOL_HIT_REL = 1e-9
ON_SURFACE_REL = 1e-9
TWO_PI = 2.0 * math.pi

__all__ = [
    "HIT_OK", "HIT_TANGENT", "HIT_EDGE",
    "LineHits", "OrientedSurface", "AnalyticCircle", "AnalyticArc",
    "Polyline2D", "TriMesh3D", "GeometryError", "MeshFormatError",
    "make_circle", "make_arc", "make_polyline", "make_sphere_mesh",
    "load_mesh", "load_polyline", "classical_measure", "normal_at",
    "tangent_basis_at", "enclosing_radius",
]


class GeometryError(ValueError):
    """Invalid surface construction or off-surface query."""


class MeshFormatError(GeometryError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class LineHits:
    """Intersections of N lines with a surface, padded to K columns.

    ``tau[i, :count[i]]`` are the line parameters of the hits (in units
    of the direction vector that was passed in), unsorted; ``flag`` holds
    ``HIT_OK``, ``HIT_TANGENT`` or ``HIT_EDGE`` per hit.
    """

    tau: np.ndarray
    flag: np.ndarray
    count: np.ndarray

    def sorted(self):
        order = np.argsort(np.where(np.isnan(self.tau), np.inf, self.tau), axis=1)
        return LineHits(np.take_along_axis(self.tau, order, 1),
                        np.take_along_axis(self.flag, order, 1), self.count)


def _pad_hits(tau, flag):
    """Compress (N, M) candidate arrays (nan = no hit) to the occupied columns."""
    valid = ~np.isnan(tau)
    count = valid.sum(axis=1)
    k = max(int(count.max(initial=0)), 1)
    order = np.argsort(~valid, axis=1, kind="stable")[:, :k]
    return LineHits(np.take_along_axis(tau, order, 1),
                    np.take_along_axis(flag, order, 1).astype(np.int8),
                    count.astype(np.int64))


def _unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def _perp2(n):
    # canonical tangent for a 2D normal: rotate by +90 degrees
    return np.stack([-n[..., 1], n[..., 0]], axis=-1)


def _tangent3(n):
    a = np.zeros(3)
    a[int(np.argmin(np.abs(n)))] = 1.0
    e1 = np.cross(n, a)
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(n, e1)


def _digest(*arrays):
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.ascontiguousarray(a).tobytes())
    return h.hexdigest()[:12]


class OrientedSurface:
    """Common interface; concrete classes implement the geometry."""

    dim: int
    orientation: int

    # --- required by subclasses -------------------------------------------
    def _canonical_normal_at(self, z):
        raise NotImplementedError

    def distance(self, points):
        raise NotImplementedError

    def line_hits(self, origins, dirs, tmin=None, tmax=None) -> LineHits:
        raise NotImplementedError

    # --- shared -------------------------------------------------------------
    @property
    def closed(self):
        return len(self.boundary) == 0

    @property
    def tol_hit(self):
        return TOL_HIT_REL * self.diameter

    def _check_on(self, z):
        z = np.asarray(z, dtype=float)
        if z.shape != (self.dim,):
            raise GeometryError(f"expected a point in R^{self.dim}")
        d = float(self.distance(z[None])[0])
        if d >= ON_SURFACE_REL * self.diameter:
            raise GeometryError(f"point {z.tolist()} is {d:.3g} away from the surface")
        return z

    def normal_at(self, z):
        z = self._check_on(z)
        return self.orientation * self._canonical_normal_at(z)

    def frame_at(self, z):
        """(oriented normal, tangent vectors from the canonical normal)."""
        z = self._check_on(z)
        nc = self._canonical_normal_at(z)
        if self.dim == 2:
            tangents = (_perp2(nc),)
        else:
            tangents = _tangent3(nc)
        return self.orientation * nc, tangents

    def tangent_basis_at(self, z):
        return self.frame_at(z)[1]

    def enclosing_radius(self, z):
        z = np.asarray(z, dtype=float)
        return self._max_distance(z) * (1.0 + 1e-9)

    def flipped(self):
        raise NotImplementedError


# ---------------------------------------------------------------------------
# analytic curves
# ---------------------------------------------------------------------------

class AnalyticCircle(OrientedSurface):
    dim = 2

    def __init__(self, center, radius, orientation=1):
        if not radius > 0:
            raise GeometryError("radius must be positive")
        self.center = np.asarray(center, dtype=float).reshape(2)
        self.radius = float(radius)
        self.orientation = int(orientation)
        self.boundary = np.empty((0, 2))

    def __repr__(self):
        return f"AnalyticCircle(center={self.center.tolist()}, radius={self.radius}, orientation={self.orientation})"

    def flipped(self):
        return AnalyticCircle(self.center, self.radius, -self.orientation)

    @property
    def diameter(self):
        return 2.0 * self.radius

    @property
    def feature_size(self):
        return self.radius

    def local_size(self, z):
        return self.radius

    def classical_measure(self):
        return TWO_PI * self.radius

    def _canonical_normal_at(self, z):
        return _unit(z - self.center)

    def distance(self, points):
        return np.abs(np.linalg.norm(points - self.center, axis=1) - self.radius)

    def distance_to_boundary(self, z):
        return math.inf

    def _max_distance(self, z):
        return float(np.linalg.norm(z - self.center)) + self.radius

    def angle_of(self, z):
        v = np.asarray(z) - self.center
        return math.atan2(v[1], v[0])

    def point_at(self, theta):
        theta = np.asarray(theta, dtype=float)
        return self.center + self.radius * np.stack([np.cos(theta), np.sin(theta)], axis=-1)

    def _angle_ok(self, theta):
        return np.ones(theta.shape, dtype=bool), np.zeros(theta.shape, dtype=bool)

    def line_hits(self, origins, dirs, tmin=None, tmax=None):
        o = np.asarray(origins, dtype=float) - self.center
        d = np.asarray(dirs, dtype=float)
        a = np.einsum("ij,ij->i", d, d)
        b = 2.0 * np.einsum("ij,ij->i", d, o)
        c = np.einsum("ij,ij->i", o, o) - self.radius ** 2
        disc = b * b - 4.0 * a * c
        real = disc >= 0.0
        sq = np.sqrt(np.where(real, disc, 0.0))
        q = -0.5 * (b + np.where(b >= 0.0, sq, -sq))
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = q / a
            t2 = np.where(q != 0.0, c / q, t1)
        tau = np.stack([t1, t2], axis=1)
        tau[~real] = np.nan
        pts = o[:, None, :] + tau[..., None] * d[:, None, :]
        theta = np.arctan2(pts[..., 1], pts[..., 0])
        inside, near_end = self._angle_ok(theta)
        tau[~inside] = np.nan
        dn = np.linalg.norm(d, axis=1)
        cosang = np.abs(np.einsum("ikj,ij->ik", pts, d)) / (self.radius * dn[:, None])
        flag = np.zeros(tau.shape, dtype=np.int8)
        flag[near_end] = HIT_EDGE
        flag[cosang < TOL_TANGENT] = HIT_TANGENT
        if tmin is not None:
            tau[tau < np.asarray(tmin)[:, None]] = np.nan
        if tmax is not None:
            tau[tau > np.asarray(tmax)[:, None]] = np.nan
        return _pad_hits(tau, flag)

    def sample(self, rng, n):
        theta = rng.uniform(0.0, TWO_PI, n)
        return self._nodes_from_angles(theta)

    def _nodes_from_angles(self, theta):
        nc = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        return self.center + self.radius * nc, self.orientation * nc

    def angular_span(self):
        return 0.0, TWO_PI

    def quadrature(self, n_nodes):
        """Gauss-Legendre nodes in angle: (points, oriented normals, weights)."""
        a0, a1 = self.angular_span()
        panels = max(1, int(round(n_nodes / 16)))
        edges = np.linspace(a0, a1, panels + 1)
        x, w = np.polynomial.legendre.leggauss(16)
        th, wt = [], []
        for lo, hi in zip(edges[:-1], edges[1:]):
            th.append(0.5 * (hi - lo) * x + 0.5 * (hi + lo))
            wt.append(0.5 * (hi - lo) * w * self.radius)
        th = np.concatenate(th)
        p, n = self._nodes_from_angles(th)
        return p, n, np.concatenate(wt)


class AnalyticArc(AnalyticCircle):
    """Arc of a circle between two polar angles, outward circle normal."""

    def __init__(self, center, radius, angle_start, angle_end, orientation=1):
        super().__init__(center, radius, orientation)
        span = float(angle_end) - float(angle_start)
        if not 0.0 < span < TWO_PI - 1e-12:
            raise GeometryError("arc span must lie strictly between 0 and 2*pi "
                                "(use AnalyticCircle for a closed curve)")
        self.angle_start = float(angle_start)
        self.angle_end = float(angle_end)
        self.boundary = self.point_at(np.array([self.angle_start, self.angle_end]))

    def __repr__(self):
        return (f"AnalyticArc(center={self.center.tolist()}, radius={self.radius}, "
                f"angles=({self.angle_start}, {self.angle_end}), orientation={self.orientation})")

    def flipped(self):
        return AnalyticArc(self.center, self.radius, self.angle_start, self.angle_end,
                           -self.orientation)

    @property
    def span(self):
        return self.angle_end - self.angle_start

    @property
    def diameter(self):
        if self.span >= math.pi:
            return 2.0 * self.radius
        return 2.0 * self.radius * math.sin(0.5 * self.span)

    def classical_measure(self):
        return self.radius * self.span

    def angular_span(self):
        return self.angle_start, self.angle_end

    def _rel_angle(self, theta):
        return np.mod(theta - self.angle_start, TWO_PI)

    def _angle_ok(self, theta):
        rel = self._rel_angle(theta)
        slack = self.tol_hit / self.radius
        # angles just below angle_start wrap to ~2*pi
        rel = np.where(rel > TWO_PI - slack, rel - TWO_PI, rel)
        inside = (rel >= -slack) & (rel <= self.span + slack)
        near = inside & ((np.abs(rel) < slack) | (np.abs(rel - self.span) < slack))
        return inside, near

    def distance(self, points):
        v = np.asarray(points, dtype=float) - self.center
        theta = np.arctan2(v[:, 1], v[:, 0])
        rel = self._rel_angle(theta)
        on = rel <= self.span
        d_circle = np.abs(np.linalg.norm(v, axis=1) - self.radius)
        d_end = np.min(np.linalg.norm(points[:, None, :] - self.boundary[None], axis=2), axis=1)
        return np.where(on, d_circle, d_end)

    def distance_to_boundary(self, z):
        return float(np.min(np.linalg.norm(self.boundary - np.asarray(z), axis=1)))

    def _max_distance(self, z):
        th = np.linspace(self.angle_start, self.angle_end, 2049)
        pts = self.point_at(th)
        dmax = float(np.max(np.linalg.norm(pts - z, axis=1)))
        # chord sampling error bound for a circle: R (1 - cos(h/2))
        h = self.span / 2048
        return dmax + self.radius * (1.0 - math.cos(0.5 * h)) + 1e-15

    def sample(self, rng, n):
        return self._nodes_from_angles(rng.uniform(self.angle_start, self.angle_end, n))

    def local_size(self, z):
        return min(self.radius, self.classical_measure())


# ---------------------------------------------------------------------------
# polylines
# ---------------------------------------------------------------------------

class Polyline2D(OrientedSurface):
    """Piecewise linear curve; canonical normal of segment p->q is (dy, -dx)/|q-p|.

    For a counter-clockwise closed polygon this is the outward normal.
    """

    dim = 2

    def __init__(self, vertices, closed, orientation=1):
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 2:
            raise GeometryError("polyline needs at least two 2D vertices")
        if closed and len(v) < 3:
            raise GeometryError("closed polyline needs at least three vertices")
        self.vertices = v
        self.is_closed = bool(closed)
        self.orientation = int(orientation)
        idx = np.arange(len(v))
        nxt = (idx + 1) % len(v)
        if not closed:
            idx, nxt = idx[:-1], nxt[:-1]
        self.p = v[idx]
        self.q = v[nxt]
        e = self.q - self.p
        self.lengths = np.linalg.norm(e, axis=1)
        if np.any(self.lengths <= 0):
            raise GeometryError("zero-length polyline segment")
        self.seg_normals = np.stack([e[:, 1], -e[:, 0]], axis=1) / self.lengths[:, None]
        self.boundary = np.empty((0, 2)) if closed else v[[0, -1]].copy()

    def __repr__(self):
        return (f"Polyline2D({len(self.vertices)} vertices, closed={self.is_closed}, "
                f"orientation={self.orientation}, digest={_digest(self.vertices)})")

    def flipped(self):
        return Polyline2D(self.vertices, self.is_closed, -self.orientation)

    @cached_property
    def diameter(self):
        v = self.vertices
        return float(np.max(np.linalg.norm(v[:, None] - v[None], axis=2)))

    @property
    def feature_size(self):
        return float(self.lengths.min())

    def local_size(self, z):
        return float(self.lengths[self._nearest(np.asarray(z)[None])[0][0]])

    def classical_measure(self):
        return float(self.lengths.sum())

    def _nearest(self, points):
        e = self.q - self.p
        rel = points[:, None, :] - self.p[None]
        lam = np.clip(np.einsum("nkj,kj->nk", rel, e) / self.lengths ** 2, 0.0, 1.0)
        proj = self.p[None] + lam[..., None] * e[None]
        dist = np.linalg.norm(points[:, None, :] - proj, axis=2)
        k = np.argmin(dist, axis=1)
        return k, dist[np.arange(len(points)), k]

    def distance(self, points):
        return self._nearest(np.asarray(points, dtype=float))[1]

    def _canonical_normal_at(self, z):
        return self.seg_normals[self._nearest(z[None])[0][0]]

    def distance_to_boundary(self, z):
        if self.is_closed:
            return math.inf
        return float(np.min(np.linalg.norm(self.boundary - np.asarray(z), axis=1)))

    def _max_distance(self, z):
        return float(np.max(np.linalg.norm(self.vertices - z, axis=1)))

    def line_hits(self, origins, dirs, tmin=None, tmax=None):
        o = np.asarray(origins, dtype=float)
        d = np.asarray(dirs, dtype=float)
        out_tau, out_flag = [], []
        step = max(1, 4_000_000 // max(len(self.p), 1))
        for s in range(0, len(o), step):
            oo, dd = o[s:s + step], d[s:s + step]
            e = (self.q - self.p)[None]
            r = self.p[None] - oo[:, None, :]
            den = dd[:, None, 0] * e[..., 1] - dd[:, None, 1] * e[..., 0]
            with np.errstate(divide="ignore", invalid="ignore"):
                tau = (r[..., 0] * e[..., 1] - r[..., 1] * e[..., 0]) / den
                lam = (r[..., 0] * dd[:, None, 1] - r[..., 1] * dd[:, None, 0]) / den
            dn = np.linalg.norm(dd, axis=1)[:, None]
            sin = np.abs(den) / (dn * self.lengths[None])
            slack = self.tol_hit / self.lengths[None]
            hit = (lam >= -slack) & (lam <= 1.0 + slack) & (den != 0.0)
            # collinear overlap: report a tangent contact at the segment start
            par = (den == 0.0) & (np.abs(r[..., 0] * dd[:, None, 1] - r[..., 1] * dd[:, None, 0])
                                  < self.tol_hit * dn)
            flag = np.zeros(tau.shape, dtype=np.int8)
            flag[hit & ((lam < slack) | (lam > 1.0 - slack))] = HIT_EDGE
            flag[hit & (sin < TOL_TANGENT)] = HIT_TANGENT
            tau = np.where(hit, tau, np.nan)
            if par.any():
                tpar = np.einsum("nkj,nj->nk", r, dd) / dn ** 2
                tau = np.where(par, tpar, tau)
                flag[par] = HIT_TANGENT
            if tmin is not None:
                tau[tau < np.asarray(tmin)[s:s + step, None]] = np.nan
            if tmax is not None:
                tau[tau > np.asarray(tmax)[s:s + step, None]] = np.nan
            out_tau.append(tau)
            out_flag.append(flag)
        return _pad_hits(np.concatenate(out_tau), np.concatenate(out_flag))

    def sample(self, rng, n):
        k = rng.choice(len(self.p), size=n, p=self.lengths / self.lengths.sum())
        lam = rng.uniform(0.0, 1.0, n)
        pts = self.p[k] + lam[:, None] * (self.q[k] - self.p[k])
        return pts, self.orientation * self.seg_normals[k]

    def quadrature(self, n_nodes):
        per = max(4, int(math.ceil(n_nodes / len(self.p))))
        x, w = np.polynomial.legendre.leggauss(per)
        lam = 0.5 * (x + 1.0)
        pts = self.p[:, None, :] + lam[None, :, None] * (self.q - self.p)[:, None, :]
        wts = 0.5 * w[None, :] * self.lengths[:, None]
        nrm = np.repeat(self.seg_normals, per, axis=0) * self.orientation
        return pts.reshape(-1, 2), nrm, wts.reshape(-1)


# ---------------------------------------------------------------------------
# triangle meshes
# ---------------------------------------------------------------------------

def _edge_topology(tris):
    """Validate manifoldness and winding; return the boundary edge list."""
    directed = {}
    undirected = {}
    for f, (a, b, c) in enumerate(tris):
        for i, j in ((a, b), (b, c), (c, a)):
            if (i, j) in directed:
                raise GeometryError(
                    f"inconsistent winding: edge ({i + 1}, {j + 1}) traversed in the same "
                    f"direction by triangles {directed[(i, j)] + 1} and {f + 1}")
            directed[(i, j)] = f
            key = (min(i, j), max(i, j))
            undirected[key] = undirected.get(key, 0) + 1
            if undirected[key] > 2:
                raise GeometryError(f"non-manifold edge ({key[0] + 1}, {key[1] + 1})")
    return [(i, j) for (i, j) in directed if (j, i) not in directed]


def _boundary_loops(edges):
    nxt = {i: j for i, j in edges}
    loops, seen = [], set()
    for start in sorted(nxt):
        if start in seen:
            continue
        loop, cur = [], start
        while cur not in seen and cur in nxt:
            seen.add(cur)
            loop.append(cur)
            cur = nxt[cur]
        loops.append(loop)
    return loops


class TriMesh3D(OrientedSurface):
    dim = 3

    def __init__(self, vertices, triangles, orientation=1, *, _topology=None, meta=None):
        v = np.ascontiguousarray(vertices, dtype=float)
        t = np.ascontiguousarray(triangles, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 3:
            raise GeometryError("mesh vertices must be (n, 3)")
        if t.ndim != 2 or t.shape[1] != 3 or len(t) == 0:
            raise GeometryError("mesh triangles must be (m, 3)")
        if t.min() < 0 or t.max() >= len(v):
            raise GeometryError("triangle index out of range")
        self.vertices = v
        self.triangles = t
        self.orientation = int(orientation)
        self.meta = dict(meta or {})
        a, b, c = v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]
        cr = np.cross(b - a, c - a)
        area2 = np.linalg.norm(cr, axis=1)
        if np.any(area2 <= 0):
            raise GeometryError("degenerate (zero-area) triangle")
        self.areas = 0.5 * area2
        self.face_normals = np.ascontiguousarray(cr / area2[:, None])
        if _topology is None:
            _topology = _edge_topology(t.tolist())
        self._boundary_edges = _topology
        self.boundary = [np.array(loop) for loop in _boundary_loops(_topology)]
        tmin = np.minimum(np.minimum(a, b), c)
        tmax = np.maximum(np.maximum(a, b), c)
        self._bvh = _kernels.build_bvh(tmin, tmax)

    def __repr__(self):
        return (f"TriMesh3D({len(self.vertices)} vertices, {len(self.triangles)} triangles, "
                f"orientation={self.orientation}, "
                f"digest={_digest(self.vertices, self.triangles)})")

    def flipped(self):
        return TriMesh3D(self.vertices, self.triangles, -self.orientation,
                         _topology=self._boundary_edges, meta=self.meta)

    @property
    def closed(self):
        return not self._boundary_edges

    @cached_property
    def diameter(self):
        lo, hi = self.vertices.min(axis=0), self.vertices.max(axis=0)
        return float(np.linalg.norm(hi - lo))

    @cached_property
    def feature_size(self):
        return float(np.sqrt(self.areas.min()))

    def local_size(self, z):
        return float(np.sqrt(self.areas[self.nearest_face(z)]))

    def classical_measure(self):
        return float(self.areas.sum())

    def _closest_on_faces(self, p):
        """Closest point on every triangle to p (Ericson's region test), vectorised."""
        v, t = self.vertices, self.triangles
        a, b, c = v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]
        ab, ac, ap = b - a, c - a, p - a
        d1 = np.einsum("ij,ij->i", ab, ap)
        d2 = np.einsum("ij,ij->i", ac, ap)
        bp = p - b
        d3 = np.einsum("ij,ij->i", ab, bp)
        d4 = np.einsum("ij,ij->i", ac, bp)
        cp = p - c
        d5 = np.einsum("ij,ij->i", ab, cp)
        d6 = np.einsum("ij,ij->i", ac, cp)
        va = d3 * d6 - d5 * d4
        vb = d5 * d2 - d1 * d6
        vc = d1 * d4 - d3 * d2
        with np.errstate(divide="ignore", invalid="ignore"):
            denom = 1.0 / (va + vb + vc)
            v_ = vb * denom
            w_ = vc * denom
            res = a + ab * v_[:, None] + ac * w_[:, None]
            t_ab = d1 / (d1 - d3)
            t_ac = d2 / (d2 - d6)
            t_bc = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        cases = [
            ((d1 <= 0) & (d2 <= 0), a),
            ((d3 >= 0) & (d4 <= d3), b),
            ((d6 >= 0) & (d5 <= d6), c),
            ((vc <= 0) & (d1 >= 0) & (d3 <= 0), a + ab * t_ab[:, None]),
            ((vb <= 0) & (d2 >= 0) & (d6 <= 0), a + ac * t_ac[:, None]),
            ((va <= 0) & ((d4 - d3) >= 0) & ((d5 - d6) >= 0), b + (c - b) * t_bc[:, None]),
        ]
        done = np.zeros(len(t), dtype=bool)
        for mask, val in cases:
            m = mask & ~done
            res[m] = val[m]
            done |= m
        return res

    def nearest_face(self, z):
        cp = self._closest_on_faces(np.asarray(z, dtype=float))
        return int(np.argmin(np.linalg.norm(cp - z, axis=1)))

    def distance(self, points):
        return np.array([float(np.min(np.linalg.norm(self._closest_on_faces(p) - p, axis=1)))
                         for p in np.asarray(points, dtype=float)])

    def _canonical_normal_at(self, z):
        return self.face_normals[self.nearest_face(z)]

    def distance_to_boundary(self, z):
        if self.closed:
            return math.inf
        z = np.asarray(z, dtype=float)
        best = math.inf
        for i, j in self._boundary_edges:
            p, q = self.vertices[i], self.vertices[j]
            e = q - p
            lam = min(1.0, max(0.0, float(np.dot(z - p, e) / np.dot(e, e))))
            best = min(best, float(np.linalg.norm(z - p - lam * e)))
        return best

    def _max_distance(self, z):
        return float(np.max(np.linalg.norm(self.vertices - z, axis=1)))

    def line_hits(self, origins, dirs, tmin=None, tmax=None):
        o = np.ascontiguousarray(origins, dtype=float)
        d = np.ascontiguousarray(dirs, dtype=float)
        n = len(o)
        lo = np.full(n, -np.inf) if tmin is None else np.ascontiguousarray(np.broadcast_to(tmin, (n,)), dtype=float)
        hi = np.full(n, np.inf) if tmax is None else np.ascontiguousarray(np.broadcast_to(tmax, (n,)), dtype=float)
        nlo, nhi, left, right, start, count, order = self._bvh
        tau, flag, cnt = _kernels.mesh_line_hits(
            o, d, lo, hi, self.vertices, self.triangles, self.face_normals,
            nlo, nhi, left, right, start, count, order, TOL_TANGENT, self.tol_hit, 0.0)
        if np.any(cnt < 0):
            raise GeometryError("too many intersections along a line (mesh self-overlap?)")
        k = max(int(cnt.max(initial=0)), 1)
        return LineHits(tau[:, :k], flag[:, :k], cnt)

    def sample(self, rng, n):
        f = rng.choice(len(self.triangles), size=n, p=self.areas / self.areas.sum())
        r1 = np.sqrt(rng.uniform(size=n))
        r2 = rng.uniform(size=n)
        t = self.triangles[f]
        v = self.vertices
        pts = ((1 - r1)[:, None] * v[t[:, 0]] + (r1 * (1 - r2))[:, None] * v[t[:, 1]]
               + (r1 * r2)[:, None] * v[t[:, 2]])
        return pts, self.orientation * self.face_normals[f]

    def quadrature(self, n_nodes=None):
        """Seven-point degree-5 rule on every triangle."""
        a1, b1 = 0.0597158717, 0.4701420641
        a2, b2 = 0.7974269853, 0.1012865073
        bary = np.array([[1 / 3, 1 / 3, 1 / 3],
                         [a1, b1, b1], [b1, a1, b1], [b1, b1, a1],
                         [a2, b2, b2], [b2, a2, b2], [b2, b2, a2]])
        w = np.array([0.225, *[0.1323941527] * 3, *[0.1259391805] * 3])
        v, t = self.vertices, self.triangles
        pts = np.einsum("qk,fkj->fqj", bary, v[t])
        wts = w[None, :] * self.areas[:, None]
        nrm = np.repeat(self.face_normals, len(w), axis=0) * self.orientation
        return pts.reshape(-1, 3), nrm, wts.reshape(-1)


# ---------------------------------------------------------------------------
# constructors and module-level queries
# ---------------------------------------------------------------------------

def make_circle(center, radius):
    return AnalyticCircle(center, radius)


def make_arc(center, radius, angle_start, angle_end):
    return AnalyticArc(center, radius, angle_start, angle_end)


def make_polyline(vertices, closed):
    return Polyline2D(vertices, closed)


def _icosahedron():
    p = (1.0 + math.sqrt(5.0)) / 2.0
    v = [(-1, p, 0), (1, p, 0), (-1, -p, 0), (1, -p, 0),
         (0, -1, p), (0, 1, p), (0, -1, -p), (0, 1, -p),
         (p, 0, -1), (p, 0, 1), (-p, 0, -1), (-p, 0, 1)]
    f = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
         (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
         (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
         (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    v = np.array(v, dtype=float)
    return v / np.linalg.norm(v, axis=1, keepdims=True), np.array(f)


def make_sphere_mesh(center, radius, subdivision_level):
    """Subdivided icosahedron projected onto the sphere, outward winding."""
    if not radius > 0:
        raise GeometryError("radius must be positive")
    if subdivision_level < 0:
        raise GeometryError("subdivision level must be non-negative")
    verts, faces = _icosahedron()
    verts = list(map(tuple, verts))
    for _ in range(int(subdivision_level)):
        cache = {}

        def mid(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = np.add(verts[i], verts[j])
                verts.append(tuple(m / np.linalg.norm(m)))
                cache[key] = len(verts) - 1
            return cache[key]

        new = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = np.array(new)
    v = np.asarray(center, dtype=float) + float(radius) * np.array(verts)
    f = np.asarray(faces)
    cen = v[f].mean(axis=1) - center
    nrm = np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])
    if np.einsum("ij,ij->i", cen, nrm).min() < 0:
        f = f[:, ::-1].copy()
    return TriMesh3D(v, f, meta={"sphere_center": list(map(float, center)),
                                 "sphere_radius": float(radius),
                                 "subdivision_level": int(subdivision_level)})


def load_mesh(stream):
    """Parse the OBJ subset (``v x y z``, ``f i j k``, comments) into a TriMesh3D."""
    if isinstance(stream, (bytes, bytearray)):
        stream = io.StringIO(stream.decode())
    elif hasattr(stream, "read") and isinstance(stream.read(0), bytes):
        stream = io.TextIOWrapper(stream)
    verts, faces = [], []
    for lineno, raw in enumerate(stream, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        if tok[0] == "v":
            if len(tok) != 4:
                raise MeshFormatError("vertex needs exactly three coordinates", lineno)
            try:
                verts.append([float(x) for x in tok[1:]])
            except ValueError:
                raise MeshFormatError("malformed vertex coordinate", lineno) from None
        elif tok[0] == "f":
            if len(tok) != 4:
                raise MeshFormatError("only triangular faces are supported", lineno)
            try:
                idx = [int(x) for x in tok[1:]]
            except ValueError:
                raise MeshFormatError("malformed face index", lineno) from None
            if min(idx) < 1 or max(idx) > len(verts):
                raise MeshFormatError("face index out of range", lineno)
            faces.append([i - 1 for i in idx])
        else:
            raise MeshFormatError(f"unsupported directive {tok[0]!r}", lineno)
    if not faces:
        raise MeshFormatError("no faces")
    return TriMesh3D(np.array(verts), np.array(faces))


def load_polyline(stream):
    """Polyline file: header ``closed`` or ``open``, then one ``x y`` per line."""
    if isinstance(stream, (bytes, bytearray)):
        stream = io.StringIO(stream.decode())
    header, pts = None, []
    for lineno, raw in enumerate(stream, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if header is None:
            if line not in ("closed", "open"):
                raise MeshFormatError("header must be 'closed' or 'open'", lineno)
            header = line
            continue
        tok = line.split()
        if len(tok) != 2:
            raise MeshFormatError("expected 'x y'", lineno)
        try:
            pts.append([float(tok[0]), float(tok[1])])
        except ValueError:
            raise MeshFormatError("malformed coordinate", lineno) from None
    if header is None:
        raise MeshFormatError("empty polyline file")
    return Polyline2D(np.array(pts), header == "closed")


def classical_measure(surface):
    return surface.classical_measure()


def normal_at(surface, z):
    return surface.normal_at(z)


def tangent_basis_at(surface, z):
    return surface.tangent_basis_at(z)


def enclosing_radius(surface, z):
    return surface.enclosing_radius(z)
