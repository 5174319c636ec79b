"""Crossing parity along segments and rays, and the signed indicator.

The scalar functions (``segment_crossings``, ``classify_pair``,
``hat_chi`` ...) mirror the mathematical definitions one pair at a time.
The integrators call the batched variants (``*_many``, ``ray_profiles``,
``line_profiles``), which share the same tolerance rules.

Tolerances: a hit is tangential if ``|u.n| < TOL_TANGENT`` for the unit
line direction ``u``; it is an edge/joint hit if it lands within
``tol_hit = 1e-9 * diameter`` of a facet boundary; it sits on an
endpoint if it lies within ``tol_hit`` of one.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .geometry import HIT_EDGE, HIT_TANGENT, TOL_TANGENT, GeometryError
from .sets import Ball

__all__ = [
    "Degeneracy", "CrossingRecord", "PairClass", "segment_crossings",
    "classify_pair", "hat_chi", "tilde_chi", "ray_far_sign",
    "interior_normal_sign", "segment_crossings_many", "hat_chi_many",
    "ray_profiles", "line_profiles", "interior_normal_sign_many",
    "PROBE_SCALE",
]

PROBE_SCALE = 1e-4


class Degeneracy(str, enum.Enum):
    TANGENT_HIT = "TangentHit"
    EDGE_OR_VERTEX_HIT = "EdgeOrVertexHit"
    ENDPOINT_ON_SURFACE = "EndpointOnSurface"
    NEAR_PARALLEL_UNRESOLVED = "NearParallelUnresolved"


# integer codes used by the batched functions; 0 means clean
_CODES = {1: Degeneracy.TANGENT_HIT, 2: Degeneracy.EDGE_OR_VERTEX_HIT,
          3: Degeneracy.ENDPOINT_ON_SURFACE, 4: Degeneracy.NEAR_PARALLEL_UNRESOLVED}


@dataclass(frozen=True)
class CrossingRecord:
    count: int
    degenerate: Degeneracy | None = None


class PairKind(str, enum.Enum):
    ODD = "Odd"
    EVEN = "Even"
    DEGENERATE = "Degenerate"


@dataclass(frozen=True)
class PairClass:
    kind: PairKind
    reason: Degeneracy | None = None

    @property
    def is_odd(self):
        return self.kind is PairKind.ODD

    def __str__(self):
        if self.reason is None:
            return self.kind.value
        return f"Degenerate({self.reason.value})"


@dataclass(frozen=True)
class SignedIndicator:
    value: int                      # +1, -1, or 0 when degenerate
    reason: Degeneracy | None = None

    @property
    def degenerate(self):
        return self.value == 0


def _reason_code(flags, near_end):
    code = np.zeros(flags.shape[0], dtype=np.int8)
    code[np.any(flags == HIT_EDGE, axis=1)] = 2
    code[np.any(flags == HIT_TANGENT, axis=1)] = 1
    code[np.any(near_end, axis=1)] = 3
    return code


def segment_crossings_many(S, X, Y, exclude_x=False):
    """Vectorised crossing count strictly inside the segments ``[x, y]``.

    Returns ``(count, code)``; ``code`` is 0 for a clean record, otherwise
    one of the ``Degeneracy`` codes. With ``exclude_x`` a hit at ``x``
    itself is dropped silently (``x`` is known to lie on ``S``).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    d = Y - X
    L = np.linalg.norm(d, axis=1)
    if np.any(L == 0):
        raise ValueError("segment endpoints coincide")
    tol = S.tol_hit / L
    hits = S.line_hits(X, d, tmin=-tol, tmax=1.0 + tol)
    tau = hits.tau
    valid = ~np.isnan(tau)
    at_x = valid & (np.abs(tau) <= tol[:, None])
    at_y = valid & (np.abs(1.0 - tau) <= tol[:, None])
    if exclude_x:
        valid &= ~at_x
        at_x = np.zeros_like(at_x)
    flags = np.where(valid, hits.flag, 0)
    code = _reason_code(flags, at_x | at_y)
    count = (valid & ~at_x & ~at_y).sum(axis=1)
    return count, code


def segment_crossings(S, x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.array_equal(x, y):
        raise ValueError("segment endpoints coincide")
    count, code = segment_crossings_many(S, x[None], y[None])
    return CrossingRecord(int(count[0]), _CODES.get(int(code[0])))


def classify_pair(S, x, y):
    rec = segment_crossings(S, x, y)
    if rec.degenerate is not None:
        return PairClass(PairKind.DEGENERATE, rec.degenerate)
    return PairClass(PairKind.ODD if rec.count % 2 else PairKind.EVEN)


def _check_interior(S, z):
    z = S._check_on(z)
    if S.distance_to_boundary(z) < S.tol_hit:
        raise GeometryError("z lies on the boundary of the surface")
    return z


def hat_chi_many(S, z, Y, nz=None):
    """Signed indicator for many ``y`` at one surface point ``z``.

    Returns ``(value, code)`` with value in {+1, -1, 0}; 0 marks a
    degenerate pair and ``code`` gives the reason.
    """
    if nz is None:
        nz = S.normal_at(z)
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    Z = np.broadcast_to(z, Y.shape)
    count, code = segment_crossings_many(S, Z, Y, exclude_x=True)
    diff = z - Y
    proj = diff @ nz
    near = np.abs(proj) < TOL_TANGENT * np.linalg.norm(diff, axis=1)
    code = np.where((code == 0) & near, np.int8(4), code)
    even = count % 2 == 0
    val = np.where(even == (proj > 0), 1, -1).astype(np.int8)
    val[code != 0] = 0
    return val, code


def hat_chi(S, z, y):
    """+1 if ``y`` is in the nonlocal interior of ``S`` seen from ``z``, else -1."""
    z = _check_interior(S, z)
    y = np.asarray(y, dtype=float)
    if S.distance(y[None])[0] < S.tol_hit:
        return SignedIndicator(0, Degeneracy.ENDPOINT_ON_SURFACE)
    val, code = hat_chi_many(S, z, y[None])
    return SignedIndicator(int(val[0]), _CODES.get(int(code[0])))


def tilde_chi(E, y):
    """+1 inside the primitive solid ``E`` (disk or ball), -1 outside."""
    if not isinstance(E, Ball):
        raise TypeError("tilde_chi is defined for disks and balls only")
    r = float(np.linalg.norm(np.asarray(y, dtype=float) - E.center))
    if abs(r - E.radius) <= 1e-9 * 2.0 * E.radius:
        raise GeometryError("point lies on the boundary of the solid")
    return 1 if r < E.radius else -1


# ---------------------------------------------------------------------------
# rays and full lines through a surface point
# ---------------------------------------------------------------------------

def ray_profiles(S, z, nz, dirs):
    """Crossing radii along the rays ``z + r u`` (``r > 0``), with the initial sign.

    Returns ``(tau, sign0, code)``: ``tau`` sorted, nan-padded, in units of
    ``|u|``; ``sign0`` is the value of the signed indicator just after
    leaving ``z``; ``code`` is nonzero for rays that graze the surface or
    hit an edge. The indicator flips at every listed crossing.
    """
    dirs = np.asarray(dirs, dtype=float)
    n = len(dirs)
    un = dirs @ nz
    dn = np.linalg.norm(dirs, axis=1)
    tol = S.tol_hit / dn
    hits = S.line_hits(np.broadcast_to(z, (n, S.dim)), dirs, tmin=tol).sorted()
    tau = hits.tau
    valid = ~np.isnan(tau)
    flags = np.where(valid, hits.flag, 0)
    code = _reason_code(flags, np.zeros_like(valid))
    code[np.abs(un) < TOL_TANGENT * dn] = 1
    sign0 = np.where(un < 0, 1, -1).astype(np.int8)
    return tau, sign0, code


def ray_far_sign(S, z, u):
    """Constant value of the signed indicator along ``z + r u`` beyond the enclosing radius.

    Grazing directions (``|u.n(z)| < TOL_TANGENT``) are reported as
    degenerate; for the unit circle at ``(1, 0)`` and ``u = (0, 1)`` this
    is the deterministic outcome.
    """
    z = _check_interior(S, z)
    nz = S.normal_at(z)
    u = np.asarray(u, dtype=float)
    tau, sign0, code = ray_profiles(S, z, nz, u[None])
    if code[0]:
        return SignedIndicator(0, _CODES[int(code[0])])
    flips = int(np.count_nonzero(~np.isnan(tau[0])))
    return SignedIndicator(int(sign0[0]) * (-1) ** flips)


def line_profiles(S, z, nz, dirs):
    """Crossings on both sides of ``z`` along the lines ``z + t u``.

    Returns ``(pos, neg, code)``: ``pos`` holds the sorted ``t > 0`` hits,
    ``neg`` the sorted ``-t`` for ``t < 0`` hits (so both are positive
    distances), nan-padded; the hit at ``z`` itself is dropped.
    """
    dirs = np.asarray(dirs, dtype=float)
    n = len(dirs)
    dn = np.linalg.norm(dirs, axis=1)
    tol = S.tol_hit / dn
    hits = S.line_hits(np.broadcast_to(z, (n, S.dim)) if np.ndim(z) == 1 else z, dirs)
    tau = hits.tau
    valid = ~np.isnan(tau) & (np.abs(np.nan_to_num(tau)) > tol[:, None])
    flags = np.where(valid, hits.flag, 0)
    code = _reason_code(flags, np.zeros_like(valid))
    un = np.einsum("ij,ij->i", dirs, np.broadcast_to(nz, dirs.shape))
    code[np.abs(un) < TOL_TANGENT * dn] = 1
    pos = np.where(valid & (tau > 0), tau, np.nan)
    neg = np.where(valid & (tau < 0), -tau, np.nan)
    pos = np.sort(pos, axis=1)
    neg = np.sort(neg, axis=1)
    kp = max(int((~np.isnan(pos)).sum(axis=1).max(initial=0)), 1)
    kn = max(int((~np.isnan(neg)).sum(axis=1).max(initial=0)), 1)
    return pos[:, :kp], neg[:, :kn], code


# ---------------------------------------------------------------------------
# normal of the nonlocal interior, by probing
# ---------------------------------------------------------------------------

def interior_normal_sign_many(S, z, Ys, nYs, sizes, nz=None):
    """Vectorised probe for sigma(y) with n_{A_i}(y) = sigma n(y); 0 if unresolved."""
    if nz is None:
        nz = S.normal_at(z)
    Ys = np.atleast_2d(Ys)
    dist = np.linalg.norm(Ys - z, axis=1)
    delta = np.minimum(PROBE_SCALE * np.asarray(sizes, dtype=float), 0.25 * dist)
    delta = np.maximum(delta, 10.0 * S.tol_hit)
    sigma = np.zeros(len(Ys), dtype=np.int8)
    todo = np.arange(len(Ys))
    for _ in range(4):
        if len(todo) == 0:
            break
        d = delta[todo, None] * nYs[todo]
        plus, _ = hat_chi_many(S, z, Ys[todo] + d, nz)
        minus, _ = hat_chi_many(S, z, Ys[todo] - d, nz)
        ok = (plus != 0) & (plus == -minus)
        sigma[todo[ok]] = -plus[ok]
        todo = todo[~ok]
        delta[todo] *= 0.1
    return sigma


def interior_normal_sign(S, z, y):
    """+1 when ``n(y)`` points out of the nonlocal interior seen from ``z``.

    Unlike ``hat_chi`` this accepts ``z`` on the boundary of ``S``; only
    ``y`` has to be an interior point.
    """
    z = S._check_on(z)
    y = S._check_on(y)
    if np.array_equal(y, z):
        raise ValueError("y must differ from z")
    if S.distance_to_boundary(y) < S.tol_hit:
        raise GeometryError("y lies on the boundary of the surface")
    sig = interior_normal_sign_many(S, z, y[None], S.normal_at(y)[None],
                                    [S.local_size(y)], S.normal_at(z))
    if sig[0] == 0:
        return SignedIndicator(0, Degeneracy.NEAR_PARALLEL_UNRESOLVED)
    return SignedIndicator(int(sig[0]))
