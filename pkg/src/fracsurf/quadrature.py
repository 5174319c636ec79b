"""Integration engines for the singular kernel |x - y|^(-n-2s).

Three families live here.

* Principal values around a surface point ``z``. Directions are paired
  so that the divergent ``eps^(-2s)`` pieces cancel exactly; the radial
  part along each ray is integrated in closed form from the list of
  crossing radii, and the angular part uses Gauss-Legendre in the
  variable ``w = phi^(1-2s)`` with an extrapolated cap at grazing
  angles (where ray/surface intersection becomes ill-conditioned).
* Pair integrals anchored on a surface. With ``x = z + xi u`` and
  ``y = z - t u`` the measure ``dx dy`` becomes
  ``(xi + t)^(n-1) |u.n(z)| dz du dxi dt``; the kernel then reduces to
  ``(xi + t)^(-1-2s)`` whose integral over any rectangle in ``(xi, t)``
  is elementary. Only ``(z, u)`` is sampled.
* Plain Monte Carlo with deterministic chunked seeding, so results do
  not depend on how many workers evaluate the chunks.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

__all__ = [
    "ALPHA", "OMEGA_EQUATOR", "OMEGA_SPHERE", "FractionalOrder", "PVEstimate",
    "QuadratureConfig", "pow_diff", "rect_kernel_integral", "ray_pair_value",
    "pv_volume_integrate", "pv_ray_pairs", "mc_integral", "mc_pair_integral",
    "cov_near_diagonal_integral", "surface_pv_integrate", "neville_limit",
    "config_hash", "ConvergenceError", "sphere_directions", "singular_rule",
]

# alpha_{n-1}: volume of the unit ball in R^(n-1)
ALPHA = {2: 2.0, 3: math.pi}
# omega_{n-2}: measure of the unit sphere in R^(n-1)
OMEGA_EQUATOR = {2: 2.0, 3: 2.0 * math.pi}
# omega_{n-1}: measure of the unit sphere in R^n
OMEGA_SPHERE = {2: 2.0 * math.pi, 3: 4.0 * math.pi}


MULTI_CROSSING_LIMIT = 0.05


class ConvergenceError(RuntimeError):
    """An integral did not reach the requested accuracy."""


@dataclass(frozen=True)
class FractionalOrder:
    s: float

    def __post_init__(self):
        if not (0.0 < self.s < 0.5):
            raise ValueError(f"s must lie strictly between 0 and 1/2, got {self.s}")

    def kernel_exponent(self, n):
        return n + 2.0 * self.s

    @staticmethod
    def alpha(n):
        return ALPHA[n]

    @staticmethod
    def omega(n):
        return OMEGA_EQUATOR[n]


@dataclass
class PVEstimate:
    value: float
    error_estimate: float
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class QuadratureConfig:
    """Knobs shared by the deterministic engines.

    ``panels`` and ``gauss_order`` set the angular rule; the coarse rule
    used for the error estimate halves the order. ``cap`` is the grazing
    angle below which the integrand is extrapolated instead of sampled.
    """

    panels: int = 24
    gauss_order: int = 16
    azimuth_nodes: int = 96
    cap: float = 1e-4
    shells: int = 16
    max_degenerate_fraction: float = 1e-2
    error_cap: float = math.inf
    surface_panels: int = 48
    mesh_refine_ratio: float = 0.5
    mesh_max_depth: int = 7
    chunk_size: int = 1 << 15
    workers: int = 1

    def to_dict(self):
        d = asdict(self)
        d.pop("workers")
        return d


def config_hash(obj):
    """sha256 over the canonical JSON of ``obj`` (first 16 hex digits)."""
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_jsonable)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if hasattr(o, "to_dict"):
        return o.to_dict()
    raise TypeError(f"not serialisable: {type(o).__name__}")


# ---------------------------------------------------------------------------
# closed-form radial pieces
# ---------------------------------------------------------------------------

def pow_diff(a, b, p):
    """``(b**p - a**p) / p`` for ``0 <= a <= b <= inf``, stable for small ``|p|``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        core = a ** p * np.expm1(p * np.log(b / a)) / p
        out = np.where(a == 0.0, b ** p / p, core)
        out = np.where(np.isinf(b), -(a ** p) / p, out)
        out = np.where(a == b, 0.0, out)
    return out


def _ramp(c1, c2, delta, s):
    """``int_0^delta [h(v - c1) - h(v - c2)] v^(-1-2s) dv`` with ``h = max(., 0)``."""
    b = np.minimum(c2, delta)
    live = c1 < b
    c1s = np.where(live, c1, 0.0)
    bs = np.where(live, b, 1.0)
    with np.errstate(invalid="ignore"):
        first = pow_diff(c1s, bs, 1.0 - 2.0 * s) - np.where(
            c1s > 0, c1s * pow_diff(np.where(c1s > 0, c1s, 1.0), bs, -2.0 * s), 0.0)
        tail_on = live & (delta > c2) & np.isfinite(c2) & (c2 > c1)
        c2s = np.where(tail_on, c2, 1.0)
        second = np.where(tail_on, (c2s - c1s) * pow_diff(c2s, np.where(tail_on, delta, 2.0),
                                                           -2.0 * s), 0.0)
    return np.where(live, first + second, 0.0)


def rect_kernel_integral(x0, x1, t0, t1, s, delta=math.inf):
    """``int_{x0}^{x1} int_{t0}^{t1} (xi + t)^(-1-2s) [xi + t < delta] dt dxi``.

    Arrays broadcast; at most one of ``x1``, ``t1`` may be infinite.
    Empty or nan rectangles give 0.
    """
    x0, x1, t0, t1 = (np.asarray(a, dtype=float) for a in (x0, x1, t0, t1))
    ok = (x1 > x0) & (t1 > t0)
    x0 = np.where(ok, x0, 0.0)
    x1 = np.where(ok, x1, 1.0)
    t0 = np.where(ok, t0, 0.0)
    t1 = np.where(ok, t1, 1.0)
    pair_t = np.isfinite(t1)
    # pair the corners along whichever axis is bounded
    ga = _ramp(x0 + t0, x0 + t1, delta, s) - _ramp(x1 + t0, x1 + t1, delta, s)
    gb = _ramp(x0 + t0, x1 + t0, delta, s) - _ramp(x0 + t1, x1 + t1, delta, s)
    return np.where(ok, np.where(pair_t, ga, gb), 0.0)


def ray_pair_value(tau_a, sign_a, tau_b, sign_b, s):
    """Radial integral ``int_0^inf sigma(r) r^(-1-2s) dr`` summed over two rays.

    ``sign_a``/``sign_b`` are the initial signs and must be opposite so the
    small-radius divergences cancel; the sign flips at every crossing.
    The magnitude part is computed sign-free so negating both signs
    negates the result bit for bit.
    """
    return sign_a * _alt_sum(tau_a, s) + sign_b * _alt_sum(tau_b, s)


def _alt_sum(tau, s):
    # -(1/s) * sum_i (-1)^(i-1) tau_i^(-2s); nan slots contribute 0
    k = np.arange(tau.shape[1])
    alt = np.where(k % 2 == 0, 1.0, -1.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        terms = np.where(np.isnan(tau), 0.0, tau ** (-2.0 * s)) * alt
    return -terms.sum(axis=1) / s


def _partial_sums(tau, sign0, eps, s):
    """Per-ray ``int_eps^inf`` for each eps in the sequence (diagnostics)."""
    out = np.empty((len(eps), len(tau)))
    with np.errstate(invalid="ignore", divide="ignore"):
        p = np.where(np.isnan(tau), np.inf, tau)
        for i, e in enumerate(eps):
            before = (p <= e).sum(axis=1)
            sig_e = sign0 * np.where(before % 2 == 0, 1.0, -1.0)
            after = np.where(p > e, p, np.nan)
            # re-index crossings beyond eps with alternating signs starting at sig_e
            after = np.sort(after, axis=1)
            out[i] = sig_e * e ** (-2.0 * s) / (2.0 * s) + sig_e * _alt_sum(after, s)
    return out


# ---------------------------------------------------------------------------
# angular rules
# ---------------------------------------------------------------------------

def singular_rule(lo, hi, p, breaks=(), panels=8, order=16):
    """Nodes/weights for ``int_lo^hi f(x) dx`` with ``f ~ x^(-p)`` near 0.

    Gauss-Legendre in ``w = x^(1-p)``, panels split at ``breaks`` and at a
    geometric ladder below ``hi``. Weights include the Jacobian, so the
    caller multiplies by ``f(x)`` directly.
    """
    q = 1.0 - p
    pts = {lo, hi}
    pts.update(b for b in breaks if lo < b < hi)
    k = 1
    while hi * 10.0 ** (-k) > lo:
        pts.add(hi * 10.0 ** (-k))
        k += 1
    wb = np.sort(np.array(sorted(pts)) ** q)
    fine = np.linspace(wb[0], wb[-1], panels + 1)
    wb = np.unique(np.concatenate([wb, fine]))
    x, wt = np.polynomial.legendre.leggauss(order)
    a, b = wb[:-1, None], wb[1:, None]
    w_nodes = (0.5 * (b - a) * x + 0.5 * (b + a)).ravel()
    w_wts = (0.5 * (b - a) * wt).ravel()
    xs = w_nodes ** (1.0 / q)
    # dx = x^p / q dw
    return xs, w_wts * xs ** p / q, np.repeat(np.diff(wb), order) / order


def _cap_nodes(cap):
    return cap * np.array([1.0, 2.0, 4.0])


def _cap_value(g3, cap, p):
    """Extrapolate ``g(x) = x^p f(x)`` to 0 from ``x = cap * (1, 2, 4)``; integrate the cap."""
    g1, g2, g4 = g3
    # quadratic through the three points, evaluated at 0
    g0 = (8.0 * g1 - 6.0 * g2 + g4) / 3.0
    scale = cap ** (1.0 - p) / (1.0 - p)
    return g0 * scale, abs(g0 - g1) * scale


def sphere_directions(n, rng, m):
    if n == 2:
        th = rng.uniform(0.0, 2.0 * math.pi, m)
        return np.stack([np.cos(th), np.sin(th)], axis=1)
    g = rng.standard_normal((m, 3))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# principal values over R^n around a surface point
# ---------------------------------------------------------------------------

@dataclass
class _PairRule:
    """Directions ``U``/``V`` (opposite initial signs) with angular weights."""

    params: np.ndarray          # (N, k) rule parameters
    weights: np.ndarray         # (N,)
    spacing: np.ndarray         # (N,) local node spacing in the first parameter
    build: object               # params -> (U, V)


def _volume_rules(n, nz_canon, tangents, cfg, p, breaks):
    """Fine and coarse pair rules plus the cap rule, for the full-space PV."""
    if n == 2:
        t = tangents[0]

        def build(par):
            phi = par[:, 0]
            U = np.cos(phi)[:, None] * t + np.sin(phi)[:, None] * nz_canon
            return U, -U

        def rule(order):
            half = 0.5 * math.pi
            x, w, h = singular_rule(cfg.cap, half, p, [b for b in breaks if b <= half],
                                    cfg.panels, order)
            x2, w2, h2 = singular_rule(cfg.cap, half, p,
                                       [math.pi - b for b in breaks if b > half],
                                       cfg.panels, order)
            phi = np.concatenate([x, math.pi - x2])
            return _PairRule(phi[:, None], np.concatenate([w, w2]), np.concatenate([h, h2]), build)

        cap_par = np.concatenate([_cap_nodes(cfg.cap), math.pi - _cap_nodes(cfg.cap)])[:, None]
        cap_groups = [(slice(0, 3), 1.0), (slice(3, 6), 1.0)]
        return rule(cfg.gauss_order), rule(cfg.gauss_order // 2), _PairRule(
            cap_par, np.ones(6), np.full(6, cfg.cap), build), cap_groups

    e1, e2 = tangents

    def build(par):
        beta, psi = par[:, 0], par[:, 1]
        c = np.cos(beta)[:, None]
        U = (np.sin(beta)[:, None] * nz_canon
             + c * (np.cos(psi)[:, None] * e1 + np.sin(psi)[:, None] * e2))
        return U, -U

    def rule(order, m):
        x, w, h = singular_rule(cfg.cap, 0.5 * math.pi, p, breaks, cfg.panels, order)
        psi = 2.0 * math.pi * np.arange(m) / m
        B, P = np.meshgrid(x, psi, indexing="ij")
        W = (w * np.cos(x))[:, None] * np.full(m, 2.0 * math.pi / m)[None]
        Hs = np.broadcast_to(h[:, None], B.shape)
        return _PairRule(np.stack([B.ravel(), P.ravel()], 1), W.ravel(), Hs.ravel().copy(), build)

    m = cfg.azimuth_nodes
    psi = 2.0 * math.pi * np.arange(m) / m
    cb = _cap_nodes(cfg.cap)
    B, P = np.meshgrid(cb, psi, indexing="ij")
    cap_rule = _PairRule(np.stack([B.T.ravel(), P.T.ravel()], 1),
                         np.ones(3 * m), np.full(3 * m, cfg.cap), build)
    cap_groups = [(slice(3 * j, 3 * j + 3), 2.0 * math.pi / m) for j in range(m)]
    return rule(cfg.gauss_order, m), rule(cfg.gauss_order // 2, m // 2), cap_rule, cap_groups


def _directional_rules(n, nz_canon, e, cfg, p, breaks):
    def build(par):
        th = par[:, 0]
        c = np.cos(th)[:, None] * e
        sn = np.sin(th)[:, None] * nz_canon
        return c + sn, c - sn

    def rule(order):
        x, w, h = singular_rule(cfg.cap, 0.5 * math.pi, p, breaks, cfg.panels, order)
        if n == 3:
            w = w * np.cos(x)
        return _PairRule(x[:, None], w, h, build)

    cap = _PairRule(_cap_nodes(cfg.cap)[:, None], np.ones(3), np.full(3, cfg.cap), build)
    return rule(cfg.gauss_order), rule(cfg.gauss_order // 2), cap, [(slice(0, 3), 1.0)]


def _evaluate_pairs(rule, profile, s, eps):
    """Pair values on a rule with one jitter retry for degenerate nodes."""
    U, V = rule.build(rule.params)
    ta, sa, ca = profile(U)
    tb, sb, cb = profile(V)
    bad = (ca != 0) | (cb != 0) | (sa + sb != 0)
    jittered = int(bad.sum())
    if jittered:
        par = rule.params[bad].copy()
        par[:, 0] += 1e-7 * rule.spacing[bad]
        U2, V2 = rule.build(par)
        ta2, sa2, ca2 = profile(U2)
        tb2, sb2, cb2 = profile(V2)
        ta, tb = _merge_rows(ta, bad, ta2), _merge_rows(tb, bad, tb2)
        sa, sb = sa.copy(), sb.copy()
        sa[bad], sb[bad] = sa2, sb2
        still = np.zeros_like(bad)
        still[bad] = (ca2 != 0) | (cb2 != 0) | (sa2 + sb2 != 0)
    else:
        still = bad
    val = ray_pair_value(ta, sa.astype(float), tb, sb.astype(float), s)
    val = np.where(still, 0.0, val)
    diag = None
    if eps is not None:
        part = _partial_sums(ta, sa.astype(float), eps, s) + _partial_sums(tb, sb.astype(float), eps, s)
        diag = np.where(still[None], 0.0, part)
    return val, int(still.sum()), jittered, diag, (ta, sa, tb, sb, still)


def _merge_rows(base, mask, repl):
    k = max(base.shape[1], repl.shape[1])
    out = np.full((base.shape[0], k), np.nan)
    out[:, :base.shape[1]] = base
    out[mask] = np.nan
    out[mask, :repl.shape[1]] = repl
    return out


def pv_ray_pairs(profile, rules, s, R_enc, cfg, p=None):
    """Shared driver: integrate paired ray values over the angular rules.

    ``rules`` is ``(fine, coarse, cap, cap_groups)``; ``profile(dirs)``
    returns ``(tau, sign0, code)`` for rays from ``z``.
    """
    if p is None:
        p = 2.0 * s
    fine, coarse, cap, cap_groups = rules
    eps = R_enc * 2.0 ** -np.arange(cfg.shells + 1)
    vf, df, jf, part, prof = _evaluate_pairs(fine, profile, s, eps)
    vc, dc, _, _, _ = _evaluate_pairs(coarse, profile, s, None)
    vcap, dcap, _, _, _ = _evaluate_pairs(cap, profile, s, None)
    cap_total, cap_err = 0.0, 0.0
    for sl, wgt in cap_groups:
        v, e = _cap_value(vcap[sl] * _cap_nodes(cfg.cap) ** p, cfg.cap, p)
        cap_total += wgt * v
        cap_err += wgt * e
    body_f = math.fsum(fine.weights * vf)
    body_c = math.fsum(coarse.weights * vc)
    value = body_f + cap_total
    err = abs(body_f - body_c) + cap_err
    err = max(err, 4.0 * np.finfo(float).eps * (abs(value) + math.fsum(np.abs(fine.weights * vf))))
    # tail beyond R_enc: the last sign along each ray, held to infinity
    ta, sa, tb, sb, still = prof
    last_a = sa * np.where((~np.isnan(ta)).sum(1) % 2 == 0, 1.0, -1.0)
    last_b = sb * np.where((~np.isnan(tb)).sum(1) % 2 == 0, 1.0, -1.0)
    tail = math.fsum(np.where(still, 0.0, fine.weights * (last_a + last_b))) * R_enc ** (-2 * s) / (2 * s)
    shells = [math.fsum(fine.weights * row) for row in part]
    total = len(fine.weights) + len(coarse.weights) + len(cap.weights)
    n_deg = df + dc + dcap
    diag = {
        "epsilon": eps.tolist(),
        "shell_values": shells,
        "tail_value": tail,
        "cap_value": cap_total,
        "degenerate_nodes": n_deg,
        "jittered_nodes": jf,
        "total_nodes": total,
    }
    if n_deg / total > cfg.max_degenerate_fraction:
        raise ConvergenceError(f"{n_deg} of {total} angular nodes degenerate")
    if err > cfg.error_cap:
        raise ConvergenceError(f"error estimate {err:.3g} above cap {cfg.error_cap:.3g}")
    return PVEstimate(value, err, diag)


def _blackbox_profile(sign_field, far_sign, z, R_enc, shells):
    """Crossing radii of a black-box sign field along rays, by sampling and bisection.

    Three radii per geometric shell ``[R 2^-(k+1), R 2^-k]`` are sampled;
    every sign change is bisected to machine precision. Beyond ``R_enc``
    the value is ``far_sign(u)``.
    """
    fr = np.array([1.0, 2.0 ** -(1 / 3), 2.0 ** -(2 / 3)])
    radii = np.sort((R_enc * 2.0 ** -np.arange(shells + 1)[:, None] * fr[None]).ravel())

    def profile(U):
        m = len(U)
        pts = z + radii[None, :, None] * U[:, None, :]
        vals = np.asarray(sign_field(pts.reshape(-1, len(z))), dtype=np.int8).reshape(m, -1)
        far = np.asarray(far_sign(U), dtype=np.int8)
        code = np.where((vals == 0).any(1) | (far == 0), 1, 0).astype(np.int8)
        vals = np.concatenate([vals, far[:, None]], axis=1)
        r_ext = np.concatenate([radii, [R_enc * 1.5]])
        change = vals[:, 1:] != vals[:, :-1]
        taus = np.full(change.shape, np.nan)
        rows, cols = np.nonzero(change)
        lo, hi = r_ext[cols], r_ext[cols + 1]
        left = vals[rows, cols]
        # the far sign is attained from R_enc on
        hi = np.where(cols + 1 == len(radii), R_enc, hi)
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            v = np.asarray(sign_field(z + mid[:, None] * U[rows]), dtype=np.int8)
            same = v == left
            lo = np.where(same, mid, lo)
            hi = np.where(same, hi, mid)
        taus[rows, cols] = 0.5 * (lo + hi)
        taus = np.sort(taus, axis=1)
        return taus, vals[:, 0].copy(), code
    return profile


def pv_volume_integrate(sign_field, z, order, R_enc, far_sign, config=None, *,
                        frame=None, profile=None, breaks=()):
    """PV of ``int sign(y) |z - y|^(-n-2s) dy`` over R^n.

    Either give a black-box ``sign_field`` (points -> +1/-1/0) with
    ``far_sign`` (directions -> +1/-1/0), or a fast ``profile`` returning
    crossing radii directly. ``frame = (normal, tangents)`` orients the
    ray fan so grazing directions coincide with the extrapolated caps;
    ``breaks`` lists angles (from the first tangent towards the normal)
    where the integrand jumps.
    """
    cfg = config or QuadratureConfig()
    z = np.asarray(z, dtype=float)
    n = len(z)
    s = order.s
    if not R_enc > 0:
        raise ValueError("R_enc must be positive")
    if frame is None:
        eye = np.eye(n)
        frame = (eye[-1], tuple(eye[:-1]))
    nz, tangents = frame
    if profile is None:
        profile = _blackbox_profile(sign_field, far_sign, z, R_enc, cfg.shells)
    rules = _volume_rules(n, nz, tangents, cfg, 2.0 * s, breaks)
    return pv_ray_pairs(profile, rules, s, R_enc, cfg)


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------

def mc_integral(sample_fn, N, seed, chunk_size=1 << 15, workers=1):
    """Mean and standard error of ``sample_fn(rng, m) -> values`` over ``N`` draws.

    Chunk ``i`` always uses the stream ``SeedSequence(seed, spawn_key=(i,))``
    and partial sums are combined in chunk order, so the result is
    bit-identical for any number of workers.
    """
    N = int(N)
    if N < 2:
        raise ValueError("need at least two samples")
    sizes = [chunk_size] * (N // chunk_size)
    if N % chunk_size:
        sizes.append(N % chunk_size)

    def run(i):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(i,))))
        v = np.asarray(sample_fn(rng, sizes[i]), dtype=float)
        return float(np.sum(v)), float(np.sum(v * v))

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(run, range(len(sizes))))
    else:
        parts = [run(i) for i in range(len(sizes))]
    s1 = math.fsum(p[0] for p in parts)
    s2 = math.fsum(p[1] for p in parts)
    mean = s1 / N
    var = max(s2 / N - mean * mean, 0.0) * N / (N - 1)
    return mean, math.sqrt(var / N)


def mc_pair_integral(pair_sampler, weight, integrand, N, seed, chunk_size=1 << 15, workers=1,
                     max_resample=50):
    """Importance-sampled ``E[integrand * weight / density]`` over sampled pairs.

    ``pair_sampler(rng, m)`` returns ``(x, y, density)``; pairs for which
    ``integrand`` returns nan are degenerate and are redrawn.
    """

    def fn(rng, m):
        x, y, dens = pair_sampler(rng, m)
        val = np.asarray(integrand(x, y), dtype=float)
        for _ in range(max_resample):
            bad = np.isnan(val)
            if not bad.any():
                break
            x2, y2, d2 = pair_sampler(rng, int(bad.sum()))
            x, y, dens = x.copy(), y.copy(), np.asarray(dens, dtype=float).copy()
            x[bad], y[bad], dens[bad] = x2, y2, d2
            val = val.copy()
            val[bad] = integrand(x2, y2)
        else:
            raise ConvergenceError("too many degenerate samples")
        if np.any(dens <= 0):
            raise ValueError("sampler produced a zero-density pair")
        return val * np.asarray(weight(x, y), dtype=float) / dens

    return mc_integral(fn, N, seed, chunk_size, workers)


# ---------------------------------------------------------------------------
# anchored pair integrals
# ---------------------------------------------------------------------------

def crossing_rectangles(pos, neg, s, delta=math.inf, omega=None):
    """Sum over odd-parity rectangles of ``G / k`` for lines through an anchor.

    ``pos``/``neg`` hold the distances of the other crossings on the two
    sides of the anchor (nan padded, sorted). A pair ``x = z + xi u``,
    ``y = z - t u`` with ``i`` crossings before ``xi`` and ``j`` before
    ``t`` crosses ``1 + i + j`` times. ``omega = (lo, hi)`` restricts to
    pairs with ``x`` or ``y`` in the window ``[lo, hi]`` along the line
    (``lo < 0 < hi``).
    """
    n = len(pos)
    P = np.concatenate([np.zeros((n, 1)), pos, np.full((n, 1), np.nan)], axis=1)
    Q = np.concatenate([np.zeros((n, 1)), neg, np.full((n, 1), np.nan)], axis=1)
    cp = (~np.isnan(pos)).sum(1)
    cq = (~np.isnan(neg)).sum(1)
    P[np.arange(n), cp + 1] = np.inf
    Q[np.arange(n), cq + 1] = np.inf
    total = np.zeros(n)
    for i in range(pos.shape[1] + 1):
        for j in range(neg.shape[1] + 1):
            k = 1 + i + j
            if k % 2 == 0:
                continue
            x0, x1 = P[:, i], P[:, i + 1]
            t0, t1 = Q[:, j], Q[:, j + 1]
            if omega is None:
                g = rect_kernel_integral(x0, x1, t0, t1, s, delta)
            else:
                lo, hi = omega
                # x inside the window: any t
                g = rect_kernel_integral(x0, np.minimum(x1, hi), t0, t1, s, delta)
                # x outside, y inside
                g = g + rect_kernel_integral(np.maximum(x0, hi), x1, t0,
                                             np.minimum(t1, -lo), s, delta)
            total += np.where(np.isnan(x0) | np.isnan(t0), 0.0, g) / k
    return total


def cov_near_diagonal_integral(S, Omega, order, delta, config=None, *, lines=None):
    """Near-diagonal part ``|x - y| < delta`` of the relative s-area, deterministically.

    Surface nodes from ``S.quadrature`` times a product angular rule in
    ``u``; the ``(xi, t)`` integral is exact. Segments shorter than
    ``delta`` must cross ``S`` at most once: this is checked on every line
    of the rule: grazing lines on curved surfaces always recross, so the
    check bounds the ``|u.n|``-weighted fraction of such lines by
    ``MULTI_CROSSING_LIMIT`` and raises ``ValueError`` beyond it. Multiple
    crossings are still counted correctly. Returns ``(value, error)``.
    """
    cfg = config or QuadratureConfig()
    s = order.s
    n = S.dim
    alpha = ALPHA[n]
    if lines is None:
        from .crossing import line_profiles as lines

    def run(gorder, npan):
        pts, nrm, wz = S.quadrature(cfg.surface_panels * gorder)
        dirs, wu = _anchor_directions(n, gorder, npan, cfg.azimuth_nodes if n == 3 else None)
        acc, multi, mass = [], [], []
        for p, nn, w in zip(pts, nrm, wz):
            U = _rotate_to(dirs, nn)
            pos, neg, code = lines(S, p, nn, U)
            second = np.minimum(np.nan_to_num(pos, nan=np.inf)[:, 0],
                                np.nan_to_num(neg, nan=np.inf)[:, 0])
            wl = wu * np.abs(U @ nn)
            multi.append(w * math.fsum(wl[second < delta]))
            mass.append(w * math.fsum(wl))
            win = None
            if Omega is not None:
                iv = Omega.intervals(np.broadcast_to(p, U.shape), U)
                win = (iv[:, 0, 0], iv[:, 0, 1])
            g = crossing_rectangles(pos, neg, s, delta, win)
            g = np.where(code != 0, 0.0, g)
            acc.append(w * math.fsum(wu * np.abs(U @ nn) * g))
        frac = math.fsum(multi) / math.fsum(mass)
        if frac > MULTI_CROSSING_LIMIT:
            raise ValueError(f"delta too large: {frac:.1%} of the weighted lines cross the "
                             "surface twice within delta")
        return 0.5 * math.fsum(acc) / alpha

    fine = run(cfg.gauss_order, cfg.panels)
    coarse = run(cfg.gauss_order // 2, cfg.panels)
    return fine, max(abs(fine - coarse), 1e-15 * abs(fine))


def _anchor_directions(n, order, panels, m=None):
    """Unit vectors relative to the +e_n axis (the normal), with weights summing to |S^{n-1}|."""
    x, w = np.polynomial.legendre.leggauss(order)
    if n == 2:
        # gamma measured from the normal; kinks of |u.n| at pi/2 and 3pi/2
        edges = np.linspace(0.0, 2.0 * math.pi, 4 * panels + 1)
        a, b = edges[:-1, None], edges[1:, None]
        g = (0.5 * (b - a) * x + 0.5 * (a + b)).ravel()
        wg = (0.5 * (b - a) * w).ravel()
        return np.stack([np.sin(g), np.cos(g)], 1), wg
    edges = np.linspace(0.0, math.pi, 2 * panels + 1)
    a, b = edges[:-1, None], edges[1:, None]
    g = (0.5 * (b - a) * x + 0.5 * (a + b)).ravel()
    wg = (0.5 * (b - a) * w).ravel() * np.sin(g)
    psi = 2.0 * math.pi * np.arange(m) / m
    G, Ps = np.meshgrid(g, psi, indexing="ij")
    dirs = np.stack([np.sin(G) * np.cos(Ps), np.sin(G) * np.sin(Ps), np.cos(G)], -1).reshape(-1, 3)
    return dirs, (wg[:, None] * np.full(m, 2.0 * math.pi / m)).ravel()


def _rotate_to(dirs, nn):
    """Map the reference axis e_n onto ``nn`` (any completion of the frame)."""
    n = len(nn)
    if n == 2:
        t = np.array([nn[1], -nn[0]])
        return dirs[:, :1] * t + dirs[:, 1:] * nn
    a = np.zeros(3)
    a[int(np.argmin(np.abs(nn)))] = 1.0
    e1 = np.cross(nn, a)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(nn, e1)
    return dirs[:, :1] * e1 + dirs[:, 1:2] * e2 + dirs[:, 2:] * nn


# ---------------------------------------------------------------------------
# surface principal values
# ---------------------------------------------------------------------------

def surface_pv_integrate(S, z, integrand, config=None, *, singular_exponent=0.0):
    """PV of ``int_S f(y) dy`` around ``z``; ``f`` may blow up like ``|y - z|^-p``.

    ``integrand(nodes)`` receives a dict with ``points``, ``normals`` and,
    on analytic circles and arcs, ``angle`` (signed angle from ``z``) so
    that short chords can be evaluated without cancellation. Curves are
    split at ``z`` and each branch is integrated in ``w = t^(1-p)`` with
    an extrapolated cap; on meshes the facet containing ``z`` is skipped
    (the supplied integrands vanish there) and the others are refined
    around ``z``.
    """
    from .geometry import AnalyticCircle, Polyline2D, TriMesh3D

    cfg = config or QuadratureConfig()
    z = S._check_on(z)
    if S.distance_to_boundary(z) < S.tol_hit:
        raise ValueError("z lies on the boundary of the surface")
    p = float(singular_exponent)
    if isinstance(S, AnalyticCircle):
        return _surface_pv_circle(S, z, integrand, cfg, p)
    if isinstance(S, Polyline2D):
        return _surface_pv_polyline(S, z, integrand, cfg)
    if isinstance(S, TriMesh3D):
        return _surface_pv_mesh(S, z, integrand, cfg)
    raise TypeError(f"unsupported surface {type(S).__name__}")


def _surface_pv_circle(S, z, integrand, cfg, p):
    R = S.radius
    th0 = S.angle_of(z)
    a0, a1 = S.angular_span()
    if a1 - a0 >= 2.0 * math.pi - 1e-12:
        branches = [(1.0, math.pi), (-1.0, math.pi)]
    else:
        rel = (th0 - a0) % (2.0 * math.pi)
        branches = [(1.0, (a1 - a0) - rel), (-1.0, rel)]

    def eval_at(alpha):
        th = th0 + alpha
        pts, nrm = S._nodes_from_angles(th)
        return np.asarray(integrand({"points": pts, "normals": nrm, "angle": alpha}), dtype=float)

    total_f = total_c = cap_tot = cap_err = 0.0
    for sgn, length in branches:
        cap = cfg.cap * min(1.0, length)
        rules = []
        for order in (cfg.gauss_order, cfg.gauss_order // 2):
            x, w, _ = singular_rule(cap, length, p, (), cfg.surface_panels, order)
            rules.append(math.fsum(w * eval_at(sgn * x)) * R)
        total_f += rules[0]
        total_c += rules[1]
        cx = _cap_nodes(cap)
        g = eval_at(sgn * cx) * cx ** p
        v, e = _cap_value(g, cap, p)
        cap_tot += v * R
        cap_err += e * R
    value = total_f + cap_tot
    err = abs(total_f - total_c) + cap_err
    err = max(err, 1e-15 * abs(value))
    return PVEstimate(value, err, {"cap_value": cap_tot, "branches": len(branches)})


def _surface_pv_polyline(S, z, integrand, cfg):
    k = S._nearest(z[None])[0][0]
    parts_f, parts_c = [], []
    for order in (cfg.gauss_order, cfg.gauss_order // 2):
        x, w = np.polynomial.legendre.leggauss(order)
        lam = 0.5 * (x + 1.0)
        pts, nrm, wts = [], [], []
        for j in range(len(S.p)):
            p, q = S.p[j], S.q[j]
            pieces = [(0.0, 1.0)]
            if j == k:
                lz = float(np.dot(z - p, q - p) / S.lengths[j] ** 2)
                pieces = [(0.0, lz), (lz, 1.0)]
            for l0, l1 in pieces:
                # grade towards the joint nearest to z
                edges = np.linspace(l0, l1, 5)
                for e0, e1 in zip(edges[:-1], edges[1:]):
                    ll = e0 + (e1 - e0) * lam
                    pts.append(p + ll[:, None] * (q - p))
                    nrm.append(np.repeat(S.orientation * S.seg_normals[j][None], order, 0))
                    wts.append(0.5 * w * (e1 - e0) * S.lengths[j])
        vals = np.asarray(integrand({"points": np.concatenate(pts), "normals": np.concatenate(nrm)}))
        (parts_f if order == cfg.gauss_order else parts_c).append(math.fsum(np.concatenate(wts) * vals))
    value = parts_f[0]
    return PVEstimate(value, max(abs(value - parts_c[0]), 1e-15 * abs(value) + 1e-300), {})


def _tri_rule_nodes(tri, bary, wts):
    a, b, c = tri
    pts = bary[:, :1] * a + bary[:, 1:2] * b + bary[:, 2:] * c
    area = 0.5 * np.linalg.norm(np.cross(b - a, c - a))
    return pts, wts * area


def _surface_pv_mesh(S, z, integrand, cfg):
    a1, b1 = 0.0597158717, 0.4701420641
    a2, b2 = 0.7974269853, 0.1012865073
    bary = np.array([[1 / 3, 1 / 3, 1 / 3], [a1, b1, b1], [b1, a1, b1], [b1, b1, a1],
                     [a2, b2, b2], [b2, a2, b2], [b2, b2, a2]])
    w7 = np.array([0.225, *[0.1323941527] * 3, *[0.1259391805] * 3])
    f0 = S.nearest_face(z)
    v, t = S.vertices, S.triangles

    def refine(ratio):
        pts, nrm, wts = [], [], []
        for f in range(len(t)):
            if f == f0:
                continue
            stack = [(v[t[f]], 0)]
            nf = S.orientation * S.face_normals[f]
            while stack:
                tri, depth = stack.pop()
                cen = tri.mean(axis=0)
                diam = max(np.linalg.norm(tri[0] - tri[1]), np.linalg.norm(tri[1] - tri[2]),
                           np.linalg.norm(tri[2] - tri[0]))
                dist = np.min(np.linalg.norm(tri - z, axis=1))
                dist = min(dist, np.linalg.norm(cen - z))
                if diam > ratio * dist and depth < cfg.mesh_max_depth:
                    a, b, c = tri
                    ab, bc, ca = 0.5 * (a + b), 0.5 * (b + c), 0.5 * (c + a)
                    stack += [(np.array([a, ab, ca]), depth + 1), (np.array([b, bc, ab]), depth + 1),
                              (np.array([c, ca, bc]), depth + 1), (np.array([ab, bc, ca]), depth + 1)]
                    continue
                p_, w_ = _tri_rule_nodes(tri, bary, w7)
                pts.append(p_)
                wts.append(w_)
                nrm.append(np.repeat(nf[None], len(w_), 0))
        vals = np.asarray(integrand({"points": np.concatenate(pts), "normals": np.concatenate(nrm)}))
        return math.fsum(np.concatenate(wts) * vals), sum(len(w) for w in wts)

    fine, nodes = refine(cfg.mesh_refine_ratio)
    coarse, _ = refine(2.0 * cfg.mesh_refine_ratio)
    return PVEstimate(fine, max(abs(fine - coarse), 1e-15 * abs(fine)), {"nodes": nodes})


# ---------------------------------------------------------------------------
# extrapolation in t = 1 - 2s
# ---------------------------------------------------------------------------

def neville_limit(t, f, err=None):
    """Polynomial extrapolation of ``f(t)`` to ``t = 0`` through all points.

    Returns ``(limit, error)``: the error adds the size of the last
    correction in the Neville tableau to the propagated input errors.
    """
    t = np.asarray(t, dtype=float)
    f = np.asarray(f, dtype=float)
    m = len(t)
    if m < 2:
        raise ValueError("need at least two points")
    # order points so the one closest to 0 enters last
    idx = np.argsort(-t)
    t, f = t[idx], f[idx]
    tab = [list(f)]
    for k in range(1, m):
        prev = tab[-1]
        row = [(t[i + k] * prev[i] - t[i] * prev[i + 1]) / (t[i + k] - t[i]) for i in range(m - k)]
        tab.append(row)
    limit = tab[-1][0]
    corr = abs(limit - tab[-2][-1])
    stat = 0.0
    if err is not None:
        e = np.asarray(err, dtype=float)[idx]
        for i in range(m):
            li = np.prod([t[j] / (t[j] - t[i]) for j in range(m) if j != i])
            stat += abs(li) * e[i]
    return float(limit), float(corr + stat)
