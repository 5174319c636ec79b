"""Reference fixtures: loading and re-validation against the production engines.

Each fixture is a JSON record ``{fixture_name, inputs, oracle_value,
oracle_params, generator_version, tolerance}`` written by
``tools/generate_fixtures.py`` from oracles that share no code with this
package. ``tolerance`` may hold ``rel`` and ``abs`` (oracle side) and
``sigma`` (multiples of the production error), or ``exact``.
"""

from __future__ import annotations

import json
import math
import os
import time
from dataclasses import dataclass

import numpy as np

from . import crossing, curvature, functionals, quadrature
from .quadrature import FractionalOrder
from .scenario import build_set, build_surface

__all__ = ["FixtureError", "FixtureOutcome", "FIXTURE_DIR", "load_fixture", "load_fixtures",
           "evaluate_fixture", "validate_fixture", "validate_all"]

FIXTURE_DIR = os.path.join(os.path.dirname(__file__), "fixtures")
REQUIRED = ("fixture_name", "inputs", "oracle_value", "oracle_params", "generator_version",
            "tolerance")


class FixtureError(ValueError):
    """A fixture file is missing fields or cannot be parsed."""


@dataclass
class FixtureOutcome:
    name: str
    passed: bool
    production: object
    production_error: float
    oracle: object
    allowed: float
    seconds: float

    def to_record(self):
        return {"fixture": self.name, "passed": self.passed, "production": self.production,
                "production_error": self.production_error, "oracle": self.oracle,
                "allowed": self.allowed, "seconds": round(self.seconds, 3)}


def load_fixture(path):
    try:
        with open(path) as fh:
            fx = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise FixtureError(f"{os.path.basename(path)}: {exc}") from None
    missing = [k for k in REQUIRED if k not in fx]
    if missing:
        raise FixtureError(f"{os.path.basename(path)}: missing {', '.join(missing)}")
    return fx


def load_fixtures(directory=None, names=None):
    directory = directory or FIXTURE_DIR
    files = sorted(f for f in os.listdir(directory) if f.endswith(".json"))
    out = [load_fixture(os.path.join(directory, f)) for f in files]
    if names:
        out = [fx for fx in out if fx["fixture_name"] in set(names)]
    return out


def _z_for(S, z):
    if z == "facet0_centroid":
        return S.vertices[S.triangles[0]].mean(axis=0)
    return np.asarray(z, dtype=float)


def _ev_curvature(inp):
    S = build_surface(inp["surface"])
    z = _z_for(S, inp["z"])
    o = FractionalOrder(inp["s"])
    form = inp["form"]
    if form == "Volume":
        r = curvature.mean_curvature_volume(S, z, o)
    elif form == "Flux":
        r = curvature.mean_curvature_flux(S, z, o)
    elif form == "DirectionalAverage":
        r = curvature.mean_from_directional(S, z, o)
    elif form == "Directional":
        r = curvature.directional_curvature(S, z, inp["e"], o)
    else:
        raise FixtureError(f"unknown curvature form {form!r}")
    return r.value, r.error_estimate


def _ev_pv_disk(inp):
    c = build_surface({"type": "circle", "center": [0, 0], "radius": 1})
    z = np.asarray(inp["z"], dtype=float)
    nz, tangents = c.frame_at(z)
    sign = lambda Y: np.where(np.einsum("ij,ij->i", Y, Y) < 1.0, 1, -1)
    far = lambda U: -np.ones(len(U), dtype=np.int8)
    r = quadrature.pv_volume_integrate(sign, z, FractionalOrder(inp["s"]), 2.0, far,
                                       frame=(nz, tangents))
    return r.value, r.error_estimate


def _ev_far_sign(inp):
    S = build_surface(inp["surface"])
    r = crossing.ray_far_sign(S, inp["z"], inp["u"])
    if r.degenerate:
        return f"Degenerate({r.reason.value})", 0.0
    return r.value, 0.0


def _ev_normal_sign(inp):
    S = build_surface(inp["surface"])
    return [crossing.interior_normal_sign(S, inp["z"], y).value for y in inp["y"]], 0.0


def _ev_sphere_measure(inp):
    S = build_surface({"type": "sphere_mesh", "level": inp["level"]})
    return S.classical_measure(), 0.0


def _ev_interaction(inp):
    iface = build_surface(inp["interface"]) if "interface" in inp else None
    r = functionals.interaction(build_set(inp["A"]), build_set(inp["B"]), FractionalOrder(inp["s"]),
                                inp["N"], inp["seed"], interface=iface)
    return r.value, r.std_error


def _ev_s_perimeter(inp):
    r = functionals.s_perimeter(build_set(inp["E"]), FractionalOrder(inp["s"]), inp["method"],
                                inp["N"], inp["seed"])
    return r.value, r.std_error


def _ev_relative(inp):
    r = functionals.s_perimeter_relative(build_set(inp["E"]), build_set(inp["Omega"]),
                                         FractionalOrder(inp["s"]), inp["N"], inp["seed"])
    return r.value, r.std_error + r.bias_bound


def _ev_area(inp):
    r = functionals.s_area(build_surface(inp["surface"]), build_set(inp["Omega"]),
                           FractionalOrder(inp["s"]), N=inp["N"], seed=inp["seed"])
    return r.value, r.std_error + r.bias_bound


def _ev_cov(inp):
    v, e = quadrature.cov_near_diagonal_integral(build_surface(inp["surface"]),
                                                 build_set(inp["Omega"]),
                                                 FractionalOrder(inp["s"]), inp["delta"])
    return v, e


EVALUATORS = {
    "curvature": _ev_curvature,
    "pv_disk": _ev_pv_disk,
    "far_sign": _ev_far_sign,
    "normal_sign": _ev_normal_sign,
    "sphere_measure": _ev_sphere_measure,
    "interaction": _ev_interaction,
    "s_perimeter": _ev_s_perimeter,
    "s_perimeter_relative": _ev_relative,
    "s_area": _ev_area,
    "cov_near_diagonal": _ev_cov,
}


def evaluate_fixture(fx):
    """Production ``(value, error)`` for the fixture's inputs."""
    kind = fx["inputs"].get("kind")
    if kind not in EVALUATORS:
        raise FixtureError(f"{fx['fixture_name']}: unknown kind {kind!r}")
    return EVALUATORS[kind](fx["inputs"])


def validate_fixture(fx):
    t0 = time.perf_counter()
    value, err = evaluate_fixture(fx)
    tol = fx["tolerance"]
    oracle = fx["oracle_value"]
    if tol.get("exact"):
        passed = value == oracle
        allowed = 0.0
    else:
        allowed = (tol.get("rel", 0.0) * abs(oracle) + tol.get("abs", 0.0)
                   + tol.get("sigma", 0.0) * err)
        passed = bool(math.isfinite(value) and abs(value - oracle) <= allowed)
    return FixtureOutcome(fx["fixture_name"], passed, value, err, oracle, allowed,
                          time.perf_counter() - t0)


def validate_all(directory=None, names=None):
    return [validate_fixture(fx) for fx in load_fixtures(directory, names)]
