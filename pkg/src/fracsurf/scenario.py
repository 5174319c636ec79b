"""JSON scene descriptions: surfaces, solid sets and integrator overrides.

Surfaces::

    {"type": "circle", "center": [0, 0], "radius": 1, "orientation": 1}
    {"type": "arc", "center": [0, 0], "radius": 1, "angles": [0, 3.14159]}
    {"type": "polyline", "vertices": [[0, 0], [1, 0]], "closed": false}
    {"type": "polyline", "path": "shape.txt"}
    {"type": "sphere_mesh", "center": [0, 0, 0], "radius": 1, "level": 3}
    {"type": "mesh", "path": "part.obj"}

Solid sets: ``ball``, ``box``, ``halfspace``, ``polyhedron`` (convex solid
bounded by a surface description) and ``complement``.
"""

from __future__ import annotations

import os

import numpy as np

from . import geometry
from .quadrature import QuadratureConfig
from .sets import Ball, Box, Complement, ConvexPolyhedron, HalfSpace

__all__ = ["ScenarioError", "build_surface", "build_set", "build_config"]


class ScenarioError(ValueError):
    """Invalid scene description; the message names the offending field."""


def _need(spec, key, where):
    if key not in spec:
        raise ScenarioError(f"{where}: missing field '{key}'")
    return spec[key]


def _path(spec, where, base):
    p = _need(spec, "path", where)
    if base and not os.path.isabs(p):
        p = os.path.join(base, p)
    if not os.path.exists(p):
        raise ScenarioError(f"{where}.path: file not found: {p}")
    return p


def build_surface(spec, base_dir=None, where="surface"):
    kind = _need(spec, "type", where)
    orient = int(spec.get("orientation", 1))
    if kind == "circle":
        S = geometry.make_circle(_need(spec, "center", where), _need(spec, "radius", where))
    elif kind == "arc":
        a0, a1 = _need(spec, "angles", where)
        S = geometry.make_arc(_need(spec, "center", where), _need(spec, "radius", where), a0, a1)
    elif kind == "polyline":
        if "path" in spec:
            with open(_path(spec, where, base_dir)) as fh:
                S = geometry.load_polyline(fh)
        else:
            S = geometry.make_polyline(_need(spec, "vertices", where), bool(spec.get("closed", False)))
    elif kind == "sphere_mesh":
        S = geometry.make_sphere_mesh(spec.get("center", [0.0, 0.0, 0.0]),
                                      spec.get("radius", 1.0), int(spec.get("level", 3)))
    elif kind == "mesh":
        with open(_path(spec, where, base_dir)) as fh:
            S = geometry.load_mesh(fh)
    else:
        raise ScenarioError(f"{where}.type: unknown surface type {kind!r}")
    return S.flipped() if orient == -1 else S


def build_set(spec, base_dir=None, where="set"):
    kind = _need(spec, "type", where)
    if kind == "ball":
        return Ball(_need(spec, "center", where), _need(spec, "radius", where))
    if kind == "box":
        return Box(_need(spec, "lo", where), _need(spec, "hi", where))
    if kind == "halfspace":
        return HalfSpace(_need(spec, "point", where), _need(spec, "normal", where))
    if kind == "polyhedron":
        return ConvexPolyhedron.from_mesh(build_surface(_need(spec, "surface", where), base_dir,
                                                        where + ".surface"))
    if kind == "complement":
        return Complement(build_set(_need(spec, "of", where), base_dir, where + ".of"))
    raise ScenarioError(f"{where}.type: unknown set type {kind!r}")


def build_config(overrides=None):
    cfg = QuadratureConfig()
    for k, v in (overrides or {}).items():
        if not hasattr(cfg, k):
            raise ScenarioError(f"config: unknown field '{k}'")
        setattr(cfg, k, type(getattr(cfg, k))(v))
    return cfg


def points(values, dim, where):
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 1:
        arr = arr[None]
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise ScenarioError(f"{where}: expected points of dimension {dim}")
    return arr
