"""Command-line front end: ``fracsurf <command> --scenario scene.json``.

Commands and the scenario fields they read:

``perimeter``
    ``E`` (solid set), optional ``Omega`` (relative perimeter), ``s``,
    ``methods`` (``SetPairs``/``CrossingParity``), ``N``, ``seed``.
``area``
    ``surface``, ``Omega``, ``s``, ``N``, ``seed``, optional ``delta``.
``curvature``
    ``surface``, ``points``, ``s``, ``forms`` (``Volume``, ``Flux``,
    ``DirectionalAverage``, ``Directional``), optional ``directions``
    for the directional form (default: both senses of a tangent at each
    point).
``sweep``
    ``quantity`` (``s_area``, ``s_perimeter``, ``s_perimeter_relative``,
    ``mean_curvature``, ``directional_curvature``) plus that quantity's
    fields; ``s`` is the grid. The last record holds the extrapolated
    limit and, for analytic scenes, the classical target.
``validate``
    Re-runs the reference fixtures; the scenario is optional and may give
    ``fixtures_dir`` and ``names``.

Every scenario may carry ``config`` overrides for the quadrature engine.
Output is JSON lines, or CSV with the columns in ``CSV_COLUMNS``. Exit
codes: 0 ok, 1 fixture mismatch, 2 invalid input, 3 no convergence.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys

import numpy as np

from . import __version__, curvature, fixtures, functionals
from .geometry import AnalyticCircle, GeometryError
from .quadrature import ConvergenceError, FractionalOrder, config_hash
from .scenario import ScenarioError, build_config, build_set, build_surface, points
from .sets import Ball, Box, HalfSpace, unit_ball_volume

__all__ = ["main", "cmd_perimeter", "cmd_area", "cmd_curvature", "cmd_sweep", "cmd_validate",
           "CSV_COLUMNS", "EXIT_OK", "EXIT_FIXTURE", "EXIT_INPUT", "EXIT_CONVERGENCE"]

EXIT_OK, EXIT_FIXTURE, EXIT_INPUT, EXIT_CONVERGENCE = 0, 1, 2, 3

CSV_COLUMNS = ["command", "quantity", "method", "form", "s", "z", "e", "value", "error",
               "bias_bound", "sample_count", "seed", "scaled", "limit", "limit_error", "target",
               "relative_deviation", "fixture", "passed", "config_hash", "version"]


# -- scenario helpers -------------------------------------------------------

def _s_list(sc, key="s"):
    vals = sc.get(key)
    if vals is None:
        raise ScenarioError(f"{key}: missing field")
    if not isinstance(vals, list):
        vals = [vals]
    out = []
    for i, v in enumerate(vals):
        try:
            out.append(FractionalOrder(float(v)))
        except (TypeError, ValueError):
            raise ScenarioError(f"{key}[{i}]: {v!r} is not in (0, 1/2)") from None
    return out


def _seed(sc):
    if "seed" not in sc:
        raise ScenarioError("seed: required (no implicit seeds)")
    seed = sc["seed"]
    if not isinstance(seed, int) or seed < 0:
        raise ScenarioError("seed: must be a non-negative integer")
    return seed


def _count(sc, default):
    N = sc.get("N", default)
    if not isinstance(N, int) or N < 2:
        raise ScenarioError("N: must be an integer >= 2")
    return N


def _need(sc, key):
    if key not in sc:
        raise ScenarioError(f"{key}: missing field")
    return sc[key]


def _functional_record(command, quantity, s, res):
    rec = {"command": command, "quantity": quantity, "s": s}
    rec.update(res.to_record())
    rec["error"] = res.std_error
    return rec


# -- commands -----------------------------------------------------------------

def cmd_perimeter(sc, base_dir=None, workers=1):
    E = build_set(_need(sc, "E"), base_dir, "E")
    seed, N = _seed(sc), _count(sc, 200_000)
    out = []
    if "Omega" in sc:
        Om = build_set(sc["Omega"], base_dir, "Omega")
        for o in _s_list(sc):
            r = functionals.s_perimeter_relative(E, Om, o, N, seed, workers=workers)
            out.append(_functional_record("perimeter", "s_perimeter_relative", o.s, r))
        return out
    methods = sc.get("methods", [functionals.SET_PAIRS, functionals.CROSSING_PARITY])
    for m in methods:
        if m not in (functionals.SET_PAIRS, functionals.CROSSING_PARITY):
            raise ScenarioError(f"methods: unknown method {m!r}")
    for o in _s_list(sc):
        for m in methods:
            r = functionals.s_perimeter(E, o, m, N, seed, workers=workers)
            out.append(_functional_record("perimeter", "s_perimeter", o.s, r))
    return out


def cmd_area(sc, base_dir=None, workers=1):
    S = build_surface(_need(sc, "surface"), base_dir)
    Om = build_set(_need(sc, "Omega"), base_dir, "Omega")
    cfg = build_config(sc.get("config"))
    seed, N = _seed(sc), _count(sc, 200_000)
    out = []
    for o in _s_list(sc):
        r = functionals.s_area(S, Om, o, cfg, N, seed, delta=sc.get("delta"), workers=workers)
        out.append(_functional_record("area", "s_area", o.s, r))
    return out


FORMS = ("Volume", "Flux", "DirectionalAverage", "Directional")


def _curv(S, z, o, form, cfg, e=None):
    if form == "Volume":
        return curvature.mean_curvature_volume(S, z, o, cfg)
    if form == "Flux":
        return curvature.mean_curvature_flux(S, z, o, cfg)
    if form == "DirectionalAverage":
        return curvature.mean_from_directional(S, z, o, config=cfg)
    return curvature.directional_curvature(S, z, e, o, cfg)


def _curv_record(command, S, r, cfg, e=None):
    rec = {"command": command, "quantity": "curvature", "form": r.form, "s": r.s,
           "z": list(r.z), "value": r.value, "error": r.error_estimate}
    if e is not None:
        rec["e"] = list(map(float, e))
    rec["config_hash"] = config_hash({"op": "curvature", "S": repr(S), "form": r.form,
                                      "z": list(r.z), "e": rec.get("e"), "s": r.s,
                                      "cfg": cfg.to_dict()})
    return rec


def cmd_curvature(sc, base_dir=None, workers=1):
    S = build_surface(_need(sc, "surface"), base_dir)
    cfg = build_config(sc.get("config"))
    Z = points(_need(sc, "points"), S.dim, "points")
    forms = sc.get("forms", ["Volume"])
    for f in forms:
        if f not in FORMS:
            raise ScenarioError(f"forms: unknown form {f!r}")
    dirs = points(sc["directions"], S.dim, "directions") if "directions" in sc else None
    out = []
    for o in _s_list(sc):
        for z in Z:
            for f in forms:
                if f == "Directional":
                    # default: both senses of the first tangent at z
                    if dirs is None:
                        t0 = S.tangent_basis_at(z)[0]
                        es = [t0, -t0]
                    else:
                        es = dirs
                    for e in es:
                        out.append(_curv_record("curvature", S, _curv(S, z, o, f, cfg, e), cfg, e))
                else:
                    out.append(_curv_record("curvature", S, _curv(S, z, o, f, cfg), cfg))
    return out


def _perimeter_target(E, Om=None):
    n = E.dim
    if isinstance(E, Ball):
        if Om is not None and not (isinstance(Om, Ball) and np.linalg.norm(E.center - Om.center)
                                   + E.radius < Om.radius):
            return None
        return n * unit_ball_volume(n) * E.radius ** (n - 1)
    if isinstance(E, Box) and Om is None and n == 2:
        return 2.0 * float(np.sum(E.hi - E.lo))
    if isinstance(E, HalfSpace) and isinstance(Om, Ball):
        d = abs(float((Om.center - E.point) @ E.normal))
        if d >= Om.radius:
            return 0.0
        return unit_ball_volume(n - 1) * (Om.radius ** 2 - d * d) ** ((n - 1) / 2)
    return None


def cmd_sweep(sc, base_dir=None, workers=1):
    q = _need(sc, "quantity")
    grid = [o.s for o in _s_list(sc)]
    cfg = build_config(sc.get("config"))
    target = None
    if q in ("s_area", "s_perimeter", "s_perimeter_relative"):
        seed, N = _seed(sc), _count(sc, 200_000)
    if q == "s_area":
        S = build_surface(_need(sc, "surface"), base_dir)
        Om = build_set(_need(sc, "Omega"), base_dir, "Omega")
        ev = lambda o: functionals.s_area(S, Om, o, cfg, N, seed, workers=workers)
        target = S.classical_measure()
    elif q == "s_perimeter":
        E = build_set(_need(sc, "E"), base_dir, "E")
        method = sc.get("method", functionals.CROSSING_PARITY)
        ev = lambda o: functionals.s_perimeter(E, o, method, N, seed, workers=workers)
        target = _perimeter_target(E)
    elif q == "s_perimeter_relative":
        E = build_set(_need(sc, "E"), base_dir, "E")
        Om = build_set(_need(sc, "Omega"), base_dir, "Omega")
        ev = lambda o: functionals.s_perimeter_relative(E, Om, o, N, seed, workers=workers)
        target = _perimeter_target(E, Om)
    elif q in ("mean_curvature", "directional_curvature"):
        S = build_surface(_need(sc, "surface"), base_dir)
        z = points(_need(sc, "point"), S.dim, "point")[0]
        if q == "mean_curvature":
            ev = lambda o: curvature.mean_curvature_volume(S, z, o, cfg)
        else:
            e = points(_need(sc, "direction"), S.dim, "direction")[0]
            ev = lambda o: curvature.directional_curvature(S, z, e, o, cfg)
        if isinstance(S, AnalyticCircle) or (q == "mean_curvature" and "sphere_radius"
                                             in getattr(S, "meta", {})):
            target = curvature.classical_curvature(S, z)
    else:
        raise ScenarioError(f"quantity: unknown quantity {q!r}")

    out, hashes = [], []

    def evaluator(s):
        r = ev(FractionalOrder(s))
        if isinstance(r, functionals.FunctionalResult):
            rec = _functional_record("sweep", q, s, r)
            val, err = r.value, r.std_error + r.bias_bound
        else:
            rec = _curv_record("sweep", S, r, cfg)
            rec["quantity"] = q
            val, err = r.value, r.error_estimate
        rec["scaled"] = (1.0 - 2.0 * s) * val
        out.append(rec)
        hashes.append(rec["config_hash"])
        return val, err

    sw = functionals.scaled_limit_sweep(evaluator, grid)
    final = {"command": "sweep", "quantity": q, "s": grid, "scaled": sw.scaled,
             "limit": sw.limit, "limit_error": sw.limit_error,
             "config_hash": config_hash({"op": "sweep", "parts": hashes})}
    if target is not None:
        final["target"] = target
        final["relative_deviation"] = (sw.limit - target) / abs(target) if target else math.nan
    out.append(final)
    return out


def cmd_validate(sc=None, base_dir=None, workers=1):
    sc = sc or {}
    d = sc.get("fixtures_dir")
    if d and base_dir and not os.path.isabs(d):
        d = os.path.join(base_dir, d)
    out, failed = [], []
    for fx in fixtures.load_fixtures(d, sc.get("names")):
        try:
            res = fixtures.validate_fixture(fx)
        except (fixtures.FixtureError, KeyError, TypeError, ValueError) as exc:
            failed.append(fx["fixture_name"])
            out.append({"command": "validate", "fixture": fx["fixture_name"], "passed": False,
                        "message": str(exc)})
            continue
        rec = {"command": "validate"}
        rec.update(res.to_record())
        rec.pop("seconds")
        rec["config_hash"] = config_hash(fx["inputs"])
        out.append(rec)
        if not res.passed:
            failed.append(res.name)
    return out, failed


COMMANDS = {"perimeter": cmd_perimeter, "area": cmd_area, "curvature": cmd_curvature,
            "sweep": cmd_sweep}


# -- output -------------------------------------------------------------------

def _plain(v):
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_plain(x) for x in v]
    if isinstance(v, np.generic):
        return v.item()
    return v


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, list):
        return " ".join(_cell(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def render(records, fmt):
    records = [_plain(r) for r in records]
    for r in records:
        r["version"] = __version__
    if fmt == "json":
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in records)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        w.writerow([_cell(r.get(c)) for c in CSV_COLUMNS])
    return buf.getvalue()


def _parser():
    ap = argparse.ArgumentParser(prog="fracsurf",
                                 description="Nonlocal perimeters, areas and curvatures.")
    ap.add_argument("command", choices=sorted(COMMANDS) + ["validate"])
    ap.add_argument("--scenario", help="scenario JSON file")
    ap.add_argument("--out", help="output file (default: stdout)")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--seed", type=int, help="overrides the scenario seed")
    ap.add_argument("--format", choices=("json", "csv"), default="json")
    return ap


def main(argv=None):
    args = _parser().parse_args(argv)
    err = sys.stderr
    try:
        sc, base = {}, None
        if args.scenario:
            try:
                with open(args.scenario) as fh:
                    sc = json.load(fh)
            except OSError as exc:
                raise ScenarioError(f"scenario: {exc}") from None
            except json.JSONDecodeError as exc:
                raise ScenarioError(f"scenario: invalid JSON ({exc})") from None
            if not isinstance(sc, dict):
                raise ScenarioError("scenario: top level must be an object")
            base = os.path.dirname(os.path.abspath(args.scenario))
        elif args.command != "validate":
            raise ScenarioError("--scenario is required")
        if args.seed is not None:
            if args.seed < 0:
                raise ScenarioError("--seed: must be non-negative")
            sc["seed"] = args.seed
        if args.workers < 1:
            raise ScenarioError("--workers: must be at least 1")
        code = EXIT_OK
        if args.command == "validate":
            records, failed = cmd_validate(sc, base, args.workers)
            if failed:
                print("fixture mismatch: " + ", ".join(failed), file=err)
                code = EXIT_FIXTURE
        else:
            records = COMMANDS[args.command](sc, base, args.workers)
    except fixtures.FixtureError as exc:
        print(f"fixture error: {exc}", file=err)
        return EXIT_FIXTURE
    except ConvergenceError as exc:
        print(f"no convergence: {exc}", file=err)
        return EXIT_CONVERGENCE
    except (ScenarioError, GeometryError, ValueError, TypeError) as exc:
        print(f"invalid input: {exc}", file=err)
        return EXIT_INPUT
    text = render(records, args.format)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
