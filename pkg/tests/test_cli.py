import csv
import io
import json
import os
import shutil
import subprocess
import sys

import pytest

from fracsurf import cli
from fracsurf.fixtures import FIXTURE_DIR

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
SCEN = os.path.join(ROOT, "scenarios")


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def write(tmp_path, obj, name="sc.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


SMALL_PERIM = {"E": {"type": "ball", "center": [0, 0], "radius": 1},
               "s": [0.25], "methods": ["SetPairs", "CrossingParity"], "N": 20000, "seed": 5}


def test_perimeter_json_lines(tmp_path, capsys):
    code, out, _ = run(["perimeter", "--scenario", write(tmp_path, SMALL_PERIM)], capsys)
    assert code == 0
    recs = [json.loads(line) for line in out.splitlines()]
    assert {r["method"] for r in recs} == {"SetPairs", "CrossingParity"}
    for r in recs:
        assert r["seed"] == 5 and r["sample_count"] == 20000
        assert r["config_hash"] and r["version"]


def test_seed_flag_overrides_scenario(tmp_path, capsys):
    p = write(tmp_path, SMALL_PERIM)
    _, a, _ = run(["perimeter", "--scenario", p], capsys)
    _, b, _ = run(["perimeter", "--scenario", p, "--seed", "6"], capsys)
    assert a != b and json.loads(b.splitlines()[0])["seed"] == 6


def test_csv_output_to_file(tmp_path, capsys):
    out = tmp_path / "o.csv"
    code, stdout, _ = run(["perimeter", "--scenario", write(tmp_path, SMALL_PERIM),
                           "--format", "csv", "--out", str(out)], capsys)
    assert code == 0 and stdout == ""
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    assert len(rows) == 2 and rows[0]["command"] == "perimeter"
    assert list(rows[0]) == cli.CSV_COLUMNS


def test_curvature_scenario(capsys):
    code, out, _ = run(["curvature", "--scenario", os.path.join(SCEN, "circle_curvature.json")],
                       capsys)
    assert code == 0
    recs = [json.loads(line) for line in out.splitlines()]
    forms = {r["form"] for r in recs}
    assert forms == {"Volume", "Flux", "DirectionalAverage", "Directional"}


def test_sweep_reports_limit_and_target(tmp_path, capsys):
    sc = {"quantity": "mean_curvature", "surface": {"type": "circle", "center": [0, 0],
                                                    "radius": 1},
          "point": [1, 0], "s": [0.3, 0.4, 0.45, 0.49]}
    code, out, _ = run(["sweep", "--scenario", write(tmp_path, sc)], capsys)
    assert code == 0
    last = json.loads(out.splitlines()[-1])
    assert last["target"] == -1.0
    assert abs(last["relative_deviation"]) < 0.02


@pytest.mark.parametrize("bad,needle", [
    ({**SMALL_PERIM, "s": [0.6]}, "s[0]"),
    ({**SMALL_PERIM, "N": 1}, "N"),
    ({k: v for k, v in SMALL_PERIM.items() if k != "seed"}, "seed"),
    ({**SMALL_PERIM, "E": {"type": "torus"}}, "torus"),
])
def test_invalid_inputs_exit_2(tmp_path, capsys, bad, needle):
    code, out, err = run(["perimeter", "--scenario", write(tmp_path, bad)], capsys)
    assert code == 2 and out == ""
    assert needle in err


def test_restricted_zone_exit_2(tmp_path, capsys):
    sc = {"surface": {"type": "arc", "center": [0, 0], "radius": 1,
                      "angles": [0, 3.141592653589793]},
          "points": [[1, 0]], "s": [0.25], "forms": ["Volume"]}
    code, _, err = run(["curvature", "--scenario", write(tmp_path, sc)], capsys)
    assert code == 2 and err


def test_missing_scenario_and_broken_json(tmp_path, capsys):
    assert run(["perimeter"], capsys)[0] == 2
    p = tmp_path / "b.json"
    p.write_text("{not json")
    assert run(["perimeter", "--scenario", str(p)], capsys)[0] == 2


def _copy_fixtures(tmp_path, names):
    d = tmp_path / "fx"
    d.mkdir()
    for n in names:
        shutil.copy(os.path.join(FIXTURE_DIR, n + ".json"), d)
    return d


def test_validate_subset_passes(tmp_path, capsys):
    d = _copy_fixtures(tmp_path, ["circle_mean_curvature_volume_s025",
                                  "sphere_mesh_measure_level4"])
    code, out, _ = run(["validate", "--scenario", write(tmp_path, {"fixtures_dir": str(d)})],
                       capsys)
    assert code == 0
    assert all(json.loads(line)["passed"] for line in out.splitlines())


def test_validate_detects_corrupted_oracle(tmp_path, capsys):
    d = _copy_fixtures(tmp_path, ["circle_mean_curvature_volume_s025"])
    p = d / "circle_mean_curvature_volume_s025.json"
    fx = json.loads(p.read_text())
    fx["oracle_value"] *= 1.01
    p.write_text(json.dumps(fx))
    code, _, err = run(["validate", "--scenario", write(tmp_path, {"fixtures_dir": str(d)})],
                       capsys)
    assert code == 1 and "circle_mean_curvature_volume_s025" in err


def test_validate_rejects_malformed_fixture(tmp_path, capsys):
    d = tmp_path / "fx"
    d.mkdir()
    (d / "x.json").write_text(json.dumps({"fixture_name": "x"}))
    code, _, err = run(["validate", "--scenario", write(tmp_path, {"fixtures_dir": str(d)})],
                       capsys)
    assert code == 1 and "missing" in err


def test_workers_do_not_change_output(tmp_path):
    p = write(tmp_path, {**SMALL_PERIM, "N": 100000})
    outs = []
    for w in ("1", "3"):
        r = subprocess.run([sys.executable, "-m", "fracsurf", "perimeter", "--scenario", p,
                            "--workers", w], capture_output=True, check=True)
        outs.append(r.stdout)
    assert outs[0] == outs[1]
