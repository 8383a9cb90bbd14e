import json
import math
import subprocess
import sys

import numpy as np
import pytest

from finslerlab import cli


def run(scen, *extra, command="run"):
    proc = subprocess.run(
        [sys.executable, "-m", "finslerlab", command, "--scenario", "-", *extra],
        input=json.dumps(scen),
        capture_output=True,
        text=True,
        timeout=600,
    )
    return proc.returncode, proc.stdout, proc.stderr


def error_code(stderr):
    return json.loads(stderr.strip().splitlines()[-1])["error"]["code"]


def test_euclidean_geodesic_csv():
    code, out, _ = run({"metric": "euclidean", "task": "geodesic", "x0": [0, 0], "v0": [1, 2], "span": [0, 1]})
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0].split(",")[:5] == ["t", "x0", "x1", "v0", "v1"]
    last = [float(c) for c in lines[-1].split(",")]
    assert last[:3] == pytest.approx([1.0, 1.0, 2.0], abs=1e-12)
    # full-precision floats
    assert "e+00" in lines[-1]


def test_conjugate_on_the_equator():
    code, out, _ = run({"metric": "sphere", "task": "conjugate", "x0": [math.pi / 2, 0], "v0": [0, 1], "span": [0, 3.5]})
    assert code == 0
    rows = out.strip().splitlines()[1:]
    assert len(rows) == 1
    t, mult = rows[0].split(",")
    assert float(t) == pytest.approx(math.pi, abs=1e-6) and int(float(mult)) == 1


def test_conjugate_from_near_the_pole_is_a_domain_error():
    code, _, err = run({"metric": "sphere", "task": "conjugate", "x0": [1.5708, 0], "v0": [-1, 0], "span": [0, 3.5]})
    assert code == 2
    assert error_code(err) == "integration.domain_exit"


@pytest.mark.parametrize(
    "scen,code",
    [
        ({"metric": "euclidean", "task": "geodesic", "x0": [0, 0], "v0": [1, 2], "span": [1, 0]}, "span.decreasing"),
        ({"metric": "euclidean", "task": "geodesic", "x0": [0, 0], "v0": [1, 2], "span": [0, 1], "bogus": 1}, "bogus.unknown"),
        ({"metric": "euclidean", "task": "geodesic", "x0": [0, 0], "span": [0, 1]}, "v0.missing"),
        ({"metric": "nowhere", "task": "geodesic", "x0": [0, 0], "v0": [1, 0], "span": [0, 1]}, "metric.unknown"),
        ({"metric": "euclidean", "task": "fly"}, "task.unknown"),
        ({"metric": "euclidean", "task": "exp", "p": [0, 0, 0], "v": [1, 0]}, "p.dimension"),
    ],
)
def test_schema_errors_exit_1(scen, code):
    rc, out, err = run(scen)
    assert rc == 1 and out == ""
    assert error_code(err) == code


def test_unparseable_scenario():
    proc = subprocess.run([sys.executable, "-m", "finslerlab", "run", "--scenario", "-"], input="{nope", capture_output=True, text=True)
    assert proc.returncode == 1 and error_code(proc.stderr) == "scenario.parse"


def test_variation_and_indexform_tasks():
    ts = [i / 40 for i in range(41)]
    W = {"ts": ts, "values": [[0, math.sin(math.pi * t)] for t in ts]}
    base = {"metric": "euclidean", "x0": [0, 0], "v0": [1, 0], "span": [0, 1], "format": "json"}
    code, out, _ = run(dict(base, task="variation", W=W))
    doc = json.loads(out)
    assert code == 0 and doc["columns"] == ["energy", "first_variation", "second_variation"]
    E, d1, d2 = doc["rows"][0]
    assert E == pytest.approx(0.5) and abs(d1) <= 1e-12 and d2 == pytest.approx(math.pi**2 / 2, rel=1e-6)
    code, out, _ = run(
        dict(base, task="indexform", P={"patch": "point", "p": [0, 0]}, Q={"patch": "point", "p": [1, 0]}, V=W, W=W)
    )
    assert code == 0 and json.loads(out)["rows"][0][0] == pytest.approx(math.pi**2 / 2, rel=1e-6)


def test_focal_and_flag_tasks_in_process(capsys):
    scen = {
        "metric": "euclidean",
        "task": "focal",
        "P": {"patch": "circle", "center": [0, 0], "radius": 1},
        "x0": [1, 0],
        "v0": [-1, 0],
        "span": [0, 1.5],
    }
    cols, rows, _ = cli.run_scenario(scen)
    assert cols == ["t", "multiplicity"] and rows[0][0] == pytest.approx(1.0, abs=1e-6)
    cols, rows, _ = cli.run_scenario({"metric": "funk", "task": "flagcurv", "flags": 4, "seed": 2})
    for row in rows:
        assert row[-2] == pytest.approx(-0.25, abs=1e-5) and row[-1] == pytest.approx(-0.25, abs=1e-5)


def test_json_writes_nan_as_null():
    text = cli.render("variation", ["a", "b"], [[1.0, float("nan")]], {}, "json")
    assert json.loads(text)["rows"] == [[1.0, None]]


def test_byte_identical_output(tmp_path):
    scen = {"metric": "randers", "task": "flagcurv", "flags": 6}
    a = run(scen, "--seed", "7")
    b = run(scen, "--seed", "7")
    c = run(scen, "--seed", "8")
    assert a[0] == 0 and a[1] == b[1] and a[1] != c[1]


def test_subcommand_and_task_mismatch():
    scen = {"metric": "euclidean", "task": "exp", "p": [0, 0], "v": [1, 1]}
    code, out, _ = run(scen, command="exp")
    assert code == 0 and [float(c) for c in out.strip().splitlines()[-1].split(",")] == pytest.approx([1, 1])
    code, _, err = run(scen, command="geodesic")
    assert code == 1 and error_code(err) == "task.mismatch"


def test_validate_exit_status():
    ok = subprocess.run([sys.executable, "-m", "finslerlab", "validate", "euclidean", "--samples", "2"], capture_output=True, text=True, timeout=600)
    assert ok.returncode == 0
    assert ok.stdout.splitlines()[0] == "metric,check,residual,tol,status"
    bad = subprocess.run([sys.executable, "-m", "finslerlab", "validate", "broken", "--samples", "2"], capture_output=True, text=True, timeout=600)
    assert bad.returncode == 1 and ",fail" in bad.stdout
