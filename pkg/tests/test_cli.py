import csv
import io
import json

import numpy as np
import pytest

from spectral_det import cli

SCALAR = {"kind": "matrix", "A": [[1]], "B": [1], "C": [1]}


@pytest.fixture
def write(tmp_path):
    def _write(name, obj):
        p = tmp_path / name
        p.write_text(obj if isinstance(obj, str) else json.dumps(obj))
        return str(p)
    return _write


def run(argv, tmp_path):
    out = tmp_path / "out.txt"
    code = cli.run(list(argv) + ["--output", str(out)])
    return code, out.read_text() if out.exists() else ""


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_tau_grid(write, tmp_path):
    code, text = run(["tau", "--system", write("s.json", SCALAR), "--x-grid", "0:5:6"], tmp_path)
    assert code == 0
    r = rows(text)
    assert len(r) == 6 and float(r[0]["tau"]) == 1.5
    for row in r:
        x = float(row["x"])
        assert float(row["tau"]) == pytest.approx(1 + np.exp(-2 * x) / 2, rel=1e-14)


def test_csv_round_trip_digits(write, tmp_path):
    _, text = run(["tau", "--system", write("s.json", SCALAR), "--x-grid", "0:1:4"], tmp_path)
    from spectral_det import statecalc, realization
    s = realization.scalar_system()
    for row in rows(text):
        assert float(row["tau"]) == statecalc.tau(s, float(row["x"])).real


@pytest.mark.parametrize("doc,field", [
    ("{not json", "system"),
    ({"kind": "matrix", "A": [[1]], "B": "x", "C": [1]}, "system.B"),
    ({"kind": "matrix", "A": [[1, 2]], "B": [1], "C": [1]}, "system.A"),
    ({"kind": "warp"}, "system.kind"),
    ({"kind": "rational", "poles": [{"a": [1, 0], "r": 1}]}, "system"),
    ({"kind": "rational", "poles": [{"a": [-1, 0], "r": 0}]}, "system.poles[0].r"),
    ({"kind": "diagonal", "b": "exp", "c": "nope"}, "system.c"),
    ({"kind": "diagonal", "b": "exp", "c": {"table": [[0, 1]]}}, "system.c.table"),
])
def test_malformed_input_exit_2(doc, field, write, tmp_path, capsys):
    code, _ = run(["tau", "--system", write("s.json", doc), "--x-grid", "0:1:2"], tmp_path)
    assert code == 2
    assert field in capsys.readouterr().err


@pytest.mark.parametrize("grid", ["1:0:3", "0:1:1", "0:1", "a:b:c"])
def test_bad_grid(grid, write, tmp_path, capsys):
    code, _ = run(["tau", "--system", write("s.json", SCALAR), "--x-grid", grid], tmp_path)
    assert code == 2 and "x-grid" in capsys.readouterr().err


def test_missing_file(tmp_path, capsys):
    code, _ = run(["tau", "--system", str(tmp_path / "none.json"), "--x-grid", "0:1:2"], tmp_path)
    assert code == 2 and "system" in capsys.readouterr().err


def test_unknown_subcommand():
    assert cli.run(["frobnicate"]) == 2


def test_det(write, tmp_path):
    code, text = run(["det", "--system", write("s.json", SCALAR), "--nodes", "64"], tmp_path)
    res = json.loads(text)
    assert code == 0 and abs(complex(*res["det"]) - 1.5) < 1e-10 and res["nodes"] == 64


def test_det_auto_rational(write, tmp_path):
    doc = {"kind": "rational", "poles": [{"a": [-1, 0], "r": 2}, {"a": [-2, 0], "r": 2}]}
    sysf = write("r.json", doc)
    code, text = run(["det", "--system", sysf, "--tol", "1e-8"], tmp_path)
    res = json.loads(text)
    assert code == 0 and res["converged"]
    assert res["det"][0] == pytest.approx(1.8510572869, rel=1e-8)
    # algebraic endpoint decay: 1e-10 is out of reach within the node cap
    code, text = run(["det", "--system", sysf], tmp_path)
    assert code == 0 and not json.loads(text)["converged"]


def test_potential_and_gl(write, tmp_path):
    sysf = write("s.json", {"kind": "soliton", "rates": [1, 2], "weights": [1, 0.5]})
    code, text = run(["potential", "--system", sysf, "--x-grid", "0.2:5:5"], tmp_path)
    assert code == 0 and all(float(r["residual"]) < 1e-6 for r in rows(text))
    code, text = run(["gl", "--system", sysf, "--x-grid", "0.5:2:3", "--format", "json"], tmp_path)
    data = json.loads(text)
    assert code == 0 and len(data) == 9 and max(d["residual"] for d in data) < 1e-7


def test_green(write, tmp_path):
    sysf = write("s.json", {"kind": "soliton", "rates": [1], "weights": [1]})
    code, text = run(["green", "--system", sysf, "--lambda-grid=-100:-25:2"], tmp_path)
    assert code == 0
    assert all(float(r["rel_diff"]) < 1e-6 for r in rows(text))


def test_xi_with_potential(write, tmp_path):
    pot = write("p.json", {"name": "free"})
    code, text = run(["xi", "--potential", pot, "--lambda-grid", "0.5:2:3"], tmp_path)
    assert code == 0
    assert all(abs(float(r["xi"]) - 0.5) < 1e-4 for r in rows(text))


def test_phase(write, tmp_path):
    cs = write("c.json", {"kind": "schrodinger", "potential": {"name": "free"}})
    code, text = run(["phase", "--canonical", cs, "--kappa-grid", "0.5:2:4"], tmp_path)
    r = rows(text)
    assert code == 0 and len(r) >= 4 and set(r[0]) == {"kappa", "phase", "abs_E"}


def test_phase_bad_canonical(write, tmp_path, capsys):
    cs = write("c.json", {"kind": "constant", "omega0": [[1, 0], [0, 1]], "omega1": [[-1, 0], [0, 0]]})
    code, _ = run(["phase", "--canonical", cs, "--kappa-grid", "0.5:2:4"], tmp_path)
    assert code == 2 and "canonical" in capsys.readouterr().err


def test_curve_from_jet(tmp_path):
    code, text = run(["curve", "--ell", "0", "--jet", "u=-0.5"], tmp_path)
    res = json.loads(text)
    assert code == 0 and res["genus"] == 0 and res["branch_points"] == [[-0.5, 0.0]]


def test_curve_from_system(write, tmp_path):
    sysf = write("s.json", {"kind": "soliton", "rates": [1], "weights": [1]})
    code, text = run(["curve", "--ell", "1", "--constants", "c1=1", "--system", sysf, "--at", "x=0.7"], tmp_path)
    res = json.loads(text)
    assert code == 0 and res["degenerate"] and np.allclose(res["Q"], [0, 1, 2, 1], atol=1e-8)


def test_curve_argument_errors(tmp_path, capsys):
    assert run(["curve", "--ell", "1", "--jet", "u=1"], tmp_path)[0] == 2
    assert "jet" in capsys.readouterr().err
    assert run(["curve", "--ell", "1", "--constants", "k=1", "--jet", "u=1,u1=0,u2=0"], tmp_path)[0] == 2
    assert "constants.k" in capsys.readouterr().err


def test_verify_scalar_passes(write, tmp_path):
    code, text = run(["verify", "--system", write("s.json", SCALAR)], tmp_path)
    report = json.loads(text)
    assert code == 0
    assert {r["check"] for r in report} == set(cli.VERIFY_CHECKS)
    assert all(r["pass"] for r in report)
    assert all(set(r) >= {"check", "value", "tolerance", "pass"} for r in report)
    assert any(r.get("seed") == cli.VERIFY_SEED for r in report)


def test_verify_failure_exit_1_with_report(write, tmp_path):
    sysf = write("s.json", SCALAR)
    code, text = run(["verify", "--system", sysf, "--tolerance", "gl_logderiv=1e-30"], tmp_path)
    report = json.loads(text)
    assert code == 1
    assert [r["pass"] for r in report if r["check"] == "gl_logderiv"] == [False]


def test_verify_unknown_tolerance(write, tmp_path, capsys):
    code, _ = run(["verify", "--system", write("s.json", SCALAR), "--tolerance", "nope=1"], tmp_path)
    assert code == 2 and "tolerance.nope" in capsys.readouterr().err


def test_deterministic_across_threads(write, tmp_path, monkeypatch):
    doc = {"kind": "rational", "poles": [{"a": [-1, 0], "r": 2}, {"a": [-2, 0], "r": 2}]}
    sysf = write("r.json", doc)
    outs = []
    for n in ("1", "4", "4"):
        monkeypatch.setenv("SPECTRAL_DET_THREADS", n)
        outs.append(run(["potential", "--system", sysf, "--x-grid", "0.2:3:9"], tmp_path)[1])
    assert outs[0] == outs[1] == outs[2]


def test_bad_thread_env(write, tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("SPECTRAL_DET_THREADS", "0")
    code, _ = run(["tau", "--system", write("s.json", SCALAR), "--x-grid", "0:1:2"], tmp_path)
    assert code == 2 and "SPECTRAL_DET_THREADS" in capsys.readouterr().err
