import json

import numpy as np
import pytest

from jerkplan.cli import EXIT_BUDGET, EXIT_OK, EXIT_USAGE, main, read_profile
from jerkplan.instance import gen_clothoid_path, load_instance


@pytest.fixture
def exp1(tmp_path):
    f = tmp_path / "e.json"
    assert main(["gen", "exp1", "--n", "100", "--seed", "7", "--out", str(f)]) == EXIT_OK
    return f


def test_gen_exp1_has_seven_plateaus(exp1):
    u = load_instance(exp1).u[1:-1]
    assert 1 + np.count_nonzero(np.diff(u)) == 7


def test_gen_sine_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["gen", "sine", "--n", "100", "--out", str(a)]) == EXIT_OK
    assert main(["gen", "sine", "--n", "100", "--seed", "9", "--out", str(b)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()


@pytest.mark.parametrize("argv", [
    ["gen", "exp1", "--n", "3", "--out", "x.json"],
    ["gen", "bogus", "--out", "x.json"],
    ["bench", "exp1", "--sizes", ""],
    [],
])
def test_usage_errors(argv, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(argv) == EXIT_USAGE


def test_malformed_instance(tmp_path):
    f = tmp_path / "bad.json"
    f.write_text("{not json")
    assert main(["solve", str(f)]) == EXIT_USAGE


def test_solve_outputs_and_check(tmp_path):
    inst_f = tmp_path / "c.json"
    from jerkplan.instance import save_instance
    inst = gen_clothoid_path(60)
    save_instance(inst, inst_f)
    csv1, csv2, rep = tmp_path / "p1.csv", tmp_path / "p2.csv", tmp_path / "r.json"
    assert main(["solve", str(inst_f), "--csv", str(csv1), "--report", str(rep)]) == EXIT_OK
    assert main(["solve", str(inst_f), "--csv", str(csv2)]) == EXIT_OK
    assert csv1.read_bytes() == csv2.read_bytes()
    lines = csv1.read_text().split("\n")
    assert lines[0] == "s,w,v,a,jerk" and len(lines) == inst.n + 2
    w = read_profile(csv1)
    v = np.array([float(r.split(",")[2]) for r in lines[1:-1]])
    assert np.all(v <= np.sqrt(inst.u) + 1e-6)
    assert np.allclose(v, np.sqrt(w))
    report = json.loads(rep.read_text())
    assert report["version"] == 1 and report["reason"] in ("kkt", "step")
    assert main(["check", str(inst_f), str(csv1)]) == EXIT_OK


def test_check_flags_infeasible_profile(tmp_path, exp1):
    prof = tmp_path / "p.csv"
    u = load_instance(exp1).u
    rows = ["s,w,v,a,jerk"] + [f"0,{float(x)!r},0,0,0" for x in u]
    prof.write_text("\n".join(rows) + "\n")
    assert main(["check", str(exp1), str(prof)]) == EXIT_BUDGET


def test_budget_stop_exit_code(exp1):
    assert main(["solve", str(exp1), "--max-iter", "1"]) == EXIT_BUDGET


def test_modes_agree_within_one_percent(tmp_path):
    f = tmp_path / "e.json"
    main(["gen", "exp1", "--n", "40", "--seed", "3", "--out", str(f)])
    objs = []
    for flags in ([], ["--mode", "eta", "--dir", "lp"]):
        r = tmp_path / "r.json"
        assert main(["solve", str(f), "--report", str(r), *flags]) == EXIT_OK
        objs.append(json.loads(r.read_text())["objective"])
    assert abs(objs[0] - objs[1]) <= 0.01 * objs[0]


def test_bench_table(tmp_path):
    out = tmp_path / "b.json"
    assert main(["bench", "exp1", "--sizes", "20,30", "--repeats", "2", "--out", str(out)]) == EXIT_OK
    table = json.loads(out.read_text())
    assert table["version"] == 1 and [r["n"] for r in table["sizes"]] == [20, 30]
    for row in table["sizes"]:
        assert row["instances"] == 2 and row["certified"] == 2
        assert row["time"]["min"] <= row["time"]["mean"] <= row["time"]["max"]
