import json

import pytest

from shallowsep.cli import main
from shallowsep.core import ExactDist
from shallowsep.distributions import dhard_exact
from shallowsep.localfn import LocalFunction
from shallowsep.qsim import QCircuit


def run_json(capsys, *argv):
    code = main([*argv, "--json"])
    out = capsys.readouterr().out
    return code, json.loads(out)


def test_verify_quantum(capsys):
    code, rep = run_json(capsys, "verify-quantum", "--tree", "edge")
    assert code == 0 and rep["result"]["tv"] == "0/2^0" and rep["result"]["depth"] == 5
    assert rep["seed"] == 0 and rep["version"] and rep["config"]["tree"] == "edge"
    code, rep = run_json(capsys, "verify-quantum", "--tree", "path:3", "--fault", "gate:path:3:4:0")
    assert code == 1 and rep["result"]["tv"] != "0/2^0"


def test_verify_quantum_emit_circuit(tmp_path, capsys):
    path = tmp_path / "c.json"
    assert main(["verify-quantum", "--tree", "comb:2", "--emit-circuit", str(path)]) == 0
    capsys.readouterr()
    c = QCircuit.from_json(path.read_text())
    assert c.depth == 5 and c.qubit_count == 19 and c.layout is not None


def test_verify_classical(capsys, tmp_path):
    code, rep = run_json(capsys, "verify-classical", "--name", "upper2", "--n", "3")
    assert code == 0 and rep["result"]["locality"] == 6 and rep["result"]["tv"] == "0/2^0"
    code, rep = run_json(capsys, "verify-classical", "--name", "reduction", "--tree", "edge")
    assert code == 0 and rep["result"]["K"] == 1
    code, rep = run_json(capsys, "verify-classical", "--name", "remark", "--n", "4", "--C", "2")
    assert code == 0 and rep["result"]["locality"] <= 8
    fpath = tmp_path / "f.json"
    code, _ = run_json(capsys, "verify-classical", "--name", "upper", "--n", "1", "--fault", "table:0:0", "--emit-function", str(fpath))
    assert code == 1
    f = LocalFunction.from_json(fpath.read_text())
    code, rep = run_json(capsys, "eliminate", "--function", str(fpath))
    assert code == 0 and rep["result"]["verified"]
    code, rep = run_json(capsys, "eliminate", "--function", str(fpath), "--mode", "neighborhood")
    assert code == 0 and rep["result"]["r"] >= 1
    assert f.output_count == 2


def test_exact_and_tv(capsys, tmp_path):
    code, rep = run_json(capsys, "exact", "--n", "2", "--m", "2")
    assert code == 0
    d = ExactDist.from_json_obj(rep["result"]["dist"])
    assert d == dhard_exact(2, 2)
    p = tmp_path / "p.json"
    q = tmp_path / "q.json"
    p.write_text(d.to_json())
    q.write_text(ExactDist.uniform(4).to_json())
    code, rep = run_json(capsys, "tv", "--p", str(p), "--q", str(q))
    assert code == 0 and rep["result"]["tv"] == "7/2^4"  # x=00 puts 9/32 on two cells: 2*(9/32-1/16)


def test_sample_is_deterministic(capsys):
    a = run_json(capsys, "sample", "--n", "2", "--m", "3", "--seed", "7", "--count", "20")[1]
    b = run_json(capsys, "sample", "--n", "2", "--m", "3", "--seed", "7", "--count", "20")[1]
    c = run_json(capsys, "sample", "--n", "2", "--m", "3", "--seed", "8", "--count", "20")[1]
    assert a == b and a["result"]["samples"] != c["result"]["samples"]
    assert a["seed"] == 7
    code, rep = run_json(capsys, "sample", "--target", "dhost", "--tree", "path:3", "--count", "4")
    assert code == 0 and all(len(s) == 8 for s in rep["result"]["samples"])


def test_identical_config_identical_bytes(capsys):
    main(["potential", "--n", "3", "--m", "2", "--json"])
    first = capsys.readouterr().out
    main(["potential", "--n", "3", "--m", "2", "--json"])
    assert capsys.readouterr().out == first


def test_analysis_commands(capsys):
    code, rep = run_json(capsys, "potential", "--n", "4", "--m", "2")
    assert code == 0 and rep["result"]["re"] == "17/2^5"
    code, rep = run_json(capsys, "adversary", "--d", "1", "--expect", "3/28")
    assert code == 0 and rep["result"]["recheck"] == "3/28"
    code, _ = run_json(capsys, "adversary", "--d", "1", "--expect", "1/8")
    assert code == 1
    code, rep = run_json(capsys, "directprod", "--k", "3")
    assert code == 0 and len(rep["result"]["rows"]) == 3


def test_config_errors(capsys):
    assert main(["verify-quantum", "--tree", "nonsense"]) == 2
    assert main(["exact", "--target", "dhost", "--tree", "comb:3", "--budget", "10"]) == 2
    assert main(["report", "--checks", "nope"]) == 2
    assert main(["report", "--fault", "table:9:0", "--checks", "potential"]) == 2
    assert main(["verify-classical", "--name", "remark", "--n", "3"]) == 2
    capsys.readouterr()


def test_report(capsys, tmp_path):
    out = tmp_path / "r.json"
    code = main(["report", "--checks", "potential,decay,php", "--out", str(out)])
    assert code == 0
    rep = json.loads(out.read_text())
    assert [c["name"] for c in rep["result"]["checks"]] == ["potential", "decay", "php"]
    assert set(rep) == {"command", "config", "seed", "version", "ok", "result"}
    assert "PASS" in capsys.readouterr().out
