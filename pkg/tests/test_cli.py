import json

import pytest

from qselberg import cli, interp
from qselberg.qcore import Params

P2 = ["--q", "0.3", "--t", "0.85+0.1j", "--qalpha", "0.5", "--a1", "2.3", "--a2", "2.6+0.3j",
      "--b1", "2.4-0.2j", "--b2", "2.7"]


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_eval_matches_library(capsys):
    code, out, _ = run(capsys, "eval", "--poly", "matsuo[1](a1,b2)", "--z", "0.3,0.5+0.1j", *P2)
    assert code == 0
    doc = json.loads(out)
    p = Params.from_json(doc["params"])
    want = interp.eval_poly(interp.parse_polyspec("matsuo[1](a1,b2)"), p, (0.3, 0.5 + 0.1j))
    assert complex(*doc["value"]) == pytest.approx(want, rel=1e-14)


def test_parse_errors(capsys):
    assert run(capsys, "eval", "--poly", "nonsense[", "--z", "0.3", *P2)[0] == 2
    assert run(capsys, "eval", "--poly", "matsuo[0](a1,b2)", "--z", "0.3,zz", *P2)[0] == 2
    assert run(capsys, "integral", "--n", "1", "--gauge", "other")[0] == 2
    assert run(capsys, "eval", "--poly", "matsuo[0](a1,b2)", "--z", "0.3", "--q", "0.3")[0] == 2
    with pytest.raises(SystemExit) as e:
        cli.main(["verify", "--suite", "everything"])
    assert e.value.code == 2


def test_coincident_points(capsys):
    assert run(capsys, "eval", "--poly", "matsuo[0](a1,b2)", "--z", "0.4,0.4", *P2)[0] == 3


def test_non_generic_reports_verdict(capsys):
    argv = [a if a != "2.6+0.3j" else "2.3" for a in P2]
    code, _, err = run(capsys, "matrix", "R", "--n", "2", *argv)
    assert code == 4
    verdict = json.loads(err.strip().splitlines()[-1])
    assert "genericity" in verdict


def test_convergence_failures(capsys):
    assert run(capsys, "integral", "--n", "1", *[a if a != "0.5" else "0.001" for a in P2])[0] == 5
    assert run(capsys, "integral", "--n", "1", "--N", "2", "--tail-tol", "1e-30", *P2)[0] == 5


def test_pole_hit(capsys):
    assert run(capsys, "integral", "--n", "1", "--xi", "2.3", *P2)[0] == 6


def test_matrix_check(capsys):
    code, out, _ = run(capsys, "matrix", "R", "--n", "3", "--check", *P2)
    doc = json.loads(out)
    assert code == 0 and doc["check"]["pass"] and doc["check"]["residual"] < 1e-10


def test_classical_matrix(capsys):
    code, out, _ = run(capsys, "matrix", "M", "--n", "4", "--classical", "0.3,0.7,1.2,0.4,2.5", "--check")
    assert code == 0 and json.loads(out)["check"]["pass"]


def test_integral_gauge_and_config_override(tmp_path, capsys):
    code, out, _ = run(capsys, "integral", "--n", "1", *P2)
    first = json.loads(out)
    assert code == 0 and first["gauge"] == cli.GAUGE
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"params": first["params"], "xi": first["xi"], "N": 30}))
    _, out, _ = run(capsys, "integral", "--config", str(cfg))
    from_file = json.loads(out)
    assert from_file["N"] == 30 and from_file["params"] == first["params"]
    assert complex(*from_file["value"]) == pytest.approx(complex(*first["value"]), rel=1e-8)
    _, out, _ = run(capsys, "integral", "--config", str(cfg), "--N", "50")
    assert json.loads(out)["N"] == 50


def test_verify_writes_report(tmp_path, capsys):
    path = tmp_path / "r.json"
    code, out, err = run(capsys, "verify", "--suite", "none", "--out", str(path))
    assert code == 0 and json.loads(out)["reports"] == []
    assert json.loads(path.read_text()) == json.loads(out)
    code, out, _ = run(capsys, "verify", "--suite", "classical", "--deterministic")
    doc = json.loads(out)
    assert code == 0 and doc["summary"]["failed"] == 0
    assert all(r["runtime_ms"] == 0 for r in doc["reports"])


def test_matrix_A_udl_factors(capsys):
    code, out, _ = run(capsys, "matrix", "A", "--n", "2", "--order", "udl", *P2)
    doc = json.loads(out)
    assert code == 0 and doc["order"] == "UDL"
    assert {"upper", "diag", "lower", "product"} <= set(doc)
