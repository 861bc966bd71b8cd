from __future__ import annotations

import json

import numpy as np
import pytest

from zsscatter.cli import EXIT_CONTRACT, EXIT_INPUT, EXIT_OK, main
from zsscatter.discrete import ReconstructionInput, example31_data, one_soliton_data
from zsscatter.scattering import read_csv


def _spec(tmp_path, name, obj):
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return str(path)


@pytest.fixture
def zero_file(tmp_path):
    return _spec(tmp_path, "zero.json", {"kind": "zero"})


def _reconstructed(tmp_path, data, name):
    return _spec(tmp_path, name, {"kind": "reconstructed", "params": {"data": data.to_json()}})


def test_scatter_csv_for_zero_potential(tmp_path, zero_file):
    out = tmp_path / "s.csv"
    assert main(["scatter", "--potential", zero_file, "--k", "1,2", "--format", "csv", "--out", str(out)]) == EXIT_OK
    text = out.read_text()
    assert text.startswith("# config: ")
    rows = read_csv(text)
    assert [complex(r.k) for r in rows] == [1, 2]
    for r in rows:
        assert r.a == 1 and r.b == 0 and r.a_bar == 1 and r.b_bar == 0


def test_json_output_is_deterministic(tmp_path, zero_file):
    # the output path is part of the embedded config, so reuse it
    a = tmp_path / "a.json"
    runs = []
    for _ in range(2):
        assert main(["scatter", "--potential", zero_file, "--k", "0.5:2:4", "--out", str(a)]) == EXIT_OK
        runs.append(a.read_bytes())
    assert runs[0] == runs[1]
    doc = json.loads(a.read_text())
    assert doc["command"] == "scatter"
    assert len(doc["result"]["records"]) == 4
    assert doc["config"]["contour_c"] == 1.0


def test_exit_codes(tmp_path, zero_file, capsys):
    assert main(["scatter", "--potential", zero_file, "--k", "0", "--out", str(tmp_path / "e.json")]) == EXIT_CONTRACT
    bad = _spec(tmp_path, "bad.json", {"kind": "no_such_kind"})
    assert main(["scatter", "--potential", bad, "--k", "1", "--out", str(tmp_path / "f.json")]) == EXIT_INPUT
    assert main(["scatter", "--potential", str(tmp_path / "missing.json"), "--k", "1"]) == EXIT_INPUT
    assert main(["scatter", "--potential", zero_file, "--k", "1,abc"]) == EXIT_INPUT
    # spectrum has no tabular form
    assert main(["spectrum", "--potential", zero_file, "--format", "csv"]) == EXIT_INPUT
    err = capsys.readouterr().err
    assert "ContractViolation" in err


def test_error_report_is_written_as_json(tmp_path, zero_file):
    out = tmp_path / "e.json"
    main(["scatter", "--potential", zero_file, "--k", "0", "--out", str(out)])
    rep = json.loads(out.read_text())
    assert rep["result"]["error"] == "ContractViolation"


def test_spectrum_then_reconstruct_one_soliton(tmp_path):
    pot = _reconstructed(tmp_path, one_soliton_data(), "sol.json")
    spec_out = tmp_path / "spec.json"
    code = main(["spectrum", "--potential", pot, "--contour-c", "0.5", "--region=-3,3,0.2,3",
                 "--out", str(spec_out)])
    assert code == EXIT_OK
    data = ReconstructionInput.from_json(json.loads(spec_out.read_text())["result"])
    assert len(data.upper) == 1 and len(data.lower) == 1
    assert abs(data.upper[0].location - 1j) < 1e-10

    rec_out = tmp_path / "q.csv"
    code = main(["reconstruct", "--data", str(spec_out), "--x=-2,-0.7,0.3,1.1,2.5", "--format", "csv",
                 "--out", str(rec_out)])
    assert code == EXIT_OK
    lines = [ln for ln in rec_out.read_text().splitlines() if not ln.startswith("#")]
    assert lines[0] == "x,q_re,q_im,r_re,r_im"
    vals = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    x = vals[:, 0]
    assert np.allclose(vals[:, 1], 2 / np.sinh(2 * x), rtol=1e-6)
    assert np.allclose(vals[:, 3], vals[:, 1], rtol=1e-6)
    assert np.allclose(vals[:, [2, 4]], 0, atol=1e-6)


def test_reconstruct_json_marks_poles(tmp_path):
    data = _spec(tmp_path, "d.json", one_soliton_data().to_json())
    out = tmp_path / "r.json"
    assert main(["reconstruct", "--data", data, "--x=-1,0,1", "--out", str(out)]) == EXIT_OK
    res = json.loads(out.read_text())["result"]
    assert res["samples"][1]["q"] is None
    assert res["pole_candidates"] == pytest.approx([0.0], abs=1e-9)


def test_classify_negaton(tmp_path):
    pot = _reconstructed(tmp_path, example31_data(), "neg.json")
    out = tmp_path / "c.json"
    assert main(["classify", "--potential", pot, "--k", "1", "--contour-c", "0.5", "--out", str(out)]) == EXIT_OK
    res = json.loads(out.read_text())["result"]
    assert res["reflectionless"]["reflectionless"] is True
    assert res["symmetry"] == "R_EQ_Q"
    sm = np.array([[complex(*v) for v in row] for row in res["stokes"][0]["S_minus"]])
    assert np.allclose(sm, -np.eye(2), atol=1e-7)


def test_classify_rejects_complex_k(tmp_path, zero_file):
    assert main(["classify", "--potential", zero_file, "--k", "1+1j"]) == EXIT_CONTRACT


def test_schrodinger_form_report(tmp_path):
    pot = _spec(tmp_path, "rx.json", {"kind": "rational_in_x",
                                      "params": {"num": [0, 1], "den": [1, 0, 1], "reduction": "R_EQ_Q"}})
    out = tmp_path / "sf.json"
    assert main(["schrodinger-form", "--potential", pot, "--out", str(out)]) == EXIT_OK
    res = json.loads(out.read_text())["result"]
    assert res["report"]["order_u2_at_infinity"] == 2
    assert len(res["samples"]) == 3
