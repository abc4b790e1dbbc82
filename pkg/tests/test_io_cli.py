import csv
import io
import json
import math

import numpy as np
import pytest

from circuits import DATA, VIOLATING
from mnadec import cli
from mnadec.io import matrix_market_text, read_matrix, write_matrix
from mnadec.graph import SignMatrix

BUCK = str(DATA / "buck.net")


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


class TestMatrixMarket:
    def test_round_trip_with_labels(self, tmp_path):
        m = SignMatrix.from_dense([[1, 0, -1], [0, 1, 0]], ("a", "b"), ("x", "y", "z"))
        path = write_matrix(tmp_path / "m.mtx", m)
        dense, rows, cols = read_matrix(path)
        assert np.array_equal(dense, m.to_dense())
        assert rows == ("a", "b") and cols == ("x", "y", "z")

    def test_empty(self, tmp_path):
        path = write_matrix(tmp_path / "e.mtx", SignMatrix.empty(3, 0))
        dense, rows, cols = read_matrix(path)
        assert dense.shape == (3, 0) and cols == ()

    def test_readable_by_scipy(self):
        import scipy.io as sio

        text = matrix_market_text(np.array([[0, 1], [-1, 0]]))
        assert text.startswith("%%MatrixMarket matrix coordinate integer general")
        assert np.array_equal(sio.mmread(io.StringIO(text)).toarray(), [[0, 1], [-1, 0]])


class TestCheck:
    def test_buck(self, capsys, tmp_path):
        code, out, _ = run(["check", BUCK, "--json", str(tmp_path / "r.json")], capsys)
        assert code == 0
        doc = json.loads((tmp_path / "r.json").read_text())
        assert doc["passed"] and doc["ic_types"] == {}

    def test_json_to_stdout(self, capsys):
        code, out, _ = run(["check", str(DATA / "mosfet_model.net"), "--json"], capsys)
        assert code == 0
        doc = json.loads(out[:out.rindex("}") + 1])
        assert doc["ic_types"] == {"GMOS": 2}

    def test_cvloop(self, capsys):
        code, out, _ = run(["check", str(DATA / "cvloop.net")], capsys)
        assert code == 1 and out.startswith("CS1:")

    @pytest.mark.parametrize("code_expected, text", VIOLATING[:4] + VIOLATING[-2:])
    def test_violations(self, code_expected, text, tmp_path, capsys):
        path = tmp_path / "bad.net"
        path.write_text(text)
        code, _, _ = run(["check", str(path), "--json", str(tmp_path / "r.json")], capsys)
        assert code == 1
        doc = json.loads((tmp_path / "r.json").read_text())
        assert [v["code"] for v in doc["violations"]] == [code_expected]

    @pytest.mark.parametrize("text", ["V1 1 0 DC 1\nR1 1 1 1\n", "V1 1 0 DC\n", "X1 1 0 1\n"])
    def test_malformed(self, text, tmp_path, capsys):
        path = tmp_path / "bad.net"
        path.write_text(text)
        code, _, err = run(["check", str(path)], capsys)
        assert code == 2 and err.startswith("error:")

    def test_missing_file(self, capsys, tmp_path):
        assert run(["check", str(tmp_path / "nope.net")], capsys)[0] == 2


class TestDecouple:
    def test_buck_golden_files(self, tmp_path, capsys):
        code, _, _ = run(["decouple", BUCK, "--order", "paper-example", "--outdir",
                          str(tmp_path)], capsys)
        assert code == 0
        q, rows, cols = read_matrix(tmp_path / "Q_Vs.mtx")
        assert np.array_equal(q, [[0, 0], [1, 0], [0, 1]])
        assert rows == ("1", "2", "3")
        a, _, cols = read_matrix(tmp_path / "A.mtx")
        assert cols == ("C", "L", "RS", "RD", "R", "Vs")
        system = json.loads((tmp_path / "system.json").read_text())
        assert system["sizes"] == {"x": 2, "y": 2, "z": 1}
        assert system["matrices"]["W_L"] == "W_L.mtx"
        part = json.loads((tmp_path / "partition.json").read_text())
        assert [e["name"] for e in part["x"]] == ["phi[3]", "i[L]"]

    def test_no_inductors(self, tmp_path, capsys):
        code, _, _ = run(["decouple", str(DATA / "rc.net"), "--outdir", str(tmp_path)], capsys)
        assert code == 0
        assert read_matrix(tmp_path / "W_L.mtx")[0].shape == (0, 0)
        assert read_matrix(tmp_path / "V_L.mtx")[0].shape == (0, 0)

    def test_smps_entries_are_signs(self, tmp_path, capsys):
        code, _, _ = run(["decouple", str(DATA / "smps.net"), "--outdir", str(tmp_path)], capsys)
        assert code == 0
        files = sorted(tmp_path.glob("*.mtx"))
        assert len(files) == 14
        for f in files:
            m = read_matrix(f)[0]
            assert np.all(np.isin(m, (-1, 0, 1))), f.name
        assert np.any(read_matrix(tmp_path / "A.mtx")[0])

    def test_deterministic(self, tmp_path, capsys):
        for d in ("a", "b"):
            run(["decouple", str(DATA / "mosfet_buck.net"), "--outdir", str(tmp_path / d)], capsys)
        for f in sorted((tmp_path / "a").iterdir()):
            assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes(), f.name

    def test_violation_exit(self, tmp_path, capsys):
        code, _, err = run(["decouple", str(DATA / "cvloop.net"), "--outdir", str(tmp_path)],
                           capsys)
        assert code == 1 and "CS1" in err


class TestInit:
    def test_buck(self, tmp_path, capsys):
        out = tmp_path / "ic.json"
        code, stdout, _ = run(["init", BUCK, "--out", str(out)], capsys)
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["mna_residual_inf"] < 1e-10
        assert doc["y"]["phi[1]"] == 5.0
        assert float(stdout.split(":")[1]) < 1e-10

    def test_zero_sources(self, tmp_path, capsys):
        path = tmp_path / "z.net"
        path.write_text("V1 1 0 DC 0\nR1 1 2 1\nC1 2 0 1\n")
        code, stdout, _ = run(["init", str(path)], capsys)
        assert code == 0
        doc = json.loads(stdout)
        assert all(v == 0 for part in ("x", "y", "z") for v in doc[part].values())

    def test_x0_inline_and_file(self, tmp_path, capsys):
        code, stdout, _ = run(["init", str(DATA / "rc.net"), "--x0", "0.25"], capsys)
        assert code == 0 and json.loads(stdout)["x"] == {"phi[2]": 0.25}
        f = tmp_path / "x0.csv"
        f.write_text("phi[3],i[L]\n1.5,0.25\n")
        code, stdout, _ = run(["init", BUCK, "--x0", str(f)], capsys)
        assert code == 0 and json.loads(stdout)["x"] == {"phi[3]": 1.5, "i[L]": 0.25}

    def test_x0_wrong_size(self, capsys):
        assert run(["init", BUCK, "--x0", "1,2,3"], capsys)[0] == 2

    def test_forced_divergence(self, capsys):
        code, _, err = run(["init", BUCK, "--x0", "0,5", "--max-iter", "1"], capsys)
        assert code == 3
        assert "last iterate: [" in err


class TestSimulate:
    def test_rc_csv(self, tmp_path, capsys):
        out = tmp_path / "rc.csv"
        code, _, _ = run(["simulate", str(DATA / "rc.net"), "--t-end", "1", "--h", "1e-3",
                          "--out", str(out)], capsys)
        assert code == 0
        rows = list(csv.DictReader(out.read_text().splitlines()))
        assert len(rows) == 1001
        last = rows[-1]
        assert float(last["t"]) == pytest.approx(1.0)
        assert abs(float(last["phi[2]"]) - (1 - math.exp(-1))) < 2e-3

    def test_steady(self, tmp_path, capsys):
        path = tmp_path / "z.net"
        path.write_text("V1 1 0 DC 0\nR1 1 2 1\nC1 2 0 1\nL1 2 0 1\n")
        code, stdout, _ = run(["simulate", str(path), "--t-end", "0.1", "--h", "0.01",
                               "--format", "json"], capsys)
        assert code == 0
        doc = json.loads(stdout[:stdout.rindex("}") + 1])
        assert all(not any(v) for v in doc["x"] + doc["y"] + doc["z"])

    def test_buck_residual_column(self, tmp_path, capsys):
        out = tmp_path / "buck.csv"
        code, _, _ = run(["simulate", BUCK, "--t-end", "1e-3", "--h", "1e-6", "--out", str(out)],
                         capsys)
        assert code == 0
        rows = list(csv.DictReader(out.read_text().splitlines()))
        assert max(float(r["mna_residual"]) for r in rows) < 1e-8

    def test_byte_identical(self, tmp_path, capsys):
        for name in ("a.csv", "b.csv"):
            run(["simulate", str(DATA / "opamp.net"), "--t-end", "1e-5", "--h", "1e-7",
                 "--integrator", "trapezoidal", "--out", str(tmp_path / name)], capsys)
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_divergence_writes_partial(self, tmp_path, capsys):
        out = tmp_path / "p.csv"
        code, _, err = run(["simulate", str(DATA / "mosfet_buck.net"), "--t-end", "1e-3",
                            "--h", "1e-4", "--max-iter", "2", "--out", str(out)], capsys)
        if code == 0:
            pytest.fail("expected the coarse step to diverge")
        assert code == 3
        assert out.exists() and len(out.read_text().splitlines()) >= 2

    def test_requires_step(self, capsys):
        with pytest.raises(SystemExit):
            cli.main(["simulate", BUCK, "--t-end", "1"])
