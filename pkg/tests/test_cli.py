import csv
import io
import json
import math
import subprocess
import sys

import pytest

from gelfand2d.cli import main, parse_run_spec, run
from gelfand2d.errors import GuardError


def _run(argv):
    spec = parse_run_spec(argv)
    out, err = io.StringIO(), io.StringIO()
    code = run(spec, out, err)
    return code, out.getvalue(), err.getvalue()


class TestParse:
    def test_happy_path(self):
        spec = parse_run_spec(["classify", "--model", "exp", "--k", "1"])
        assert spec.subcommand == "classify" and spec.k == 1.0 and spec.format == "json"

    def test_nonexistence_guard(self):
        with pytest.raises(GuardError) as exc:
            parse_run_spec(["trace", "--model", "exp", "--k", "-1"])
        assert exc.value.guard == "nonexistence" and "k = -1.0 <= 0" in str(exc.value)

    def test_exponent_guard(self):
        with pytest.raises(GuardError) as exc:
            parse_run_spec(["trace", "--model", "pow", "--k", "1", "--p", "1.5"])
        assert exc.value.guard == "exponent" and "p_s = k+1 = 2" in str(exc.value)

    def test_pow_needs_p(self):
        with pytest.raises(GuardError):
            parse_run_spec(["trace", "--model", "pow", "--k", "1"])

    def test_config_file(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("# comment\nmodel = pow\nk = 1\np = 4  # trailing\nsamples = 7\n")
        spec = parse_run_spec(["singular", "--config", str(cfg), "--samples", "9"])
        assert spec.model == "pow" and spec.p == 4.0 and spec.samples == 9

    def test_config_unknown_key(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("k = 1\ncolour = blue\n")
        with pytest.raises(GuardError) as exc:
            parse_run_spec(["exponents"], str(cfg))
        assert "colour" in str(exc.value)

    def test_config_bad_value(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("k = one\n")
        with pytest.raises(GuardError):
            parse_run_spec(["exponents"], str(cfg))


class TestCommands:
    def test_classify(self):
        code, out, _ = _run(["classify", "--model", "exp", "--k", "1"])
        assert code == 0
        assert json.loads(out)["classification"] == "TypeI"

    def test_singular_csv(self):
        code, out, _ = _run(["singular", "--model", "pow", "--k", "1", "--p", "4",
                             "--samples", "100"])
        assert code == 0
        rows = list(csv.DictReader(io.StringIO(out)))
        assert len(rows) == 100 and list(rows[0]) == ["t", "r", "U_star", "residual"]
        assert max(float(r["residual"]) for r in rows) <= 1e-8
        assert float(rows[0]["r"]) == pytest.approx(math.e, rel=1e-12) and rows[-1]["r"] == "≈0"
        _, out, _ = _run(["singular", "--k", "1", "--t-min=-40", "--samples", "11"])
        assert next(csv.DictReader(io.StringIO(out)))["r"] == "≈e"

    def test_singular_json(self):
        code, out, _ = _run(["singular", "--model", "exp", "--k", "0.2", "--format", "json"])
        d = json.loads(out)
        assert code == 0 and d["h1_member"] and d["flux_defect"] <= 1e-9

    def test_oracle(self):
        code, out, _ = _run(["oracle", "--model", "exp", "--k", "1", "--beta", "2"])
        assert code == 0
        assert json.loads(out)["max_rel_diff"] <= 1e-6

    def test_exponents(self):
        code, out, _ = _run(["exponents", "--k", "1"])
        d = json.loads(out)
        assert d["p_jl_plus"] == "inf" and d["p_jl_minus"] == pytest.approx(2.154700538379251)

    def test_exponents_csv(self):
        code, out, _ = _run(["exponents", "--k", "0.1", "--format", "csv"])
        rows = dict(csv.reader(io.StringIO(out)))
        assert float(rows["p_jl_plus"]) == pytest.approx(1.452752523165195, abs=1e-12)

    def test_trace(self):
        code, out, _ = _run(["trace", "--model", "exp", "--k", "1", "--beta-min", "0",
                             "--beta-max", "40", "--n-grid", "500"])
        rows = list(csv.DictReader(io.StringIO(out)))
        assert code == 0 and list(rows[0]) == ["beta", "lambda", "alpha", "is_turning"]
        assert sum(r["is_turning"] == "true" for r in rows) >= 6
        assert float(rows[0]["beta"]) == pytest.approx(0.0, abs=1e-12)

    def test_stability(self):
        code, out, _ = _run(["stability", "--model", "pow", "--k", "1", "--p", "4"])
        d = json.loads(out)
        assert d["morse"] == "Infinite" and all(b["Q"] < 0 for b in d["bands"])

    def test_intersections(self):
        code, out, _ = _run(["intersections", "--model", "exp", "--k", "1", "--t-min", "-40",
                             "--t-max", "0"])
        d = json.loads(out)
        assert code == 0 and d["count"] >= 8 and d["verdict"] == "intersecting"

    def test_intersections_zero(self):
        code, out, _ = _run(["intersections", "--model", "pow", "--k", "1", "--p", "2.5"])
        d = json.loads(out)
        assert code == 0 and d["zero_before_e"]["has_zero"]

    def test_intersections_csv(self):
        code, out, _ = _run(["intersections", "--model", "exp", "--k", "0.2", "--format", "csv",
                             "--samples", "50"])
        rows = list(csv.DictReader(io.StringIO(out)))
        assert len(rows) == 50 and all(float(r["diff"]) > 0 for r in rows)

    def test_deterministic(self):
        argv = ["trace", "--model", "pow", "--k", "1", "--p", "4", "--n-grid", "300"]
        assert _run(argv)[1] == _run(argv)[1]

    def test_round_trip_floats(self):
        _, out, _ = _run(["exponents", "--k", "0.1"])
        d = json.loads(out)
        assert d["p_c"] == 1.2000000000000002 or d["p_c"] == 1.2

    def test_output_file(self, tmp_path):
        path = tmp_path / "out.json"
        code, out, _ = _run(["stability", "--k", "0.2", "--output", str(path)])
        assert code == 0 and out == ""
        assert json.loads(path.read_text())["morse"] == "Zero"


class TestExitCodes:
    @pytest.mark.parametrize("argv, guard", [
        (["classify", "--model", "exp", "--k", "-0.5"], "no solution unless k > 0"),
        (["classify", "--model", "pow", "--k", "1", "--p", "1.5"], "1.5 <= p_s = k+1 = 2"),
    ])
    def test_guard_exit(self, argv, guard, capsys):
        assert main(argv) == 2
        err = capsys.readouterr().err
        assert guard in err
        rec = json.loads(err.strip().splitlines()[-1])
        assert rec["guard"] in ("nonexistence", "exponent") and rec["inequality"]

    def test_numerical_exit(self, capsys):
        code = main(["intersections", "--model", "exp", "--k", "1", "--t-min=-1e4"])
        err = capsys.readouterr().err
        assert code == 1
        assert "error" in json.loads(err.strip().splitlines()[-1])

    def test_subprocess(self):
        proc = subprocess.run([sys.executable, "-m", "gelfand2d", "classify", "--model", "exp",
                               "--k", "-0.5"], capture_output=True, text=True)
        assert proc.returncode == 2 and "nonexistence" in proc.stderr
