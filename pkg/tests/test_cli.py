import copy
import json

import mpmath
import pytest

from levelone.cli.io import InputError, emit_json, load_report, parse_input
from levelone.cli.main import example_names, example_text, main
from levelone.cli.pipeline import JobConfig, PipelineError, render_text, run_pipeline

PI = mpmath.pi
GAMMA = mpmath.euler


def example(name):
    return json.loads(example_text(name))


def value(entry):
    re, im = entry["value"]
    return mpmath.mpc(mpmath.mpf(re), mpmath.mpf(im))


def entries(lst):
    return {(e["row"], e["col"]): value(e) for e in lst}


@pytest.fixture(scope="module")
def report4():
    return run_pipeline(JobConfig(example("resonant4x4"), directions=["0", "180"], order=30))


@pytest.fixture(scope="module")
def report13():
    return run_pipeline(JobConfig(example("hypergeom13")))


class TestParsing:
    @pytest.mark.parametrize("name", ["resonant4x4", "euler", "conjugate2x2", "hypergeom13"])
    def test_bundled(self, name):
        p = parse_input(example(name))
        assert p.name == name

    def test_duplicate_block_id(self):
        d = example("resonant4x4")
        d["blocks"][1]["id"] = "1"
        with pytest.raises(InputError, match="duplicate"):
            parse_input(d)

    def test_float_rejected(self):
        d = example("resonant4x4")
        d["blocks"][1]["a"] = [1.0, "0"]
        with pytest.raises(InputError):
            parse_input(d)

    def test_json_position(self):
        with pytest.raises(InputError, match="line 2, column"):
            parse_input('{"schema_version": 1,\n "mode": }')

    def test_prepared_form_violation(self):
        d = example("resonant4x4")
        d["B"]["coeffs"][0][0][0] = ["1", "0"]  # B_0 must vanish
        with pytest.raises(InputError, match="prepared form"):
            parse_input(d)

    def test_bad_schema(self):
        d = example("euler")
        d["schema_version"] = 2
        with pytest.raises(InputError):
            parse_input(d)


class TestSystemReport:
    def test_boxed_values(self, report4):
        sec = report4["directions"][0]
        assert sec["direction_deg"] == "0"
        oracle = {
            (2, 1): (6 * PI - PI ** 3 / 6 - 4 * PI * GAMMA + PI * GAMMA ** 2) * 1j,
            (3, 1): 2 * PI * (2 - GAMMA) * 1j,
            (4, 1): 2j * PI,
        }
        for route in ("borel", "laplace"):
            got = entries(sec["stokes"][route])
            assert set(got) == set(oracle)
            assert all(abs(got[k] - v) < 1e-20 for k, v in oracle.items())
        assert float(sec["route_delta"]) < 1e-6

    def test_opposite_direction_empty(self, report4):
        sec = report4["directions"][1]
        assert sec["direction_deg"] == "180"
        assert all(entries(v) == {} for v in sec["stokes"].values())

    def test_round_trip_and_determinism(self, report4):
        text = emit_json(report4)
        assert load_report(text) == report4
        assert emit_json(load_report(text)) == text

    def test_text(self, report4):
        out = render_text(report4)
        assert "route delta" in out and "K[4,1] = 1.0" in out

    def test_direction_without_singularity(self):
        r = run_pipeline(JobConfig(example("conjugate2x2"), directions=["45"]))
        assert r["directions"][0]["omegas"] == []


class TestStructural:
    def test_d13_exact(self, report13):
        (sec,) = report13["directions"]
        labels = {a["label"] for a in sec["alien"]}
        assert labels == {"12", "12*sqrt(3)", "24"}
        d24 = next(a for a in sec["alien"] if a["label"] == "24")
        assert d24["matrix"] == [{"row": 2, "col": 8, "value": ["337/84", "51/14"]}]
        w = report13["input"]["grading"]["weights"]
        assert w["q6"] == [-1, 0, 1, 0] and w["q13"] == [0, 1, 0, -1]

    def test_symbolic_placeholders(self):
        d = example("hypergeom13")
        for o in d["stokes_overrides"]["entries"]:
            o.pop("value", None)
        r = run_pipeline(JobConfig(d))
        (sec,) = r["directions"]
        d24 = next(a for a in sec["alien"] if a["label"] == "24")
        assert d24["matrix"][0]["value"] == "-c1_8*c2_1/2 + c2_8"

    def test_deterministic(self, report13):
        again = run_pipeline(JobConfig(example("hypergeom13")))
        assert emit_json(again) == emit_json(report13)


class TestEquation:
    def test_euler(self):
        r = run_pipeline(JobConfig(example("euler"), directions=["0"], route="laplace"))
        (item,) = r["directions"][0]["singularities"]
        re, im = item["stokes"]["laplace"]["C"]
        assert abs(mpmath.mpc(mpmath.mpf(re), mpmath.mpf(im)) - 2j * PI) < 1e-20
        head = r["input"]["series_head"]
        assert [mpmath.mpf(v[0]) for v in head[:5]] == [0, 0, -1, -2, -6]


class TestMain:
    def test_examples_list(self, capsys):
        assert main(["examples", "list"]) == 0
        assert capsys.readouterr().out.split() == example_names()

    def test_examples_run(self, capsys):
        assert main(["examples", "run", "hypergeom13", "--format", "text"]) == 0
        assert "Delta_{24}(F^8)" in capsys.readouterr().out

    def test_unknown_example(self, capsys):
        assert main(["examples", "run", "nope"]) == 2
        assert "example" in capsys.readouterr().err

    def test_invalid_input_exit(self, tmp_path, capsys):
        d = example("resonant4x4")
        d["blocks"][1]["id"] = "1"
        f = tmp_path / "bad.json"
        f.write_text(json.dumps(d))
        assert main(["analyze", str(f)]) == 2
        assert "[parse]" in capsys.readouterr().err

    def test_missing_file(self, tmp_path, capsys):
        assert main(["analyze", str(tmp_path / "none.json")]) == 2

    def test_bad_order(self, capsys):
        assert main(["examples", "run", "euler", "--order", "3"]) == 2

    def test_pattern_violation_exit(self, tmp_path, capsys):
        d = example("hypergeom13")
        d = copy.deepcopy(d)
        # q8 - q2 = -24 does not lie in direction 0
        d["stokes_overrides"]["entries"].append({"name": "bad", "row": 8, "col": 2, "value": ["1", "0"]})
        f = tmp_path / "bad13.json"
        f.write_text(json.dumps(d))
        assert main(["analyze", str(f)]) == 2
        assert "Pattern" in capsys.readouterr().err

    def test_pipeline_error_codes(self):
        err = PipelineError("parse", InputError("x", "y"))
        assert err.exit_code == 2
        assert PipelineError("borel", ArithmeticError("z")).exit_code == 3
