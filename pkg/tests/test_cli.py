import json

import numpy as np
import pytest

import dualmod.core as core
from dualmod.cli import main
from dualmod.core import DualNumber, basis_vector, sharp_action, vector
from dualmod.diff import DualFunc, coord, re_part
from dualmod.linalg import ModuleMap
from dualmod.manifold import ProjectiveAtlas
from dualmod.symplectic import standard_form


def write_json(path, data):
    path.write_text(json.dumps(data))
    return str(path)


def run(capsys, argv):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


class TestSelftest:
    def test_passes_clean(self, capsys):
        code, out, _ = run(capsys, ["selftest", "--samples", "20"])
        assert code == 0
        report = json.loads(out)
        assert report["passed"] is True
        assert report["command"] == "selftest"
        assert report["version"]
        assert len(report["checks"]) >= 15
        assert report["samples"] == 20 and report["seed"] == 0

    def test_deterministic_output(self, capsys):
        code1, out1, _ = run(capsys, ["selftest", "--samples", "15", "--seed", "3"])
        code2, out2, _ = run(capsys, ["selftest", "--samples", "15", "--seed", "3"])
        assert code1 == code2 == 0
        assert out1 == out2

    def test_corrupted_install_detected(self, capsys, monkeypatch):
        orig = core.mul

        def broken(a, b):
            r = orig(a, b)
            return DualNumber(r.re, r.ze + 1e-6)

        monkeypatch.setattr(core, "mul", broken)
        code, out, _ = run(capsys, ["selftest", "--samples", "20"])
        assert code == 1
        report = json.loads(out)
        assert report["passed"] is False
        failing = [c["name"] for c in report["checks"] if not c["passed"]]
        assert "core.ring_laws" in failing

    def test_text_format(self, capsys):
        code, out, _ = run(capsys, ["selftest", "--samples", "10", "--format", "text"])
        assert code == 0
        assert "PASS core.ring_laws" in out
        assert "selftest: PASS" in out

    def test_single_sample_passes(self, capsys):
        code, out, _ = run(capsys, ["selftest", "--samples", "1"])
        assert code == 0
        assert json.loads(out)["passed"] is True

    def test_zero_samples_rejected(self, capsys):
        code, _, err = run(capsys, ["selftest", "--samples", "0"])
        assert code == 2
        assert "--samples" in err

    def test_nonpositive_tolerance_rejected(self, capsys):
        for flag in ("--tol=-1e-9", "--tol=0"):
            code, _, err = run(capsys, ["selftest", flag])
            assert code == 2
            assert "tolerance" in err


class TestBasis:
    def test_reduces_generators(self, tmp_path, capsys):
        e = basis_vector(2, 1, 0)
        doc = {"generators": [e.to_json(), sharp_action(e).to_json()]}
        path = write_json(tmp_path / "gens.json", doc)
        code, out, _ = run(capsys, ["basis", "--input", path])
        assert code == 0
        report = json.loads(out)
        assert report["dims"] == [1, 0]
        assert len(report["S1"]) == 1 and report["S2"] == []

    def test_missing_input_flag(self, capsys):
        code, _, err = run(capsys, ["basis"])
        assert code == 2
        assert "requires --input" in err

    def test_bad_json_diagnoses_line(self, tmp_path, capsys):
        path = tmp_path / "broken.json"
        path.write_text('{"generators": [\n  nope\n]}')
        code, _, err = run(capsys, ["basis", "--input", str(path)])
        assert code == 2
        assert "line 2" in err

    def test_missing_file(self, tmp_path, capsys):
        code, _, err = run(capsys, ["basis", "--input", str(tmp_path / "nope.json")])
        assert code == 2
        assert "cannot read" in err

    def test_mixed_shapes_rejected(self, tmp_path, capsys):
        doc = {
            "generators": [
                basis_vector(2, 1, 0).to_json(),
                basis_vector(1, 1, 0).to_json(),
            ]
        }
        path = write_json(tmp_path / "gens.json", doc)
        code, _, err = run(capsys, ["basis", "--input", path])
        assert code == 2
        assert "shape" in err


class TestSolve:
    def test_solves_scalar_equation(self, tmp_path, capsys):
        lam = ModuleMap.scalar(1, 1, DualNumber(2.0, 1.0))
        rhs = vector([DualNumber(4.0, 0.0)], [6.0])
        path = write_json(
            tmp_path / "eq.json", {"map": lam.to_json(), "rhs": rhs.to_json()}
        )
        code, out, _ = run(capsys, ["solve", "--input", path])
        assert code == 0
        report = json.loads(out)
        assert report["solvable"] is True
        assert report["residual"] <= 1e-9
        sol = core.DualVector.from_json(report["solution"])
        assert sol.head[0].re == pytest.approx(2.0)
        assert sol.head[0].ze == pytest.approx(-1.0)
        assert sol.tail[0] == pytest.approx(3.0)

    def test_unsolvable_exits_one(self, tmp_path, capsys):
        lam = ModuleMap.sharp_map(1, 0)
        rhs = vector([DualNumber(1.0, 0.0)], [])
        path = write_json(
            tmp_path / "eq.json", {"map": lam.to_json(), "rhs": rhs.to_json()}
        )
        code, out, _ = run(capsys, ["solve", "--input", path])
        assert code == 1
        report = json.loads(out)
        assert report["solvable"] is False
        assert "residual" in report["error"]

    def test_missing_fields(self, tmp_path, capsys):
        path = write_json(tmp_path / "eq.json", {"map": {}})
        code, _, err = run(capsys, ["solve", "--input", path])
        assert code == 2


class TestDiffcheck:
    def test_square_function_passes(self, tmp_path, capsys):
        x = coord("head", 0)
        func = DualFunc((1, 0), (1, 0), (x * x,))
        path = write_json(tmp_path / "f.json", {"function": func.to_json()})
        code, out, _ = run(
            capsys, ["diffcheck", "--input", path, "--samples", "10"]
        )
        assert code == 0
        report = json.loads(out)
        assert report["all_passed"] is True
        assert report["checked"] == 10
        assert report["points_supplied"] is False

    def test_projection_fails(self, tmp_path, capsys):
        func = DualFunc((1, 0), (1, 0), (re_part(coord("head", 0)),))
        doc = {
            "function": func.to_json(),
            "points": [vector([DualNumber(0.4, 0.8)], []).to_json()],
        }
        path = write_json(tmp_path / "f.json", doc)
        code, out, _ = run(capsys, ["diffcheck", "--input", path])
        assert code == 1
        report = json.loads(out)
        assert report["all_passed"] is False
        assert report["entries"][0]["passed"] is False
        assert report["entries"][0]["residuals"]["ze_match"] > 0.5

    def test_tolerance_from_environment(self, tmp_path, capsys, monkeypatch):
        x = coord("head", 0)
        func = DualFunc((1, 0), (1, 0), (x * x,))
        path = write_json(tmp_path / "f.json", {"function": func.to_json()})
        monkeypatch.setenv("DUALMOD_TOL", "0.25")
        code, out, _ = run(
            capsys, ["diffcheck", "--input", path, "--samples", "5"]
        )
        assert code == 0
        assert json.loads(out)["tolerance"] == 0.25

    def test_flag_beats_environment(self, tmp_path, capsys, monkeypatch):
        x = coord("head", 0)
        func = DualFunc((1, 0), (1, 0), (x * x,))
        path = write_json(tmp_path / "f.json", {"function": func.to_json()})
        monkeypatch.setenv("DUALMOD_TOL", "0.25")
        code, out, _ = run(
            capsys,
            ["diffcheck", "--input", path, "--samples", "5", "--tol", "1e-3"],
        )
        assert code == 0
        assert json.loads(out)["tolerance"] == 1e-3

    def test_bad_environment_tolerance(self, tmp_path, capsys, monkeypatch):
        x = coord("head", 0)
        func = DualFunc((1, 0), (1, 0), (x * x,))
        path = write_json(tmp_path / "f.json", {"function": func.to_json()})
        monkeypatch.setenv("DUALMOD_TOL", "lots")
        code, _, err = run(capsys, ["diffcheck", "--input", path])
        assert code == 2
        assert "DUALMOD_TOL" in err


class TestAtlas:
    def test_standard_atlas_passes(self, tmp_path, capsys):
        path = write_json(tmp_path / "atlas.json", ProjectiveAtlas(1, 0).to_json())
        code, out, _ = run(
            capsys, ["atlas", "--input", path, "--samples", "10"]
        )
        assert code == 0
        report = json.loads(out)
        assert report["passed"] is True
        assert {e["axiom"] for e in report["entries"]} == {"ii", "iii", "iv"}

    def test_bad_atlas_rejected(self, tmp_path, capsys):
        path = write_json(tmp_path / "atlas.json", {"wrong": True})
        code, _, err = run(capsys, ["atlas", "--input", path])
        assert code == 2


class TestDarboux:
    def test_standard_form_round_trip(self, tmp_path, capsys):
        path = write_json(tmp_path / "form.json", standard_form(1, 1).to_json())
        code, out, _ = run(capsys, ["darboux", "--input", path])
        assert code == 0
        report = json.loads(out)
        assert report["verification"]["passed"] is True
        assert len(report["basis"]["pairs_head"]) == 1
        assert len(report["basis"]["pairs_tail"]) == 1

    def test_degenerate_form_exits_one(self, tmp_path, capsys):
        form = standard_form(1, 1)
        doc = form.to_json()
        size = 4
        # kill the head pairing: every re entry becomes zero
        doc["G"] = [
            [[0.0, form.g_ze[a][b]] for b in range(size)] for a in range(size)
        ]
        path = write_json(tmp_path / "form.json", doc)
        code, out, _ = run(capsys, ["darboux", "--input", path])
        assert code == 1
        report = json.loads(out)
        failed = [
            c["name"] for c in report["form_report"]["checks"] if not c["passed"]
        ]
        assert "head_block_nondegenerate" in failed

    def test_malformed_form_exits_two(self, tmp_path, capsys):
        path = write_json(tmp_path / "form.json", {"N": 2, "M": 0})
        code, _, err = run(capsys, ["darboux", "--input", path])
        assert code == 2


class TestOutputHandling:
    def test_output_file_matches_stdout(self, tmp_path, capsys):
        out_path = tmp_path / "report.json"
        code = main(["selftest", "--samples", "10", "--output", str(out_path)])
        assert code == 0
        captured = capsys.readouterr()
        assert captured.out == ""
        written = out_path.read_text()
        code2, stdout, _ = run(capsys, ["selftest", "--samples", "10"])
        assert code2 == 0
        assert written == stdout

    def test_report_is_sorted_json(self, capsys):
        _, out, _ = run(capsys, ["selftest", "--samples", "5"])
        report = json.loads(out)
        assert list(report.keys()) == sorted(report.keys())

    def test_unknown_command_exits_two(self, capsys):
        with pytest.raises(SystemExit) as info:
            main(["frobnicate"])
        assert info.value.code == 2

    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as info:
            main(["--version"])
        assert info.value.code == 0
        assert "dualmod" in capsys.readouterr().out
