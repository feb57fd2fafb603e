import json
import subprocess
import sys

import pytest

from gtssm.cli import run
from gtssm.tasks import read_dataset


def out_json(capsys):
    return json.loads(capsys.readouterr().out)


class TestGroupInfo:
    def test_s3(self, capsys):
        assert run(["group-info", "symmetric:3", "--format", "json"]) == 0
        doc = out_json(capsys)
        assert doc["order"] == 6 and doc["solvable"] and doc["derived_length"] == 2
        assert doc["series"] == [6, 3, 1]

    def test_a5(self, capsys):
        assert run(["group-info", "alternating:5", "--format", "json"]) == 3
        captured = capsys.readouterr()
        assert json.loads(captured.out)["derived_length"] == "not solvable"
        assert "not solvable" in captured.err

    def test_table(self, capsys):
        assert run(["group-info", "cyclic:6"]) == 0
        assert "invariant_factors" in capsys.readouterr().out

    def test_bad_spec(self, capsys):
        assert run(["group-info", "dihedral:4"]) == 2
        assert "usage" in capsys.readouterr().err


class TestPipeline:
    def test_parity(self, tmp_path, capsys):
        path = tmp_path / "c2.json"
        assert run(["synthesize", "cyclic:2", "--out", str(path)]) == 0
        capsys.readouterr()
        assert run(["verify", "--model", str(path), "--exhaustive", "10"]) == 0
        doc = out_json(capsys)
        assert doc["verdict"] == "pass" and doc["sequences_checked"] == 2 ** 11 - 2

    def test_random_table(self, tmp_path, capsys):
        path = tmp_path / "s3.json"
        assert run(["synthesize", "symmetric:3", "--out", str(path)]) == 0
        capsys.readouterr()
        assert run(["verify", "--model", str(path), "--random", "20", "--len", "50",
                    "--format", "table"]) == 0
        assert "verdict            pass" in capsys.readouterr().out

    def test_failing_model(self, tmp_path, capsys):
        path = tmp_path / "c2.json"
        run(["synthesize", "cyclic:2", "--out", str(path)])
        doc = json.loads(path.read_text())
        doc["layers"][0]["lambda"]["0:1"] = [[1.0, 0.0]]
        path.write_text(json.dumps(doc))
        capsys.readouterr()
        assert run(["verify", "--model", str(path), "--exhaustive", "3"]) == 1
        report = out_json(capsys)
        assert report["first_counterexample"]["sequence"] == [1]

    def test_synthesize_a5(self, tmp_path, capsys):
        assert run(["synthesize", "alternating:5", "--out", str(tmp_path / "a5.json")]) == 3

    def test_random_needs_len(self, tmp_path, capsys):
        path = tmp_path / "c2.json"
        run(["synthesize", "cyclic:2", "--out", str(path)])
        assert run(["verify", "--model", str(path), "--random", "5"]) == 2

    def test_precision_env(self, tmp_path, capsys, monkeypatch):
        path = tmp_path / "c6.json"
        monkeypatch.setenv("GTSSM_PRECISION_DIGITS", "8")
        assert run(["synthesize", "cyclic:6", "--out", str(path)]) == 0
        assert json.loads(path.read_text())["precision"]["round_digits"] == 8
        monkeypatch.setenv("GTSSM_PRECISION_DIGITS", "99")
        assert run(["synthesize", "cyclic:6", "--out", str(path)]) == 2


class TestOther:
    def test_classify(self, capsys):
        assert run(["classify", "--lambda=-1,0", "--b", "2,0", "--format", "json"]) == 0
        doc = out_json(capsys)
        assert doc["class"] == "neutral_rotation" and doc["center"] == [1.0, 0.0]

    def test_classify_translation(self, capsys):
        assert run(["classify", "--lambda", "1,0", "--b", "0,1", "--format", "json"]) == 0
        assert out_json(capsys)["center"] is None

    def test_classify_bad_number(self, capsys):
        assert run(["classify", "--lambda", "x"]) == 2

    def test_gen_data(self, tmp_path, capsys):
        path = tmp_path / "d.jsonl"
        assert run(["gen-data", "--group", "cyclic:60", "--count", "5", "--len", "7",
                    "--seed", "1", "--out", str(path)]) == 0
        header, recs = read_dataset(path)
        assert header.group == "cyclic:60" and len(recs) == 5

    def test_s3_demo(self, capsys):
        assert run(["s3-demo", "--format", "json"]) == 0
        doc = out_json(capsys)
        assert len(doc["cayley"]) == 6 and len(doc["states"]) == 6
        assert len(doc["differs_from_published"]) == 6

    def test_s3_demo_table(self, capsys):
        assert run(["s3-demo"]) == 0
        assert "(132)" in capsys.readouterr().out

    def test_divergence(self, capsys):
        assert run(["divergence-demo", "--lambda1=-0.5,0.8660254037844386", "--c1", "0",
                    "--lambda2=-0.5,0.8660254037844386", "--c2", "1", "--format", "json"]) == 0
        doc = out_json(capsys)
        assert (doc["alpha1"], doc["alpha2"]) == (1, 2)
        assert doc["relative_error"] <= 1e-6
        assert doc["projected_crossing_step"] > 0

    def test_no_subcommand(self, capsys):
        assert run([]) == 2

    def test_help(self, capsys):
        assert run(["--help"]) == 0


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "gtssm", "group-info", "alternating:5"],
                          capture_output=True, text=True)
    assert proc.returncode == 3
