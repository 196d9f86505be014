from __future__ import annotations

import json

import pytest

from prodmetric.cli import main
from prodmetric.core import Triplet1D
from prodmetric.spaces import FiniteSemimetricSpace, space_from_triplet


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture
def space_126(tmp_path):
    path = tmp_path / "three_point_126.json"
    space_from_triplet(Triplet1D(1, 2, 6)).save(path)
    return str(path)


@pytest.fixture
def problem_file(tmp_path):
    path = tmp_path / "problem.json"
    path.write_text(
        json.dumps(
            {
                "alternatives": ["a", "b"],
                "criteria": ["x", "y"],
                "matrix": [[3, 1], [1, 1]],
                "weights": [0.5, 0.5],
                "directions": ["benefit", "benefit"],
            }
        )
    )
    return str(path)


def test_falsify_mean_witness(capsys):
    code, out, _ = run(capsys, "falsify", "--combiner", "builtin:mean", "--source", "B:2,B:2", "--target", "M")
    assert code == 0
    assert out.startswith("Refuted")
    assert "witness ((1, 1), (2, 2), (6, 6))" in out


def test_falsify_structured(capsys):
    code, out, _ = run(
        capsys, "falsify", "--combiner", "builtin:mean", "--source", "B:2,B:2", "--target", "B:2",
        "--samples", "5000", "--format", "structured",
    )
    assert code == 0
    data = json.loads(out)
    assert data["status"] == "NoViolationFound"


def test_oracle(capsys, space_126):
    code, out, _ = run(capsys, "oracle", "--space", space_126)
    assert code == 0
    assert "k_b = 2 " in out and "k_s = 4 " in out
    code, out, _ = run(capsys, "oracle", "--space", space_126, "--format", "structured")
    data = json.loads(out)
    assert (data["k_b"], data["k_s"]) == (2.0, 4.0)


def test_classify_product_is_all_refuted(capsys):
    code, out, _ = run(
        capsys, "classify", "--combiner", "expr:x1*x2", "--arity", "2", "--samples", "2000", "--format", "structured"
    )
    assert code == 0
    data = json.loads(out)
    assert {c["status"] for c in data["classes"]} == {"Refuted"}
    assert {tuple(c["witness"]["point"]) for c in data["classes"]} == {(1.0, 0.0)}


def test_classify_extra_class(capsys):
    code, out, _ = run(
        capsys, "classify", "--combiner", "builtin:mean", "--arity", "2", "--samples", "2000",
        "--class", "B:2,B:2->M",
    )
    assert code == 0
    assert "P_(B:2,B:2)-M" in out


def test_implies(capsys):
    code, out, _ = run(capsys, "implies", "S:3", "B:3")
    assert code == 0 and out.startswith("Proved")
    code, out, _ = run(capsys, "implies", "B:2", "M")
    assert code == 0 and out.startswith("Refuted") and "(a, b) = (1, 1)" in out


def test_glue_chain(capsys):
    code, out, _ = run(capsys, "glue", "--chain", "1,2,6;1,2,12")
    assert code == 0 and "6 points" in out and "k_b = 4 " in out


def test_glue_pair_and_round_trip(capsys, tmp_path, space_126):
    other = tmp_path / "other.json"
    space_from_triplet(Triplet1D(1, 1, 2), labels=("u", "v", "w")).save(other)
    glued = tmp_path / "glued.json"
    code, out, _ = run(capsys, "glue", "--space", space_126, "--space", str(other), "--out", str(glued))
    assert code == 0
    code, out, _ = run(capsys, "oracle", "--space", str(glued))
    assert code == 0 and "k_b = 2 " in out


def test_product_feeds_oracle(capsys, tmp_path, space_126):
    prod = tmp_path / "prod.json"
    code, _, _ = run(
        capsys, "product", "--space", space_126, "--space", space_126, "--combiner", "builtin:mean", "--out", str(prod)
    )
    assert code == 0
    assert len(FiniteSemimetricSpace.load(prod)) == 9
    code, out, _ = run(capsys, "oracle", "--space", str(prod))
    assert code == 0 and "k_b = 2 " in out


def test_product_not_amenable_exits_1(capsys, tmp_path):
    unit = tmp_path / "unit.json"
    FiniteSemimetricSpace([0, 1], [[0, 1], [1, 0]]).save(unit)
    code, _, err = run(capsys, "product", "--space", str(unit), "--space", str(unit), "--combiner", "builtin:geomean")
    assert code == 1 and "(S1)" in err


def test_product_cap(capsys, space_126):
    code, _, err = run(
        capsys, "product", "--space", space_126, "--space", space_126, "--combiner", "builtin:max", "--cap", "4"
    )
    assert code == 1 and "cap" in err


def test_triplet(capsys, tmp_path):
    code, out, _ = run(capsys, "triplet", "--cond", "B:2", "--a", "6", "--b", "1", "--c", "2")
    assert code == 0 and "is a (B:2)" in out
    code, out, _ = run(capsys, "triplet", "--cond", "M,M", "--a", "0,0", "--b", "1,1", "--c", "2,2")
    assert code == 0 and "is not a" in out
    path = tmp_path / "t.json"
    code, _, _ = run(capsys, "triplet", "--cond", "M", "--a", "1", "--b", "2", "--c", "3", "--out", str(path))
    assert code == 0 and len(FiniteSemimetricSpace.load(path)) == 3


def test_topsis(capsys, problem_file, tmp_path):
    out_file = tmp_path / "result.json"
    code, out, _ = run(capsys, "topsis", "--problem", problem_file, "--combiner", "builtin:euclid", "--out", str(out_file))
    assert code == 0
    first = out.splitlines()[1].split()
    assert first[:3] == ["1", "a", "1.0"]
    assert json.loads(out_file.read_text())["ranking"] == ["a", "b"]


@pytest.mark.parametrize(
    "argv",
    [
        ["falsify", "--combiner", "builtin:mean", "--source", "B:2,X", "--target", "M"],
        ["falsify", "--combiner", "mean", "--source", "M", "--target", "M"],
        ["oracle", "--space", "/nonexistent.json"],
        ["classify", "--combiner", "builtin:mean"],
        ["bogus"],
        ["oracle", "--space", "x", "--unknown-flag"],
        ["classify", "--combiner", "expr:x1 +", "--arity", "1"],
        ["glue", "--chain", "1,2"],
    ],
)
def test_input_errors_exit_1(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 1 and err


def test_malformed_space_file_exit_1(capsys, tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"labels": [0, 1], "matrix": [[0, 1], [2, 0]]}))
    code, _, err = run(capsys, "oracle", "--space", str(path))
    assert code == 1 and "asymmetry" in err
    path.write_text("{not json")
    assert run(capsys, "oracle", "--space", str(path))[0] == 1
    path.write_text(json.dumps({"labels": [0, 1]}))
    code, _, err = run(capsys, "oracle", "--space", str(path))
    assert code == 1 and "matrix" in err


def test_malformed_problem_names_field(capsys, tmp_path):
    path = tmp_path / "p.json"
    path.write_text(json.dumps({"alternatives": ["a"], "criteria": ["x"], "matrix": [[1]], "weights": [2], "directions": ["benefit"]}))
    code, _, err = run(capsys, "topsis", "--problem", str(path), "--combiner", "builtin:mean")
    assert code == 1 and "weights" in err


def test_evaluation_error_exit_2(capsys):
    code, _, err = run(capsys, "classify", "--combiner", "expr:log(x1)", "--arity", "1", "--samples", "100")
    assert code == 2 and "evaluation error" in err


def test_env_overrides(capsys, monkeypatch):
    argv = ["classify", "--combiner", "builtin:sumsq", "--arity", "2"]
    monkeypatch.setenv("PRODMETRIC_SAMPLES", "3000")
    monkeypatch.setenv("PRODMETRIC_FORMAT", "structured")
    code, out, _ = run(capsys, *argv)
    assert code == 0 and json.loads(out)["samples"] == 3000
    # flags take precedence over the environment
    code, out, _ = run(capsys, *argv, "--samples", "2000")
    assert json.loads(out)["samples"] == 2000
    monkeypatch.setenv("PRODMETRIC_SEED", "seven")
    code, _, err = run(capsys, *argv)
    assert code == 1 and "PRODMETRIC_SEED" in err


def test_byte_identical_across_runs_and_threads(capsys):
    argv = ["classify", "--combiner", "builtin:mean", "--arity", "2", "--samples", "20000", "--format", "structured"]
    outputs = {run(capsys, *argv, "--threads", t)[1] for t in ("1", "1", "8")}
    assert len(outputs) == 1
