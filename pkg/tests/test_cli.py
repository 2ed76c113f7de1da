import io
import json
import math

import numpy as np
import pytest

import oracles
from qubit_channels.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv)
    return code, (json.loads(out) if out else None), err


def test_verify_boundary(capsys):
    code, out, err = run_json(capsys, "verify", '{"lambda":[0.5,0.5,0.25],"t":[0,0,0.75]}')
    assert code == 0 and err == ""
    assert out["verdict"] == "Boundary"
    assert out["bound"] == pytest.approx(0.5625)
    assert out["choi_trace"] == 2.0
    C = np.array(out["choi"])[..., 0] + 1j * np.array(out["choi"])[..., 1]
    np.testing.assert_allclose(np.linalg.eigvalsh(C), [0, 0, 0.75, 1.25], atol=1e-14)


def test_verify_not_cp(capsys):
    code, out, _ = run_json(capsys, "verify", '{"lambda":[-1,-1,-1],"t":[0,0,0]}')
    assert code == 2 and out["verdict"] == "NotCP"


def test_verify_normalized_choi(capsys):
    _, out, _ = run_json(capsys, "verify", "--normalize-choi", '{"lambda":[0.6,0.4,0.2]}')
    assert out["choi_trace"] == 1.0
    np.testing.assert_allclose(sorted(out["choi_eigs"]), [0.05, 0.15, 0.25, 0.55], atol=1e-15)


def test_verify_full_matrix_input(capsys):
    M = oracles.rotation((0, 1, 1), 0.5) @ np.diag([0.5, 0.5, 0.25])
    text = json.dumps({"M": M.tolist(), "t": [0, 0, 0.76]})
    code, out, _ = run_json(capsys, "verify", text)
    assert code == 2 and out["verdict"] == "NotCP"


def test_classify(capsys):
    c, s = math.cos(math.pi / 4), math.sin(math.pi / 4)
    lam = [c, 0.5, c * 0.5]
    code, out, _ = run_json(capsys, "classify", json.dumps({"lambda": lam, "t": [0, 0, s * math.sin(math.pi / 3)]}))
    assert code == 0
    assert out["kraus_rank"] == 2 and out["pure_output"]["class"] == "Two"
    assert out["extremal"]["class"] == "TwoPONonDeg"
    assert out["extremal"]["u"] == pytest.approx(math.pi / 4)


def test_canonical(capsys):
    code, out, _ = run_json(capsys, "canonical", "--ordering", "2,0,1", '{"lambda":[0.6,0.4,0.2]}')
    assert code == 0
    np.testing.assert_allclose(np.abs(out["lambda"]), [0.2, 0.6, 0.4], atol=1e-15)


def test_kraus(capsys):
    code, out, _ = run_json(capsys, "kraus", '{"lambda":[1,0.5,0.5]}')
    assert code == 0 and len(out) == 2
    ops = [np.array(A)[..., 0] + 1j * np.array(A)[..., 1] for A in out]
    np.testing.assert_allclose(sum(A.conj().T @ A for A in ops), np.eye(2), atol=1e-12)


def test_decompose_unital_example(capsys):
    code, out, _ = run_json(capsys, "decompose", "--eps", "0.05", '{"lambda":[0.5,0.3,0.2],"t":[0,0,0]}')
    assert code == 0
    kinds = [f["kind"] for f in out["factors"]]
    assert kinds.count("face") == 1 and kinds.count("phase_flip") >= 1
    assert out["recomposition_error"] < 1e-9
    assert out["epsilon"] == 0.05


def test_decompose_recompose_pipeline(capsys, monkeypatch):
    _, sample_text, _ = run(capsys, "sample", "--seed", "4", "--kind", "extremal")
    code, plan_text, _ = run(capsys, "decompose", sample_text)
    assert code == 0
    monkeypatch.setattr("sys.stdin", io.StringIO(plan_text))
    code, out, _ = run_json(capsys, "recompose")
    assert code == 0
    original = json.loads(sample_text)
    np.testing.assert_allclose(out["channel"]["M"], original["M"], atol=1e-9)
    np.testing.assert_allclose(out["channel"]["t"], original["t"], atol=1e-9)
    assert out["recomposition_error"] < 1e-9


def test_decompose_unsupported(capsys):
    code, out, err = run(capsys, "decompose", '{"lambda":[0,0,0],"t":[0,0,0.5]}')
    assert code == 3 and out == "" and "error" in err


def test_decompose_not_cp(capsys):
    code, out, err = run(capsys, "decompose", '{"lambda":[-1,-1,-1]}')
    assert code == 2 and out == ""


@pytest.mark.parametrize(
    "argv",
    [
        ["verify", "{not json"],
        ["verify", '{"lambda":[1,2]}'],
        ["verify", '{"M":[[1,0,0]],"t":[0,0,0]}'],
        ["verify", '{"lambda":[1,1,1],"M":[[1,0,0],[0,1,0],[0,0,1]]}'],
        ["verify", "--tol", "-1", '{"lambda":[1,1,1]}'],
        ["decompose", "--eps", "0.7", '{"lambda":[1,1,1]}'],
        ["decompose", "--eps", "abc", '{"lambda":[1,1,1]}'],
        ["verify", "--file", "/nonexistent/channel.json"],
        ["pancake", "--step", "0"],
    ],
)
def test_malformed_input(capsys, argv):
    code, out, err = run(capsys, *argv)
    assert code == 1 and out == "" and err


def test_both_input_sources_rejected(capsys, tmp_path):
    path = tmp_path / "ch.json"
    path.write_text('{"lambda":[1,1,1]}')
    code, _, err = run(capsys, "verify", "--file", str(path), '{"lambda":[1,1,1]}')
    assert code == 1 and "not both" in err


def test_file_and_stdin_inputs(capsys, tmp_path, monkeypatch):
    path = tmp_path / "ch.json"
    path.write_text('{"lambda":[0.5,0.5,0.25],"t":[0,0,0.75]}')
    _, from_file, _ = run(capsys, "verify", "--file", str(path))
    monkeypatch.setattr("sys.stdin", io.StringIO(path.read_text()))
    _, from_stdin, _ = run(capsys, "verify")
    _, inline, _ = run(capsys, "verify", path.read_text())
    assert from_file == from_stdin == inline


def test_sample_is_deterministic(capsys):
    for kind in ("unital", "general", "extremal"):
        _, first, _ = run(capsys, "sample", "--seed", "7", "--kind", kind)
        _, second, _ = run(capsys, "sample", "--seed", "7", "--kind", kind)
        assert first == second
        ch = json.loads(first)
        assert oracles.min_choi_eig(ch["M"], ch["t"]) > -1e-10


def test_outputs_are_byte_identical(capsys):
    text = '{"lambda":[0.5,0.3,0.2]}'
    for command in ("verify", "classify", "canonical", "kraus", "decompose"):
        assert run(capsys, command, text) == run(capsys, command, text)


def test_json_numbers_keep_full_precision(capsys):
    _, out, _ = run(capsys, "decompose", '{"lambda":[0.5,0.3,0.2]}')
    plan = json.loads(out)
    flips = [f["t"] for f in plan["factors"] if f["kind"] == "phase_flip"]
    assert len(repr(flips[0]).rstrip("0")) > 15


def test_pancake(capsys):
    code, out, _ = run_json(capsys, "pancake", "--step", "0.05")
    assert code == 0 and out["rows"]
    assert out["max_margin"] <= 0
    row = out["rows"][0]
    assert set(row) == {"a", "c", "t3", "margin_plus", "margin_minus"}


def test_pretty_output(capsys):
    _, out, _ = run(capsys, "sample", "--seed", "1", "--pretty")
    assert out.startswith("{\n  ")


def test_help_lists_schemas(capsys):
    assert main(["--help"]) == 0
    assert "recomposition_error" in capsys.readouterr().out
