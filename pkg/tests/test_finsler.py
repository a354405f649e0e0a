import json

import pytest

from finsler import main
from geometry import TENSOR_NAMES

EX1_POINT = "x=0,1,0,0;y=1,1,1,1"
EX2_SLICE = "x=1,1,1;y=1,1,2"


def run_json(tmp_path, argv, name="out.json"):
    path = tmp_path / name
    code = main(argv + ["--json", str(path), "-q"])
    return code, json.loads(path.read_text(encoding="utf-8"))


def test_tensors_report(tmp_path):
    code, report = run_json(tmp_path, ["tensors", "--metric", "ex1", "--point", EX1_POINT, "--tensor", "Rs"])
    assert code == 0
    assert list(report) == ["metric", "points", "tensors", "subspaces", "residuals", "verdicts", "summary"]
    assert report["metric"] == "ex1"
    assert report["points"] == [EX1_POINT]
    assert report["tensors"]["Rs"][0][0][0][1] == pytest.approx(5.0 / 18.0, abs=1e-10)
    assert report["summary"]["orders"] == [2, 6]
    assert report["residuals"]["chern-barthel"] <= 1e-8


@pytest.mark.parametrize("tensor", TENSOR_NAMES)
def test_tensors_one_at_a_time(tmp_path, tensor):
    code, report = run_json(tmp_path, ["tensors", "--metric", "ex1", "--point", EX1_POINT, "--tensor", tensor])
    assert code == 0
    assert tensor in report["tensors"]
    assert report["summary"]["E"] == pytest.approx(2.0)
    assert report["residuals"].get("euler", 0.0) <= 1e-10


def test_tensors_text_and_csv(tmp_path, capsys):
    path = tmp_path / "g.csv"
    assert main(["tensors", "--metric", "euclid2", "--point", "x=0,0;y=3,4", "--tensor", "E", "--tensor", "g",
                 "--csv", str(path), "-q"]) == 0
    out = capsys.readouterr().out
    assert "E =  25" in out
    assert "g[1,1]" in out
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "tensor,index,value"
    assert 'g,"1,2",0.0' in lines


def test_json_is_deterministic(tmp_path):
    argv = ["verify", "--metric", "euclid2", "--points", "3", "--seed", "1"]
    main(argv + ["--json", str(tmp_path / "a.json"), "-q"])
    main(argv + ["--json", str(tmp_path / "b.json"), "-q"])
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_verify_exit_codes(tmp_path):
    code, report = run_json(tmp_path, ["verify", "--metric", "riem-hyperbolic", "--points", "3"])
    assert code == 0
    assert report["summary"]["passed"] is True
    assert report["residuals"]["riemannian-reduction"]["status"] == "pass"

    code, report = run_json(tmp_path, ["verify", "--metric", "ex-bad-homog", "--points", "3"], "bad.json")
    assert code == 1
    assert report["residuals"]["homogeneity"]["status"] == "FAIL"


@pytest.mark.parametrize(
    "metric, verdict",
    [("euclid3", "Berwald"), ("riem-hyperbolic", "Berwald"), ("ex3", "Landsberg-not-Berwald")],
)
def test_classify(tmp_path, metric, verdict):
    code, report = run_json(tmp_path, ["classify", "--metric", metric, "--points", "3"])
    assert code == 0
    assert report["verdicts"]["consensus"] == verdict
    assert report["summary"]["consistent"] is True


def test_nullity_compare(tmp_path, capsys):
    code, report = run_json(
        tmp_path, ["nullity", "--metric", "ex1", "--point", EX1_POINT, "--mode", "compare"]
    )
    assert code == 0
    assert report["summary"]["mu"] == 2
    assert report["summary"]["kernel_dim"] == 2
    assert report["summary"]["equal"] is True
    assert report["summary"]["strict"] is False
    assert report["subspaces"]["conullity"]["dim"] == 2
    assert len(report["subspaces"]["nullity"]["tangent_basis"][0]) == 8
    assert "mu(chern-h) = 2" in capsys.readouterr().out


def test_nullity_hv_on_slice(tmp_path):
    code, report = run_json(tmp_path, ["nullity", "--metric", "ex2", "--point", EX2_SLICE,
                                       "--tensor", "chern-hv"])
    assert code == 0
    assert report["summary"]["mu"] == 2


def test_scan(tmp_path):
    code, report = run_json(tmp_path, ["scan", "--metric", "ex2", "--grid", "y3=1.5:2.5:3", "--point", EX2_SLICE,
                                       "--tensor", "chern-hv", "--no-ray"])
    assert code == 0
    assert len(report["records"]) == 3
    assert report["records"][1]["mu"]["chern-hv"] == 2
    assert report["summary"]["rejected"] == 0
    assert 2 in report["summary"]["chern-hv"]["values"]


def test_metric_file(tmp_path):
    path = tmp_path / "flat.fin"
    path.write_text("dim = 2\nE = y1^2 + y2^2\n", encoding="utf-8")
    code, report = run_json(tmp_path, ["tensors", "--metric", str(path), "--point", "x=0,0;y=1,0",
                                       "--tensor", "N"])
    assert code == 0
    assert report["metric"] == "flat"


@pytest.mark.parametrize(
    "argv, code",
    [
        (["tensors", "--metric", "nosuch", "--point", EX1_POINT], 2),
        (["tensors", "--metric", "ex1", "--point", "x=0,-1,0,0;y=1,1,1,1"], 3),
        (["tensors", "--metric", "ex1", "--point", "x=0,1,0;y=1,1,1"], 3),
        (["tensors", "--metric", "ex1", "--point", EX1_POINT, "--orders", "2,4", "--tensor", "Rs"], 5),
        (["scan", "--metric", "ex2", "--grid", "y3=4:4:1", "--point", "x=1,1,1;y=1,1,1"], 3),
    ],
)
def test_error_exit_codes(argv, code):
    assert main(argv + ["-q"]) == code


def test_syntax_error_exit_code(tmp_path):
    path = tmp_path / "broken.fin"
    path.write_text("dim = 2\nF = x1 +\n", encoding="utf-8")
    assert main(["tensors", "--metric", str(path), "--point", "x=0,0;y=1,1"]) == 2


def test_degenerate_metric_exit_code(tmp_path):
    path = tmp_path / "degenerate.fin"
    path.write_text("dim = 2\nF = y1 + y2\ndomain: y1 > 0\ndomain: y2 > 0\n", encoding="utf-8")
    assert main(["tensors", "--metric", str(path), "--point", "x=0,0;y=1,1", "-q"]) == 4


def test_default_orders_from_environment(monkeypatch):
    monkeypatch.setenv("FINSLER_DEFAULT_ORDERS", "1,3")
    assert main(["tensors", "--metric", "ex1", "--point", EX1_POINT, "--tensor", "Rs", "-q"]) == 5
    assert main(["tensors", "--metric", "ex1", "--point", EX1_POINT, "--tensor", "N", "-q"]) == 0


@pytest.mark.parametrize(
    "argv",
    [
        ["nullity", "--metric", "ex1", "--point", EX1_POINT, "--mode", "kernel", "--tensor", "barthel"],
        ["verify", "--metric", "ex1", "--points", "0"],
        ["scan", "--metric", "ex2", "--grid", "y3=1:2:2", "--workers", "0"],
        ["tensors", "--metric", "ex1", "--point", "x=1"],
        ["tensors", "--metric", "ex1", "--point", EX1_POINT, "--orders", "2"],
    ],
)
def test_usage_errors(argv):
    with pytest.raises(SystemExit) as e:
        main(argv)
    assert e.value.code == 2


def test_reproduce_with_insufficient_orders(tmp_path):
    code, report = run_json(tmp_path, ["reproduce", "--orders", "2,4", "--points", "2"])
    assert code == 1
    items = report["verdicts"]
    assert items["ex1-golden-curvature"]["detail"].startswith("insufficient orders")
    assert items["ex2-connection"]["passed"] is True


@pytest.mark.slow
def test_reproduce(tmp_path):
    code, report = run_json(tmp_path, ["reproduce", "--points", "3"])
    failed = {k: v["detail"] for k, v in report["verdicts"].items() if not v["passed"]}
    assert not failed
    assert code == 0
    assert report["summary"]["passed"] is True
