import json

import numpy as np
import pytest

from varfactor.cli import main, parse_coefficients
from varfactor.errors import PreconditionViolation
from varfactor.estimation import TimeSeriesData, VarModel, ols_fit
from varfactor.matpoly import MatrixPolynomial
from varfactor.io import CsvParseError, ModelDocument, format_csv, parse_csv, read_csv
from varfactor.simharness import get_case


def _coeff_text(poly):
    return "|".join(";".join(",".join(repr(float(x)) for x in row) for row in c)
                    for c in poly.coeffs)


@pytest.fixture(scope="module")
def case1_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "case1.csv"
    assert main(["simulate", "--case", "1", "--T", "300", "--seed", "4", "--out", str(path)]) == 0
    return path


# CSV ---------------------------------------------------------------------------------

def test_parse_csv_header_and_comments():
    t = parse_csv("# note\nx1,x2\n1,2\n\n3.5,-4e-1\n")
    assert t.header == ["x1", "x2"] and t.comments == ["note"]
    np.testing.assert_array_equal(t.values, [[1, 2], [3.5, -0.4]])


def test_parse_csv_ragged_row_reports_line():
    with pytest.raises(CsvParseError) as exc:
        parse_csv("1,2\n3,4\n5\n")
    assert exc.value.line == 3


def test_parse_csv_non_numeric():
    with pytest.raises(CsvParseError, match="line 2"):
        parse_csv("1,2\n3,abc\n")


def test_format_csv_round_trip():
    vals = np.random.default_rng(0).standard_normal((5, 3))
    t = parse_csv(format_csv(vals, ["a", "b", "c"], ["hello"]))
    np.testing.assert_array_equal(t.values, vals)


# model documents -----------------------------------------------------------------

def test_model_document_byte_identical(tmp_path, case1_csv):
    out = tmp_path / "m.json"
    assert main(["fit", str(case1_csv), "--lags", "2", "--rank", "1", "--no-mean",
                 "--out", str(out)]) == 0
    first = out.read_text()
    doc = ModelDocument.read(out)
    doc.write(tmp_path / "again.json")
    assert (tmp_path / "again.json").read_text() == first
    model = doc.to_model()
    np.testing.assert_array_equal(model.poly.stack(), np.array(json.loads(first)["Phi"]))


def test_model_document_rejects_broken_constraint(tmp_path):
    data = TimeSeriesData(np.random.default_rng(1).standard_normal((200, 2)))
    doc = ModelDocument.from_model(ols_fit(data, 1), 1, {"method": "mle"})
    with pytest.raises(PreconditionViolation):
        ModelDocument.from_json(doc.to_json())


# fit ----------------------------------------------------------------------------------

def test_fit_mle_one_unit_root(case1_csv, capsys):
    assert main(["fit", str(case1_csv), "--lags", "2", "--rank", "1"]) == 0
    out = capsys.readouterr().out
    roots = out.split("root magnitudes:")[1].splitlines()[0].split(",")
    assert [r.strip() for r in roots].count("1.000") == 1


def test_fit_rank_zero_stable(tmp_path, capsys):
    path = tmp_path / "wn.csv"
    path.write_text(format_csv(np.random.default_rng(2).standard_normal((300, 2))))
    assert main(["fit", str(path), "--lags", "1", "--rank", "0"]) == 0
    out = capsys.readouterr().out
    assert "1.000" not in out.split("root magnitudes:")[1].splitlines()[0]


def test_fit_malformed_csv_exit_2(tmp_path, capsys):
    path = tmp_path / "bad.csv"
    path.write_text("1,2\n3,4\nfoo,5\n")
    assert main(["fit", str(path)]) == 2
    assert "line 3" in capsys.readouterr().err


def test_fit_rank_too_large_exit_4(case1_csv):
    assert main(["fit", str(case1_csv), "--rank", "2"]) == 4


def test_fit_ols_and_yw(case1_csv):
    assert main(["fit", str(case1_csv), "--lags", "2", "--method", "ols"]) == 0
    assert main(["fit", str(case1_csv), "--lags", "2", "--method", "yw"]) == 0


# factorize -------------------------------------------------------------------------

def test_factorize_residual(capsys):
    text = _coeff_text(get_case(1).Phi)
    assert main(["factorize", "--coeffs", text, "--rank", "1"]) == 0
    resid = float(capsys.readouterr().out.split("residual:")[1])
    assert resid < 1e-8


def test_factorize_rank_too_large_exit_4(capsys):
    text = _coeff_text(get_case(1).Phi)
    assert main(["factorize", "--coeffs", text, "--rank", "2"]) == 4
    assert "roots:" in capsys.readouterr().err


def test_factorize_right_matches_left_for_symmetric_var1(capsys):
    text = "1,0;0,0.5"
    assert main(["factorize", "--coeffs", text, "--rank", "1", "--side", "left"]) == 0
    left = capsys.readouterr().out.split("U:")[1].split("residual")[0]
    assert main(["factorize", "--coeffs", text, "--rank", "1", "--side", "right"]) == 0
    right = capsys.readouterr().out.split("U:")[1].split("residual")[0]
    assert left == right


def test_parse_coefficients_errors():
    assert parse_coefficients("1,2;3,4|0,0;0,0").degree == 2
    assert main(["factorize", "--coeffs", "1,x", "--rank", "0"]) == 2


# simulate ----------------------------------------------------------------------------

def test_simulate_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        assert main(["simulate", "--case", "2", "--T", "50", "--seed", "8", "--out", str(p)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_simulate_zero_length_header_only(tmp_path):
    p = tmp_path / "z.csv"
    assert main(["simulate", "--case", "1", "--T", "0", "--out", str(p)]) == 0
    lines = [ln for ln in p.read_text().splitlines() if not ln.startswith("#")]
    assert lines == ["x1,x2"]


def test_simulate_case1_two_columns(case1_csv):
    t = read_csv(case1_csv)
    assert t.values.shape == (300, 2) and t.header == ["x1", "x2"]
    assert any("case=1" in c for c in t.comments)


def test_simulate_explosive_model_exit_4(tmp_path):
    model = VarModel(MatrixPolynomial([[[1.2]]]), np.zeros(1), np.eye(1))
    path = tmp_path / "x.json"
    ModelDocument.from_model(model, 0, {"method": "ols"}).write(path)
    assert main(["simulate", "--model", str(path), "--T", "10"]) == 4


# bench and forecast --------------------------------------------------------------

def test_bench_oracle(tmp_path, capsys):
    out = tmp_path / "b.json"
    assert main(["bench", "--case", "1", "--T", "40", "--M", "3", "--estimators", "oracle",
                 "--out", str(out)]) == 0
    assert "dropped=0" in capsys.readouterr().out
    body = json.loads(out.read_text())
    assert body[0]["mse_T"]["oracle/Phi"][0] == 0.0


def test_forecast_command(tmp_path, case1_csv):
    model_path = tmp_path / "m.json"
    assert main(["fit", str(case1_csv), "--lags", "2", "--rank", "1", "--method", "ols",
                 "--out", str(model_path)]) == 0
    out = tmp_path / "f.csv"
    assert main(["forecast", "--model", str(model_path), "--data", str(case1_csv),
                 "--horizon", "5", "--out", str(out)]) == 0
    assert read_csv(out).values.shape == (5, 2)


def test_forecast_dimension_mismatch(tmp_path, case1_csv):
    model_path = tmp_path / "m.json"
    assert main(["fit", str(case1_csv), "--method", "ols", "--out", str(model_path)]) == 0
    bad = tmp_path / "d.csv"
    bad.write_text(format_csv(np.zeros((5, 3))))
    assert main(["forecast", "--model", str(model_path), "--data", str(bad)]) == 2
