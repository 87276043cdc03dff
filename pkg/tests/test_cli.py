import json

import pytest
from typer.testing import CliRunner

from ftcl.cli import app

runner = CliRunner()


@pytest.fixture(autouse=True)
def isolated_cache(monkeypatch, tmp_path):
    monkeypatch.setenv("FTCL_CACHE", str(tmp_path / "cache"))


def test_verify_hypothesis_failure_exits_2(tmp_path):
    out = tmp_path / "report.json"
    result = runner.invoke(app, ["verify", "--curve", "11a1", "--m", "3", "--json", str(out)])
    assert result.exit_code == 2
    assert "hypothesis_failure" in result.output
    payload = json.loads(out.read_text())
    assert payload["status"] == "hypothesis_failure"
    assert "timings" not in payload


def test_verify_unknown_label_exits_2():
    result = runner.invoke(app, ["verify", "--curve", "999z9", "--m", "2"])
    assert result.exit_code == 2
    assert "Unknown curve label" in result.output


def test_invalid_precision_setting_exits_3():
    result = runner.invoke(app, ["--precision", "0", "selftest"])
    assert result.exit_code == 3


def test_selftest_single_suite(tmp_path):
    out = tmp_path / "selftest.json"
    result = runner.invoke(app, ["selftest", "--suite", "rings", "--json", str(out)])
    assert result.exit_code == 0
    assert "rings" in result.output
    assert [suite["name"] for suite in json.loads(out.read_text())["suites"]] == ["rings"]


def test_periods():
    result = runner.invoke(app, ["--digits", "20", "periods", "--curve", "11a1"])
    assert result.exit_code == 0
    assert "Omega+ = 1.26920930427955" in result.output


def test_lvalue_from_toml(tmp_path):
    spec = tmp_path / "request.toml"
    spec.write_text('kind = "curve"\ncurve = "11a1"\ns = 1\ncsv = "an.csv"\ncsv_terms = 10\n')
    result = runner.invoke(app, ["--digits", "20", "lvalue", "--spec", str(spec)])
    assert result.exit_code == 0
    assert "at s=1: 0.2538418608559" in result.output
    assert (tmp_path / "an.csv").read_text().splitlines()[2] == "2,-2"


def test_lvalue_rejects_incomplete_requests(tmp_path):
    spec = tmp_path / "request.toml"
    spec.write_text('kind = "twist"\ncurve = "11a1"\n')
    result = runner.invoke(app, ["lvalue", "--spec", str(spec)])
    assert result.exit_code == 2


def test_survey_without_admissible_pairs():
    result = runner.invoke(app, ["survey", "--curves", "11a1,37a1", "--m-list", "3"])
    assert result.exit_code == 0
    assert "no admissible pairs among 2" in result.output
