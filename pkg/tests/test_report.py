import csv
import json

import jsonschema
import pytest

from levychaos.config import default_config
from levychaos.errors import IoFailure
from levychaos.report import (SCHEMA_PATH, CheckRecord, VerificationReport, emit_tables, run_suite)

from conftest import SEED

SCHEMA = json.loads(SCHEMA_PATH.read_text())


@pytest.fixture(scope="module")
def small_report():
    cfg = default_config(SEED).with_overrides(suites=("oracle", "isometry", "crp"), n_paths=200,
                                              scenarios=20, grid_step=0.05)
    return run_suite(cfg)


def test_report_matches_schema(small_report):
    jsonschema.validate(small_report.to_dict(), SCHEMA)
    assert small_report.environment["seed"] == SEED


def test_round_trip(small_report):
    back = VerificationReport.from_dict(json.loads(json.dumps(small_report.to_dict())))
    assert back.numerics() == small_report.numerics()


def test_runs_are_reproducible(small_report):
    cfg = default_config(SEED).with_overrides(suites=("oracle", "isometry", "crp"), n_paths=200,
                                              scenarios=20, grid_step=0.05, workers=2)
    assert run_suite(cfg).numerics() == small_report.numerics()


def test_csv_tables(small_report, tmp_path):
    files = emit_tables(small_report, "csv", tmp_path)
    names = sorted(p.name for p in files)
    assert names == ["crp.csv", "crp_residuals.csv", "isometry.csv", "oracle.csv"]
    rows = list(csv.DictReader(open(tmp_path / "oracle.csv")))
    assert len(rows) == 4 and all(r["passed"] == "True" for r in rows)


def test_empty_family_gives_header_only(tmp_path):
    rep = VerificationReport(["product"], {"version": "0", "seed": 1, "config_hash": "0" * 64,
                                           "backend": "python"})
    emit_tables(rep, "csv", tmp_path)
    assert (tmp_path / "product.csv").read_text().count("\n") == 1


def test_unwritable_directory(small_report, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(IoFailure):
        emit_tables(small_report, "json", blocker / "sub")


def test_record_pass_rules():
    ok = CheckRecord("a", "f", "x", "statistical", 1.1, 1.0, 3.0, se=0.05)
    bad = CheckRecord("b", "f", "x", "statistical", 1.2, 1.0, 3.0, se=0.05)
    assert ok.passed and not bad.passed and ok.z == pytest.approx(2.0)
    assert CheckRecord("c", "f", "x", "exact", 0.0, 0.0, 1e-10, gap=1e-11).passed
    assert not CheckRecord("d", "f", "x", "exact", 0.0, 0.0, 1e-10, gap=1e-9).passed
    assert "FAIL d" in CheckRecord("d", "f", "x", "exact", 0.0, 0.0, 1e-10, gap=1e-9).describe()


def test_small_samples_are_flagged():
    cfg = default_config(SEED).with_overrides(suites=("isometry",), n_paths=100, grid_step=0.05)
    rep = run_suite(cfg)
    flagged = [r for r in rep.records if "wide error bars" in r.note]
    assert flagged and all(r.se > 0.1 * abs(r.reference) for r in flagged)
