"""Acceptance suite: each test runs one of the twelve built-in property
checks and prints a single PASS/FAIL line for it."""

import json

import pytest

from vbpg import paper_checks

_PRIMARY = {
    "A1": 1, "A2": 2, "A3": 3, "A4": 4, "A5": 5, "A6": 6,
    "A7": 7, "A8": 8, "A9": 9, "A10": 10, "A11": 11, "A12": 12,
}


def _report(result):
    n = _PRIMARY[result["id"]]
    status = "PASS" if result["passed"] else "FAIL"
    print(f"[PRIMARY {n}] {status} - {result['name']}")
    assert result["passed"], json.dumps(result["details"], default=str)


def test_primary_01_per_step_descent():
    _report(paper_checks.check_01_descent())


def test_primary_02_generalized_descent():
    _report(paper_checks.check_02_generalized_descent())


def test_primary_03_gap_tightness():
    _report(paper_checks.check_03_gap_tightness())


def test_primary_04_closed_form_rate():
    _report(paper_checks.check_04_closed_form_rate())


def test_primary_05_oracle_equivalence():
    _report(paper_checks.check_05_oracle_equivalence())


def test_primary_06_counterexample_scans():
    _report(paper_checks.check_06_counterexample_scans())


def test_primary_07_implication_audit():
    _report(paper_checks.check_07_implication_audit())


def test_primary_08_contraction_converse():
    _report(paper_checks.check_08_contraction_converse())


def test_primary_09_jacobi_equivalence():
    _report(paper_checks.check_09_jacobi_equivalence())


def test_primary_10_sufficient_condition_pipeline():
    _report(paper_checks.check_10_sufficient_condition_pipeline())


def test_primary_11_envelope_proximity():
    _report(paper_checks.check_11_envelope_proximity())


def test_primary_12_cli_determinism(tmp_path):
    _report(paper_checks.check_12_determinism(tmp_path / "determinism"))
