"""The eleven acceptance criteria at their stated tolerances, one line each."""

import pytest

from conftest import ACCEPTANCE_LINES
from perspectival.acceptance import CRITERIA, FAIL, INSUFFICIENT, PASS, criterion, format_line

STATISTICAL = (1, 2, 3, 4, 5, 7, 9)


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number):
    r = criterion(number)
    line = format_line(r)
    ACCEPTANCE_LINES.append(line)  # echoed in the terminal summary
    print(line)
    assert r.status == PASS, line


def test_all_criteria_registered():
    assert sorted(CRITERIA) == list(range(1, 12))


def test_fault_injection_breaks_reversal_fidelity():
    r = criterion(6, epsilon=1e-3)
    assert r.status == FAIL, format_line(r)


@pytest.mark.parametrize("number", STATISTICAL)
def test_reduced_runs_report_insufficient(number):
    r = criterion(number, runs=100)
    assert r.status == INSUFFICIENT, format_line(r)
    assert "insufficient runs" in r.detail
