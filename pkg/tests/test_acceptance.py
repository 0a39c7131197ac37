"""One test per acceptance criterion; each prints a single PASS/FAIL line.

The lines are also collected into an "acceptance criteria" section of the
terminal summary so the full verdict is visible at the end of ``pytest -v``.
"""
import pytest

from boundopt.acceptance import CRITERIA, run_criterion

SLOW = {7, 8, 12, 13}


@pytest.mark.parametrize(
    "number",
    [pytest.param(n, marks=pytest.mark.slow) if n in SLOW else n for n in sorted(CRITERIA)],
    ids=lambda n: f"criterion{n:02d}",
)
def test_criterion(number, request):
    result = run_criterion(number)
    line = result.line()
    request.config._acceptance_lines.append(line)
    print(line)
    assert result.passed, line
