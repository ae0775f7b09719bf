"""Acceptance criteria 1 to 8 at their stated tolerances.

Each test prints one ``PASS``/``FAIL`` line (plus the compared numbers);
the lines are also collected into the terminal summary.  Criterion 4 is
the slowest (a few minutes on one core).
"""

import pytest

from trapsim.validation import run_criterion

RESULTS = []


@pytest.mark.slow
@pytest.mark.parametrize("number", range(1, 9))
def test_criterion(number):
    res = run_criterion(number)
    RESULTS.append(res)
    print(res.line())
    for d in res.detail:
        print(f"    {d}")
    assert res.passed, "\n".join(res.detail)
