"""The acceptance criteria, one test each, at their stated tolerances and budgets.

Each test prints a one-line verdict; the lines are also collected into the
pytest terminal summary.  Running this file as a script prints the lines and
exits non-zero if any criterion fails.
"""
import json
import sys

import pytest

from gaplab.acceptance import CRITERIA, DEFAULT_SEED, run_criterion


@pytest.mark.parametrize("number", sorted(CRITERIA), ids=lambda n: f"criterion_{n:02d}")
def test_criterion(number, acceptance_log):
    r = run_criterion(number, DEFAULT_SEED)
    line = r.line()
    print(line)
    acceptance_log.append(line)
    assert r.checks_passed, json.dumps(r.details, default=str)[:2000]
    assert r.within_budget, f"runtime {r.runtime:.2f} s exceeds the budget of {r.budget} s"


if __name__ == "__main__":
    failed = 0
    for n in sorted(CRITERIA):
        r = run_criterion(n, DEFAULT_SEED)
        print(r.line(), flush=True)
        failed += not r.passed
    sys.exit(1 if failed else 0)
