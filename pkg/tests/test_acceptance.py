"""The nine acceptance criteria at their stated budgets and tolerances.

Each test prints one PASS/FAIL line; the lines are repeated in the pytest
terminal summary. Run this file directly for the lines alone.
"""

import json
import sys

import pytest

from spacetime_perc.io import dumps_json
from spacetime_perc.validation import CRITERIA, run_criterion

SEED = 0


@pytest.mark.slow
@pytest.mark.parametrize("fn", CRITERIA, ids=[f"{i}-{fn.__name__}" for i, fn in enumerate(CRITERIA, start=1)])
def test_criterion(fn, acceptance_log):
    res = run_criterion(fn, "full", SEED)
    line = res.line()
    print(line)
    acceptance_log.append(line)
    assert res.passed, f"{line}\n{dumps_json(res.metrics)}"


if __name__ == "__main__":
    ok = True
    for fn in CRITERIA:
        res = run_criterion(fn, "full", SEED)
        print(res.line(), flush=True)
        if "-v" in sys.argv:
            print(json.dumps(json.loads(dumps_json(res.metrics)), indent=1))
        ok &= res.passed
    sys.exit(0 if ok else 1)
