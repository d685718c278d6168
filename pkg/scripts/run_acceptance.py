"""Run the acceptance criteria and write a JSON report.

    python scripts/run_acceptance.py --level full --out out/acceptance.json
"""

import argparse
from pathlib import Path

from spacetime_perc.io import dumps_json
from spacetime_perc.validation import validate_suite


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--level", choices=("quick", "full"), default="full")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--only", type=int, nargs="*")
    ap.add_argument("--out", default="out/acceptance.json")
    args = ap.parse_args()

    results = validate_suite(args.level, args.seed, args.only)
    for r in results:
        print(r.line())
    path = Path(args.out)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_json([{"criterion": r.number, "name": r.name, "passed": r.passed, "seconds": r.seconds, "metrics": r.metrics} for r in results]))
    raise SystemExit(0 if all(r.passed for r in results) else 2)


if __name__ == "__main__":
    main()
