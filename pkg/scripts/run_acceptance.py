"""Run every acceptance criterion and write the measured numbers to JSON."""

import argparse
import sys

from fbmsde.acceptance import CRITERIA, run_criterion
from fbmsde.io import write_json


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="acceptance.json")
    ap.add_argument("criteria", nargs="*", type=int, default=sorted(CRITERIA))
    args = ap.parse_args()
    results = []
    for n in args.criteria:
        r = run_criterion(n)
        print(f"{r.line()}  [{r.seconds:.1f}s]", flush=True)
        results.append(r.as_dict())
    write_json(args.out, results)
    return 0 if all(r["passed"] for r in results) else 3


if __name__ == "__main__":
    sys.exit(main())
