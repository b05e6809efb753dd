"""Run every preset (or a chosen few) and write outputs under one directory.

    python scripts/run_presets.py --out runs/ fig4 fig7
"""

import argparse
import sys
import time
from pathlib import Path

from momsched.harness import presets
from momsched.harness.runner import run_experiment


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("names", nargs="*", default=sorted(presets.PRESETS))
    ap.add_argument("--out", default="runs")
    ap.add_argument("--workers", type=int)
    args = ap.parse_args(argv)

    for name in args.names:
        t0 = time.perf_counter()
        results = run_experiment(presets.preset(name), Path(args.out) / name, args.workers)
        for r in results:
            s = r.summary
            print(f"{name}/{s['variant']}: status={s['status']} rounds={s['rounds']} "
                  f"residual={s['final_residual']:.3e}")
        print(f"{name}: {time.perf_counter() - t0:.1f}s")
    return 0


if __name__ == "__main__":
    sys.exit(main())
