#!/usr/bin/env python3
"""Populate the result cache with every run the analyses need.

Covers the full (t_p, g) scaling sweep plus the short-pulse breakdown
run.  Safe to re-run; cached points are skipped.  Expect on the order
of an hour of wall time from a cold cache on one core.
"""

import argparse
import json
import time

from sapsim.config import RunConfig
from sapsim import driver


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--breakdown-t-p", type=float, default=500.0)
    args = ap.parse_args()

    t0 = time.time()
    cfg = RunConfig()

    bd = cfg.with_updates(**{"potential.t_p": args.breakdown_t_p})
    r = driver.run_cached(bd)
    print(f"[{time.time() - t0:7.1f}s] t_p={args.breakdown_t_p} g=0 "
          f"status={r.status} P_R={r.scalars['final_P_R']:.4f}", flush=True)

    points, fits = driver.sweep(cfg)
    for pt in points:
        print(f"[{time.time() - t0:7.1f}s] t_p={pt['t_p']} g={pt['g']} "
              f"status={pt['status']}", flush=True)
    for g, f in fits.items():
        print(f"g={g}: " + json.dumps(
            {k: round(v.exponent, 4) for k, v in f.items()}), flush=True)


if __name__ == "__main__":
    main()
