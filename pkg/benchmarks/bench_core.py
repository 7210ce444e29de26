"""Compare the compiled gain kernels against the numpy fallback.

Runs lazy greedy facility-location selection at a few pool sizes with
both backends and prints wall-clock times.  The backend is chosen at
import time, so each measurement runs in a subprocess.

Usage: python benchmarks/bench_core.py [--sizes 2000,5000,10000] [--budget 50]
"""

import argparse
import json
import os
import subprocess
import sys
import textwrap

_WORKER = textwrap.dedent(
    """
    import json, sys, time
    import numpy as np
    import prismsel
    from prismsel.measures import MeasureSpec
    from prismsel.optimize import BudgetConfig, lazy_greedy

    n, budget, seed = json.loads(sys.argv[1])
    rng = np.random.default_rng(seed)
    feats = rng.normal(size=(n, 16))
    targets = rng.normal(size=(8, 16))
    k = prismsel.clip_nonnegative(
        prismsel.compute_kernel(feats, targets, metric="cosine")
    )
    spec = MeasureSpec.from_name("flvmi")
    t0 = time.perf_counter()
    sel = lazy_greedy(spec, k, BudgetConfig(budget, stop_on_nonpositive_gain=False))
    elapsed = time.perf_counter() - t0
    print(json.dumps({
        "native": prismsel.USING_NATIVE,
        "elapsed": elapsed,
        "objective": sel.objective,
        "order_head": sel.order[:5],
    }))
    """
)


def run_one(n, budget, seed, force_fallback):
    env = dict(os.environ)
    env["PRISMSEL_FORCE_FALLBACK"] = "1" if force_fallback else "0"
    out = subprocess.run(
        [sys.executable, "-c", _WORKER, json.dumps([n, budget, seed])],
        capture_output=True,
        text=True,
        env=env,
        check=True,
    )
    return json.loads(out.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", default="2000,5000,10000")
    ap.add_argument("--budget", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    print(f"{'n':>8} {'compiled':>10} {'fallback':>10} {'speedup':>8}")
    for n in sizes:
        fast = run_one(n, args.budget, args.seed, force_fallback=False)
        slow = run_one(n, args.budget, args.seed, force_fallback=True)
        if not fast["native"]:
            print(f"{n:>8} compiled extension unavailable, skipping comparison")
            continue
        assert fast["order_head"] == slow["order_head"], "backends disagree"
        ratio = slow["elapsed"] / max(fast["elapsed"], 1e-9)
        print(f"{n:>8} {fast['elapsed']:>9.3f}s {slow['elapsed']:>9.3f}s {ratio:>7.2f}x")


if __name__ == "__main__":
    main()
