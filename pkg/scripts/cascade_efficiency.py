"""Measure cascade leakage against the Shannon limit over a range of QBERs.

    python scripts/cascade_efficiency.py [--bits 1048576] [--trials 10]
"""
import argparse
import time

import numpy as np

from qkdsim.postproc import cascade_correct, efficiency


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--bits", type=int, default=2 ** 20)
    ap.add_argument("--trials", type=int, default=10)
    ap.add_argument("--qber", type=float, nargs="+", default=[0.005, 0.01, 0.02, 0.03, 0.042, 0.06])
    args = ap.parse_args()

    print(f"{'QBER':>6} {'f mean':>7} {'f max':>7} {'ok':>5} {'s/block':>8}")
    for q in args.qber:
        effs, ok = [], 0
        t0 = time.perf_counter()
        for seed in range(args.trials):
            rng = np.random.default_rng([seed, int(q * 1e6)])
            a = rng.integers(0, 2, args.bits, dtype=np.uint8)
            b = a.copy()
            b[rng.choice(args.bits, int(round(q * args.bits)), replace=False)] ^= 1
            corrected, leak = cascade_correct(a, b, q, seed=seed)
            ok += np.array_equal(corrected, a)
            effs.append(efficiency(leak, args.bits, q))
        per = (time.perf_counter() - t0) / args.trials
        print(f"{q:6.3f} {np.mean(effs):7.3f} {np.max(effs):7.3f} {ok:>2}/{args.trials:<2} {per:8.2f}")


if __name__ == "__main__":
    main()
