"""Success rate and SPL over a gamma sweep for both scene difficulties.

Equivalent to `uncmap eval --difficulty complex,simple`, but also prints
a per-outcome breakdown, which helps when tuning the synthetic scenes.
"""

import argparse
from collections import Counter

from uncmap.nav import COMPLEX, SIMPLE, evaluate


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--episodes", type=int, default=100)
    ap.add_argument("--gammas", type=float, nargs="+", default=[1.0, 0.8, 0.6, 0.4, 0.2, 0.0])
    ap.add_argument("--difficulty", nargs="+", default=[COMPLEX, SIMPLE])
    args = ap.parse_args()
    print("gamma,difficulty,SR,SPL,outcomes")
    for diff in args.difficulty:
        rows, runs = evaluate(args.episodes, diff, args.gammas)
        for r in rows:
            outcomes = Counter(e.outcome for e in runs[r.gamma])
            detail = " ".join(f"{k}={v}" for k, v in sorted(outcomes.items()))
            print(f"{r.gamma},{diff},{r.sr:.3f},{r.spl:.3f},{detail}", flush=True)


if __name__ == "__main__":
    main()
