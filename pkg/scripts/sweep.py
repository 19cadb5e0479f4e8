"""Seed sweep of one adversary scenario.

Identities and tunnels are provisioned once (fixed provisioning seed) and
reused; each seed varies the traffic, node DRBGs and the adversary's
choices. One CSV row per seed, then a totals line.

    python scripts/sweep.py ForgeFalcon --seeds 1000 --set forge_variant=tamper
    python scripts/sweep.py StolenEcdsaKeys --seeds 1000
"""

import argparse
import csv
import sys
import time
from collections import Counter
from pathlib import Path

from pqchain.sim import SCENARIOS, ScenarioConfig, run, spawn_network

COLUMNS = ("seed", "status", "txs_originated", "txs_finalized", "adversarial_txs", "adversarial_txs_finalized",
           "adversarial_blocks", "adversarial_blocks_finalized", "chains_consistent")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("scenario", choices=SCENARIOS)
    ap.add_argument("--seeds", type=int, default=1000)
    ap.add_argument("--first", type=int, default=0)
    ap.add_argument("--provision-seed", type=int, default=0)
    ap.add_argument("--tx-count", type=int, default=1)
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    ap.add_argument("--out", help="CSV path (default results/sweep-<scenario>.csv)")
    args = ap.parse_args()

    base = ScenarioConfig(provision_seed=args.provision_seed, tx_count=args.tx_count,
                          adversaries=(args.scenario,)).with_overrides(args.set)
    out = Path(args.out or f"results/sweep-{args.scenario}.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    totals, notes = Counter(), Counter()
    t0 = time.perf_counter()
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(COLUMNS)
        for seed in range(args.first, args.first + args.seeds):
            s = run(spawn_network(base.replace(seed=seed)))
            w.writerow([s[c] for c in COLUMNS])
            for c in COLUMNS[2:]:
                totals[c] += int(s[c])
            notes.update({k: v for k, v in s["counters"].items() if k.startswith("adversary:")})
    dt = time.perf_counter() - t0
    print(f"{args.seeds} seeds in {dt:.1f}s ({1000 * dt / max(args.seeds, 1):.0f} ms/seed)")
    for c in COLUMNS[2:]:
        print(f"  {c:<30} {totals[c]}")
    for k, v in sorted(notes.items()):
        print(f"  {k:<50} {v}")
    bad = totals["adversarial_txs_finalized"] + totals["adversarial_blocks_finalized"]
    print(f"wrote {out}")
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())
