"""One honest scenario (default 1 writer, 4 validators, 1 observer, 200 txs).

Artifacts (metrics, decision logs, chain snapshot) go to --out.
"""

import argparse
import json
import time

from pqchain.sim import ScenarioConfig, run, spawn_network, write_artifacts


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", help="scenario file; flags below override it")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    ap.add_argument("--out", default="results/honest")
    args = ap.parse_args()

    cfg = ScenarioConfig.load(args.config) if args.config else ScenarioConfig(tx_count=200)
    cfg = cfg.with_overrides(args.set)
    t0 = time.perf_counter()
    sim = spawn_network(cfg)
    t1 = time.perf_counter()
    summary = run(sim)
    t2 = time.perf_counter()
    write_artifacts(sim, args.out)
    keys = ("status", "height", "txs_originated", "txs_finalized", "chains_consistent", "events")
    print(json.dumps({k: summary[k] for k in keys}))
    print(f"provision {t1 - t0:.1f}s, run {t2 - t1:.1f}s; artifacts in {args.out}")


if __name__ == "__main__":
    main()
