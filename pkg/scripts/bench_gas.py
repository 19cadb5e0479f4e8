"""Gas for verifying every Falcon-512 KAT signature under each backend.

Writes one CSV with the metered, flat and precompile-table rows and prints
a short summary. The metered figure is raw interpreter work times the
configured interpretation overhead; raw work is reported alongside.
"""

import argparse
import statistics
from pathlib import Path

from pqchain.crypto.falcon.kat import load_sign_kat
from pqchain.keyfile import write_atomic
from pqchain.pipeline import BLOCK_GAS_LIMIT, Backend, Charging, GasModel, bench_verify, gas_csv

DEFAULT_KAT = Path(__file__).resolve().parent.parent / "tests" / "vectors" / "falcon512_sign_kat.txt"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--kat", default=str(DEFAULT_KAT))
    ap.add_argument("--overhead", type=int, default=GasModel().interpretation_overhead,
                    help="gas per unit of raw interpreter work")
    ap.add_argument("--out", default="results/gas.csv")
    args = ap.parse_args()

    model = GasModel(interpretation_overhead=args.overhead)
    vecs = [(v.index, v.message, v.signature, v.public_key()) for v in load_sign_kat(args.kat)]
    rows = bench_verify(vecs, Backend.METERED, gas_model=model)
    rows += bench_verify(vecs, Backend.NATIVE, Charging.OPCODE_FLAT, model)
    rows += bench_verify(vecs, Backend.NATIVE, Charging.PRECOMPILE_TABLE, model)
    write_atomic(args.out, gas_csv(rows))

    for mode in ("Interpreted", Charging.OPCODE_FLAT.value, Charging.PRECOMPILE_TABLE.value):
        gas = [r.gas for r in rows if r.charging == mode]
        print(f"{mode:<16} mean {statistics.mean(gas):>14,.0f}  max {max(gas):>14,}  "
              f"x{max(gas) / BLOCK_GAS_LIMIT:.3g} of block limit")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
