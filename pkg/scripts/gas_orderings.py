"""Exercise every operation class and print mean gas plus the ordering verdicts."""

import argparse

from chainabac import costsim
from chainabac.scenarios import run_operation_mix
from chainabac.system import System


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--rounds", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    system = System.create()
    run_operation_mix(system, rounds=args.rounds, seed=args.seed)
    trace = system.ledger.trace()
    for name, gas in costsim.class_means(trace).items():
        print(f"{name:20s} {gas:12.1f}")
    print()
    for label, ok in costsim.gas_ordering_report(trace).items():
        print(f"{'ok ' if ok else 'BAD'} {label}")


if __name__ == "__main__":
    main()
