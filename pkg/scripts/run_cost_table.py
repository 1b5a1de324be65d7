"""Print the nine scheme x case cost rows; ``--measure`` adds live-ledger gas."""

import argparse
import sys

from chainabac import costsim


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--format", choices=("csv", "json"), default="csv")
    ap.add_argument("--measure", action="store_true")
    args = ap.parse_args()
    rows = costsim.table_rows(measure=args.measure)
    sys.stdout.write(costsim.emit_report(rows, args.format).decode())


if __name__ == "__main__":
    main()
