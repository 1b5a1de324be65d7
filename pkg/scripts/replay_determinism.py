"""Run a scripted workload twice from genesis and compare digests of every artifact."""

import argparse
import hashlib
import json

from chainabac import costsim
from chainabac.amf import audit_csv
from chainabac.ledger import Ledger
from chainabac.scenarios import load_smart_home, run_workload
from chainabac.system import System


def run(n_tx, seed):
    system = System.create()
    load_smart_home(system)
    run_workload(system, n_tx, seed=seed, mine_every=5)
    ledger = system.ledger
    artifacts = {
        "chain": ledger.to_bytes(),
        "export": json.dumps(ledger.export_json(), sort_keys=True).encode(),
        "audit": audit_csv(system.amf.audit()).encode(),
        "report": costsim.emit_report(costsim.table_rows()),
    }
    replayed = Ledger.replay(ledger.blocks, ledger.admin, ledger.schedule, ledger.code_weights)
    artifacts["replayed_chain"] = replayed.to_bytes()
    return {k: hashlib.sha256(v).hexdigest()[:16] for k, v in artifacts.items()}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n-tx", type=int, default=500)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    a, b = run(args.n_tx, args.seed), run(args.n_tx, args.seed)
    for key in a:
        print(f"{key:15s} {a[key]} {b[key]} {'same' if a[key] == b[key] else 'DIFFERENT'}")
    print("replay matches original:", a["chain"] == a["replayed_chain"])


if __name__ == "__main__":
    main()
