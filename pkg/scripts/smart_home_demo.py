"""Load the smart-home fixture, issue a few requests and print tickets and the audit table."""

from chainabac.amf import AccessRequest, EnvironmentSnapshot, audit_csv
from chainabac.attributes import Kind
from chainabac.identity import keypair
from chainabac.scenarios import load_smart_home
from chainabac.system import System

REQUESTS = [
    ("123", "112", "Read", "NonMalicious"),
    ("123", "112", "Write", "NonMalicious"),
    ("500", "167", "Write", "NonMalicious"),
    ("500", "167", "Write", "Malicious"),
]


def main():
    system = System.create()
    fx = load_smart_home(system)
    amf = system.amf
    for sid, oid, action, behaviour in REQUESTS:
        attrs = system.ama.query_attributes(Kind.SUBJECT, sid)
        req = AccessRequest.create(fx.subjects[sid].private, sid, attrs, oid, action)
        env = EnvironmentSnapshot.build(10, "West.AUS", {oid: behaviour}, {oid: "Auth"})
        t = amf.submit_request(req, env)
        print(f"{sid} -> {oid} {action:5s} [{behaviour}]: {t.decision.value} {t.pid or '-'} "
              f"(verifies: {amf.verify_ticket(t)})")

    # a forged request blocks the subject until an admin unblocks it
    forged = AccessRequest.create(keypair("intruder").private, "321", [], "325", "Read")
    t = amf.submit_request(forged, EnvironmentSnapshot.build(10, "East.AUS", {"325": "Malicious"}, {"325": "Auth"}))
    print(f"forged 321 -> 325: {t.decision.value}, action taken {t.action_taken.value}")
    system.amf.unblock_subject("321")

    print()
    print(audit_csv(amf.audit()), end="")
    print(f"\nheight {system.ledger.height}, chain verifies: {system.ledger.verify_chain()}")


if __name__ == "__main__":
    main()
