import csv
import io
import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
import worlds
from chainabac.amf import (
    AUDIT_COLUMNS,
    AccessRequest,
    AccessTicket,
    ActionTaken,
    Decision,
    EnvironmentSnapshot,
    IncompleteSnapshot,
    audit_csv,
    audit_json,
    decide,
    entries_from_chain,
    verify_ticket,
)
from chainabac.attributes import Attribute, Kind
from chainabac.identity import keypair
from chainabac.pma import Action, Policy


def env_for(oid, now=50, location="West.AUS", behaviour="NonMalicious", auth="Auth"):
    return EnvironmentSnapshot.build(now, location, {oid: behaviour}, {oid: auth})


def request(system_fx, sid, oid, action, signer=None, claimed=None):
    system, fx = system_fx
    keys = signer or fx.subjects[sid]
    attrs = claimed if claimed is not None else system.ama.query_attributes(Kind.SUBJECT, sid)
    return AccessRequest.create(keys.private, sid, attrs, oid, action)


# -- golden requests on the smart-home fixture --------------------------------


GOLDEN = [
    ("123", "112", "Read", {}, Decision.APPROVED, "P1"),
    ("123", "112", "Write", {}, Decision.DENIED, None),
    ("500", "167", "Write", {"behaviour": "NonMalicious", "auth": "Auth"}, Decision.APPROVED, "P3"),
    ("500", "167", "Write", {"behaviour": "Malicious", "auth": "Auth"}, Decision.DENIED, None),
]


@pytest.mark.parametrize("sid,oid,action,env_kw,decision,pid", GOLDEN)
def test_golden_decisions(smart_home, sid, oid, action, env_kw, decision, pid):
    system, _ = smart_home
    ticket = system.amf.submit_request(request(smart_home, sid, oid, action), env_for(oid, **env_kw))
    assert (ticket.decision, ticket.pid, ticket.action_taken) == (decision, pid, ActionTaken.NONE)
    assert system.amf.verify_ticket(ticket)


def test_incomplete_snapshot_refused_off_chain(smart_home):
    system, _ = smart_home
    height = system.ledger.height
    with pytest.raises(IncompleteSnapshot):
        system.amf.submit_request(request(smart_home, "123", "112", "Read"), EnvironmentSnapshot.build(1, "West.AUS"))
    assert system.ledger.height == height


def test_unknown_subject_is_blocked(smart_home):
    system, _ = smart_home
    req = AccessRequest.create(keypair("nobody").private, "999", [], "112", "Read")
    t = system.amf.submit_request(req, env_for("112"))
    assert (t.decision, t.action_taken) == (Decision.DENIED, ActionTaken.BLOCKED)


def test_bad_signature_blocks_until_unblocked(smart_home):
    system, _ = smart_home
    amf = system.amf
    forged = request(smart_home, "123", "112", "Read", signer=keypair("forger"))
    t = amf.submit_request(forged, env_for("112"))
    assert (t.decision, t.action_taken) == (Decision.DENIED, ActionTaken.BLOCKED)
    assert amf.is_blocked("123")
    # even a valid request is refused while blocked
    t = amf.submit_request(request(smart_home, "123", "112", "Read"), env_for("112"))
    assert t.action_taken is ActionTaken.BLOCKED and t.decision is Decision.DENIED
    assert amf.unblock_subject("123").ok
    t = amf.submit_request(request(smart_home, "123", "112", "Read"), env_for("112"))
    assert t.decision is Decision.APPROVED


def test_claimed_attributes_must_be_registered(smart_home):
    system, _ = smart_home
    req = request(smart_home, "123", "112", "Read", claimed=[("Role", "Admin")])
    t = system.amf.submit_request(req, env_for("112"))
    assert t.action_taken is ActionTaken.BLOCKED


def test_policy_denial_does_not_block(smart_home):
    system, _ = smart_home
    system.amf.submit_request(request(smart_home, "123", "112", "Write"), env_for("112"))
    assert not system.amf.is_blocked("123")


def test_admin_entries_have_no_decision(smart_home):
    system, _ = smart_home
    system.amf.block_subject("145")
    system.amf.unblock_subject("145")
    entries = system.amf.audit(sid="145")
    assert [(e.decision, e.action_taken) for e in entries] == [(None, ActionTaken.BLOCKED), (None, ActionTaken.NONE)]


def test_block_requires_known_subject(system):
    assert system.amf.block_subject("ghost").reason == "UnknownSubject"


def test_only_operator_relays(smart_home):
    system, fx = smart_home
    from chainabac.ledger import Account
    rogue = Account.from_seed("rogue")
    req = request(smart_home, "123", "112", "Read")
    rc = rogue.send(system.ledger, system.contracts["AccessManagement"], "submit_request",
                    {"request": req.to_json(), "env": env_for("112").to_json()})
    assert rc.reason == "Unauthorized"


def test_revoked_policy_stops_granting(smart_home):
    system, _ = smart_home
    system.pma.revoke_policy("P1")
    t = system.amf.submit_request(request(smart_home, "123", "112", "Read"), env_for("112"))
    assert (t.decision, t.pid) == (Decision.APPROVED, "P2")
    system.pma.revoke_policy("P2")
    t = system.amf.submit_request(request(smart_home, "123", "112", "Read"), env_for("112"))
    assert (t.decision, t.pid) == (Decision.DENIED, None)


def test_revoked_subject_is_unknown(smart_home):
    system, _ = smart_home
    system.ama.revoke_record(Kind.SUBJECT, "123")
    t = system.amf.submit_request(request(smart_home, "123", "112", "Read", claimed=[]), env_for("112"))
    assert t.action_taken is ActionTaken.BLOCKED


def test_ticket_tampering_detected(smart_home):
    system, _ = smart_home
    t = system.amf.submit_request(request(smart_home, "123", "112", "Write"), env_for("112"))
    forged = AccessTicket(t.sid, "P1", Decision.APPROVED, t.action_taken, t.amf_signature)
    assert not system.amf.verify_ticket(forged)
    assert system.amf.verify_ticket(AccessTicket.from_json(json.loads(json.dumps(t.to_json()))))
    # a well-signed ticket with no matching lookup entry is refused too
    other = system.amf._ticket({"sequence": 99, "sid": "145", "pid": "P5", "decision": "Approved",
                                "action_taken": "None", "tx_hash": "00"})
    assert not system.amf.verify_ticket(other)
    assert not verify_ticket(t, keypair("someone").public, system.amf.audit())


def test_audit_serializations(smart_home):
    system, _ = smart_home
    for sid, oid, action, env_kw, *_ in GOLDEN:
        system.amf.submit_request(request(smart_home, sid, oid, action), env_for(oid, **env_kw))
    entries = system.amf.audit()
    rows = list(csv.DictReader(io.StringIO(audit_csv(entries))))
    assert tuple(rows[0]) == AUDIT_COLUMNS
    assert [r["decision"] for r in rows] == ["Approved", "Denied", "Approved", "Denied"]
    assert json.loads(audit_json(entries))[2]["pid"] == "P3"
    assert [e.sequence for e in entries] == [1, 2, 3, 4]
    assert entries_from_chain(system.ledger, system.contracts["AccessManagement"]) == entries
    assert [e.sid for e in system.amf.audit(decision="Denied")] == ["123", "500"]


def test_permit_overrides_cites_lowest_pid():
    ps = [Policy.build(pid, {"Role": "User"}, {}, {}, ["Read"]) for pid in ("P10", "P2", "P33")]
    subject = [Attribute("Role", "User")]
    env = EnvironmentSnapshot.build(0, "", {"o": "Malicious"}, {"o": "Auth"})
    assert decide(ps, Action.READ, env, "o", subject, []) == (Decision.APPROVED, "P2")
    assert decide(ps, Action.WRITE, env, "o", subject, []) == (Decision.DENIED, None)
    assert decide(ps, Action.READ, env, "o", subject, None) == (Decision.DENIED, None)


def test_time_window_bounds_inclusive():
    p = Policy.build("P1", {}, {}, {"Time": "5-9"}, ["Read"])
    for now, expected in ((4, Decision.DENIED), (5, Decision.APPROVED), (9, Decision.APPROVED), (10, Decision.DENIED)):
        env = EnvironmentSnapshot.build(now, "", {"o": "Malicious"}, {"o": "Auth"})
        assert decide([p], Action.READ, env, "o", [], [])[0] is expected


def test_request_json_roundtrip(smart_home):
    req = request(smart_home, "123", "112", "Read")
    assert AccessRequest.from_json(json.loads(json.dumps(req.to_json()))) == req


# -- property: in-process decide agrees with the brute-force oracle -----------

names = st.sampled_from([("Role", "User"), ("Role", "Admin"), ("Location", "East"), ("Location", "West"),
                         ("Name", "ann"), ("SID", "s1")])
objs = st.sampled_from([("Obj.Type", "Lock"), ("Obj.Type", "Cam"), ("OID", "o1"), ("Obj.Name", "x")])
envs = st.sampled_from([("Time", "0-5"), ("Time", "3-9"), ("Sub.location", "East"), ("Obj.behaviour", "Malicious"),
                        ("Auth.status", "Auth"), ("Auth.status", "Non.Auth")])


@st.composite
def policy_sets(draw):
    out = []
    for i in range(draw(st.integers(0, 20))):
        subj = draw(st.lists(names, max_size=5, unique=True))
        obj = draw(st.lists(objs, max_size=5, unique=True))
        env = draw(st.lists(envs, max_size=5, unique=True))
        if not (subj or obj or env):
            subj = [("Role", "User")]
        acts = draw(st.lists(st.sampled_from(["Read", "Write", "Execute"]), min_size=1, max_size=3, unique=True))
        out.append(Policy.build(f"P{i + 1}", subj, obj, env, acts))
    return out


@settings(max_examples=300, deadline=None)
@given(policies=policy_sets(), subject=st.sets(names, max_size=4), obj=st.sets(objs, max_size=3),
       action=st.sampled_from(list(Action)), now=st.integers(0, 12),
       loc=st.sampled_from(["East", "West"]), beh=st.sampled_from(["Malicious", "NonMalicious"]),
       auth=st.sampled_from(["Auth", "Non.Auth"]))
def test_decide_matches_oracle(policies, subject, obj, action, now, loc, beh, auth):
    env = EnvironmentSnapshot.build(now, loc, {"o1": beh}, {"o1": auth})
    got = decide(policies, action, env, "o1", [Attribute(*a) for a in subject], [Attribute(*a) for a in obj])
    plain = [dict(p.to_json(), status=p.status, subject=[(a.name, a.value) for a in p.subject],
                  object=[(a.name, a.value) for a in p.object],
                  environment=[(a.name, a.value) for a in p.environment]) for p in policies]
    want = oracles.brute_force(plain, action.value, env.to_json(), "o1", set(subject), set(obj))
    assert (got[0].value, got[1]) == want


def test_on_chain_decisions_match_oracle_small():
    rng = random.Random(11)
    for _ in range(3):
        world = worlds.build_world(rng)
        reqs = [worlds.random_request(rng, world) for _ in range(30)]
        for (req, env), entry in zip(reqs, worlds.run_batch(world, reqs)):
            assert (entry.decision.value, entry.pid) == worlds.oracle_decision(world, req, env)
