import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from chainabac.pma import Action, Policy, PolicyError, export_policies, filter_policies, import_policies


def make(pid="P1", actions=("Read",), **kw):
    return Policy.build(pid, kw.get("subject", {"Role": "User"}), kw.get("object", {"Obj.Type": "Lock"}),
                        kw.get("environment", {}), actions)


def test_build_canonicalizes():
    p = Policy.build("P1", {"role": "User"}, {"obj.type": "Lock"}, {"auth.status": "auth"}, ["write", "Read"])
    assert p.actions == (Action.READ, Action.WRITE)
    assert p.environment[0].value == "Auth"
    assert p.subject[0].name == "Role"


@pytest.mark.parametrize("kwargs,reason", [
    ({"subject": {"Colour": "red"}}, "UnknownAttributeName"),
    ({"environment": {"Time": "9-1"}}, "MalformedPolicy"),
    ({"actions": ()}, "EmptyActions"),
    ({"actions": ("Fly",)}, "MalformedPolicy"),
    ({"subject": {}, "object": {}}, "MalformedPolicy"),
])
def test_build_errors(kwargs, reason):
    with pytest.raises(PolicyError) as err:
        make(**kwargs)
    assert err.value.reason == reason


def test_add_search_list(system):
    pma = system.pma
    assert pma.add_policy(make("P2")).ok
    assert pma.add_policy(make("P10", subject={"Role": "Admin"})).ok
    assert pma.add_policy(make("P1", ("Read", "Execute"))).ok
    assert [p.pid for p in pma.list_policies()] == ["P1", "P2", "P10"]
    assert pma.search_policy("P10").subject[0].value == "Admin"
    assert pma.search_policy("missing") is None


def test_duplicate_pid(system):
    system.pma.add_policy(make())
    assert system.pma.add_policy(make()).reason == "DuplicatePid"


def test_update_and_revoke(system):
    pma = system.pma
    pma.add_policy(make())
    assert pma.update_policy("P1", ["Write"]).ok
    assert pma.search_policy("P1").actions == (Action.WRITE,)
    assert pma.update_policy("P1", []).reason == "EmptyActions"
    assert pma.update_policy("P9", ["Read"]).reason == "NotFound"
    assert pma.revoke_policy("P1").ok
    assert pma.search_policy("P1") is None
    assert pma.revoke_policy("P1").reason == "AlreadyRevoked"
    assert pma.update_policy("P1", ["Read"]).reason == "NotFound"
    assert pma.list_policies() == []


def test_revoked_pid_not_reusable(system):
    system.pma.add_policy(make())
    system.pma.revoke_policy("P1")
    assert system.pma.add_policy(make()).reason == "DuplicatePid"


def test_filter():
    ps = [make("P1"), make("P2", subject={"Role": "Admin"}), make("P3", environment={"Auth.status": "Auth"})]
    assert [p.pid for p in filter_policies(ps, "Role=Admin")] == ["P2"]
    assert [p.pid for p in filter_policies(ps, "role")] == ["P1", "P2", "P3"]
    assert [p.pid for p in filter_policies(ps, "Auth.status")] == ["P3"]
    assert filter_policies(ps, None) == ps


def test_export_is_canonical_and_roundtrips():
    ps = [make("P10"), make("P2", ("Write", "Read"))]
    data = export_policies(ps)
    assert data.endswith(b"\n")
    assert [e["pid"] for e in json.loads(data)] == ["P2", "P10"]
    assert sorted(import_policies(data), key=lambda p: p.pid) == sorted(ps, key=lambda p: p.pid)
    assert export_policies(reversed(ps)) == data


def test_loaded_fixture_policies(smart_home):
    system, fx = smart_home
    listed = system.pma.list_policies()
    assert [p.pid for p in listed] == ["P1", "P2", "P3", "P4", "P5"]
    p1 = system.pma.search_policy("P1")
    assert p1.to_json() == {"pid": "P1", "subject": {"SID": "123"}, "object": {"OID": "112"},
                            "environment": {"Sub.location": "West.AUS"}, "actions": ["Read"]}


action_sets = st.lists(st.sampled_from(["Read", "Write", "Execute"]), min_size=1, max_size=3)


@given(actions=action_sets, role=st.sampled_from(["User", "Admin", "Guest"]))
def test_json_roundtrip(actions, role):
    p = make("P7", actions, subject={"Role": role}, environment={"Time": "3-9"})
    assert Policy.from_json(json.loads(json.dumps(p.to_json()))) == p
