"""Random ABAC worlds deployed on a fresh ledger, plus batched request runs."""

from __future__ import annotations

import random
from dataclasses import dataclass, field

import oracles
from chainabac.ama import ObjectRecord, SubjectRecord
from chainabac.amf import AccessRequest, EnvironmentSnapshot, LookupEntry
from chainabac.identity import KeyPair, keypair
from chainabac.pma import Policy
from chainabac.system import System

NAMES = ("ann", "bob", "cy")
ROLES = ("User", "Admin", "Guest")
LOCATIONS = ("East", "West", "North")
DEV_NAMES = ("Lock", "Cam", "Bulb")
DEV_TYPES = ("Security", "Appliance")
BEHAVIOURS = ("Malicious", "NonMalicious")
AUTH = ("Auth", "Non.Auth")
ACTIONS = ("Read", "Write", "Execute")


@dataclass
class World:
    system: System
    subjects: dict[str, KeyPair] = field(default_factory=dict)
    objects: list[str] = field(default_factory=list)
    registered: dict[str, list[tuple[str, str]]] = field(default_factory=dict)


def _subject_constraints(rng, world: World):
    pool = [("Name", v) for v in NAMES] + [("Role", v) for v in ROLES] + [("Location", v) for v in LOCATIONS]
    sids = sorted(world.subjects)
    pool += [("SID", s) for s in sids] + [("EAddr", world.subjects[s].address.hex()) for s in sids]
    return rng.sample(pool, rng.randint(0, 2))


def _object_constraints(rng, world: World):
    pool = [("Obj.Name", v) for v in DEV_NAMES] + [("Obj.Type", v) for v in DEV_TYPES]
    pool += [("OID", o) for o in world.objects]
    return rng.sample(pool, rng.randint(0, 2))


def _env_constraints(rng):
    out = []
    if rng.random() < 0.4:
        a = rng.randint(0, 15)
        out.append(("Time", f"{a}-{a + rng.randint(0, 10)}"))
    if rng.random() < 0.4:
        out.append(("Sub.location", rng.choice(LOCATIONS)))
    if rng.random() < 0.3:
        out.append(("Obj.behaviour", rng.choice(BEHAVIOURS)))
    if rng.random() < 0.3:
        out.append(("Auth.status", rng.choice(AUTH)))
    return out


def build_world(rng: random.Random, max_policies: int = 20) -> World:
    system = System.create()
    world = World(system)
    ledger = system.ledger
    for i in range(rng.randint(1, 5)):
        sid = f"s{i}"
        keys = keypair(f"world-subject-{rng.random()}")
        attrs = [("Name", rng.choice(NAMES)), ("Location", rng.choice(LOCATIONS))]
        attrs += [("Role", r) for r in rng.sample(ROLES, rng.randint(1, 2))]
        world.subjects[sid] = keys
        world.registered[sid] = attrs
        system.ama.register_subject(SubjectRecord.build(sid, keys.address, attrs), mine=False)
    for i in range(rng.randint(1, 4)):
        oid = f"o{i}"
        dev = keypair(f"world-device-{rng.random()}")
        world.objects.append(oid)
        rec = ObjectRecord.build(oid, dev.address, {"Obj.Name": rng.choice(DEV_NAMES), "Obj.Type": rng.choice(DEV_TYPES)})
        system.ama.register_object(rec, dev.private, mine=False)
    ledger.mine_block()
    pids = []
    for i in range(rng.randint(0, max_policies)):
        subj, obj, env = _subject_constraints(rng, world), _object_constraints(rng, world), _env_constraints(rng)
        if not (subj or obj or env):
            env = [("Sub.location", rng.choice(LOCATIONS))]
        pid = f"P{i + 1}"
        p = Policy.build(pid, subj, obj, env, rng.sample(ACTIONS, rng.randint(1, 3)))
        system.pma.add_policy(p, mine=False)
        pids.append(pid)
    ledger.mine_block()
    for pid in pids:
        roll = rng.random()
        if roll < 0.15:
            system.pma.revoke_policy(pid, mine=False)
        elif roll < 0.3:
            system.pma.update_policy(pid, rng.sample(ACTIONS, rng.randint(1, 3)), mine=False)
    ledger.mine_block()
    return world


def random_request(rng: random.Random, world: World):
    sid = rng.choice(sorted(world.subjects))
    oid = rng.choice(world.objects + ["ghost"]) if rng.random() < 0.1 else rng.choice(world.objects)
    registered = world.registered[sid]
    claimed = rng.sample(registered, rng.randint(0, len(registered)))
    action = rng.choice(ACTIONS)
    req = AccessRequest.create(world.subjects[sid].private, sid, claimed, oid, action)
    env = EnvironmentSnapshot.build(rng.randint(0, 25), rng.choice(LOCATIONS),
                                    {oid: rng.choice(BEHAVIOURS)}, {oid: rng.choice(AUTH)})
    return req, env


def run_batch(world: World, requests) -> list[LookupEntry]:
    """Queue every request, seal one block, return the entries in order."""
    amf = world.system.amf
    hashes = [amf.enqueue_request(req, env) for req, env in requests]
    world.system.ledger.mine_block()
    return [LookupEntry.from_json(world.system.ledger.receipt(h).event("LookupEntry")) for h in hashes]


def oracle_decision(world: World, req: AccessRequest, env: EnvironmentSnapshot):
    subject, obj, policies = oracles.world_state(world.system, req.oid, req.subject_sid)
    return oracles.brute_force(policies, req.requested_action.value, env.to_json(), req.oid, subject, obj)
