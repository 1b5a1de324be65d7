"""Fixtures and scripted workloads that drive a :class:`System`."""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from importlib import resources

from .ama import EnvironmentRecord, ObjectRecord, SubjectRecord
from .amf import AccessRequest, EnvironmentSnapshot
from .attributes import Attribute, Kind
from .identity import KeyPair, keypair
from .pma import Action, Policy
from .system import System


def load_fixture(name: str = "smart_home") -> dict:
    return json.loads(resources.files("chainabac.data").joinpath(f"{name}.json").read_text())


def _expand(value, aliases: dict[str, str]):
    if isinstance(value, str):
        return aliases.get(value.lower(), value)
    if isinstance(value, list):
        return [_expand(v, aliases) for v in value]
    if isinstance(value, dict):
        return {k: _expand(v, aliases) for k, v in value.items()}
    return value


@dataclass
class Fixture:
    subjects: dict[str, KeyPair] = field(default_factory=dict)
    devices: dict[str, KeyPair] = field(default_factory=dict)
    policies: list[Policy] = field(default_factory=list)
    receipts: list = field(default_factory=list)


def load_smart_home(system: System, data: dict | None = None) -> Fixture:
    """Register the fixture's records and policies, one block per transaction."""
    data = data or load_fixture()
    aliases = {short: keypair(seed).address.hex() for short, seed in data.get("address_aliases", {}).items()}
    fx = Fixture()
    ama, pma = system.ama, system.pma
    for entry in data["subjects"]:
        keys = keypair(entry["seed"])
        fx.subjects[entry["id"]] = keys
        rec = SubjectRecord.build(entry["id"], keys.address, _expand(entry["attributes"], aliases))
        fx.receipts.append(ama.register_subject(rec).raise_for_status())
    for entry in data["objects"]:
        keys = keypair(entry["seed"])
        fx.devices[entry["id"]] = keys
        rec = ObjectRecord.build(entry["id"], keys.address, _expand(entry["attributes"], aliases))
        fx.receipts.append(ama.register_object(rec, keys.private).raise_for_status())
    for entry in data.get("environments", []):
        rec = EnvironmentRecord.build(entry["id"], _expand(entry["attributes"], aliases))
        fx.receipts.append(ama.register_environment(rec).raise_for_status())
    for entry in data["policies"]:
        p = Policy.from_json(_expand(entry, aliases))
        fx.policies.append(p)
        fx.receipts.append(pma.add_policy(p).raise_for_status())
    return fx


# -- synthetic workload ----------------------------------------------------

LOCATIONS = ("East.AUS", "West.AUS", "North.AUS", "South.AUS")
ROLES = ("User", "Admin", "Guest")
DEVICE_NAMES = ("Lock", "Thermostat", "Camera", "Light", "Alarm")
DEVICE_TYPES = ("Security", "Appliance", "Sensor")


def run_workload(system: System, n_tx: int, seed: int = 0, mine_every: int = 1) -> list:
    """Drive ``n_tx`` mixed transactions (registrations, policies, requests).

    Deterministic for a given seed. Returns the list of receipts/tickets.
    """
    rng = random.Random(seed)
    ama, pma, amf = system.ama, system.pma, system.amf
    subjects: dict[str, KeyPair] = {}
    objects: list[str] = []
    pids: list[str] = []
    out = []
    pending = 0

    def flush():
        nonlocal pending
        if pending:
            system.ledger.mine_block()
            pending = 0

    for i in range(n_tx):
        roll = rng.random()
        if not subjects or roll < 0.2:
            sid = f"s{i}"
            keys = keypair(f"workload-{seed}-subject-{i}")
            subjects[sid] = keys
            rec = SubjectRecord.build(sid, keys.address, {
                "Name": f"user{i}", "Role": rng.choice(ROLES), "Location": rng.choice(LOCATIONS)})
            out.append(ama.register_subject(rec, mine=False))
        elif not objects or roll < 0.4:
            oid = f"o{i}"
            keys = keypair(f"workload-{seed}-device-{i}")
            objects.append(oid)
            rec = ObjectRecord.build(oid, keys.address, {
                "Obj.Name": rng.choice(DEVICE_NAMES), "Obj.Type": rng.choice(DEVICE_TYPES)})
            out.append(ama.register_object(rec, keys.private, mine=False))
        elif roll < 0.5:
            rec = EnvironmentRecord.build(f"zone{i}", {"Sub.location": rng.choice(LOCATIONS),
                                                        "Obj.behaviour": rng.choice(("Malicious", "NonMalicious"))})
            out.append(ama.register_environment(rec, mine=False))
        elif not pids or roll < 0.65:
            pid = f"P{i}"
            pids.append(pid)
            subject = {"Role": rng.choice(ROLES)} if rng.random() < 0.5 else {"Location": rng.choice(LOCATIONS)}
            p = Policy.build(pid, subject, {"Obj.Type": rng.choice(DEVICE_TYPES)},
                             {"Sub.location": rng.choice(LOCATIONS)},
                             rng.sample([a.value for a in Action], rng.randint(1, 3)))
            out.append(pma.add_policy(p, mine=False))
        elif roll < 0.7:
            out.append(pma.update_policy(rng.choice(pids), rng.sample([a.value for a in Action], 2), mine=False))
        else:
            flush()  # requests observe sealed registrations
            sid = rng.choice(sorted(subjects))
            oid = rng.choice(objects)
            keys = subjects[sid]
            signer = keys if rng.random() < 0.95 else keypair(f"forger-{i}")
            attrs = system.ama.query_attributes(Kind.SUBJECT, sid) or ()
            req = AccessRequest.create(signer.private, sid, attrs, oid, rng.choice(list(Action)))
            env = EnvironmentSnapshot.build(i, rng.choice(LOCATIONS),
                                            {oid: rng.choice(("Malicious", "NonMalicious"))},
                                            {oid: rng.choice(("Auth", "Non.Auth"))})
            out.append(amf.enqueue_request(req, env))
        pending += 1
        if pending >= mine_every:
            flush()
    flush()
    return out


def run_operation_mix(system: System, rounds: int = 3, seed: int = 0) -> list:
    """Register, update and revoke records and policies so every op class has samples."""
    rng = random.Random(seed)
    ama, pma = system.ama, system.pma
    out = []
    for r in range(rounds):
        sid, oid, pid = f"mix-s{seed}-{r}", f"mix-o{seed}-{r}", f"MIX{seed}-{r}"
        subject = keypair(f"mix-{seed}-subject-{r}")
        device = keypair(f"mix-{seed}-device-{r}")
        out.append(ama.register_subject(SubjectRecord.build(sid, subject.address, {
            "Name": f"user{r}", "Role": rng.choice(ROLES), "Location": rng.choice(LOCATIONS)})))
        out.append(ama.register_object(ObjectRecord.build(oid, device.address, {
            "Obj.Name": rng.choice(DEVICE_NAMES), "Obj.Type": rng.choice(DEVICE_TYPES)}), device.private))
        out.append(pma.add_policy(Policy.build(pid, {"Role": rng.choice(ROLES)}, {"OID": oid},
                                               {"Sub.location": rng.choice(LOCATIONS)}, ["Read"])))
        out.append(ama.update_attribute(Kind.SUBJECT, sid, Attribute("Location", rng.choice(LOCATIONS))))
        out.append(ama.update_attribute(Kind.OBJECT, oid, Attribute("Obj.Type", rng.choice(DEVICE_TYPES)),
                                        device.private))
        out.append(pma.update_policy(pid, ["Read", "Write"]))
        out.append(ama.revoke_record(Kind.SUBJECT, sid))
        out.append(ama.revoke_record(Kind.OBJECT, oid))
        out.append(pma.revoke_policy(pid))
    return out
