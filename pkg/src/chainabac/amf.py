"""Access management: request validation, ABAC evaluation, tickets and the lookup table.

The ``AccessManagement`` contract decides every request on-chain and appends a
lookup entry; the off-chain :class:`AccessManagementFramework` relays signed
requests to it and signs the resulting access tickets with the AMF key.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping

from . import identity
from .attributes import (
    AUTH_STATES,
    BEHAVIOURS,
    Attribute,
    Kind,
    MalformedAttribute,
    attribute_set,
    canonical_auth,
    canonical_behaviour,
    from_pairs,
    natural_key,
    parse_window,
    to_pairs,
)
from .identity import Address, KeyPair, PrivateKey, PublicKey, Signature
from .ledger import Account, Context, Contract, Ledger, reject
from .ledger.codec import canonical_json
from .ledger.contract import register_contract
from .pma import ACTIVE as POLICY_ACTIVE
from .pma import Action, Policy


class Decision(str, Enum):
    APPROVED = "Approved"
    DENIED = "Denied"


class ActionTaken(str, Enum):
    NONE = "None"
    BLOCKED = "Blocked"


class IncompleteSnapshot(ValueError):
    pass


# -- request and environment ---------------------------------------------


def request_message(sid: str, attributes, oid: str, action: Action) -> bytes:
    return canonical_json(
        {"action": Action(action).value, "attributes": to_pairs(attributes), "oid": str(oid), "sid": str(sid)}
    )


@dataclass(frozen=True)
class AccessRequest:
    subject_sid: str
    subject_attributes: tuple[Attribute, ...]
    oid: str
    requested_action: Action
    signature: Signature

    @classmethod
    def create(cls, sk: PrivateKey, sid, attributes, oid, action) -> "AccessRequest":
        attrs = attribute_set(Kind.SUBJECT, attributes)
        action = Action.parse(action) if not isinstance(action, Action) else action
        sig = identity.sign(sk, request_message(str(sid), attrs, str(oid), action))
        return cls(str(sid), attrs, str(oid), action, sig)

    def message(self) -> bytes:
        return request_message(self.subject_sid, self.subject_attributes, self.oid, self.requested_action)

    def to_json(self) -> dict:
        return {
            "sid": self.subject_sid,
            "attributes": to_pairs(self.subject_attributes),
            "oid": self.oid,
            "action": self.requested_action.value,
            "signature": self.signature.hex(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "AccessRequest":
        return cls(
            str(data["sid"]),
            from_pairs(data["attributes"]),
            str(data["oid"]),
            Action.parse(data["action"]),
            Signature.from_hex(data["signature"]),
        )


@dataclass(frozen=True)
class EnvironmentSnapshot:
    """Context observed at request time, supplied by the caller."""

    now: int
    subject_location: str = ""
    object_behaviour: Mapping[str, str] = field(default_factory=dict)
    auth_status: Mapping[str, str] = field(default_factory=dict)

    @classmethod
    def build(cls, now: int = 0, subject_location: str = "", object_behaviour=None, auth_status=None):
        behaviour = {}
        for oid, value in (object_behaviour or {}).items():
            fixed = canonical_behaviour(value)
            if fixed is None:
                raise MalformedAttribute(f"Obj.behaviour must be one of {BEHAVIOURS}, got {value!r}")
            behaviour[str(oid)] = fixed
        auth = {}
        for oid, value in (auth_status or {}).items():
            fixed = canonical_auth(value)
            if fixed is None:
                raise MalformedAttribute(f"Auth.status must be one of {AUTH_STATES}, got {value!r}")
            auth[str(oid)] = fixed
        return cls(int(now), str(subject_location), dict(sorted(behaviour.items())), dict(sorted(auth.items())))

    def covers(self, oid: str) -> bool:
        return oid in self.object_behaviour and oid in self.auth_status

    def to_json(self) -> dict:
        return {
            "now": self.now,
            "subject_location": self.subject_location,
            "object_behaviour": dict(self.object_behaviour),
            "auth_status": dict(self.auth_status),
        }

    @classmethod
    def from_json(cls, data: dict) -> "EnvironmentSnapshot":
        return cls.build(data.get("now", 0), data.get("subject_location", ""),
                         data.get("object_behaviour"), data.get("auth_status"))


# -- evaluation ------------------------------------------------------------


def environment_satisfied(constraint: Attribute, env: EnvironmentSnapshot, oid: str) -> bool:
    name = constraint.name
    if name == "Time":
        start, end = parse_window(constraint.value)
        return start <= env.now <= end
    if name == "Sub.location":
        return env.subject_location == constraint.value
    if name == "Obj.behaviour":
        return env.object_behaviour.get(oid) == constraint.value
    if name == "Auth.status":
        return env.auth_status.get(oid) == constraint.value
    return False


def policy_matches(p: Policy, action: Action, env: EnvironmentSnapshot, oid: str,
                   subject_attrs: Iterable[Attribute], object_attrs: Iterable[Attribute] | None) -> bool:
    """Conjunction of every constraint in ``p`` plus the action check.

    ``subject_attrs`` and ``object_attrs`` must already include the identity
    attributes (SID/OID and EAddr). A missing object never matches.
    """
    if action not in p.actions or object_attrs is None:
        return False
    subject = set(subject_attrs)
    if not all(c in subject for c in p.subject):
        return False
    obj = set(object_attrs)
    if not all(c in obj for c in p.object):
        return False
    return all(environment_satisfied(c, env, oid) for c in p.environment)


def evaluate(req: AccessRequest, p: Policy, env: EnvironmentSnapshot,
             subject_attrs: Iterable[Attribute], object_attrs: Iterable[Attribute] | None) -> bool:
    return policy_matches(p, req.requested_action, env, req.oid, subject_attrs, object_attrs)


def decide(policies: Iterable[Policy], action: Action, env: EnvironmentSnapshot, oid: str,
           subject_attrs, object_attrs) -> tuple[Decision, str | None]:
    """Permit-overrides over Active policies; the lowest granting pid is cited."""
    granting = [p.pid for p in policies
                if p.status == POLICY_ACTIVE and policy_matches(p, action, env, oid, subject_attrs, object_attrs)]
    if not granting:
        return Decision.DENIED, None
    return Decision.APPROVED, min(granting, key=natural_key)


# -- lookup table and tickets ---------------------------------------------


@dataclass(frozen=True)
class LookupEntry:
    """One audit row. ``decision`` is None for administrative block/unblock rows."""

    sequence: int
    sid: str
    pid: str | None
    decision: Decision | None
    action_taken: ActionTaken
    tx_hash: str

    def to_json(self) -> dict:
        return {
            "sequence": self.sequence,
            "sid": self.sid,
            "pid": self.pid,
            "decision": None if self.decision is None else self.decision.value,
            "action_taken": self.action_taken.value,
            "tx_hash": self.tx_hash,
        }

    @classmethod
    def from_json(cls, data: dict) -> "LookupEntry":
        return cls(
            data["sequence"],
            data["sid"],
            data["pid"],
            None if data["decision"] is None else Decision(data["decision"]),
            ActionTaken(data["action_taken"]),
            data["tx_hash"],
        )

    def ticket_fields(self) -> tuple:
        return (self.sid, self.pid, self.decision, self.action_taken)


AUDIT_COLUMNS = ("sequence", "sid", "pid", "decision", "action_taken", "tx_hash")


def audit_csv(entries: Iterable[LookupEntry]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(AUDIT_COLUMNS)
    for e in entries:
        row = e.to_json()
        writer.writerow(["" if row[c] is None else row[c] for c in AUDIT_COLUMNS])
    return buf.getvalue()


def audit_json(entries: Iterable[LookupEntry]) -> str:
    return json.dumps([e.to_json() for e in entries], indent=2)


def ticket_message(sid: str, pid: str | None, decision: Decision, action_taken: ActionTaken) -> bytes:
    return canonical_json(
        {"action_taken": ActionTaken(action_taken).value, "decision": Decision(decision).value, "pid": pid, "sid": sid}
    )


@dataclass(frozen=True)
class AccessTicket:
    sid: str
    pid: str | None
    decision: Decision
    action_taken: ActionTaken
    amf_signature: Signature

    def message(self) -> bytes:
        return ticket_message(self.sid, self.pid, self.decision, self.action_taken)

    @property
    def approved(self) -> bool:
        return self.decision is Decision.APPROVED

    def to_json(self) -> dict:
        return {
            "sid": self.sid,
            "pid": self.pid,
            "decision": self.decision.value,
            "action_taken": self.action_taken.value,
            "signature_hex": self.amf_signature.hex(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "AccessTicket":
        return cls(data["sid"], data["pid"], Decision(data["decision"]), ActionTaken(data["action_taken"]),
                   Signature.from_hex(data["signature_hex"]))


# -- contract ----------------------------------------------------------------


@register_contract
class AccessManagement(Contract):
    kind = "AccessManagement"
    operations = ("submit_request", "block_subject", "unblock_subject")
    views = ("audit", "blocked", "has_entry")

    @classmethod
    def validate_config(cls, config):
        for key in ("operator", "admin", "subjects", "objects", "policies"):
            if not isinstance(config.get(key), str):
                raise reject("MalformedConfig", f"{key} required")

    # storage helpers

    def _append(self, ctx: Context, sid, pid, decision, action_taken) -> dict:
        seq = (ctx.read("seq") or 0) + 1
        entry = LookupEntry(seq, sid, pid, decision, action_taken, ctx.tx_hash.hex()).to_json()
        ctx.write(f"entry/{seq}", entry)
        ctx.write("seq", seq)
        ctx.emit("LookupEntry", entry)
        return entry

    def _subject(self, ctx: Context, sid: str):
        subjects = self.config["subjects"]
        status = ctx.read_from(subjects, f"{sid}/status")
        if status is None:
            return None, None, None
        eaddr = ctx.read_from(subjects, f"{sid}/eaddr")
        attrs = []
        for name in ctx.read_from(subjects, f"{sid}/names"):
            attrs.extend(Attribute(name, v) for v in ctx.read_from(subjects, f"{sid}/attr/{name}"))
        return status, eaddr, attrs

    def _object(self, ctx: Context, oid: str):
        objects = self.config["objects"]
        if ctx.read_from(objects, f"{oid}/status") != "Active":
            return None
        attrs = [Attribute("OID", oid), Attribute("EAddr", ctx.read_from(objects, f"{oid}/eaddr"))]
        for name in ctx.read_from(objects, f"{oid}/names"):
            attrs.extend(Attribute(name, v) for v in ctx.read_from(objects, f"{oid}/attr/{name}"))
        return attrs

    def _policies(self, ctx: Context) -> list[Policy]:
        store = self.config["policies"]
        out = []
        for pid in ctx.read_from(store, "pids") or []:
            key = f"policy/{pid}"
            if ctx.read_from(store, f"{key}/status") != POLICY_ACTIVE:
                continue
            out.append(Policy(
                pid,
                from_pairs(ctx.read_from(store, f"{key}/subject")),
                from_pairs(ctx.read_from(store, f"{key}/object")),
                from_pairs(ctx.read_from(store, f"{key}/environment")),
                tuple(Action(a) for a in ctx.read_from(store, f"{key}/actions")),
            ))
        return out

    def _block(self, ctx: Context, sid: str, reason: str):
        ctx.write(f"blocked/{sid}", True)
        ctx.emit("Outcome", {"reason": reason})
        self._append(ctx, sid, None, Decision.DENIED, ActionTaken.BLOCKED)

    # operations

    def op_submit_request(self, ctx: Context, request: dict, env: dict):
        ctx.require_sender(self.config["operator"])
        try:
            req = AccessRequest.from_json(request)
            snapshot = EnvironmentSnapshot.from_json(env)
        except (KeyError, TypeError, ValueError) as exc:
            raise reject("MalformedRequest", str(exc)) from exc
        sid = req.subject_sid
        status, eaddr, registered = self._subject(ctx, sid)
        if status != "Active":
            return self._block(ctx, sid, "UnknownSubject")
        signer = identity.recover_address(req.message(), req.signature)
        if signer is None or signer.hex() != eaddr:
            return self._block(ctx, sid, "BadSignature")
        if not set(req.subject_attributes) <= set(registered):
            return self._block(ctx, sid, "AttributesNotRegistered")
        if ctx.read(f"blocked/{sid}"):
            ctx.emit("Outcome", {"reason": "SubjectBlocked"})
            self._append(ctx, sid, None, Decision.DENIED, ActionTaken.BLOCKED)
            return
        subject_attrs = registered + [Attribute("SID", sid), Attribute("EAddr", eaddr)]
        policies = self._policies(ctx)
        object_attrs = self._object(ctx, req.oid)
        decision, pid = decide(policies, req.requested_action, snapshot, req.oid, subject_attrs, object_attrs)
        ctx.emit("Outcome", {"reason": "PolicyMatch" if pid else "NoMatchingPolicy"})
        self._append(ctx, sid, pid, decision, ActionTaken.NONE)

    def _require_admin(self, ctx: Context):
        if ctx.sender.hex() not in (self.config["operator"], self.config["admin"]):
            raise reject("Unauthorized", str(ctx.sender))

    def op_block_subject(self, ctx: Context, sid: str):
        self._require_admin(ctx)
        if ctx.read_from(self.config["subjects"], f"{sid}/status") is None:
            raise reject("UnknownSubject", sid)
        ctx.write(f"blocked/{sid}", True)
        self._append(ctx, sid, None, None, ActionTaken.BLOCKED)

    def op_unblock_subject(self, ctx: Context, sid: str):
        self._require_admin(ctx)
        if ctx.read_from(self.config["subjects"], f"{sid}/status") is None:
            raise reject("UnknownSubject", sid)
        ctx.delete(f"blocked/{sid}")
        self._append(ctx, sid, None, None, ActionTaken.NONE)

    # views

    def entries(self) -> list[LookupEntry]:
        n = self.storage.get("seq") or 0
        return [LookupEntry.from_json(self.storage.get(f"entry/{i}")) for i in range(1, n + 1)]

    def view_audit(self, sid: str | None = None, pid: str | None = None, decision: str | None = None):
        return [e.to_json() for e in filter_entries(self.entries(), sid, pid, decision)]

    def view_blocked(self, sid: str) -> bool:
        return bool(self.storage.get(f"blocked/{sid}"))

    def view_has_entry(self, sid: str, pid: str | None, decision: str, action_taken: str) -> bool:
        wanted = (sid, pid, Decision(decision), ActionTaken(action_taken))
        return any(e.ticket_fields() == wanted for e in self.entries())


def filter_entries(entries: Iterable[LookupEntry], sid=None, pid=None, decision=None) -> list[LookupEntry]:
    if decision is not None and not isinstance(decision, Decision):
        decision = Decision(decision)
    return [
        e for e in entries
        if (sid is None or e.sid == sid) and (pid is None or e.pid == pid)
        and (decision is None or e.decision == decision)
    ]


def entries_from_chain(ledger: Ledger, cid: Address) -> list[LookupEntry]:
    """Rebuild the lookup table purely from receipts of the sealed chain."""
    out = []
    for block in ledger.blocks:
        for tx, rc in zip(block.txs, block.receipts):
            if tx.target != cid or not rc.ok:
                continue
            for ev in rc.events:
                if ev.name == "LookupEntry":
                    out.append(LookupEntry.from_json(ev.payload))
    return out


# -- service -----------------------------------------------------------------


class AccessManagementFramework:
    """Relays signed requests to the contract and signs the resulting tickets."""

    def __init__(self, ledger: Ledger, account: Account, contract: Address):
        self.ledger = ledger
        self.account = account
        self.cid = contract

    @property
    def public_key(self) -> PublicKey:
        return self.account.keys.public

    @property
    def table(self) -> AccessManagement:
        return self.ledger.contract(self.cid)

    def _ticket(self, entry: dict) -> AccessTicket:
        e = LookupEntry.from_json(entry)
        msg = ticket_message(e.sid, e.pid, e.decision, e.action_taken)
        return AccessTicket(e.sid, e.pid, e.decision, e.action_taken, identity.sign(self.account.keys.private, msg))

    def submit_request(self, req: AccessRequest, env: EnvironmentSnapshot) -> AccessTicket:
        tx_hash = self.enqueue_request(req, env)
        self.ledger.mine_block()
        return self.ticket_for(tx_hash)

    def enqueue_request(self, req: AccessRequest, env: EnvironmentSnapshot) -> bytes:
        """Queue a request without mining; redeem with :meth:`ticket_for`."""
        if not env.covers(req.oid):
            raise IncompleteSnapshot(f"snapshot lacks behaviour/auth status for object {req.oid}")
        args = {"request": req.to_json(), "env": env.to_json()}
        return self.account.send(self.ledger, self.cid, "submit_request", args, mine=False)

    def ticket_for(self, tx_hash: bytes) -> AccessTicket:
        rc = self.ledger.receipt(tx_hash).raise_for_status()
        return self._ticket(rc.event("LookupEntry"))

    def block_subject(self, sid: str, mine: bool = True):
        return self.account.send(self.ledger, self.cid, "block_subject", {"sid": sid}, mine=mine)

    def unblock_subject(self, sid: str, mine: bool = True):
        return self.account.send(self.ledger, self.cid, "unblock_subject", {"sid": sid}, mine=mine)

    def is_blocked(self, sid: str) -> bool:
        return self.ledger.call(self.cid, "blocked", sid=sid)

    def audit(self, sid: str | None = None, pid: str | None = None, decision=None) -> list[LookupEntry]:
        with self.ledger.sealed():
            return filter_entries(self.table.entries(), sid, pid, decision)

    def verify_ticket(self, t: AccessTicket) -> bool:
        return verify_ticket(t, self.public_key, self.audit())


def verify_ticket(t: AccessTicket, amf_key: PublicKey, entries: Iterable[LookupEntry]) -> bool:
    """Signature check plus presence of an identical lookup entry."""
    try:
        if not identity.verify(amf_key, t.message(), t.amf_signature):
            return False
    except (ValueError, TypeError):
        return False
    wanted = (t.sid, t.pid, t.decision, t.action_taken)
    return any(e.ticket_fields() == wanted for e in entries)
