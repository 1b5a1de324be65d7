"""Attribute management: subject, object and environment attribute contracts.

Each record's attributes are stored one slot per attribute name so that an
update touches a single slot. Revoked records stay in storage with status
``Revoked`` and are never surfaced by queries again.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import identity
from .attributes import (
    RECORD_FIELDS,
    REQUIRED,
    Attribute,
    Kind,
    MalformedAttribute,
    attribute_set,
    from_pairs,
    normalize,
    serialize,
    to_mapping,
    to_pairs,
)
from .identity import Address, PrivateKey, Signature
from .ledger import Account, Context, Contract, Ledger, Receipt, reject
from .ledger.contract import register_contract

ACTIVE = "Active"
REVOKED = "Revoked"


# -- records ---------------------------------------------------------------


@dataclass(frozen=True)
class SubjectRecord:
    sid: str
    eaddr: str
    attributes: tuple[Attribute, ...]
    status: str = ACTIVE

    @classmethod
    def build(cls, sid, eaddr: Address | str, attributes) -> "SubjectRecord":
        return cls(str(sid), str(eaddr).lower(), attribute_set(Kind.SUBJECT, attributes))

    def identity_attributes(self) -> tuple[Attribute, ...]:
        return (Attribute("SID", self.sid), Attribute("EAddr", self.eaddr))


@dataclass(frozen=True)
class ObjectRecord:
    oid: str
    eaddr: str
    attributes: tuple[Attribute, ...]
    token: str = ""  # signature hex over token_message()
    status: str = ACTIVE

    @classmethod
    def build(cls, oid, eaddr: Address | str, attributes, token: str = "") -> "ObjectRecord":
        return cls(str(oid), str(eaddr).lower(), attribute_set(Kind.OBJECT, attributes), token)

    def identity_attributes(self) -> tuple[Attribute, ...]:
        return (Attribute("OID", self.oid), Attribute("EAddr", self.eaddr))

    def token_message(self) -> bytes:
        return token_message(self.oid, self.eaddr, self.attributes)


@dataclass(frozen=True)
class EnvironmentRecord:
    scope_id: str
    attributes: tuple[Attribute, ...]
    status: str = ACTIVE

    @classmethod
    def build(cls, scope_id, attributes) -> "EnvironmentRecord":
        return cls(str(scope_id), attribute_set(Kind.ENVIRONMENT, attributes))


def token_message(oid: str, eaddr: str, attributes) -> bytes:
    """Bytes a device signs to prove possession of its registered attributes."""
    full = list(attributes) + [Attribute("OID", oid), Attribute("EAddr", eaddr)]
    return serialize(full)


def make_token(device_sk: PrivateKey, oid: str, eaddr: str, attributes) -> str:
    return identity.sign(device_sk, token_message(oid, eaddr, attributes)).hex()


# -- contracts -------------------------------------------------------------


def _check_required(kind: Kind, attrs: tuple[Attribute, ...]):
    names = {a.name for a in attrs}
    for name in RECORD_FIELDS[kind]:
        if name in names:
            raise reject("MalformedRecord", f"{name} is a record field, not an attribute")
    missing = [n for n in REQUIRED[kind] if n not in names]
    if missing:
        raise reject("MalformedRecord", f"missing attributes {missing}")


def _parse_attrs(kind: Kind, pairs) -> tuple[Attribute, ...]:
    try:
        return attribute_set(kind, [tuple(p) for p in pairs])
    except (MalformedAttribute, TypeError, ValueError) as exc:
        raise reject("MalformedRecord", str(exc)) from exc


def _group(attrs) -> dict[str, list[str]]:
    grouped: dict[str, list[str]] = {}
    for a in attrs:
        grouped.setdefault(a.name, []).append(a.value)
    return grouped


class AttributeContract(Contract):
    """Shared storage layout: ``<id>/status``, ``<id>/attr/<name>`` and friends."""

    record_kind: Kind
    operations = ("register", "update", "revoke")
    views = ("query",)

    @classmethod
    def validate_config(cls, config):
        if not isinstance(config.get("operator"), str):
            raise reject("MalformedConfig", "operator address required")

    def _status(self, ctx: Context, rid: str):
        return ctx.read(f"{rid}/status")

    def _require_active(self, ctx: Context, rid: str):
        status = self._status(ctx, rid)
        if status is None:
            raise reject("NotFound", rid)
        if status == REVOKED:
            raise reject("RecordRevoked", rid)

    def _write_attrs(self, ctx: Context, rid: str, attrs):
        names = []
        for name, values in sorted(_group(attrs).items()):
            ctx.write(f"{rid}/attr/{name}", values)
            names.append(name)
        return names

    def _update_value(self, ctx: Context, rid: str, name: str, value: str) -> Attribute:
        try:
            attr = normalize(self.record_kind, name, value)
        except MalformedAttribute as exc:
            raise reject("MalformedRecord", str(exc)) from exc
        if attr.name in RECORD_FIELDS[self.record_kind]:
            raise reject("MalformedRecord", f"{attr.name} cannot be updated")
        return attr

    def op_revoke(self, ctx: Context, id: str):
        ctx.require_sender(self.config["operator"])
        status = self._status(ctx, id)
        if status is None:
            raise reject("NotFound", id)
        if status == REVOKED:
            raise reject("AlreadyRevoked", id)
        ctx.write(f"{id}/status", REVOKED)
        self._release(ctx, id)
        ctx.emit("Revoked", {"kind": self.record_kind.value, "id": id})

    def _release(self, ctx: Context, rid: str):
        eaddr = ctx.read(f"{rid}/eaddr")
        ctx.delete(f"addr/{eaddr}")

    # read-only helpers over committed storage

    def attributes_of(self, rid: str) -> tuple[Attribute, ...] | None:
        if self.storage.get(f"{rid}/status") != ACTIVE:
            return None
        return self._stored_attrs(rid)

    def _stored_attrs(self, rid: str) -> tuple[Attribute, ...]:
        names = self.storage.get(f"{rid}/names") or []
        out = []
        for name in names:
            out.extend(Attribute(name, v) for v in self.storage.get(f"{rid}/attr/{name}"))
        return tuple(sorted(out))

    def view_query(self, id: str):
        attrs = self.attributes_of(id)
        return None if attrs is None else to_pairs(attrs)

    def ids(self) -> list[str]:
        return sorted(k[: -len("/status")] for k in self.storage.keys() if k.endswith("/status"))


@register_contract
class SubjectAttributes(AttributeContract):
    kind = "SubjectAttributes"
    record_kind = Kind.SUBJECT

    def op_register(self, ctx: Context, sid: str, eaddr: str, attributes: list):
        ctx.require_sender(self.config["operator"])
        attrs = _parse_attrs(Kind.SUBJECT, attributes)
        _check_required(Kind.SUBJECT, attrs)
        eaddr = eaddr.lower()
        if not sid:
            raise reject("MalformedRecord", "empty sid")
        try:
            Address.from_hex(eaddr)
        except ValueError as exc:
            raise reject("MalformedRecord", f"bad address {eaddr}") from exc
        if ctx.read(f"{sid}/status") is not None or ctx.read(f"addr/{eaddr}") is not None:
            raise reject("AlreadyRegistered", sid)
        ctx.write(f"{sid}/status", ACTIVE)
        ctx.write(f"{sid}/eaddr", eaddr)
        ctx.write(f"{sid}/names", self._write_attrs(ctx, sid, attrs))
        ctx.write(f"addr/{eaddr}", sid)
        ctx.emit("Registered", {"kind": "subject", "id": sid})

    def op_update(self, ctx: Context, id: str, name: str, value: str):
        ctx.require_sender(self.config["operator"])
        attr = self._update_value(ctx, id, name, value)
        self._require_active(ctx, id)
        if attr.name not in ctx.read(f"{id}/names"):
            raise reject("NotFound", f"{id} has no {attr.name}")
        ctx.write(f"{id}/attr/{attr.name}", [attr.value])
        ctx.emit("Updated", {"kind": "subject", "id": id, "name": attr.name})

    def record(self, sid: str) -> SubjectRecord | None:
        status = self.storage.get(f"{sid}/status")
        if status is None:
            return None
        return SubjectRecord(sid, self.storage.get(f"{sid}/eaddr"), self._stored_attrs(sid), status)


@register_contract
class ObjectAttributes(AttributeContract):
    kind = "ObjectAttributes"
    record_kind = Kind.OBJECT

    def _check_token(self, oid, eaddr, attrs, token: str):
        try:
            sig = Signature.from_hex(token)
        except (ValueError, TypeError) as exc:
            raise reject("BadToken", "unparseable token") from exc
        signer = identity.recover_address(token_message(oid, eaddr, attrs), sig)
        if signer is None or signer.hex() != eaddr:
            raise reject("BadToken", oid)

    def op_register(self, ctx: Context, oid: str, eaddr: str, attributes: list, token: str):
        ctx.require_sender(self.config["operator"])
        attrs = _parse_attrs(Kind.OBJECT, attributes)
        _check_required(Kind.OBJECT, attrs)
        eaddr = eaddr.lower()
        if not oid:
            raise reject("MalformedRecord", "empty oid")
        if ctx.read(f"{oid}/status") is not None or ctx.read(f"addr/{eaddr}") is not None:
            raise reject("AlreadyRegistered", oid)
        self._check_token(oid, eaddr, attrs, token)
        ctx.write(f"{oid}/status", ACTIVE)
        ctx.write(f"{oid}/eaddr", eaddr)
        ctx.write(f"{oid}/names", self._write_attrs(ctx, oid, attrs))
        ctx.write(f"{oid}/token", token)
        ctx.write(f"addr/{eaddr}", oid)
        ctx.emit("Registered", {"kind": "object", "id": oid})

    def op_update(self, ctx: Context, id: str, name: str, value: str, token: str):
        """Replace one attribute; the device must re-sign the new attribute set."""
        ctx.require_sender(self.config["operator"])
        attr = self._update_value(ctx, id, name, value)
        self._require_active(ctx, id)
        names = ctx.read(f"{id}/names")
        if attr.name not in names:
            raise reject("NotFound", f"{id} has no {attr.name}")
        current = []
        for n in names:
            if n != attr.name:
                current.extend(Attribute(n, v) for v in ctx.read(f"{id}/attr/{n}"))
        current.append(attr)
        self._check_token(id, ctx.read(f"{id}/eaddr"), current, token)
        ctx.write(f"{id}/attr/{attr.name}", [attr.value])
        ctx.write(f"{id}/token", token)
        ctx.emit("Updated", {"kind": "object", "id": id, "name": attr.name})

    def record(self, oid: str) -> ObjectRecord | None:
        status = self.storage.get(f"{oid}/status")
        if status is None:
            return None
        return ObjectRecord(
            oid, self.storage.get(f"{oid}/eaddr"), self._stored_attrs(oid), self.storage.get(f"{oid}/token"), status
        )


@register_contract
class EnvironmentAttributes(AttributeContract):
    kind = "EnvironmentAttributes"
    record_kind = Kind.ENVIRONMENT

    def op_register(self, ctx: Context, scope_id: str, attributes: list):
        ctx.require_sender(self.config["operator"])
        attrs = _parse_attrs(Kind.ENVIRONMENT, attributes)
        if not scope_id or not attrs:
            raise reject("MalformedRecord", "environment records need a scope and attributes")
        status = ctx.read(f"{scope_id}/status")
        if status == REVOKED:
            raise reject("RecordRevoked", scope_id)
        grouped = _group(attrs)
        for name in grouped:
            if ctx.read(f"{scope_id}/attr/{name}") is not None:
                raise reject("AlreadyRegistered", f"{scope_id}/{name}")
        if status is None:
            ctx.write(f"{scope_id}/status", ACTIVE)
            names = []
        else:
            names = ctx.read(f"{scope_id}/names")
        names = sorted(set(names) | set(self._write_attrs(ctx, scope_id, attrs)))
        ctx.write(f"{scope_id}/names", names)
        ctx.emit("Registered", {"kind": "environment", "id": scope_id})

    def op_update(self, ctx: Context, id: str, name: str, value: str):
        ctx.require_sender(self.config["operator"])
        attr = self._update_value(ctx, id, name, value)
        self._require_active(ctx, id)
        if ctx.read(f"{id}/attr/{attr.name}") is None:
            raise reject("NotFound", f"{id} has no {attr.name}")
        ctx.write(f"{id}/attr/{attr.name}", [attr.value])
        ctx.emit("Updated", {"kind": "environment", "id": id, "name": attr.name})

    def _release(self, ctx: Context, rid: str):
        pass

    def record(self, scope_id: str) -> EnvironmentRecord | None:
        status = self.storage.get(f"{scope_id}/status")
        if status is None:
            return None
        return EnvironmentRecord(scope_id, self._stored_attrs(scope_id), status)


CONTRACT_FOR_KIND = {
    Kind.SUBJECT: SubjectAttributes,
    Kind.OBJECT: ObjectAttributes,
    Kind.ENVIRONMENT: EnvironmentAttributes,
}


# -- authority client ------------------------------------------------------


class AttributeAuthority:
    """The AMA: sends attribute transactions to the three attribute contracts."""

    def __init__(self, ledger: Ledger, account: Account, contracts: dict[Kind, Address]):
        self.ledger = ledger
        self.account = account
        self.contracts = {Kind(k): v for k, v in contracts.items()}

    def _send(self, kind: Kind, op: str, args: dict, mine: bool = True):
        return self.account.send(self.ledger, self.contracts[Kind(kind)], op, args, mine=mine)

    def contract(self, kind: Kind) -> AttributeContract:
        return self.ledger.contract(self.contracts[Kind(kind)])

    def register_subject(self, record: SubjectRecord, mine: bool = True) -> Receipt:
        args = {"sid": record.sid, "eaddr": record.eaddr, "attributes": to_pairs(record.attributes)}
        return self._send(Kind.SUBJECT, "register", args, mine)

    def register_object(self, record: ObjectRecord, device_sk: PrivateKey | None = None, mine: bool = True) -> Receipt:
        token = record.token
        if device_sk is not None:
            token = make_token(device_sk, record.oid, record.eaddr, record.attributes)
        args = {"oid": record.oid, "eaddr": record.eaddr, "attributes": to_pairs(record.attributes), "token": token}
        return self._send(Kind.OBJECT, "register", args, mine)

    def register_environment(self, record: EnvironmentRecord, mine: bool = True) -> Receipt:
        args = {"scope_id": record.scope_id, "attributes": to_pairs(record.attributes)}
        return self._send(Kind.ENVIRONMENT, "register", args, mine)

    def update_attribute(self, kind: Kind, id: str, attr: Attribute,
                         device_sk: PrivateKey | None = None, mine: bool = True) -> Receipt:
        kind = Kind(kind)
        args = {"id": str(id), "name": attr.name, "value": attr.value}
        if kind is Kind.OBJECT:
            args["token"] = self._object_token(str(id), attr, device_sk)
        return self._send(kind, "update", args, mine)

    def _object_token(self, oid: str, attr: Attribute, device_sk: PrivateKey | None) -> str:
        record = self.contract(Kind.OBJECT).record(oid)
        if device_sk is None or record is None:
            return ""
        try:
            attr = normalize(Kind.OBJECT, attr.name, attr.value)
        except MalformedAttribute:
            return ""
        attrs = [a for a in record.attributes if a.name != attr.name] + [attr]
        return make_token(device_sk, oid, record.eaddr, attrs)

    def revoke_record(self, kind: Kind, id: str, mine: bool = True) -> Receipt:
        return self._send(kind, "revoke", {"id": str(id)}, mine)

    def query_attributes(self, kind: Kind, id: str) -> tuple[Attribute, ...] | None:
        pairs = self.ledger.call(self.contracts[Kind(kind)], "query", id=str(id))
        return None if pairs is None else from_pairs(pairs)

    def records(self, kind: Kind):
        c = self.contract(kind)
        return [c.record(rid) for rid in c.ids()]

    # JSON interchange: [{kind, id, eaddr?, attributes: {name: value}, status}]

    def export_records(self) -> list[dict]:
        out = []
        for kind in Kind:
            for rec in self.records(kind):
                entry = {"kind": kind.value, "id": getattr(rec, "sid", None) or getattr(rec, "oid", None) or rec.scope_id}
                if kind is not Kind.ENVIRONMENT:
                    entry["eaddr"] = rec.eaddr
                entry["attributes"] = to_mapping(rec.attributes)
                entry["status"] = rec.status
                out.append(entry)
        return out


def record_from_json(entry: dict):
    kind = Kind(entry["kind"])
    attrs = entry.get("attributes", {})
    if kind is Kind.SUBJECT:
        return SubjectRecord.build(entry["id"], entry["eaddr"], attrs)
    if kind is Kind.OBJECT:
        return ObjectRecord.build(entry["id"], entry["eaddr"], attrs, entry.get("token", ""))
    return EnvironmentRecord.build(entry["id"], attrs)
