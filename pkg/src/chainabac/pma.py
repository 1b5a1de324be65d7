"""Policy management: the policy contract and the PMA client."""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum

from .attributes import Attribute, Kind, MalformedAttribute, canonical_name, from_pairs, natural_key, normalize, to_mapping, to_pairs
from .identity import Address
from .ledger import Account, Context, Contract, Ledger, Receipt, reject
from .ledger.contract import register_contract

ACTIVE = "Active"
REVOKED = "Revoked"


class Action(str, Enum):
    READ = "Read"
    WRITE = "Write"
    EXECUTE = "Execute"

    @classmethod
    def parse(cls, text: str) -> "Action":
        for a in cls:
            if a.value.lower() == str(text).strip().lower():
                return a
        raise ValueError(f"unknown action {text!r}")


ACTION_ORDER = {a: i for i, a in enumerate(Action)}


def sort_actions(actions) -> tuple[Action, ...]:
    return tuple(sorted({Action.parse(a) if not isinstance(a, Action) else a for a in actions}, key=ACTION_ORDER.get))


class PolicyError(ValueError):
    def __init__(self, reason: str, detail: str = ""):
        super().__init__(detail or reason)
        self.reason = reason


def _constraints(kind: Kind, items) -> tuple[Attribute, ...]:
    pairs = []
    if isinstance(items, dict):
        for name, value in items.items():
            pairs.extend((name, v) for v in (value if isinstance(value, list) else [value]))
    else:
        pairs = [tuple(p) if not isinstance(p, Attribute) else (p.name, p.value) for p in items]
    out = set()
    for name, value in pairs:
        if canonical_name(kind, name) is None:
            raise PolicyError("UnknownAttributeName", f"{kind.value} attribute {name!r}")
        try:
            out.add(normalize(kind, name, value))
        except MalformedAttribute as exc:
            raise PolicyError("MalformedPolicy", str(exc)) from exc
    return tuple(sorted(out))


@dataclass(frozen=True)
class Policy:
    pid: str
    subject: tuple[Attribute, ...]
    object: tuple[Attribute, ...]
    environment: tuple[Attribute, ...]
    actions: tuple[Action, ...]
    status: str = ACTIVE

    @classmethod
    def build(cls, pid, subject=(), object=(), environment=(), actions=()) -> "Policy":
        """Validate and canonicalize; raises PolicyError with a reason code."""
        try:
            acts = sort_actions(actions)
        except ValueError as exc:
            raise PolicyError("MalformedPolicy", str(exc)) from exc
        if not str(pid):
            raise PolicyError("MalformedPolicy", "empty pid")
        p = cls(str(pid), _constraints(Kind.SUBJECT, subject), _constraints(Kind.OBJECT, object),
                _constraints(Kind.ENVIRONMENT, environment), acts)
        if not acts:
            raise PolicyError("EmptyActions", p.pid)
        if not (p.subject or p.object or p.environment):
            raise PolicyError("MalformedPolicy", "policy needs at least one constraint")
        return p

    def constraints(self) -> tuple[Attribute, ...]:
        return self.subject + self.object + self.environment

    def grants(self, action: Action) -> bool:
        return action in self.actions

    def to_json(self) -> dict:
        return {
            "pid": self.pid,
            "subject": to_mapping(self.subject),
            "object": to_mapping(self.object),
            "environment": to_mapping(self.environment),
            "actions": [a.value for a in self.actions],
        }

    @classmethod
    def from_json(cls, data: dict) -> "Policy":
        return cls.build(data["pid"], data.get("subject", {}), data.get("object", {}),
                         data.get("environment", {}), data.get("actions", []))


def export_policies(policies) -> bytes:
    """Canonical JSON array, sorted by pid."""
    ordered = sorted(policies, key=lambda p: natural_key(p.pid))
    return json.dumps([p.to_json() for p in ordered], indent=2, sort_keys=True).encode("utf-8") + b"\n"


def import_policies(data: bytes | str) -> list[Policy]:
    return [Policy.from_json(entry) for entry in json.loads(data)]


@register_contract
class PolicyManagement(Contract):
    kind = "PolicyManagement"
    operations = ("add", "update", "revoke")
    views = ("search", "list")

    @classmethod
    def validate_config(cls, config):
        if not isinstance(config.get("operator"), str):
            raise reject("MalformedConfig", "operator address required")

    def op_add(self, ctx: Context, pid: str, subject: list, object: list, environment: list, actions: list):
        ctx.require_sender(self.config["operator"])
        try:
            policy = Policy.build(pid, [tuple(p) for p in subject], [tuple(p) for p in object],
                                  [tuple(p) for p in environment], actions)
        except (PolicyError, TypeError, ValueError) as exc:
            raise reject(getattr(exc, "reason", "MalformedPolicy"), str(exc)) from exc
        key = f"policy/{policy.pid}"
        if ctx.read(f"{key}/status") is not None:
            raise reject("DuplicatePid", policy.pid)
        pids = ctx.read("pids") or []
        ctx.write(f"{key}/subject", to_pairs(policy.subject))
        ctx.write(f"{key}/object", to_pairs(policy.object))
        ctx.write(f"{key}/environment", to_pairs(policy.environment))
        ctx.write(f"{key}/actions", [a.value for a in policy.actions])
        ctx.write(f"{key}/status", ACTIVE)
        ctx.write("pids", pids + [policy.pid])
        ctx.emit("PolicyAdded", {"pid": policy.pid})

    def _require_active(self, ctx: Context, pid: str):
        status = ctx.read(f"policy/{pid}/status")
        if status != ACTIVE:
            raise reject("NotFound", pid)

    def op_update(self, ctx: Context, pid: str, actions: list):
        ctx.require_sender(self.config["operator"])
        try:
            acts = sort_actions(actions)
        except (ValueError, TypeError) as exc:
            raise reject("MalformedPolicy", str(exc)) from exc
        if not acts:
            raise reject("EmptyActions", pid)
        self._require_active(ctx, pid)
        ctx.write(f"policy/{pid}/actions", [a.value for a in acts])
        ctx.emit("PolicyUpdated", {"pid": pid, "actions": [a.value for a in acts]})

    def op_revoke(self, ctx: Context, pid: str):
        ctx.require_sender(self.config["operator"])
        status = ctx.read(f"policy/{pid}/status")
        if status is None:
            raise reject("NotFound", pid)
        if status == REVOKED:
            raise reject("AlreadyRevoked", pid)
        ctx.write(f"policy/{pid}/status", REVOKED)
        ctx.emit("PolicyRevoked", {"pid": pid})

    # committed-state reads

    def load(self, pid: str, include_revoked: bool = False) -> Policy | None:
        key = f"policy/{pid}"
        status = self.storage.get(f"{key}/status")
        if status is None or (status != ACTIVE and not include_revoked):
            return None
        return Policy(
            pid,
            from_pairs(self.storage.get(f"{key}/subject")),
            from_pairs(self.storage.get(f"{key}/object")),
            from_pairs(self.storage.get(f"{key}/environment")),
            tuple(Action(a) for a in self.storage.get(f"{key}/actions")),
            status,
        )

    def active(self) -> list[Policy]:
        pids = self.storage.get("pids") or []
        found = [self.load(pid) for pid in pids]
        return sorted((p for p in found if p is not None), key=lambda p: natural_key(p.pid))

    def view_search(self, pid: str):
        p = self.load(pid)
        return None if p is None else p.to_json()

    def view_list(self, filter: str | None = None):
        return [p.to_json() for p in filter_policies(self.active(), filter)]


def filter_policies(policies, spec: str | None):
    """Keep policies with a constraint matching ``name`` or ``name=value``."""
    if not spec:
        return list(policies)
    name, _, value = spec.partition("=")
    name = name.strip().lower()
    out = []
    for p in policies:
        for c in p.constraints():
            if c.name.lower() == name and (not value or c.value == value.strip()):
                out.append(p)
                break
    return out


class PolicyAuthority:
    """The PMA: sends policy transactions and reads the policy store."""

    def __init__(self, ledger: Ledger, account: Account, contract: Address):
        self.ledger = ledger
        self.account = account
        self.cid = contract

    @property
    def store(self) -> PolicyManagement:
        return self.ledger.contract(self.cid)

    def add_policy(self, p: Policy, mine: bool = True) -> Receipt:
        args = {
            "pid": p.pid,
            "subject": to_pairs(p.subject),
            "object": to_pairs(p.object),
            "environment": to_pairs(p.environment),
            "actions": [a.value for a in p.actions],
        }
        return self.account.send(self.ledger, self.cid, "add", args, mine=mine)

    def update_policy(self, pid: str, new_actions, mine: bool = True) -> Receipt:
        actions = [a.value if isinstance(a, Action) else str(a) for a in new_actions]
        return self.account.send(self.ledger, self.cid, "update", {"pid": pid, "actions": actions}, mine=mine)

    def revoke_policy(self, pid: str, mine: bool = True) -> Receipt:
        return self.account.send(self.ledger, self.cid, "revoke", {"pid": pid}, mine=mine)

    def search_policy(self, pid: str) -> Policy | None:
        with self.ledger.sealed():
            return self.store.load(pid)

    def list_policies(self, filter: str | None = None) -> list[Policy]:
        with self.ledger.sealed():
            return filter_policies(self.store.active(), filter)
