"""Attribute vocabulary shared by the attribute, policy and access contracts."""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping


class Kind(str, Enum):
    SUBJECT = "subject"
    OBJECT = "object"
    ENVIRONMENT = "environment"


SUBJECT_NAMES = ("SID", "EAddr", "Name", "Role", "Location")
OBJECT_NAMES = ("OID", "EAddr", "Obj.Name", "Obj.Type")
ENVIRONMENT_NAMES = ("Time", "Sub.location", "Obj.behaviour", "Auth.status")

SCHEMA = {
    Kind.SUBJECT: SUBJECT_NAMES,
    Kind.OBJECT: OBJECT_NAMES,
    Kind.ENVIRONMENT: ENVIRONMENT_NAMES,
}

# identifier names live on the record itself, not in its attribute set
RECORD_FIELDS = {Kind.SUBJECT: ("SID", "EAddr"), Kind.OBJECT: ("OID", "EAddr"), Kind.ENVIRONMENT: ()}
REQUIRED = {Kind.SUBJECT: ("Name", "Role", "Location"), Kind.OBJECT: ("Obj.Name", "Obj.Type"), Kind.ENVIRONMENT: ()}
# names that may repeat inside one record
MULTI_VALUED = {"Role"}

MALICIOUS = "Malicious"
NON_MALICIOUS = "NonMalicious"
AUTH = "Auth"
NON_AUTH = "Non.Auth"
BEHAVIOURS = (MALICIOUS, NON_MALICIOUS)
AUTH_STATES = (AUTH, NON_AUTH)


class MalformedAttribute(ValueError):
    pass


@dataclass(frozen=True, order=True)
class Attribute:
    name: str
    value: str

    def __post_init__(self):
        if not self.name or any(c in self.name for c in "=;"):
            raise MalformedAttribute(f"bad attribute name {self.name!r}")
        if not isinstance(self.value, str) or ";" in self.value:
            raise MalformedAttribute(f"bad value for {self.name}: {self.value!r}")

    def __str__(self):
        return f"<{self.name}: {self.value}>"


def canonical_name(kind: Kind, name: str) -> str | None:
    """Schema spelling of ``name`` (matching is case-insensitive), or None."""
    folded = name.strip().lower()
    for known in SCHEMA[Kind(kind)]:
        if known.lower() == folded:
            return known
    return None


def _fold(value: str) -> str:
    return re.sub(r"[\s._-]", "", value).lower()


def canonical_behaviour(value: str) -> str | None:
    return {_fold(v): v for v in BEHAVIOURS}.get(_fold(value))


def canonical_auth(value: str) -> str | None:
    return {_fold(v): v for v in AUTH_STATES}.get(_fold(value))


def parse_window(value: str) -> tuple[int, int]:
    """Parse a ``start-end`` logical time window."""
    try:
        start_s, end_s = value.split("-")
        start, end = int(start_s), int(end_s)
    except ValueError:
        raise MalformedAttribute(f"time window must be 'start-end', got {value!r}") from None
    if start < 0 or start > end:
        raise MalformedAttribute(f"time window start must not exceed end: {value!r}")
    return start, end


def format_window(start: int, end: int) -> str:
    value = f"{start}-{end}"
    parse_window(value)
    return value


def normalize(kind: Kind, name: str, value: str) -> Attribute:
    """Validate one attribute against a kind's schema and canonicalize it."""
    kind = Kind(kind)
    canon = canonical_name(kind, name)
    if canon is None:
        raise MalformedAttribute(f"unknown {kind.value} attribute {name!r}")
    value = str(value).strip()
    if canon == "Obj.behaviour":
        fixed = canonical_behaviour(value)
        if fixed is None:
            raise MalformedAttribute(f"Obj.behaviour must be one of {BEHAVIOURS}, got {value!r}")
        value = fixed
    elif canon == "Auth.status":
        fixed = canonical_auth(value)
        if fixed is None:
            raise MalformedAttribute(f"Auth.status must be one of {AUTH_STATES}, got {value!r}")
        value = fixed
    elif canon == "Time":
        value = format_window(*parse_window(value))
    elif canon == "EAddr":
        value = value.lower()
    if not value:
        raise MalformedAttribute(f"{canon} requires a value")
    return Attribute(canon, value)


def attribute_set(kind: Kind, items) -> tuple[Attribute, ...]:
    """Build a sorted attribute tuple from a mapping, pairs or Attribute objects.

    Mapping values may be lists for multi-valued names.
    """
    pairs: list[tuple[str, str]] = []
    if isinstance(items, Mapping):
        for name, value in items.items():
            if isinstance(value, (list, tuple)):
                pairs.extend((name, v) for v in value)
            else:
                pairs.append((name, value))
    else:
        for item in items:
            if isinstance(item, Attribute):
                pairs.append((item.name, item.value))
            else:
                name, value = item
                pairs.append((name, value))
    attrs = sorted({normalize(kind, n, v) for n, v in pairs})
    names = [a.name for a in attrs]
    for name in set(names):
        if names.count(name) > 1 and name not in MULTI_VALUED:
            raise MalformedAttribute(f"attribute {name} given more than once")
    return tuple(attrs)


def serialize(attrs: Iterable[Attribute]) -> bytes:
    """Canonical byte form: sorted ``name=value`` pairs joined by ``;``."""
    return ";".join(f"{a.name}={a.value}" for a in sorted(attrs)).encode("utf-8")


def to_pairs(attrs: Iterable[Attribute]) -> list[list[str]]:
    return [[a.name, a.value] for a in sorted(attrs)]


def from_pairs(pairs) -> tuple[Attribute, ...]:
    return tuple(sorted(Attribute(n, v) for n, v in pairs))


def to_mapping(attrs: Iterable[Attribute]) -> dict:
    out: dict = {}
    for a in sorted(attrs):
        if a.name in out:
            prev = out[a.name]
            out[a.name] = (prev if isinstance(prev, list) else [prev]) + [a.value]
        else:
            out[a.name] = a.value
    return out


def natural_key(text: str):
    """Sort key that orders embedded integers numerically (P2 before P10)."""
    return [(0, int(tok), "") if tok.isdigit() else (1, 0, tok) for tok in re.split(r"(\d+)", text) if tok]
