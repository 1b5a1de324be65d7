"""Contract base class and the metered execution context."""

from __future__ import annotations

import inspect
import json
from typing import TYPE_CHECKING, Any, ClassVar

from ..identity import Address
from .codec import canonical_json
from .gas import StorageOps

if TYPE_CHECKING:
    from .chain import Ledger


class ContractError(Exception):
    """A contract operation refused to execute.

    ``reason`` is the short code recorded in the Rejected receipt; subclasses
    fix it so callers can catch specific refusals.
    """

    reason = "ContractError"

    def __init__(self, detail: str = ""):
        super().__init__(detail or self.reason)
        self.detail = detail


_ERRORS: dict[str, type[ContractError]] = {}


def error_class(reason: str) -> type[ContractError]:
    """Exception class for a receipt reason code, created on first use."""
    if reason not in _ERRORS:
        _ERRORS[reason] = type(reason, (ContractError,), {"reason": reason})
    return _ERRORS[reason]


Unauthorized = error_class("Unauthorized")


def reject(reason: str, detail: str = "") -> ContractError:
    return error_class(reason)(detail)


class Storage:
    """Committed key/value state of one contract; values are canonical JSON text."""

    def __init__(self, items: dict[str, str] | None = None):
        self._items: dict[str, str] = dict(items or {})
        self._digest_cache: bytes | None = None

    def get(self, key: str) -> Any:
        raw = self._items.get(key)
        return None if raw is None else json.loads(raw)

    def __contains__(self, key: str) -> bool:
        return key in self._items

    def keys(self):
        return self._items.keys()

    def apply(self, writes: dict[str, str | None]):
        for key, raw in writes.items():
            if raw is None:
                self._items.pop(key, None)
            else:
                self._items[key] = raw
        if writes:
            self._digest_cache = None

    def snapshot(self) -> dict[str, str]:
        return dict(sorted(self._items.items()))

    def digest(self, keccak) -> bytes:
        if self._digest_cache is None:
            self._digest_cache = keccak(canonical_json(self.snapshot()))
        return self._digest_cache


class Context:
    """Per-transaction view of contract state.

    Writes go to an overlay that the ledger commits only if the operation
    returns normally. Every storage access is counted for gas.
    """

    def __init__(self, ledger: "Ledger", contract: "Contract", sender: Address, tx_hash: bytes):
        self.ledger = ledger
        self.contract = contract
        self.sender = sender
        self.tx_hash = tx_hash
        self.overlay: dict[str, str | None] = {}
        self.events: list[tuple[str, dict]] = []
        self.reads = 0
        self.writes = 0
        self.deletes = 0

    def read(self, key: str) -> Any:
        self.reads += 1
        if key in self.overlay:
            raw = self.overlay[key]
            return None if raw is None else json.loads(raw)
        return self.contract.storage.get(key)

    def read_from(self, cid: str, key: str) -> Any:
        """Metered read of another contract's committed storage."""
        self.reads += 1
        return self.ledger.contract(Address.from_hex(cid)).storage.get(key)

    def write(self, key: str, value: Any):
        self.writes += 1
        self.overlay[key] = canonical_json(value).decode("utf-8")

    def delete(self, key: str):
        self.deletes += 1
        self.overlay[key] = None

    def emit(self, name: str, payload: dict):
        self.events.append((name, payload))

    def require_sender(self, address: str):
        if self.sender.hex() != address:
            raise reject("Unauthorized", f"{self.sender} may not call this operation")

    @property
    def ops(self) -> StorageOps:
        return StorageOps(reads=self.reads, writes=self.writes, deletes=self.deletes)


class Contract:
    """A contract instance bound to an id and its storage.

    Subclasses list mutating entry points in ``operations`` (implemented as
    ``op_<name>(ctx, **args)``) and read-only queries in ``views``
    (``view_<name>(**args)``, reading committed storage directly).
    """

    kind: ClassVar[str] = ""
    operations: ClassVar[tuple[str, ...]] = ()
    views: ClassVar[tuple[str, ...]] = ()

    def __init__(self, cid: Address, storage: Storage):
        self.cid = cid
        self.storage = storage

    @property
    def config(self) -> dict:
        return self.storage.get("__config__") or {}

    @classmethod
    def code_size(cls) -> int:
        return len(cls.operations) + len(cls.views)

    @classmethod
    def validate_config(cls, config: dict):
        """Raise a ContractError if the deployment arguments are unusable."""

    def execute(self, ctx: Context, op: str, args: dict):
        if op not in self.operations:
            raise reject("UnknownOperation", op)
        fn = getattr(self, "op_" + op)
        try:
            inspect.signature(fn).bind(ctx, **args)
        except TypeError as exc:
            raise reject("MalformedCall", str(exc)) from exc
        return fn(ctx, **args)

    def call(self, view: str, **args):
        if view not in self.views:
            raise reject("UnknownOperation", view)
        return getattr(self, "view_" + view)(**args)


CONTRACT_TYPES: dict[str, type[Contract]] = {}


def register_contract(cls: type[Contract]) -> type[Contract]:
    CONTRACT_TYPES[cls.kind] = cls
    return cls
