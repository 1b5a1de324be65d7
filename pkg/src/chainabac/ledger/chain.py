"""Append-only, hash-chained, gas-metered ledger with a single block producer."""

from __future__ import annotations

import json
import threading
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

from .. import identity
from ..identity import Address, KeyPair, Signature, keccak256
from .codec import DecodeError, Reader, canonical_json, lp16, lp32, u8, u16, u32, u64
from .contract import CONTRACT_TYPES, Context, Contract, ContractError, Storage, Unauthorized, error_class
from .gas import GasSchedule, StorageOps, deployment_gas, meter

ZERO_HASH = bytes(32)
LOG_MAGIC = b"ABCL\x01"

ACCEPTED = "Accepted"
REJECTED = "Rejected"


class LedgerError(Exception):
    pass


class BadSignature(LedgerError):
    pass


class BadNonce(LedgerError):
    pass


class UnknownContract(LedgerError):
    pass


_STATUS_CODES = {ACCEPTED: 0, REJECTED: 1}


@dataclass(frozen=True)
class Transaction:
    sender: Address
    target: Address | None  # None marks a deployment
    payload: bytes
    nonce: int
    signature: Signature

    @staticmethod
    def signing_bytes(sender: Address, target: Address | None, payload: bytes, nonce: int) -> bytes:
        tgt = u8(0) if target is None else u8(1) + target.raw
        return sender.raw + tgt + u64(nonce) + lp32(payload)

    @classmethod
    def build(cls, signer: KeyPair, target: Address | None, op: str, args: dict, nonce: int) -> "Transaction":
        payload = canonical_json({"op": op, "args": args})
        body = cls.signing_bytes(signer.address, target, payload, nonce)
        return cls(signer.address, target, payload, nonce, identity.sign(signer.private, body))

    @property
    def body(self) -> bytes:
        return self.signing_bytes(self.sender, self.target, self.payload, self.nonce)

    def encode(self) -> bytes:
        return self.body + self.signature.to_bytes()

    @cached_property
    def tx_hash(self) -> bytes:
        return keccak256(self.encode())

    @property
    def call(self) -> tuple[str, dict]:
        data = json.loads(self.payload)
        if not isinstance(data, dict) or not isinstance(data.get("op"), str) or not isinstance(data.get("args"), dict):
            raise ValueError("malformed payload")
        return data["op"], data["args"]

    def signature_valid(self) -> bool:
        return identity.recover_address(self.body, self.signature) == self.sender

    @classmethod
    def decode(cls, data: bytes) -> "Transaction":
        r = Reader(data)
        sender = Address(r.take(20))
        flag = r.u8()
        if flag not in (0, 1):
            raise DecodeError("bad target flag")
        target = Address(r.take(20)) if flag else None
        nonce = r.u64()
        payload = r.lp32()
        sig = Signature.from_bytes(r.take(65))
        r.expect_done()
        return cls(sender, target, payload, nonce, sig)

    def to_json(self) -> dict:
        op, args = self.call
        return {
            "tx_hash": self.tx_hash.hex(),
            "sender": self.sender.hex(),
            "target": None if self.target is None else self.target.hex(),
            "nonce": self.nonce,
            "op": op,
            "args": args,
            "signature": self.signature.hex(),
        }


@dataclass(frozen=True)
class Event:
    name: str
    payload: dict


@dataclass(frozen=True)
class Receipt:
    tx_hash: bytes
    status: str
    gas_used: int
    reason: str = ""
    events: tuple[Event, ...] = ()

    @property
    def ok(self) -> bool:
        return self.status == ACCEPTED

    def raise_for_status(self) -> "Receipt":
        if not self.ok:
            raise error_class(self.reason)(self.reason)
        return self

    def event(self, name: str) -> dict | None:
        for ev in self.events:
            if ev.name == name:
                return ev.payload
        return None

    def encode(self) -> bytes:
        out = [self.tx_hash, u8(_STATUS_CODES[self.status]), lp16(self.reason.encode("utf-8")), u64(self.gas_used)]
        out.append(u16(len(self.events)))
        for ev in self.events:
            out.append(lp16(ev.name.encode("utf-8")))
            out.append(lp32(canonical_json(ev.payload)))
        return b"".join(out)

    @classmethod
    def decode(cls, data: bytes) -> "Receipt":
        r = Reader(data)
        tx_hash = r.take(32)
        code = r.u8()
        status = {v: k for k, v in _STATUS_CODES.items()}.get(code)
        if status is None:
            raise DecodeError("bad status")
        reason = r.text16()
        gas = r.u64()
        events = []
        for _ in range(r.u16()):
            name = r.text16()
            try:
                payload = json.loads(r.lp32())
            except ValueError as exc:
                raise DecodeError("bad event payload") from exc
            events.append(Event(name, payload))
        r.expect_done()
        return cls(tx_hash, status, gas, reason, tuple(events))

    def to_json(self) -> dict:
        return {
            "tx_hash": self.tx_hash.hex(),
            "status": self.status,
            "reason": self.reason,
            "gas_used": self.gas_used,
            "events": [{"name": e.name, "payload": e.payload} for e in self.events],
        }


@dataclass(frozen=True)
class Block:
    height: int
    parent_hash: bytes
    txs: tuple[Transaction, ...]
    receipts: tuple[Receipt, ...]
    state_root: bytes
    block_hash: bytes

    @staticmethod
    def compute_hash(height, parent_hash, txs, receipts, state_root) -> bytes:
        parts = [u64(height), parent_hash]
        parts += [tx.tx_hash for tx in txs]
        parts += [keccak256(rc.encode()) for rc in receipts]
        parts.append(state_root)
        return keccak256(b"".join(parts))

    def expected_hash(self) -> bytes:
        return self.compute_hash(self.height, self.parent_hash, self.txs, self.receipts, self.state_root)

    def encode(self) -> bytes:
        out = [u64(self.height), self.parent_hash, self.state_root, self.block_hash, u32(len(self.txs))]
        out += [lp32(tx.encode()) for tx in self.txs]
        out += [lp32(rc.encode()) for rc in self.receipts]
        return b"".join(out)

    @classmethod
    def decode(cls, data: bytes) -> "Block":
        r = Reader(data)
        height = r.u64()
        parent, root, bhash = r.take(32), r.take(32), r.take(32)
        n = r.u32()
        txs = tuple(Transaction.decode(r.lp32()) for _ in range(n))
        receipts = tuple(Receipt.decode(r.lp32()) for _ in range(n))
        r.expect_done()
        return cls(height, parent, txs, receipts, root, bhash)

    def to_json(self) -> dict:
        return {
            "height": self.height,
            "parent_hash": self.parent_hash.hex(),
            "block_hash": self.block_hash.hex(),
            "state_root": self.state_root.hex(),
            "transactions": [tx.to_json() for tx in self.txs],
            "receipts": [rc.to_json() for rc in self.receipts],
        }


@dataclass(frozen=True)
class TraceEntry:
    """One executed transaction, labelled by contract kind and operation."""

    height: int
    kind: str
    op: str
    status: str
    gas_used: int


def contract_id(sender: Address, nonce: int) -> Address:
    return Address(keccak256(sender.raw + u64(nonce))[-20:])


@dataclass
class _Deployed:
    kind: str
    instance: Contract


class Ledger:
    """Embedded chain holding contract state.

    Transactions are queued by :meth:`submit_transaction` and executed in
    FIFO order by :meth:`mine_block`. The administrator address is the only
    account allowed to deploy contracts.
    """

    def __init__(self, admin: Address, schedule: GasSchedule, code_weights: dict[str, int] | None = None):
        self.admin = admin
        self.schedule = schedule
        self.code_weights = dict(code_weights or {})
        self.blocks: list[Block] = []
        self._contracts: dict[Address, _Deployed] = {}
        self._nonces: dict[Address, int] = {}
        self._pending_nonces: dict[Address, int] = {}
        self._pending: deque[Transaction] = deque()
        self._receipts: dict[bytes, tuple[int, Receipt]] = {}
        self._queue_lock = threading.Lock()
        self._state_lock = threading.RLock()
        self._seal([], [])

    # -- queries -------------------------------------------------------

    @property
    def height(self) -> int:
        return self.blocks[-1].height

    @property
    def head(self) -> Block:
        return self.blocks[-1]

    def next_nonce(self, sender: Address) -> int:
        with self._queue_lock:
            return self._pending_nonces.get(sender, self._nonces.get(sender, 0))

    def contract(self, cid: Address) -> Contract:
        try:
            return self._contracts[cid].instance
        except KeyError:
            raise UnknownContract(cid.hex()) from None

    def contracts(self) -> dict[str, str]:
        return {cid.hex(): d.kind for cid, d in self._contracts.items()}

    def sealed(self):
        """Lock held while reading committed state outside a view call."""
        return self._state_lock

    def call(self, cid: Address, view: str, **args):
        with self._state_lock:
            return self.contract(cid).call(view, **args)

    def receipt(self, tx_hash: bytes) -> Receipt:
        return self._receipts[tx_hash][1]

    def code_units(self, kind: str) -> int:
        return CONTRACT_TYPES[kind].code_size() * self.code_weights.get(kind, 1)

    def trace(self) -> list[TraceEntry]:
        out = []
        kinds = {cid: d.kind for cid, d in self._contracts.items()}
        for block in self.blocks:
            for tx, rc in zip(block.txs, block.receipts):
                op, args = tx.call
                if tx.target is None:
                    kind, op = "deploy", args.get("kind", "?")
                else:
                    kind = kinds.get(tx.target, "?")
                out.append(TraceEntry(block.height, kind, op, rc.status, rc.gas_used))
        return out

    # -- gas -----------------------------------------------------------

    def meter(self, tx: Transaction, storage_ops: StorageOps) -> int:
        return meter(self.schedule, len(tx.payload), storage_ops)

    # -- submission ----------------------------------------------------

    def submit_transaction(self, tx: Transaction) -> bytes:
        """Validate and enqueue a transaction; returns its hash."""
        if not tx.signature_valid():
            raise BadSignature(tx.sender.hex())
        with self._queue_lock:
            expected = self._pending_nonces.get(tx.sender, self._nonces.get(tx.sender, 0))
            if tx.nonce != expected:
                raise BadNonce(f"expected nonce {expected}, got {tx.nonce}")
            if tx.target is not None and tx.target not in self._contracts:
                raise UnknownContract(tx.target.hex())
            self._pending_nonces[tx.sender] = expected + 1
            self._pending.append(tx)
        return tx.tx_hash

    def execute(self, tx: Transaction) -> Receipt:
        """Submit then mine immediately."""
        h = self.submit_transaction(tx)
        self.mine_block()
        return self.receipt(h)

    def deploy_contract(self, tx: Transaction) -> tuple[Address, Receipt]:
        if tx.target is not None:
            raise ValueError("deployment transactions carry no target")
        rc = self.execute(tx)
        if not rc.ok:
            raise error_class(rc.reason)(rc.reason)
        return Address.from_hex(rc.event("Deployed")["contract_id"]), rc

    @property
    def pending(self) -> int:
        return len(self._pending)

    def pending_transactions(self) -> list[Transaction]:
        with self._queue_lock:
            return list(self._pending)

    # -- mining --------------------------------------------------------

    def mine_block(self) -> Block:
        with self._queue_lock:
            batch = list(self._pending)
            self._pending.clear()
        with self._state_lock:
            receipts = [self._apply(tx) for tx in batch]
            for tx in batch:
                self._nonces[tx.sender] = tx.nonce + 1
            return self._seal(batch, receipts)

    def _seal(self, txs, receipts) -> Block:
        height = len(self.blocks)
        parent = self.blocks[-1].block_hash if self.blocks else ZERO_HASH
        root = self.state_root()
        bhash = Block.compute_hash(height, parent, txs, receipts, root)
        block = Block(height, parent, tuple(txs), tuple(receipts), root, bhash)
        self.blocks.append(block)
        for rc in receipts:
            self._receipts[rc.tx_hash] = (height, rc)
        return block

    def _apply(self, tx: Transaction) -> Receipt:
        h = tx.tx_hash
        try:
            op, args = tx.call
        except (ValueError, KeyError):
            return Receipt(h, REJECTED, self.meter(tx, StorageOps()), "MalformedPayload")
        if tx.target is None:
            return self._apply_deploy(tx, h, op, args)
        deployed = self._contracts[tx.target]
        ctx = Context(self, deployed.instance, tx.sender, h)
        try:
            deployed.instance.execute(ctx, op, args)
        except ContractError as exc:
            gas = self.meter(tx, StorageOps(reads=ctx.reads))
            return Receipt(h, REJECTED, gas, exc.reason)
        deployed.instance.storage.apply(ctx.overlay)
        events = tuple(Event(name, payload) for name, payload in ctx.events)
        return Receipt(h, ACCEPTED, self.meter(tx, ctx.ops), "", events)

    def _apply_deploy(self, tx, h, op, args) -> Receipt:
        base = self.meter(tx, StorageOps())
        if tx.sender != self.admin:
            return Receipt(h, REJECTED, base, Unauthorized.reason)
        kind = args.get("kind")
        if op != "deploy" or kind not in CONTRACT_TYPES:
            return Receipt(h, REJECTED, base, "UnknownContractKind")
        cls = CONTRACT_TYPES[kind]
        config = args.get("config", {})
        try:
            cls.validate_config(config)
        except ContractError as exc:
            return Receipt(h, REJECTED, base, exc.reason)
        cid = contract_id(tx.sender, tx.nonce)
        storage = Storage({"__config__": canonical_json(config).decode("utf-8")})
        self._contracts[cid] = _Deployed(kind, cls(cid, storage))
        gas = deployment_gas(self.schedule, self.code_units(kind))
        event = Event("Deployed", {"contract_id": cid.hex(), "kind": kind})
        return Receipt(h, ACCEPTED, gas, "", (event,))

    def state_root(self) -> bytes:
        parts = [self.admin.raw]
        for addr in sorted(self._nonces):
            parts.append(addr.raw + u64(self._nonces[addr]))
        for cid in sorted(self._contracts):
            d = self._contracts[cid]
            parts.append(cid.raw + lp16(d.kind.encode()) + d.instance.storage.digest(keccak256))
        return keccak256(b"".join(parts))

    # -- integrity -----------------------------------------------------

    def verify_chain(self) -> bool:
        return verify_blocks(self.blocks)

    # -- persistence ---------------------------------------------------

    def to_bytes(self) -> bytes:
        return encode_blocks(self.blocks)

    def export_json(self) -> dict:
        return {
            "admin": self.admin.hex(),
            "schedule": self.schedule.to_dict(),
            "contracts": self.contracts(),
            "blocks": [b.to_json() for b in self.blocks],
        }

    def save(self, path: str | Path):
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def replay(cls, blocks: list[Block], admin: Address, schedule: GasSchedule,
               code_weights: dict[str, int] | None = None) -> "Ledger":
        """Rebuild a ledger by re-executing every block from genesis.

        Raises LedgerError if the replayed chain differs in any way from the
        supplied blocks (hashes, receipts or state roots).
        """
        if not verify_blocks(blocks):
            raise LedgerError("chain does not verify")
        ledger = cls(admin, schedule, code_weights)
        if ledger.blocks[0] != blocks[0]:
            raise LedgerError("genesis mismatch")
        for block in blocks[1:]:
            for tx in block.txs:
                ledger.submit_transaction(tx)
            mined = ledger.mine_block()
            if mined != block:
                raise LedgerError(f"replay diverged at height {block.height}")
        return ledger

    @classmethod
    def load(cls, path: str | Path, admin: Address, schedule: GasSchedule,
             code_weights: dict[str, int] | None = None) -> "Ledger":
        return cls.replay(decode_blocks(Path(path).read_bytes()), admin, schedule, code_weights)


def encode_blocks(blocks: list[Block]) -> bytes:
    return LOG_MAGIC + b"".join(lp32(b.encode()) for b in blocks)


def decode_blocks(data: bytes) -> list[Block]:
    if not data.startswith(LOG_MAGIC):
        raise DecodeError("not a chain log")
    r = Reader(data)
    r.take(len(LOG_MAGIC))
    blocks = []
    while not r.done:
        blocks.append(Block.decode(r.lp32()))
    if encode_blocks(blocks) != data:
        raise DecodeError("non-canonical encoding")
    return blocks


def verify_blocks(blocks: list[Block]) -> bool:
    if not blocks:
        return False
    parent = ZERO_HASH
    for height, block in enumerate(blocks):
        if block.height != height or block.parent_hash != parent:
            return False
        if len(block.txs) != len(block.receipts):
            return False
        if block.expected_hash() != block.block_hash:
            return False
        for tx, rc in zip(block.txs, block.receipts):
            if rc.tx_hash != tx.tx_hash or not tx.signature_valid():
                return False
        parent = block.block_hash
    return True


def verify_log(data: bytes) -> bool:
    """Verify a serialized chain; undecodable input counts as tampered."""
    try:
        blocks = decode_blocks(data)
    except (DecodeError, ValueError):
        return False
    return verify_blocks(blocks)
