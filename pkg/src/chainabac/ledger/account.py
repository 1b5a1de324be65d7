"""Client-side signer that tracks its own nonce."""

from __future__ import annotations

from ..identity import Address, KeyPair, keypair
from .chain import Ledger, Receipt, Transaction


class Account:
    def __init__(self, keys: KeyPair, name: str = ""):
        self.keys = keys
        self.name = name

    @classmethod
    def from_seed(cls, seed: str, name: str = "") -> "Account":
        return cls(keypair(seed), name or seed)

    @property
    def address(self) -> Address:
        return self.keys.address

    def transaction(self, ledger: Ledger, target: Address | None, op: str, args: dict) -> Transaction:
        return Transaction.build(self.keys, target, op, args, ledger.next_nonce(self.address))

    def send(self, ledger: Ledger, target: Address | None, op: str, args: dict, mine: bool = True) -> Receipt | bytes:
        """Submit a call; returns the receipt when mined now, else the tx hash."""
        tx = self.transaction(ledger, target, op, args)
        if mine:
            return ledger.execute(tx)
        return ledger.submit_transaction(tx)

    def deploy(self, ledger: Ledger, kind: str, config: dict) -> tuple[Address, Receipt]:
        tx = self.transaction(ledger, None, "deploy", {"kind": kind, "config": config})
        return ledger.deploy_contract(tx)

    def __repr__(self):
        return f"Account({self.name!r}, {self.address})"
