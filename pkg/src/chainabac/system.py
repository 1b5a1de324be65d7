"""Wiring: derive the authority keys, start a ledger and deploy every contract."""

from __future__ import annotations

from dataclasses import dataclass, field

from .ama import AttributeAuthority
from .amf import AccessManagementFramework
from .attributes import Kind
from .identity import Address
from .ledger import Account, GasSchedule, Ledger, load_schedule
from .ledger.gas import default_code_weights
from .pma import PolicyAuthority

ACTORS = ("AA", "AMA", "PMA", "AMF")

DEFAULT_SEEDS = {"AA": "administrator-authority", "AMA": "attribute-authority",
                 "PMA": "policy-authority", "AMF": "access-management"}

DEPLOY_ORDER = ("SubjectAttributes", "ObjectAttributes", "EnvironmentAttributes", "PolicyManagement", "AccessManagement")


@dataclass
class System:
    ledger: Ledger
    accounts: dict[str, Account]
    contracts: dict[str, Address] = field(default_factory=dict)

    @classmethod
    def create(cls, seeds: dict[str, str] | None = None, schedule: GasSchedule | None = None,
               code_weights: dict[str, int] | None = None) -> "System":
        seeds = {**DEFAULT_SEEDS, **(seeds or {})}
        accounts = {name: Account.from_seed(seeds[name], name) for name in ACTORS}
        schedule = schedule or load_schedule()
        weights = default_code_weights() if code_weights is None else code_weights
        ledger = Ledger(accounts["AA"].address, schedule, weights)
        system = cls(ledger, accounts)
        system.deploy_all()
        return system

    def deploy_all(self):
        aa = self.accounts["AA"]
        ama = self.accounts["AMA"].address.hex()
        for kind in DEPLOY_ORDER[:3]:
            self.contracts[kind], _ = aa.deploy(self.ledger, kind, {"operator": ama})
        self.contracts["PolicyManagement"], _ = aa.deploy(
            self.ledger, "PolicyManagement", {"operator": self.accounts["PMA"].address.hex()})
        self.contracts["AccessManagement"], _ = aa.deploy(self.ledger, "AccessManagement", {
            "operator": self.accounts["AMF"].address.hex(),
            "admin": aa.address.hex(),
            "subjects": self.contracts["SubjectAttributes"].hex(),
            "objects": self.contracts["ObjectAttributes"].hex(),
            "policies": self.contracts["PolicyManagement"].hex(),
        })

    @classmethod
    def attach(cls, ledger: Ledger, seeds: dict[str, str]) -> "System":
        """Bind clients to an already-deployed ledger (e.g. one rebuilt by replay)."""
        seeds = {**DEFAULT_SEEDS, **seeds}
        accounts = {name: Account.from_seed(seeds[name], name) for name in ACTORS}
        system = cls(ledger, accounts)
        by_kind: dict[str, Address] = {}
        for cid, kind in ledger.contracts().items():
            by_kind.setdefault(kind, Address.from_hex(cid))
        system.contracts = by_kind
        return system

    @property
    def ama(self) -> AttributeAuthority:
        return AttributeAuthority(self.ledger, self.accounts["AMA"], {
            Kind.SUBJECT: self.contracts["SubjectAttributes"],
            Kind.OBJECT: self.contracts["ObjectAttributes"],
            Kind.ENVIRONMENT: self.contracts["EnvironmentAttributes"],
        })

    @property
    def pma(self) -> PolicyAuthority:
        return PolicyAuthority(self.ledger, self.accounts["PMA"], self.contracts["PolicyManagement"])

    @property
    def amf(self) -> AccessManagementFramework:
        return AccessManagementFramework(self.ledger, self.accounts["AMF"], self.contracts["AccessManagement"])
