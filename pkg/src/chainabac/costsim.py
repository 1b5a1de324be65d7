"""Financial cost model and gas-ordering checks.

    cost = n_tx * gas_per_tx * gas_to_currency * currency_to_fiat

All arithmetic is exact (``Decimal`` with a wide context); rounding happens
only when a report is serialized.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from decimal import Context, Decimal, localcontext
from statistics import mean

from .ledger import ACCEPTED, TraceEntry, load_config

_EXACT = Context(prec=60)

SCHEMES = ("proposed", "zhang", "yutaka")
REPORT_COLUMNS = ("scheme", "case", "miners", "devices", "total", "n_tx", "gas_per_tx",
                  "total_gas", "cost_currency", "cost_fiat", "measured_gas")


class InsufficientSamples(ValueError):
    pass


def _dec(value) -> Decimal:
    return value if isinstance(value, Decimal) else Decimal(str(value))


@dataclass(frozen=True)
class CostParams:
    gas_per_tx: int
    gas_to_currency: Decimal = Decimal("1e-9")
    currency_to_fiat: Decimal = Decimal("76.61")

    def __post_init__(self):
        object.__setattr__(self, "gas_to_currency", _dec(self.gas_to_currency))
        object.__setattr__(self, "currency_to_fiat", _dec(self.currency_to_fiat))
        if self.gas_per_tx <= 0 or self.gas_to_currency <= 0 or self.currency_to_fiat <= 0:
            raise ValueError("cost parameters must be positive")


@dataclass(frozen=True)
class ScenarioCase:
    miners: int
    devices: int
    total: int
    tx_per_device: int = 15

    def __post_init__(self):
        if min(self.miners, self.devices, self.tx_per_device) < 0 or self.total != self.miners + self.devices:
            raise ValueError("total must equal miners + devices, all counts non-negative")

    @classmethod
    def of(cls, miners: int, devices: int, tx_per_device: int = 15) -> "ScenarioCase":
        return cls(miners, devices, miners + devices, tx_per_device)


@dataclass(frozen=True)
class ScenarioReport:
    n_tx: int
    total_gas: int
    cost_currency: Decimal
    cost_fiat: Decimal
    measured_gas: int | None = None

    def as_row(self) -> dict:
        return {
            "n_tx": self.n_tx,
            "total_gas": self.total_gas,
            # display rounding only
            "cost_currency": f"{self.cost_currency:.5f}",
            "cost_fiat": f"{self.cost_fiat:.7f}",
            "measured_gas": "" if self.measured_gas is None else self.measured_gas,
        }


def financial_cost(n_tx: int, params: CostParams) -> tuple[int, Decimal, Decimal]:
    if n_tx < 0:
        raise ValueError("n_tx must be non-negative")
    with localcontext(_EXACT):
        total_gas = n_tx * params.gas_per_tx
        currency = Decimal(total_gas) * params.gas_to_currency
        fiat = currency * params.currency_to_fiat
    return total_gas, currency, fiat


def run_scenario(case: ScenarioCase, params: CostParams, measure: bool = False, seed: int = 0) -> ScenarioReport:
    """Analytic cost of a case; with ``measure`` also drives a live ledger.

    The measured figure is the total gas the embedded ledger charged for a
    synthetic workload of ``n_tx`` transactions. It is reported next to the
    analytic constant, not substituted for it.
    """
    n_tx = case.tx_per_device * case.total
    total_gas, currency, fiat = financial_cost(n_tx, params)
    measured = None
    if measure and n_tx:
        from .scenarios import run_workload
        from .system import System

        system = System.create()
        start = len(system.ledger.trace())
        run_workload(system, n_tx, seed=seed, mine_every=25)
        measured = sum(t.gas_used for t in system.ledger.trace()[start:])
    return ScenarioReport(n_tx, total_gas, currency, fiat, measured)


# -- configuration -----------------------------------------------------------


def default_params(scheme: str = "proposed", config: dict | None = None) -> CostParams:
    cfg = config or load_config()
    cost = cfg.get("cost_params", {})
    return CostParams(
        int(cfg["schemes"][scheme]),
        Decimal(str(cost.get("gas_to_currency", "1e-9"))),
        Decimal(str(cost.get("currency_to_fiat", "76.61"))),
    )


def load_params(path, scheme: str = "proposed") -> tuple[CostParams, int]:
    """Read {gas_per_tx, gas_to_currency, currency_to_fiat, tx_per_device} from TOML/JSON."""
    cfg = load_config(path)
    cfg = cfg.get("cost_params", cfg)
    base = default_params(scheme)
    params = CostParams(
        int(cfg.get("gas_per_tx", base.gas_per_tx)),
        Decimal(str(cfg.get("gas_to_currency", base.gas_to_currency))),
        Decimal(str(cfg.get("currency_to_fiat", base.currency_to_fiat))),
    )
    return params, int(cfg.get("tx_per_device", 15))


def default_case(number: int, config: dict | None = None, tx_per_device: int | None = None) -> ScenarioCase:
    cfg = config or load_config()
    case = cfg["cases"][str(number)]
    tpd = tx_per_device if tx_per_device is not None else int(cfg.get("cost_params", {}).get("tx_per_device", 15))
    return ScenarioCase.of(int(case["miners"]), int(case["devices"]), tpd)


def table_rows(schemes=SCHEMES, cases=(1, 2, 3), measure: bool = False) -> list[dict]:
    rows = []
    for scheme in schemes:
        params = default_params(scheme)
        for number in cases:
            case = default_case(number)
            report = run_scenario(case, params, measure=measure)
            rows.append({"scheme": scheme, "case": number, "miners": case.miners, "devices": case.devices,
                         "total": case.total, "gas_per_tx": params.gas_per_tx, **report.as_row()})
    return rows


def emit_report(rows: list[dict] | ScenarioReport, format: str = "csv") -> bytes:
    """Serialize report rows with the fixed REPORT_COLUMNS order."""
    if isinstance(rows, ScenarioReport):
        rows = [rows.as_row()]
    columns = [c for c in REPORT_COLUMNS if any(c in r for r in rows)]
    if format == "json":
        return (json.dumps([{c: r.get(c, "") for c in columns} for r in rows], indent=2) + "\n").encode()
    if format != "csv":
        raise ValueError(f"unknown format {format!r}")
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue().encode()


# -- gas orderings -----------------------------------------------------------

# op classes are (contract kind, operation); deployments use kind "deploy"
CLASSES = {
    "deploy_amf": ("deploy", "AccessManagement"),
    "deploy_pma": ("deploy", "PolicyManagement"),
    "deploy_subject": ("deploy", "SubjectAttributes"),
    "deploy_object": ("deploy", "ObjectAttributes"),
    "deploy_environment": ("deploy", "EnvironmentAttributes"),
    "subject_register": ("SubjectAttributes", "register"),
    "subject_update": ("SubjectAttributes", "update"),
    "subject_revoke": ("SubjectAttributes", "revoke"),
    "object_register": ("ObjectAttributes", "register"),
    "object_update": ("ObjectAttributes", "update"),
    "object_revoke": ("ObjectAttributes", "revoke"),
    "policy_add": ("PolicyManagement", "add"),
    "policy_update": ("PolicyManagement", "update"),
    "policy_revoke": ("PolicyManagement", "revoke"),
}

ORDERINGS = {
    "deploy: AMF > PMA": ("deploy_amf", "deploy_pma"),
    "deploy: PMA > subject attributes": ("deploy_pma", "deploy_subject"),
    "deploy: PMA > object attributes": ("deploy_pma", "deploy_object"),
    "deploy: PMA > environment attributes": ("deploy_pma", "deploy_environment"),
    "subject: register > revoke": ("subject_register", "subject_revoke"),
    "subject: revoke > update": ("subject_revoke", "subject_update"),
    "object: register > update": ("object_register", "object_update"),
    "object: update > revoke": ("object_update", "object_revoke"),
    "policy: add > update": ("policy_add", "policy_update"),
    "policy: add > revoke": ("policy_add", "policy_revoke"),
}


def class_means(trace: list[TraceEntry]) -> dict[str, float]:
    samples: dict[str, list[int]] = {name: [] for name in CLASSES}
    lookup = {v: k for k, v in CLASSES.items()}
    for t in trace:
        name = lookup.get((t.kind, t.op))
        if name is not None and t.status == ACCEPTED:
            samples[name].append(t.gas_used)
    missing = [n for n, s in samples.items() if not s]
    if missing:
        raise InsufficientSamples(", ".join(missing))
    return {n: mean(s) for n, s in samples.items()}


def gas_ordering_report(trace: list[TraceEntry]) -> dict[str, bool]:
    """Verdict per claimed ordering, comparing mean accepted gas per op class."""
    means = class_means(trace)
    return {label: means[a] > means[b] for label, (a, b) in ORDERINGS.items()}
