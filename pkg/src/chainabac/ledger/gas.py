"""Gas schedule and metering."""

from __future__ import annotations

import json
import sys
from dataclasses import asdict, dataclass, fields
from importlib import resources
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


@dataclass(frozen=True)
class GasSchedule:
    base_tx: int
    per_payload_byte: int
    per_storage_write: int
    per_storage_delete: int
    per_storage_read: int
    deploy_base: int
    per_code_unit: int

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not isinstance(value, int) or value <= 0:
                raise ValueError(f"gas schedule entry {f.name} must be a positive integer")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "GasSchedule":
        names = {f.name for f in fields(cls)}
        missing = names - data.keys()
        if missing:
            raise ValueError(f"gas schedule missing {sorted(missing)}")
        return cls(**{k: data[k] for k in names})


@dataclass(frozen=True)
class StorageOps:
    reads: int = 0
    writes: int = 0
    deletes: int = 0


def load_config(path: str | Path | None = None) -> dict:
    """Load a TOML or JSON config file; the packaged defaults when no path is given."""
    if path is None:
        text = resources.files("chainabac.data").joinpath("defaults.toml").read_text()
        return tomllib.loads(text)
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json":
        return json.loads(text)
    return tomllib.loads(text)


def load_schedule(path: str | Path | None = None) -> GasSchedule:
    cfg = load_config(path)
    return GasSchedule.from_dict(cfg.get("gas_schedule", cfg))


def default_code_weights() -> dict[str, int]:
    return dict(load_config().get("code_weights", {}))


def meter(schedule: GasSchedule, payload_len: int, ops: StorageOps) -> int:
    return (
        schedule.base_tx
        + schedule.per_payload_byte * payload_len
        + schedule.per_storage_write * ops.writes
        + schedule.per_storage_delete * ops.deletes
        + schedule.per_storage_read * ops.reads
    )


def deployment_gas(schedule: GasSchedule, code_units: int) -> int:
    return schedule.deploy_base + schedule.per_code_unit * code_units
