from .chain import (
    ACCEPTED,
    REJECTED,
    BadNonce,
    BadSignature,
    Block,
    Event,
    Ledger,
    LedgerError,
    Receipt,
    TraceEntry,
    Transaction,
    UnknownContract,
    decode_blocks,
    encode_blocks,
    verify_blocks,
    verify_log,
)
from .contract import Context, Contract, ContractError, Unauthorized, error_class, register_contract, reject
from .gas import GasSchedule, StorageOps, deployment_gas, load_config, load_schedule, meter
from .account import Account
