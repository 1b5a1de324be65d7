"""Command-line entry point.

A workspace is a directory holding ``workspace.json`` (actor seeds, gas
schedule, code weights, cost parameters), ``chain.log`` (sealed blocks) and
``pending.log`` (queued transactions when ``--defer-mine`` is used). Every
invocation rebuilds state by replaying the chain from genesis.

Exit status: 0 success, 1 domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import fcntl
import json
import os
import sys
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

from . import costsim
from .ama import EnvironmentRecord, ObjectRecord, SubjectRecord
from .amf import (
    AccessRequest,
    AccessTicket,
    Decision,
    EnvironmentSnapshot,
    IncompleteSnapshot,
    audit_csv,
    audit_json,
)
from .attributes import Attribute, Kind, MalformedAttribute
from .identity import Address, DegenerateSeed, keypair
from .ledger import ContractError, GasSchedule, Ledger, LedgerError, Transaction, load_config, load_schedule
from .ledger.codec import DecodeError, Reader, lp32
from .ledger.gas import default_code_weights
from .pma import Action, Policy, PolicyError, export_policies
from .scenarios import load_smart_home
from .system import ACTORS, DEFAULT_SEEDS, System

CONFIG_ENV = "CHAINABAC_CONFIG"
DATA_ENV = "CHAINABAC_HOME"
WORKSPACE_FILE = "workspace.json"
CHAIN_FILE = "chain.log"
PENDING_FILE = "pending.log"
LOCK_FILE = ".lock"
PENDING_MAGIC = b"ABCP\x01"


class UsageError(Exception):
    pass


class DomainError(Exception):
    pass


class DirNotEmpty(DomainError):
    pass


class WorkspaceLocked(DomainError):
    pass


@dataclass
class WorkspaceConfig:
    data_dir: Path
    gas_schedule: GasSchedule
    cost_params: dict = field(default_factory=dict)
    seeds: dict[str, str] = field(default_factory=lambda: dict(DEFAULT_SEEDS))
    code_weights: dict[str, int] = field(default_factory=default_code_weights)

    def __post_init__(self):
        if not self.seeds or any(not s for s in self.seeds.values()):
            raise DomainError("actor seeds must be nonempty")

    @classmethod
    def from_file(cls, data_dir: Path, path: str | Path | None) -> "WorkspaceConfig":
        cfg = load_config(path)
        defaults = load_config()
        return cls(
            data_dir,
            GasSchedule.from_dict(cfg.get("gas_schedule", defaults["gas_schedule"])),
            {k: str(v) for k, v in cfg.get("cost_params", defaults["cost_params"]).items()},
            {**DEFAULT_SEEDS, **cfg.get("seeds", {})},
            dict(cfg.get("code_weights", defaults["code_weights"])),
        )

    def to_json(self) -> dict:
        return {
            "seeds": self.seeds,
            "gas_schedule": self.gas_schedule.to_dict(),
            "code_weights": self.code_weights,
            "cost_params": self.cost_params,
        }


# -- workspace ----------------------------------------------------------------


@dataclass
class Workspace:
    config: WorkspaceConfig
    system: System

    @property
    def ledger(self) -> Ledger:
        return self.system.ledger

    def save(self):
        d = self.config.data_dir
        self.ledger.save(d / CHAIN_FILE)
        pending = b"".join(lp32(tx.encode()) for tx in self.ledger.pending_transactions())
        (d / PENDING_FILE).write_bytes(PENDING_MAGIC + pending)


def _read_pending(path: Path) -> list[Transaction]:
    if not path.exists():
        return []
    data = path.read_bytes()
    if not data.startswith(PENDING_MAGIC):
        raise DecodeError("not a pending log")
    r = Reader(data)
    r.take(len(PENDING_MAGIC))
    txs = []
    while not r.done:
        txs.append(Transaction.decode(r.lp32()))
    return txs


@contextmanager
def _locked(data_dir: Path):
    data_dir.mkdir(parents=True, exist_ok=True)
    fh = open(data_dir / LOCK_FILE, "a")
    try:
        try:
            fcntl.flock(fh, fcntl.LOCK_EX | fcntl.LOCK_NB)
        except BlockingIOError:
            raise WorkspaceLocked(f"{data_dir} is in use by another process") from None
        yield
    finally:
        fh.close()


def _config_path(args) -> str | None:
    return args.config or os.environ.get(CONFIG_ENV)


def open_workspace(args) -> Workspace:
    d = Path(args.data_dir)
    cfg_file = _config_path(args) or d / WORKSPACE_FILE
    if not (d / CHAIN_FILE).exists() or not Path(cfg_file).exists():
        raise DomainError(f"{d} is not an initialized workspace (run `init`)")
    config = WorkspaceConfig.from_file(d, cfg_file)
    admin = keypair(config.seeds["AA"]).address
    ledger = Ledger.load(d / CHAIN_FILE, admin, config.gas_schedule, config.code_weights)
    for tx in _read_pending(d / PENDING_FILE):
        ledger.submit_transaction(tx)
    return Workspace(config, System.attach(ledger, config.seeds))


# -- output helpers -----------------------------------------------------------


def _emit(obj, fmt: str | None = None):
    if fmt == "json":
        print(json.dumps(obj, indent=2, sort_keys=True))
    elif isinstance(obj, dict):
        for k, v in obj.items():
            print(f"{k}: {v if not isinstance(v, (dict, list)) else json.dumps(v, sort_keys=True)}")
    elif isinstance(obj, list):
        for item in obj:
            print(json.dumps(item, sort_keys=True) if not isinstance(item, str) else item)
    else:
        print(obj)


def _pairs(items: list[str] | None) -> list[tuple[str, str]]:
    out = []
    for item in items or []:
        name, sep, value = item.partition("=")
        if not sep or not name.strip():
            raise UsageError(f"expected name=value, got {item!r}")
        out.append((name.strip(), value.strip()))
    return out


def _read_json_arg(value: str):
    if value == "-":
        return json.load(sys.stdin)
    return json.loads(Path(value).read_text())


def _outcome(ws: Workspace, result, fmt):
    """Report a receipt (or a queued tx hash) and return the exit status."""
    if isinstance(result, bytes):
        _emit({"status": "Pending", "tx_hash": result.hex()}, fmt)
        return 0
    _emit(result.to_json() if fmt == "json" else
          {"status": result.status, "reason": result.reason, "gas_used": result.gas_used,
           "tx_hash": result.tx_hash.hex()}, fmt)
    return 0 if result.ok else 1


# -- commands -----------------------------------------------------------------


def cmd_init(args) -> int:
    d = Path(args.data_dir)
    if d.exists() and any(p.name != LOCK_FILE for p in d.iterdir()):
        raise DirNotEmpty(f"{d} is not empty")
    with _locked(d):
        config = WorkspaceConfig.from_file(d, _config_path(args))
        system = System.create(config.seeds, config.gas_schedule, config.code_weights)
        (d / WORKSPACE_FILE).write_text(json.dumps(config.to_json(), indent=2, sort_keys=True) + "\n")
        Workspace(config, system).save()
    out = {
        "height": system.ledger.height,
        "actors": {name: acct.address.hex() for name, acct in system.accounts.items()},
        "contracts": {kind: cid.hex() for kind, cid in system.contracts.items()},
    }
    _emit(out, args.format)
    return 0


def cmd_key_show(ws: Workspace, args) -> int:
    keys = ws.system.accounts[args.actor].keys
    _emit({"actor": args.actor, "address": keys.address.hex(), "public_key": keys.public.hex()}, args.format)
    return 0


def _kind(args) -> Kind:
    return Kind(args.kind)


def cmd_attr_register(ws: Workspace, args) -> int:
    kind = _kind(args)
    attrs = _pairs(args.attr)
    ama = ws.system.ama
    mine = not args.defer_mine
    if kind is Kind.ENVIRONMENT:
        result = ama.register_environment(EnvironmentRecord.build(args.id, attrs), mine=mine)
    else:
        if not (args.eaddr or args.seed):
            raise UsageError("--eaddr or --seed is required for subjects and objects")
        device = keypair(args.seed) if args.seed else None
        eaddr = args.eaddr or device.address.hex()
        if kind is Kind.SUBJECT:
            result = ama.register_subject(SubjectRecord.build(args.id, eaddr, attrs), mine=mine)
        else:
            rec = ObjectRecord.build(args.id, eaddr, attrs, args.token or "")
            result = ama.register_object(rec, device.private if device else None, mine=mine)
    return _outcome(ws, result, args.format)


def cmd_attr_update(ws: Workspace, args) -> int:
    (name, value), = _pairs([args.attr])
    sk = keypair(args.seed).private if args.seed else None
    result = ws.system.ama.update_attribute(_kind(args), args.id, Attribute(name, value), sk, mine=not args.defer_mine)
    return _outcome(ws, result, args.format)


def cmd_attr_revoke(ws: Workspace, args) -> int:
    return _outcome(ws, ws.system.ama.revoke_record(_kind(args), args.id, mine=not args.defer_mine), args.format)


def cmd_attr_show(ws: Workspace, args) -> int:
    kind = _kind(args)
    contract = ws.system.ama.contract(kind)
    with ws.ledger.sealed():
        rec = contract.record(args.id)
    if rec is None:
        raise DomainError(f"NotFound: {kind.value} {args.id}")
    out = {"kind": kind.value, "id": args.id, "status": rec.status,
           "attributes": [[a.name, a.value] for a in rec.attributes]}
    if kind is not Kind.ENVIRONMENT:
        out["eaddr"] = rec.eaddr
    _emit(out, args.format)
    return 0


def _policy_from_args(args) -> Policy:
    if args.file:
        data = _read_json_arg(args.file)
        return Policy.from_json(data)
    if not args.pid or not args.actions:
        raise UsageError("policy add needs --file or --pid with --actions")
    return Policy.build(args.pid, _pairs(args.subject), _pairs(args.object), _pairs(args.env),
                        [a for a in args.actions.split(",") if a])


def cmd_policy_add(ws: Workspace, args) -> int:
    return _outcome(ws, ws.system.pma.add_policy(_policy_from_args(args), mine=not args.defer_mine), args.format)


def cmd_policy_update(ws: Workspace, args) -> int:
    actions = [a for a in args.actions.split(",") if a]
    return _outcome(ws, ws.system.pma.update_policy(args.pid, actions, mine=not args.defer_mine), args.format)


def cmd_policy_revoke(ws: Workspace, args) -> int:
    return _outcome(ws, ws.system.pma.revoke_policy(args.pid, mine=not args.defer_mine), args.format)


def cmd_policy_show(ws: Workspace, args) -> int:
    p = ws.system.pma.search_policy(args.pid)
    if p is None:
        raise DomainError(f"NotFound: policy {args.pid}")
    _emit(p.to_json(), args.format)
    return 0


def cmd_policy_list(ws: Workspace, args) -> int:
    policies = ws.system.pma.list_policies(args.filter)
    if args.format == "json":
        sys.stdout.write(export_policies(policies).decode())
    else:
        for p in policies:
            print(f"{p.pid}: actions={','.join(a.value for a in p.actions)} "
                  f"constraints={';'.join(str(c) for c in p.constraints())}")
    return 0


def _snapshot(args) -> EnvironmentSnapshot:
    if args.env:
        return EnvironmentSnapshot.from_json(_read_json_arg(args.env))
    behaviour = {args.oid: args.behaviour} if args.behaviour else {}
    auth = {args.oid: args.auth} if args.auth else {}
    return EnvironmentSnapshot.build(args.now, args.location or "", behaviour, auth)


def cmd_request_submit(ws: Workspace, args) -> int:
    if args.request:
        req = AccessRequest.from_json(_read_json_arg(args.request))
    else:
        if not (args.sid and args.oid and args.action and args.seed):
            raise UsageError("request submit needs --request FILE or --sid, --oid, --action and --seed")
        claimed = _pairs(args.attr) if args.attr else ws.system.ama.query_attributes(Kind.SUBJECT, args.sid) or ()
        req = AccessRequest.create(keypair(args.seed).private, args.sid, claimed, args.oid, args.action)
    env = _snapshot(args)
    amf = ws.system.amf
    tx_hash = amf.enqueue_request(req, env)
    if args.defer_mine:
        _emit({"status": "Pending", "tx_hash": tx_hash.hex()}, args.format)
        return 0
    ws.ledger.mine_block()
    return _print_ticket(amf.ticket_for(tx_hash), args.format)


def _print_ticket(t: AccessTicket, fmt) -> int:
    if fmt == "json":
        _emit(t.to_json(), "json")
    else:
        _emit({"sid": t.sid, "pid": t.pid or "", "decision": t.decision.value,
               "action_taken": t.action_taken.value, "signature": t.amf_signature.hex()})
    return 0


def cmd_request_block(ws: Workspace, args) -> int:
    fn = ws.system.amf.block_subject if args.command_name == "block" else ws.system.amf.unblock_subject
    return _outcome(ws, fn(args.sid, mine=not args.defer_mine), args.format)


def cmd_ticket_verify(ws: Workspace, args) -> int:
    try:
        t = AccessTicket.from_json(_read_json_arg(args.ticket))
    except (KeyError, ValueError, TypeError) as exc:
        raise DomainError(f"malformed ticket: {exc}") from exc
    ok = ws.system.amf.verify_ticket(t)
    print("true" if ok else "false")
    return 0 if ok else 1


def cmd_ticket_get(ws: Workspace, args) -> int:
    try:
        tx_hash = bytes.fromhex(args.tx_hash.removeprefix("0x"))
    except ValueError as exc:
        raise UsageError(f"bad tx hash {args.tx_hash!r}") from exc
    try:
        t = ws.system.amf.ticket_for(tx_hash)
    except KeyError:
        raise DomainError(f"no mined request {args.tx_hash}") from None
    return _print_ticket(t, args.format)


def cmd_audit(ws: Workspace, args) -> int:
    entries = ws.system.amf.audit(args.sid, args.pid, args.decision)
    if args.format == "json":
        print(audit_json(entries))
    else:
        sys.stdout.write(audit_csv(entries))
    return 0


def cmd_chain_verify(ws: Workspace, args) -> int:
    # open_workspace already replayed the chain; recheck hashes explicitly
    ok = ws.ledger.verify_chain()
    print("true" if ok else "false")
    return 0 if ok else 1


def cmd_chain_export(ws: Workspace, args) -> int:
    text = json.dumps(ws.ledger.export_json(), indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_chain_mine(ws: Workspace, args) -> int:
    if not ws.ledger.pending:
        _emit({"height": ws.ledger.height, "mined": 0}, args.format)
        return 0
    block = ws.ledger.mine_block()
    _emit({"height": block.height, "mined": len(block.txs), "block_hash": block.block_hash.hex()}, args.format)
    return 0


def cmd_scenario_run(args) -> int:
    if args.params:
        params, tpd = costsim.load_params(args.params, args.scheme)
    else:
        path = _config_path(args)
        cfg = load_config(path) if path else None
        params = costsim.default_params(args.scheme, cfg)
        tpd = int((cfg or load_config()).get("cost_params", {}).get("tx_per_device", 15))
    case = costsim.default_case(args.case, tx_per_device=tpd)
    report = costsim.run_scenario(case, params, measure=args.measure)
    row = {"scheme": args.scheme, "case": args.case, "miners": case.miners, "devices": case.devices,
           "total": case.total, "gas_per_tx": params.gas_per_tx, **report.as_row()}
    if not args.measure:
        row.pop("measured_gas")
    fmt = args.format or "csv"
    sys.stdout.write(costsim.emit_report([row], fmt).decode())
    return 0


def cmd_demo(ws: Workspace, args) -> int:
    fx = load_smart_home(ws.system)
    _emit({"subjects": sorted(fx.subjects), "objects": sorted(fx.devices),
           "policies": [p.pid for p in fx.policies], "transactions": len(fx.receipts),
           "height": ws.ledger.height}, args.format)
    return 0


# -- parser -------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--data-dir", default=argparse.SUPPRESS,
                        help=f"workspace directory (default ${DATA_ENV} or ./chainabac-data)")
    common.add_argument("--config", default=argparse.SUPPRESS,
                        help=f"config file (TOML/JSON); ${CONFIG_ENV} also works")
    common.add_argument("--format", choices=("json", "csv", "table"), default=argparse.SUPPRESS)
    mutating = argparse.ArgumentParser(add_help=False)
    mutating.add_argument("--defer-mine", action="store_true", help="queue the transaction without sealing a block")

    p = _Parser(prog="chainabac", description="ABAC authorisation on an embedded gas-metered ledger",
                parents=[common])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(parent, name, handler, *, parents=(common,), help=None, workspace=True):
        sp = parent.add_parser(name, parents=list(parents), help=help)
        sp.set_defaults(handler=handler, needs_workspace=workspace, command_name=name)
        return sp

    add(sub, "init", cmd_init, help="create a workspace and deploy the contracts", workspace=False)

    key = sub.add_parser("key", help="actor keys").add_subparsers(dest="sub", required=True, parser_class=_Parser)
    add(key, "show", cmd_key_show).add_argument("actor", choices=ACTORS)

    attr = sub.add_parser("attr", help="attribute records").add_subparsers(dest="sub", required=True,
                                                                           parser_class=_Parser)
    kinds = [k.value for k in Kind]
    sp = add(attr, "register", cmd_attr_register, parents=(common, mutating))
    sp.add_argument("--kind", choices=kinds, required=True)
    sp.add_argument("--id", required=True)
    sp.add_argument("--eaddr")
    sp.add_argument("--seed", help="key seed of the subject/device (derives EAddr, signs object tokens)")
    sp.add_argument("--token", help="precomputed object token")
    sp.add_argument("--attr", action="append", metavar="NAME=VALUE")
    sp = add(attr, "update", cmd_attr_update, parents=(common, mutating))
    sp.add_argument("--kind", choices=kinds, required=True)
    sp.add_argument("--id", required=True)
    sp.add_argument("--attr", required=True, metavar="NAME=VALUE")
    sp.add_argument("--seed", help="device key seed (object updates must re-sign the token)")
    for name, handler, extra in (("revoke", cmd_attr_revoke, (mutating,)), ("show", cmd_attr_show, ())):
        sp = add(attr, name, handler, parents=(common, *extra))
        sp.add_argument("--kind", choices=kinds, required=True)
        sp.add_argument("--id", required=True)

    pol = sub.add_parser("policy", help="access policies").add_subparsers(dest="sub", required=True,
                                                                          parser_class=_Parser)
    sp = add(pol, "add", cmd_policy_add, parents=(common, mutating))
    sp.add_argument("--file", help="policy JSON ('-' for stdin)")
    sp.add_argument("--pid")
    sp.add_argument("--subject", action="append", metavar="NAME=VALUE")
    sp.add_argument("--object", action="append", metavar="NAME=VALUE")
    sp.add_argument("--env", action="append", metavar="NAME=VALUE")
    sp.add_argument("--actions", help="comma-separated, e.g. Read,Write")
    sp = add(pol, "update", cmd_policy_update, parents=(common, mutating))
    sp.add_argument("pid")
    sp.add_argument("--actions", required=True)
    add(pol, "revoke", cmd_policy_revoke, parents=(common, mutating)).add_argument("pid")
    add(pol, "show", cmd_policy_show).add_argument("pid")
    add(pol, "list", cmd_policy_list).add_argument("--filter", metavar="NAME[=VALUE]")

    req = sub.add_parser("request", help="access requests").add_subparsers(dest="sub", required=True,
                                                                           parser_class=_Parser)
    sp = add(req, "submit", cmd_request_submit, parents=(common, mutating))
    sp.add_argument("--request", help="signed request JSON ('-' for stdin)")
    sp.add_argument("--sid")
    sp.add_argument("--oid")
    sp.add_argument("--action", choices=[a.value for a in Action])
    sp.add_argument("--seed", help="subject key seed used to sign the request")
    sp.add_argument("--attr", action="append", metavar="NAME=VALUE",
                    help="claimed subject attributes (default: the registered ones)")
    sp.add_argument("--env", help="environment snapshot JSON ('-' for stdin)")
    sp.add_argument("--now", type=int, default=0)
    sp.add_argument("--location")
    sp.add_argument("--behaviour")
    sp.add_argument("--auth")
    for name in ("block", "unblock"):
        add(req, name, cmd_request_block, parents=(common, mutating)).add_argument("--sid", required=True)

    tic = sub.add_parser("ticket", help="access tickets").add_subparsers(dest="sub", required=True,
                                                                        parser_class=_Parser)
    add(tic, "verify", cmd_ticket_verify).add_argument("ticket", help="ticket JSON file ('-' for stdin)")
    add(tic, "get", cmd_ticket_get).add_argument("tx_hash")

    sp = add(sub, "audit", cmd_audit, help="lookup table")
    sp.add_argument("--sid")
    sp.add_argument("--pid")
    sp.add_argument("--decision", choices=[d.value for d in Decision])

    ch = sub.add_parser("chain", help="ledger inspection").add_subparsers(dest="sub", required=True,
                                                                         parser_class=_Parser)
    add(ch, "verify", cmd_chain_verify)
    add(ch, "export", cmd_chain_export).add_argument("--out")
    add(ch, "mine", cmd_chain_mine, help="seal queued transactions into a block")

    sc = sub.add_parser("scenario", help="cost reports").add_subparsers(dest="sub", required=True,
                                                                       parser_class=_Parser)
    sp = add(sc, "run", cmd_scenario_run, workspace=False)
    sp.add_argument("--case", type=int, choices=(1, 2, 3), required=True)
    sp.add_argument("--scheme", choices=costsim.SCHEMES, default="proposed")
    sp.add_argument("--params", help="TOML/JSON with gas_per_tx, gas_to_currency, currency_to_fiat, tx_per_device")
    sp.add_argument("--measure", action="store_true", help="also drive a live ledger and report measured gas")

    demo = sub.add_parser("demo", help="fixtures").add_subparsers(dest="sub", required=True, parser_class=_Parser)
    add(demo, "smart-home", cmd_demo, help="load the smart-home records and policies")
    return p


MUTATING = {cmd_attr_register, cmd_attr_update, cmd_attr_revoke, cmd_policy_add, cmd_policy_update,
            cmd_policy_revoke, cmd_request_submit, cmd_request_block, cmd_chain_mine, cmd_demo}

DOMAIN_ERRORS = (DomainError, ContractError, LedgerError, PolicyError, MalformedAttribute, IncompleteSnapshot,
                 DegenerateSeed, DecodeError, OSError, json.JSONDecodeError)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    for name, default in (("data_dir", os.environ.get(DATA_ENV, "chainabac-data")), ("config", None),
                          ("format", None)):
        if not hasattr(args, name):
            setattr(args, name, default)
    if not hasattr(args, "defer_mine"):
        args.defer_mine = False
    try:
        if not args.needs_workspace:
            return args.handler(args)
        with _locked(Path(args.data_dir)):
            ws = open_workspace(args)
            status = args.handler(ws, args)
            if args.handler in MUTATING:
                ws.save()
            return status
    except UsageError as exc:
        print(f"chainabac: error: {exc}", file=sys.stderr)
        return 2
    except DOMAIN_ERRORS as exc:
        print(f"chainabac: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
