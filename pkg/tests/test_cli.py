import fcntl
import json

import pytest

from chainabac.cli import main
from chainabac.identity import keypair
from chainabac.scenarios import load_fixture
from chainabac.system import DEFAULT_SEEDS

SEEDS = {s["id"]: s["seed"] for s in load_fixture()["subjects"]}


@pytest.fixture
def ws(tmp_path):
    d = tmp_path / "ws"
    assert main(["init", "--data-dir", str(d)]) == 0
    return d


def run(ws, *argv):
    return main([*argv, "--data-dir", str(ws)])


def cli(capsys, ws, *argv):
    code = run(ws, *argv)
    out = capsys.readouterr().out
    return code, out


def test_init_twice_fails(ws, capsys):
    assert main(["init", "--data-dir", str(ws)]) == 1
    assert "DirNotEmpty" in capsys.readouterr().err


def test_init_then_verify(ws, capsys):
    assert cli(capsys, ws, "chain", "verify") == (0, "true\n")


def test_key_show_matches_derivation(ws, capsys):
    code, out = cli(capsys, ws, "key", "show", "AA", "--format", "json")
    assert code == 0
    assert json.loads(out)["address"] == keypair(DEFAULT_SEEDS["AA"]).address.hex()


def test_uninitialized_workspace(tmp_path, capsys):
    assert main(["chain", "verify", "--data-dir", str(tmp_path / "none")]) == 1


def test_env_var_data_dir(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("CHAINABAC_HOME", str(tmp_path / "envws"))
    assert main(["init"]) == 0
    assert (tmp_path / "envws" / "chain.log").exists()


def test_config_env_var_overrides_seeds(tmp_path, monkeypatch, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"seeds": {"AA": "another-admin"}}))
    monkeypatch.setenv("CHAINABAC_CONFIG", str(cfg))
    d = tmp_path / "w"
    assert main(["init", "--data-dir", str(d)]) == 0
    capsys.readouterr()
    monkeypatch.delenv("CHAINABAC_CONFIG")
    assert main(["key", "show", "AA", "--data-dir", str(d), "--format", "json"]) == 0
    assert json.loads(capsys.readouterr().out)["address"] == keypair("another-admin").address.hex()


def demo(ws, capsys):
    assert cli(capsys, ws, "demo", "smart-home")[0] == 0


def test_full_flow(ws, capsys, tmp_path):
    demo(ws, capsys)
    code, out = cli(capsys, ws, "request", "submit", "--sid", "123", "--oid", "112", "--action", "Read",
                    "--seed", SEEDS["123"], "--location", "West.AUS", "--behaviour", "NonMalicious",
                    "--auth", "Auth", "--format", "json")
    assert code == 0
    ticket = json.loads(out)
    assert (ticket["decision"], ticket["pid"]) == ("Approved", "P1")
    path = tmp_path / "t.json"
    path.write_text(out)
    assert cli(capsys, ws, "ticket", "verify", str(path)) == (0, "true\n")
    ticket["pid"] = "P2"
    path.write_text(json.dumps(ticket))
    assert cli(capsys, ws, "ticket", "verify", str(path)) == (1, "false\n")
    code, out = cli(capsys, ws, "audit", "--format", "csv")
    assert out.splitlines()[1].startswith("1,123,P1,Approved,None,")


def test_every_mutation_is_one_transaction(ws, capsys):
    def count():
        _, out = cli(capsys, ws, "chain", "export", "--format", "json")
        return sum(len(b["transactions"]) for b in json.loads(out)["blocks"])

    base = count()
    steps = [
        ("attr", "register", "--kind", "subject", "--id", "9", "--seed", "nine",
         "--attr", "Name=N", "--attr", "Role=User", "--attr", "Location=L"),
        ("attr", "update", "--kind", "subject", "--id", "9", "--attr", "Location=M"),
        ("policy", "add", "--pid", "P1", "--subject", "Role=User", "--actions", "Read"),
        ("policy", "update", "P1", "--actions", "Read,Write"),
        ("request", "block", "--sid", "9"),
        ("request", "unblock", "--sid", "9"),
        ("policy", "revoke", "P1"),
        ("attr", "revoke", "--kind", "subject", "--id", "9"),
    ]
    for i, step in enumerate(steps, 1):
        code, _ = cli(capsys, ws, *step)
        assert code == 0, step
        assert count() == base + i


def test_domain_errors_exit_1(ws, capsys):
    demo(ws, capsys)
    assert cli(capsys, ws, "policy", "add", "--pid", "P1", "--subject", "Role=User", "--actions", "Read")[0] == 1
    assert cli(capsys, ws, "policy", "show", "P404")[0] == 1
    assert cli(capsys, ws, "attr", "show", "--kind", "object", "--id", "nope")[0] == 1
    assert cli(capsys, ws, "policy", "add", "--pid", "PX", "--subject", "Colour=red", "--actions", "Read")[0] == 1
    code = cli(capsys, ws, "attr", "register", "--kind", "subject", "--id", "123", "--seed", "x",
               "--attr", "Name=a", "--attr", "Role=b", "--attr", "Location=c")[0]
    assert code == 1


USAGE = [
    ("bogus",),
    ("policy",),
    ("policy", "add", "--pid", "P9"),
    ("attr", "register", "--kind", "planet", "--id", "1"),
    ("attr", "update", "--kind", "subject", "--id", "123", "--attr", "novalue"),
    ("request", "submit", "--sid", "123"),
    ("scenario", "run", "--case", "4"),
    ("key", "show", "ZZ"),
    ("ticket", "get", "zz"),
]


@pytest.mark.parametrize("argv", USAGE, ids=lambda a: " ".join(a))
def test_usage_errors_exit_2_without_mutation(ws, capsys, argv):
    before = (ws / "chain.log").read_bytes()
    with_dir = [*argv, "--data-dir", str(ws)] if argv[0] not in ("bogus", "policy") or len(argv) > 1 else list(argv)
    try:
        code = main(with_dir)
    except SystemExit as exc:
        code = exc.code
    assert code == 2
    assert (ws / "chain.log").read_bytes() == before


def test_defer_mine_batches(ws, capsys):
    height = json.loads(cli(capsys, ws, "chain", "export")[1])["blocks"][-1]["height"]
    for pid in ("P1", "P2"):
        code, out = cli(capsys, ws, "policy", "add", "--pid", pid, "--subject", "Role=User", "--actions", "Read",
                        "--defer-mine")
        assert code == 0 and "Pending" in out
    code, out = cli(capsys, ws, "chain", "mine", "--format", "json")
    assert json.loads(out)["mined"] == 2
    blocks = json.loads(cli(capsys, ws, "chain", "export")[1])["blocks"]
    assert blocks[-1]["height"] == height + 1


def test_deferred_request_ticket(ws, capsys):
    demo(ws, capsys)
    code, out = cli(capsys, ws, "request", "submit", "--sid", "123", "--oid", "112", "--action", "Write",
                    "--seed", SEEDS["123"], "--location", "West.AUS", "--behaviour", "NonMalicious",
                    "--auth", "Auth", "--defer-mine", "--format", "json")
    tx = json.loads(out)["tx_hash"]
    assert cli(capsys, ws, "ticket", "get", tx)[0] == 1
    cli(capsys, ws, "chain", "mine")
    code, out = cli(capsys, ws, "ticket", "get", tx, "--format", "json")
    assert code == 0 and json.loads(out)["decision"] == "Denied"


def test_policy_list_json_roundtrips(ws, capsys):
    demo(ws, capsys)
    code, out = cli(capsys, ws, "policy", "list", "--filter", "SID=123", "--format", "json")
    assert [p["pid"] for p in json.loads(out)] == ["P1", "P2"]


def test_lock_contention(ws, capsys):
    with open(ws / ".lock", "a") as fh:
        fcntl.flock(fh, fcntl.LOCK_EX | fcntl.LOCK_NB)
        assert run(ws, "chain", "verify") == 1
    assert "WorkspaceLocked" in capsys.readouterr().err


def test_tampered_log_fails(ws, capsys):
    data = bytearray((ws / "chain.log").read_bytes())
    data[len(data) // 2] ^= 0xFF
    (ws / "chain.log").write_bytes(bytes(data))
    assert run(ws, "chain", "verify") == 1


def test_scenario_run(capsys):
    assert main(["scenario", "run", "--case", "3", "--scheme", "proposed", "--format", "json"]) == 0
    row = json.loads(capsys.readouterr().out)[0]
    assert row["total_gas"] == 6888264000 and row["cost_currency"] == "6.88826"
    assert main(["scenario", "run", "--case", "1", "--scheme", "zhang"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[1] == "zhang,1,5,15,20,300,1910838,573251400,0.57325,43.9167898"
