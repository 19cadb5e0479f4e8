"""End-to-end CLI flows: exit codes, stable error codes, file outputs."""

import contextlib
import io
import json
import subprocess
import sys

import pytest
from conftest import VECTORS

from pqchain.cli import main
from pqchain.keyfile import write_atomic

HUB = "0x" + "ab" * 20


def cli(*argv):
    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        try:
            code = main([str(a) for a in argv])
        except SystemExit as exc:  # argparse usage errors
            code = exc.code
    return code, out.getvalue(), err.getvalue()


def ok(*argv):
    code, out, err = cli(*argv)
    assert code == 0, err
    return json.loads(out.splitlines()[-1]) if out.strip().startswith("{") else out


@pytest.fixture(scope="module")
def world(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    ok("cert", "root-init", "--seed", 1, "--out", d / "root.json")
    ok("cert", "ca-init", "--root", d / "root.json", "--seed", 2, "--out", d / "ca.json", "--registry", d / "reg.json")
    for name, seed in (("a", 3), ("b", 4)):
        ok("cert", "keygen", "--node-id", name, "--seed", seed, "--out", d / f"{name}.keys")
        ok("cert", "legacy", "--root", d / "root.json", "--keys", d / f"{name}.keys", "--cn", name,
           "--out", d / f"{name}.legacy")
        for alg in ("ecdsa", "falcon"):
            ok("cert", "csr", "--keys", d / f"{name}.keys", "--alg", alg, "--cn", name, "--out", d / f"{name}.{alg}.csr")
        ok("cert", "issue", "--ca", d / "ca.json", "--registry", d / "reg.json", "--legacy", d / f"{name}.legacy",
           "--csr-eth", d / f"{name}.ecdsa.csr", "--csr-falcon", d / f"{name}.falcon.csr", "--seed", seed,
           "--out", d / f"{name}.cert")
    return d


def test_cert_verify_and_registry(world):
    d = world
    assert ok("cert", "verify", "--cert", d / "a.cert", "--ca", d / "ca.json")["valid"] is True
    listed = ok("registry", "list", "--registry", d / "reg.json")
    assert len(listed["dids"]) == 2
    did = ok("cert", "verify", "--cert", d / "b.cert", "--ca", d / "ca.json")["did"]
    rec = ok("registry", "resolve", "--registry", d / "reg.json", "--did", did)
    assert len(bytes.fromhex(rec["falcon_public_key"])) == 897
    assert ok("registry", "controls", "--registry", d / "reg.json", "--did", did, "--keys", d / "b.keys")["controls"]
    code, out, err = cli("registry", "controls", "--registry", d / "reg.json", "--did", did, "--keys", d / "a.keys")
    assert code == 1 and json.loads(out)["controls"] is False and err.startswith("error: ")


def test_cert_verify_with_wrong_ca_fails(world, tmp_path):
    ok("cert", "ca-init", "--root", world / "root.json", "--seed", 99, "--out", tmp_path / "other.json")
    code, out, _ = cli("cert", "verify", "--cert", world / "a.cert", "--ca", tmp_path / "other.json")
    assert code == 1 and json.loads(out)["valid"] is False


def test_subject_mismatch_is_rejected_without_side_effects(world, tmp_path):
    d = world
    reg = tmp_path / "reg.json"
    reg.write_bytes((d / "reg.json").read_bytes())
    ok("cert", "keygen", "--node-id", "c", "--seed", 5, "--out", tmp_path / "c.keys")
    ok("cert", "legacy", "--root", d / "root.json", "--keys", tmp_path / "c.keys", "--cn", "c", "--out", tmp_path / "c.legacy")
    for alg in ("ecdsa", "falcon"):
        ok("cert", "csr", "--keys", tmp_path / "c.keys", "--alg", alg, "--cn", "someone-else",
           "--out", tmp_path / f"c.{alg}.csr")
    code, _, err = cli("cert", "issue", "--ca", d / "ca.json", "--registry", reg, "--legacy", tmp_path / "c.legacy",
                       "--csr-eth", tmp_path / "c.ecdsa.csr", "--csr-falcon", tmp_path / "c.falcon.csr",
                       "--out", tmp_path / "c.cert")
    assert code == 1 and "SubjectMismatch" in err
    assert reg.read_bytes() == (d / "reg.json").read_bytes()
    assert not (tmp_path / "c.cert").exists()


def test_tunnel_handshake(world):
    d = world
    out = ok("tunnel", "handshake", "--ca", d / "ca.json", "--a-keys", d / "a.keys", "--a-cert", d / "a.cert",
             "--b-keys", d / "b.keys", "--b-cert", d / "b.cert", "--seed", 1)
    assert out["roundtrip"] is True and out["keys_on_wire"] is False
    # b's certificate paired with a's keys cannot complete the handshake
    code, _, err = cli("tunnel", "handshake", "--ca", d / "ca.json", "--a-keys", d / "a.keys", "--a-cert", d / "b.cert",
                       "--b-keys", d / "b.keys", "--b-cert", d / "b.cert", "--seed", 1)
    assert code == 1 and err.startswith("error: ")


def test_tx_wrap_decode_verify(world, tmp_path):
    d = world
    m = tmp_path / "tx.hex"
    ok("tx", "wrap", "--keys", d / "a.keys", "--relay-hub", HUB, "--registry", d / "reg.json", "--to", "11" * 20,
       "--value", 5, "--data", "beef", "--out", m)
    dec = ok("tx", "decode", "--metatx", m)
    assert dec["inner"]["value"] == 5 and dec["relay_hub"] == HUB
    res = ok("tx", "verify", m, "--registry", d / "reg.json", "--relay-hub", HUB, "--log", tmp_path / "log.jsonl")
    assert res["verdict"] == "Admit"
    assert json.loads((tmp_path / "log.jsonl").read_text())["verdict"] == "Admit"
    code, out, err = cli("tx", "verify", m, "--registry", d / "reg.json", "--relay-hub", "0x" + "cd" * 20)
    assert code == 1 and "NotRelayHub" in err
    code, out, err = cli("tx", "verify", m, "--registry", d / "reg.json", "--relay-hub", HUB, "--backend", "metered")
    assert code == 0 and json.loads(out)["gas"] > 12_000_000


def test_usage_errors_exit_2(world, tmp_path):
    assert cli("tx", "wrap", "--keys", world / "a.keys", "--relay-hub", "0x12", "--out", tmp_path / "x")[0] == 2
    assert cli("nonsense")[0] == 2
    assert cli("sim", "run", "--set", "validators=0", "--out", tmp_path)[0] == 2
    assert cli("sim", "run", "--config", tmp_path / "missing.conf")[0] == 2
    assert cli("bench", "verify", "--kat", VECTORS / "falcon512_sign_kat.txt", "--gas", "block_gas_limit")[0] == 2
    (tmp_path / "bad.conf").write_text("colour = blue\n")
    code, _, err = cli("sim", "run", "--config", tmp_path / "bad.conf")
    assert code == 2 and "ConfigError" in err


def test_domain_errors_exit_1(tmp_path):
    (tmp_path / "junk.hex").write_text("00\n")
    (tmp_path / "reg.json").write_text("{}")
    code, _, err = cli("tx", "decode", "--metatx", tmp_path / "junk.hex")
    assert code == 1 and err.startswith("error: ")
    assert cli("registry", "list", "--registry", tmp_path / "nope.json")[0] == 1


def test_entropy_commands():
    out = ok("entropy", "draw", "--seed", 3, "--bytes", 48)
    assert len(bytes.fromhex(out["bytes"])) == 48 and out["wire_leaks_output"] is False
    assert ok("entropy", "draw", "--seed", 3, "--bytes", 48) == out
    code, _, err = cli("entropy", "bootstrap", "--seed", 3, "--drop-share")
    assert code == 1 and "MissingShare" in err


def test_sim_run_is_deterministic(tmp_path, monkeypatch):
    conf = tmp_path / "conf"
    conf.mkdir()
    (conf / "s.conf").write_text("seed = 2\nprovision_seed = 0\ntx_count = 4\nadversaries = ForgeFalcon\n")
    monkeypatch.setenv("PQCHAIN_CONFIG_ROOT", str(conf))
    first = ok("sim", "run", "--config", "s.conf", "--out", tmp_path / "one")
    second = ok("sim", "run", "--config", "s.conf", "--out", tmp_path / "two")
    for name in ("metrics.jsonl", "metrics.csv", "chain.bin"):
        assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "two" / name).read_bytes()
    assert first["head"] == second["head"] and first["adversarial_txs_finalized"] == 0
    chk = ok("sim", "check-chain", "--chain", tmp_path / "one" / "chain.bin")
    assert chk["first_broken"] is None and chk["blocks"] == first["height"]


def test_bench_csv(tmp_path):
    out = tmp_path / "gas.csv"
    ok("bench", "verify", "--kat", VECTORS / "falcon512_sign_kat.txt", "--limit", 2, "--out", out)
    rows = out.read_text().splitlines()
    assert rows[0].startswith("vector,backend,charging,verdict,gas,raw_gas")
    assert len(rows) == 3
    assert all(int(r.split(",")[4]) > 12_000_000 for r in rows[1:])
    flat = ok("bench", "verify", "--kat", VECTORS / "falcon512_sign_kat.txt", "--limit", 1, "--backend", "native")
    assert flat.splitlines()[1].split(",")[4] == "1"


def test_write_atomic_leaves_no_partial_file(tmp_path, monkeypatch):
    target = tmp_path / "f.txt"
    write_atomic(target, "old")

    def boom(*a, **k):
        raise OSError("disk full")

    monkeypatch.setattr("os.replace", boom)
    with pytest.raises(OSError):
        write_atomic(target, "new")
    assert target.read_text() == "old"
    assert [p.name for p in tmp_path.iterdir()] == ["f.txt"]


def test_rpc_serve_over_stdio(world):
    req = [
        {"jsonrpc": "2.0", "id": 1, "method": "relay_send", "params": [{"to": "0x" + "22" * 20, "value": "0x1"}]},
        {"jsonrpc": "2.0", "id": 2, "method": "nope", "params": []},
    ]
    proc = subprocess.run(
        [sys.executable, "-m", "pqchain", "tx", "serve", "--keys", str(world / "a.keys"), "--relay-hub", HUB,
         "--registry", str(world / "reg.json")],
        input="\n".join(json.dumps(r) for r in req) + "\n", capture_output=True, text=True, timeout=120, check=False,
    )
    assert proc.returncode == 0, proc.stderr
    first, second = (json.loads(x) for x in proc.stdout.splitlines())
    assert first["id"] == 1 and first["result"]["id"].startswith("0x")
    assert second["error"]["code"] == -32601
