"""Meta-transactions, the three-step admission pipeline, gas and the relay RPC."""

import json
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from matrix import CHAIN_ID, build_matrix, run_case, short_circuit_ok

from pqchain.crypto.falcon import Outcome
from pqchain.metatx import (
    KeyMismatch,
    MalformedTx,
    MetaTransaction,
    RelaySigner,
    Transaction,
    UnregisteredWriter,
    sign_inner,
    sign_outer,
    wrapper_sender_address,
)
from pqchain.pipeline import (
    BLOCK_GAS_LIMIT,
    DEFAULT_GAS,
    Backend,
    Charging,
    DecisionLog,
    GasModel,
    PoolAction,
    TxPool,
    Verdict,
    Verifier,
    gas_csv,
    gate_and_propagate,
    native_fast_verify,
)


@pytest.fixture(scope="module")
def matrix(pki, hub):
    return build_matrix(pki, hub)


def test_metatx_roundtrip(matrix, pki):
    good = matrix[0].mtx
    again = MetaTransaction.decode(good.encode())
    assert again == good
    assert again.wrapper.tx.to == again.relay_hub
    assert wrapper_sender_address(good) == pki.members["writer"].eth.address


@pytest.mark.parametrize("backend", [Backend.NATIVE, Backend.METERED])
def test_short_circuit_matrix(matrix, hub, backend):
    for case in matrix:
        decision, counters, calls = run_case(case, hub, backend)
        assert short_circuit_ok(case, decision, counters, calls) == [], case.name
        assert decision.admitted == (case.reason is None)


def test_backends_agree_on_every_case(matrix, hub):
    for case in matrix:
        verdicts = {
            (run_case(case, hub, b, c)[0].verdict, run_case(case, hub, b, c)[0].reason)
            for b, c in [(Backend.NATIVE, Charging.OPCODE_FLAT), (Backend.NATIVE, Charging.PRECOMPILE_TABLE),
                         (Backend.METERED, Charging.OPCODE_FLAT)]
        }
        assert len(verdicts) == 1, case.name


def test_gas_by_backend(matrix, hub):
    good = matrix[0]
    metered = run_case(good, hub, Backend.METERED)[0]
    flat = run_case(good, hub, Backend.NATIVE, Charging.OPCODE_FLAT)[0]
    table = run_case(good, hub, Backend.NATIVE, Charging.PRECOMPILE_TABLE)[0]
    assert metered.gas_metered > BLOCK_GAS_LIMIT
    assert flat.gas_metered == 1
    assert DEFAULT_GAS.precompile_base < table.gas_metered < BLOCK_GAS_LIMIT
    # rejections before step 3 cost nothing
    for case in matrix:
        if case.stop_step < 3:
            assert run_case(case, hub, Backend.METERED)[0].gas_metered == 0


@given(st.integers(0, 100_000), st.integers(1, 5000), st.integers(0, 50))
def test_precompile_gas_is_linear(n, base, per_word):
    gm = GasModel(precompile_base=base, precompile_per_word=per_word)
    assert gm.precompile_cost(n) == base + per_word * -(-n // 32)
    assert gm.precompile_cost(n + 32) - gm.precompile_cost(n) == per_word


@given(st.integers(1, 5000))
def test_metered_gas_scales_with_overhead(k):
    meter = Counter(hash_word=3, field_mul=7, memory_word=11)
    gm = GasModel(interpretation_overhead=k)
    assert gm.metered_cost(meter) == k * gm.raw_cost(meter)


def test_gas_model_rejects_changed_limits():
    with pytest.raises(ValueError):
        GasModel(block_gas_limit=30_000_000)
    with pytest.raises(ValueError):
        GasModel(interpretation_overhead=0)


def test_native_fast_flat_is_one_even_on_failure():
    res, gas = native_fast_verify(b"m", b"\x39" + bytes(40), bytes(897))
    assert res is not Outcome.OK and gas == 1


def test_pool_gate(matrix, hub):
    pool, forwarded, counters = TxPool(), [], Counter()
    for case in matrix:
        decision = run_case(case, hub)[0]
        action = gate_and_propagate(pool, case.mtx, decision, forwarded.append, counters)
        assert action is (PoolAction.DROPPED if not decision.admitted else PoolAction.INSERTED)
    good = matrix[0]
    assert gate_and_propagate(pool, good.mtx, run_case(good, hub)[0], forwarded.append) is PoolAction.DUPLICATE
    assert forwarded == [good.mtx] and len(pool) == 1
    assert counters["rejected"] == len(matrix) - 1


def test_decision_log_jsonl(matrix, hub, tmp_path):
    path = tmp_path / "d.jsonl"
    log = DecisionLog(path, timings=False)
    for case in matrix[:3]:
        log.append(run_case(case, hub)[0], node="n1")
    lines = path.read_text().splitlines()
    assert lines == log.text().splitlines()
    first = json.loads(lines[0])
    assert first["verdict"] == Verdict.ADMIT.value and first["node"] == "n1" and first["step_timings_us"] == []
    assert json.loads(lines[1])["reason"] == "NotRelayHub"


def test_gas_csv_header():
    assert gas_csv([]).splitlines()[0] == "vector,backend,charging,verdict,gas,raw_gas,block_limit_ratio"


def test_sign_outer_checks_registry(pki, hub):
    w, a = pki.members["writer"], pki.members["alice"]
    inner = sign_inner(Transaction(1, 0, 21000, bytes(20), 0, b"", CHAIN_ID), w.eth)
    with pytest.raises(KeyMismatch):
        sign_outer(inner, w.did, a.falcon, hub, w.eth, 0, pki.registry)
    with pytest.raises(UnregisteredWriter):
        sign_outer(inner, w.did, w.falcon, hub, w.eth, 0, type(pki.registry)(pki.registry.ca_did))
    with pytest.raises(KeyMismatch):
        sign_outer(inner, w.did, w.falcon, hub, a.eth, 0)


@settings(max_examples=40)
@given(st.binary(max_size=300))
def test_decode_garbage_is_malformed(data):
    with pytest.raises(MalformedTx):
        MetaTransaction.decode(data)


def test_decode_rejects_noncanonical(matrix):
    raw = matrix[0].mtx.encode()
    with pytest.raises(MalformedTx):
        MetaTransaction.decode(raw + b"\x00")


# -- JSON-RPC ----------------------------------------------------------------------

@pytest.fixture()
def signer(pki, hub):
    w = pki.members["writer"]
    return RelaySigner(w.did, w.eth, w.falcon, hub, CHAIN_ID, pki.registry)


def _rpc(signer, method, params, rid=1):
    return json.loads(signer.handle_line(json.dumps({"jsonrpc": "2.0", "id": rid, "method": method, "params": params})))


def test_rpc_send_and_status(signer, pki, hub):
    out = _rpc(signer, "relay_send", [{"to": "0x" + "11" * 20, "value": "0x10", "data": "0xbeef"}])
    res = out["result"]
    mtx = MetaTransaction.decode(bytes.fromhex(res["metatx"][2:]))
    assert res["id"] == "0x" + mtx.hash().hex()
    assert Verifier(hub).admit(mtx, pki.registry).admitted
    assert mtx.inner.tx.value == 16 and mtx.inner.tx.data == b"\xbe\xef"
    assert _rpc(signer, "relay_status", [res["id"]])["result"]["status"] == "pending"
    assert _rpc(signer, "relay_status", ["0x00"])["result"]["status"] == "unknown"


def test_rpc_send_raw(signer, pki, hub):
    w = pki.members["writer"]
    inner = sign_inner(Transaction(3, 0, 21000, bytes(20), 0, b"", CHAIN_ID), w.eth)
    res = _rpc(signer, "relay_send", [{"raw": "0x" + inner.raw().hex()}])["result"]
    assert MetaTransaction.decode(bytes.fromhex(res["metatx"][2:])).inner == inner


def test_rpc_errors(signer):
    assert json.loads(signer.handle_line("{nope"))["error"]["code"] == -32700
    assert _rpc(signer, "eth_call", [])["error"]["code"] == -32601
    assert json.loads(signer.handle_line(json.dumps({"id": 2, "method": "relay_send"})))["error"]["code"] == -32600
    assert _rpc(signer, "relay_send", [{"raw": "0x00"}])["error"]["code"] == -32602
    assert _rpc(signer, "relay_send", [])["error"]["code"] == -32602
