"""Keccak-256, SHAKE256, RLP and EIP-155 against frozen oracle vectors."""

import pytest
from conftest import vector_json, vector_lines
from hypothesis import given
from hypothesis import strategies as st

from pqchain import rlp
from pqchain.crypto import EcdsaKeyPair, derive_address
from pqchain.crypto.hashing import ShakeStream, keccak256, shake256
from pqchain.crypto.keccak import keccak256_reference, sponge
from pqchain.metatx import (
    SignedTransaction,
    Transaction,
    chain_id_from_v,
    sign_inner,
    signing_stream,
)

# widely published digests, independent of any library
KECCAK_EMPTY = "c5d2460186f7233c927e7db2dcc703c0e500b653ca82273b7bfad8045d85a470"
KECCAK_ABC = "4e03657aea45a94fc7d47ba826c8d667c0d1e6e33a64a036ec44f58fa12d6c45"


def _unhex(s):
    return b"" if s == "-" else bytes.fromhex(s)


KECCAK = vector_lines("keccak256.txt")
SHAKE = vector_lines("shake256.txt")


def test_keccak_published_constants():
    assert keccak256(b"").hex() == KECCAK_EMPTY
    assert keccak256(b"abc").hex() == KECCAK_ABC
    assert keccak256_reference(b"").hex() == KECCAK_EMPTY


@pytest.mark.parametrize("row", KECCAK, ids=lambda r: f"len{len(_unhex(r[0]))}")
def test_keccak256_vectors(row):
    data, want = _unhex(row[0]), row[1]
    assert keccak256(data).hex() == want
    assert keccak256_reference(data).hex() == want


def test_shake256_vectors():
    assert len(SHAKE) > 50
    for data, n, want in SHAKE:
        data, n = _unhex(data), int(n)
        assert shake256(data, n).hex() == want
        assert sponge(data, 136, 0x1F, n).hex() == want


@given(st.binary(max_size=600))
def test_keccak_reference_matches_fast(data):
    assert keccak256_reference(data) == keccak256(data)


@given(st.binary(max_size=300), st.lists(st.integers(1, 400), min_size=1, max_size=8))
def test_shake_stream_is_prefix_consistent(data, reads):
    s = ShakeStream(data)
    got = b"".join(s.squeeze(n) for n in reads)
    assert got == shake256(data, sum(reads))


# -- RLP ---------------------------------------------------------------------

RLP = vector_json("rlp.json")


def _rlp_in(x):
    if isinstance(x, list):
        return [_rlp_in(i) for i in x]
    if isinstance(x, int):
        return x
    if x.startswith("#"):
        return int(x[1:])
    return x.encode("latin-1")


def _canon(x):
    # the decoder returns bytes; ints in the corpus compare by their byte form
    if isinstance(x, list):
        return [_canon(i) for i in x]
    if isinstance(x, int):
        return rlp.int_to_bytes(x)
    return x


@pytest.mark.parametrize("name", sorted(RLP))
def test_rlp_corpus(name):
    case = RLP[name]
    item, want = _rlp_in(case["in"]), bytes.fromhex(case["out"][2:])
    assert rlp.encode(item) == want
    assert rlp.decode(want) == _canon(item)


rlp_items = st.recursive(st.binary(max_size=70), lambda kids: st.lists(kids, max_size=6), max_leaves=25)


@given(rlp_items)
def test_rlp_roundtrip(item):
    assert rlp.decode(rlp.encode(item)) == item


@given(rlp_items, st.binary(min_size=1, max_size=3))
def test_rlp_rejects_trailing_bytes(item, extra):
    with pytest.raises(rlp.RlpError):
        rlp.decode(rlp.encode(item) + extra)


@pytest.mark.parametrize("bad", [
    "8100",      # single byte < 0x80 wrapped
    "b800",      # long form for a short string
    "b90000",    # length with leading zero
    "c180",      # fine list, then check truncations below
])
def test_rlp_noncanonical(bad):
    data = bytes.fromhex(bad)
    if bad == "c180":
        assert rlp.decode(data) == [b""]
        data = data[:-1]
    with pytest.raises(rlp.RlpError):
        rlp.decode(data)


@given(st.integers(0, 2 ** 256))
def test_rlp_int_minimal(x):
    b = rlp.int_to_bytes(x)
    assert rlp.bytes_to_int(b) == x
    assert not b.startswith(b"\x00")


# -- EIP-155 -------------------------------------------------------------------

EIP155 = vector_json("eip155.json")


@pytest.mark.parametrize("case", EIP155["transactions"], ids=lambda c: c["name"])
def test_eip155_transaction(case):
    t = case["tx"]
    tx = Transaction(t["nonce"], t["gasprice"], t["startgas"], bytes.fromhex(t["to"]), t["value"],
                     bytes.fromhex(t["data"]), t["chain_id"])
    assert signing_stream(tx).hex() == case["signing_data"]
    assert keccak256(signing_stream(tx)).hex() == case["signing_hash"]
    key = EcdsaKeyPair.from_secret(bytes.fromhex(case["secret"]))
    signed = sign_inner(tx, key)
    assert signed.v == case["v"]
    assert signed.r.hex() == case["r"] and signed.s.hex() == case["s"]
    assert signed.raw().hex() == case["signed"]
    parsed = SignedTransaction.from_raw(bytes.fromhex(case["signed"]))
    assert parsed == signed
    assert derive_address(parsed.sender_public_key()).hex() == case["sender"]


@pytest.mark.parametrize("chain_id,recid,v", EIP155["v_table"])
def test_eip155_v_rule(chain_id, recid, v):
    tx = Transaction(0, 0, 21000, bytes(20), 0, b"", chain_id)
    st_ = SignedTransaction(tx, v, bytes(32), bytes(32))
    assert st_.recovery_id == recid
    assert chain_id_from_v(v) == chain_id


@given(st.integers(1, 2 ** 40), st.integers(1, 2 ** 64 - 1), st.binary(max_size=40))
def test_eip155_v_derivation_property(chain_id, secret_int, data):
    key = EcdsaKeyPair.from_secret(secret_int % (2 ** 255) or 1)
    tx = Transaction(1, 2, 21000, bytes(range(20)), 3, data, chain_id)
    signed = sign_inner(tx, key)
    assert signed.v in (2 * chain_id + 35, 2 * chain_id + 36)
    assert SignedTransaction.from_raw(signed.raw()).sender_public_key() == key.public


@pytest.mark.parametrize("secret,address", EIP155["known_addresses"])
def test_known_addresses(secret, address):
    assert EcdsaKeyPair.from_secret(bytes.fromhex(secret)).address.hex() == address
