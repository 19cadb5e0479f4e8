"""secp256k1, ML-KEM-768 and AEAD against oracles and their own contracts."""

import hashlib

import pytest
from conftest import vector_lines
from hypothesis import given, settings
from hypothesis import strategies as st

from pqchain.crypto import (
    EcdsaKeyPair,
    EcdsaSignature,
    KemError,
    RecoveryError,
    aead,
    derive_address,
    ecdsa_recover,
    ecdsa_sign,
    ecdsa_verify,
    ecdsa_verify_fast,
    kem_decap,
    kem_encap,
    kem_keygen,
    mlkem,
)
from pqchain.crypto import secp256k1 as ec

ECDSA = vector_lines("ecdsa_secp256k1.txt")
MLKEM = vector_lines("mlkem768.txt")

scalars = st.integers(1, ec.N - 1)


@pytest.mark.parametrize("row", ECDSA, ids=lambda r: r[0][-6:])
def test_ecdsa_matches_openssl(row):
    secret, digest, r, s, pub, addr = row
    key = EcdsaKeyPair.from_secret(bytes.fromhex(secret))
    assert key.public.hex() == pub
    assert key.address.hex() == addr
    sig = ecdsa_sign(bytes.fromhex(digest), key)
    assert (sig.r, sig.s) == (int(r, 16), int(s, 16))
    assert ecdsa_recover(bytes.fromhex(digest), sig) == key.public
    assert ecdsa_verify(bytes.fromhex(digest), sig, key.public)


@settings(max_examples=40)
@given(scalars, st.one_of(st.none(), scalars))
def test_glv_mul_matches_double_and_add(k, base):
    point = None if base is None else ec.point_mul(base)
    p = (ec.GX, ec.GY, 1) if point is None else (*point, 1)
    assert ec._affine(ec._mul(k, p)) == ec._affine(ec._mul_naive(k, p))
    assert ec.point_mul(k, point) == ec._affine(ec._mul_naive(k, p))


@settings(max_examples=30)
@given(scalars, st.binary(min_size=32, max_size=32))
def test_sign_recover_verify(d, digest):
    key = EcdsaKeyPair.from_secret(d)
    sig = ecdsa_sign(digest, key)
    assert sig.s <= ec.N // 2
    assert ecdsa_recover(digest, sig) == key.public
    assert ecdsa_verify(digest, sig, key.public)
    assert ecdsa_verify_fast(digest, sig, key.public)
    assert EcdsaSignature.from_bytes(sig.to_bytes()) == sig


@settings(max_examples=30)
@given(scalars, st.binary(min_size=32, max_size=32), st.integers(0, 255))
def test_verify_backends_agree_on_bad_digests(d, digest, bit):
    key = EcdsaKeyPair.from_secret(d)
    sig = ecdsa_sign(digest, key)
    bad = bytearray(digest)
    bad[bit // 8] ^= 1 << (bit % 8)
    bad = bytes(bad)
    assert ecdsa_verify(bad, sig, key.public) is ecdsa_verify_fast(bad, sig, key.public) is False
    try:
        assert ecdsa_recover(bad, sig) != key.public
    except RecoveryError:
        pass


def test_recover_rejects_non_point():
    # r = 5 is not an x-coordinate on the curve (x^3 + 7 = 132 is a non-residue mod p)
    assert pow(132, (ec.P - 1) // 2, ec.P) != 1
    with pytest.raises(RecoveryError):
        ecdsa_recover(bytes(32), EcdsaSignature(5, 1, 0))


def test_from_entropy_range():
    assert EcdsaKeyPair.from_entropy(bytes(32)).secret == (1).to_bytes(32, "big")
    assert int.from_bytes(EcdsaKeyPair.from_entropy(b"\xff" * 32).secret, "big") < ec.N
    with pytest.raises(ValueError):
        EcdsaKeyPair.from_entropy(bytes(31))


def test_derive_address_length_check():
    with pytest.raises(ValueError):
        derive_address(bytes(65))


# -- ML-KEM-768 ------------------------------------------------------------------

@pytest.mark.parametrize("row", MLKEM, ids=lambda r: r[0][:8])
def test_mlkem_matches_openssl(row):
    seed, ek_hash, ct, ss, bad_ct, bad_ss = (bytes.fromhex(x) for x in row)
    ek, dk = mlkem.keygen(seed)
    assert len(ek) == mlkem.EK_LEN and len(dk) == mlkem.DK_LEN
    assert hashlib.sha3_256(ek).digest() == ek_hash
    assert mlkem.decaps(dk, ct) == ss
    # implicit rejection must reproduce OpenSSL's pseudorandom key exactly
    assert mlkem.decaps(dk, bad_ct) == bad_ss


@settings(max_examples=10)
@given(st.binary(min_size=64, max_size=64), st.binary(min_size=32, max_size=32))
def test_kem_roundtrip(seed, m):
    keys = kem_keygen(seed)
    ct, ss = kem_encap(keys.public, m)
    assert kem_decap(ct, keys) == ss
    assert len(ct.data) == mlkem.CT_LEN


def test_kem_rejects_bad_inputs():
    keys = kem_keygen(bytes(64))
    with pytest.raises(KemError):
        kem_keygen(bytes(16))
    with pytest.raises(KemError):
        kem_keygen(bytes(64), "Classic-McEliece-348864")
    bad = bytearray(keys.public)
    bad[0:2] = b"\xff\xff"  # coefficient >= q
    with pytest.raises(KemError):
        kem_encap(bytes(bad), bytes(32))
    with pytest.raises(KemError):
        kem_decap(bytes(10), keys)


# -- AEAD ------------------------------------------------------------------------

@given(st.binary(min_size=32, max_size=32), st.integers(0, 2 ** 64 - 1), st.binary(max_size=200),
       st.binary(max_size=40))
def test_aead_roundtrip_and_tamper(key, ctr, msg, ad):
    nonce = aead.counter_nonce(b"i2r", ctr)
    ct = aead.seal(key, nonce, msg, ad)
    assert aead.open_(key, nonce, ct, ad) == msg
    flipped = bytearray(ct)
    flipped[len(ct) // 2] ^= 1
    with pytest.raises(aead.TagInvalid):
        aead.open_(key, nonce, bytes(flipped), ad)
    with pytest.raises(aead.TagInvalid):
        aead.open_(key, nonce, ct, ad + b"x")
