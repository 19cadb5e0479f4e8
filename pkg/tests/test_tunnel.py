"""Post-quantum tunnel: handshake authentication and record protection."""

from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pqchain.crypto import falcon_keygen
from pqchain.errors import PqError
from pqchain.tunnel import (
    CertificateRejected,
    ConfirmFailed,
    Identity,
    ReplayOrReorder,
    SessionClosed,
    SignatureInvalid,
    TagInvalid,
    TrustPolicy,
    TunnelState,
    handshake,
)
from pqchain.wire import WireLog


def test_records_flow_both_ways(pki):
    a, b = pki.members["alice"].identity, pki.members["bob"].identity
    wire = WireLog()
    si, sr = handshake(a, b, pki.policy, pki.policy, b"e1", now=2, wire=wire)
    assert si.peer_cert == b.cert and sr.peer_cert == a.cert
    for i in range(5):
        rec = si.seal(b"ping %d" % i)
        wire.record("data", "i2r", rec.encode())
        assert sr.open(rec.encode()) == b"ping %d" % i
        assert si.open(sr.seal(b"pong")) == b"pong"
    for key in (si.send_key, si.recv_key):
        assert not wire.contains(key)
    assert not wire.contains(b"ping 3")


def test_handshakes_are_fresh(pki):
    a, b = pki.members["alice"].identity, pki.members["bob"].identity
    s1, _ = handshake(a, b, pki.policy, pki.policy, b"x", now=2)
    s2, _ = handshake(a, b, pki.policy, pki.policy, b"y", now=2)
    assert s1.send_key != s2.send_key


def test_replay_and_reorder_rejected(pki):
    a, b = pki.members["alice"].identity, pki.members["bob"].identity
    si, sr = handshake(a, b, pki.policy, pki.policy, b"r", now=2)
    r1, r2 = si.seal(b"one"), si.seal(b"two")
    with pytest.raises(ReplayOrReorder):
        sr.open(r2)
    assert sr.open(r1) == b"one"
    with pytest.raises(ReplayOrReorder):
        sr.open(r1)
    assert sr.open(r2) == b"two"


@settings(max_examples=40)
@given(st.integers(4, 60), st.integers(0, 7))
def test_record_bit_flip_closes_session(pki, pos, bit):
    si, sr = _cached_pair(pki)
    raw = bytearray(si.seal(b"payload that is long enough to flip").encode())
    raw[pos % len(raw)] ^= 1 << bit
    with pytest.raises((TagInvalid, ReplayOrReorder)):
        sr.open(bytes(raw))
    _PAIRS.clear()


_PAIRS = []


def _cached_pair(pki):
    if not _PAIRS:
        a, b = pki.members["alice"].identity, pki.members["bob"].identity
        _PAIRS.append(handshake(a, b, pki.policy, pki.policy, b"flip", now=2))
    return _PAIRS[0]


def test_closed_session_refuses(pki):
    si, sr = handshake(pki.members["alice"].identity, pki.members["bob"].identity, pki.policy, pki.policy, b"c", now=2)
    bad = bytearray(si.seal(b"x").encode())
    bad[-1] ^= 1
    with pytest.raises(TagInvalid):
        sr.open(bytes(bad))
    assert sr.state is TunnelState.CLOSED
    with pytest.raises(SessionClosed):
        sr.open(si.seal(b"y"))


def test_mitm_with_stolen_certificate(pki):
    """An attacker presents bob's certificate but holds a different Falcon key."""
    mallory_keys = falcon_keygen(b"mallory" * 7)
    fake_bob = Identity(pki.members["bob"].identity.cert, mallory_keys)
    with pytest.raises(SignatureInvalid):
        handshake(pki.members["alice"].identity, fake_bob, pki.policy, pki.policy, b"m", now=2)
    with pytest.raises(SignatureInvalid):
        handshake(fake_bob, pki.members["alice"].identity, pki.policy, pki.policy, b"m", now=2)


def test_untrusted_and_expired_certificates(pki):
    alice, bob = pki.members["alice"].identity, pki.members["bob"].identity
    other_ca = TrustPolicy(pki.members["writer"].falcon.public)
    with pytest.raises(CertificateRejected):
        handshake(alice, bob, pki.policy, other_ca, b"u", now=2)
    with pytest.raises(CertificateRejected):
        handshake(alice, bob, pki.policy, pki.policy, b"u", now=alice.cert.not_after)
    resigned = Identity(replace(alice.cert, not_after=alice.cert.not_after + 5), alice.falcon_keys)
    with pytest.raises(CertificateRejected):
        handshake(resigned, bob, pki.policy, pki.policy, b"u", now=2)
    only_writer = TrustPolicy(pki.ca.falcon_public, frozenset({pki.members["writer"].did}))
    with pytest.raises(CertificateRejected):
        handshake(alice, bob, pki.policy, only_writer, b"u", now=2)


@settings(max_examples=30)
@given(st.integers(0, 4), st.integers(6, 10_000), st.integers(0, 7))
def test_any_handshake_bit_flip_aborts(pki, which, pos, bit):
    count = [0]

    def tamper(kind, direction, frame):
        i = count[0]
        count[0] += 1
        if i != which:
            return frame
        b = bytearray(frame)
        b[pos % (len(b) - 5) + 5] ^= 1 << bit
        return bytes(b)

    with pytest.raises((PqError, ValueError)):
        handshake(pki.members["alice"].identity, pki.members["bob"].identity, pki.policy, pki.policy,
                  b"t", now=2, tamper=tamper)


def test_confirmation_mismatch(pki):
    def tamper(kind, direction, frame):
        if kind.name == "FINISHED" and direction == "r2i":
            return frame[:-1] + bytes([frame[-1] ^ 1])
        return frame
    with pytest.raises(ConfirmFailed):
        handshake(pki.members["alice"].identity, pki.members["bob"].identity, pki.policy, pki.policy,
                  b"f", now=2, tamper=tamper)
