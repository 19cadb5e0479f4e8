"""Entropy service: split-key bootstrap, session establishment, requests."""

import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pqchain.entropy import (
    AuthFailure,
    ConfirmationMismatch,
    CounterExhausted,
    EntropyConfig,
    EntropyService,
    EntropySource,
    Expired,
    Link,
    MissingShare,
    MixedSession,
    ReplayDetected,
    ReusedKey,
    SessionNotEstablished,
    SessionState,
    Timeout,
    accept_response,
    establish_entropy_session,
    open_session,
    recompose_bootstrap_key,
    request_entropy,
    split_bootstrap_key,
)
from pqchain.wire import FrameType, WireLog

SID = bytes(range(16))


class Scripted:
    """random_bytes() returns the queued values in order."""

    def __init__(self, *values):
        self.values = list(values)

    def random_bytes(self, n):
        v = self.values.pop(0)
        assert len(v) == n
        return v


class Recording(EntropySource):
    def __init__(self, seed):
        super().__init__(seed)
        self.log = []

    def random_bytes(self, n):
        out = super().random_bytes(n)
        self.log.append(out)
        return out


def test_exhaustive_one_byte_two_shares():
    """Every (key, randomness) pair; each single share is independent of the key."""
    seen = {1: {}, 2: {}}
    for key in range(256):
        for r in range(256):
            shares = split_bootstrap_key(bytes([key]), 2, Scripted(bytes([r])), SID, 10)
            assert bytes(recompose_bootstrap_key(shares, 0, set())) == bytes([key])
            for s in shares:
                seen[s.index].setdefault(s.share[0], []).append(key)
    for idx in (1, 2):
        # every observed share value occurs for every key exactly once
        assert len(seen[idx]) == 256
        assert all(sorted(keys) == list(range(256)) for keys in seen[idx].values())


def test_exhaustive_single_share_never_recovers():
    for key, r in itertools.product(range(256), range(0, 256, 17)):
        shares = split_bootstrap_key(bytes([key]), 2, Scripted(bytes([r])), SID, 10)
        for s in shares:
            with pytest.raises(MissingShare):
                recompose_bootstrap_key([s], 0, set())


@given(st.binary(min_size=1, max_size=48), st.integers(2, 8), st.data())
def test_split_recompose_properties(key, n, data):
    src = EntropySource(data.draw(st.binary(min_size=1, max_size=8)))
    shares = split_bootstrap_key(key, n, src, SID, 100)
    order = data.draw(st.permutations(shares))
    assert bytes(recompose_bootstrap_key(list(order), 5, set())) == key
    drop = data.draw(st.integers(0, n - 1))
    with pytest.raises(MissingShare):
        recompose_bootstrap_key(shares[:drop] + shares[drop + 1:], 5, set())
    with pytest.raises(Expired):
        recompose_bootstrap_key(shares, 100, set())


def test_reused_and_mixed_sessions():
    src = EntropySource(b"s")
    shares = split_bootstrap_key(b"k" * 32, 3, src, SID, 100)
    spent = set()
    recompose_bootstrap_key(shares, 0, spent)
    with pytest.raises(ReusedKey):
        recompose_bootstrap_key(shares, 0, spent)
    other = split_bootstrap_key(b"k" * 32, 3, src, bytes(16), 100)
    with pytest.raises(MixedSession):
        recompose_bootstrap_key(shares[:2] + other[2:], 0, set())


def _service(seed=b"svc", **cfg):
    return EntropyService(Recording(seed), EntropyConfig(**cfg))


def test_full_session_and_wire_scan():
    svc = _service(n_shares=4)
    wire = WireLog()
    session = open_session(svc, "node-1", 3, b"local entropy", wire)
    assert session.state is SessionState.ESTABLISHED
    assert svc.session_state(session.session_id) is SessionState.ESTABLISHED
    bootstrap_key = svc.source.log[0]
    draws = [request_entropy(session, n, 4) for n in (1, 32, 500)]
    assert [len(d) for d in draws] == [1, 32, 500]
    assert draws == svc.delivered
    secrets = [bootstrap_key, session.shared_secret, session.kem_keys.secret, *session._keys, draws[1], draws[2]]
    for secret in secrets:
        assert not wire.contains(secret)
    # the key buffer held by the node was zeroed after use
    assert not any(session.bootstrap_key)
    assert len(wire.frames(FrameType.SHARE)) == 4


def test_missing_share_aborts():
    svc = _service()
    link = Link(svc)
    frames = link.deliver_shares(svc.begin_bootstrap("n", 0))
    with pytest.raises(MissingShare):
        establish_entropy_session("n", frames[:-1], link, 0, b"x")


def test_expired_share_aborts():
    svc = _service(timeout=10)
    link = Link(svc)
    frames = link.deliver_shares(svc.begin_bootstrap("n", 0))
    with pytest.raises(Expired):
        establish_entropy_session("n", frames, link, 10, b"x")


def test_server_side_deadline():
    svc = _service(timeout=10)
    frames = svc.begin_bootstrap("n", 0)

    class LateLink(Link):
        def send(self, frame, now):
            return super().send(frame, now + 50)

    with pytest.raises(Timeout):
        establish_entropy_session("n", frames, LateLink(svc), 0, b"x")


def test_reused_bootstrap_key_aborts():
    svc = _service()
    link = Link(svc)
    frames = link.deliver_shares(svc.begin_bootstrap("n", 0))
    spent = set()
    establish_entropy_session("n", frames, link, 0, b"x", spent)
    with pytest.raises(ReusedKey):
        establish_entropy_session("n", frames, link, 0, b"x", spent)
    # a fresh node-side record still cannot replay: the service refuses
    with pytest.raises(ReplayDetected):
        establish_entropy_session("n", frames, link, 0, b"x")


def _flip(kind_to_hit, direction_to_hit="n2s", occurrence=0):
    hits = []

    def tamper(kind, direction, frame):
        if kind == kind_to_hit and direction == direction_to_hit:
            hits.append(frame)
            if len(hits) - 1 == occurrence:
                b = bytearray(frame)
                b[-1] ^= 1
                return bytes(b)
        return frame
    return tamper


@pytest.mark.parametrize("kind,direction,occurrence,err", [
    (FrameType.AUTH, "n2s", 1, AuthFailure),           # response MAC
    (FrameType.AUTH, "s2n", 1, AuthFailure),           # service proof
    (FrameType.KEM_PUB, "n2s", 0, AuthFailure),
    (FrameType.KEM_CT, "s2n", 0, ConfirmationMismatch),
    (FrameType.CONFIRM, "n2s", 0, ConfirmationMismatch),
    (FrameType.CONFIRM, "s2n", 0, ConfirmationMismatch),
])
def test_tampered_handshake_aborts(kind, direction, occurrence, err):
    svc = _service()
    link = Link(svc, tamper=_flip(kind, direction, occurrence))
    frames = link.deliver_shares(svc.begin_bootstrap("n", 0))
    with pytest.raises(err):
        establish_entropy_session("n", frames, link, 0, b"x")


def test_tampered_share_aborts():
    svc = _service()
    link = Link(svc, tamper=_flip(FrameType.SHARE, "s2n", 1))
    frames = link.deliver_shares(svc.begin_bootstrap("n", 0))
    with pytest.raises(AuthFailure):
        establish_entropy_session("n", frames, link, 0, b"x")


def test_wrong_node_id_aborts():
    svc = _service()
    link = Link(svc)
    frames = link.deliver_shares(svc.begin_bootstrap("n", 0))
    with pytest.raises(AuthFailure):
        establish_entropy_session("impostor", frames, link, 0, b"x")


def test_response_replay_and_tamper():
    svc = _service()
    session = open_session(svc, "n", 0, b"x")
    request_entropy(session, 16)
    resp = session.link.wire.frames(FrameType.ENTROPY_RESP)[-1]
    with pytest.raises(ReplayDetected):
        accept_response(session, resp)
    request_entropy(session, 16)
    assert session.recv_counter == 2


def test_request_limits():
    svc = _service(max_counter=2, max_age=100)
    session = open_session(svc, "n", 0, b"x")
    with pytest.raises(ValueError):
        request_entropy(session, 0)
    request_entropy(session, 8, 1)
    request_entropy(session, 8, 1)
    with pytest.raises(CounterExhausted):
        request_entropy(session, 8, 1)
    with pytest.raises(SessionNotEstablished):
        request_entropy(session, 8, 1)
    aged = open_session(svc, "m", 0, b"y")
    with pytest.raises(SessionNotEstablished):
        request_entropy(aged, 8, 100)


def test_sessions_are_isolated():
    svc = _service()
    a = open_session(svc, "a", 0, b"1")
    b = open_session(svc, "b", 0, b"2")
    assert a.session_id != b.session_id and a.shared_secret != b.shared_secret
    request_entropy(a, 4)
    assert b.send_counter == 0


@settings(max_examples=25)
@given(st.integers(1, 64))
def test_source_never_repeats_blocks(n):
    src = EntropySource(b"rep")
    blocks = [src.generate(n).data for _ in range(40)]
    assert len(set(blocks)) == len(blocks)
    assert src.issued_count == 40


def test_seeded_source_is_uncertified():
    assert not EntropySource(b"s", certified=True).certified
    assert EntropySource(None, certified=True).certified
    assert "data" not in repr(EntropySource(b"s").generate(4))
