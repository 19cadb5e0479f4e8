"""Bootstrap handshake and entropy-on-demand between a node and the service.

Flow (all frames pass through a :class:`Link`, which logs them):

  service -> node   SHARE x N        one share per independent channel
  node -> service   AUTH             session_id || node_id           (hello)
  service -> node   AUTH             session_id || challenge
  node -> service   AUTH             session_id || node_id || challenge || MAC_k
  service -> node   AUTH             session_id || MAC_k(ack)
  node -> service   KEM_PUB          session_id || algorithm || pk || MAC_k
  service -> node   KEM_CT           session_id || ciphertext
  node <-> service  CONFIRM          key confirmation under the KEM secret

k is the recomposed bootstrap key; it is zeroed once CONFIRM succeeds.
"""

from __future__ import annotations

import enum
import hmac
import struct
from dataclasses import dataclass, field

from ..crypto import aead
from ..crypto.hashing import mac, shake256
from ..crypto.kem import DEFAULT_KEM, KemKeyPair, kem_decap, kem_encap, kem_keygen
from ..wire import (
    FrameError,
    FrameType,
    WireLog,
    encode_frame,
    pack_fields,
    read_frame,
    unpack_fields,
)
from . import errors as E
from .bootstrap import BootstrapShare, recompose_bootstrap_key, split_bootstrap_key
from .source import EntropySource


@dataclass(frozen=True)
class EntropyConfig:
    n_shares: int = 3
    timeout: int = 30
    key_len: int = 32
    kem_algorithm: str = DEFAULT_KEM
    max_counter: int = (1 << 64) - 1
    max_age: int | None = None
    max_request: int = 1 << 16

    def __post_init__(self):
        if self.n_shares < 2:
            raise ValueError("n_shares must be at least 2")
        if self.key_len < 32:
            raise ValueError("bootstrap key must be at least 32 bytes")


class SessionState(enum.Enum):
    BOOTSTRAPPING = "Bootstrapping"
    RENEGOTIATING = "Renegotiating"
    ESTABLISHED = "Established"
    CLOSED = "Closed"


def _zero(buf: bytearray | None) -> None:
    if buf is not None:
        for i in range(len(buf)):
            buf[i] = 0


def _derive(shared: bytes, transcript: bytes) -> tuple[bytes, bytes, bytes]:
    th = shake256(transcript, 32)
    okm = shake256(b"entropy-session" + shared + th, 96)
    return okm[:32], okm[32:64], okm[64:]


def _error_frame(exc: E.EntropyError) -> bytes:
    return encode_frame(FrameType.ERROR, exc.code.encode())


def _raise_if_error(frame: bytes) -> tuple[FrameType, bytes]:
    kind, payload, rest = read_frame(frame)
    if rest:
        raise FrameError("trailing bytes")
    if kind == FrameType.ERROR:
        code = payload.decode(errors="replace")
        raise E.BY_CODE.get(code, E.EntropyError)("reported by peer")
    return kind, payload


@dataclass
class _ServerSession:
    node_id: bytes
    key: bytearray | None
    expires_at: int
    challenge: bytes | None = None
    authed: bool = False
    transcript: bytearray = field(default_factory=bytearray)
    shared: bytes | None = None
    keys: tuple[bytes, bytes, bytes] | None = None
    state: SessionState = SessionState.BOOTSTRAPPING
    recv_counter: int = 0
    send_counter: int = 0
    opened_at: int = 0


class EntropyService:
    """Service endpoint; holds isolated state per session."""

    def __init__(self, source: EntropySource, config: EntropyConfig | None = None):
        self.source = source
        self.config = config or EntropyConfig()
        self._sessions: dict[bytes, _ServerSession] = {}
        self._spent_challenges: set[bytes] = set()
        self.delivered: list[bytes] = []

    def begin_bootstrap(self, node_id: str, now: int) -> list[bytes]:
        """Create and split a fresh bootstrap key; returns one SHARE frame per channel."""
        cfg = self.config
        key = bytearray(self.source.random_bytes(cfg.key_len))
        sid = self.source.random_bytes(16)
        expires = now + cfg.timeout
        shares = split_bootstrap_key(bytes(key), cfg.n_shares, self.source, sid, expires)
        self._sessions[sid] = _ServerSession(node_id.encode(), key, expires, opened_at=now)
        return [encode_frame(FrameType.SHARE, s.encode()) for s in shares]

    def session_state(self, sid: bytes) -> SessionState:
        return self._sessions[sid].state

    def handle(self, frame: bytes, now: int) -> bytes:
        try:
            return self._handle(frame, now)
        except E.EntropyError as exc:
            return _error_frame(exc)
        except (FrameError, ValueError, struct.error):
            return _error_frame(E.EntropyError("malformed frame"))

    def _session(self, sid: bytes) -> _ServerSession:
        s = self._sessions.get(sid)
        if s is None:
            raise E.AuthFailure("unknown session")
        if s.state == SessionState.CLOSED:
            raise E.ReplayDetected("session already closed")
        return s

    def _abort(self, s: _ServerSession) -> None:
        _zero(s.key)
        s.key = None
        s.keys = None
        s.state = SessionState.CLOSED

    def _handle(self, frame: bytes, now: int) -> bytes:
        kind, payload, rest = read_frame(frame)
        if rest:
            raise FrameError("trailing bytes")
        if kind == FrameType.AUTH:
            return self._on_auth(frame, payload, now)
        if kind == FrameType.KEM_PUB:
            return self._on_kem_pub(frame, payload, now)
        if kind == FrameType.CONFIRM:
            return self._on_confirm(payload)
        if kind == FrameType.ENTROPY_REQ:
            return self._on_request(payload, now)
        raise E.EntropyError(f"unexpected frame {kind.name}")

    def _on_auth(self, frame: bytes, payload: bytes, now: int) -> bytes:
        try:
            sid, node_id = unpack_fields(payload, 2)
        except FrameError:
            return self._on_auth_response(frame, payload, now)
        s = self._session(sid)
        if now >= s.expires_at:
            self._abort(s)
            raise E.Timeout("bootstrap deadline passed")
        if s.challenge is not None:
            raise E.ReplayDetected("challenge already issued for this session")
        s.challenge = self.source.random_bytes(32)
        s.transcript += frame
        reply = encode_frame(FrameType.AUTH, pack_fields(sid, s.challenge))
        s.transcript += reply
        return reply

    def _on_auth_response(self, frame: bytes, payload: bytes, now: int) -> bytes:
        sid, node_id, challenge, tag = unpack_fields(payload, 4)
        s = self._session(sid)
        if now >= s.expires_at:
            self._abort(s)
            raise E.Timeout("bootstrap deadline passed")
        if s.authed or challenge in self._spent_challenges or challenge != s.challenge:
            raise E.ReplayDetected("stale or reused challenge")
        if s.key is None or not hmac.compare_digest(tag, mac(bytes(s.key), b"auth", sid, node_id, challenge)):
            raise E.AuthFailure("bad MAC")
        if node_id != s.node_id:
            raise E.AuthFailure("node id does not match bootstrap request")
        self._spent_challenges.add(challenge)
        s.authed = True
        s.state = SessionState.RENEGOTIATING
        s.transcript += frame
        reply = encode_frame(FrameType.AUTH, pack_fields(sid, mac(bytes(s.key), b"auth-ack", sid, challenge)))
        s.transcript += reply
        return reply

    def _on_kem_pub(self, frame: bytes, payload: bytes, now: int) -> bytes:
        sid, alg, pk, tag = unpack_fields(payload, 4)
        s = self._session(sid)
        if not s.authed or s.shared is not None:
            raise E.ReplayDetected("KEM key outside the renegotiation window")
        if now >= s.expires_at:
            self._abort(s)
            raise E.Timeout("bootstrap deadline passed")
        if s.key is None or not hmac.compare_digest(tag, mac(bytes(s.key), b"kem-pub", sid, alg, pk)):
            raise E.AuthFailure("KEM public key MAC mismatch")
        if alg.decode() != self.config.kem_algorithm:
            raise E.EntropyError("KEM algorithm not offered")
        ct, shared = kem_encap(pk, self.source.random_bytes(32), self.config.kem_algorithm)
        s.shared = shared
        s.transcript += frame
        reply = encode_frame(FrameType.KEM_CT, pack_fields(sid, ct.data))
        s.transcript += reply
        s.keys = _derive(shared, bytes(s.transcript))
        return reply

    def _on_confirm(self, payload: bytes) -> bytes:
        sid, tag = unpack_fields(payload, 2)
        s = self._session(sid)
        if s.keys is None or s.state != SessionState.RENEGOTIATING:
            raise E.ReplayDetected("confirmation outside handshake")
        kc = s.keys[0]
        th = shake256(bytes(s.transcript), 32)
        if not hmac.compare_digest(tag, mac(kc, b"node-confirm", th)):
            self._abort(s)
            raise E.ConfirmationMismatch("node confirmation failed")
        _zero(s.key)
        s.key = None
        s.state = SessionState.ESTABLISHED
        return encode_frame(FrameType.CONFIRM, pack_fields(sid, mac(kc, b"service-confirm", th)))

    def _on_request(self, payload: bytes, now: int) -> bytes:
        sid, ctr, body = unpack_fields(payload, 3)
        s = self._sessions.get(sid)
        if s is None or s.state != SessionState.ESTABLISHED:
            raise E.SessionNotEstablished("no established session")
        counter = int.from_bytes(ctr, "big")
        if counter != s.recv_counter + 1:
            raise E.ReplayDetected("request counter out of sequence")
        _, k_n2s, k_s2n = s.keys
        try:
            plain = aead.open_(k_n2s, aead.counter_nonce(b"n2s", counter), body, sid)
        except aead.TagInvalid as exc:
            raise E.AuthFailure("request tag invalid") from exc
        (n,) = struct.unpack(">I", plain)
        if not 1 <= n <= self.config.max_request:
            raise E.EntropyError("request size out of range")
        s.recv_counter = counter
        s.send_counter += 1
        data = self.source.random_bytes(n)
        self.delivered.append(data)
        sealed = aead.seal(k_s2n, aead.counter_nonce(b"s2n", s.send_counter), data, sid)
        return encode_frame(FrameType.ENTROPY_RESP, pack_fields(sid, s.send_counter.to_bytes(8, "big"), sealed))


class Link:
    """Simulated node<->service channel with a wire log and a tamper hook.

    ``tamper(kind, direction, frame) -> frame`` may rewrite frames in flight.
    """

    def __init__(self, service: EntropyService, wire: WireLog | None = None, tamper=None, name: str = "control"):
        self.service = service
        self.wire = wire if wire is not None else WireLog()
        self.tamper = tamper
        self.name = name

    def _pass(self, direction: str, frame: bytes) -> bytes:
        if self.tamper is not None:
            frame = self.tamper(FrameType(frame[4]), direction, frame)
        self.wire.record(self.name, direction, frame)
        return frame

    def send(self, frame: bytes, now: int) -> bytes:
        frame = self._pass("n2s", frame)
        reply = self.service.handle(frame, now)
        return self._pass("s2n", reply)

    def deliver_shares(self, frames: list[bytes]) -> list[bytes]:
        out = []
        for i, f in enumerate(frames):
            if self.tamper is not None:
                f = self.tamper(FrameType.SHARE, "s2n", f)
            self.wire.record(f"share-{i + 1}", "s2n", f)
            out.append(f)
        return out


@dataclass
class EntropySession:
    session_id: bytes
    node_id: str
    kem_keys: KemKeyPair
    shared_secret: bytes
    link: Link
    send_counter: int = 0
    recv_counter: int = 0
    state: SessionState = SessionState.ESTABLISHED
    established_at: int = 0
    bootstrap_key: bytearray = field(default_factory=bytearray, repr=False)
    _keys: tuple[bytes, bytes, bytes] = field(default=(b"", b"", b""), repr=False)

    def __repr__(self) -> str:
        return f"EntropySession({self.session_id.hex()[:8]}, {self.node_id}, {self.state.value})"

    def close(self) -> None:
        self.state = SessionState.CLOSED
        self._keys = (b"", b"", b"")


def establish_entropy_session(
    node_id: str,
    share_frames: list[bytes],
    link: Link,
    now: int,
    local_entropy: bytes,
    spent: set[bytes] | None = None,
    config: EntropyConfig | None = None,
) -> EntropySession:
    """Node side of the bootstrap. ``spent`` is the node's record of used
    bootstrap sessions (enforces one-time use)."""
    cfg = config or link.service.config
    spent = set() if spent is None else spent
    shares = []
    for f in share_frames:
        kind, payload = _raise_if_error(f)
        if kind != FrameType.SHARE:
            raise E.EntropyError("expected SHARE frame")
        shares.append(BootstrapShare.decode(payload))
    key = recompose_bootstrap_key(shares, now, spent)
    sid = shares[0].session_id
    nid = node_id.encode()
    transcript = bytearray()
    try:
        hello = encode_frame(FrameType.AUTH, pack_fields(sid, nid))
        transcript += hello
        reply = link.send(hello, now)
        kind, payload = _raise_if_error(reply)
        transcript += reply
        rsid, challenge = unpack_fields(payload, 2)
        if rsid != sid:
            raise E.AuthFailure("challenge for another session")

        resp = encode_frame(FrameType.AUTH, pack_fields(sid, nid, challenge, mac(bytes(key), b"auth", sid, nid, challenge)))
        transcript += resp
        ack = link.send(resp, now)
        _, payload = _raise_if_error(ack)
        transcript += ack
        rsid, ack_tag = unpack_fields(payload, 2)
        if not hmac.compare_digest(ack_tag, mac(bytes(key), b"auth-ack", sid, challenge)):
            raise E.AuthFailure("service failed to prove the bootstrap key")

        kem_keys = kem_keygen(shake256(b"node-kem" + local_entropy + sid, 64), cfg.kem_algorithm)
        alg = cfg.kem_algorithm.encode()
        pub = encode_frame(FrameType.KEM_PUB, pack_fields(sid, alg, kem_keys.public, mac(bytes(key), b"kem-pub", sid, alg, kem_keys.public)))
        transcript += pub
        ct_frame = link.send(pub, now)
        kind, payload = _raise_if_error(ct_frame)
        transcript += ct_frame
        _, ct = unpack_fields(payload, 2)
        try:
            shared = kem_decap(ct, kem_keys)
        except ValueError as exc:
            raise E.ConfirmationMismatch("KEM ciphertext unusable") from exc
        keys = _derive(shared, bytes(transcript))
        th = shake256(bytes(transcript), 32)
        conf = encode_frame(FrameType.CONFIRM, pack_fields(sid, mac(keys[0], b"node-confirm", th)))
        back = link.send(conf, now)
        _, payload = _raise_if_error(back)
        _, tag = unpack_fields(payload, 2)
        if not hmac.compare_digest(tag, mac(keys[0], b"service-confirm", th)):
            raise E.ConfirmationMismatch("service confirmation failed")
    finally:
        # the bootstrap key is single-use whatever the outcome
        _zero(key)
    return EntropySession(sid, node_id, kem_keys, shared, link, established_at=now, bootstrap_key=key, _keys=keys)


def open_session(service: EntropyService, node_id: str, now: int, local_entropy: bytes,
                 wire: WireLog | None = None) -> EntropySession:
    """Full bootstrap for one node over an honest link."""
    link = Link(service, wire, name=f"entropy:{node_id}")
    shares = link.deliver_shares(service.begin_bootstrap(node_id, now))
    return establish_entropy_session(node_id, shares, link, now, local_entropy)


def request_entropy(session: EntropySession, n: int, now: int = 0) -> bytes:
    cfg = session.link.service.config
    if session.state != SessionState.ESTABLISHED:
        raise E.SessionNotEstablished(f"session is {session.state.value}")
    if cfg.max_age is not None and now - session.established_at >= cfg.max_age:
        session.close()
        raise E.SessionNotEstablished("session exceeded its maximum age")
    if session.send_counter >= cfg.max_counter:
        session.close()
        raise E.CounterExhausted("request counter exhausted")
    if n < 1:
        raise ValueError("entropy request must be at least 1 byte")
    counter = session.send_counter + 1
    _, k_n2s, _ = session._keys
    body = aead.seal(k_n2s, aead.counter_nonce(b"n2s", counter), struct.pack(">I", n), session.session_id)
    req = encode_frame(FrameType.ENTROPY_REQ, pack_fields(session.session_id, counter.to_bytes(8, "big"), body))
    session.send_counter = counter
    resp = session.link.send(req, now)
    return accept_response(session, resp)


def accept_response(session: EntropySession, frame: bytes) -> bytes:
    """Open an ENTROPY_RESP; replays and reordering are refused."""
    kind, payload = _raise_if_error(frame)
    if kind != FrameType.ENTROPY_RESP:
        raise E.EntropyError("expected ENTROPY_RESP")
    sid, ctr, sealed = unpack_fields(payload, 3)
    counter = int.from_bytes(ctr, "big")
    if sid != session.session_id or counter != session.recv_counter + 1:
        raise E.ReplayDetected("response counter out of sequence")
    _, _, k_s2n = session._keys
    try:
        data = aead.open_(k_s2n, aead.counter_nonce(b"s2n", counter), sealed, sid)
    except aead.TagInvalid as exc:
        session.close()
        raise E.AuthFailure("response tag invalid") from exc
    session.recv_counter = counter
    return data
