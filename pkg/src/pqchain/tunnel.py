"""Post-quantum point-to-point tunnel.

Handshake (frames of :mod:`pqchain.wire`, types 16-19):

  1. I -> R  HELLO         aead || cert_I || nonce_I
  2. R -> I  HELLO_REPLY   cert_R || nonce_R || ephemeral KEM pk || Falcon_R(transcript)
  3. I -> R  KEY_EXCHANGE  KEM ciphertext || Falcon_I(transcript)
  4. I <-> R FINISHED      key confirmation, one frame each way

Traffic keys = SHAKE256(shared_secret || transcript_hash, 64), split into the
initiator->responder and responder->initiator keys.

Records: u32 length || u64 seq || ciphertext || 16-byte tag, where length
counts everything after itself.
"""

from __future__ import annotations

import enum
import hmac
import struct
from dataclasses import dataclass, field

from .certs import PqCertificate, verify_certificate
from .crypto import aead, falcon
from .crypto.falcon import FalconKeyPair, Outcome
from .crypto.hashing import mac, shake256
from .crypto.kem import DEFAULT_KEM, kem_decap, kem_encap, kem_keygen
from .errors import PqError
from .wire import (
    FrameError,
    FrameType,
    WireLog,
    decode_frame,
    encode_frame,
    pack_fields,
    unpack_fields,
)

AEAD_NAME = "AES-256-GCM"


class TunnelError(PqError):
    code = "TunnelError"


class CertificateRejected(TunnelError):
    code = "CertificateRejected"


class SignatureInvalid(TunnelError):
    code = "SignatureInvalid"


class ConfirmFailed(TunnelError):
    code = "ConfirmFailed"


class HandshakeTimeout(TunnelError):
    code = "Timeout"


class ReplayOrReorder(TunnelError):
    code = "ReplayOrReorder"


class TagInvalid(TunnelError):
    code = "TagInvalid"


class SessionClosed(TunnelError):
    code = "SessionClosed"


class Role(enum.Enum):
    INITIATOR = "Initiator"
    RESPONDER = "Responder"


class TunnelState(enum.Enum):
    HANDSHAKING = "Handshaking"
    OPEN = "Open"
    CLOSED = "Closed"


@dataclass(frozen=True)
class Identity:
    """What an endpoint brings to a handshake."""

    cert: PqCertificate
    falcon_keys: FalconKeyPair


@dataclass(frozen=True)
class TrustPolicy:
    ca_falcon_public: bytes
    allowed_dids: frozenset[str] | None = None  # None: any certified DID

    def check(self, cert: PqCertificate, now: int) -> None:
        v = verify_certificate(cert, self.ca_falcon_public, now)
        if not v:
            raise CertificateRejected(v.reason)
        if self.allowed_dids is not None and cert.did not in self.allowed_dids:
            raise CertificateRejected(f"{cert.did} not on the allow-list")


@dataclass(frozen=True)
class TunnelRecord:
    seq: int
    ciphertext: bytes
    tag: bytes

    def encode(self) -> bytes:
        body = struct.pack(">Q", self.seq) + self.ciphertext + self.tag
        return struct.pack(">I", len(body)) + body

    @classmethod
    def decode(cls, data: bytes) -> TunnelRecord:
        if len(data) < 4 + 8 + aead.TAG_LEN:
            raise FrameError("record too short")
        (n,) = struct.unpack(">I", data[:4])
        if n != len(data) - 4:
            raise FrameError("record length mismatch")
        (seq,) = struct.unpack(">Q", data[4:12])
        return cls(seq, data[12:-aead.TAG_LEN], data[-aead.TAG_LEN:])


@dataclass
class TunnelSession:
    local_cert: PqCertificate
    peer_cert: PqCertificate
    role: Role
    send_key: bytes = field(repr=False)
    recv_key: bytes = field(repr=False)
    send_seq: int = 0
    recv_seq: int = 0
    state: TunnelState = TunnelState.OPEN
    opened_at: int = 0

    def __repr__(self) -> str:
        return f"TunnelSession({self.local_cert.did} -> {self.peer_cert.did}, {self.state.value})"

    @property
    def _labels(self) -> tuple[bytes, bytes]:
        return (b"i2r", b"r2i") if self.role is Role.INITIATOR else (b"r2i", b"i2r")

    def close(self) -> None:
        self.state = TunnelState.CLOSED
        self.send_key = self.recv_key = b""

    def seal(self, plaintext: bytes) -> TunnelRecord:
        if self.state is not TunnelState.OPEN:
            raise SessionClosed("tunnel is not open")
        self.send_seq += 1
        seq = self.send_seq
        header = struct.pack(">Q", seq)
        ct = aead.seal(self.send_key, aead.counter_nonce(self._labels[0], seq), bytes(plaintext), header)
        return TunnelRecord(seq, ct[:-aead.TAG_LEN], ct[-aead.TAG_LEN:])

    def open(self, record: TunnelRecord | bytes) -> bytes:
        if self.state is not TunnelState.OPEN:
            raise SessionClosed("tunnel is not open")
        if not isinstance(record, TunnelRecord):
            try:
                record = TunnelRecord.decode(record)
            except FrameError as exc:
                self.close()
                raise TagInvalid(str(exc)) from exc
        if record.seq != self.recv_seq + 1:
            raise ReplayOrReorder(f"expected seq {self.recv_seq + 1}, got {record.seq}")
        header = struct.pack(">Q", record.seq)
        try:
            plain = aead.open_(self.recv_key, aead.counter_nonce(self._labels[1], record.seq),
                               record.ciphertext + record.tag, header)
        except aead.TagInvalid as exc:
            self.close()
            raise TagInvalid("record authentication failed") from exc
        self.recv_seq = record.seq
        return plain


def _sign(keys: FalconKeyPair, transcript: bytes, label: bytes) -> bytes:
    return falcon.falcon_sign(label + shake256(transcript, 32), keys).data


def _check_sig(cert: PqCertificate, transcript: bytes, label: bytes, sig: bytes) -> None:
    if falcon.falcon_verify(label + shake256(transcript, 32), sig, cert.falcon_public_key) is not Outcome.OK:
        raise SignatureInvalid("transcript signature does not verify")


def _keys(shared: bytes, transcript: bytes) -> tuple[bytes, bytes, bytes]:
    th = shake256(transcript, 32)
    okm = shake256(shared + th, 64)
    kc = shake256(b"tunnel-confirm" + shared + th, 32)
    return okm[:32], okm[32:], kc


class Initiator:
    def __init__(self, ident: Identity, policy: TrustPolicy, entropy: bytes, now: int = 0):
        self.ident, self.policy, self.now = ident, policy, now
        self._entropy = entropy
        self.transcript = bytearray()
        self.state = TunnelState.HANDSHAKING
        self._keys = None
        self.peer: PqCertificate | None = None

    def hello(self) -> bytes:
        nonce = shake256(b"tunnel-nonce-i" + self._entropy, 32)
        f = encode_frame(FrameType.HELLO, pack_fields(AEAD_NAME.encode(), self.ident.cert.encode(), nonce))
        self.transcript += f
        return f

    def on_reply(self, frame: bytes) -> bytes:
        try:
            kind, payload = decode_frame(frame)
            if kind != FrameType.HELLO_REPLY:
                raise FrameError("expected HELLO_REPLY")
            cert_b, nonce_r, kem_pk, sig = unpack_fields(payload, 4)
            peer = PqCertificate.decode(cert_b)
        except (FrameError, ValueError) as exc:
            self.state = TunnelState.CLOSED
            raise CertificateRejected(f"unreadable reply: {exc}") from exc
        try:
            self.policy.check(peer, self.now)
            signed = bytes(self.transcript) + bytes([FrameType.HELLO_REPLY]) + pack_fields(cert_b, nonce_r, kem_pk)
            _check_sig(peer, signed, b"tunnel-responder", sig)
        except TunnelError:
            self.state = TunnelState.CLOSED
            raise
        self.peer = peer
        self.transcript += frame
        try:
            ct, shared = kem_encap(kem_pk, shake256(b"tunnel-encap" + self._entropy, 32))
        except ValueError as exc:
            self.state = TunnelState.CLOSED
            raise SignatureInvalid("peer KEM key unusable") from exc
        head = bytes(self.transcript) + ct.data
        sig_i = _sign(self.ident.falcon_keys, head, b"tunnel-initiator")
        f = encode_frame(FrameType.KEY_EXCHANGE, pack_fields(ct.data, sig_i))
        self.transcript += f
        self._keys = _keys(shared, bytes(self.transcript))
        return f

    def finished(self) -> bytes:
        th = shake256(bytes(self.transcript), 32)
        return encode_frame(FrameType.FINISHED, mac(self._keys[2], b"initiator-finished", th))

    def on_finished(self, frame: bytes) -> TunnelSession:
        th = shake256(bytes(self.transcript), 32)
        try:
            kind, payload = decode_frame(frame)
        except FrameError as exc:
            self.state = TunnelState.CLOSED
            raise ConfirmFailed(str(exc)) from exc
        if kind != FrameType.FINISHED or not hmac.compare_digest(payload, mac(self._keys[2], b"responder-finished", th)):
            self.state, self._keys = TunnelState.CLOSED, None
            raise ConfirmFailed("responder confirmation mismatch")
        self.state = TunnelState.OPEN
        i2r, r2i, _ = self._keys
        return TunnelSession(self.ident.cert, self.peer, Role.INITIATOR, i2r, r2i, opened_at=self.now)


class Responder:
    def __init__(self, ident: Identity, policy: TrustPolicy, entropy: bytes, now: int = 0):
        self.ident, self.policy, self.now = ident, policy, now
        self._entropy = entropy
        self.transcript = bytearray()
        self.state = TunnelState.HANDSHAKING
        self._kem = None
        self._keys = None
        self.peer: PqCertificate | None = None

    def on_hello(self, frame: bytes) -> bytes:
        try:
            kind, payload = decode_frame(frame)
            if kind != FrameType.HELLO:
                raise FrameError("expected HELLO")
            aead_name, cert_b, _nonce_i = unpack_fields(payload, 3)
            peer = PqCertificate.decode(cert_b)
        except (FrameError, ValueError) as exc:
            self.state = TunnelState.CLOSED
            raise CertificateRejected(f"unreadable hello: {exc}") from exc
        if aead_name.decode(errors="replace") != AEAD_NAME:
            self.state = TunnelState.CLOSED
            raise TunnelError("no common AEAD")
        try:
            self.policy.check(peer, self.now)
        except TunnelError:
            self.state = TunnelState.CLOSED
            raise
        self.peer = peer
        self.transcript += frame
        self._kem = kem_keygen(shake256(b"tunnel-kem" + self._entropy, 64), DEFAULT_KEM)
        nonce_r = shake256(b"tunnel-nonce-r" + self._entropy, 32)
        cert_b = self.ident.cert.encode()
        head = bytes(self.transcript) + bytes([FrameType.HELLO_REPLY]) + pack_fields(cert_b, nonce_r, self._kem.public)
        # the signature covers everything before it in this frame
        sig = _sign(self.ident.falcon_keys, head, b"tunnel-responder")
        f = encode_frame(FrameType.HELLO_REPLY, pack_fields(cert_b, nonce_r, self._kem.public, sig))
        self.transcript += f
        return f

    def on_key_exchange(self, frame: bytes) -> bytes:
        try:
            kind, payload = decode_frame(frame)
            if kind != FrameType.KEY_EXCHANGE:
                raise FrameError("expected KEY_EXCHANGE")
            ct, sig = unpack_fields(payload, 2)
        except FrameError as exc:
            self.state = TunnelState.CLOSED
            raise SignatureInvalid(str(exc)) from exc
        try:
            _check_sig(self.peer, bytes(self.transcript) + ct, b"tunnel-initiator", sig)
        except TunnelError:
            self.state = TunnelState.CLOSED
            raise
        try:
            shared = kem_decap(ct, self._kem)
        except ValueError as exc:
            self.state = TunnelState.CLOSED
            raise ConfirmFailed("KEM ciphertext unusable") from exc
        self.transcript += frame
        self._keys = _keys(shared, bytes(self.transcript))
        self._kem = None
        th = shake256(bytes(self.transcript), 32)
        return encode_frame(FrameType.FINISHED, mac(self._keys[2], b"responder-finished", th))

    def on_finished(self, frame: bytes) -> TunnelSession:
        th = shake256(bytes(self.transcript), 32)
        try:
            kind, payload = decode_frame(frame)
        except FrameError as exc:
            self.state = TunnelState.CLOSED
            raise ConfirmFailed(str(exc)) from exc
        if kind != FrameType.FINISHED or not hmac.compare_digest(payload, mac(self._keys[2], b"initiator-finished", th)):
            self.state, self._keys = TunnelState.CLOSED, None
            raise ConfirmFailed("initiator confirmation mismatch")
        self.state = TunnelState.OPEN
        i2r, r2i, _ = self._keys
        return TunnelSession(self.ident.cert, self.peer, Role.RESPONDER, r2i, i2r, opened_at=self.now)


def handshake(initiator: Identity, responder: Identity, policy_i: TrustPolicy, policy_r: TrustPolicy,
              entropy: bytes, now: int = 0, wire: WireLog | None = None, tamper=None,
              channel: str = "tunnel") -> tuple[TunnelSession, TunnelSession]:
    """Run the 4-message handshake over a simulated channel.

    ``tamper(kind, direction, frame) -> frame`` models an active attacker.
    """
    wire = wire if wire is not None else WireLog()

    def carry(direction: str, frame: bytes) -> bytes:
        if tamper is not None:
            frame = tamper(FrameType(frame[4]), direction, frame)
        wire.record(channel, direction, frame)
        return frame

    ini = Initiator(initiator, policy_i, shake256(b"I" + entropy, 32), now)
    res = Responder(responder, policy_r, shake256(b"R" + entropy, 32), now)
    m1 = carry("i2r", ini.hello())
    m2 = carry("r2i", res.on_hello(m1))
    m3 = carry("i2r", ini.on_reply(m2))
    m4r = carry("r2i", res.on_key_exchange(m3))
    m4i = carry("i2r", ini.finished())
    s_r = res.on_finished(m4i)
    s_i = ini.on_finished(m4r)
    return s_i, s_r
