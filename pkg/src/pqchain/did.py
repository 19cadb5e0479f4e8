"""DID registry: CA-gated, append-only, locally replicated."""

from __future__ import annotations

import re
from dataclasses import dataclass

from . import tlv
from .crypto.hashing import keccak256
from .crypto.secp256k1 import derive_address
from .errors import PqError

DEFAULT_METHOD = "lac"
_DID_RE = re.compile(r"did:([a-z0-9]+):([0-9a-f]{40})")


class DidError(PqError):
    code = "DidError"


class MalformedDid(DidError):
    code = "MalformedDid"


class NotFound(DidError):
    code = "NotFound"


class Unauthorized(DidError):
    code = "Unauthorized"


class DuplicateDid(DidError):
    code = "DuplicateDid"


def parse_did(s: str) -> tuple[str, str]:
    """(method, method-specific id)."""
    if not isinstance(s, str) or s.count(":") != 2:
        raise MalformedDid(f"expected did:<method>:<id>, got {s!r}")
    m = _DID_RE.fullmatch(s)
    if m is None:
        raise MalformedDid(f"malformed DID {s!r}")
    return m.group(1), m.group(2)


def is_did(s: str) -> bool:
    try:
        parse_did(s)
    except MalformedDid:
        return False
    return True


def did_from_address(address: bytes, method: str = DEFAULT_METHOD) -> str:
    if len(address) != 20:
        raise ValueError("address must be 20 bytes")
    return f"did:{method}:{address.hex()}"


def did_for_key(eth_public_key: bytes, method: str = DEFAULT_METHOD) -> str:
    return did_from_address(derive_address(eth_public_key), method)


_RECORD_MAGIC = b"DIDR"


@dataclass(frozen=True)
class DidRecord:
    did: str
    eth_public_key: bytes
    falcon_public_key: bytes
    subject_proof: bytes
    controller: str
    registered_at: int

    def __post_init__(self):
        parse_did(self.did)
        parse_did(self.controller)
        if len(self.eth_public_key) != 64:
            raise ValueError("eth public key must be 64 bytes")
        if len(self.falcon_public_key) != 897:
            raise ValueError("falcon public key must be 897 bytes")
        if len(self.subject_proof) != 32:
            raise ValueError("subject proof must be 32 bytes")

    def encode(self) -> bytes:
        return tlv.encode(_RECORD_MAGIC, 1, [
            tlv.text(self.did), self.eth_public_key, self.falcon_public_key,
            self.subject_proof, tlv.text(self.controller), tlv.u64(self.registered_at),
        ])

    @classmethod
    def decode(cls, data: bytes) -> DidRecord:
        did, eth, fal, proof, ctrl, at = tlv.decode(data, _RECORD_MAGIC, 1, 6)
        try:
            return cls(tlv.read_text(did), eth, fal, proof, tlv.read_text(ctrl), tlv.read_u64(at))
        except (ValueError, DidError) as exc:
            raise tlv.TlvError(str(exc)) from exc

    def __repr__(self) -> str:
        return f"DidRecord({self.did})"


@dataclass(frozen=True)
class Receipt:
    did: str
    created: bool
    record_hash: bytes


@dataclass(frozen=True)
class ControlResult:
    ok: bool
    reason: str

    def __bool__(self) -> bool:
        return self.ok


class DidRegistry:
    def __init__(self, ca_did: str):
        parse_did(ca_did)
        self.ca_did = ca_did
        self._records: dict[str, DidRecord] = {}

    def register(self, caller: str, record: DidRecord) -> Receipt:
        if caller != self.ca_did:
            raise Unauthorized(f"{caller} may not register DIDs")
        h = keccak256(record.encode())
        existing = self._records.get(record.did)
        if existing is not None:
            if existing == record:
                return Receipt(record.did, False, h)
            raise DuplicateDid(record.did)
        self._records[record.did] = record
        return Receipt(record.did, True, h)

    def resolve(self, did: str) -> DidRecord:
        parse_did(did)
        rec = self._records.get(did)
        if rec is None:
            raise NotFound(did)
        return rec

    def controls(self, eth_public_key: bytes, did: str) -> ControlResult:
        try:
            _, ident = parse_did(did)
        except MalformedDid:
            return ControlResult(False, "MalformedDid")
        rec = self._records.get(did)
        if rec is None:
            return ControlResult(False, "NotFound")
        if len(eth_public_key) != 64 or derive_address(eth_public_key).hex() != ident:
            return ControlResult(False, "AddressMismatch")
        if rec.eth_public_key != eth_public_key:
            return ControlResult(False, "KeyMismatch")
        return ControlResult(True, "ok")

    def __contains__(self, did: str) -> bool:
        return did in self._records

    def __len__(self) -> int:
        return len(self._records)

    def dids(self) -> list[str]:
        return sorted(self._records)

    def snapshot(self) -> bytes:
        """Sorted ``hex(did) hex(record)`` lines; byte-identical across replicas."""
        lines = [f"{d.encode().hex()} {self._records[d].encode().hex()}\n" for d in sorted(self._records)]
        return "".join(lines).encode()

    def state_hash(self) -> bytes:
        return keccak256(self.snapshot())

    @classmethod
    def from_snapshot(cls, ca_did: str, data: bytes) -> DidRegistry:
        reg = cls(ca_did)
        for line in data.decode().splitlines():
            d, r = line.split(" ")
            rec = DidRecord.decode(bytes.fromhex(r))
            if rec.did.encode().hex() != d:
                raise tlv.TlvError("snapshot key does not match record")
            reg._records[rec.did] = rec
        return reg

    def export(self) -> str:
        """Registry file: a ``#ca <did>`` header followed by the snapshot lines."""
        return f"#ca {self.ca_did}\n" + self.snapshot().decode()

    @classmethod
    def load(cls, text: str) -> DidRegistry:
        head, _, body = text.partition("\n")
        if not head.startswith("#ca "):
            raise tlv.TlvError("registry file must start with '#ca <did>'")
        return cls.from_snapshot(head[4:].strip(), body.encode())

    def replica(self) -> DidRegistry:
        """Independent copy, as held locally by each node."""
        reg = DidRegistry(self.ca_did)
        reg._records = dict(self._records)
        return reg
