"""Dual-key post-quantum certificates and the CA issuance flow.

A PqCertificate binds one subject DID to an ECDSA (secp256k1) key and a
Falcon-512 key. The CA signs certificates with its own Falcon key only.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import tlv
from .crypto import falcon
from .crypto.falcon import FalconKeyPair, Outcome
from .crypto.hashing import keccak256
from .crypto.secp256k1 import EcdsaKeyPair, EcdsaSignature, ecdsa_sign, ecdsa_verify
from .did import DidRecord, DidRegistry, did_for_key, parse_did
from .errors import PqError

FALCON_OID = "1.3.9999.3.1"
ECDSA_SECP256K1_OID = "1.3.132.0.10"

CERT_MAGIC = b"PQX1"
CSR_MAGIC = b"PQR1"
LEGACY_MAGIC = b"LGX1"
LEGACY_ARMOR = "LEGACY CERTIFICATE"
CERT_ARMOR = "PQ CERTIFICATE"
CSR_ARMOR = "PQ CERTIFICATE REQUEST"


class CertError(PqError):
    code = "CertError"


class AlgorithmMismatch(CertError):
    code = "AlgorithmMismatch"


class LegacyInvalid(CertError):
    code = "LegacyInvalid"


class SubjectMismatch(CertError):
    code = "SubjectMismatch"


class CsrInvalid(CertError):
    code = "CsrInvalid"


@dataclass(frozen=True)
class Verdict:
    ok: bool
    reason: str = "ok"

    def __bool__(self) -> bool:
        return self.ok


@dataclass(frozen=True)
class SubjectInfo:
    common_name: str
    organization: str
    country: str
    did: str

    def __post_init__(self):
        if not self.common_name:
            raise ValueError("common_name must be non-empty")
        parse_did(self.did)

    def encode(self) -> bytes:
        return tlv.encode(b"SUBJ", 1, [tlv.text(x) for x in (self.common_name, self.organization, self.country, self.did)])

    @classmethod
    def decode(cls, data: bytes) -> SubjectInfo:
        parts = [tlv.read_text(x) for x in tlv.decode(data, b"SUBJ", 1, 4)]
        try:
            return cls(*parts)
        except (ValueError, PqError) as exc:
            raise tlv.TlvError(str(exc)) from exc


# -- CSR --------------------------------------------------------------------

@dataclass(frozen=True)
class CertSigningRequest:
    subject: SubjectInfo
    algorithm_oid: str
    public_key: bytes
    self_signature: bytes

    def tbs(self) -> bytes:
        return tlv.encode(CSR_MAGIC, 0, [self.subject.encode(), tlv.text(self.algorithm_oid), self.public_key])

    def encode(self) -> bytes:
        return tlv.encode(CSR_MAGIC, 1, [self.subject.encode(), tlv.text(self.algorithm_oid), self.public_key, self.self_signature])

    @classmethod
    def decode(cls, data: bytes) -> CertSigningRequest:
        subj, oid, pk, sig = tlv.decode(data, CSR_MAGIC, 1, 4)
        return cls(SubjectInfo.decode(subj), tlv.read_text(oid), pk, sig)

    def armor(self) -> str:
        return tlv.armor(self.encode(), CSR_ARMOR)

    @classmethod
    def dearmor(cls, text: str) -> CertSigningRequest:
        return cls.decode(tlv.dearmor(text, CSR_ARMOR))


def _sign_with(key, data: bytes) -> bytes:
    if isinstance(key, FalconKeyPair):
        return falcon.falcon_sign(data, key).data
    return ecdsa_sign(keccak256(data), key).to_bytes()


def _verify_with(oid: str, public: bytes, data: bytes, sig: bytes) -> Verdict:
    if oid == FALCON_OID:
        res = falcon.falcon_verify(data, sig, public)
        return Verdict(res is Outcome.OK, "ok" if res is Outcome.OK else res.value)
    if oid == ECDSA_SECP256K1_OID:
        if len(public) != 64 or len(sig) != 65:
            return Verdict(False, "malformed")
        try:
            parsed = EcdsaSignature.from_bytes(sig)
        except ValueError:
            return Verdict(False, "malformed")
        ok = ecdsa_verify(keccak256(data), parsed, public)
        return Verdict(ok, "ok" if ok else "invalid")
    return Verdict(False, "malformed")


def build_csr(subject: SubjectInfo, key_material, algorithm_oid: str) -> CertSigningRequest:
    if algorithm_oid == FALCON_OID and not isinstance(key_material, FalconKeyPair):
        raise AlgorithmMismatch("Falcon OID requires a Falcon-512 key")
    if algorithm_oid == ECDSA_SECP256K1_OID and not isinstance(key_material, EcdsaKeyPair):
        raise AlgorithmMismatch("ECDSA OID requires a secp256k1 key")
    if algorithm_oid not in (FALCON_OID, ECDSA_SECP256K1_OID):
        raise AlgorithmMismatch(f"unsupported algorithm {algorithm_oid}")
    unsigned = CertSigningRequest(subject, algorithm_oid, key_material.public, b"")
    return CertSigningRequest(subject, algorithm_oid, key_material.public, _sign_with(key_material, unsigned.tbs()))


def verify_csr(csr: CertSigningRequest) -> Verdict:
    return _verify_with(csr.algorithm_oid, csr.public_key, csr.tbs(), csr.self_signature)


# -- legacy X.509 stand-in --------------------------------------------------

@dataclass(frozen=True)
class LegacyCertificate:
    subject: SubjectInfo
    issuer: str
    not_before: int
    not_after: int
    public_key: bytes
    issuer_signature: bytes = b""

    def tbs(self) -> bytes:
        return tlv.encode(LEGACY_MAGIC, 0, [
            self.subject.encode(), tlv.text(self.issuer), tlv.u64(self.not_before),
            tlv.u64(self.not_after), self.public_key,
        ])

    def encode(self) -> bytes:
        return tlv.encode(LEGACY_MAGIC, 1, [
            self.subject.encode(), tlv.text(self.issuer), tlv.u64(self.not_before),
            tlv.u64(self.not_after), self.public_key, self.issuer_signature,
        ])

    @classmethod
    def decode(cls, data: bytes) -> LegacyCertificate:
        subj, issuer, nb, na, pk, sig = tlv.decode(data, LEGACY_MAGIC, 1, 6)
        return cls(SubjectInfo.decode(subj), tlv.read_text(issuer), tlv.read_u64(nb), tlv.read_u64(na), pk, sig)

    def armor(self) -> str:
        return tlv.armor(self.encode(), LEGACY_ARMOR)

    @classmethod
    def dearmor(cls, text: str) -> LegacyCertificate:
        return cls.decode(tlv.dearmor(text, LEGACY_ARMOR))


def issue_legacy(root_name: str, root_key: EcdsaKeyPair, subject: SubjectInfo, public_key: bytes,
                 not_before: int, not_after: int) -> LegacyCertificate:
    cert = LegacyCertificate(subject, root_name, not_before, not_after, public_key)
    return LegacyCertificate(subject, root_name, not_before, not_after, public_key, _sign_with(root_key, cert.tbs()))


def validate_legacy(cert: LegacyCertificate, trusted_roots: dict[str, bytes], now: int) -> Verdict:
    """Stub chain check: issuer must be a configured root that signed the cert."""
    root = trusted_roots.get(cert.issuer)
    if root is None:
        return Verdict(False, "untrusted issuer")
    if not cert.not_before <= now < cert.not_after:
        return Verdict(False, "outside validity window")
    v = _verify_with(ECDSA_SECP256K1_OID, root, cert.tbs(), cert.issuer_signature)
    return v if not v else Verdict(True)


# -- post-quantum certificate -----------------------------------------------

@dataclass(frozen=True)
class PqCertificate:
    serial: bytes
    subject: SubjectInfo
    eth_public_key: bytes
    falcon_public_key: bytes
    falcon_algorithm_oid: str
    not_before: int
    not_after: int
    issuer_did: str
    ca_falcon_signature: bytes = b""

    def __post_init__(self):
        if len(self.serial) != 16:
            raise ValueError("serial must be 16 bytes")
        if len(self.eth_public_key) != 64:
            raise ValueError("eth public key must be 64 bytes")
        if len(self.falcon_public_key) != 897:
            raise ValueError("falcon public key must be 897 bytes")

    def _fields(self) -> list[bytes]:
        return [
            self.serial, self.subject.encode(), self.eth_public_key, self.falcon_public_key,
            tlv.text(self.falcon_algorithm_oid), tlv.u64(self.not_before), tlv.u64(self.not_after),
            tlv.text(self.issuer_did),
        ]

    def tbs(self) -> bytes:
        return tlv.encode(CERT_MAGIC, 0, self._fields())

    def encode(self) -> bytes:
        return tlv.encode(CERT_MAGIC, 1, self._fields() + [self.ca_falcon_signature])

    @classmethod
    def decode(cls, data: bytes) -> PqCertificate:
        f = tlv.decode(data, CERT_MAGIC, 1, 9)
        try:
            return cls(f[0], SubjectInfo.decode(f[1]), f[2], f[3], tlv.read_text(f[4]),
                       tlv.read_u64(f[5]), tlv.read_u64(f[6]), tlv.read_text(f[7]), f[8])
        except ValueError as exc:
            raise tlv.TlvError(str(exc)) from exc

    def armor(self) -> str:
        return tlv.armor(self.encode(), CERT_ARMOR)

    @classmethod
    def dearmor(cls, text: str) -> PqCertificate:
        return cls.decode(tlv.dearmor(text, CERT_ARMOR))

    @property
    def did(self) -> str:
        return self.subject.did

    def __repr__(self) -> str:
        return f"PqCertificate(serial={self.serial.hex()}, did={self.subject.did})"


encode_certificate = PqCertificate.encode
decode_certificate = PqCertificate.decode


def verify_certificate(cert: PqCertificate, ca_falcon_public: bytes, now: int) -> Verdict:
    if cert.falcon_algorithm_oid != FALCON_OID:
        return Verdict(False, "wrong algorithm OID")
    if not cert.not_before <= now < cert.not_after:
        return Verdict(False, "outside validity window")
    res = falcon.falcon_verify(cert.tbs(), cert.ca_falcon_signature, ca_falcon_public)
    if res is not Outcome.OK:
        return Verdict(False, f"signature {res.value}")
    return Verdict(True)


@dataclass(frozen=True)
class Issued:
    certificate: PqCertificate
    record: DidRecord
    salt: bytes


@dataclass
class CertificateAuthority:
    """CA state: Falcon signing key, trusted legacy roots, registry handle."""

    did: str
    falcon_keys: FalconKeyPair
    trusted_roots: dict[str, bytes]
    registry: DidRegistry
    source: object  # anything with random_bytes(n)
    validity: int = 10 ** 9
    fault_hook: object = None
    issued: list[bytes] = field(default_factory=list)

    @property
    def falcon_public(self) -> bytes:
        return self.falcon_keys.public

    def _checkpoint(self, name: str) -> None:
        if self.fault_hook is not None:
            self.fault_hook(name)

    def issue_certificate(self, legacy: LegacyCertificate, csr_eth: CertSigningRequest,
                          csr_falcon: CertSigningRequest, now: int) -> Issued:
        # (i) legacy certificate
        v = validate_legacy(legacy, self.trusted_roots, now)
        if not v:
            raise LegacyInvalid(v.reason)
        self._checkpoint("legacy")
        # (ii) subjects agree
        if not (legacy.subject == csr_eth.subject == csr_falcon.subject):
            raise SubjectMismatch("legacy certificate and CSR subjects differ")
        if csr_eth.algorithm_oid != ECDSA_SECP256K1_OID or csr_falcon.algorithm_oid != FALCON_OID:
            raise CsrInvalid("expected one ECDSA and one Falcon-512 CSR")
        if csr_eth.subject.did != did_for_key(csr_eth.public_key):
            raise SubjectMismatch("subject DID is not derived from the ETH key")
        self._checkpoint("subject")
        # (iii) CSR self-signatures
        for csr in (csr_eth, csr_falcon):
            v = verify_csr(csr)
            if not v:
                raise CsrInvalid(f"{csr.algorithm_oid} CSR signature {v.reason}")
        self._checkpoint("csr")
        serial = self.source.random_bytes(16)
        salt = self.source.random_bytes(32)
        unsigned = PqCertificate(serial, csr_eth.subject, csr_eth.public_key, csr_falcon.public_key,
                                 FALCON_OID, now, now + self.validity, self.did)
        sig = falcon.falcon_sign(unsigned.tbs(), self.falcon_keys).data
        cert = PqCertificate(serial, csr_eth.subject, csr_eth.public_key, csr_falcon.public_key,
                             FALCON_OID, now, now + self.validity, self.did, sig)
        record = DidRecord(
            did=csr_eth.subject.did,
            eth_public_key=csr_eth.public_key,
            falcon_public_key=csr_falcon.public_key,
            subject_proof=keccak256(csr_eth.subject.encode() + salt),
            controller=csr_eth.subject.did,
            registered_at=now,
        )
        self._checkpoint("sign")
        # the registry write is the single mutation and comes last
        self.registry.register(self.did, record)
        self.issued.append(serial)
        return Issued(cert, record, salt)
