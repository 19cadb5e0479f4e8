"""Certificate authority issuance and the DID registry."""

import pytest
from hypothesis import given
from hypothesis import strategies as st

from pqchain import tlv
from pqchain.certs import (
    ECDSA_SECP256K1_OID,
    FALCON_OID,
    AlgorithmMismatch,
    CertSigningRequest,
    CsrInvalid,
    LegacyCertificate,
    LegacyInvalid,
    PqCertificate,
    SubjectInfo,
    SubjectMismatch,
    build_csr,
    issue_legacy,
    validate_legacy,
    verify_certificate,
    verify_csr,
)
from pqchain.crypto import EcdsaKeyPair, keccak256
from pqchain.did import (
    DidRecord,
    DidRegistry,
    DuplicateDid,
    MalformedDid,
    NotFound,
    Unauthorized,
    did_for_key,
    did_from_address,
    is_did,
    parse_did,
)


def test_issued_certificate_verifies(pki):
    w = pki.members["writer"]
    cert = w.identity.cert
    assert verify_certificate(cert, pki.ca.falcon_public, 5)
    assert not verify_certificate(cert, pki.ca.falcon_public, cert.not_after)
    assert not verify_certificate(cert, pki.members["alice"].falcon.public, 5)
    assert cert.falcon_algorithm_oid == FALCON_OID
    rec = pki.registry.resolve(w.did)
    assert rec.eth_public_key == w.eth.public and rec.falcon_public_key == w.falcon.public
    assert rec.controller == w.did
    assert pki.registry.controls(w.eth.public, w.did)


def test_certificate_codecs_roundtrip(pki):
    cert = pki.members["alice"].identity.cert
    assert PqCertificate.decode(cert.encode()) == cert
    assert PqCertificate.dearmor(cert.armor()) == cert
    assert cert.armor().startswith("-----BEGIN PQ CERTIFICATE-----")


def test_certificate_field_tamper_detected(pki):
    cert = pki.members["alice"].identity.cert
    from dataclasses import replace
    for changes in ({"not_after": cert.not_after + 1}, {"eth_public_key": pki.members["bob"].eth.public},
                    {"subject": replace(cert.subject, common_name="mallory")}):
        assert not verify_certificate(replace(cert, **changes), pki.ca.falcon_public, 5)


def _request(pki, name="carol", subject=None):
    eth = EcdsaKeyPair.from_entropy(pki.source.random_bytes(32))
    fal = pki.members["bob"].falcon  # reuse an existing Falcon key; only the ETH key keys the DID
    subj = subject or pki.subject(name, eth)
    legacy = issue_legacy("Root", pki.root, subj, eth.public, 0, 1000)
    return eth, fal, subj, legacy


def _flip_byte(b, i):
    out = bytearray(b)
    out[i] ^= 0x40
    return bytes(out)


def _state(pki):
    return pki.registry.state_hash(), len(pki.ca.issued)


@pytest.mark.parametrize("checkpoint", ["legacy", "subject", "csr", "sign"])
def test_issuance_is_atomic_under_faults(pki, checkpoint):
    eth, fal, subj, legacy = _request(pki)
    before = _state(pki)

    def hook(name):
        if name == checkpoint:
            raise RuntimeError(f"fault at {name}")
    pki.ca.fault_hook = hook
    try:
        with pytest.raises(RuntimeError):
            pki.ca.issue_certificate(legacy, build_csr(subj, eth, ECDSA_SECP256K1_OID),
                                     build_csr(subj, fal, FALCON_OID), 1)
    finally:
        pki.ca.fault_hook = None
    assert _state(pki) == before
    assert subj.did not in pki.registry


def test_issuance_rejections_leave_no_trace(pki):
    eth, fal, subj, legacy = _request(pki)
    csr_e = build_csr(subj, eth, ECDSA_SECP256K1_OID)
    csr_f = build_csr(subj, fal, FALCON_OID)
    before = _state(pki)
    other = SubjectInfo("dave", "Org", "CR", subj.did)
    cases = [
        (LegacyInvalid, (legacy, csr_e, csr_f, 5000)),                                   # expired legacy
        (LegacyInvalid, (issue_legacy("Other", pki.root, subj, eth.public, 0, 99), csr_e, csr_f, 1)),
        (SubjectMismatch, (legacy, build_csr(other, eth, ECDSA_SECP256K1_OID), csr_f, 1)),
        (CsrInvalid, (legacy, csr_f, csr_e, 1)),                                         # swapped OIDs
        (CsrInvalid, (legacy, CertSigningRequest(subj, ECDSA_SECP256K1_OID, eth.public, bytes(65)), csr_f, 1)),
    ]
    forged = LegacyCertificate(subj, "Root", 0, 1000, eth.public, _flip_byte(legacy.issuer_signature, 5))
    cases.append((LegacyInvalid, (forged, csr_e, csr_f, 1)))
    for err, args in cases:
        with pytest.raises(err):
            pki.ca.issue_certificate(*args)
        assert _state(pki) == before
    # the DID must be derived from the ETH key in the CSR
    stranger = EcdsaKeyPair.from_secret(99)
    bad_subj = SubjectInfo("carol", "Org", "CR", did_for_key(stranger.public))
    with pytest.raises(SubjectMismatch):
        pki.ca.issue_certificate(issue_legacy("Root", pki.root, bad_subj, eth.public, 0, 1000),
                                 build_csr(bad_subj, eth, ECDSA_SECP256K1_OID), build_csr(bad_subj, fal, FALCON_OID), 1)
    assert _state(pki) == before


def test_csr_algorithm_checks(pki):
    w = pki.members["writer"]
    subj = w.identity.cert.subject
    with pytest.raises(AlgorithmMismatch):
        build_csr(subj, w.eth, FALCON_OID)
    with pytest.raises(AlgorithmMismatch):
        build_csr(subj, w.falcon, ECDSA_SECP256K1_OID)
    with pytest.raises(AlgorithmMismatch):
        build_csr(subj, w.eth, "1.2.3")
    csr = build_csr(subj, w.falcon, FALCON_OID)
    assert verify_csr(csr)
    assert CertSigningRequest.dearmor(csr.armor()) == csr


def test_legacy_roundtrip_and_validation(pki):
    w = pki.members["writer"]
    leg = issue_legacy("Root", pki.root, w.identity.cert.subject, w.eth.public, 10, 20)
    assert LegacyCertificate.dearmor(leg.armor()) == leg
    roots = {"Root": pki.root.public}
    assert validate_legacy(leg, roots, 10)
    assert not validate_legacy(leg, roots, 20)
    assert not validate_legacy(leg, {}, 15)


# -- DID registry ----------------------------------------------------------------

def test_did_syntax():
    addr = bytes(range(20))
    d = did_from_address(addr)
    assert d == "did:lac:" + addr.hex()
    assert parse_did(d) == ("lac", addr.hex())
    for bad in ("did:lac:xyz", "did:LAC:" + addr.hex(), "lac:" + addr.hex(), d + "0"):
        assert not is_did(bad)
        with pytest.raises(MalformedDid):
            parse_did(bad)


def _record(i, falcon=b"\x09" * 897):
    key = EcdsaKeyPair.from_secret(1000 + i)
    d = did_for_key(key.public)
    return key, DidRecord(d, key.public, falcon, keccak256(bytes([i])), d, i)


CA = did_from_address(b"\xca" * 20)


ops = st.lists(st.tuples(st.sampled_from(["ca", "other"]), st.integers(0, 5), st.booleans()), max_size=25)


@given(ops)
def test_registry_invariants(operations):
    reg = DidRegistry(CA)
    model = {}
    for caller, i, variant in operations:
        _, rec = _record(i, falcon=bytes([variant]) * 897)
        who = CA if caller == "ca" else did_from_address(b"\x01" * 20)
        if who != CA:
            with pytest.raises(Unauthorized):
                reg.register(who, rec)
        elif rec.did in model and model[rec.did] != rec:
            with pytest.raises(DuplicateDid):
                reg.register(who, rec)
        else:
            receipt = reg.register(who, rec)
            assert receipt.created == (rec.did not in model)
            assert receipt.record_hash == keccak256(rec.encode())
            model[rec.did] = rec
    # registry content equals the model; first write wins and never changes
    assert {d: reg.resolve(d) for d in reg.dids()} == model
    assert DidRegistry.from_snapshot(CA, reg.snapshot()).state_hash() == reg.state_hash()
    assert DidRegistry.load(reg.export()).snapshot() == reg.snapshot()
    assert reg.replica().state_hash() == reg.state_hash()
    for d, rec in model.items():
        assert reg.controls(rec.eth_public_key, d)


def test_controls_reasons():
    reg = DidRegistry(CA)
    key, rec = _record(1)
    other, _ = _record(2)
    assert reg.controls(key.public, rec.did).reason == "NotFound"
    reg.register(CA, rec)
    assert reg.controls(other.public, rec.did).reason == "AddressMismatch"
    assert reg.controls(key.public, "not-a-did").reason == "MalformedDid"
    with pytest.raises(NotFound):
        reg.resolve(did_from_address(bytes(20)))


def test_replica_is_independent():
    reg = DidRegistry(CA)
    rep = reg.replica()
    reg.register(CA, _record(3)[1])
    assert len(rep) == 0 and len(reg) == 1


def test_record_codec_rejects_garbage():
    _, rec = _record(4)
    assert DidRecord.decode(rec.encode()) == rec
    with pytest.raises(tlv.TlvError):
        DidRecord.decode(rec.encode()[:-1])
    with pytest.raises(ValueError):
        DidRecord(rec.did, rec.eth_public_key, b"short", rec.subject_proof, rec.controller, 0)
