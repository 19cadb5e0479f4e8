import json
from dataclasses import dataclass
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from pqchain.certs import (
    ECDSA_SECP256K1_OID,
    FALCON_OID,
    CertificateAuthority,
    SubjectInfo,
    build_csr,
    issue_legacy,
)
from pqchain.crypto import EcdsaKeyPair, falcon_keygen
from pqchain.did import DidRegistry, did_for_key
from pqchain.entropy import EntropySource
from pqchain.tunnel import Identity, TrustPolicy

VECTORS = Path(__file__).parent / "vectors"

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def vector_lines(name):
    """Non-comment, whitespace-split rows of a vector file."""
    rows = []
    for line in (VECTORS / name).read_text().splitlines():
        if line.strip() and not line.startswith("#"):
            rows.append(line.split())
    return rows


def vector_json(name):
    return json.loads((VECTORS / name).read_text())


@dataclass
class Member:
    name: str
    eth: EcdsaKeyPair
    falcon: object
    identity: Identity

    @property
    def did(self):
        return self.identity.cert.did


@dataclass
class Pki:
    ca: CertificateAuthority
    registry: DidRegistry
    root: EcdsaKeyPair
    policy: TrustPolicy
    source: EntropySource
    members: dict

    def subject(self, name, eth):
        return SubjectInfo(name, "Org", "CR", did_for_key(eth.public))

    def enroll(self, name, now=1):
        eth = EcdsaKeyPair.from_entropy(self.source.random_bytes(32))
        fal = falcon_keygen(self.source.random_bytes(48))
        subj = self.subject(name, eth)
        legacy = issue_legacy("Root", self.root, subj, eth.public, 0, 10 ** 6)
        issued = self.ca.issue_certificate(legacy, build_csr(subj, eth, ECDSA_SECP256K1_OID),
                                           build_csr(subj, fal, FALCON_OID), now)
        m = Member(name, eth, fal, Identity(issued.certificate, fal))
        self.members[name] = m
        return m


@pytest.fixture(scope="session")
def pki():
    src = EntropySource(b"test-pki")
    ca_eth = EcdsaKeyPair.from_entropy(src.random_bytes(32))
    registry = DidRegistry(did_for_key(ca_eth.public))
    root = EcdsaKeyPair.from_secret(7)
    ca = CertificateAuthority(registry.ca_did, falcon_keygen(src.random_bytes(48)), {"Root": root.public},
                              registry, src)
    p = Pki(ca, registry, root, TrustPolicy(ca.falcon_public), src, {})
    for name in ("writer", "alice", "bob"):
        p.enroll(name)
    return p


@pytest.fixture(scope="session")
def hub():
    return bytes.fromhex("00000000000000000000000000000000000a11ce")


# -- acceptance report --------------------------------------------------------------

ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
