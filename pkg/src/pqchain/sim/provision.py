"""One-time network setup: CA, entropy bootstrap, certificates, DIDs, tunnels.

Provisioning is by far the slowest part of a run (Falcon key generation and
a handshake per node pair), and it depends only on the provisioning seed and
the role counts. It is cached so that seed sweeps can reuse identities and
established tunnels while varying traffic and adversary behaviour.
"""

from __future__ import annotations

import copy
import enum
from dataclasses import dataclass, field
from functools import lru_cache

from ..certs import (
    ECDSA_SECP256K1_OID,
    FALCON_OID,
    CertificateAuthority,
    SubjectInfo,
    build_csr,
    issue_legacy,
)
from ..crypto.falcon import FalconKeyPair, falcon_keygen
from ..crypto.hashing import ShakeStream, keccak256
from ..crypto.secp256k1 import EcdsaKeyPair
from ..did import DidRegistry, did_for_key
from ..entropy import EntropyService, EntropySource, open_session, request_entropy
from ..tunnel import Identity, TrustPolicy, TunnelSession, handshake
from ..wire import WireLog

LEGACY_ROOT = "Legacy Root CA"
LEGACY_VALIDITY = (0, 1 << 40)


class Role(enum.Enum):
    WRITER = "Writer"
    VALIDATOR = "Validator"
    OBSERVER = "Observer"


@dataclass(frozen=True)
class NodeProvision:
    node_id: str
    role: Role
    eth: EcdsaKeyPair
    falcon_keys: FalconKeyPair
    identity: Identity
    drbg_seed: bytes

    @property
    def did(self) -> str:
        return self.identity.cert.did


@dataclass
class Provision:
    seed: int
    ca: CertificateAuthority
    registry_snapshot: bytes
    nodes: list[NodeProvision]
    sessions: dict[tuple[str, str], tuple[TunnelSession, TunnelSession]]
    relay_hub: bytes
    adversary_falcon: FalconKeyPair
    wire: WireLog = field(repr=False, default_factory=WireLog)
    handshakes: int = 0
    secrets: list[bytes] = field(repr=False, default_factory=list)

    @property
    def policy(self) -> TrustPolicy:
        return TrustPolicy(self.ca.falcon_public)

    def registry(self) -> DidRegistry:
        return DidRegistry.from_snapshot(self.ca.did, self.registry_snapshot)

    def fresh_sessions(self) -> dict[tuple[str, str], tuple[TunnelSession, TunnelSession]]:
        return {k: (copy.copy(a), copy.copy(b)) for k, (a, b) in self.sessions.items()}


def node_ids(writers: int, validators: int, observers: int) -> list[tuple[str, Role]]:
    return ([(f"writer-{i}", Role.WRITER) for i in range(writers)]
            + [(f"validator-{i}", Role.VALIDATOR) for i in range(validators)]
            + [(f"observer-{i}", Role.OBSERVER) for i in range(observers)])


@lru_cache(maxsize=4)
def provision(seed: int, writers: int, validators: int, observers: int) -> Provision:
    master = ShakeStream(b"pqchain provision" + seed.to_bytes(8, "big"))
    service = EntropyService(EntropySource(seed=master.squeeze(32), source_id="qrng-sim"))
    wire = WireLog()

    ca_eth = EcdsaKeyPair.from_entropy(master.squeeze(32))
    ca_did = did_for_key(ca_eth.public)
    registry = DidRegistry(ca_did)
    root = EcdsaKeyPair.from_entropy(master.squeeze(32))
    ca = CertificateAuthority(ca_did, falcon_keygen(master.squeeze(48)), {LEGACY_ROOT: root.public},
                              registry, service.source)
    now = 1
    nodes = []
    secrets = []
    for nid, role in node_ids(writers, validators, observers):
        session = open_session(service, nid, now, master.squeeze(32), wire)
        eth_seed = request_entropy(session, 32, now)
        falcon_seed = request_entropy(session, 48, now)
        drbg = request_entropy(session, 32, now)
        secrets += [eth_seed, falcon_seed, drbg, bytes(session.shared_secret)]
        eth = EcdsaKeyPair.from_entropy(eth_seed)
        fk = falcon_keygen(falcon_seed)
        subject = SubjectInfo(nid, "pqchain-sim", "XX", did_for_key(eth.public))
        legacy = issue_legacy(LEGACY_ROOT, root, subject, eth.public, *LEGACY_VALIDITY)
        issued = ca.issue_certificate(legacy, build_csr(subject, eth, ECDSA_SECP256K1_OID),
                                      build_csr(subject, fk, FALCON_OID), now)
        nodes.append(NodeProvision(nid, role, eth, fk, Identity(issued.certificate, fk), drbg))

    policy = TrustPolicy(ca.falcon_public)
    sessions = {}
    for i, a in enumerate(nodes):
        for b in nodes[i + 1:]:
            entropy = ShakeStream(b"handshake" + a.drbg_seed + b.node_id.encode()).squeeze(32)
            s_a, s_b = handshake(a.identity, b.identity, policy, policy, entropy, now=now,
                                 wire=wire, channel=f"{a.node_id}<->{b.node_id}")
            sessions[(a.node_id, b.node_id)] = (s_a, s_b)
            secrets += [s_a.send_key, s_a.recv_key]

    relay_hub = keccak256(b"relay-hub" + ca_did.encode())[12:]
    adversary = falcon_keygen(master.squeeze(48))
    return Provision(seed, ca, registry.snapshot(), nodes, sessions, relay_hub, adversary, wire,
                     len(sessions), secrets)
