"""JSON key files and atomic artifact writes for the operator tools.

Key files hold secrets in hex; they are meant for local test networks.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

from .certs import CertificateAuthority
from .crypto.falcon import FalconKeyPair, falcon_keygen
from .crypto.secp256k1 import EcdsaKeyPair
from .did import DidRegistry, did_for_key
from .entropy import EntropySession, request_entropy
from .errors import PqError

NODE_KIND = "pqchain-node-keys"
ROOT_KIND = "pqchain-legacy-root"
CA_KIND = "pqchain-ca"


class KeyFileError(PqError):
    code = "KeyFileError"


def write_atomic(path, data: bytes | str) -> None:
    """Write via a temp file in the target directory, then rename over."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode()
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _load(text: str, kind: str) -> dict:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise KeyFileError(f"not JSON: {exc}") from exc
    if not isinstance(obj, dict) or obj.get("kind") != kind:
        raise KeyFileError(f"expected a {kind} file")
    return obj


def _hex(obj: dict, key: str) -> bytes:
    try:
        return bytes.fromhex(obj[key])
    except (KeyError, TypeError, ValueError) as exc:
        raise KeyFileError(f"missing or bad field {key!r}") from exc


def _eth(obj: dict) -> EcdsaKeyPair:
    try:
        return EcdsaKeyPair.from_secret(_hex(obj, "eth_secret"))
    except ValueError as exc:
        raise KeyFileError(str(exc)) from exc


def _falcon(obj: dict) -> FalconKeyPair:
    try:
        return FalconKeyPair(_hex(obj, "falcon_secret"), _hex(obj, "falcon_public"))
    except ValueError as exc:
        raise KeyFileError(str(exc)) from exc


@dataclass(frozen=True)
class NodeKeys:
    """A node's ECDSA and Falcon-512 key pairs."""

    eth: EcdsaKeyPair
    falcon: FalconKeyPair

    @property
    def did(self) -> str:
        return did_for_key(self.eth.public)

    @classmethod
    def from_session(cls, session: EntropySession, now: int = 0) -> NodeKeys:
        eth = EcdsaKeyPair.from_entropy(request_entropy(session, 32, now))
        return cls(eth, falcon_keygen(request_entropy(session, 48, now)))

    def to_json(self) -> str:
        return json.dumps({
            "kind": NODE_KIND, "did": self.did, "eth_secret": self.eth.secret.hex(),
            "eth_public": self.eth.public.hex(), "falcon_secret": self.falcon.secret.hex(),
            "falcon_public": self.falcon.public.hex(),
        }, indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> NodeKeys:
        obj = _load(text, NODE_KIND)
        return cls(_eth(obj), _falcon(obj))


@dataclass(frozen=True)
class LegacyRoot:
    name: str
    eth: EcdsaKeyPair

    def to_json(self) -> str:
        return json.dumps({"kind": ROOT_KIND, "name": self.name, "eth_secret": self.eth.secret.hex(),
                           "eth_public": self.eth.public.hex()}, indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> LegacyRoot:
        obj = _load(text, ROOT_KIND)
        return cls(str(obj.get("name", "")), _eth(obj))


@dataclass(frozen=True)
class CaKeys:
    """Everything needed to rebuild a CertificateAuthority from disk."""

    eth: EcdsaKeyPair
    falcon: FalconKeyPair
    trusted_roots: dict
    validity: int = 10 ** 9

    @property
    def did(self) -> str:
        return did_for_key(self.eth.public)

    def authority(self, registry: DidRegistry, source) -> CertificateAuthority:
        if registry.ca_did != self.did:
            raise KeyFileError("registry belongs to a different CA")
        return CertificateAuthority(self.did, self.falcon, dict(self.trusted_roots), registry, source, self.validity)

    def to_json(self) -> str:
        return json.dumps({
            "kind": CA_KIND, "did": self.did, "eth_secret": self.eth.secret.hex(),
            "falcon_secret": self.falcon.secret.hex(), "falcon_public": self.falcon.public.hex(),
            "trusted_roots": {k: v.hex() for k, v in sorted(self.trusted_roots.items())},
            "validity": self.validity,
        }, indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> CaKeys:
        obj = _load(text, CA_KIND)
        roots = obj.get("trusted_roots", {})
        if not isinstance(roots, dict):
            raise KeyFileError("trusted_roots must be an object")
        try:
            parsed = {str(k): bytes.fromhex(v) for k, v in roots.items()}
        except (TypeError, ValueError) as exc:
            raise KeyFileError("bad trusted root key") from exc
        return cls(_eth(obj), _falcon(obj), parsed, int(obj.get("validity", 10 ** 9)))
