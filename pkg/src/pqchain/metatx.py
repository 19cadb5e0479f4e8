"""EIP-155 transactions, Falcon-signed meta-transactions and the relay signer."""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field, replace

from . import rlp, tlv
from .crypto import falcon
from .crypto.falcon import FalconKeyPair
from .crypto.hashing import keccak256
from .crypto.secp256k1 import (
    EcdsaKeyPair,
    EcdsaSignature,
    RecoveryError,
    derive_address,
    ecdsa_recover,
    ecdsa_sign,
)
from .did import DidRegistry, NotFound, did_for_key, parse_did
from .errors import PqError

MTX_MAGIC = b"MTX1"
TX_FIELDS = ("nonce", "gasprice", "startgas", "to", "value", "data", "chain_id")


class MetaTxError(PqError):
    code = "MetaTxError"


class UnregisteredWriter(MetaTxError):
    code = "UnregisteredWriter"


class KeyMismatch(MetaTxError):
    code = "KeyMismatch"


class MalformedTx(MetaTxError):
    code = "Malformed"


@dataclass(frozen=True)
class Transaction:
    nonce: int
    gasprice: int
    startgas: int
    to: bytes
    value: int
    data: bytes
    chain_id: int

    def __post_init__(self):
        if len(self.to) not in (0, 20):
            raise ValueError("to must be a 20-byte address or empty")
        for name in ("nonce", "startgas", "chain_id"):
            if not 0 <= getattr(self, name) < 1 << 64:
                raise ValueError(f"{name} must fit in u64")
        for name in ("gasprice", "value"):
            if not 0 <= getattr(self, name) < 1 << 256:
                raise ValueError(f"{name} must fit in u256")

    def _head(self) -> list:
        return [self.nonce, self.gasprice, self.startgas, self.to, self.value, self.data]


def signing_stream(tx: Transaction) -> bytes:
    """RLP of the nine EIP-155 elements."""
    return rlp.encode(tx._head() + [tx.chain_id, 0, 0])


@dataclass(frozen=True)
class SignedTransaction:
    tx: Transaction
    v: int
    r: bytes
    s: bytes

    @property
    def recovery_id(self) -> int:
        return self.v - 35 - 2 * self.tx.chain_id

    def raw(self) -> bytes:
        return rlp.encode(self.tx._head() + [self.v, rlp.int_to_bytes(int.from_bytes(self.r, "big")),
                                             rlp.int_to_bytes(int.from_bytes(self.s, "big"))])

    def hash(self) -> bytes:
        return keccak256(self.raw())

    def signature(self) -> EcdsaSignature:
        return EcdsaSignature(int.from_bytes(self.r, "big"), int.from_bytes(self.s, "big"), self.recovery_id)

    def sender_public_key(self) -> bytes:
        return ecdsa_recover(keccak256(signing_stream(self.tx)), self.signature())

    @classmethod
    def from_raw(cls, raw: bytes) -> SignedTransaction:
        try:
            items = rlp.decode(raw)
            if not isinstance(items, list) or len(items) != 9 or any(isinstance(x, list) for x in items):
                raise MalformedTx("signed transaction must be a flat 9-item list")
            nonce, gp, gas, to, value, data, v, r, s = items
            v = rlp.bytes_to_int(v)
            if v < 35:
                raise MalformedTx("v predates EIP-155")
            chain_id = (v - 35) // 2
            tx = Transaction(rlp.bytes_to_int(nonce), rlp.bytes_to_int(gp), rlp.bytes_to_int(gas), to,
                             rlp.bytes_to_int(value), data, chain_id)
            return cls(tx, v, rlp.bytes_to_int(r).to_bytes(32, "big"), rlp.bytes_to_int(s).to_bytes(32, "big"))
        except (rlp.RlpError, ValueError, OverflowError) as exc:
            if isinstance(exc, MalformedTx):
                raise
            raise MalformedTx(str(exc)) from exc


def chain_id_from_v(v: int) -> int:
    return (v - 35) // 2


def sign_inner(tx: Transaction, eth_key: EcdsaKeyPair) -> SignedTransaction:
    sig = ecdsa_sign(keccak256(signing_stream(tx)), eth_key)
    return SignedTransaction(tx, tx.chain_id * 2 + 35 + sig.recovery_id, sig.r.to_bytes(32, "big"), sig.s.to_bytes(32, "big"))


def encode_payload(inner: SignedTransaction, writer_did: str, falcon_signature: bytes) -> bytes:
    return tlv.encode(MTX_MAGIC, 1, [inner.raw(), tlv.text(writer_did), bytes(falcon_signature)])


def decode_payload(data: bytes) -> tuple[SignedTransaction, str, bytes]:
    try:
        raw, did, sig = tlv.decode(data, MTX_MAGIC, 1, 3)
    except tlv.TlvError as exc:
        raise MalformedTx(str(exc)) from exc
    inner = SignedTransaction.from_raw(raw)
    if inner.raw() != raw:
        raise MalformedTx("inner transaction is not canonical")
    return inner, tlv.read_text(did), sig


@dataclass(frozen=True)
class MetaTransaction:
    relay_hub: bytes
    inner: SignedTransaction
    writer_did: str
    falcon_signature: bytes
    wrapper: SignedTransaction

    def encode(self) -> bytes:
        return self.wrapper.raw()

    def hash(self) -> bytes:
        return self.wrapper.hash()

    @classmethod
    def decode(cls, raw: bytes) -> MetaTransaction:
        wrapper = SignedTransaction.from_raw(raw)
        if wrapper.raw() != bytes(raw):
            raise MalformedTx("wrapper transaction is not canonical")
        inner, did, sig = decode_payload(wrapper.tx.data)
        return cls(wrapper.tx.to, inner, did, sig, wrapper)

    def __repr__(self) -> str:
        return f"MetaTransaction({self.hash().hex()[:12]}, writer={self.writer_did})"


def wrap(inner: SignedTransaction, writer_did: str, falcon_signature: bytes, relay_hub: bytes,
         writer_eth: EcdsaKeyPair, wrapper_nonce: int, gasprice: int = 0, startgas: int = 1_000_000) -> MetaTransaction:
    """Build and ECDSA-sign the wrapper call to the relay hub."""
    payload = encode_payload(inner, writer_did, falcon_signature)
    outer = Transaction(wrapper_nonce, gasprice, startgas, relay_hub, 0, payload, inner.tx.chain_id)
    return MetaTransaction(relay_hub, inner, writer_did, bytes(falcon_signature), sign_inner(outer, writer_eth))


def sign_outer(signed_tx: SignedTransaction, writer_did: str, falcon_key: FalconKeyPair, relay_hub: bytes,
               writer_eth: EcdsaKeyPair, wrapper_nonce: int = 0, registry: DidRegistry | None = None) -> MetaTransaction:
    parse_did(writer_did)
    if registry is not None:
        try:
            rec = registry.resolve(writer_did)
        except NotFound as exc:
            raise UnregisteredWriter(writer_did) from exc
        if rec.falcon_public_key != falcon_key.public or rec.eth_public_key != writer_eth.public:
            raise KeyMismatch("keys do not match the writer's DID record")
    elif did_for_key(writer_eth.public) != writer_did:
        raise KeyMismatch("writer ECDSA key does not control the DID")
    sig = falcon.falcon_sign(signing_stream(signed_tx.tx), falcon_key)
    return wrap(signed_tx, writer_did, sig.data, relay_hub, writer_eth, wrapper_nonce)


def retamper(mtx: MetaTransaction, writer_eth: EcdsaKeyPair, **changes) -> MetaTransaction:
    """Change inner-transaction fields after the Falcon signature was made and
    re-sign the inner and wrapper ECDSA signatures (the writer is the
    attacker). The Falcon signature is left untouched."""
    tx = replace(mtx.inner.tx, **changes)
    return wrap(sign_inner(tx, writer_eth), mtx.writer_did, mtx.falcon_signature, mtx.relay_hub,
                writer_eth, mtx.wrapper.tx.nonce)


# -- relay signer -------------------------------------------------------------

def _hex(b: bytes) -> str:
    return "0x" + bytes(b).hex()


def _unhex(s: str) -> bytes:
    if not isinstance(s, str):
        raise ValueError("expected a hex string")
    return bytes.fromhex(s.removeprefix("0x"))


def _num(x, default: int = 0) -> int:
    if x is None:
        return default
    if isinstance(x, int):
        return x
    return int(x, 16) if str(x).startswith("0x") else int(x)


@dataclass
class RelaySigner:
    """JSON-RPC 2.0 endpoint that wraps user transactions into meta-transactions.

    Methods:
      relay_send([tx])   tx is {"raw": hex signed EIP-155 tx} or an
                         eth_sendTransaction-shaped object signed here with
                         the writer's own key.
      relay_status([id]) -> {"id", "status"}
    """

    writer_did: str
    writer_eth: EcdsaKeyPair
    falcon_keys: FalconKeyPair
    relay_hub: bytes
    chain_id: int
    registry: DidRegistry | None = None
    outbox: list[MetaTransaction] = field(default_factory=list)
    status: dict[str, str] = field(default_factory=dict)
    _nonce: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def relay_send(self, tx_obj: dict) -> dict:
        if "raw" in tx_obj:
            inner = SignedTransaction.from_raw(_unhex(tx_obj["raw"]))
        else:
            with self._lock:
                user_nonce = _num(tx_obj.get("nonce"), self._nonce)
            tx = Transaction(
                nonce=user_nonce,
                gasprice=_num(tx_obj.get("gasPrice")),
                startgas=_num(tx_obj.get("gas"), 21000),
                to=_unhex(tx_obj.get("to", "0x")),
                value=_num(tx_obj.get("value")),
                data=_unhex(tx_obj.get("data", "0x")),
                chain_id=self.chain_id,
            )
            inner = sign_inner(tx, self.writer_eth)
        with self._lock:
            nonce = self._nonce
            self._nonce += 1
        mtx = sign_outer(inner, self.writer_did, self.falcon_keys, self.relay_hub, self.writer_eth, nonce, self.registry)
        txid = _hex(mtx.hash())
        self.outbox.append(mtx)
        self.status[txid] = "pending"
        return {"id": txid, "metatx": _hex(mtx.encode())}

    def relay_status(self, txid: str) -> dict:
        return {"id": txid, "status": self.status.get(txid, "unknown")}

    def handle_line(self, line: str) -> str:
        """One newline-delimited JSON-RPC request in, one response out."""
        req_id = None
        try:
            req = json.loads(line)
            req_id = req.get("id")
            if req.get("jsonrpc") != "2.0" or not isinstance(req.get("method"), str):
                return self._err(req_id, -32600, "Invalid Request")
            params = req.get("params") or []
            if req["method"] == "relay_send":
                result = self.relay_send(params[0])
            elif req["method"] == "relay_status":
                result = self.relay_status(params[0])
            else:
                return self._err(req_id, -32601, "Method not found")
            return json.dumps({"jsonrpc": "2.0", "id": req_id, "result": result})
        except json.JSONDecodeError:
            return self._err(None, -32700, "Parse error")
        except (PqError, ValueError, KeyError, IndexError, TypeError) as exc:
            code = getattr(exc, "code", "InvalidParams")
            return self._err(req_id, -32602, f"{code}: {exc}")

    @staticmethod
    def _err(req_id, code: int, msg: str) -> str:
        return json.dumps({"jsonrpc": "2.0", "id": req_id, "error": {"code": code, "message": msg}})

    def serve_unix(self, path: str) -> None:  # pragma: no cover - exercised via the CLI
        import socketserver

        signer = self

        class Handler(socketserver.StreamRequestHandler):
            def handle(self):
                for raw in self.rfile:
                    line = raw.decode().strip()
                    if line:
                        self.wfile.write((signer.handle_line(line) + "\n").encode())

        with socketserver.ThreadingUnixStreamServer(path, Handler) as srv:
            srv.serve_forever()


def wrapper_sender_address(mtx: MetaTransaction) -> bytes:
    try:
        return derive_address(mtx.wrapper.sender_public_key())
    except (RecoveryError, ValueError):
        return b""
