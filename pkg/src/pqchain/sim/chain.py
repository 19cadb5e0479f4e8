"""Blocks, the 2/3+1 finality rule, and the binary chain snapshot."""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace
from functools import cached_property

from .. import rlp
from ..crypto import falcon
from ..crypto.hashing import keccak256
from ..crypto.secp256k1 import (
    EcdsaKeyPair,
    EcdsaSignature,
    ecdsa_sign,
    ecdsa_verify_fast,
)
from ..errors import PqError

GENESIS_HASH = bytes(32)
SNAPSHOT_MAGIC = b"PQCH"
SNAPSHOT_VERSION = 1


class ChainError(PqError):
    code = "ChainError"


class InsufficientSignatures(ChainError):
    code = "InsufficientSignatures"


class InvalidTransactionInBlock(ChainError):
    code = "InvalidTransactionInBlock"


class BrokenLink(ChainError):
    code = "BrokenLink"


def threshold(v: int) -> int:
    """Signatures needed to finalize with v validators: floor(2v/3) + 1."""
    if v < 1:
        raise ValueError("threshold needs at least one validator")
    return 2 * v // 3 + 1


def tx_root(txs) -> bytes:
    return keccak256(rlp.encode([keccak256(t) for t in txs]))


@dataclass(frozen=True)
class Block:
    number: int
    nonce: int
    prev_hash: bytes
    tx_root: bytes
    proposer: str
    txs: tuple[bytes, ...] = ()
    signatures: tuple[tuple[str, bytes], ...] = ()
    pq_signatures: tuple[tuple[str, bytes], ...] = ()

    def header(self) -> bytes:
        return rlp.encode([self.number, self.nonce, self.prev_hash, self.tx_root, self.proposer.encode()])

    @cached_property
    def block_hash(self) -> bytes:
        return keccak256(self.header())

    def encode(self) -> bytes:
        return rlp.encode([
            self.number, self.nonce, self.prev_hash, self.tx_root, self.proposer.encode(),
            list(self.txs),
            [[d.encode(), s] for d, s in self.signatures],
            [[d.encode(), s] for d, s in self.pq_signatures],
        ])

    @classmethod
    def decode(cls, data: bytes) -> Block:
        try:
            items = rlp.decode(data)
            number, nonce, prev, root, proposer, txs, sigs, pq = items
            if len(prev) != 32 or len(root) != 32:
                raise ValueError("hash fields must be 32 bytes")
            if any(isinstance(t, list) for t in txs):
                raise ValueError("transactions must be byte strings")

            def pairs(xs):
                out = []
                for x in xs:
                    if not isinstance(x, list) or len(x) != 2 or any(isinstance(y, list) for y in x):
                        raise ValueError("signature entries are [did, sig]")
                    out.append((x[0].decode(), x[1]))
                return tuple(out)

            blk = cls(rlp.bytes_to_int(number), rlp.bytes_to_int(nonce), prev, root, proposer.decode(),
                      tuple(txs), pairs(sigs), pairs(pq))
        except (rlp.RlpError, ValueError, TypeError, AttributeError) as exc:
            raise ChainError(f"undecodable block: {exc}") from exc
        if blk.encode() != bytes(data):
            raise ChainError("block encoding is not canonical")
        return blk

    def with_signatures(self, sigs, pq_sigs=()) -> Block:
        return replace(self, signatures=tuple(sigs), pq_signatures=tuple(pq_sigs))

    def __repr__(self) -> str:
        return f"Block(#{self.number}, {self.block_hash.hex()[:12]}, txs={len(self.txs)}, sigs={len(self.signatures)})"


def build_block(number: int, prev_hash: bytes, proposer: str, txs, nonce: int = 0) -> Block:
    txs = tuple(bytes(t) for t in txs)
    return Block(number, nonce, prev_hash, tx_root(txs), proposer, txs)


def sign_block(block: Block, key: EcdsaKeyPair) -> bytes:
    return ecdsa_sign(block.block_hash, key).to_bytes()


def sign_block_pq(block: Block, key) -> bytes:
    return falcon.falcon_sign(b"block" + block.block_hash, key).data


def check_block_signatures(block: Block, validator_eth: dict[str, bytes], need: int,
                           validator_falcon: dict[str, bytes] | None = None) -> None:
    """Raise InsufficientSignatures unless ``need`` distinct validators signed.

    With ``validator_falcon`` given, the same threshold applies to Falcon
    block signatures as well.
    """
    good = set()
    for did, sig in block.signatures:
        pub = validator_eth.get(did)
        if pub is None or did in good or len(sig) != 65:
            continue
        try:
            parsed = EcdsaSignature.from_bytes(sig)
        except ValueError:
            continue
        if ecdsa_verify_fast(block.block_hash, parsed, pub):
            good.add(did)
    if len(good) < need:
        raise InsufficientSignatures(f"{len(good)} valid ECDSA signatures, {need} required")
    if validator_falcon is None:
        return
    good_pq = set()
    for did, sig in block.pq_signatures:
        pub = validator_falcon.get(did)
        if pub is None or did in good_pq:
            continue
        if falcon.falcon_verify(b"block" + block.block_hash, sig, pub):
            good_pq.add(did)
    if len(good_pq) < need:
        raise InsufficientSignatures(f"{len(good_pq)} valid Falcon block signatures, {need} required")


def verify_chain(blocks) -> int | None:
    """Index of the first block whose number, root or parent link is wrong."""
    prev = GENESIS_HASH
    for i, b in enumerate(blocks):
        if b.number != i + 1 or b.prev_hash != prev or b.tx_root != tx_root(b.txs):
            return i
        prev = b.block_hash
    return None


def encode_chain(blocks) -> bytes:
    out = bytearray(SNAPSHOT_MAGIC + bytes([SNAPSHOT_VERSION]) + struct.pack(">I", len(blocks)))
    for b in blocks:
        enc = b.encode()
        out += struct.pack(">I", len(enc)) + enc
    return bytes(out)


def decode_chain(data: bytes) -> list[Block]:
    if data[:4] != SNAPSHOT_MAGIC or len(data) < 9 or data[4] != SNAPSHOT_VERSION:
        raise ChainError("not a chain snapshot")
    (count,) = struct.unpack(">I", data[5:9])
    pos = 9
    blocks = []
    for _ in range(count):
        if pos + 4 > len(data):
            raise ChainError("truncated snapshot")
        (n,) = struct.unpack(">I", data[pos:pos + 4])
        pos += 4
        if pos + n > len(data):
            raise ChainError("truncated snapshot")
        blocks.append(Block.decode(data[pos:pos + n]))
        pos += n
    if pos != len(data):
        raise ChainError("trailing bytes after snapshot")
    return blocks
