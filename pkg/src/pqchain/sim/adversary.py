"""Adversary scenarios.

Each adversary gets a seeded stream of choices and exactly the capabilities
its scenario names; nothing else from the honest nodes' state is read except
what is public (certificates, DIDs, the wire, the RPC ingress).
"""

from __future__ import annotations

from ..crypto import aead
from ..crypto.falcon import falcon_sign
from ..crypto.hashing import ShakeStream
from ..errors import PqError
from ..metatx import TX_FIELDS, Transaction, retamper, sign_inner, signing_stream, wrap
from ..tunnel import Identity, TunnelRecord, handshake
from ..wire import FrameError, FrameType, encode_frame
from .chain import build_block, sign_block
from .config import FORGE_VARIANTS, ConfigError


class Adversary:
    name = ""

    def __init__(self, sim):
        self.sim = sim
        self.rng = ShakeStream(b"adversary" + self.name.encode() + sim.seed.to_bytes(8, "big"))

    def pick(self, n: int) -> int:
        return int.from_bytes(self.rng.squeeze(4), "big") % n

    def note(self, what: str, k: int = 1) -> None:
        self.sim.metrics[f"adversary:{self.name}:{what}"] += k

    def install(self) -> None:
        pass

    def on_record(self, src: str, dst: str, frame: bytes) -> bytes:
        return frame

    @property
    def attack_time(self) -> int:
        # after the first honest transaction has been sent
        return 1 + self.sim.config.latency

    def base_tx(self):
        """A genuine, Falcon-signed meta-transaction observed on the network."""
        sim = self.sim
        if sim.honest_mtxs:
            return sim.honest_mtxs[0]
        return sim.make_honest_tx(sim.writers[0])

    def fresh_tx(self, nonce_base: int = 1 << 32) -> Transaction:
        return Transaction(nonce_base + self.pick(1 << 16), 0, 21000, self.rng.squeeze(20),
                           self.pick(1 << 20), self.rng.squeeze(8), self.sim.config.chain_id)


def _mutate(tx: Transaction, name: str, adv: Adversary):
    v = getattr(tx, name)
    if name == "to":
        b = bytearray(v or bytes(20))
        b[adv.pick(20)] ^= 1 + adv.pick(255)
        return bytes(b)
    if name == "data":
        return v + bytes([adv.pick(256)]) if adv.pick(2) or not v else v[:-1]
    return v + 1 + adv.pick(1000)


class TamperInFlight(Adversary):
    """Flips bits inside tunnel records on the wire."""

    name = "TamperInFlight"

    def install(self) -> None:
        self.left = self.sim.config.tamper_flips

    def on_record(self, src, dst, frame):
        if self.left <= 0 or self.pick(4):
            return frame
        self.left -= 1
        # past the frame header and record header: ciphertext or tag
        pos = 5 + 12 + self.pick(len(frame) - 17)
        b = bytearray(frame)
        b[pos] ^= 1 << self.pick(8)
        self.note("records_flipped")
        return bytes(b)


class ForgeFalcon(Adversary):
    """Transactions whose Falcon signature does not match the inner tx.

    ``tamper`` is a malicious writer changing one inner field after signing
    (it can re-sign ECDSA, not re-sign Falcon). The other variants hold a
    stolen writer ECDSA key but no Falcon secret. ``proposal`` additionally
    has a compromised proposer push the forged tx inside a block.
    """

    name = "ForgeFalcon"

    def install(self) -> None:
        self.sim.schedule(self.attack_time, lambda sim: self.attack())

    def variant(self) -> str:
        v = self.sim.config.forge_variant
        return FORGE_VARIANTS[1:][self.sim.seed % (len(FORGE_VARIANTS) - 1)] if v == "auto" else v

    def field(self) -> str:
        f = self.sim.config.tamper_field
        return TX_FIELDS[self.sim.seed % len(TX_FIELDS)] if f == "auto" else f

    def forge(self, variant: str):
        sim = self.sim
        writer = sim.nodes[sim.writers[0]].prov
        if variant == "tamper":
            base = self.base_tx()
            name = self.field()
            self.note(f"tamper:{name}")
            return retamper(base, writer.eth, **{name: _mutate(base.inner.tx, name, self)})
        tx = self.fresh_tx()
        inner = sign_inner(tx, writer.eth)
        if variant == "random":
            sig = bytes([0x39]) + self.rng.squeeze(665)
        elif variant == "foreign":
            sig = falcon_sign(signing_stream(tx), sim.prov.adversary_falcon).data
        else:  # transplant and proposal reuse a genuine signature
            sig = self.base_tx().falcon_signature
        return wrap(inner, writer.did, sig, sim.relay_hub, writer.eth, tx.nonce)

    def attack(self) -> None:
        sim = self.sim
        v = self.variant()
        mtx = self.forge(v)
        sim.adversarial_txs.add(mtx.hash())
        self.note(f"variant:{v}")
        if v == "tamper":
            sim.flood_from(sim.writers[0], mtx.encode())
        elif v == "proposal":
            ref = sim.nodes[sim.validators[0]]
            number = ref.height + 1
            proposer = sim.proposer_for(number)
            block = build_block(number, ref.head, sim.nodes[proposer].did, [mtx.encode()], nonce=1 << 40)
            sim.adversarial_blocks.add(block.block_hash)
            sim.inject_proposal(proposer, block)
        else:
            sim.submit(sim.order[self.pick(len(sim.order))], mtx.encode())


class ReplayMetatx(Adversary):
    """Resubmits an admitted meta-transaction, before and after finalization."""

    name = "ReplayMetatx"

    def install(self) -> None:
        cfg = self.sim.config
        late = 1 + cfg.tx_count * cfg.tx_interval + 4 * cfg.block_interval
        self.sim.schedule(self.attack_time + cfg.latency, lambda sim: self.replay())
        self.sim.schedule(late, lambda sim: self.replay())

    def replay(self) -> None:
        sim = self.sim
        if not sim.honest_mtxs:
            return
        raw = sim.honest_mtxs[0].encode()
        for n in sim.order:
            sim.submit(n, raw)
            self.note("replays")


class RogueEntryPoint(Adversary):
    """A writer addressing its wrapper to something other than the relay hub."""

    name = "RogueEntryPoint"

    def install(self) -> None:
        self.sim.schedule(self.attack_time, lambda sim: self.attack())

    def attack(self) -> None:
        sim = self.sim
        writer_id = sim.writers[0]
        w = sim.nodes[writer_id].prov
        hub = bytes(20) if self.pick(2) else self.rng.squeeze(20)
        tx = self.fresh_tx()
        inner = sign_inner(tx, w.eth)
        mtx = wrap(inner, w.did, falcon_sign(signing_stream(tx), w.falcon_keys).data, hub, w.eth, tx.nonce)
        sim.adversarial_txs.add(mtx.hash())
        sim.submit(writer_id, mtx.encode(), local=True)
        sim.submit(sim.order[self.pick(len(sim.order))], mtx.encode())
        self.note("submitted")


class StolenEcdsaKeys(Adversary):
    """Holds every validator's ECDSA secret; no Falcon secrets, no session keys.

    Builds a block carrying a full set of valid validator ECDSA signatures and
    tries every way it has of getting it, or a forged transaction, to honest
    nodes.
    """

    name = "StolenEcdsaKeys"

    def install(self) -> None:
        sim = self.sim
        self.stolen = {sim.nodes[v].did: sim.nodes[v].prov.eth for v in sim.validators}
        sim.schedule(1 + sim.config.block_interval, lambda s: self.attack())

    def craft_block(self, target):
        sim = self.sim
        number = target.height + 1
        proposer = sim.nodes[sim.proposer_for(number)].did
        txs = []
        if self.pick(2):
            mtx = self.forged_tx(via_validator=bool(self.pick(2)))
            txs.append(mtx.encode())
            self.note("block:forged_tx")
        else:
            self.note("block:empty_fork")
        block = build_block(number, target.head, proposer, txs, nonce=(1 << 48) + self.pick(1 << 16))
        block = block.with_signatures([(d, sign_block(block, k)) for d, k in self.stolen.items()])
        sim.adversarial_blocks.add(block.block_hash)
        return block

    def forged_tx(self, via_validator: bool):
        sim = self.sim
        vdid, vkey = list(self.stolen.items())[self.pick(len(self.stolen))]
        writer_did = vdid if via_validator else sim.nodes[sim.writers[0]].did if sim.writers else vdid
        tx = self.fresh_tx()
        inner = sign_inner(tx, vkey)
        sig = falcon_sign(signing_stream(tx), sim.prov.adversary_falcon).data
        mtx = wrap(inner, writer_did, sig, sim.relay_hub, vkey, tx.nonce)
        sim.adversarial_txs.add(mtx.hash())
        return mtx

    def attack(self) -> None:
        from .network import MsgKind

        sim = self.sim
        honest = sim.order
        target_id = honest[self.pick(len(honest))]
        target = sim.nodes[target_id]
        victims = [v for v in sim.validators if v != target_id] or sim.validators
        victim = victims[self.pick(len(victims))]
        block = self.craft_block(target)
        msg = bytes([MsgKind.COMMIT]) + block.encode()

        # 1. push the block from outside any tunnel
        sim.inject_raw(target_id, encode_frame(FrameType.RECORD, msg))
        self.note("raw_push")

        # 2. one way into a tunnel
        way = ("rogue_handshake", "record_injection", "replay_record")[self.pick(3)]
        self.note(f"vector:{way}")
        if way == "rogue_handshake":
            ident = Identity(sim.nodes[victim].prov.identity.cert, sim.prov.adversary_falcon)
            try:
                s_adv, s_target = handshake(ident, target.prov.identity, sim.prov.policy, sim.prov.policy,
                                            self.rng.squeeze(32), now=max(sim.time, 1), wire=sim.wire,
                                            channel=f"adversary<->{target_id}")
            except (PqError, FrameError, ValueError) as exc:
                self.note(f"handshake_refused:{getattr(exc, 'code', type(exc).__name__)}")
            else:  # pragma: no cover - would falsify the tunnel's authentication
                self.note("handshake_accepted")
                target.sessions[victim] = s_target
                sim.inject_frame(victim, target_id, encode_frame(FrameType.RECORD, s_adv.seal(msg).encode()))
        elif way == "record_injection":
            sess = target.sessions.get(victim)
            seq = (sess.recv_seq if sess else 0) + 1
            header = seq.to_bytes(8, "big")
            ct = aead.seal(self.rng.squeeze(32), aead.counter_nonce(b"i2r", seq), msg, header)
            rec = TunnelRecord(seq, ct[:-aead.TAG_LEN], ct[-aead.TAG_LEN:])
            sim.inject_frame(victim, target_id, encode_frame(FrameType.RECORD, rec.encode()))
        else:
            seen = [f for ch, d, f in sim.wire.entries if ch == f"{victim}->{target_id}" and d == "out"]
            if seen:
                sim.inject_frame(victim, target_id, seen[self.pick(len(seen))])
            else:
                self.note("nothing_to_replay")

        # 3. forged transaction over the public ingress
        mtx = self.forged_tx(via_validator=bool(self.pick(2)))
        sim.submit(honest[self.pick(len(honest))], mtx.encode())
        self.note("forged_tx_submitted")


_BY_NAME = {c.name: c for c in (TamperInFlight, ForgeFalcon, ReplayMetatx, StolenEcdsaKeys, RogueEntryPoint)}


def make_adversary(name: str, sim) -> Adversary:
    try:
        return _BY_NAME[name](sim)
    except KeyError:
        raise ConfigError(f"unknown adversary scenario {name!r}") from None


def inject_adversary(sim, scenario: str) -> Adversary:
    """Install one more scenario on an existing simulation."""
    adv = make_adversary(scenario, sim)
    sim.adversaries.append(adv)
    adv.install()
    return adv
