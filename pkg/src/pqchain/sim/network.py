"""Deterministic discrete-event network.

Nodes talk only through their provisioned tunnels. Writers originate
meta-transactions, every node gates them through the verification pipeline
and floods admitted ones, and validators run a round-robin proposal with
the 2/3+1 signature rule. Adversaries (see :mod:`.adversary`) act from
outside: they may inject frames, open connections and submit over the
public RPC ingress, but hold only the secrets their scenario grants.

Everything derives from the scenario seed; there is no wall clock.
"""

from __future__ import annotations

import csv
import enum
import heapq
import io
import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from ..crypto import falcon
from ..crypto.hashing import ShakeStream, keccak256
from ..crypto.secp256k1 import EcdsaSignature, ecdsa_verify_fast
from ..did import DidRegistry
from ..errors import PqError
from ..keyfile import write_atomic
from ..metatx import MalformedTx, MetaTransaction, Transaction, sign_inner, sign_outer
from ..pipeline import (
    AdmissionDecision,
    DecisionLog,
    PoolAction,
    Reason,
    TxPool,
    Verdict,
    Verifier,
    gate_and_propagate,
)
from ..rlp import RlpError
from ..tunnel import (
    ReplayOrReorder,
    SessionClosed,
    TagInvalid,
    TunnelSession,
    TunnelState,
    handshake,
)
from ..wire import (
    FrameError,
    FrameType,
    WireLog,
    decode_frame,
    encode_frame,
    pack_fields,
    unpack_fields,
)
from .chain import (
    GENESIS_HASH,
    Block,
    BrokenLink,
    ChainError,
    InvalidTransactionInBlock,
    build_block,
    check_block_signatures,
    encode_chain,
    sign_block,
    sign_block_pq,
    threshold,
    tx_root,
)
from .config import BACKENDS, CHARGING, ScenarioConfig
from .provision import NodeProvision, Provision, Role, provision

MAX_RETRANSMIT = 5
PROPOSAL_TIMEOUT = 3  # in block intervals
NOT_WRITER = "NotWriter"


class MsgKind(enum.IntEnum):
    TX = 1
    PROPOSAL = 2
    VOTE = 3
    COMMIT = 4


@dataclass
class Proposal:
    block: Block
    started: int
    votes: dict[str, tuple[bytes, bytes]] = field(default_factory=dict)


@dataclass
class SimNode:
    prov: NodeProvision
    registry: DidRegistry
    verifier: Verifier
    drbg: ShakeStream
    sessions: dict[str, TunnelSession] = field(default_factory=dict)
    pool: TxPool = field(default_factory=TxPool)
    chain: list[Block] = field(default_factory=list)
    included: set[bytes] = field(default_factory=set)
    rejected: set[bytes] = field(default_factory=set)
    memo: dict[bytes, AdmissionDecision] = field(default_factory=dict)
    log: DecisionLog = field(default_factory=lambda: DecisionLog(timings=False))
    counters: Counter = field(default_factory=Counter)
    voted: dict[int, bytes] = field(default_factory=dict)
    proposal: Proposal | None = None
    sent: int = 0

    @property
    def node_id(self) -> str:
        return self.prov.node_id

    @property
    def role(self) -> Role:
        return self.prov.role

    @property
    def did(self) -> str:
        return self.prov.did

    @property
    def height(self) -> int:
        return len(self.chain)

    @property
    def head(self) -> bytes:
        return self.chain[-1].block_hash if self.chain else GENESIS_HASH

    def decide(self, mtx: MetaTransaction) -> AdmissionDecision:
        # a decision is a pure function of (metatx, registry snapshot), so a
        # re-check of the same bytes against the same replica can be reused
        h = mtx.hash()
        d = self.memo.get(h)
        if d is None:
            d = self.verifier.admit(mtx, self.registry)
            self.memo[h] = d
        return d

    def __repr__(self) -> str:
        return f"SimNode({self.node_id}, {self.role.value}, height={self.height}, pool={len(self.pool)})"


def _logical_clock() -> int:
    return 0


class Simulation:
    def __init__(self, config: ScenarioConfig, prov: Provision):
        self.config = config
        self.prov = prov
        self.seed = config.seed
        self.time = 0
        self.events = 0
        self.status = "Pending"
        self.metrics: Counter = Counter()
        self.wire = WireLog()
        self.relay_hub = prov.relay_hub
        self.gas_model = config.gas_model()
        self._queue: list = []
        self._seq = 0
        self._tick_pending = False
        self._round = 0
        backend, charging = BACKENDS[config.backend], CHARGING[config.charging]

        self.nodes: dict[str, SimNode] = {}
        for p in prov.nodes:
            verifier = Verifier(self.relay_hub, backend, charging, self.gas_model, Counter(), _logical_clock)
            drbg = ShakeStream(b"node drbg" + p.drbg_seed + self.seed.to_bytes(8, "big"))
            self.nodes[p.node_id] = SimNode(p, prov.registry(), verifier, drbg)
        self.order = [p.node_id for p in prov.nodes]
        self.validators = [n for n in self.order if self.nodes[n].role is Role.VALIDATOR]
        self.writers = [n for n in self.order if self.nodes[n].role is Role.WRITER]
        self.writer_dids = frozenset(self.nodes[n].did for n in self.writers)
        self.validator_eth = {self.nodes[v].did: self.nodes[v].prov.eth.public for v in self.validators}
        self.validator_falcon = ({self.nodes[v].did: self.nodes[v].prov.falcon_keys.public for v in self.validators}
                                 if config.pq_block_signatures else None)
        self.threshold = threshold(len(self.validators))
        self._epochs: dict[frozenset, int] = {}
        for (a, b), (sa, sb) in prov.fresh_sessions().items():
            self.nodes[a].sessions[b] = sa
            self.nodes[b].sessions[a] = sb
            self._epochs[frozenset((a, b))] = 0

        self.honest_mtxs: list[MetaTransaction] = []
        self.adversarial_txs: set[bytes] = set()
        self.adversarial_blocks: set[bytes] = set()
        self.rpc_log: list[dict] = []

        for k in range(config.tx_count):
            writer = self.writers[k % len(self.writers)]
            self._push(1 + k * config.tx_interval, "originate", (writer,))

        from .adversary import make_adversary
        self.adversaries = [make_adversary(name, self) for name in config.adversaries]
        for adv in self.adversaries:
            adv.install()

    # -- scheduling ------------------------------------------------------------

    def _push(self, t: int, kind: str, args: tuple) -> None:
        self._seq += 1
        heapq.heappush(self._queue, (t, self._seq, kind, args))

    def schedule(self, t: int, fn) -> None:
        """Run ``fn(sim)`` at logical time ``t`` (adversary hooks)."""
        self._push(max(t, self.time), "call", (fn,))

    def _has_work(self) -> bool:
        return any(self.nodes[v].pool or self.nodes[v].proposal for v in self.validators)

    def _ensure_tick(self) -> None:
        if not self._tick_pending and self._has_work():
            bi = self.config.block_interval
            self._push((self.time // bi + 1) * bi, "tick", ())
            self._tick_pending = True

    def run(self, budget: int | None = None) -> dict:
        budget = self.config.event_budget if budget is None else budget
        self.status = "Quiescent"
        while self._queue:
            if self.events >= budget:
                self.status = "BudgetExhausted"
                break
            t, _, kind, args = heapq.heappop(self._queue)
            self.time = t
            self.events += 1
            getattr(self, f"_ev_{kind}")(*args)
            self._ensure_tick()
        return self.summary()

    # -- transactions --------------------------------------------------------------

    def make_honest_tx(self, writer_id: str) -> MetaTransaction:
        w = self.nodes[writer_id]
        rng = w.drbg
        k = w.sent
        w.sent += 1
        data = rng.squeeze(rng.squeeze(1)[0] % 48)
        tx = Transaction(k, 0, 21000 + int.from_bytes(rng.squeeze(2), "big"), rng.squeeze(20),
                         int.from_bytes(rng.squeeze(4), "big"), data, self.config.chain_id)
        inner = sign_inner(tx, w.prov.eth)
        return sign_outer(inner, w.did, w.prov.falcon_keys, self.relay_hub, w.prov.eth, wrapper_nonce=k)

    def _ev_originate(self, writer_id: str) -> None:
        mtx = self.make_honest_tx(writer_id)
        self.honest_mtxs.append(mtx)
        self.metrics["txs_originated"] += 1
        self.submit(writer_id, mtx.encode(), local=True)

    def submit(self, node_id: str, raw: bytes, local: bool = False) -> PoolAction:
        """Hand a raw meta-transaction to a node.

        ``local`` means the node itself is originating (broadcast); otherwise
        it arrives over the public RPC ingress.
        """
        node = self.nodes[node_id]
        if local and node.role is not Role.WRITER:
            # only writers broadcast; refused before any verification
            self._reject_unverified(node, keccak256(raw), NOT_WRITER)
            return PoolAction.DROPPED
        self.rpc_log.append({"time": self.time, "node": node_id, "tx_hash": "0x" + keccak256(raw).hex(), "local": local})
        return self._receive_tx(node, bytes(raw), None)

    def _reject_unverified(self, node: SimNode, h: bytes, reason: str) -> None:
        node.rejected.add(h)
        node.counters["rejected"] += 1
        node.counters[f"rejected:{reason}"] += 1
        node.log.lines.append(json.dumps({
            "tx_hash": "0x" + h.hex(), "verdict": Verdict.REJECT.value, "reason": reason,
            "backend": None, "gas": 0, "step_timings_us": [], "node": node.node_id, "time": self.time,
        }, sort_keys=True))

    def _receive_tx(self, node: SimNode, raw: bytes, src: str | None) -> PoolAction:
        h = keccak256(raw)
        if h in node.included or h in node.pool:
            node.counters["duplicate"] += 1
            return PoolAction.DUPLICATE
        if h in node.rejected:
            node.counters["duplicate_rejected"] += 1
            return PoolAction.DROPPED
        try:
            mtx = MetaTransaction.decode(raw)
        except (MalformedTx, RlpError, ValueError, PqError):
            d = AdmissionDecision(Verdict.REJECT, Reason.MALFORMED, 0, node.verifier.backend, h)
            node.rejected.add(h)
            node.log.append(d, node=node.node_id, time=self.time)
            node.counters["rejected"] += 1
            node.counters[f"rejected:{Reason.MALFORMED.value}"] += 1
            return PoolAction.DROPPED
        if mtx.writer_did not in self.writer_dids:
            self._reject_unverified(node, h, NOT_WRITER)
            return PoolAction.DROPPED
        d = node.decide(mtx)
        node.log.append(d, node=node.node_id, time=self.time)
        action = gate_and_propagate(node.pool, mtx, d, lambda m: self._flood(node, raw, src), node.counters)
        if action is PoolAction.DROPPED:
            node.rejected.add(h)
        return action

    def _flood(self, node: SimNode, raw: bytes, exclude: str | None) -> None:
        for peer in self.order:
            if peer in node.sessions and peer != exclude:
                self._send(node.node_id, peer, bytes([MsgKind.TX]) + raw)

    def flood_from(self, node_id: str, raw: bytes) -> None:
        """Send a transaction to every peer of ``node_id`` without gating it
        (a compromised node's behaviour)."""
        self._flood(self.nodes[node_id], bytes(raw), None)

    # -- transport -----------------------------------------------------------------

    def _epoch(self, a: str, b: str) -> int:
        return self._epochs[frozenset((a, b))]

    def _send(self, src: str, dst: str, msg: bytes, attempts: int = 0) -> None:
        node = self.nodes[src]
        if node.sessions[dst].state is not TunnelState.OPEN:
            self.rehandshake(src, dst)
        rec = node.sessions[dst].seal(msg)
        frame = encode_frame(FrameType.RECORD, rec.encode())
        for adv in self.adversaries:
            frame = adv.on_record(src, dst, frame)
        self.wire.record(f"{src}->{dst}", "out", frame)
        self.metrics["records_sent"] += 1
        self._push(self.time + self.config.latency, "deliver", (src, dst, frame, msg, self._epoch(src, dst), attempts))

    def inject_frame(self, src: str, dst: str, frame: bytes) -> None:
        """Adversary writes ``frame`` onto the src->dst channel."""
        self.wire.record(f"{src}->{dst}", "injected", frame)
        self._push(self.time + self.config.latency, "deliver", (src, dst, bytes(frame), None, None, 0))

    def inject_raw(self, dst: str, data: bytes, origin: str = "adversary") -> None:
        """Bytes arriving from an endpoint with no tunnel to ``dst``."""
        self.wire.record(f"{origin}->{dst}", "injected", bytes(data))
        self._push(self.time + self.config.latency, "deliver", (origin, dst, bytes(data), None, None, 0))

    def rehandshake(self, a: str, b: str) -> None:
        i, r = sorted((a, b), key=self.order.index)
        ni, nr = self.nodes[i], self.nodes[r]
        policy = self.prov.policy
        s_i, s_r = handshake(ni.prov.identity, nr.prov.identity, policy, policy, ni.drbg.squeeze(32),
                             now=max(self.time, 1), wire=self.wire, channel=f"{i}<->{r}")
        ni.sessions[r], nr.sessions[i] = s_i, s_r
        self._epochs[frozenset((i, r))] += 1
        self.metrics["handshakes"] += 1

    def _retransmit(self, src: str, dst: str, msg: bytes, attempts: int) -> None:
        if attempts >= MAX_RETRANSMIT:
            self.metrics["messages_lost"] += 1
            return
        self.metrics["retransmits"] += 1
        self._send(src, dst, msg, attempts + 1)

    def _ev_deliver(self, src, dst, frame, msg, epoch, attempts) -> None:
        node = self.nodes[dst]
        sess = node.sessions.get(src)
        if sess is None:
            self.metrics["unauthenticated_dropped"] += 1
            return
        if epoch is not None and epoch != self._epoch(src, dst):
            # sealed under a session that has since been replaced
            self._retransmit(src, dst, msg, attempts)
            return
        try:
            kind, payload = decode_frame(frame)
            if kind != FrameType.RECORD:
                raise FrameError("expected a tunnel record")
            plain = sess.open(payload)
        except (TagInvalid, FrameError, SessionClosed, ReplayOrReorder) as exc:
            code = getattr(exc, "code", "Malformed")
            self.metrics[f"record_rejected:{code}"] += 1
            node.counters[f"record_rejected:{code}"] += 1
            if msg is None:
                if node.sessions[src].state is not TunnelState.OPEN:
                    self.rehandshake(src, dst)
                return
            # a legitimate record was damaged in flight: rekey and resend
            self.rehandshake(src, dst)
            self._retransmit(src, dst, msg, attempts)
            return
        self._dispatch(node, src, plain)

    def _dispatch(self, node: SimNode, src: str, plain: bytes) -> None:
        if not plain:
            self.metrics["unknown_message"] += 1
            return
        kind, body = plain[0], plain[1:]
        if kind == MsgKind.TX:
            self._receive_tx(node, body, src)
        elif kind == MsgKind.PROPOSAL:
            self._on_proposal(node, src, body)
        elif kind == MsgKind.VOTE:
            self._on_vote(node, src, body)
        elif kind == MsgKind.COMMIT:
            self._on_commit(node, src, body)
        else:
            self.metrics["unknown_message"] += 1

    def _ev_call(self, fn) -> None:
        fn(self)

    # -- consensus -----------------------------------------------------------------

    def proposer_for(self, number: int) -> str:
        return self.validators[(number - 1) % len(self.validators)]

    def _ev_tick(self) -> None:
        self._tick_pending = False
        for vid in self.validators:
            v = self.nodes[vid]
            number = v.height + 1
            if self.proposer_for(number) != vid:
                continue
            if v.proposal is not None:
                if self.time - v.proposal.started < PROPOSAL_TIMEOUT * self.config.block_interval:
                    continue
                self.metrics["proposal_timeouts"] += 1
                v.proposal = None
            pending = [m.encode() for m in v.pool.items()][: self.config.max_block_txs]
            if not pending:
                continue  # no empty blocks
            block = build_block(number, v.head, v.did, pending, nonce=self._round)
            self._round += 1
            v.proposal = Proposal(block, self.time)
            self.metrics["proposals"] += 1
            for other in self.validators:
                if other != vid:
                    self._send(vid, other, bytes([MsgKind.PROPOSAL]) + block.encode())
            self._add_vote(v, v.did, *self._vote_sigs(v, block))

    def inject_proposal(self, from_id: str, block: Block) -> None:
        """A compromised proposer pushes ``block`` to the other validators."""
        for other in self.validators:
            if other != from_id:
                self._send(from_id, other, bytes([MsgKind.PROPOSAL]) + block.encode())

    def _vote_sigs(self, node: SimNode, block: Block) -> tuple[bytes, bytes]:
        pq = sign_block_pq(block, node.prov.falcon_keys) if self.validator_falcon is not None else b""
        return sign_block(block, node.prov.eth), pq

    def _tx_problem(self, node: SimNode, block: Block) -> str | None:
        if block.tx_root != tx_root(block.txs):
            return "BadTxRoot"
        seen = set()
        for raw in block.txs:
            h = keccak256(raw)
            if h in seen or h in node.included:
                return "DuplicateTransaction"
            seen.add(h)
            try:
                mtx = MetaTransaction.decode(raw)
            except (MalformedTx, RlpError, ValueError, PqError):
                return InvalidTransactionInBlock.code
            if mtx.writer_did not in self.writer_dids or not node.decide(mtx).admitted:
                return InvalidTransactionInBlock.code
        return None

    def _on_proposal(self, node: SimNode, src: str, body: bytes) -> None:
        if node.role is not Role.VALIDATOR:
            self.metrics["ignored_proposals"] += 1
            return
        try:
            block = Block.decode(body)
        except ChainError:
            problem = "Malformed"
        else:
            problem = None
            if self.proposer_for(block.number) != src or block.proposer != self.nodes[src].did:
                problem = "WrongProposer"
            elif block.number != node.height + 1 or block.prev_hash != node.head:
                problem = "NotNextBlock"
            elif node.voted.get(block.number, block.block_hash) != block.block_hash:
                problem = "AlreadyVoted"
            else:
                problem = self._tx_problem(node, block)
        if problem:
            node.counters[f"proposal_refused:{problem}"] += 1
            self.metrics[f"proposal_refused:{problem}"] += 1
            return
        node.voted[block.number] = block.block_hash
        sig, pq = self._vote_sigs(node, block)
        fields = pack_fields(block.number.to_bytes(8, "big"), block.block_hash, node.did.encode(), sig, pq)
        self._send(node.node_id, src, bytes([MsgKind.VOTE]) + fields)

    def _on_vote(self, node: SimNode, src: str, body: bytes) -> None:
        try:
            number, bhash, did, sig, pq = unpack_fields(body, 5)
            did = did.decode()
            parsed = EcdsaSignature.from_bytes(sig)
        except (FrameError, ValueError, UnicodeDecodeError):
            self.metrics["bad_votes"] += 1
            return
        p = node.proposal
        if p is None or int.from_bytes(number, "big") != p.block.number or bhash != p.block.block_hash:
            self.metrics["stale_votes"] += 1
            return
        ok = did == self.nodes[src].did and did in self.validator_eth and ecdsa_verify_fast(bhash, parsed, self.validator_eth[did])
        if ok and self.validator_falcon is not None:
            ok = bool(falcon.falcon_verify(b"block" + bhash, pq, self.validator_falcon[did]))
        if not ok:
            self.metrics["bad_votes"] += 1
            return
        self._add_vote(node, did, sig, pq)

    def _add_vote(self, node: SimNode, did: str, sig: bytes, pq: bytes) -> None:
        p = node.proposal
        p.votes[did] = (sig, pq)
        if len(p.votes) < self.threshold:
            return
        dids = [self.nodes[v].did for v in self.validators if self.nodes[v].did in p.votes]
        block = p.block.with_signatures([(d, p.votes[d][0]) for d in dids],
                                        [(d, p.votes[d][1]) for d in dids] if self.validator_falcon is not None else ())
        node.proposal = None
        self._import(node, block)
        self.metrics["blocks_finalized"] += 1
        for peer in self.order:
            if peer in node.sessions:
                self._send(node.node_id, peer, bytes([MsgKind.COMMIT]) + block.encode())

    def _on_commit(self, node: SimNode, src: str, body: bytes) -> None:
        try:
            self._import(node, Block.decode(body))
        except ChainError as exc:
            node.counters[f"commit_rejected:{exc.code}"] += 1
            self.metrics[f"commit_rejected:{exc.code}"] += 1

    def _import(self, node: SimNode, block: Block) -> bool:
        if block.number <= node.height:
            if node.chain[block.number - 1].block_hash == block.block_hash:
                node.counters["duplicate_commits"] += 1
                return False
            raise BrokenLink("conflicts with a finalized block")
        if block.number != node.height + 1 or block.prev_hash != node.head:
            raise BrokenLink("does not extend the local head")
        check_block_signatures(block, self.validator_eth, self.threshold, self.validator_falcon)
        problem = self._tx_problem(node, block)
        if problem:
            raise InvalidTransactionInBlock(problem)
        node.chain.append(block)
        hashes = [keccak256(t) for t in block.txs]
        node.included.update(hashes)
        node.pool.remove(hashes)
        if node.proposal is not None and node.proposal.block.number <= node.height:
            node.proposal = None
        node.counters["blocks_imported"] += 1
        return True

    # -- results -------------------------------------------------------------------

    def reference_chain(self) -> list[Block]:
        return max((self.nodes[n].chain for n in self.order), key=len)

    def chains_consistent(self) -> bool:
        snaps = {encode_chain(self.nodes[n].chain) for n in self.order}
        return len(snaps) == 1

    def chain_snapshot(self, node_id: str | None = None) -> bytes:
        chain = self.nodes[node_id].chain if node_id else self.reference_chain()
        return encode_chain(chain)

    def initial_state_hash(self) -> bytes:
        parts = [self.prov.registry_snapshot, self.relay_hub]
        parts += [self.nodes[n].prov.identity.cert.encode() for n in self.order]
        return keccak256(b"".join(parts))

    def finalized_hashes(self) -> set[bytes]:
        out = set()
        for n in self.order:
            out |= self.nodes[n].included
        return out

    def summary(self) -> dict:
        finalized = self.finalized_hashes()
        ref = self.reference_chain()
        rejected = Counter()
        admitted = 0
        for n in self.order:
            c = self.nodes[n].counters
            admitted += c["admitted"]
            for k, v in c.items():
                if k.startswith("rejected:"):
                    rejected[k.split(":", 1)[1]] += v
        honest = [m.hash() for m in self.honest_mtxs]
        inclusions = Counter(keccak256(t) for b in ref for t in b.txs)
        adv_blocks = sum(1 for n in self.order for b in self.nodes[n].chain if b.block_hash in self.adversarial_blocks)
        return {
            "seed": self.seed,
            "status": self.status,
            "time": self.time,
            "events": self.events,
            "nodes": len(self.order),
            "validators": len(self.validators),
            "threshold": self.threshold,
            "handshakes_provisioned": self.prov.handshakes,
            "handshakes_runtime": self.metrics["handshakes"],
            "height": len(ref),
            "head": "0x" + (ref[-1].block_hash if ref else GENESIS_HASH).hex(),
            "chains_consistent": self.chains_consistent(),
            "txs_originated": len(honest),
            "txs_finalized": sum(1 for h in honest if h in finalized),
            "double_inclusions": sum(1 for v in inclusions.values() if v > 1),
            "admitted": admitted,
            "rejected": dict(sorted(rejected.items())),
            "adversarial_txs": len(self.adversarial_txs),
            "adversarial_txs_finalized": len(self.adversarial_txs & finalized),
            "adversarial_blocks": len(self.adversarial_blocks),
            "adversarial_blocks_finalized": adv_blocks,
            "counters": dict(sorted(self.metrics.items())),
        }

    def metrics_jsonl(self) -> str:
        lines = []
        for n in self.order:
            node = self.nodes[n]
            lines.append(json.dumps({
                "node": n, "role": node.role.value, "did": node.did, "height": node.height,
                "head": "0x" + node.head.hex(), "pool": len(node.pool),
                "counters": dict(sorted(node.counters.items())),
                "pipeline": dict(sorted(node.verifier.counters.items())),
            }, sort_keys=True))
        lines.append(json.dumps({"node": "*", **self.summary()}, sort_keys=True))
        return "\n".join(lines) + "\n"

    def metrics_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["metric", "value"])

        def walk(prefix, obj):
            if isinstance(obj, dict):
                for k in sorted(obj):
                    walk(f"{prefix}.{k}" if prefix else str(k), obj[k])
            else:
                w.writerow([prefix, obj])

        walk("", self.summary())
        return buf.getvalue()

    def decision_log(self, node_id: str) -> str:
        return self.nodes[node_id].log.text()


def write_artifacts(sim: Simulation, out_dir) -> list[str]:
    """metrics.jsonl, metrics.csv, chain.bin, scenario.txt and one decision
    log per node, each written atomically. Returns the relative paths."""
    out = Path(out_dir)
    files = {
        "metrics.jsonl": sim.metrics_jsonl(),
        "metrics.csv": sim.metrics_csv(),
        "chain.bin": sim.chain_snapshot(),
        "scenario.txt": sim.config.to_text(),
    }
    for n in sim.order:
        files[f"decisions/{n}.jsonl"] = sim.decision_log(n)
    for name, data in files.items():
        write_atomic(out / name, data)
    return sorted(files)


def spawn_network(config: ScenarioConfig) -> Simulation:
    prov = provision(config.effective_provision_seed, config.writers, config.validators, config.observers)
    return Simulation(config, prov)


def run(sim: Simulation, budget: int | None = None) -> dict:
    return sim.run(budget)
