"""Node-side admission control for meta-transactions.

Entry-point check, then three short-circuiting steps:
  1. the wrapper's ECDSA signer controls the writer DID,
  2. the writer's Falcon key is resolved from the same DID record,
  3. the Falcon signature over the inner EIP-155 stream verifies.

Step 3 runs through one of two backends. ``Metered`` walks an instrumented
verifier and charges gas per counted primitive; ``NativeFast`` calls the
fast verifier and charges either a flat opcode price or a precompile table.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
import time
from collections import Counter
from dataclasses import asdict, dataclass, field

from .crypto.falcon import Outcome, falcon_verify, falcon_verify_metered
from .crypto.secp256k1 import RecoveryError
from .did import DidRegistry, MalformedDid, NotFound, parse_did
from .metatx import MetaTransaction, signing_stream

BLOCK_GAS_LIMIT = 12_000_000
CODE_SIZE_LIMIT = 24_576


class Verdict(enum.Enum):
    ADMIT = "Admit"
    REJECT = "Reject"


class Reason(enum.Enum):
    NOT_RELAY_HUB = "NotRelayHub"
    SENDER_CONTROL_FAILED = "SenderControlFailed"
    DID_UNRESOLVABLE = "DidUnresolvable"
    PQ_SIGNATURE_INVALID = "PqSignatureInvalid"
    MALFORMED = "Malformed"


class Backend(enum.Enum):
    METERED = "Metered"
    NATIVE = "NativeFast"


class Charging(enum.Enum):
    OPCODE_FLAT = "OpcodeFlat"
    PRECOMPILE_TABLE = "PrecompileTable"


@dataclass(frozen=True)
class GasModel:
    """Per-primitive gas prices for the metered verifier.

    ``interpretation_overhead`` multiplies the summed primitive costs to
    stand for the dispatch, stack and bounds-check work an in-VM interpreted
    verifier performs around each primitive. It is a calibration knob, not a
    derived EVM figure; ``raw`` gas (overhead 1) is always reported next to
    the scaled total.
    """

    hash_word: int = 36
    field_mul: int = 5
    memory_word: int = 3
    butterfly: int = 0
    keccak_f: int = 0
    sig_verify_opcode: int = 1
    interpretation_overhead: int = 1000
    precompile_base: int = 1500
    precompile_per_word: int = 6
    block_gas_limit: int = BLOCK_GAS_LIMIT
    code_size_limit: int = CODE_SIZE_LIMIT

    def __post_init__(self):
        if self.block_gas_limit != BLOCK_GAS_LIMIT or self.code_size_limit != CODE_SIZE_LIMIT:
            raise ValueError("block gas limit and code size limit are fixed")
        if self.interpretation_overhead < 1:
            raise ValueError("interpretation_overhead must be >= 1")

    def raw_cost(self, meter: Counter) -> int:
        return (
            meter["hash_word"] * self.hash_word
            + meter["field_mul"] * self.field_mul
            + meter["memory_word"] * self.memory_word
            + meter["butterfly"] * self.butterfly
            + meter["keccak_f"] * self.keccak_f
        )

    def metered_cost(self, meter: Counter) -> int:
        return self.raw_cost(meter) * self.interpretation_overhead

    def precompile_cost(self, input_len: int) -> int:
        return self.precompile_base + self.precompile_per_word * math.ceil(input_len / 32)


DEFAULT_GAS = GasModel()


def metered_falcon_verify(stream: bytes, sig: bytes, pk: bytes, gas_model: GasModel = DEFAULT_GAS,
                          meter: Counter | None = None) -> tuple[Outcome, int]:
    meter = Counter() if meter is None else meter
    res = falcon_verify_metered(stream, sig, pk, meter)
    return res, gas_model.metered_cost(meter)


def native_fast_verify(stream: bytes, sig: bytes, pk: bytes, charging: Charging = Charging.OPCODE_FLAT,
                       gas_model: GasModel = DEFAULT_GAS) -> tuple[Outcome, int]:
    res = falcon_verify(stream, sig, pk)
    if charging is Charging.OPCODE_FLAT:
        return res, gas_model.sig_verify_opcode
    return res, gas_model.precompile_cost(len(stream) + len(sig) + len(pk))


@dataclass(frozen=True)
class AdmissionDecision:
    verdict: Verdict
    reason: Reason | None
    gas_metered: int
    backend: Backend
    tx_hash: bytes = b""
    step_timings_us: tuple[int, ...] = field(default=(), compare=False)

    def __post_init__(self):
        if self.verdict is Verdict.ADMIT and self.reason is not None:
            raise ValueError("an admitted transaction carries no reject reason")
        if self.verdict is Verdict.REJECT and self.reason is None:
            raise ValueError("a rejection needs a reason")

    @property
    def admitted(self) -> bool:
        return self.verdict is Verdict.ADMIT

    def to_json(self, timings: bool = True) -> dict:
        return {
            "tx_hash": "0x" + self.tx_hash.hex(),
            "verdict": self.verdict.value,
            "reason": self.reason.value if self.reason else None,
            "backend": self.backend.value,
            "gas": self.gas_metered,
            "step_timings_us": list(self.step_timings_us) if timings else [],
        }


def check_entry_point(mtx: MetaTransaction, relay_hub: bytes) -> bool:
    return len(relay_hub) == 20 and mtx.wrapper.tx.to == relay_hub and mtx.relay_hub == relay_hub


@dataclass
class Verifier:
    """Bundles backend choice, gas model and instrumentation counters."""

    relay_hub: bytes
    backend: Backend = Backend.NATIVE
    charging: Charging = Charging.OPCODE_FLAT
    gas_model: GasModel = DEFAULT_GAS
    counters: Counter = field(default_factory=Counter)
    clock: object = time.perf_counter_ns
    # extra permissioning checks, each mtx -> Reason | None; none by default
    predicates: tuple = ()

    def admit(self, mtx: MetaTransaction, registry: DidRegistry) -> AdmissionDecision:
        self.counters["entry"] += 1
        txh = mtx.hash()
        if not check_entry_point(mtx, self.relay_hub):
            return AdmissionDecision(Verdict.REJECT, Reason.NOT_RELAY_HUB, 0, self.backend, txh)
        for pred in self.predicates:
            reason = pred(mtx)
            if reason is not None:
                self.counters["predicate"] += 1
                return AdmissionDecision(Verdict.REJECT, reason, 0, self.backend, txh)
        return verify_three_steps(mtx, registry, self.backend, self.charging, self.gas_model, self.counters, self.clock)


def verify_three_steps(mtx: MetaTransaction, registry: DidRegistry, backend: Backend = Backend.NATIVE,
                       charging: Charging = Charging.OPCODE_FLAT, gas_model: GasModel = DEFAULT_GAS,
                       counters: Counter | None = None, clock=time.perf_counter_ns) -> AdmissionDecision:
    counters = Counter() if counters is None else counters
    txh = mtx.hash()
    timings = []

    def reject(reason: Reason, gas: int = 0) -> AdmissionDecision:
        return AdmissionDecision(Verdict.REJECT, reason, gas, backend, txh, tuple(timings))

    # step 1: sender controls the writer DID
    counters["step1"] += 1
    t0 = clock()
    try:
        parse_did(mtx.writer_did)
    except MalformedDid:
        timings.append((clock() - t0) // 1000)
        return reject(Reason.MALFORMED)
    try:
        sender = mtx.wrapper.sender_public_key()
    except (RecoveryError, ValueError):
        timings.append((clock() - t0) // 1000)
        return reject(Reason.SENDER_CONTROL_FAILED)
    control = registry.controls(sender, mtx.writer_did)
    timings.append((clock() - t0) // 1000)
    if not control:
        return reject(Reason.DID_UNRESOLVABLE if control.reason == "NotFound" else Reason.SENDER_CONTROL_FAILED)

    # step 2: resolve the post-quantum key from the same record
    counters["step2"] += 1
    t0 = clock()
    try:
        falcon_pk = registry.resolve(mtx.writer_did).falcon_public_key
    except NotFound:
        timings.append((clock() - t0) // 1000)
        return reject(Reason.DID_UNRESOLVABLE)
    timings.append((clock() - t0) // 1000)

    # step 3: Falcon signature over the inner nine-element stream
    counters["step3"] += 1
    t0 = clock()
    stream = signing_stream(mtx.inner.tx)
    if backend is Backend.METERED:
        res, gas = metered_falcon_verify(stream, mtx.falcon_signature, falcon_pk, gas_model)
    else:
        res, gas = native_fast_verify(stream, mtx.falcon_signature, falcon_pk, charging, gas_model)
    timings.append((clock() - t0) // 1000)
    if res is Outcome.MALFORMED:
        return reject(Reason.MALFORMED, gas)
    if res is Outcome.INVALID:
        return reject(Reason.PQ_SIGNATURE_INVALID, gas)
    return AdmissionDecision(Verdict.ADMIT, None, gas, backend, txh, tuple(timings))


def max_gas_price(limit: int):
    """Permissioning predicate on the wrapper's gas price."""
    def check(mtx: MetaTransaction):
        return Reason.NOT_RELAY_HUB if mtx.wrapper.tx.gasprice > limit else None
    return check


def zero_value():
    """Permissioning predicate: the wrapper must not move value."""
    def check(mtx: MetaTransaction):
        return Reason.NOT_RELAY_HUB if mtx.wrapper.tx.value != 0 else None
    return check


class PoolAction(enum.Enum):
    INSERTED = "Inserted"
    DUPLICATE = "Duplicate"
    DROPPED = "Dropped"


class TxPool:
    """Insertion-ordered set of admitted meta-transactions keyed by wrapper hash."""

    def __init__(self):
        self._txs: dict[bytes, MetaTransaction] = {}

    def add(self, mtx: MetaTransaction) -> bool:
        h = mtx.hash()
        if h in self._txs:
            return False
        self._txs[h] = mtx
        return True

    def remove(self, hashes) -> None:
        for h in hashes:
            self._txs.pop(h, None)

    def __contains__(self, h: bytes) -> bool:
        return h in self._txs

    def __len__(self) -> int:
        return len(self._txs)

    def items(self) -> list[MetaTransaction]:
        return list(self._txs.values())

    def hashes(self) -> list[bytes]:
        return list(self._txs)


def gate_and_propagate(pool: TxPool, mtx: MetaTransaction, decision: AdmissionDecision, forward,
                       counters: Counter | None = None) -> PoolAction:
    """Admit -> insert (dedup) and forward to peers; Reject -> drop, never forwarded."""
    counters = Counter() if counters is None else counters
    if not decision.admitted:
        counters["rejected"] += 1
        counters[f"rejected:{decision.reason.value}"] += 1
        return PoolAction.DROPPED
    if not pool.add(mtx):
        counters["duplicate"] += 1
        return PoolAction.DUPLICATE
    counters["admitted"] += 1
    forward(mtx)
    return PoolAction.INSERTED


class DecisionLog:
    """Append-only JSONL decision log (one object per line, sorted keys)."""

    def __init__(self, path=None, timings: bool = True):
        self.path = path
        self.timings = timings
        self.lines: list[str] = []

    def append(self, decision: AdmissionDecision, **extra) -> None:
        obj = decision.to_json(self.timings)
        obj.update(extra)
        line = json.dumps(obj, sort_keys=True)
        self.lines.append(line)
        if self.path is not None:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(line + "\n")

    def text(self) -> str:
        return "".join(line + "\n" for line in self.lines)


GAS_CSV_FIELDS = ["vector", "backend", "charging", "verdict", "gas", "raw_gas", "block_limit_ratio"]


@dataclass(frozen=True)
class GasRow:
    vector: str
    backend: str
    charging: str
    verdict: str
    gas: int
    raw_gas: int
    block_limit_ratio: float


def gas_csv(rows: list[GasRow]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=GAS_CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        d = asdict(r)
        d["block_limit_ratio"] = f"{r.block_limit_ratio:.3f}"
        w.writerow(d)
    return buf.getvalue()


def bench_verify(vectors, backend: Backend = Backend.METERED, charging: Charging = Charging.OPCODE_FLAT,
                 gas_model: GasModel = DEFAULT_GAS) -> list[GasRow]:
    """Gas report for ``(name, message, signature, public_key)`` tuples."""
    rows = []
    for name, msg, sig, pk in vectors:
        if backend is Backend.METERED:
            meter = Counter()
            res, gas = metered_falcon_verify(msg, sig, pk, gas_model, meter)
            raw = gas_model.raw_cost(meter)
            mode = "Interpreted"
        else:
            res, gas = native_fast_verify(msg, sig, pk, charging, gas_model)
            raw = gas
            mode = charging.value
        rows.append(GasRow(str(name), backend.value, mode, res.value, gas, raw, gas / gas_model.block_gas_limit))
    return rows
