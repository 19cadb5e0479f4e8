"""Rejection-reason matrix for the admission pipeline, with call counting.

Each case names the step at which it must stop. ``run_case`` counts the
primitive calls belonging to each step (DID control check, DID resolve,
Falcon verify) in addition to the verifier's own step counters.
"""

from collections import Counter
from contextlib import contextmanager
from dataclasses import dataclass

from pqchain import pipeline
from pqchain.crypto import falcon_sign
from pqchain.did import NotFound
from pqchain.metatx import (
    TX_FIELDS,
    Transaction,
    retamper,
    sign_inner,
    sign_outer,
    signing_stream,
    wrap,
)
from pqchain.pipeline import Backend, Charging, Reason, Verifier

CHAIN_ID = 648529


@dataclass
class Case:
    name: str
    mtx: object
    registry: object
    reason: Reason | None   # None: admitted
    stop_step: int          # last step that may run; 0 = entry/predicate gate
    predicates: tuple = ()
    relay_hub: bytes | None = None


class CountingRegistry:
    """Proxy that counts control checks and resolutions."""

    def __init__(self, inner, calls, fail_resolve=False):
        self.inner, self.calls, self.fail_resolve = inner, calls, fail_resolve

    def controls(self, pk, did):
        self.calls["controls"] += 1
        return self.inner.controls(pk, did)

    def resolve(self, did):
        self.calls["resolve"] += 1
        if self.fail_resolve:
            raise NotFound(did)
        return self.inner.resolve(did)


@contextmanager
def count_falcon(calls):
    orig_fast, orig_metered = pipeline.falcon_verify, pipeline.falcon_verify_metered

    def fast(*a, **k):
        calls["falcon"] += 1
        return orig_fast(*a, **k)

    def metered(*a, **k):
        calls["falcon"] += 1
        return orig_metered(*a, **k)

    pipeline.falcon_verify, pipeline.falcon_verify_metered = fast, metered
    try:
        yield
    finally:
        pipeline.falcon_verify, pipeline.falcon_verify_metered = orig_fast, orig_metered


def _mutate(tx, name):
    v = getattr(tx, name)
    if name == "to":
        return bytes([v[0] ^ 1]) + v[1:]
    if name == "data":
        return v + b"\x00"
    return v + 1


def build_matrix(pki, hub):
    writer, alice = pki.members["writer"], pki.members["alice"]
    reg = pki.registry
    tx = Transaction(7, 0, 21000, bytes(range(20)), 5, b"\x01\x02", CHAIN_ID)
    good = sign_outer(sign_inner(tx, writer.eth), writer.did, writer.falcon, hub, writer.eth, 1, reg)
    cases = [Case("valid", good, reg, None, 3)]
    cases.append(Case("wrong_hub", good, reg, Reason.NOT_RELAY_HUB, 0, relay_hub=b"\x01" * 20))
    cases.append(Case("predicate_gas_price", wrap(good.inner, writer.did, good.falcon_signature, hub, writer.eth, 2,
                                                   gasprice=10 ** 12),
                      reg, Reason.NOT_RELAY_HUB, 0, predicates=(pipeline.max_gas_price(10 ** 9),)))
    cases.append(Case("malformed_did", wrap(good.inner, "did:lac:zz", good.falcon_signature, hub, writer.eth, 3),
                      reg, Reason.MALFORMED, 1))
    cases.append(Case("foreign_wrapper_signer", wrap(good.inner, writer.did, good.falcon_signature, hub, alice.eth, 4),
                      reg, Reason.SENDER_CONTROL_FAILED, 1))
    stranger = pki.members["bob"]
    unreg = type(reg)(reg.ca_did)
    cases.append(Case("unregistered_writer", good, unreg, Reason.DID_UNRESOLVABLE, 1))
    cases.append(Case("resolve_failure", good, "fail-resolve", Reason.DID_UNRESOLVABLE, 2))
    for name in TX_FIELDS:
        cases.append(Case(f"tamper_{name}", retamper(good, writer.eth, **{name: _mutate(good.inner.tx, name)}),
                          reg, Reason.PQ_SIGNATURE_INVALID, 3))
    # a genuine Falcon signature made with someone else's registered key
    foreign = falcon_sign(signing_stream(tx), stranger.falcon).data
    cases.append(Case("foreign_falcon_key", wrap(good.inner, writer.did, foreign, hub, writer.eth, 5),
                      reg, Reason.PQ_SIGNATURE_INVALID, 3))
    cases.append(Case("garbage_signature", wrap(good.inner, writer.did, b"\x39" + bytes(665), hub, writer.eth, 6),
                      reg, Reason.MALFORMED, 3))
    return cases


def run_case(case, hub, backend=Backend.NATIVE, charging=Charging.OPCODE_FLAT):
    """(decision, verifier step counters, primitive call counts)."""
    calls = Counter()
    inner = case.registry
    fail = inner == "fail-resolve"
    if fail:
        inner = None
    registry = CountingRegistry(inner, calls, fail_resolve=fail)
    if fail:
        registry.inner = _AlwaysControls()
    v = Verifier(case.relay_hub or hub, backend, charging, predicates=case.predicates)
    with count_falcon(calls):
        decision = v.admit(case.mtx, registry)
    return decision, v.counters, calls


class _AlwaysControls:
    """A registry whose control check passes but whose record then vanishes."""

    def controls(self, pk, did):
        from pqchain.did import ControlResult
        return ControlResult(True, "ok")


def short_circuit_ok(case, decision, counters, calls) -> list[str]:
    """Violations of 'step k stops ⇒ nothing from step k+1 ran'. Empty means ok."""
    bad = []
    want_reason = case.reason
    if decision.reason is not want_reason:
        bad.append(f"reason {decision.reason} != {want_reason}")
    ran = {1: counters["step1"], 2: counters["step2"], 3: counters["step3"]}
    prim = {1: calls["controls"], 2: calls["resolve"], 3: calls["falcon"]}
    for step in (1, 2, 3):
        if step > case.stop_step and (ran[step] or prim[step]):
            bad.append(f"step {step} ran after a step-{case.stop_step} stop")
        if step <= case.stop_step and not ran[step]:
            bad.append(f"step {step} did not run")
    return bad
