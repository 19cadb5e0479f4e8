"""Operator command line: one subcommand group per protocol module.

Exit status is 0 on success, 1 on a domain error (stderr carries the
stable error code) and 2 on a usage error. Machine-readable JSON lines or
CSV go to stdout; ``--pretty`` switches to indented output. Files are
written atomically. The only environment variable is PQCHAIN_CONFIG_ROOT,
against which relative ``--config`` paths are resolved.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import certs, tlv
from .certs import (
    ECDSA_SECP256K1_OID,
    FALCON_OID,
    CertSigningRequest,
    LegacyCertificate,
    PqCertificate,
    SubjectInfo,
)
from .crypto.falcon import falcon_keygen
from .crypto.falcon.kat import load_sign_kat
from .crypto.hashing import shake256
from .crypto.secp256k1 import EcdsaKeyPair
from .did import DidRegistry
from .entropy import (
    EntropyConfig,
    EntropyService,
    EntropySource,
    Link,
    establish_entropy_session,
    open_session,
    request_entropy,
)
from .errors import PqError
from .keyfile import CaKeys, LegacyRoot, NodeKeys, write_atomic
from .metatx import MetaTransaction, RelaySigner, Transaction, sign_inner, sign_outer
from .pipeline import (
    Backend,
    Charging,
    DecisionLog,
    GasModel,
    Verifier,
    bench_verify,
    gas_csv,
)
from .sim import (
    ConfigError,
    ScenarioConfig,
    decode_chain,
    run,
    spawn_network,
    verify_chain,
    write_artifacts,
)
from .tunnel import Identity, TrustPolicy, handshake
from .wire import WireLog

CONFIG_ROOT_ENV = "PQCHAIN_CONFIG_ROOT"
BACKENDS = {"metered": Backend.METERED, "native": Backend.NATIVE}
CHARGING = {"flat": Charging.OPCODE_FLAT, "precompile": Charging.PRECOMPILE_TABLE}


class UsageError(Exception):
    pass


class _CodedError(PqError):
    """Carries a code string that comes from a verdict rather than an exception type."""

    def __init__(self, code: str, message: str = ""):
        self.code = code
        super().__init__(message)


# -- helpers ------------------------------------------------------------------

def _emit(obj, pretty: bool) -> None:
    if pretty:
        print(json.dumps(obj, indent=2, sort_keys=True))
    else:
        print(json.dumps(obj, sort_keys=True))


def _read(path) -> str:
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _seeded(label: bytes, seed: int | None) -> EntropySource:
    # without --seed the source reads the OS generator
    if seed is None:
        return EntropySource()
    return EntropySource(seed=shake256(b"pqchain cli " + label + seed.to_bytes(8, "big"), 32))


def _hexarg(s: str, length: int | None = None) -> bytes:
    try:
        b = bytes.fromhex(s.removeprefix("0x"))
    except ValueError as exc:
        raise UsageError(f"not hex: {s!r}") from exc
    if length is not None and len(b) != length:
        raise UsageError(f"expected {length} bytes, got {len(b)}")
    return b


def _subject(args, did: str) -> SubjectInfo:
    return SubjectInfo(args.cn, args.org, args.country, did)


def _load_registry(path) -> DidRegistry:
    return DidRegistry.load(_read(path))


# -- entropy ------------------------------------------------------------------

def cmd_entropy(args) -> int:
    service = EntropyService(_seeded(b"entropy", args.seed), EntropyConfig(n_shares=args.shares))
    wire = WireLog()
    link = Link(service, wire, name=f"entropy:{args.node_id}")
    frames = link.deliver_shares(service.begin_bootstrap(args.node_id, 0))
    if args.drop_share:
        frames = frames[:-1]
    local = _seeded(b"entropy-node", args.seed).random_bytes(32)
    session = establish_entropy_session(args.node_id, frames, link, 0, local)
    out = {
        "node_id": args.node_id,
        "session_id": session.session_id.hex(),
        "state": session.state.value,
        "kem": service.config.kem_algorithm,
        "shares": len(frames),
        "wire_frames": len(wire),
        "certified": service.source.certified,
    }
    if args.action == "draw":
        data = request_entropy(session, args.bytes, 0)
        out["bytes"] = data.hex()
        out["source"] = service.source.source_id
        out["wire_leaks_output"] = wire.contains(data)
    _emit(out, args.pretty)
    return 0


# -- certificates ---------------------------------------------------------------

def cmd_cert(args) -> int:
    a = args.action
    if a == "root-init":
        root = LegacyRoot(args.name, EcdsaKeyPair.from_entropy(_seeded(b"root", args.seed).random_bytes(32)))
        write_atomic(args.out, root.to_json())
        _emit({"name": root.name, "public": root.eth.public.hex()}, args.pretty)
    elif a == "ca-init":
        root = LegacyRoot.from_json(_read(args.root))
        src = _seeded(b"ca", args.seed)
        ca = CaKeys(EcdsaKeyPair.from_entropy(src.random_bytes(32)), falcon_keygen(src.random_bytes(48)),
                    {root.name: root.eth.public})
        write_atomic(args.out, ca.to_json())
        if args.registry:
            write_atomic(args.registry, DidRegistry(ca.did).export())
        _emit({"did": ca.did, "falcon_public_len": len(ca.falcon.public)}, args.pretty)
    elif a == "keygen":
        service = EntropyService(_seeded(b"keygen-service", args.seed))
        session = open_session(service, args.node_id, 0, _seeded(b"keygen", args.seed).random_bytes(32))
        keys = NodeKeys.from_session(session)
        write_atomic(args.out, keys.to_json())
        _emit({"did": keys.did, "falcon_public_len": len(keys.falcon.public)}, args.pretty)
    elif a == "legacy":
        root = LegacyRoot.from_json(_read(args.root))
        keys = NodeKeys.from_json(_read(args.keys))
        did = args.did or keys.did
        cert = certs.issue_legacy(root.name, root.eth, _subject(args, did), keys.eth.public, args.not_before, args.not_after)
        write_atomic(args.out, cert.armor())
        _emit({"subject": did, "issuer": root.name}, args.pretty)
    elif a == "csr":
        keys = NodeKeys.from_json(_read(args.keys))
        did = args.did or keys.did
        material, oid = (keys.falcon, FALCON_OID) if args.alg == "falcon" else (keys.eth, ECDSA_SECP256K1_OID)
        csr = certs.build_csr(_subject(args, did), material, oid)
        write_atomic(args.out, csr.armor())
        _emit({"subject": did, "algorithm_oid": oid}, args.pretty)
    elif a == "issue":
        ca_keys = CaKeys.from_json(_read(args.ca))
        registry = _load_registry(args.registry)
        csr_eth = CertSigningRequest.dearmor(_read(args.csr_eth))
        # the request goes into the label so one --seed never repeats a serial
        ca = ca_keys.authority(registry, _seeded(b"issue" + csr_eth.encode(), args.seed))
        issued = ca.issue_certificate(
            LegacyCertificate.dearmor(_read(args.legacy)),
            csr_eth,
            CertSigningRequest.dearmor(_read(args.csr_falcon)),
            args.now,
        )
        write_atomic(args.out, issued.certificate.armor())
        write_atomic(args.registry, registry.export())
        _emit({"did": issued.certificate.did, "serial": issued.certificate.serial.hex(),
               "registered": len(registry)}, args.pretty)
    elif a == "verify":
        cert = PqCertificate.dearmor(_read(args.cert))
        ca_keys = CaKeys.from_json(_read(args.ca))
        v = certs.verify_certificate(cert, ca_keys.falcon.public, args.now)
        _emit({"did": cert.did, "valid": v.ok, "reason": v.reason}, args.pretty)
        if not v:
            raise certs.CertError(v.reason)
    return 0


# -- registry -------------------------------------------------------------------

def cmd_registry(args) -> int:
    registry = _load_registry(args.registry)
    if args.action == "list":
        _emit({"ca": registry.ca_did, "dids": registry.dids(), "state_hash": registry.state_hash().hex()}, args.pretty)
    elif args.action == "resolve":
        rec = registry.resolve(args.did)
        _emit({"did": rec.did, "eth_public_key": rec.eth_public_key.hex(),
               "falcon_public_key": rec.falcon_public_key.hex(), "controller": rec.controller,
               "subject_proof": rec.subject_proof.hex(), "registered_at": rec.registered_at}, args.pretty)
    elif args.action == "controls":
        keys = NodeKeys.from_json(_read(args.keys))
        res = registry.controls(keys.eth.public, args.did)
        _emit({"did": args.did, "controls": res.ok, "reason": res.reason}, args.pretty)
        if not res:
            raise _CodedError(res.reason)
    return 0


# -- tunnel ---------------------------------------------------------------------

def cmd_tunnel(args) -> int:
    ca_keys = CaKeys.from_json(_read(args.ca))
    policy = TrustPolicy(ca_keys.falcon.public)
    a = Identity(PqCertificate.dearmor(_read(args.a_cert)), NodeKeys.from_json(_read(args.a_keys)).falcon)
    b = Identity(PqCertificate.dearmor(_read(args.b_cert)), NodeKeys.from_json(_read(args.b_keys)).falcon)
    wire = WireLog()
    entropy = _seeded(b"tunnel", args.seed).random_bytes(32)
    s_a, s_b = handshake(a, b, policy, policy, entropy, now=args.now, wire=wire)
    msg = args.message.encode()
    record = s_a.seal(msg)
    echoed = s_b.open(record.encode())
    _emit({
        "initiator": a.cert.did, "responder": b.cert.did, "state": s_a.state.value,
        "handshake_frames": len(wire), "record_bytes": len(record.encode()),
        "roundtrip": echoed == msg,
        "keys_on_wire": wire.contains(s_a.send_key) or wire.contains(s_a.recv_key),
    }, args.pretty)
    return 0


# -- transactions ---------------------------------------------------------------

def _verifier(args) -> Verifier:
    return Verifier(_hexarg(args.relay_hub, 20), BACKENDS[args.backend], CHARGING[args.charging])


def cmd_tx(args) -> int:
    a = args.action
    if a == "wrap":
        keys = NodeKeys.from_json(_read(args.keys))
        registry = _load_registry(args.registry) if args.registry else None
        tx = Transaction(args.nonce, args.gas_price, args.gas, _hexarg(args.to) if args.to else b"",
                         args.value, _hexarg(args.data), args.chain_id)
        mtx = sign_outer(sign_inner(tx, keys.eth), keys.did, keys.falcon, _hexarg(args.relay_hub, 20),
                         keys.eth, args.wrapper_nonce, registry)
        write_atomic(args.out, mtx.encode().hex() + "\n")
        _emit({"tx_hash": "0x" + mtx.hash().hex(), "writer_did": mtx.writer_did,
               "bytes": len(mtx.encode())}, args.pretty)
    elif a == "decode":
        mtx = MetaTransaction.decode(_hexarg(_read(args.metatx).strip()))
        inner = mtx.inner.tx
        _emit({
            "tx_hash": "0x" + mtx.hash().hex(), "relay_hub": "0x" + mtx.relay_hub.hex(),
            "writer_did": mtx.writer_did, "falcon_signature_len": len(mtx.falcon_signature),
            "inner": {"nonce": inner.nonce, "gasprice": inner.gasprice, "startgas": inner.startgas,
                      "to": "0x" + inner.to.hex(), "value": inner.value, "data": "0x" + inner.data.hex(),
                      "chain_id": inner.chain_id},
        }, args.pretty)
    elif a == "verify":
        registry = _load_registry(args.registry)
        verifier = _verifier(args)
        decisions = DecisionLog(timings=False)
        rejected = None
        for path in args.metatx:
            mtx = MetaTransaction.decode(_hexarg(_read(path).strip()))
            d = verifier.admit(mtx, registry)
            decisions.append(d, file=str(path))
            _emit(d.to_json(timings=False), args.pretty)
            if not d.admitted and rejected is None:
                rejected = d.reason.value
        if args.log:
            write_atomic(args.log, decisions.text())
        if rejected is not None:
            raise _CodedError(rejected, "transaction rejected")
    elif a == "serve":
        keys = NodeKeys.from_json(_read(args.keys))
        registry = _load_registry(args.registry) if args.registry else None
        signer = RelaySigner(keys.did, keys.eth, keys.falcon, _hexarg(args.relay_hub, 20), args.chain_id, registry)
        if args.socket:
            signer.serve_unix(args.socket)
        else:
            for line in sys.stdin:
                if line.strip():
                    sys.stdout.write(signer.handle_line(line.strip()) + "\n")
                    sys.stdout.flush()
    return 0


# -- simulation -----------------------------------------------------------------

def _config_path(p: str) -> Path:
    path = Path(p)
    root = os.environ.get(CONFIG_ROOT_ENV)
    if root and not path.is_absolute():
        path = Path(root) / path
    return path


def cmd_sim(args) -> int:
    if args.action == "check-chain":
        with open(args.chain, "rb") as fh:
            blocks = decode_chain(fh.read())
        broken = verify_chain(blocks)
        _emit({"blocks": len(blocks), "first_broken": broken,
               "head": "0x" + blocks[-1].block_hash.hex() if blocks else None}, args.pretty)
        if broken is not None:
            raise _CodedError("BrokenLink", f"block {broken}")
        return 0
    if args.config:
        try:
            cfg = ScenarioConfig.load(_config_path(args.config))
        except FileNotFoundError as exc:
            raise UsageError(f"config file not found: {exc.filename}") from exc
    else:
        cfg = ScenarioConfig()
    overrides = list(args.set or [])
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.out:
        overrides.append(f"output_dir={args.out}")
    if overrides:
        cfg = cfg.with_overrides(overrides)
    out_dir = cfg.output_dir or "sim-out"
    sim = spawn_network(cfg)
    summary = run(sim, args.budget)
    paths = write_artifacts(sim, out_dir)
    summary["artifacts"] = [str(Path(out_dir) / p) for p in paths]
    _emit(summary, args.pretty)
    return 0


# -- benchmarks -----------------------------------------------------------------

def cmd_bench(args) -> int:
    gas = {}
    for pair in args.gas or []:
        k, _, v = pair.partition("=")
        try:
            gas[k.strip()] = int(v, 0)
        except ValueError as exc:
            raise UsageError(f"--gas expects field=int, got {pair!r}") from exc
    try:
        model = GasModel(**gas)
    except TypeError as exc:
        raise UsageError(f"unknown gas field in {sorted(gas)}") from exc
    vectors = load_sign_kat(args.kat)
    if args.limit:
        vectors = vectors[:args.limit]
    rows = bench_verify([(v.index, v.message, v.signature, v.public_key()) for v in vectors],
                        BACKENDS[args.backend], CHARGING[args.charging], model)
    text = gas_csv(rows)
    if args.out:
        write_atomic(args.out, text)
    if args.pretty:
        for r in rows:
            print(f"vector {r.vector:>3}  {r.verdict:<9} gas {r.gas:>12,}  raw {r.raw_gas:>9,}  "
                  f"x{r.block_limit_ratio:.2f} of block limit")
    elif not args.out:
        sys.stdout.write(text)
    return 0


# -- parser ---------------------------------------------------------------------

def _subject_flags(p) -> None:
    p.add_argument("--cn", required=True, help="subject common name")
    p.add_argument("--org", default="", help="subject organization")
    p.add_argument("--country", default="", help="subject country code")
    p.add_argument("--did", help="subject DID (default: derived from the ETH key)")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--pretty", action="store_true", help="human-readable output")

    parser = argparse.ArgumentParser(prog="pqchain", description=__doc__.split("\n\n")[0],
                                     parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)

    # entropy
    p = sub.add_parser("entropy", help="entropy-service bootstrap and requests", parents=[common])
    esub = p.add_subparsers(dest="action", required=True)
    for name, hlp in (("bootstrap", "run the split-key bootstrap and report the session"),
                      ("draw", "bootstrap, then request entropy over the session")):
        q = esub.add_parser(name, help=hlp, parents=[common])
        q.add_argument("--node-id", default="node-0")
        q.add_argument("--seed", type=int, help="replayable simulated source (default: OS generator)")
        q.add_argument("--shares", type=int, default=3, help="bootstrap shares (>= 2)")
        q.add_argument("--drop-share", action="store_true", help="withhold one share (expect MissingShare)")
        if name == "draw":
            q.add_argument("--bytes", type=int, default=32)
    p.set_defaults(func=cmd_entropy)

    # cert
    p = sub.add_parser("cert", help="keys, CSRs and post-quantum certificates", parents=[common])
    csub = p.add_subparsers(dest="action", required=True)
    q = csub.add_parser("root-init", help="create a legacy root key", parents=[common])
    q.add_argument("--name", default="Legacy Root CA")
    q.add_argument("--seed", type=int)
    q.add_argument("--out", required=True)
    q = csub.add_parser("ca-init", help="create CA keys trusting a legacy root", parents=[common])
    q.add_argument("--root", required=True, help="legacy root key file")
    q.add_argument("--seed", type=int)
    q.add_argument("--out", required=True)
    q.add_argument("--registry", help="also write an empty DID registry file here")
    q = csub.add_parser("keygen", help="node ECDSA + Falcon-512 keys from an entropy session", parents=[common])
    q.add_argument("--node-id", default="node-0")
    q.add_argument("--seed", type=int)
    q.add_argument("--out", required=True)
    q = csub.add_parser("legacy", help="issue a legacy certificate from the root", parents=[common])
    q.add_argument("--root", required=True)
    q.add_argument("--keys", required=True)
    q.add_argument("--not-before", type=int, default=0)
    q.add_argument("--not-after", type=int, default=1 << 40)
    q.add_argument("--out", required=True)
    _subject_flags(q)
    q = csub.add_parser("csr", help="build a self-signed CSR", parents=[common])
    q.add_argument("--keys", required=True)
    q.add_argument("--alg", choices=("ecdsa", "falcon"), required=True)
    q.add_argument("--out", required=True)
    _subject_flags(q)
    q = csub.add_parser("issue", help="CA issuance: check legacy cert and CSRs, sign, register DID", parents=[common])
    q.add_argument("--ca", required=True)
    q.add_argument("--registry", required=True, help="registry file (updated in place)")
    q.add_argument("--legacy", required=True)
    q.add_argument("--csr-eth", required=True)
    q.add_argument("--csr-falcon", required=True)
    q.add_argument("--now", type=int, default=1)
    q.add_argument("--seed", type=int, help="seed for serial and salt")
    q.add_argument("--out", required=True)
    q = csub.add_parser("verify", help="check a certificate against the CA key", parents=[common])
    q.add_argument("--cert", required=True)
    q.add_argument("--ca", required=True)
    q.add_argument("--now", type=int, default=1)
    p.set_defaults(func=cmd_cert)

    # registry
    p = sub.add_parser("registry", help="DID registry queries", parents=[common])
    rsub = p.add_subparsers(dest="action", required=True)
    q = rsub.add_parser("list", parents=[common])
    q.add_argument("--registry", required=True)
    q = rsub.add_parser("resolve", parents=[common])
    q.add_argument("--registry", required=True)
    q.add_argument("--did", required=True)
    q = rsub.add_parser("controls", help="does this ETH key control the DID", parents=[common])
    q.add_argument("--registry", required=True)
    q.add_argument("--did", required=True)
    q.add_argument("--keys", required=True)
    p.set_defaults(func=cmd_registry)

    # tunnel
    p = sub.add_parser("tunnel", help="post-quantum tunnel handshake", parents=[common])
    tsub = p.add_subparsers(dest="action", required=True)
    q = tsub.add_parser("handshake", help="in-memory handshake between two certified nodes", parents=[common])
    q.add_argument("--ca", required=True)
    q.add_argument("--a-keys", required=True)
    q.add_argument("--a-cert", required=True)
    q.add_argument("--b-keys", required=True)
    q.add_argument("--b-cert", required=True)
    q.add_argument("--message", default="ping")
    q.add_argument("--now", type=int, default=1)
    q.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_tunnel)

    # tx
    p = sub.add_parser("tx", help="meta-transactions and the relay signer", parents=[common])
    xsub = p.add_subparsers(dest="action", required=True)
    q = xsub.add_parser("wrap", help="sign an inner tx and wrap it for the relay hub", parents=[common])
    q.add_argument("--keys", required=True)
    q.add_argument("--relay-hub", required=True, help="20-byte hex address")
    q.add_argument("--registry", help="check the writer's DID record first")
    q.add_argument("--to", default="")
    q.add_argument("--value", type=int, default=0)
    q.add_argument("--data", default="")
    q.add_argument("--nonce", type=int, default=0)
    q.add_argument("--gas-price", type=int, default=0)
    q.add_argument("--gas", type=int, default=21000)
    q.add_argument("--chain-id", type=int, default=648529)
    q.add_argument("--wrapper-nonce", type=int, default=0)
    q.add_argument("--out", required=True)
    q = xsub.add_parser("decode", parents=[common])
    q.add_argument("--metatx", required=True)
    q = xsub.add_parser("verify", help="run the admission pipeline on meta-transaction files", parents=[common])
    q.add_argument("metatx", nargs="+")
    q.add_argument("--registry", required=True)
    q.add_argument("--relay-hub", required=True)
    q.add_argument("--backend", choices=sorted(BACKENDS), default="native")
    q.add_argument("--charging", choices=sorted(CHARGING), default="flat")
    q.add_argument("--log", help="write the decision log (JSONL)")
    q = xsub.add_parser("serve", help="JSON-RPC relay signer (stdin/stdout or a unix socket)", parents=[common])
    q.add_argument("--keys", required=True)
    q.add_argument("--relay-hub", required=True)
    q.add_argument("--registry")
    q.add_argument("--chain-id", type=int, default=648529)
    q.add_argument("--socket", help="unix socket path; default is newline-delimited stdio")
    p.set_defaults(func=cmd_tx)

    # sim
    p = sub.add_parser("sim", help="network simulation", parents=[common])
    ssub = p.add_subparsers(dest="action", required=True)
    q = ssub.add_parser("run", help="run a scenario and write metrics, logs and the chain", parents=[common])
    q.add_argument("--config", help=f"scenario file (relative paths resolve against ${CONFIG_ROOT_ENV})")
    q.add_argument("--seed", type=int)
    q.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
    q.add_argument("--budget", type=int, help="event budget (default: from config)")
    q.add_argument("--out", help="output directory (default: config output_dir or ./sim-out)")
    q = ssub.add_parser("check-chain", help="verify links in a chain snapshot", parents=[common])
    q.add_argument("--chain", required=True)
    p.set_defaults(func=cmd_sim)

    # bench
    p = sub.add_parser("bench", help="verification gas reports", parents=[common])
    bsub = p.add_subparsers(dest="action", required=True)
    q = bsub.add_parser("verify", help="gas per Falcon-512 KAT verification", parents=[common])
    q.add_argument("--kat", required=True)
    q.add_argument("--backend", choices=sorted(BACKENDS), default="metered")
    q.add_argument("--charging", choices=sorted(CHARGING), default="flat")
    q.add_argument("--gas", action="append", metavar="FIELD=INT", help="gas-model override")
    q.add_argument("--limit", type=int, help="only the first N vectors")
    q.add_argument("--out", help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        code = getattr(exc, "code", "UsageError")
        print(f"error: {code}: {getattr(exc, 'message', exc)}", file=sys.stderr)
        return 2
    except PqError as exc:
        print(f"error: {exc.code}: {exc.message}", file=sys.stderr)
        return 1
    except tlv.TlvError as exc:
        print(f"error: Malformed: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: IoError: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: Malformed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
