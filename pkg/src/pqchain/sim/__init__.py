"""Multi-node simulation: provisioning, consensus, adversaries."""

from .adversary import Adversary, inject_adversary, make_adversary
from .chain import (
    Block,
    BrokenLink,
    ChainError,
    InsufficientSignatures,
    InvalidTransactionInBlock,
    build_block,
    check_block_signatures,
    decode_chain,
    encode_chain,
    threshold,
    verify_chain,
)
from .config import SCENARIOS, ConfigError, ScenarioConfig
from .network import MsgKind, SimNode, Simulation, run, spawn_network, write_artifacts
from .provision import Role, provision

__all__ = [
    "SCENARIOS",
    "Adversary",
    "Block",
    "BrokenLink",
    "ChainError",
    "ConfigError",
    "InsufficientSignatures",
    "InvalidTransactionInBlock",
    "MsgKind",
    "Role",
    "ScenarioConfig",
    "SimNode",
    "Simulation",
    "build_block",
    "check_block_signatures",
    "decode_chain",
    "encode_chain",
    "inject_adversary",
    "make_adversary",
    "provision",
    "run",
    "spawn_network",
    "threshold",
    "verify_chain",
    "write_artifacts",
]
