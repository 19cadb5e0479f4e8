"""Scenario configuration and its key-value text format.

One ``key = value`` per line, ``#`` starts a comment. Lists are
comma-separated, booleans are ``true``/``false``. Gas-model overrides use
``gas.<field> = <int>``. Unknown keys are an error.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields

from ..errors import PqError
from ..metatx import TX_FIELDS
from ..pipeline import Backend, Charging, GasModel

SCENARIOS = ("TamperInFlight", "ForgeFalcon", "ReplayMetatx", "StolenEcdsaKeys", "RogueEntryPoint")
FORGE_VARIANTS = ("auto", "tamper", "random", "foreign", "transplant", "proposal")
BACKENDS = {"metered": Backend.METERED, "native": Backend.NATIVE}
CHARGING = {"flat": Charging.OPCODE_FLAT, "precompile": Charging.PRECOMPILE_TABLE}
_FIXED_GAS = ("block_gas_limit", "code_size_limit")


class ConfigError(PqError):
    code = "ConfigError"


def _bool(s: str) -> bool:
    if s.lower() in ("true", "yes", "1"):
        return True
    if s.lower() in ("false", "no", "0"):
        return False
    raise ConfigError(f"not a boolean: {s!r}")


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int = 0
    provision_seed: int | None = None  # identities and tunnels; defaults to seed
    writers: int = 1
    validators: int = 4
    observers: int = 1
    tx_count: int = 10
    tx_interval: int = 1
    block_interval: int = 4
    max_block_txs: int = 64
    latency: int = 1
    event_budget: int = 1_000_000
    adversaries: tuple[str, ...] = ()
    forge_variant: str = "auto"
    tamper_field: str = "auto"
    tamper_flips: int = 2
    backend: str = "native"
    charging: str = "flat"
    pq_block_signatures: bool = False
    chain_id: int = 648529
    gas: tuple[tuple[str, int], ...] = ()
    output_dir: str | None = None

    def __post_init__(self):
        for name in ("writers", "observers", "tx_count", "tamper_flips"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if self.validators < 1:
            raise ConfigError("at least one validator is required (threshold needs V >= 1)")
        if self.tx_count and not self.writers:
            raise ConfigError("transactions need at least one writer")
        for name in ("tx_interval", "block_interval", "max_block_txs", "latency", "event_budget"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.latency >= self.block_interval:
            raise ConfigError("latency must be shorter than the block interval")
        if not 0 <= self.seed < 1 << 64:
            raise ConfigError("seed must fit in u64")
        for a in self.adversaries:
            if a not in SCENARIOS:
                raise ConfigError(f"unknown adversary scenario {a!r}")
        if self.forge_variant not in FORGE_VARIANTS:
            raise ConfigError(f"unknown forge_variant {self.forge_variant!r}")
        if self.tamper_field != "auto" and self.tamper_field not in TX_FIELDS:
            raise ConfigError(f"unknown tamper_field {self.tamper_field!r}")
        if self.backend not in BACKENDS:
            raise ConfigError(f"backend must be one of {sorted(BACKENDS)}")
        if self.charging not in CHARGING:
            raise ConfigError(f"charging must be one of {sorted(CHARGING)}")
        known = {f.name for f in fields(GasModel)}
        for k, _ in self.gas:
            if k not in known:
                raise ConfigError(f"unknown gas field {k!r}")
            if k in _FIXED_GAS:
                raise ConfigError(f"{k} is fixed and cannot be overridden")
        try:
            self.gas_model()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def effective_provision_seed(self) -> int:
        return self.seed if self.provision_seed is None else self.provision_seed

    def gas_model(self) -> GasModel:
        return GasModel(**dict(self.gas))

    def replace(self, **changes) -> ScenarioConfig:
        return dataclasses.replace(self, **changes)

    # -- text format ---------------------------------------------------------

    @classmethod
    def from_text(cls, text: str) -> ScenarioConfig:
        kinds = {f.name: f for f in fields(cls)}
        values: dict = {}
        gas = []
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected key = value")
            key, val = (x.strip() for x in line.split("=", 1))
            if key.startswith("gas."):
                try:
                    gas.append((key[4:], int(val)))
                except ValueError as exc:
                    raise ConfigError(f"line {lineno}: {key} must be an integer") from exc
                continue
            if key not in kinds or key == "gas":
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            if key in values:
                raise ConfigError(f"line {lineno}: duplicate key {key!r}")
            values[key] = cls._parse_value(key, val, lineno)
        if gas:
            values["gas"] = tuple(gas)
        return cls(**values)

    @staticmethod
    def _parse_value(key: str, val: str, lineno: int):
        try:
            if key == "adversaries":
                return tuple(x.strip() for x in val.split(",") if x.strip())
            if key == "pq_block_signatures":
                return _bool(val)
            if key in ("forge_variant", "tamper_field", "backend", "charging"):
                return val
            if key == "output_dir":
                return val or None
            if key == "provision_seed":
                return None if val in ("", "none") else int(val, 0)
            return int(val, 0)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {val!r}") from exc

    @classmethod
    def load(cls, path) -> ScenarioConfig:
        with open(path, encoding="utf-8") as fh:
            return cls.from_text(fh.read())

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "gas":
                lines += [f"gas.{k} = {n}" for k, n in v]
                continue
            if v is None:
                continue
            if isinstance(v, bool):
                v = "true" if v else "false"
            elif isinstance(v, tuple):
                v = ",".join(v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"

    def with_overrides(self, pairs) -> ScenarioConfig:
        """Apply ``key=value`` strings on top of this config (same syntax as the file)."""
        lines = {}
        for line in self.to_text().splitlines():
            lines[line.split("=", 1)[0].strip()] = line
        for pair in pairs:
            if "=" not in pair:
                raise ConfigError(f"override {pair!r} is not key=value")
            key, val = (x.strip() for x in pair.split("=", 1))
            lines[key] = f"{key} = {val}"
        return self.from_text("\n".join(lines.values()))
