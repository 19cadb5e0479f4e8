"""Cryptographic primitives shared by every protocol layer."""

from .aead import TagInvalid, counter_nonce, open_, seal
from .falcon import (
    FalconKeyPair,
    FalconSignature,
    Outcome,
    falcon_keygen,
    falcon_sign,
    falcon_verify,
    falcon_verify_metered,
)
from .hashing import DIGEST_LEN, ShakeStream, keccak256, mac, shake256
from .kem import (
    DEFAULT_KEM,
    KemCiphertext,
    KemError,
    KemKeyPair,
    kem_decap,
    kem_encap,
    kem_keygen,
)
from .secp256k1 import (
    EcdsaKeyPair,
    EcdsaSignature,
    RecoveryError,
    derive_address,
    ecdsa_recover,
    ecdsa_sign,
    ecdsa_verify,
    ecdsa_verify_fast,
)

__all__ = [
    "DEFAULT_KEM",
    "DIGEST_LEN",
    "EcdsaKeyPair",
    "EcdsaSignature",
    "FalconKeyPair",
    "FalconSignature",
    "KemCiphertext",
    "KemError",
    "KemKeyPair",
    "Outcome",
    "RecoveryError",
    "ShakeStream",
    "TagInvalid",
    "counter_nonce",
    "derive_address",
    "ecdsa_recover",
    "ecdsa_sign",
    "ecdsa_verify",
    "ecdsa_verify_fast",
    "falcon_keygen",
    "falcon_sign",
    "falcon_verify",
    "falcon_verify_metered",
    "keccak256",
    "kem_decap",
    "kem_encap",
    "kem_keygen",
    "mac",
    "open_",
    "seal",
    "shake256",
]
