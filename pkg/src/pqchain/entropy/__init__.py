"""Simulated certified-entropy service and the split-key bootstrap protocol."""

from .bootstrap import BootstrapShare, recompose_bootstrap_key, split_bootstrap_key
from .errors import (
    AuthFailure,
    ConfirmationMismatch,
    CounterExhausted,
    EntropyError,
    Expired,
    MissingShare,
    MixedSession,
    ReplayDetected,
    ReusedKey,
    SessionNotEstablished,
    Timeout,
)
from .session import (
    EntropyConfig,
    EntropyService,
    EntropySession,
    Link,
    SessionState,
    accept_response,
    establish_entropy_session,
    open_session,
    request_entropy,
)
from .source import EntropyBlock, EntropySource


def generate_entropy(source: EntropySource, n: int) -> EntropyBlock:
    return source.generate(n)


__all__ = [
    "AuthFailure", "BootstrapShare", "ConfirmationMismatch", "CounterExhausted", "EntropyBlock",
    "EntropyConfig", "EntropyError", "EntropyService", "EntropySession", "EntropySource", "Expired",
    "Link", "MissingShare", "MixedSession", "ReplayDetected", "ReusedKey", "SessionNotEstablished",
    "SessionState", "Timeout", "accept_response", "establish_entropy_session", "generate_entropy", "open_session",
    "recompose_bootstrap_key", "request_entropy", "split_bootstrap_key",
]
