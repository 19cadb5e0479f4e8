from ..errors import PqError


class EntropyError(PqError):
    code = "EntropyError"


class MissingShare(EntropyError):
    code = "MissingShare"


class Expired(EntropyError):
    code = "Expired"


class MixedSession(EntropyError):
    code = "MixedSession"


class ReusedKey(EntropyError):
    code = "ReusedKey"


class AuthFailure(EntropyError):
    code = "AuthFailure"


class Timeout(EntropyError):
    code = "Timeout"


class ConfirmationMismatch(EntropyError):
    code = "ConfirmationMismatch"


class ReplayDetected(EntropyError):
    code = "ReplayDetected"


class SessionNotEstablished(EntropyError):
    code = "SessionNotEstablished"


class CounterExhausted(EntropyError):
    code = "CounterExhausted"


BY_CODE = {
    cls.code: cls
    for cls in (
        EntropyError, MissingShare, Expired, MixedSession, ReusedKey, AuthFailure, Timeout,
        ConfirmationMismatch, ReplayDetected, SessionNotEstablished, CounterExhausted,
    )
}
