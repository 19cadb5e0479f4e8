"""Base error type. Every domain error carries a stable ``code`` string."""

from __future__ import annotations


class PqError(Exception):
    code = "Error"

    def __init__(self, message: str = ""):
        self.message = message
        super().__init__(f"{self.code}: {message}" if message else self.code)
