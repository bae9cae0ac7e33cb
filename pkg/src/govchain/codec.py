"""Canonical byte serialization, SHA-256 digests and simulated signatures.

Encoding rules: fields are written in declaration order, integers as 8-byte
big-endian, strings and byte strings length-prefixed (8-byte length), and
sequences as an 8-byte count followed by each encoded element.
"""

from __future__ import annotations

import hashlib
import hmac
from typing import Iterable

ZERO_DIGEST = bytes(32)


def _encode_into(out: bytearray, value) -> None:
    if isinstance(value, bool):
        out += int(value).to_bytes(8, "big")
    elif isinstance(value, int):
        if value < 0:
            raise ValueError(f"cannot encode negative integer {value}")
        out += value.to_bytes(8, "big")
    elif isinstance(value, str):
        raw = value.encode("utf-8")
        out += len(raw).to_bytes(8, "big")
        out += raw
    elif isinstance(value, (bytes, bytearray)):
        out += len(value).to_bytes(8, "big")
        out += value
    elif isinstance(value, (list, tuple)):
        out += len(value).to_bytes(8, "big")
        for item in value:
            _encode_into(out, item)
    elif value is None:
        out += (0).to_bytes(8, "big")
    else:
        raise TypeError(f"cannot encode {type(value).__name__}")


def encode(*fields) -> bytes:
    out = bytearray()
    for field in fields:
        _encode_into(out, field)
    return bytes(out)


def digest(*fields) -> bytes:
    return hashlib.sha256(encode(*fields)).digest()


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


class KeyRing:
    """Holds every identity's secret and verifies tags on their behalf.

    A tag is ``sha256(secret || data)``. Secrets are derived from the run seed,
    so a trace header carrying the seed is enough to re-verify a run offline.
    Nodes only ever receive a :class:`Signer` bound to their own identity.
    """

    def __init__(self, seed: int, identities: Iterable[str] = ()):
        self.seed = seed
        self._secrets: dict[str, bytes] = {}
        for ident in identities:
            self.register(ident)

    def register(self, ident: str) -> None:
        if ident not in self._secrets:
            self._secrets[ident] = digest("secret", self.seed, ident)

    def __contains__(self, ident: str) -> bool:
        return ident in self._secrets

    def sign(self, ident: str, data: bytes) -> bytes:
        return sha256(self._secrets[ident] + data)

    def verify(self, ident: str, data: bytes, tag: bytes) -> bool:
        secret = self._secrets.get(ident)
        if secret is None:
            return False
        return hmac.compare_digest(sha256(secret + data), tag)

    def signer(self, ident: str) -> "Signer":
        self.register(ident)
        return Signer(ident, self._secrets[ident])


class Signer:
    __slots__ = ("ident", "_secret")

    def __init__(self, ident: str, secret: bytes):
        self.ident = ident
        self._secret = secret

    def __call__(self, data: bytes) -> bytes:
        return sha256(self._secret + data)
