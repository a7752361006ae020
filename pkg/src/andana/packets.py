"""Interest and Data packets: TLV codec plus the Data signature envelope."""

from __future__ import annotations

import random
from dataclasses import dataclass, replace
from functools import cached_property

from . import crypto, names, tlv
from .names import Name

DEFAULT_FRESHNESS_MS = 4000
SIGNER_ID_LEN = 32


class MalformedPacket(ValueError):
    pass


@dataclass(frozen=True)
class Interest:
    name: Name
    scope: int | None = None
    exclusion_filter: bytes | None = None
    nonce: bytes | None = None

    def __post_init__(self):
        if self.scope is not None and not 0 <= self.scope <= 255:
            raise ValueError("scope must fit in one byte")

    def encode(self) -> bytes:
        return encode_interest(self)

    @cached_property
    def wire_size(self) -> int:
        return len(encode_interest(self))


@dataclass(frozen=True)
class Data:
    name: Name
    payload: bytes
    signer_id: bytes
    key_locator: Name
    signature: bytes
    freshness: int = DEFAULT_FRESHNESS_MS

    def encode(self) -> bytes:
        return encode_data(self)

    @cached_property
    def wire_size(self) -> int:
        return len(encode_data(self))

    def satisfies(self, interest: Interest) -> bool:
        return names.is_prefix_of(interest.name, self.name)


def encode_interest(i: Interest) -> bytes:
    body = names.encode(i.name)
    if i.scope is not None:
        body += tlv.encode(tlv.T_SCOPE, bytes([i.scope]))
    if i.exclusion_filter is not None:
        body += tlv.encode(tlv.T_EXCL, i.exclusion_filter)
    if i.nonce is not None:
        body += tlv.encode(tlv.T_NONCE, i.nonce)
    return tlv.encode(tlv.T_INTEREST, body)


def _fields(body: bytes, order: list[int], required: set[int]) -> dict[int, bytes]:
    """Parse elements of ``body`` that must appear in ``order`` at most once."""
    found: dict[int, bytes] = {}
    pos = 0
    for t, v in tlv.iterate(body):
        while pos < len(order) and order[pos] != t:
            pos += 1
        if pos == len(order):
            raise MalformedPacket(f"unexpected or out-of-order type {t:#06x}")
        found[t] = v
        pos += 1
    missing = required - found.keys()
    if missing:
        raise MalformedPacket(f"missing fields {sorted(missing)}")
    return found


def decode_interest(buf: bytes) -> Interest:
    try:
        body = tlv.read_exact(buf, tlv.T_INTEREST)
        f = _fields(body, [tlv.T_NAME, tlv.T_SCOPE, tlv.T_EXCL, tlv.T_NONCE], {tlv.T_NAME})
        name = names.decode_value(f[tlv.T_NAME])
    except (tlv.TLVError, names.MalformedName) as exc:
        raise MalformedPacket(str(exc)) from exc
    scope = None
    if tlv.T_SCOPE in f:
        if len(f[tlv.T_SCOPE]) != 1:
            raise MalformedPacket("scope must be one byte")
        scope = f[tlv.T_SCOPE][0]
    return Interest(name, scope, f.get(tlv.T_EXCL), f.get(tlv.T_NONCE))


def signed_portion(name: Name, payload: bytes, signer_id: bytes,
                   key_locator: Name, freshness: int) -> bytes:
    """Bytes covered by the Data signature."""
    return (
        names.encode(name)
        + tlv.encode(tlv.T_PAYLOAD, payload)
        + tlv.encode(tlv.T_SIGNER, signer_id)
        + tlv.encode(tlv.T_KEYLOC, names.encode(key_locator))
        + tlv.encode(tlv.T_FRESH, tlv.encode_uint(freshness, 4))
    )


def encode_data(d: Data) -> bytes:
    body = signed_portion(d.name, d.payload, d.signer_id, d.key_locator, d.freshness)
    body += tlv.encode(tlv.T_SIG, d.signature)
    return tlv.encode(tlv.T_DATA, body)


_DATA_ORDER = [tlv.T_NAME, tlv.T_PAYLOAD, tlv.T_SIGNER, tlv.T_KEYLOC, tlv.T_FRESH, tlv.T_SIG]


def decode_data(buf: bytes) -> Data:
    try:
        body = tlv.read_exact(buf, tlv.T_DATA)
        f = _fields(body, _DATA_ORDER, set(_DATA_ORDER))
        name = names.decode_value(f[tlv.T_NAME])
        key_locator = names.decode(f[tlv.T_KEYLOC])
        freshness = tlv.decode_uint(f[tlv.T_FRESH], 4)
    except (tlv.TLVError, names.MalformedName) as exc:
        raise MalformedPacket(str(exc)) from exc
    if len(f[tlv.T_SIGNER]) != SIGNER_ID_LEN:
        raise MalformedPacket("signer id must be 32 bytes")
    return Data(name, f[tlv.T_PAYLOAD], f[tlv.T_SIGNER], key_locator,
                f[tlv.T_SIG], freshness)


def decode_packet(buf: bytes) -> Interest | Data:
    if len(buf) >= 2 and buf[:2] == tlv.T_INTEREST.to_bytes(2, "big"):
        return decode_interest(buf)
    if len(buf) >= 2 and buf[:2] == tlv.T_DATA.to_bytes(2, "big"):
        return decode_data(buf)
    raise MalformedPacket("unknown packet type")


def sign_data(
    name: Name,
    payload: bytes,
    signing_key: crypto.KeyPair,
    key_locator: Name | None = None,
    freshness: int = DEFAULT_FRESHNESS_MS,
    rng: random.Random | None = None,
) -> Data:
    signer_id = crypto.fingerprint(signing_key.pk)
    key_locator = key_locator if key_locator is not None else Name()
    sig = crypto.sign(signing_key.sk,
                      signed_portion(name, payload, signer_id, key_locator, freshness), rng)
    return Data(name, payload, signer_id, key_locator, sig, freshness)


def verify_data(d: Data, pk: crypto.PublicKey) -> bool:
    if d.signer_id != crypto.fingerprint(pk):
        return False
    message = signed_portion(d.name, d.payload, d.signer_id, d.key_locator, d.freshness)
    return crypto.verify(pk, message, d.signature)


def resign(d: Data, signing_key: crypto.KeyPair, rng: random.Random | None = None) -> Data:
    """Replace the signature (and signer) of ``d`` with ``signing_key``'s."""
    fresh = sign_data(d.name, d.payload, signing_key, d.key_locator, d.freshness, rng)
    return replace(d, signer_id=fresh.signer_id, signature=fresh.signature)
