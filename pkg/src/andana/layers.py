"""Plaintext framing of one encryption layer of an anonymized interest.

Entry layer:  NAME(next prefix) || CIPHERTEXT || KEY(16) || TIMESTAMP(8) || PAD
Exit layer:   INTEREST(original) || KEY(16) || TIMESTAMP(8) || PAD

PAD is zero bytes up to the next multiple of ``PAD_BLOCK``.  The leading
element type tells an AR whether another encrypted layer follows.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import names, packets, tlv
from .crypto import SYM_KEY_LEN, SymmetricKey
from .names import Name
from .packets import Interest

PAD_BLOCK = 256
TIMESTAMP_LEN = 8
MAX_LAYER_PLAINTEXT = 16 * 1024


class MalformedLayer(ValueError):
    pass


@dataclass(frozen=True)
class Layer:
    key: SymmetricKey
    timestamp: int  # ms
    next_prefix: Name | None = None
    ciphertext: bytes | None = None
    interest: Interest | None = None

    @property
    def is_exit(self) -> bool:
        return self.interest is not None

    def next_interest(self) -> Interest:
        """The interest this layer tells the AR to send upstream."""
        if self.interest is not None:
            return self.interest
        return Interest(names.append(self.next_prefix, self.ciphertext))


def pad(buf: bytes, block: int = PAD_BLOCK) -> bytes:
    return buf + b"\x00" * (-len(buf) % block)


def encode_entry(next_prefix: Name, ciphertext: bytes, key: SymmetricKey,
                 timestamp: int) -> bytes:
    body = (names.encode(next_prefix) + tlv.encode(tlv.T_CIPHERTEXT, ciphertext)
            + key.key + tlv.encode_uint(timestamp, TIMESTAMP_LEN))
    return pad(body)


def encode_exit(interest: Interest, key: SymmetricKey, timestamp: int) -> bytes:
    body = packets.encode_interest(interest) + key.key + tlv.encode_uint(timestamp, TIMESTAMP_LEN)
    return pad(body)


def decode(buf: bytes) -> Layer:
    try:
        t, value, pos = tlv.read(buf, 0)
        if t == tlv.T_NAME:
            next_prefix = names.decode_value(value)
            t2, ciphertext, pos = tlv.read(buf, pos)
            if t2 != tlv.T_CIPHERTEXT:
                raise MalformedLayer("entry layer without ciphertext")
            interest = None
        elif t == tlv.T_INTEREST:
            interest = packets.decode_interest(buf[:pos])
            next_prefix = ciphertext = None
        else:
            raise MalformedLayer(f"unexpected leading type {t:#06x}")
    except (tlv.TLVError, names.MalformedName, packets.MalformedPacket) as exc:
        raise MalformedLayer(str(exc)) from exc
    tail = buf[pos:]
    if len(tail) < SYM_KEY_LEN + TIMESTAMP_LEN or any(tail[SYM_KEY_LEN + TIMESTAMP_LEN:]):
        raise MalformedLayer("bad key/timestamp/padding")
    key = SymmetricKey(tail[:SYM_KEY_LEN])
    ts = int.from_bytes(tail[SYM_KEY_LEN:SYM_KEY_LEN + TIMESTAMP_LEN], "big")
    return Layer(key, ts, next_prefix, ciphertext, interest)
