"""Type-length-value primitives shared by every wire format in the package.

Type is a 2-byte big-endian integer.  Length uses a 1/3/5-byte form: values
below 253 take one byte, 253 introduces a 2-byte big-endian length and 254 a
4-byte one.  Only the shortest form is accepted when decoding so that every
decodable byte string has exactly one encoding.
"""

from __future__ import annotations

import struct
from typing import Iterator

# names
T_NAME = 0x0001
T_COMP = 0x0002

# packets
T_INTEREST = 0x0010
T_DATA = 0x0011
T_SCOPE = 0x0012
T_EXCL = 0x0013
T_NONCE = 0x0014
T_PAYLOAD = 0x0020
T_SIG = 0x0021
T_SIGNER = 0x0022
T_KEYLOC = 0x0023
T_FRESH = 0x0024

# layered interest payload
T_CIPHERTEXT = 0x0030

# keys and certificates
T_PUBKEY = 0x0040
T_CERT = 0x0041
T_NOT_AFTER = 0x0042

# directory descriptors
T_DESCRIPTOR = 0x0050
T_ORG = 0x0051
T_FPR = 0x0052
T_BANDWIDTH = 0x0053
T_LOAD = 0x0054
T_UPTIME = 0x0055

# createsession handshake
T_MODE = 0x0060
T_CLIENT_VALUE = 0x0061
T_WRAPPED_KEY = 0x0062
T_SID = 0x0063
T_AR_VALUE = 0x0064
T_ERROR = 0x0065


class TLVError(ValueError):
    """Raised for any structurally invalid TLV input."""


def encode_length(n: int) -> bytes:
    if n < 0:
        raise TLVError("negative length")
    if n < 253:
        return bytes([n])
    if n <= 0xFFFF:
        return b"\xfd" + n.to_bytes(2, "big")
    if n <= 0xFFFFFFFF:
        return b"\xfe" + n.to_bytes(4, "big")
    raise TLVError("length too large")


def encode(tlv_type: int, value: bytes) -> bytes:
    return struct.pack(">H", tlv_type) + encode_length(len(value)) + bytes(value)


def read(buf: bytes, offset: int = 0) -> tuple[int, bytes, int]:
    """Read one element at ``offset``; return ``(type, value, next_offset)``."""
    if offset + 3 > len(buf):
        raise TLVError("truncated header")
    tlv_type = (buf[offset] << 8) | buf[offset + 1]
    first = buf[offset + 2]
    pos = offset + 3
    if first < 253:
        length = first
    elif first == 253:
        if pos + 2 > len(buf):
            raise TLVError("truncated length")
        length = int.from_bytes(buf[pos:pos + 2], "big")
        pos += 2
        if length < 253:
            raise TLVError("non-minimal length")
    elif first == 254:
        if pos + 4 > len(buf):
            raise TLVError("truncated length")
        length = int.from_bytes(buf[pos:pos + 4], "big")
        pos += 4
        if length <= 0xFFFF:
            raise TLVError("non-minimal length")
    else:
        raise TLVError("reserved length marker")
    end = pos + length
    if end > len(buf):
        raise TLVError("truncated value")
    return tlv_type, bytes(buf[pos:end]), end


def iterate(buf: bytes) -> Iterator[tuple[int, bytes]]:
    offset = 0
    while offset < len(buf):
        tlv_type, value, offset = read(buf, offset)
        yield tlv_type, value


def read_exact(buf: bytes, expected_type: int) -> bytes:
    """Decode a buffer holding exactly one element of ``expected_type``."""
    tlv_type, value, end = read(buf, 0)
    if tlv_type != expected_type:
        raise TLVError(f"expected type {expected_type:#06x}, got {tlv_type:#06x}")
    if end != len(buf):
        raise TLVError("trailing bytes")
    return value


def encode_uint(value: int, width: int) -> bytes:
    return value.to_bytes(width, "big")


def decode_uint(value: bytes, width: int) -> int:
    if len(value) != width:
        raise TLVError(f"expected {width}-byte integer")
    return int.from_bytes(value, "big")
