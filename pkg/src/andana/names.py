"""Hierarchical NDN names."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Iterable, Union

from . import tlv

MAX_COMPONENTS = 64
MAX_COMPONENT_LEN = 65535

_UNRESERVED = frozenset(
    b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789-._~"
)
_HEX = frozenset(b"0123456789abcdefABCDEF")


class MalformedName(ValueError):
    pass


class NameTooLong(ValueError):
    pass


Component = Union[bytes, str]


def _component(c: Component) -> bytes:
    if isinstance(c, str):
        c = c.encode()
    c = bytes(c)
    if len(c) > MAX_COMPONENT_LEN:
        raise NameTooLong(f"component of {len(c)} bytes exceeds {MAX_COMPONENT_LEN}")
    return c


@dataclass(frozen=True, order=True)
class Name:
    """An ordered sequence of opaque byte-string components.

    Instances are immutable and hashable, so they can key PIT and content
    store tables directly.
    """

    components: tuple[bytes, ...] = ()

    def __post_init__(self):
        comps = tuple(_component(c) for c in self.components)
        if len(comps) > MAX_COMPONENTS:
            raise NameTooLong(f"{len(comps)} components exceeds {MAX_COMPONENTS}")
        object.__setattr__(self, "components", comps)

    @classmethod
    def of(cls, *components: Component) -> "Name":
        return cls(tuple(components))

    def __len__(self) -> int:
        return len(self.components)

    def __getitem__(self, item):
        if isinstance(item, slice):
            return Name(self.components[item])
        return self.components[item]

    def __iter__(self):
        return iter(self.components)

    def __truediv__(self, component: Component) -> "Name":
        return append(self, component)

    def __add__(self, other: "Name") -> "Name":
        return Name(self.components + tuple(other.components))

    def __str__(self) -> str:
        return self.to_uri()

    def __repr__(self) -> str:
        return f"Name({self.to_uri()!r})"

    def is_prefix_of(self, other: "Name") -> bool:
        return is_prefix_of(self, other)

    def prefixes(self) -> Iterable["Name"]:
        """Yield every prefix from the root up to the name itself."""
        for i in range(len(self.components) + 1):
            yield Name(self.components[:i])

    def to_uri(self, abbreviate: int | None = None) -> str:
        """Percent-encoded text form.

        With ``abbreviate`` set, components longer than that many bytes are
        shown as ``=<len>:<digest>`` so that ciphertext-bearing names stay
        readable in logs. The abbreviated form is not parseable.
        """
        if not self.components:
            return "/"
        parts = []
        for c in self.components:
            if abbreviate is not None and len(c) > abbreviate:
                parts.append(f"={len(c)}:{hashlib.sha256(c).hexdigest()[:12]}")
            else:
                parts.append(_escape(c))
        return "/" + "/".join(parts)

    def encode(self) -> bytes:
        return encode(self)

    @property
    def encoded_length(self) -> int:
        return len(encode(self))


def _escape(c: bytes) -> str:
    if c and all(b == 0x2E for b in c):
        return "." * (len(c) + 3)
    if not c:
        return "..."
    out = []
    for b in c:
        if b in _UNRESERVED:
            out.append(chr(b))
        else:
            out.append(f"%{b:02X}")
    return "".join(out)


def _unescape(segment: str) -> bytes:
    raw = segment.encode("utf-8")
    if raw and all(b == 0x2E for b in raw):
        if len(raw) < 3:
            raise MalformedName(f"relative component {segment!r}")
        return raw[3:]
    out = bytearray()
    i = 0
    while i < len(raw):
        b = raw[i]
        if b == 0x25:  # '%'
            if i + 2 >= len(raw):
                raise MalformedName(f"truncated escape in {segment!r}")
            hi, lo = raw[i + 1], raw[i + 2]
            if hi not in _HEX or lo not in _HEX:
                raise MalformedName(f"bad escape in {segment!r}")
            out.append(int(raw[i + 1:i + 3], 16))
            i += 3
        else:
            out.append(b)
            i += 1
    return bytes(out)


def parse(text: str) -> Name:
    """Parse ``/a/b/c`` text into a :class:`Name`.

    >>> parse("/ndn/cnn/news/2011aug20").components
    (b'ndn', b'cnn', b'news', b'2011aug20')
    """
    if not text:
        raise MalformedName("empty name")
    if not text.startswith("/"):
        raise MalformedName(f"name must start with '/': {text!r}")
    body = text[1:]
    if body.endswith("/"):
        body = body[:-1]
    if not body:
        return Name()
    return Name(tuple(_unescape(seg) for seg in body.split("/")))


def is_prefix_of(a: Name, b: Name) -> bool:
    n = len(a.components)
    return n <= len(b.components) and a.components == b.components[:n]


def append(a: Name, component: Component) -> Name:
    if len(a.components) >= MAX_COMPONENTS:
        raise NameTooLong(f"cannot append past {MAX_COMPONENTS} components")
    return Name(a.components + (_component(component),))


def encode(name: Name) -> bytes:
    body = b"".join(tlv.encode(tlv.T_COMP, c) for c in name.components)
    return tlv.encode(tlv.T_NAME, body)


def decode_value(value: bytes) -> Name:
    """Decode the value part of a NAME element."""
    comps = []
    try:
        for t, v in tlv.iterate(value):
            if t != tlv.T_COMP:
                raise MalformedName(f"unexpected type {t:#06x} inside name")
            comps.append(v)
    except tlv.TLVError as exc:
        raise MalformedName(str(exc)) from exc
    try:
        return Name(tuple(comps))
    except NameTooLong as exc:
        raise MalformedName(str(exc)) from exc


def decode(buf: bytes) -> Name:
    try:
        value = tlv.read_exact(buf, tlv.T_NAME)
    except tlv.TLVError as exc:
        raise MalformedName(str(exc)) from exc
    return decode_value(value)


def as_name(value: Name | str) -> Name:
    return value if isinstance(value, Name) else parse(value)
