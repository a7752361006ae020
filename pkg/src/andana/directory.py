"""AR advertisements and the directory that serves them.

An AR is identified by its namespace, organization and signing-key
fingerprint.  Its short-lived encryption keys are published as certificates
signed by the long-lived signing key.
"""

from __future__ import annotations

import random
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import crypto, names, packets, tlv
from .names import Name

DIRECTORY_PREFIX = names.parse("/andana/directory")


class InvalidDescriptor(ValueError):
    pass


class UnknownAR(KeyError):
    pass


@dataclass(frozen=True)
class Certificate:
    pk: crypto.PublicKey
    not_after: int  # simulated ms
    signature: bytes

    @staticmethod
    def signed_bytes(pk: crypto.PublicKey, not_after: int) -> bytes:
        return pk.encode() + tlv.encode(tlv.T_NOT_AFTER, tlv.encode_uint(not_after, 8))

    @classmethod
    def issue(cls, signing: crypto.KeyPair, pk: crypto.PublicKey, not_after: int,
              rng: random.Random | None = None) -> "Certificate":
        sig = crypto.sign(signing.sk, cls.signed_bytes(pk, not_after), rng)
        return cls(pk, not_after, sig)

    def verify(self, signing_pk: crypto.PublicKey) -> bool:
        if self.pk.role != crypto.ENCRYPTION:
            return False
        return crypto.verify(signing_pk, self.signed_bytes(self.pk, self.not_after),
                             self.signature)

    def encode(self) -> bytes:
        return tlv.encode(tlv.T_CERT, self.signed_bytes(self.pk, self.not_after)
                          + tlv.encode(tlv.T_SIG, self.signature))

    @classmethod
    def decode_value(cls, value: bytes) -> "Certificate":
        parts = list(tlv.iterate(value))
        if [t for t, _ in parts] != [tlv.T_PUBKEY, tlv.T_NOT_AFTER, tlv.T_SIG]:
            raise InvalidDescriptor("bad certificate layout")
        pk = crypto.PublicKey.decode(tlv.encode(tlv.T_PUBKEY, parts[0][1]))
        return cls(pk, tlv.decode_uint(parts[1][1], 8), parts[2][1])


@dataclass(frozen=True)
class ARDescriptor:
    namespace: Name
    organization: str
    signing_pk: crypto.PublicKey
    signing_fingerprint: bytes
    encryption_certificates: tuple[Certificate, ...] = ()
    bandwidth: int = 0
    avg_load: float = 0.0
    uptime: int = 0

    def validate(self) -> None:
        if self.signing_pk.role != crypto.SIGNING:
            raise InvalidDescriptor("advertised signing key has the wrong role")
        if self.signing_fingerprint != crypto.fingerprint(self.signing_pk):
            raise InvalidDescriptor("fingerprint does not match signing key")
        for cert in self.encryption_certificates:
            if not cert.verify(self.signing_pk):
                raise InvalidDescriptor("certificate not signed by the AR signing key")
        if not 0.0 <= self.avg_load <= 1.0:
            raise InvalidDescriptor("average load must be in [0, 1]")

    def live_certificates(self, now: int) -> tuple[Certificate, ...]:
        return tuple(c for c in self.encryption_certificates if c.not_after > now)

    def encryption_key(self, now: int) -> crypto.PublicKey:
        """Newest live encryption key."""
        live = self.live_certificates(now)
        if not live:
            raise InvalidDescriptor(f"{self.namespace} has no live encryption key")
        return max(live, key=lambda c: c.not_after).pk

    def encode(self) -> bytes:
        body = (
            names.encode(self.namespace)
            + tlv.encode(tlv.T_ORG, self.organization.encode())
            + self.signing_pk.encode()
            + tlv.encode(tlv.T_FPR, self.signing_fingerprint)
            + b"".join(c.encode() for c in self.encryption_certificates)
            + tlv.encode(tlv.T_BANDWIDTH, tlv.encode_uint(self.bandwidth, 8))
            + tlv.encode(tlv.T_LOAD, struct.pack(">d", self.avg_load))
            + tlv.encode(tlv.T_UPTIME, tlv.encode_uint(self.uptime, 8))
        )
        return tlv.encode(tlv.T_DESCRIPTOR, body)

    @classmethod
    def decode_value(cls, value: bytes) -> "ARDescriptor":
        try:
            parts = list(tlv.iterate(value))
            kinds = [t for t, _ in parts]
            if kinds[:4] != [tlv.T_NAME, tlv.T_ORG, tlv.T_PUBKEY, tlv.T_FPR] or \
                    kinds[-3:] != [tlv.T_BANDWIDTH, tlv.T_LOAD, tlv.T_UPTIME] or \
                    any(k != tlv.T_CERT for k in kinds[4:-3]):
                raise InvalidDescriptor("bad descriptor layout")
            return cls(
                namespace=names.decode_value(parts[0][1]),
                organization=parts[1][1].decode(),
                signing_pk=crypto.PublicKey.decode(tlv.encode(tlv.T_PUBKEY, parts[2][1])),
                signing_fingerprint=parts[3][1],
                encryption_certificates=tuple(
                    Certificate.decode_value(v) for _, v in parts[4:-3]),
                bandwidth=tlv.decode_uint(parts[-3][1], 8),
                avg_load=struct.unpack(">d", parts[-2][1])[0],
                uptime=tlv.decode_uint(parts[-1][1], 8),
            )
        except (tlv.TLVError, names.MalformedName, UnicodeDecodeError, struct.error) as exc:
            raise InvalidDescriptor(str(exc)) from exc

    @classmethod
    def decode(cls, buf: bytes) -> "ARDescriptor":
        try:
            return cls.decode_value(tlv.read_exact(buf, tlv.T_DESCRIPTOR))
        except tlv.TLVError as exc:
            raise InvalidDescriptor(str(exc)) from exc


@dataclass
class Directory:
    """Centralized registry of AR descriptors keyed by namespace."""

    entries: dict[Name, ARDescriptor] = field(default_factory=dict)

    def register(self, desc: ARDescriptor) -> None:
        desc.validate()
        self.entries[desc.namespace] = desc

    def lookup(self, namespace: Name | str) -> ARDescriptor:
        ns = names.as_name(namespace)
        try:
            return self.entries[ns]
        except KeyError:
            raise UnknownAR(str(ns)) from None

    def list_ars(self, now: int = 0) -> list[ARDescriptor]:
        """Live descriptors with expired certificates removed."""
        out = []
        for ns in sorted(self.entries):
            desc = self.entries[ns]
            live = desc.live_certificates(now)
            if live:
                out.append(replace(desc, encryption_certificates=live))
        return out

    def dumps(self) -> bytes:
        return b"".join(self.entries[ns].encode() for ns in sorted(self.entries))

    @classmethod
    def loads(cls, buf: bytes) -> "Directory":
        d = cls()
        try:
            for t, v in tlv.iterate(buf):
                if t != tlv.T_DESCRIPTOR:
                    raise InvalidDescriptor(f"unexpected record type {t:#06x}")
                d.register(ARDescriptor.decode_value(v))
        except tlv.TLVError as exc:
            raise InvalidDescriptor(str(exc)) from exc
        return d

    def dump(self, path: str | Path) -> None:
        Path(path).write_bytes(self.dumps())

    @classmethod
    def load(cls, path: str | Path) -> "Directory":
        return cls.loads(Path(path).read_bytes())

    def as_data(self, signing_key: crypto.KeyPair, prefix: Name = DIRECTORY_PREFIX,
                rng: random.Random | None = None) -> list[packets.Data]:
        """One signed Data packet per descriptor, named ``prefix/<index>``,
        plus ``prefix/count`` announcing how many there are."""
        ordered = [self.entries[ns] for ns in sorted(self.entries)]
        out = [packets.sign_data(prefix / "count", str(len(ordered)).encode(),
                                 signing_key, prefix, rng=rng)]
        for i, desc in enumerate(ordered):
            out.append(packets.sign_data(prefix / str(i), desc.encode(), signing_key,
                                         prefix, rng=rng))
        return out

    @classmethod
    def from_data(cls, datas: list[packets.Data], signing_pk: crypto.PublicKey) -> "Directory":
        d = cls()
        for data in datas:
            if not packets.verify_data(data, signing_pk):
                raise InvalidDescriptor(f"bad directory signature on {data.name}")
            if data.name[-1] == b"count":
                continue
            d.register(ARDescriptor.decode(data.payload))
        return d
