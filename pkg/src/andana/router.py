"""Anonymizing router: peels one layer off encrypted interests and wraps the
returning content under the consumer-supplied key.

Interest names handled by an AR with namespace ``N``:

* ``N/<ciphertext>``               public-key layer
* ``N/<sid>/<ciphertext>``         session layer
* ``N/createsession/<handshake>``  session setup
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass, field

from . import crypto, layers, names, packets, tlv
from .directory import ARDescriptor, Certificate
from .names import Name
from .packets import Data, Interest

log = logging.getLogger(__name__)

CREATESESSION = b"createsession"
SID_LEN = 16
MODE_DH = 0x01
MODE_WRAP = 0x02

DEFAULT_WINDOW_MS = 2000
DEFAULT_KEY_LIFETIME_MS = 3_600_000
DEFAULT_GRACE_MS = 60_000
DEFAULT_SESSION_LIFETIME_MS = 600_000
DEFAULT_PENDING_LIFETIME_MS = 4000
DEFAULT_WIRE_RATE = 125_000_000  # bytes/s
DEFAULT_CACHE_BYTES = 256 * 1024 * 1024


class NoPendingState(LookupError):
    pass


@dataclass(frozen=True)
class Forwarded:
    interest: Interest
    exit_role: bool


@dataclass(frozen=True)
class Rejected:
    reason: str  # BadDecryption | StaleTimestamp | UnknownSession | ExitPolicy


@dataclass
class PendingTuple:
    outer: Interest
    inner: Interest
    key: crypto.SymmetricKey
    exit_role: bool
    created_at: int


@dataclass
class _EncryptionKey:
    keypair: crypto.KeyPair
    certificate: Certificate
    usable_until: int  # ms, end of grace period


@dataclass
class SessionEntry:
    key: crypto.SymmetricKey
    established_at: int


@dataclass
class AnonymizingRouter:
    """State and behaviour of one AR.

    ``cache_bytes`` must cover ``wire_rate * window``: replays of an
    accepted interest have to be answered from cache for as long as the
    interest's timestamp can still pass the window check.
    """

    namespace: Name
    organization: str
    rng: random.Random = field(default_factory=random.SystemRandom)
    window_ms: int = DEFAULT_WINDOW_MS
    key_lifetime_ms: int = DEFAULT_KEY_LIFETIME_MS
    grace_ms: int = DEFAULT_GRACE_MS
    session_lifetime_ms: int = DEFAULT_SESSION_LIFETIME_MS
    pending_lifetime_ms: int = DEFAULT_PENDING_LIFETIME_MS
    wire_rate: int = DEFAULT_WIRE_RATE
    cache_bytes: int = DEFAULT_CACHE_BYTES
    exit_deny: tuple[Name, ...] = ()
    rsa_bits: int = crypto.DEFAULT_RSA_BITS
    signing_key: crypto.KeyPair | None = None
    now: int = 0

    def __post_init__(self):
        self.namespace = names.as_name(self.namespace)
        self.exit_deny = tuple(names.as_name(n) for n in self.exit_deny)
        reserve = self.wire_rate * self.window_ms // 1000
        if self.cache_bytes < reserve:
            raise ValueError(
                f"cache of {self.cache_bytes} B is below rate x window = {reserve} B")
        if self.signing_key is None:
            self.signing_key = crypto.generate_keypair(crypto.SIGNING, self.rsa_bits, self.rng)
        self.encryption_keys: list[_EncryptionKey] = []
        self.pending: dict[Name, PendingTuple] = {}
        self._by_inner: dict[Name, set[Name]] = {}
        self.sessions: dict[bytes, SessionEntry] = {}
        self.rotate_encryption_key(self.now)

    # -- keys -------------------------------------------------------------

    @property
    def key_locator(self) -> Name:
        return self.namespace / "KEY"

    def rotate_encryption_key(self, now: int) -> Certificate:
        """Install a fresh encryption key; the previous one stays usable
        for ``grace_ms`` but is no longer advertised."""
        not_after = now + self.key_lifetime_ms
        kp = crypto.generate_keypair(crypto.ENCRYPTION, self.rsa_bits, self.rng, not_after)
        cert = Certificate.issue(self.signing_key, kp.pk, not_after, self.rng)
        for old in self.encryption_keys:
            old.usable_until = min(old.usable_until, now + self.grace_ms)
            if old.certificate.not_after > now:
                old.certificate = Certificate.issue(self.signing_key, old.certificate.pk, now,
                                                    self.rng)
        self.encryption_keys.append(_EncryptionKey(kp, cert, not_after + self.grace_ms))
        self._drop_dead_keys(now)
        return cert

    def _drop_dead_keys(self, now: int) -> None:
        self.encryption_keys = [k for k in self.encryption_keys if now <= k.usable_until]

    def _decrypting_keys(self, now: int) -> list[crypto.KeyPair]:
        self._drop_dead_keys(now)
        return [k.keypair for k in reversed(self.encryption_keys)]

    def current_certificate(self) -> Certificate:
        return self.encryption_keys[-1].certificate

    def descriptor(self, now: int = 0, bandwidth: int | None = None,
                   avg_load: float = 0.0, uptime: int = 0) -> ARDescriptor:
        current = self.encryption_keys[-1].certificate
        certs = (current,) if current.not_after > now else ()
        signing_pk = self.signing_key.pk
        return ARDescriptor(
            namespace=self.namespace,
            organization=self.organization,
            signing_pk=signing_pk,
            signing_fingerprint=crypto.fingerprint(signing_pk),
            encryption_certificates=certs,
            bandwidth=self.wire_rate if bandwidth is None else bandwidth,
            avg_load=avg_load,
            uptime=uptime,
        )

    # -- interests --------------------------------------------------------

    def classify(self, interest: Interest) -> str | None:
        """``asymmetric``, ``session``, ``createsession`` or None."""
        name = interest.name
        if not names.is_prefix_of(self.namespace, name):
            return None
        rest = name.components[len(self.namespace):]
        if len(rest) == 1:
            return "asymmetric"
        if len(rest) == 2:
            return "createsession" if rest[0] == CREATESESSION else "session"
        return None

    def _open_layer(self, eint: Interest, now: int) -> layers.Layer | Rejected:
        kind = self.classify(eint)
        rest = eint.name.components[len(self.namespace):]
        plaintext = None
        if kind == "asymmetric":
            for kp in self._decrypting_keys(now):
                try:
                    plaintext = crypto.pke_decrypt(kp.sk, rest[0])
                    break
                except crypto.DecryptionFailed:
                    continue
        elif kind == "session":
            entry = self.sessions.get(rest[0])
            if entry is None or now > entry.established_at + self.session_lifetime_ms:
                return Rejected("UnknownSession")
            try:
                plaintext = crypto.sym_decrypt(entry.key, rest[1])
            except crypto.DecryptionFailed:
                pass
        if plaintext is None:
            return Rejected("BadDecryption")
        try:
            return layers.decode(plaintext)
        except layers.MalformedLayer:
            return Rejected("BadDecryption")

    def try_decrypt(self, eint: Interest, now: int) -> layers.Layer | None:
        """Decrypt without side effects (used to model a compromised AR)."""
        result = self._open_layer(eint, now)
        return None if isinstance(result, Rejected) else result

    def handle_encrypted_interest(self, eint: Interest, now: int) -> Forwarded | Rejected:
        result = self._open_layer(eint, now)
        if isinstance(result, Rejected):
            return result
        layer = result
        if abs(layer.timestamp - now) > self.window_ms:
            return Rejected("StaleTimestamp")
        inner = layer.next_interest()
        if layer.is_exit and any(names.is_prefix_of(p, inner.name) for p in self.exit_deny):
            return Rejected("ExitPolicy")
        self._forget(eint.name)
        self.pending[eint.name] = PendingTuple(eint, inner, layer.key, layer.is_exit, now)
        self._by_inner.setdefault(inner.name, set()).add(eint.name)
        return Forwarded(inner, layer.is_exit)

    def _forget(self, outer_name: Name) -> None:
        t = self.pending.pop(outer_name, None)
        if t is not None:
            outers = self._by_inner.get(t.inner.name)
            if outers is not None:
                outers.discard(outer_name)
                if not outers:
                    del self._by_inner[t.inner.name]

    def expire(self, now: int) -> list[Name]:
        gone = [n for n, t in self.pending.items() if now - t.created_at > self.pending_lifetime_ms]
        for n in gone:
            self._forget(n)
        return gone

    # -- content ----------------------------------------------------------

    def handle_returning_content(self, data: Data, now: int) -> list[Data]:
        """Wrap ``data`` for every pending tuple it answers.

        Data arriving from another AR (we are the entry hop) loses its name
        and signature; only its encrypted payload is re-encrypted.  Producer
        Data (we are the exit hop) is encrypted whole so that the consumer
        can check the producer's signature.
        """
        matches = []
        for prefix in data.name.prefixes():
            for outer in sorted(self._by_inner.get(prefix, ())):
                matches.append(self.pending[outer])
        if not matches:
            raise NoPendingState(str(data.name))
        out = []
        for t in matches:
            inner_bytes = packets.encode_data(data) if t.exit_role else data.payload
            wrapped = crypto.sym_encrypt(t.key, inner_bytes, self.rng)
            out.append(packets.sign_data(t.outer.name, wrapped, self.signing_key,
                                         self.key_locator, rng=self.rng))
            self._forget(t.outer.name)
        return out

    # -- sessions ---------------------------------------------------------

    def handle_createsession(self, interest: Interest, now: int) -> Data:
        try:
            sid, ar_value, key = self._handshake(interest.name[-1], now)
        except (ValueError, crypto.DecryptionFailed, crypto.InvalidPublicValue) as exc:
            log.debug("createsession rejected: %s", exc)
            payload = tlv.encode(tlv.T_ERROR, b"malformed handshake")
            return packets.sign_data(interest.name, payload, self.signing_key,
                                     self.key_locator, freshness=0, rng=self.rng)
        self.sessions[sid] = SessionEntry(key, now)
        payload = tlv.encode(tlv.T_SID, sid)
        if ar_value is not None:
            payload += tlv.encode(tlv.T_AR_VALUE, ar_value)
        return packets.sign_data(interest.name, payload, self.signing_key,
                                 self.key_locator, freshness=0, rng=self.rng)

    def _handshake(self, blob: bytes, now: int):
        fields = dict(tlv.iterate(blob))
        mode = fields.get(tlv.T_MODE)
        if mode is None or len(mode) != 1:
            raise ValueError("missing mode")
        ar_value = None
        if mode[0] == MODE_DH:
            pub, secret = crypto.dh_keygen(self.rng)
            key = crypto.dh_agree(secret, fields.get(tlv.T_CLIENT_VALUE, b""))
            ar_value = pub
        elif mode[0] == MODE_WRAP:
            wrapped = fields.get(tlv.T_WRAPPED_KEY)
            if wrapped is None:
                raise ValueError("missing wrapped key")
            raw = None
            for kp in self._decrypting_keys(now):
                try:
                    raw = crypto.pke_decrypt(kp.sk, wrapped)
                    break
                except crypto.DecryptionFailed:
                    continue
            if raw is None:
                raise crypto.DecryptionFailed()
            key = crypto.SymmetricKey(raw)
        else:
            raise ValueError(f"unknown mode {mode[0]}")
        proposal = fields.get(tlv.T_SID)
        if proposal is not None and len(proposal) == SID_LEN and proposal not in self.sessions:
            sid = proposal
        else:
            sid = crypto.random_bytes(SID_LEN, self.rng)
            while sid in self.sessions:
                sid = crypto.random_bytes(SID_LEN, self.rng)
        return sid, ar_value, key
