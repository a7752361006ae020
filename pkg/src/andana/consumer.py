"""Consumer side: circuit selection, layered interest encryption, session
handshakes and decapsulation of returned content."""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from . import crypto, layers, names, packets, tlv
from .directory import ARDescriptor
from .names import Name
from .packets import Data, Interest
from .router import CREATESESSION, MODE_DH, MODE_WRAP, SID_LEN

ASYMMETRIC = "asymmetric"
SESSION = "session"

DEFAULT_RTT_MS = 200.0
RTT_ALPHA = 0.125
MAX_INNER_INTEREST = 8 * 1024
DEFAULT_SESSION_LIFETIME_MS = 600_000


class NoEligiblePair(LookupError):
    pass


class InteriorTooLarge(ValueError):
    pass


class SessionExpired(RuntimeError):
    pass


class CircuitExhausted(RuntimeError):
    pass


class HandshakeFailed(RuntimeError):
    pass


class ProducerSignatureInvalid(RuntimeError):
    pass


class UnexpectedContent(RuntimeError):
    pass


@dataclass
class SessionState:
    sid: bytes
    shared_key: crypto.SymmetricKey
    ar: ARDescriptor
    established_at: int
    lifetime_ms: int = DEFAULT_SESSION_LIFETIME_MS

    def live(self, now: int) -> bool:
        return now <= self.established_at + self.lifetime_ms


@dataclass
class EphemeralCircuit:
    entry: ARDescriptor
    exit: ARDescriptor
    k1: crypto.SymmetricKey
    k2: crypto.SymmetricKey
    created_at: int
    mode: str = ASYMMETRIC
    max_interests: int = 1
    used_count: int = 0
    entry_session: SessionState | None = None
    exit_session: SessionState | None = None
    # outer name -> original interest, for interests sent on this circuit
    outstanding: dict[Name, Interest] = field(default_factory=dict)

    def __post_init__(self):
        if not 1 <= self.max_interests <= 4:
            raise ValueError("max_interests must be between 1 and 4")
        if not eligible(self.entry, self.exit):
            raise NoEligiblePair("entry and exit ARs violate the distinctness constraints")

    @property
    def exhausted(self) -> bool:
        return self.used_count >= self.max_interests

    def _claim(self) -> None:
        if self.exhausted:
            raise CircuitExhausted("circuit already carried its interests")
        self.used_count += 1


def eligible(a: ARDescriptor, b: ARDescriptor) -> bool:
    return (a.namespace != b.namespace
            and a.signing_fingerprint != b.signing_fingerprint
            and a.organization != b.organization
            and not names.is_prefix_of(a.namespace, b.namespace)
            and not names.is_prefix_of(b.namespace, a.namespace))


def eligible_pairs(listing: list[ARDescriptor]) -> list[tuple[ARDescriptor, ARDescriptor]]:
    return [(a, b) for a in listing for b in listing if eligible(a, b)]


def select_circuit(listing: list[ARDescriptor], rng: random.Random | None = None, now: int = 0,
                   mode: str = ASYMMETRIC, max_interests: int = 1) -> EphemeralCircuit:
    """Draw ordered AR pairs uniformly until one satisfies the constraints."""
    rng = rng or random.SystemRandom()
    listing = list(listing)
    if len(listing) < 2 or not any(eligible(a, b) for a in listing for b in listing):
        raise NoEligiblePair(f"no eligible pair among {len(listing)} ARs")
    while True:
        entry = listing[rng.randrange(len(listing))]
        exit_ = listing[rng.randrange(len(listing))]
        if eligible(entry, exit_):
            break
    return EphemeralCircuit(entry, exit_, crypto.SymmetricKey.generate(rng),
                            crypto.SymmetricKey.generate(rng), now, mode, max_interests)


def _check_inner(interest: Interest) -> None:
    size = len(packets.encode_interest(interest))
    if size > MAX_INNER_INTEREST:
        raise InteriorTooLarge(f"interest encodes to {size} bytes (> {MAX_INNER_INTEREST})")


def _timestamps(now: int, rtt_estimate: float) -> tuple[int, int]:
    return now, now + int(rtt_estimate) // 2


def _seal_asym(ar: ARDescriptor, plaintext: bytes, now: int, rng) -> tuple[Name, bytes]:
    return ar.namespace, crypto.pke_encrypt(ar.encryption_key(now), plaintext, rng)


def _seal_session(session: SessionState | None, plaintext: bytes, now: int,
                  rng) -> tuple[Name, bytes]:
    if session is None or not session.live(now):
        raise SessionExpired("no live session with this AR")
    return session.ar.namespace / session.sid, crypto.sym_encrypt(session.shared_key, plaintext, rng)


def encrypt_interest(circuit: EphemeralCircuit, interest: Interest, now: int,
                     rtt_estimate: float = DEFAULT_RTT_MS, rng: random.Random | None = None,
                     entry_mode: str | None = None, exit_mode: str | None = None) -> Interest:
    """Wrap ``interest`` for ``circuit``; each leg may use its own mode."""
    _check_inner(interest)
    entry_mode = entry_mode or circuit.mode
    exit_mode = exit_mode or circuit.mode
    ts_entry, ts_exit = _timestamps(now, rtt_estimate)
    for leg, session in ((entry_mode, circuit.entry_session), (exit_mode, circuit.exit_session)):
        if leg == SESSION and (session is None or not session.live(now)):
            raise SessionExpired("no live session for a session-mode leg")
    circuit._claim()

    inner_plain = layers.encode_exit(interest, circuit.k2, ts_exit)
    if exit_mode == SESSION:
        next_prefix, inner_ct = _seal_session(circuit.exit_session, inner_plain, now, rng)
    else:
        next_prefix, inner_ct = _seal_asym(circuit.exit, inner_plain, now, rng)

    outer_plain = layers.encode_entry(next_prefix, inner_ct, circuit.k1, ts_entry)
    if entry_mode == SESSION:
        prefix, outer_ct = _seal_session(circuit.entry_session, outer_plain, now, rng)
    else:
        prefix, outer_ct = _seal_asym(circuit.entry, outer_plain, now, rng)
    eint = Interest(names.append(prefix, outer_ct))
    circuit.outstanding[eint.name] = interest
    return eint


def encrypt_interest_asymmetric(circuit: EphemeralCircuit, interest: Interest, now: int,
                                rtt_estimate: float = DEFAULT_RTT_MS,
                                rng: random.Random | None = None) -> Interest:
    return encrypt_interest(circuit, interest, now, rtt_estimate, rng, ASYMMETRIC, ASYMMETRIC)


def encrypt_interest_session(circuit: EphemeralCircuit, interest: Interest, now: int,
                             rtt_estimate: float = DEFAULT_RTT_MS,
                             rng: random.Random | None = None) -> Interest:
    return encrypt_interest(circuit, interest, now, rtt_estimate, rng, SESSION, SESSION)


def decapsulate_content(circuit: EphemeralCircuit, data: Data,
                        producer_pk: crypto.PublicKey) -> Data:
    """Peel both content layers and check the producer's signature.

    The entry AR's outer signature is ignored; only the producer's counts.
    """
    original = circuit.outstanding.get(data.name)
    if original is None:
        raise UnexpectedContent(f"no interest on this circuit is named {data.name.to_uri(24)}")
    middle = crypto.sym_decrypt(circuit.k1, data.payload)
    inner = crypto.sym_decrypt(circuit.k2, middle)
    try:
        produced = packets.decode_data(inner)
    except packets.MalformedPacket:
        raise crypto.DecryptionFailed() from None
    if not produced.satisfies(original):
        raise UnexpectedContent(f"{produced.name} does not satisfy {original.name}")
    if not packets.verify_data(produced, producer_pk):
        raise ProducerSignatureInvalid(str(produced.name))
    del circuit.outstanding[data.name]
    return produced


# -- sessions ---------------------------------------------------------------

@dataclass
class PendingHandshake:
    ar: ARDescriptor
    mode: int
    interest: Interest
    dh_secret: crypto.DHSecret | None = None
    key: crypto.SymmetricKey | None = None


def session_request(ar: ARDescriptor, mode: str = "dh", now: int = 0,
                    rng: random.Random | None = None,
                    sid_proposal: bytes | None = None) -> PendingHandshake:
    """Build the single createsession interest of a handshake."""
    if mode == "dh":
        pub, secret = crypto.dh_keygen(rng)
        payload = tlv.encode(tlv.T_MODE, bytes([MODE_DH])) + tlv.encode(tlv.T_CLIENT_VALUE, pub)
        state = dict(mode=MODE_DH, dh_secret=secret)
    elif mode in ("wrap", "encrypt-to-key"):
        key = crypto.SymmetricKey.generate(rng)
        wrapped = crypto.pke_encrypt(ar.encryption_key(now), key.key, rng)
        payload = (tlv.encode(tlv.T_MODE, bytes([MODE_WRAP])) + tlv.encode(tlv.T_CLIENT_VALUE, b"")
                   + tlv.encode(tlv.T_WRAPPED_KEY, wrapped))
        state = dict(mode=MODE_WRAP, key=key)
    else:
        raise ValueError(f"unknown handshake mode {mode!r}")
    if sid_proposal is not None:
        payload += tlv.encode(tlv.T_SID, sid_proposal)
    interest = Interest(ar.namespace / CREATESESSION / payload)
    return PendingHandshake(ar, interest=interest, **state)


def complete_session(pending: PendingHandshake, data: Data, now: int,
                     lifetime_ms: int = DEFAULT_SESSION_LIFETIME_MS) -> SessionState:
    if data.name != pending.interest.name:
        raise HandshakeFailed("response does not match the request")
    if not packets.verify_data(data, pending.ar.signing_pk):
        raise HandshakeFailed("response not signed by the AR")
    try:
        fields = dict(tlv.iterate(data.payload))
    except tlv.TLVError as exc:
        raise HandshakeFailed(str(exc)) from exc
    if tlv.T_ERROR in fields:
        raise HandshakeFailed(fields[tlv.T_ERROR].decode(errors="replace"))
    sid = fields.get(tlv.T_SID)
    if sid is None or len(sid) != SID_LEN:
        raise HandshakeFailed("missing session identifier")
    if pending.mode == MODE_DH:
        try:
            key = crypto.dh_agree(pending.dh_secret, fields.get(tlv.T_AR_VALUE, b""))
        except crypto.InvalidPublicValue as exc:
            raise HandshakeFailed(str(exc)) from exc
    else:
        key = pending.key
    return SessionState(sid, key, pending.ar, now, lifetime_ms)


def establish_session(router, ar: ARDescriptor, mode: str = "dh", now: int = 0,
                      rng: random.Random | None = None) -> SessionState:
    """Run a handshake directly against an in-process AR."""
    pending = session_request(ar, mode, now, rng)
    response = router.handle_createsession(pending.interest, now)
    return complete_session(pending, response, now)


class RttEstimator:
    """Exponentially weighted moving average of interest-to-data latency."""

    def __init__(self, initial_ms: float = DEFAULT_RTT_MS, alpha: float = RTT_ALPHA):
        self.value = initial_ms
        self.alpha = alpha

    def update(self, sample_ms: float) -> float:
        self.value = (1 - self.alpha) * self.value + self.alpha * sample_ms
        return self.value
