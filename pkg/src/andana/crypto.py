"""Key material and the encryption/signature schemes used by the overlay.

* RSA keys (1024-bit by default) with OAEP-SHA256 key wrapping and
  PSS-SHA256 signatures.  Padding is computed here so that every random
  choice comes from an injectable ``random.Random``; seeded simulations are
  then byte-for-byte reproducible.
* Hybrid public-key encryption: a fresh AES-128 key and HMAC-SHA256 key are
  wrapped under RSA-OAEP, the body is AES-CTR, then MACed.
* Symmetric encrypt-then-MAC under a 128-bit key.
* X25519 key agreement for session setup.

Every decryption failure surfaces as the single :class:`DecryptionFailed`.
"""

from __future__ import annotations

import hashlib
import hmac
import random
import struct
from dataclasses import dataclass, field

import gmpy2
from cryptography.hazmat.primitives.asymmetric import x25519
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from . import tlv

KAPPA = 128
SYM_KEY_LEN = KAPPA // 8
MAC_KEY_LEN = 32
IV_LEN = 16
MAC_LEN = 32
HASH_LEN = 32
PSS_SALT_LEN = 32
PUBLIC_EXPONENT = 65537
DEFAULT_RSA_BITS = 1024
MIN_RSA_BITS = 1024
MAX_PLAINTEXT = 1 << 20
PKE_VERSION = 0x01

ENCRYPTION = "encryption"
SIGNING = "signing"
_ROLE_BYTE = {ENCRYPTION: 0x01, SIGNING: 0x02}

_system_rng = random.SystemRandom()


class DecryptionFailed(Exception):
    """Ciphertext rejected: wrong key, modified bytes or bad framing."""


class InvalidPublicValue(ValueError):
    pass


class KeyRoleError(ValueError):
    """A key was used outside its role (signing vs. encryption)."""


def _rng(rng: random.Random | None) -> random.Random:
    return _system_rng if rng is None else rng


def random_bytes(n: int, rng: random.Random | None = None) -> bytes:
    return _rng(rng).randbytes(n)


# ---------------------------------------------------------------------------
# keys


@dataclass(frozen=True)
class PublicKey:
    n: int
    e: int
    role: str

    @property
    def size_bytes(self) -> int:
        return (self.n.bit_length() + 7) // 8

    def encode(self) -> bytes:
        k = self.size_bytes
        body = (
            bytes([_ROLE_BYTE[self.role]])
            + struct.pack(">I", self.e)
            + self.n.to_bytes(k, "big")
        )
        return tlv.encode(tlv.T_PUBKEY, body)

    @classmethod
    def decode(cls, buf: bytes) -> "PublicKey":
        body = tlv.read_exact(buf, tlv.T_PUBKEY)
        if len(body) < 6:
            raise tlv.TLVError("public key too short")
        roles = {v: k for k, v in _ROLE_BYTE.items()}
        if body[0] not in roles:
            raise tlv.TLVError("unknown key role")
        e = struct.unpack(">I", body[1:5])[0]
        n = int.from_bytes(body[5:], "big")
        return cls(n=n, e=e, role=roles[body[0]])


@dataclass(frozen=True)
class PrivateKey:
    n: int
    e: int
    d: int
    p: int
    q: int
    role: str
    dp: int = field(init=False, repr=False)
    dq: int = field(init=False, repr=False)
    qinv: int = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "dp", self.d % (self.p - 1))
        object.__setattr__(self, "dq", self.d % (self.q - 1))
        object.__setattr__(self, "qinv", int(gmpy2.invert(self.q, self.p)))

    @property
    def public(self) -> PublicKey:
        return PublicKey(self.n, self.e, self.role)

    def _private_op(self, c: int) -> int:
        m1 = gmpy2.powmod(c, self.dp, self.p)
        m2 = gmpy2.powmod(c, self.dq, self.q)
        h = (self.qinv * (m1 - m2)) % self.p
        return int(m2 + h * self.q)


@dataclass(frozen=True)
class KeyPair:
    pk: PublicKey
    sk: PrivateKey
    role: str
    not_after: int | None = None  # simulated ms; encryption keys only


@dataclass(frozen=True)
class SymmetricKey:
    key: bytes

    def __post_init__(self):
        if len(self.key) != SYM_KEY_LEN:
            raise ValueError(f"symmetric key must be {SYM_KEY_LEN} bytes")

    @classmethod
    def generate(cls, rng: random.Random | None = None) -> "SymmetricKey":
        return cls(random_bytes(SYM_KEY_LEN, rng))

    def __repr__(self) -> str:
        return f"SymmetricKey({self.key[:4].hex()}...)"


def _random_prime(bits: int, rng: random.Random) -> int:
    while True:
        candidate = rng.getrandbits(bits) | (1 << (bits - 1)) | (1 << (bits - 2))
        p = int(gmpy2.next_prime(candidate))
        if p.bit_length() == bits and gmpy2.gcd(PUBLIC_EXPONENT, p - 1) == 1:
            return p


def generate_keypair(
    role: str,
    bits: int = DEFAULT_RSA_BITS,
    rng: random.Random | None = None,
    not_after: int | None = None,
) -> KeyPair:
    if role not in _ROLE_BYTE:
        raise ValueError(f"unknown role {role!r}")
    if role == SIGNING and not_after is not None:
        raise ValueError("signing keys do not expire")
    if bits < MIN_RSA_BITS:
        raise ValueError(f"RSA modulus must be at least {MIN_RSA_BITS} bits")
    r = _rng(rng)
    half = bits // 2
    while True:
        p = _random_prime(half, r)
        q = _random_prime(bits - half, r)
        if p != q and (p * q).bit_length() == bits:
            break
    if p < q:
        p, q = q, p
    phi = (p - 1) * (q - 1)
    d = int(gmpy2.invert(PUBLIC_EXPONENT, phi))
    sk = PrivateKey(n=p * q, e=PUBLIC_EXPONENT, d=d, p=p, q=q, role=role)
    return KeyPair(pk=sk.public, sk=sk, role=role, not_after=not_after)


def fingerprint(pk: PublicKey) -> bytes:
    """SHA-256 of the canonical public key encoding (32 bytes)."""
    return hashlib.sha256(pk.encode()).digest()


# ---------------------------------------------------------------------------
# RSA padding (PKCS #1 v2.2, SHA-256 + MGF1-SHA-256)


def _mgf1(seed: bytes, length: int) -> bytes:
    out = bytearray()
    counter = 0
    while len(out) < length:
        out += hashlib.sha256(seed + counter.to_bytes(4, "big")).digest()
        counter += 1
    return bytes(out[:length])


def _xor(a: bytes, b: bytes) -> bytes:
    return bytes(x ^ y for x, y in zip(a, b))


_EMPTY_LABEL_HASH = hashlib.sha256(b"").digest()


def oaep_encrypt(pk: PublicKey, message: bytes, rng: random.Random | None = None) -> bytes:
    k = pk.size_bytes
    if len(message) > k - 2 * HASH_LEN - 2:
        raise ValueError("message too long for OAEP")
    ps = b"\x00" * (k - len(message) - 2 * HASH_LEN - 2)
    db = _EMPTY_LABEL_HASH + ps + b"\x01" + message
    seed = random_bytes(HASH_LEN, rng)
    masked_db = _xor(db, _mgf1(seed, k - HASH_LEN - 1))
    masked_seed = _xor(seed, _mgf1(masked_db, HASH_LEN))
    em = b"\x00" + masked_seed + masked_db
    c = gmpy2.powmod(int.from_bytes(em, "big"), pk.e, pk.n)
    return int(c).to_bytes(k, "big")


def oaep_decrypt(sk: PrivateKey, ciphertext: bytes) -> bytes:
    k = (sk.n.bit_length() + 7) // 8
    if len(ciphertext) != k:
        raise DecryptionFailed()
    c = int.from_bytes(ciphertext, "big")
    if c >= sk.n:
        raise DecryptionFailed()
    em = sk._private_op(c).to_bytes(k, "big")
    masked_seed, masked_db = em[1:1 + HASH_LEN], em[1 + HASH_LEN:]
    seed = _xor(masked_seed, _mgf1(masked_db, HASH_LEN))
    db = _xor(masked_db, _mgf1(seed, k - HASH_LEN - 1))
    label_ok = hmac.compare_digest(db[:HASH_LEN], _EMPTY_LABEL_HASH)
    rest = db[HASH_LEN:]
    sep = rest.find(b"\x01")
    if em[0] != 0 or not label_ok or sep < 0 or any(rest[:sep]):
        raise DecryptionFailed()
    return rest[sep + 1:]


def sign(sk: PrivateKey, message: bytes, rng: random.Random | None = None) -> bytes:
    """RSASSA-PSS with SHA-256 and a 32-byte salt."""
    if sk.role != SIGNING:
        raise KeyRoleError("encryption key used for signing")
    mod_bits = sk.n.bit_length()
    em_bits = mod_bits - 1
    em_len = (em_bits + 7) // 8
    if em_len < HASH_LEN + PSS_SALT_LEN + 2:
        raise ValueError("modulus too small for PSS encoding")
    m_hash = hashlib.sha256(message).digest()
    salt = random_bytes(PSS_SALT_LEN, rng)
    h = hashlib.sha256(b"\x00" * 8 + m_hash + salt).digest()
    ps = b"\x00" * (em_len - PSS_SALT_LEN - HASH_LEN - 2)
    db = ps + b"\x01" + salt
    masked_db = bytearray(_xor(db, _mgf1(h, em_len - HASH_LEN - 1)))
    masked_db[0] &= 0xFF >> (8 * em_len - em_bits)
    em = bytes(masked_db) + h + b"\xbc"
    s = sk._private_op(int.from_bytes(em, "big"))
    return s.to_bytes((mod_bits + 7) // 8, "big")


def verify(pk: PublicKey, message: bytes, signature: bytes) -> bool:
    if pk.role != SIGNING:
        raise KeyRoleError("encryption key used for verification")
    k = pk.size_bytes
    if len(signature) != k:
        return False
    s = int.from_bytes(signature, "big")
    if s >= pk.n:
        return False
    em_bits = pk.n.bit_length() - 1
    em_len = (em_bits + 7) // 8
    m = int(gmpy2.powmod(s, pk.e, pk.n))
    if m.bit_length() > em_bits:
        return False
    em = m.to_bytes(em_len, "big")
    if em[-1] != 0xBC:
        return False
    masked_db, h = em[:em_len - HASH_LEN - 1], em[em_len - HASH_LEN - 1:-1]
    top_mask = 0xFF >> (8 * em_len - em_bits)
    if masked_db[0] & ~top_mask & 0xFF:
        return False
    db = bytearray(_xor(masked_db, _mgf1(h, em_len - HASH_LEN - 1)))
    db[0] &= top_mask
    ps_len = em_len - HASH_LEN - PSS_SALT_LEN - 2
    if any(db[:ps_len]) or db[ps_len] != 0x01:
        return False
    salt = bytes(db[-PSS_SALT_LEN:])
    m_hash = hashlib.sha256(message).digest()
    expected = hashlib.sha256(b"\x00" * 8 + m_hash + salt).digest()
    return hmac.compare_digest(expected, h)


# ---------------------------------------------------------------------------
# symmetric layer


def _ctr(key: bytes, iv: bytes, data: bytes) -> bytes:
    enc = Cipher(algorithms.AES(key), modes.CTR(iv)).encryptor()
    return enc.update(data) + enc.finalize()


def _mac(key: bytes, data: bytes) -> bytes:
    return hmac.new(key, data, hashlib.sha256).digest()


def _split_sym_key(k: SymmetricKey) -> tuple[bytes, bytes]:
    enc_key = hmac.new(k.key, b"andana-enc", hashlib.sha256).digest()[:SYM_KEY_LEN]
    mac_key = hmac.new(k.key, b"andana-mac", hashlib.sha256).digest()
    return enc_key, mac_key


def sym_encrypt(k: SymmetricKey, plaintext: bytes, rng: random.Random | None = None) -> bytes:
    """Encrypt-then-MAC: ``IV(16) || AES-CTR body || HMAC(IV || body)``."""
    if len(plaintext) > MAX_PLAINTEXT:
        raise ValueError("plaintext exceeds 1 MiB")
    enc_key, mac_key = _split_sym_key(k)
    iv = random_bytes(IV_LEN, rng)
    body = _ctr(enc_key, iv, plaintext)
    return iv + body + _mac(mac_key, iv + body)


def sym_decrypt(k: SymmetricKey, ciphertext: bytes) -> bytes:
    if len(ciphertext) < IV_LEN + MAC_LEN:
        raise DecryptionFailed()
    enc_key, mac_key = _split_sym_key(k)
    head, tag = ciphertext[:-MAC_LEN], ciphertext[-MAC_LEN:]
    if not hmac.compare_digest(_mac(mac_key, head), tag):
        raise DecryptionFailed()
    return _ctr(enc_key, head[:IV_LEN], head[IV_LEN:])


SYM_OVERHEAD = IV_LEN + MAC_LEN


# ---------------------------------------------------------------------------
# hybrid public-key layer


def pke_encrypt(pk: PublicKey, plaintext: bytes, rng: random.Random | None = None) -> bytes:
    """Hybrid encryption framed as
    ``0x01 || len(wrapped) || wrapped || IV || body || MAC``.
    """
    if pk.role != ENCRYPTION:
        raise KeyRoleError("signing key used for encryption")
    if len(plaintext) > MAX_PLAINTEXT:
        raise ValueError("plaintext exceeds 1 MiB")
    r = _rng(rng)
    aes_key = random_bytes(SYM_KEY_LEN, r)
    mac_key = random_bytes(MAC_KEY_LEN, r)
    wrapped = oaep_encrypt(pk, aes_key + mac_key, r)
    iv = random_bytes(IV_LEN, r)
    header = bytes([PKE_VERSION]) + struct.pack(">H", len(wrapped)) + wrapped + iv
    body = _ctr(aes_key, iv, plaintext)
    return header + body + _mac(mac_key, header + body)


def pke_decrypt(sk: PrivateKey, ciphertext: bytes) -> bytes:
    if sk.role != ENCRYPTION:
        raise KeyRoleError("signing key used for decryption")
    if len(ciphertext) < 3 or ciphertext[0] != PKE_VERSION:
        raise DecryptionFailed()
    wlen = struct.unpack(">H", ciphertext[1:3])[0]
    start = 3 + wlen + IV_LEN
    if len(ciphertext) < start + MAC_LEN:
        raise DecryptionFailed()
    keys = oaep_decrypt(sk, ciphertext[3:3 + wlen])
    if len(keys) != SYM_KEY_LEN + MAC_KEY_LEN:
        raise DecryptionFailed()
    aes_key, mac_key = keys[:SYM_KEY_LEN], keys[SYM_KEY_LEN:]
    head, tag = ciphertext[:-MAC_LEN], ciphertext[-MAC_LEN:]
    if not hmac.compare_digest(_mac(mac_key, head), tag):
        raise DecryptionFailed()
    iv = ciphertext[3 + wlen:start]
    return _ctr(aes_key, iv, head[start:])


def pke_overhead(pk: PublicKey) -> int:
    return 3 + pk.size_bytes + IV_LEN + MAC_LEN


# ---------------------------------------------------------------------------
# Diffie-Hellman (X25519)

DH_PUBLIC_LEN = 32


@dataclass(frozen=True)
class DHSecret:
    raw: bytes

    def __repr__(self) -> str:
        return "DHSecret(...)"


def dh_keygen(rng: random.Random | None = None) -> tuple[bytes, DHSecret]:
    raw = random_bytes(32, rng)
    pub = x25519.X25519PrivateKey.from_private_bytes(raw).public_key().public_bytes_raw()
    return pub, DHSecret(raw)


def dh_agree(secret: DHSecret, peer_public: bytes) -> SymmetricKey:
    if len(peer_public) != DH_PUBLIC_LEN:
        raise InvalidPublicValue("public value must be 32 bytes")
    priv = x25519.X25519PrivateKey.from_private_bytes(secret.raw)
    try:
        shared = priv.exchange(x25519.X25519PublicKey.from_public_bytes(peer_public))
    except ValueError as exc:
        # all-zero shared secret: identity / low-order point
        raise InvalidPublicValue(str(exc)) from exc
    if not any(shared):
        raise InvalidPublicValue("low-order public value")
    return SymmetricKey(hashlib.sha256(b"andana-dh" + shared).digest()[:SYM_KEY_LEN])
