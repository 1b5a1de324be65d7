"""Keys, addresses and signatures for every network participant.

Private keys are derived from a seed with SHA-256, public keys are secp256k1
points, and addresses are the trailing 20 bytes of the keccak-256 digest of
the uncompressed 64-byte point encoding (the Ethereum convention).
Signatures are deterministic (RFC 6979 nonces) and carry a recovery id so
the ledger can recover the signer's key from a transaction.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import coincurve
from Crypto.Hash import keccak

# secp256k1 group order
CURVE_ORDER = 0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEBAAEDCE6AF48A03BBFD25E8CD0364141

_MAX_RETRIES = 2**32


class DegenerateSeed(ValueError):
    """No valid scalar could be derived from the seed."""


def keccak256(data: bytes) -> bytes:
    h = keccak.new(digest_bits=256)
    h.update(data)
    return h.digest()


@dataclass(frozen=True)
class PrivateKey:
    scalar: bytes

    def __post_init__(self):
        if len(self.scalar) != 32:
            raise ValueError("private key must be 32 bytes")
        n = int.from_bytes(self.scalar, "big")
        if not 0 < n < CURVE_ORDER:
            raise ValueError("private key scalar out of range")

    def hex(self) -> str:
        return self.scalar.hex()

    def __repr__(self):
        return "PrivateKey(<hidden>)"


@dataclass(frozen=True)
class PublicKey:
    point: bytes  # x || y, 64 bytes

    def __post_init__(self):
        if len(self.point) != 64:
            raise ValueError("public key must be the 64-byte uncompressed encoding")

    def hex(self) -> str:
        return self.point.hex()

    @classmethod
    def from_hex(cls, text: str) -> "PublicKey":
        return cls(bytes.fromhex(text.removeprefix("0x")))


@dataclass(frozen=True, order=True)
class Address:
    raw: bytes

    def __post_init__(self):
        if len(self.raw) != 20:
            raise ValueError("address must be 20 bytes")

    def hex(self) -> str:
        return "0x" + self.raw.hex()

    def __str__(self):
        return self.hex()

    @classmethod
    def from_hex(cls, text: str) -> "Address":
        return cls(bytes.fromhex(text.removeprefix("0x")))


@dataclass(frozen=True)
class Signature:
    r: int
    s: int
    recovery: int

    def to_bytes(self) -> bytes:
        return self.r.to_bytes(32, "big") + self.s.to_bytes(32, "big") + bytes([self.recovery])

    @classmethod
    def from_bytes(cls, data: bytes) -> "Signature":
        if len(data) != 65:
            raise ValueError("signature must be 65 bytes")
        return cls(int.from_bytes(data[:32], "big"), int.from_bytes(data[32:64], "big"), data[64])

    def hex(self) -> str:
        return self.to_bytes().hex()

    @classmethod
    def from_hex(cls, text: str) -> "Signature":
        return cls.from_bytes(bytes.fromhex(text.removeprefix("0x")))


@dataclass(frozen=True)
class KeyPair:
    private: PrivateKey
    public: PublicKey

    @property
    def address(self) -> Address:
        return derive_address(self.public)


def _pubkey_of(sk: PrivateKey) -> PublicKey:
    point = coincurve.PrivateKey(sk.scalar).public_key.format(compressed=False)
    return PublicKey(point[1:])


def derive_keypair(seed: bytes | str) -> tuple[PrivateKey, PublicKey]:
    """Derive a deterministic keypair from an arbitrary nonempty seed.

    The scalar is SHA-256(seed) reduced modulo the group order. A zero result
    is re-hashed with a 4-byte big-endian counter suffix.
    """
    if isinstance(seed, str):
        seed = seed.encode("utf-8")
    if not seed:
        raise ValueError("seed must be nonempty")
    digest = hashlib.sha256(seed).digest()
    scalar = int.from_bytes(digest, "big") % CURVE_ORDER
    counter = 0
    while scalar == 0:
        counter += 1
        if counter >= _MAX_RETRIES:
            raise DegenerateSeed(seed)
        digest = hashlib.sha256(seed + counter.to_bytes(4, "big")).digest()
        scalar = int.from_bytes(digest, "big") % CURVE_ORDER
    sk = PrivateKey(scalar.to_bytes(32, "big"))
    return sk, _pubkey_of(sk)


def keypair(seed: bytes | str) -> KeyPair:
    return KeyPair(*derive_keypair(seed))


def derive_address(pk: PublicKey) -> Address:
    return Address(keccak256(pk.point)[-20:])


def sign(sk: PrivateKey, message: bytes) -> Signature:
    digest = keccak256(message)
    raw = coincurve.PrivateKey(sk.scalar).sign_recoverable(digest, hasher=None)
    return Signature.from_bytes(raw)


def recover(message: bytes, sig: Signature) -> PublicKey | None:
    """Recover the signing key, or None if the signature is malformed."""
    try:
        if not (0 < sig.r < CURVE_ORDER and 0 < sig.s < CURVE_ORDER) or sig.recovery > 3:
            return None
        point = coincurve.PublicKey.from_signature_and_message(
            sig.to_bytes(), keccak256(message), hasher=None
        ).format(compressed=False)
    except Exception:
        return None
    return PublicKey(point[1:])


def recover_address(message: bytes, sig: Signature) -> Address | None:
    pk = recover(message, sig)
    return None if pk is None else derive_address(pk)


def verify(pk: PublicKey, message: bytes, sig: Signature) -> bool:
    try:
        if not (0 < sig.r < CURVE_ORDER and 0 < sig.s < CURVE_ORDER):
            return False
        compact = sig.r.to_bytes(32, "big") + sig.s.to_bytes(32, "big")
        der = coincurve.ecdsa.cdata_to_der(coincurve.ecdsa.deserialize_compact(compact))
        key = coincurve.PublicKey(b"\x04" + pk.point)
        return key.verify(der, keccak256(message), hasher=None)
    except Exception:
        return False


def golden_vector(seed: str) -> dict:
    """JSON-ready test vector for a seed."""
    sk, pk = derive_keypair(seed)
    return {
        "seed": seed,
        "private_key_hex": sk.hex(),
        "public_key_hex": pk.hex(),
        "address_hex": derive_address(pk).hex(),
    }
