"""Certificate-based identity signatures with PUF-bound signing keys.

A trusted authority certifies (identity, pk) with its master key. The
sensor never stores its signing key: it is re-derived from a noisy PUF
readout and the public helper data whenever a reading must be signed.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from random import Random

import numpy as np

from . import bls
from .codes import BCH_492_57, CodeParams
from .fuzzy import HelperData, KeyMaterial, gen, rep
from .groups import ORDER, G1Element, G2Element, encode_g2, hash_to_g1
from .puf import PufChallenge, PufResponse

SK_KEY_BITS = 160
TAU_BYTES = 16
_SK_DOMAIN = b"BLS:SK"


@dataclass(frozen=True)
class MasterKeys:
    msk: int = field(repr=False)
    mpk: G2Element

    @classmethod
    def generate(cls, rng: Random | None = None) -> MasterKeys:
        kp = bls.KeyPair.generate(rng)
        return cls(kp.sk, kp.pk)


@dataclass(frozen=True)
class Certificate:
    pk: G2Element
    sig: G1Element


@dataclass(frozen=True)
class Enrollment:
    """What enrollment leaves on the device: all public."""

    identity: bytes
    pk: G2Element
    cert: Certificate
    helper: HelperData


@dataclass(frozen=True)
class AttestedReading:
    message: bytes
    tau: bytes
    identity: bytes
    pk: G2Element
    sigma: G1Element
    cert: Certificate


def _check_identity(identity: bytes) -> bytes:
    identity = bytes(identity)
    if not identity or len(identity) > 0xFFFF:
        raise ValueError("identity must be 1..65535 bytes")
    return identity


def cert_message(identity: bytes, pk: G2Element) -> bytes:
    identity = _check_identity(identity)
    return struct.pack(">H", len(identity)) + identity + encode_g2(pk)


def cert_hash(identity: bytes, pk: G2Element) -> G1Element:
    """h_c = H(I || pk), the point the certificate signs."""
    return hash_to_g1(bls.CERT_TAG, cert_message(identity, pk))


def reading_message(message: bytes, tau: bytes) -> bytes:
    if len(tau) != TAU_BYTES:
        raise ValueError(f"freshness stamp must be {TAU_BYTES} bytes")
    return bytes(message) + bytes(tau)


def setup(rng: Random | None = None) -> MasterKeys:
    return MasterKeys.generate(rng)


def issue_certificate(master: MasterKeys, identity: bytes, pk: G2Element) -> Certificate:
    return Certificate(pk, bls.sign(master.msk, cert_message(identity, pk), bls.CERT_TAG))


def verify_certificate(mpk: G2Element, identity: bytes, cert: Certificate) -> bool:
    try:
        msg = cert_message(identity, cert.pk)
    except (ValueError, TypeError):
        return False
    return bls.verify(mpk, msg, cert.sig, bls.CERT_TAG)


def derive_signing_key(key: KeyMaterial) -> int:
    """Map PUF-bound key bits to a nonzero scalar."""
    digest = hashlib.sha256(_SK_DOMAIN + struct.pack(">H", len(key)) + key.to_bytes()).digest()
    sk = int.from_bytes(digest, "big") % ORDER
    return sk or 1


def enroll(master: MasterKeys, identity: bytes, response: PufResponse | np.ndarray,
           code: CodeParams = BCH_492_57, challenge: PufChallenge | None = None,
           rng: np.random.Generator | None = None, key_bits: int = SK_KEY_BITS) -> Enrollment:
    """Bind a fresh signing key to the PUF response and certify it."""
    identity = _check_identity(identity)
    key = KeyMaterial.random(key_bits, rng)
    helper = gen(response, key, code, challenge)
    pair = bls.KeyPair.from_secret(derive_signing_key(key))
    return Enrollment(identity, pair.pk, issue_certificate(master, identity, pair.pk), helper)


def recover_signing_key(response: PufResponse | np.ndarray, helper: HelperData) -> int:
    """Re-derive sk from a noisy readout; raises DecodeError when too noisy."""
    return derive_signing_key(rep(response, helper))


def attest(sk: int, identity: bytes, pk: G2Element, cert: Certificate,
           message: bytes, tau: bytes) -> AttestedReading:
    sigma = bls.sign(sk, reading_message(message, tau))
    return AttestedReading(bytes(message), bytes(tau), _check_identity(identity), pk, sigma, cert)


def verify_reading(mpk: G2Element, reading: AttestedReading) -> bool:
    """Both checks: the certificate on (I, pk) and the signature on M || tau."""
    if reading.cert.pk != reading.pk:
        return False
    if not verify_certificate(mpk, reading.identity, reading.cert):
        return False
    try:
        msg = reading_message(reading.message, reading.tau)
    except ValueError:
        return False
    return bls.verify(reading.pk, msg, reading.sigma)
