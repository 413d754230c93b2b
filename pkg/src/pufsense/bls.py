"""BLS short signatures on BLS12-381 with multi-message aggregation.

Signatures live in G1 (sigma = H(m)^sk), public keys in G2 (pk = g2^sk).
Every hash onto G1 carries a domain tag so that reading signatures and
certificates can never be confused.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from random import Random
from typing import Iterable, Sequence

from .groups import (
    G1, G2, ORDER, G1Element, G2Element, encode_g2, hash_to_g1, is_identity, random_scalar,
)

MSG_TAG = b"BLS:MSG"
CERT_TAG = b"BLS:CERT"
BOOT_TAG = b"BLS:BOOT"


@dataclass(frozen=True)
class KeyPair:
    sk: int = field(repr=False)
    pk: G2Element

    @classmethod
    def from_secret(cls, sk: int) -> KeyPair:
        sk %= ORDER
        if sk == 0:
            raise ValueError("secret key must be nonzero mod the group order")
        return cls(sk, G2.generator() ** sk)

    @classmethod
    def generate(cls, rng: Random | None = None) -> KeyPair:
        return cls.from_secret(random_scalar(rng))


def sign(sk: int, message: bytes, tag: bytes = MSG_TAG) -> G1Element:
    return hash_to_g1(tag, message) ** sk


def verify(pk: G2Element, message: bytes, signature: G1Element, tag: bytes = MSG_TAG) -> bool:
    """e(sigma, g2) == e(H(m), pk); identity keys and signatures are refused."""
    if not isinstance(pk, G2Element) or not isinstance(signature, G1Element):
        return False
    if is_identity(pk) or is_identity(signature):
        return False
    return signature.pair(G2.generator()) == hash_to_g1(tag, message).pair(pk)


def aggregate(signatures: Iterable[G1Element]) -> G1Element:
    sigs = list(signatures)
    if not sigs:
        raise ValueError("nothing to aggregate")
    out = G1.neutral_element()
    for s in sigs:
        if not isinstance(s, G1Element):
            raise TypeError("signatures must be G1 elements")
        out = out * s
    return out


# an aggregate item is (pk, message) or (pk, message, tag)
AggregateItem = tuple[G2Element, bytes] | tuple[G2Element, bytes, bytes]


def _normalize(items: Sequence[AggregateItem]) -> list[tuple[G2Element, bytes, bytes]]:
    out = []
    seen = set()
    for item in items:
        if len(item) == 2:
            pk, msg = item  # type: ignore[misc]
            tag = MSG_TAG
        else:
            pk, msg, tag = item  # type: ignore[misc]
        key = (encode_g2(pk), bytes(tag), bytes(msg))
        if key in seen:
            raise ValueError("duplicate (key, message) pair in aggregate")
        seen.add(key)
        out.append((pk, bytes(msg), bytes(tag)))
    return out


def aggregate_verify(items: Sequence[AggregateItem], agg: G1Element) -> bool:
    """e(agg, g2) == prod_i e(H(m_i), pk_i), pairing once per distinct key."""
    entries = _normalize(items)
    if not entries:
        raise ValueError("nothing to verify")
    if not isinstance(agg, G1Element) or is_identity(agg):
        return False
    grouped: dict[bytes, tuple[G2Element, G1Element]] = {}
    for pk, msg, tag in entries:
        if not isinstance(pk, G2Element) or is_identity(pk):
            return False
        k = encode_g2(pk)
        h = hash_to_g1(tag, msg)
        if k in grouped:
            grouped[k] = (pk, grouped[k][1] * h)
        else:
            grouped[k] = (pk, h)
    rhs = None
    for pk, h in grouped.values():
        term = h.pair(pk)
        rhs = term if rhs is None else rhs * term
    return agg.pair(G2.generator()) == rhs
