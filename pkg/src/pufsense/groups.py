"""Bilinear groups (BLS12-381, type-3 pairing) and canonical element encodings.

Group arithmetic comes from RELIC through ``petrelic`` (multiplicative
notation). Decoding here is stricter than the library's: only canonical
compressed encodings of points in the prime-order subgroup are accepted, and
malformed input raises ``EncodingError`` without reaching the C layer.
"""

from __future__ import annotations

import secrets
from dataclasses import dataclass
from random import Random

from petrelic.multiplicative.pairing import G1, G2, GT, G1Element, G2Element, GTElement

__all__ = [
    "G1", "G2", "GT", "G1Element", "G2Element", "GTElement",
    "ORDER", "FIELD_P", "G1_BYTES", "G2_BYTES", "GT_BYTES", "ZP_BYTES",
    "EncodingError", "ElementWidths", "PAPER_WIDTHS", "NATIVE_WIDTHS", "SYMMETRIC_G_BITS",
    "GroupConfig", "DEFAULT_GROUP", "encode_g1", "decode_g1", "encode_g2", "decode_g2",
    "encode_gt", "encode_zp", "decode_zp", "hash_to_g1", "random_scalar", "pair",
    "is_identity",
]

ORDER = int(G1.order())
FIELD_P = int(
    "1a0111ea397fe69a4b1ba7b6434bacd764774b84f38512bf6730d2a0f6b0f6241eabfffeb153ffffb9feffffffffaaab",
    16,
)
G1_BYTES = 49
G2_BYTES = 97
GT_BYTES = 384
ZP_BYTES = 32
_FP_BYTES = 48
_G1_B = 4  # y^2 = x^3 + 4
_G2_B = (4, 4)  # y^2 = x^3 + 4(1 + u)

# element widths of a symmetric (type-1) group at the same security level
SYMMETRIC_G_BITS = 512


class EncodingError(ValueError):
    """Bytes do not encode a valid group element or scalar."""


@dataclass(frozen=True)
class ElementWidths:
    """Serialized sizes in bits, used for overhead accounting."""

    g1: int
    g2: int
    gt: int
    zp: int

    def bits(self, g1: int = 0, g2: int = 0, gt: int = 0, zp: int = 0) -> int:
        return g1 * self.g1 + g2 * self.g2 + gt * self.gt + zp * self.zp

    @classmethod
    def parse(cls, text: str) -> ElementWidths:
        """Parse "g1,g2,gt,zp" in bits, e.g. "160,320,1920,160"."""
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 4:
            raise ValueError("widths need four comma-separated bit counts: g1,g2,gt,zp")
        try:
            vals = [int(p) for p in parts]
        except ValueError:
            raise ValueError(f"non-integer width in {text!r}") from None
        if min(vals) <= 0:
            raise ValueError("widths must be positive")
        return cls(*vals)

    def __str__(self) -> str:
        return f"{self.g1},{self.g2},{self.gt},{self.zp}"


# 80-bit-era MNT-style sizes used by the published overhead figures
PAPER_WIDTHS = ElementWidths(g1=160, g2=320, gt=1920, zp=160)
NATIVE_WIDTHS = ElementWidths(g1=8 * G1_BYTES, g2=8 * G2_BYTES, gt=8 * GT_BYTES, zp=8 * ZP_BYTES)


@dataclass(frozen=True)
class GroupConfig:
    setting: str = "asymmetric"
    curve: str = "BLS12-381"
    widths: ElementWidths = NATIVE_WIDTHS

    def __post_init__(self) -> None:
        if self.setting != "asymmetric":
            raise ValueError("only the asymmetric setting has a concrete backend; "
                             "symmetric sizes are available from the overhead calculators")
        if self.curve != "BLS12-381":
            raise ValueError(f"unsupported curve {self.curve!r}")

    @property
    def order(self) -> int:
        return ORDER

    @property
    def g1(self) -> G1Element:
        return G1.generator()

    @property
    def g2(self) -> G2Element:
        return G2.generator()

    def descriptor(self) -> bytes:
        return f"{self.setting}:{self.curve}".encode()


DEFAULT_GROUP = GroupConfig()


def is_identity(elem: G1Element | G2Element) -> bool:
    return elem == elem.group.neutral_element()


def _is_square_fp(a: int) -> bool:
    a %= FIELD_P
    return a == 0 or pow(a, (FIELD_P - 1) // 2, FIELD_P) == 1


def _fp2_mul(a: tuple[int, int], b: tuple[int, int]) -> tuple[int, int]:
    p = FIELD_P
    return ((a[0] * b[0] - a[1] * b[1]) % p, (a[0] * b[1] + a[1] * b[0]) % p)


def _is_square_fp2(a: tuple[int, int]) -> bool:
    # a is a square in Fp2 iff its norm is a square in Fp
    return _is_square_fp(a[0] * a[0] + a[1] * a[1])


def _check_compressed(data: bytes, width: int, what: str) -> bool:
    """Shared prefix and length checks; True means the identity encoding."""
    if not isinstance(data, (bytes, bytearray)):
        raise EncodingError(f"{what}: expected bytes")
    if len(data) != width:
        raise EncodingError(f"{what}: expected {width} bytes, got {len(data)}")
    if not any(data):
        return True
    if data[0] not in (2, 3):
        raise EncodingError(f"{what}: bad prefix byte {data[0]:#04x}")
    return False


def encode_g1(elem: G1Element) -> bytes:
    if not isinstance(elem, G1Element):
        raise TypeError("expected a G1 element")
    if is_identity(elem):
        return bytes(G1_BYTES)
    return elem.to_binary()


def decode_g1(data: bytes) -> G1Element:
    if _check_compressed(data, G1_BYTES, "G1"):
        return G1.neutral_element()
    x = int.from_bytes(data[1:], "big")
    if x >= FIELD_P:
        raise EncodingError("G1: x coordinate out of range")
    if not _is_square_fp(x * x * x + _G1_B):
        raise EncodingError("G1: x is not on the curve")
    elem = G1Element.from_binary(bytes(data))
    if not elem.is_valid():
        raise EncodingError("G1: point outside the prime-order subgroup")
    if elem.to_binary() != bytes(data):
        raise EncodingError("G1: non-canonical encoding")
    return elem


def encode_g2(elem: G2Element) -> bytes:
    if not isinstance(elem, G2Element):
        raise TypeError("expected a G2 element")
    if is_identity(elem):
        return bytes(G2_BYTES)
    return elem.to_binary()


def decode_g2(data: bytes) -> G2Element:
    if _check_compressed(data, G2_BYTES, "G2"):
        return G2.neutral_element()
    c0 = int.from_bytes(data[1 : 1 + _FP_BYTES], "big")
    c1 = int.from_bytes(data[1 + _FP_BYTES :], "big")
    if c0 >= FIELD_P or c1 >= FIELD_P:
        raise EncodingError("G2: x coordinate out of range")
    x = (c0, c1)
    x3 = _fp2_mul(_fp2_mul(x, x), x)
    rhs = ((x3[0] + _G2_B[0]) % FIELD_P, (x3[1] + _G2_B[1]) % FIELD_P)
    if not _is_square_fp2(rhs):
        raise EncodingError("G2: x is not on the curve")
    elem = G2Element.from_binary(bytes(data))
    if not elem.is_valid():
        raise EncodingError("G2: point outside the prime-order subgroup")
    if elem.to_binary() != bytes(data):
        raise EncodingError("G2: non-canonical encoding")
    return elem


def encode_gt(elem: GTElement) -> bytes:
    return elem.to_binary()


def encode_zp(x: int) -> bytes:
    if not 0 <= x < ORDER:
        raise ValueError("scalar out of range")
    return x.to_bytes(ZP_BYTES, "big")


def decode_zp(data: bytes) -> int:
    if len(data) != ZP_BYTES:
        raise EncodingError(f"scalar: expected {ZP_BYTES} bytes")
    x = int.from_bytes(data, "big")
    if x >= ORDER:
        raise EncodingError("scalar out of range")
    return x


def hash_to_g1(tag: bytes, message: bytes) -> G1Element:
    """Domain-separated hash onto G1 (RELIC's map; tag is length-prefixed)."""
    if len(tag) > 255:
        raise ValueError("hash tag too long")
    return G1.hash_to_point(bytes([len(tag)]) + tag + bytes(message))


def random_scalar(rng: Random | None = None) -> int:
    """Uniform nonzero scalar; pass a seeded Random for reproducible runs."""
    if rng is None:
        return secrets.randbelow(ORDER - 1) + 1
    return rng.randrange(1, ORDER)


def pair(a: G1Element, b: G2Element) -> GTElement:
    return a.pair(b)
