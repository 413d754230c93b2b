"""Code-offset fuzzy extractor: helper data W = r xor C(key).

The key is split into k-bit blocks, each encoded with the chosen block code,
and the concatenated codewords are masked with the leading PUF response bits.
Reproduction unmasks with a fresh readout and decodes every block.
"""

from __future__ import annotations

import functools
import hashlib
import hmac
import math
import secrets
import struct
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .codes import BCH, REP, RM_REP, CodeParams, DecodeError, ReedMullerRepCode, get_code
from .puf import PufChallenge, PufModel, PufResponse, full_challenge

HELPER_MAGIC = b"PUFW"
HELPER_VERSION = 1
HELPER_MAC_BYTES = 32
_FAMILY_BYTES = {BCH: 1, RM_REP: 2, REP: 3}
_FAMILY_NAMES = {v: k for k, v in _FAMILY_BYTES.items()}


def _to_bits(data: np.ndarray | PufResponse) -> np.ndarray:
    if isinstance(data, PufResponse):
        return data.bits
    arr = np.asarray(data, dtype=np.uint8).reshape(-1)
    if arr.size and arr.max() > 1:
        raise ValueError("bits must be 0 or 1")
    return arr


@dataclass(frozen=True, eq=False)
class KeyMaterial:
    """Secret key bits; never printed."""

    bits: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        arr = np.array(_to_bits(self.bits), dtype=np.uint8)
        if arr.size == 0:
            raise ValueError("empty key")
        arr.setflags(write=False)
        object.__setattr__(self, "bits", arr)

    def __len__(self) -> int:
        return int(self.bits.size)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, KeyMaterial):
            return NotImplemented
        return hmac.compare_digest(self.to_bytes() + bytes([len(self) % 8]),
                                   other.to_bytes() + bytes([len(other) % 8])) and len(self) == len(other)

    __hash__ = None  # type: ignore[assignment]

    def to_bytes(self) -> bytes:
        return np.packbits(self.bits).tobytes()

    @classmethod
    def from_bytes(cls, data: bytes, key_len: int | None = None) -> KeyMaterial:
        bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8))
        if key_len is not None:
            if key_len > bits.size:
                raise ValueError("not enough key bytes")
            bits = bits[:key_len]
        return cls(bits)

    @classmethod
    def random(cls, key_len: int, rng: np.random.Generator | None = None) -> KeyMaterial:
        if rng is None:
            raw = secrets.token_bytes(math.ceil(key_len / 8))
            return cls.from_bytes(raw, key_len)
        return cls(rng.integers(0, 2, key_len, dtype=np.uint8))


@dataclass(frozen=True, eq=False)
class HelperData:
    w: np.ndarray
    code: CodeParams
    key_len: int
    challenge: PufChallenge | None = None

    def __post_init__(self) -> None:
        arr = np.array(_to_bits(self.w), dtype=np.uint8)
        if arr.size != num_blocks(self.key_len, self.code) * self.code.n:
            raise ValueError("helper length does not match code and key length")
        arr.setflags(write=False)
        object.__setattr__(self, "w", arr)

    def __len__(self) -> int:
        return int(self.w.size)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, HelperData):
            return NotImplemented
        return (self.code == other.code and self.key_len == other.key_len
                and self.challenge == other.challenge and np.array_equal(self.w, other.w))

    __hash__ = None  # type: ignore[assignment]


def num_blocks(key_len: int, code: CodeParams) -> int:
    if key_len <= 0:
        raise ValueError("key length must be positive")
    return math.ceil(key_len / code.k)


def response_bits_needed(key_len: int, code: CodeParams) -> int:
    return num_blocks(key_len, code) * code.n


def gen(r: PufResponse | np.ndarray, key: KeyMaterial, code: CodeParams,
        challenge: PufChallenge | None = None) -> HelperData:
    """Helper data binding ``key`` to response ``r``."""
    bits = _to_bits(r)
    nb = num_blocks(len(key), code)
    need = nb * code.n
    if bits.size < need:
        raise ValueError(f"response has {bits.size} bits, code needs {need}")
    padded = np.zeros(nb * code.k, dtype=np.uint8)
    padded[: len(key)] = key.bits
    words = get_code(code).encode(padded.reshape(nb, code.k)).reshape(-1)
    return HelperData(bits[:need] ^ words, code, len(key), challenge)


def rep_many(responses: np.ndarray, helper: HelperData) -> tuple[np.ndarray, np.ndarray]:
    """Batch reproduction: (B, >=|W|) responses -> (B, key_len) keys and ok mask."""
    rs = np.asarray(responses, dtype=np.uint8)
    if rs.ndim == 1:
        rs = rs[None, :]
    need = len(helper)
    if rs.shape[1] < need:
        raise ValueError(f"response has {rs.shape[1]} bits, helper needs {need}")
    code = helper.code
    nb = need // code.n
    noisy = (rs[:, :need] ^ helper.w[None, :]).reshape(-1, code.n)
    msgs, ok = get_code(code).decode(noisy)
    keys = msgs.reshape(len(rs), nb * code.k)[:, : helper.key_len]
    return keys, ok.reshape(len(rs), nb).all(axis=1)


def rep(r_noisy: PufResponse | np.ndarray, helper: HelperData) -> KeyMaterial:
    """Recover the key from a fresh readout; raises DecodeError on failure."""
    keys, ok = rep_many(_to_bits(r_noisy)[None, :], helper)
    if not ok[0]:
        raise DecodeError("key reproduction failed: response too noisy")
    return KeyMaterial(keys[0])


def _round_half_up(x: Fraction) -> int:
    return math.floor(x + Fraction(1, 2))


@dataclass(frozen=True)
class PaperSizes:
    w_bits: int
    gates: int
    num_ros: int


def paper_sizes(code: CodeParams, key_len: int) -> PaperSizes:
    """Helper-data size and hardware estimates using the fractional-block rule.

    The rule scales the code rate without rounding to whole blocks, which is
    how the published size table was computed.
    """
    w = _round_half_up(Fraction(code.n, code.k) * key_len)
    ros = _round_half_up(Fraction(code.n, 3 * code.k) * key_len) + 1
    return PaperSizes(w_bits=w, gates=w + 3, num_ros=ros)


def flip_bits(bits: np.ndarray, rate: float, rng: np.random.Generator) -> np.ndarray:
    """Independent Bernoulli(rate) bit flips (any array shape)."""
    arr = np.asarray(bits, dtype=np.uint8)
    return arr ^ (rng.random(arr.shape) < rate).astype(np.uint8)


def failure_rate_trial(model: PufModel, code: CodeParams, key_len: int, flip_rate: float,
                       trials: int, seed: int = 0, batch: int = 2000) -> float:
    """Fraction of reproductions that fail or return a wrong key.

    Enrollment uses the device's noise-free response; each trial flips every
    response bit independently with probability ``flip_rate``.
    """
    if trials <= 0:
        raise ValueError("trials must be positive")
    if not 0.0 <= flip_rate <= 0.5:
        raise ValueError("flip_rate must lie in [0, 0.5]")
    rng = np.random.default_rng(seed)
    need = response_bits_needed(key_len, code)
    challenge = full_challenge(model, need)
    ref = model.reference(challenge).bits[:need]
    key = KeyMaterial.random(key_len, rng)
    helper = gen(ref, key, code, challenge)
    failures = 0
    done = 0
    while done < trials:
        size = min(batch, trials - done)
        noisy = flip_bits(np.broadcast_to(ref, (size, need)), flip_rate, rng)
        keys, ok = rep_many(noisy, helper)
        wrong = (keys != key.bits[None, :]).any(axis=1)
        failures += int(np.count_nonzero(~ok | wrong))
        done += size
    return failures / trials


def _binom_tail(n: int, p: float, above: int) -> float:
    """P(Bin(n, p) > above)."""
    if above >= n:
        return 0.0
    total = 0.0
    for w in range(above + 1, n + 1):
        total += math.comb(n, w) * p**w * (1 - p) ** (n - w)
    return total


def block_failure_probability(code: CodeParams, flip_rate: float) -> float:
    """Probability that one block fails to decode at i.i.d. bit flip rate."""
    if code.family in (BCH, REP):
        return _binom_tail(code.n, flip_rate, code.t)
    rm = get_code(code)
    if rm.decoder == "two_stage":
        q = _binom_tail(rm.rep, flip_rate, rm.rep // 2)
        fail_by_weight = _rm_failure_fractions()
        return sum(math.comb(16, w) * q**w * (1 - q) ** (16 - w) * fail_by_weight[w]
                   for w in range(17))
    return _nearest_failure_probability(rm.n, flip_rate)


def _nearest_failure_probability(n: int, p: float) -> float:
    """Nearest-codeword failure for the concatenated code, around the zero word.

    Every nonzero codeword has weight n/2 except the all-ones word (weight n).
    A union bound over the 30 half-weight codewords is tight at small p; the
    all-ones term is negligible and included for completeness.
    """
    half = n // 2
    tie_or_worse = _binom_tail(half, p, half // 2 - 1)
    return min(1.0, 30 * tie_or_worse + _binom_tail(n, p, half - 1))


@functools.lru_cache(maxsize=None)
def _rm_failure_fractions() -> tuple[float, ...]:
    """Fraction of RM(1,4) symbol-error patterns of each weight that fail."""
    rm = ReedMullerRepCode(5, decoder="two_stage")
    patterns = ((np.arange(1 << 16)[:, None] >> np.arange(16)) & 1).astype(np.uint8)
    # the code is linear, so decoding errors around the zero word is enough
    msgs, ok = rm.decode_rm(patterns)
    failed = ~ok | msgs.any(axis=1)
    weights = patterns.sum(axis=1)
    return tuple(float(failed[weights == w].mean()) for w in range(17))


def key_failure_probability(code: CodeParams, key_len: int, flip_rate: float) -> float:
    p = block_failure_probability(code, flip_rate)
    return 1.0 - (1.0 - p) ** num_blocks(key_len, code)


# --- helper-data file ----------------------------------------------------

def dump_helper(helper: HelperData, storage_key: bytes) -> bytes:
    """Serialize helper data with an integrity tag under ``storage_key``."""
    code = helper.code
    challenge = helper.challenge.to_bytes() if helper.challenge is not None else b""
    body = (HELPER_MAGIC + bytes([HELPER_VERSION, _FAMILY_BYTES[code.family]])
            + struct.pack(">HHHH", code.n, code.k, code.d, helper.key_len)
            + struct.pack(">H", len(challenge)) + challenge
            + np.packbits(helper.w).tobytes())
    return body + hmac.new(storage_key, body, hashlib.sha256).digest()


def load_helper(data: bytes, storage_key: bytes) -> HelperData:
    if len(data) < len(HELPER_MAGIC) + 12 + HELPER_MAC_BYTES:
        raise ValueError("helper file truncated")
    body, tag = data[:-HELPER_MAC_BYTES], data[-HELPER_MAC_BYTES:]
    if not hmac.compare_digest(tag, hmac.new(storage_key, body, hashlib.sha256).digest()):
        raise ValueError("helper file integrity check failed")
    if body[:4] != HELPER_MAGIC or body[4] != HELPER_VERSION:
        raise ValueError("not a helper-data file")
    family = _FAMILY_NAMES.get(body[5])
    if family is None:
        raise ValueError("unknown code family in helper file")
    n, k, d, key_len = struct.unpack(">HHHH", body[6:14])
    (clen,) = struct.unpack(">H", body[14:16])
    challenge = PufChallenge.from_bytes(body[16 : 16 + clen]) if clen else None
    code = CodeParams(family, n, k, d)
    w_len = num_blocks(key_len, code) * n
    packed = body[16 + clen :]
    if len(packed) != math.ceil(w_len / 8):
        raise ValueError("helper bit-string length mismatch")
    w = np.unpackbits(np.frombuffer(packed, dtype=np.uint8))[:w_len]
    return HelperData(w, code, key_len, challenge)
