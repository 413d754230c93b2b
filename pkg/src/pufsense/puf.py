"""Simulated SRAM and ring-oscillator PUF sources and response quality metrics.

Both models are deterministic in (device seed, challenge, readout index).
The noise-free ``reference`` response of a device is what enrollment would
ideally capture; ``sample`` returns a noisy readout.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

SRAM_RANGE = "sram_address_range"
RO_PAIRS = "ro_pair_sequence"

_KIND_CODES = {SRAM_RANGE: 1, RO_PAIRS: 2}
_KIND_NAMES = {v: k for k, v in _KIND_CODES.items()}


@dataclass(frozen=True)
class PufChallenge:
    """Selects which cells (SRAM) or oscillator pairs (RO) are read."""

    kind: str
    payload: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.kind not in _KIND_CODES:
            raise ValueError(f"unknown challenge kind {self.kind!r}")
        object.__setattr__(self, "payload", tuple(int(v) for v in self.payload))
        if self.kind == SRAM_RANGE:
            if len(self.payload) != 2:
                raise ValueError("SRAM challenge needs (start, stop)")
            start, stop = self.payload
            if not 0 <= start < stop:
                raise ValueError("SRAM challenge range must be non-empty")
        else:
            if not self.payload:
                raise ValueError("RO challenge needs at least one pair")
            if min(self.payload) < 0:
                raise ValueError("RO pair index must be non-negative")

    @classmethod
    def sram_range(cls, start: int, stop: int) -> PufChallenge:
        return cls(SRAM_RANGE, (start, stop))

    @classmethod
    def ro_pairs(cls, pairs: Iterable[int]) -> PufChallenge:
        return cls(RO_PAIRS, tuple(pairs))

    def to_bytes(self) -> bytes:
        code = _KIND_CODES[self.kind]
        if self.kind == SRAM_RANGE:
            return struct.pack(">BII", code, *self.payload)
        if max(self.payload) > 0xFFFF:
            raise ValueError("RO pair index does not fit in 16 bits")
        return struct.pack(f">BH{len(self.payload)}H", code, len(self.payload), *self.payload)

    @classmethod
    def from_bytes(cls, data: bytes) -> PufChallenge:
        if not data:
            raise ValueError("empty challenge encoding")
        kind = _KIND_NAMES.get(data[0])
        if kind == SRAM_RANGE:
            if len(data) != 9:
                raise ValueError("bad SRAM challenge length")
            return cls(kind, struct.unpack(">II", data[1:]))
        if kind == RO_PAIRS:
            if len(data) < 3:
                raise ValueError("truncated RO challenge")
            (count,) = struct.unpack(">H", data[1:3])
            if len(data) != 3 + 2 * count:
                raise ValueError("bad RO challenge length")
            return cls(kind, struct.unpack(f">{count}H", data[3:]))
        raise ValueError(f"unknown challenge kind byte {data[0]}")


@dataclass(frozen=True, eq=False)
class PufResponse:
    """A bit string read from a PUF (uint8 array of 0/1, read-only)."""

    bits: np.ndarray
    device_id: str = ""

    def __post_init__(self) -> None:
        arr = np.array(self.bits, dtype=np.uint8).reshape(-1)
        if arr.size == 0:
            raise ValueError("empty response")
        if arr.max() > 1:
            raise ValueError("response bits must be 0 or 1")
        arr.setflags(write=False)
        object.__setattr__(self, "bits", arr)

    def __len__(self) -> int:
        return int(self.bits.size)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PufResponse):
            return NotImplemented
        return np.array_equal(self.bits, other.bits)

    __hash__ = None  # type: ignore[assignment]

    def to_string(self) -> str:
        return "".join("1" if b else "0" for b in self.bits.tolist())

    @classmethod
    def from_string(cls, text: str, device_id: str = "") -> PufResponse:
        text = text.strip()
        if not text or set(text) - {"0", "1"}:
            raise ValueError("response line must be a non-empty 0/1 string")
        return cls(np.frombuffer(text.encode(), dtype=np.uint8) - ord("0"), device_id)


def _bits_of(response: PufResponse | np.ndarray | Sequence[int]) -> np.ndarray:
    if isinstance(response, PufResponse):
        return response.bits
    arr = np.asarray(response, dtype=np.uint8).reshape(-1)
    if arr.size == 0:
        raise ValueError("empty response")
    return arr


@dataclass
class SramPufModel:
    """Power-up SRAM cells: a biased stable value plus a per-cell flip chance.

    Per-cell flip probabilities follow ``0.5 * Beta(a, b)`` with mean equal to
    ``mean_flip_rate``; ``reliability_shape`` sets how concentrated they are
    (larger means more uniform cells).
    """

    num_cells: int
    bias: float  # P(stable value is 1)
    mean_flip_rate: float
    reliability_shape: float = 0.05
    rng_seed: int = 0
    device_id: str = ""
    _stable: np.ndarray = field(init=False, repr=False)
    _flip_p: np.ndarray = field(init=False, repr=False)
    _readouts: int = field(init=False, default=0, repr=False)

    def __post_init__(self) -> None:
        if self.num_cells <= 0:
            raise ValueError("num_cells must be positive")
        if not 0.0 <= self.bias <= 1.0:
            raise ValueError("bias must lie in [0, 1]")
        if not 0.0 <= self.mean_flip_rate <= 0.5:
            raise ValueError("mean_flip_rate must lie in [0, 0.5]")
        if self.reliability_shape <= 0:
            raise ValueError("reliability_shape must be positive")
        rng = np.random.default_rng([self.rng_seed, 0])
        self._stable = (rng.random(self.num_cells) < self.bias).astype(np.uint8)
        m = self.mean_flip_rate
        if m in (0.0, 0.5):
            self._flip_p = np.full(self.num_cells, m)
        else:
            k = self.reliability_shape
            self._flip_p = 0.5 * rng.beta(2 * m * k, (1 - 2 * m) * k, self.num_cells)

    def _cells(self, challenge: PufChallenge) -> slice:
        if challenge.kind != SRAM_RANGE:
            raise ValueError("SRAM model needs an address-range challenge")
        start, stop = challenge.payload
        if stop > self.num_cells:
            raise ValueError(f"challenge range exceeds {self.num_cells} cells")
        return slice(start, stop)

    def reference(self, challenge: PufChallenge) -> PufResponse:
        return PufResponse(self._stable[self._cells(challenge)], self.device_id)

    def sample(self, challenge: PufChallenge, index: int | None = None) -> PufResponse:
        cells = self._cells(challenge)
        if index is None:
            index = self._readouts
            self._readouts += 1
        # noise for the whole array so overlapping challenges agree
        u = np.random.default_rng([self.rng_seed, 1, index]).random(self.num_cells)
        flips = (u < self._flip_p).astype(np.uint8)
        return PufResponse((self._stable ^ flips)[cells], self.device_id)

    def with_flip_rate(self, rate: float) -> SramPufModel:
        """Same device at a different operating point (e.g. temperature)."""
        return replace(self, mean_flip_rate=rate)


@dataclass
class RoPufModel:
    """Pairs of ring oscillators racing two counters.

    When the faster oscillator's counter overflows, selected bits of the
    slower oscillator's counter form the response. Pair ``k`` compares
    oscillators ``k`` and ``k + 1``; on an exact tie the lower index wins.
    """

    num_ros: int = 1040
    stages: int = 3
    counter_bits: int = 16
    extract_positions: tuple[int, ...] = (8, 9, 10)
    freq_mean: float = 200e6  # Hz
    freq_process_sd: float = 6.8e6  # device-to-device spread
    freq_noise_sd: float = 3.3e4  # per-readout jitter
    rng_seed: int = 0
    device_id: str = ""
    _freqs: np.ndarray = field(init=False, repr=False)
    _readouts: int = field(init=False, default=0, repr=False)

    def __post_init__(self) -> None:
        if self.num_ros < 2:
            raise ValueError("need at least two oscillators")
        if self.stages < 1 or self.stages % 2 == 0:
            raise ValueError("a ring oscillator needs an odd number of stages")
        if not self.extract_positions or max(self.extract_positions) >= self.counter_bits:
            raise ValueError("extract positions must lie inside the counter")
        if self.freq_mean <= 0:
            raise ValueError("freq_mean must be positive")
        rng = np.random.default_rng([self.rng_seed, 0])
        self._freqs = rng.normal(self.freq_mean, self.freq_process_sd, self.num_ros)
        if self._freqs.min() <= 0:
            raise ValueError("process spread produced a non-positive frequency")

    @property
    def num_pairs(self) -> int:
        return self.num_ros - 1

    @property
    def bits_per_pair(self) -> int:
        return len(self.extract_positions)

    def _pairs(self, challenge: PufChallenge) -> np.ndarray:
        if challenge.kind != RO_PAIRS:
            raise ValueError("RO model needs a pair-sequence challenge")
        pairs = np.asarray(challenge.payload, dtype=np.int64)
        if pairs.max() >= self.num_pairs:
            raise ValueError(f"pair index exceeds {self.num_pairs - 1}")
        return pairs

    def race(self, freqs: np.ndarray, pairs: np.ndarray) -> np.ndarray:
        """Loser counter value at the winner's overflow, per pair."""
        fa, fb = freqs[pairs], freqs[pairs + 1]
        fast = np.maximum(fa, fb)
        slow = np.minimum(fa, fb)
        full = 1 << self.counter_bits
        counts = np.floor(full * (slow / fast)).astype(np.int64)
        return np.minimum(counts, full - 1)

    def _extract(self, counts: np.ndarray) -> np.ndarray:
        pos = np.asarray(self.extract_positions, dtype=np.int64)
        return ((counts[:, None] >> pos[None, :]) & 1).astype(np.uint8).reshape(-1)

    def reference(self, challenge: PufChallenge) -> PufResponse:
        return PufResponse(self._extract(self.race(self._freqs, self._pairs(challenge))), self.device_id)

    def sample(self, challenge: PufChallenge, index: int | None = None) -> PufResponse:
        pairs = self._pairs(challenge)
        if index is None:
            index = self._readouts
            self._readouts += 1
        jitter = np.random.default_rng([self.rng_seed, 1, index]).normal(
            0.0, self.freq_noise_sd, self.num_ros
        )
        return PufResponse(self._extract(self.race(self._freqs + jitter, pairs)), self.device_id)

    def with_noise(self, noise_sd: float) -> RoPufModel:
        return replace(self, freq_noise_sd=noise_sd)


PufModel = SramPufModel | RoPufModel


def sample_sram(model: SramPufModel, challenge: PufChallenge, index: int | None = None) -> PufResponse:
    if not isinstance(model, SramPufModel):
        raise TypeError("expected an SramPufModel")
    return model.sample(challenge, index)


def sample_ro(model: RoPufModel, challenge: PufChallenge, index: int | None = None) -> PufResponse:
    if not isinstance(model, RoPufModel):
        raise TypeError("expected an RoPufModel")
    return model.sample(challenge, index)


def full_challenge(model: PufModel, bits: int | None = None) -> PufChallenge:
    """Challenge covering the first ``bits`` response bits (default: all)."""
    if isinstance(model, SramPufModel):
        n = model.num_cells if bits is None else bits
        return PufChallenge.sram_range(0, n)
    per = model.bits_per_pair
    n = model.num_pairs if bits is None else -(-bits // per)
    return PufChallenge.ro_pairs(range(n))


# device profiles matching the evaluated boards
def atmega328p_sram(seed: int = 0, device_id: str = "") -> SramPufModel:
    return SramPufModel(8192, bias=0.635, mean_flip_rate=0.034, rng_seed=seed, device_id=device_id)


def cortex_m4_sram(seed: int = 0, device_id: str = "") -> SramPufModel:
    return SramPufModel(122880, bias=0.6396, mean_flip_rate=0.0766, rng_seed=seed, device_id=device_id)


def zynq7010_ro(seed: int = 0, device_id: str = "") -> RoPufModel:
    return RoPufModel(rng_seed=seed, device_id=device_id)


PROFILES = {
    "sram8": atmega328p_sram,
    "sram32": cortex_m4_sram,
    "ro": zynq7010_ro,
}


def make_profile(name: str, seed: int = 0, device_id: str = "") -> PufModel:
    try:
        factory = PROFILES[name]
    except KeyError:
        raise ValueError(f"unknown PUF profile {name!r}; choose from {sorted(PROFILES)}") from None
    return factory(seed, device_id)


# --- metrics -------------------------------------------------------------

def hamming_weight(response: PufResponse | np.ndarray) -> float:
    """Fraction of ones in the response."""
    bits = _bits_of(response)
    return float(bits.mean())


def fractional_hd(a: PufResponse | np.ndarray, b: PufResponse | np.ndarray) -> float:
    x, y = _bits_of(a), _bits_of(b)
    if x.size != y.size:
        raise ValueError(f"length mismatch: {x.size} vs {y.size}")
    return float(np.count_nonzero(x != y)) / x.size


def hd_intra(reference: PufResponse | np.ndarray,
             samples: Sequence[PufResponse | np.ndarray]) -> tuple[float, float]:
    """Mean and max fractional distance of repeated readouts to a reference."""
    if len(samples) == 0:
        raise ValueError("need at least one sample")
    dists = [fractional_hd(reference, s) for s in samples]
    return float(np.mean(dists)), float(np.max(dists))


def hd_inter(responses: Sequence[PufResponse | np.ndarray]) -> float:
    """Mean pairwise fractional distance across devices."""
    if len(responses) < 2:
        raise ValueError("need responses from at least two devices")
    mat = np.stack([_bits_of(r) for r in responses]).astype(np.float64)
    n = mat.shape[1]
    hd = mat @ (1 - mat).T
    hd = hd + hd.T
    iu = np.triu_indices(len(responses), k=1)
    return float(hd[iu].mean() / n)


@dataclass(frozen=True)
class QualityStats:
    mean_hw: float
    mean_hd_intra: float
    max_hd_intra: float
    mean_hd_inter: float | None = None


def characterize(reference: PufResponse, samples: Sequence[PufResponse],
                 other_devices: Sequence[PufResponse] = ()) -> QualityStats:
    """Summarize one device's readouts, optionally against other devices."""
    hw = float(np.mean([hamming_weight(s) for s in samples]))
    mean_intra, max_intra = hd_intra(reference, samples)
    inter = hd_inter([reference, *other_devices]) if other_devices else None
    return QualityStats(hw, mean_intra, max_intra, inter)


# --- text dump: one 0/1 line per response --------------------------------

def dump_responses(responses: Iterable[PufResponse]) -> str:
    return "".join(r.to_string() + "\n" for r in responses)


def parse_responses(text: str) -> list[PufResponse]:
    out = []
    for lineno, line in enumerate(io.StringIO(text), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            out.append(PufResponse.from_string(line))
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    if not out:
        raise ValueError("no responses found")
    return out


def read_responses(path: str | Path) -> list[PufResponse]:
    return parse_responses(Path(path).read_text())
