"""Binary block codes for code-offset helper data.

All codecs work on batches: ``encode`` maps a (B, k) bit array to (B, n) and
``decode`` maps (B, n) to a (B, k) message array plus a boolean ``ok`` mask.
Rows whose decoding failure is detected have ``ok`` False.

The BCH decoder is vectorized over the batch. Syndrome computation and the
Chien root search are GF(2)-linear maps on the bit representation of field
elements, so both run as a single 0/1 matrix product; Berlekamp-Massey runs
column-wise over the whole batch with log/antilog tables.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

BCH = "bch"
RM_REP = "rm_rep"
REP = "rep"


class DecodeError(ValueError):
    """The received word lies outside the decoder's correction radius."""


@dataclass(frozen=True)
class CodeParams:
    family: str
    n: int
    k: int
    d: int

    def __post_init__(self) -> None:
        if self.family not in (BCH, RM_REP, REP):
            raise ValueError(f"unknown code family {self.family!r}")
        if not 0 < self.k <= self.n or not 0 < self.d <= self.n:
            raise ValueError("need 0 < k <= n and 0 < d <= n")

    @property
    def t(self) -> int:
        return (self.d - 1) // 2

    @property
    def rate(self) -> float:
        return self.k / self.n

    def label(self) -> str:
        names = {BCH: "BCH", RM_REP: "RM||Rep", REP: "Rep"}
        return f"{names[self.family]}({self.n},{self.k},{self.d})"


# BCH(511,76,t=85) shortened by 19 positions
BCH_492_57 = CodeParams(BCH, 492, 57, 171)
# first-order Reed-Muller RM(1,4) = (16,5,8), each bit repeated 5 times
RM_REP_80_5 = CodeParams(RM_REP, 80, 5, 40)
REP_5 = CodeParams(REP, 5, 1, 5)

CODES = {"bch": BCH_492_57, "rm_rep": RM_REP_80_5, "rep": REP_5}


def _as_batch(bits: np.ndarray, width: int, what: str) -> np.ndarray:
    arr = np.asarray(bits, dtype=np.uint8)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != width:
        raise ValueError(f"{what} must have {width} bits per row, got shape {arr.shape}")
    return arr


class BlockCode:
    params: CodeParams

    @property
    def n(self) -> int:
        return self.params.n

    @property
    def k(self) -> int:
        return self.params.k

    @property
    def decoding_radius(self) -> int:
        """Number of errors every received word is guaranteed to survive."""
        return self.params.t

    def encode(self, messages: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def decode(self, words: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def decode_one(self, word: np.ndarray) -> np.ndarray:
        msgs, ok = self.decode(word)
        if not ok[0]:
            raise DecodeError(f"{self.params.label()}: too many errors")
        return msgs[0]


class RepetitionCode(BlockCode):
    def __init__(self, n: int = 5) -> None:
        if n % 2 == 0:
            raise ValueError("repetition length must be odd")
        self.params = CodeParams(REP, n, 1, n)

    def encode(self, messages: np.ndarray) -> np.ndarray:
        m = _as_batch(messages, 1, "message")
        return np.repeat(m, self.n, axis=1)

    def decode(self, words: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        w = _as_batch(words, self.n, "codeword")
        msgs = (w.sum(axis=1, dtype=np.int32) * 2 > self.n).astype(np.uint8)[:, None]
        return msgs, np.ones(len(w), dtype=bool)


class ReedMullerRepCode(BlockCode):
    """RM(1,4) outer code, every symbol repeated ``rep`` times.

    ``decoder="nearest"`` (default) picks the closest of the 32 codewords of
    the full concatenated code, reporting ties as failures; it corrects any
    pattern of up to 19 flips in 80 bits. ``decoder="two_stage"`` takes a
    majority vote per repeated symbol and then Reed's majority-logic decoding
    of RM(1,4); a tied vote or a re-encoding farther than 3 from the symbol
    estimate is a failure.
    """

    DECODERS = ("nearest", "two_stage")

    def __init__(self, rep: int = 5, decoder: str = "nearest") -> None:
        if rep % 2 == 0:
            raise ValueError("repetition length must be odd")
        if decoder not in self.DECODERS:
            raise ValueError(f"decoder must be one of {self.DECODERS}")
        self.rep = rep
        self.decoder = decoder
        self.params = CodeParams(RM_REP, 16 * rep, 5, 8 * rep)
        pts = np.arange(16)
        # generator rows: constant 1, then the four coordinate functions
        self._gen = np.vstack([np.ones(16, dtype=np.uint8)]
                              + [((pts >> i) & 1).astype(np.uint8) for i in range(4)])
        all_msgs = ((np.arange(32)[:, None] >> np.arange(5)) & 1).astype(np.uint8)
        self._msgs = all_msgs
        self._book = 1.0 - 2.0 * self.encode(all_msgs).astype(np.float32)  # +-1 codebook

    @property
    def decoding_radius(self) -> int:
        if self.decoder == "nearest":
            return self.params.t
        # RM(1,4) survives 3 symbol errors; a fourth needs 4 * (rep // 2 + 1) flips
        return 4 * (self.rep // 2 + 1) - 1

    def encode_rm(self, messages: np.ndarray) -> np.ndarray:
        m = _as_batch(messages, 5, "message")
        return ((m.astype(np.int32) @ self._gen) & 1).astype(np.uint8)

    def decode_rm(self, symbols: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Reed majority-logic decoding of RM(1,4)."""
        r = _as_batch(symbols, 16, "RM codeword").astype(np.int32)
        b = len(r)
        msgs = np.zeros((b, 5), dtype=np.uint8)
        ok = np.ones(b, dtype=bool)
        pts = np.arange(16)
        for i in range(4):
            lo = pts[((pts >> i) & 1) == 0]
            votes = (r[:, lo] ^ r[:, lo | (1 << i)]).sum(axis=1)
            ok &= votes != 4
            msgs[:, i + 1] = votes > 4
        residual = r ^ ((msgs[:, 1:].astype(np.int32) @ self._gen[1:]) & 1)
        ones = residual.sum(axis=1)
        ok &= ones != 8
        msgs[:, 0] = ones > 8
        dist = (self.encode_rm(msgs) != r).sum(axis=1)
        ok &= dist <= 3
        return msgs, ok

    def encode(self, messages: np.ndarray) -> np.ndarray:
        return np.repeat(self.encode_rm(messages), self.rep, axis=1)

    def decode(self, words: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        w = _as_batch(words, self.n, "codeword")
        if self.decoder == "two_stage":
            groups = w.reshape(len(w), 16, self.rep).sum(axis=2, dtype=np.int32)
            symbols = (groups * 2 > self.rep).astype(np.uint8)
            return self.decode_rm(symbols)
        scores = (1.0 - 2.0 * w.astype(np.float32)) @ self._book.T
        best = scores.argmax(axis=1)
        top = scores[np.arange(len(w)), best]
        ok = (scores == top[:, None]).sum(axis=1) == 1
        return self._msgs[best].copy(), ok


# --- binary BCH ----------------------------------------------------------

PRIMITIVE_POLYS = {3: 0b1011, 4: 0b10011, 5: 0b100101, 6: 0b1000011,
                   7: 0b10001001, 8: 0b100011101, 9: 0b1000010001, 10: 0b10000001001}


def _gf2_polymul(a: int, b: int) -> int:
    out = 0
    while b:
        if b & 1:
            out ^= a
        a <<= 1
        b >>= 1
    return out


def _gf2_polymod(a: int, m: int) -> int:
    dm = m.bit_length() - 1
    while a.bit_length() - 1 >= dm:
        a ^= m << (a.bit_length() - 1 - dm)
    return a


class GaloisTables:
    """Log/antilog tables for GF(2^m) in polynomial basis."""

    def __init__(self, m: int, prim: int | None = None) -> None:
        self.m = m
        self.prim = PRIMITIVE_POLYS[m] if prim is None else prim
        self.order = (1 << m) - 1
        exp = np.zeros(2 * self.order, dtype=np.int64)
        log = np.full(1 << m, -1, dtype=np.int64)
        x = 1
        for i in range(self.order):
            exp[i] = x
            if log[x] != -1:
                raise ValueError("polynomial is not primitive")
            log[x] = i
            x <<= 1
            if x >> m:
                x ^= self.prim
        exp[self.order:] = exp[: self.order]
        self.exp = exp
        self.log = log

    def mul(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        a = np.asarray(a)
        b = np.asarray(b)
        out = self.exp[(self.log[a] + self.log[b]) % self.order]
        return np.where((a == 0) | (b == 0), 0, out)

    def mul_scalar(self, a: int, b: int) -> int:
        if a == 0 or b == 0:
            return 0
        return int(self.exp[(self.log[a] + self.log[b]) % self.order])

    def pow_alpha(self, e: int) -> int:
        return int(self.exp[e % self.order])


class BchCode(BlockCode):
    """Narrow-sense binary BCH code of length 2^m - 1, optionally shortened.

    Codewords are systematic: bit ``j`` is the coefficient of x^j, positions
    ``0 .. n-k-1`` carry parity and the message occupies the top ``k`` positions.
    Shortening drops the highest positions (fixed to zero).
    """

    def __init__(self, m: int, t: int, shorten: int = 0, prim: int | None = None) -> None:
        self.gf = GaloisTables(m, prim)
        self.t_design = t
        self.full_n = self.gf.order
        self.generator = self._generator_poly()
        full_k = self.full_n - (self.generator.bit_length() - 1)
        if not 0 <= shorten < full_k:
            raise ValueError("cannot shorten by that many positions")
        self.shorten = shorten
        self.full_k = full_k
        n, k = self.full_n - shorten, full_k - shorten
        self.params = CodeParams(BCH, n, k, 2 * t + 1)
        self.parity_len = self.full_n - full_k
        self._build_matrices()

    def _generator_poly(self) -> int:
        gf, n = self.gf, self.full_n
        seen: set[int] = set()
        g = 1
        for i in range(1, 2 * self.t_design + 1):
            if i % n in seen:
                continue
            coset = []
            j = i % n
            while j not in coset:
                coset.append(j)
                j = (2 * j) % n
            seen.update(coset)
            # minimal polynomial: product of (x - alpha^j) over the coset
            poly = [1]
            for j in coset:
                root = gf.pow_alpha(j)
                nxt = [0] * (len(poly) + 1)
                for idx, c in enumerate(poly):
                    nxt[idx + 1] ^= c
                    nxt[idx] ^= gf.mul_scalar(c, root)
                poly = nxt
            if any(c > 1 for c in poly):
                raise AssertionError("minimal polynomial not binary")
            g = _gf2_polymul(g, sum(c << idx for idx, c in enumerate(poly)))
        return g

    def _build_matrices(self) -> None:
        gf, m, t = self.gf, self.gf.m, self.t_design
        n, k, r = self.n, self.k, self.parity_len
        # systematic generator: message bit i sits at x^(r+i)
        gen = np.zeros((k, n), dtype=np.uint8)
        for i in range(k):
            rem = _gf2_polymod(1 << (r + i), self.generator)
            for j in range(r):
                gen[i, j] = (rem >> j) & 1
            gen[i, r + i] = 1
        self._gen = gen.astype(np.float32)

        pos = np.arange(n, dtype=np.int64)
        bitpos = np.arange(m, dtype=np.int64)
        # odd syndromes S_{2j+1} = sum_pos r_pos alpha^{pos (2j+1)}
        odd = 2 * np.arange(t, dtype=np.int64) + 1
        vals = gf.exp[(pos[:, None] * odd[None, :]) % gf.order]  # (n, t)
        self._syn = ((vals[:, :, None] >> bitpos) & 1).reshape(n, t * m).astype(np.float32)

        # Chien: Lambda(alpha^-pos) = sum_k Lambda_k alpha^{-pos k}; input bit b of
        # Lambda_k contributes alpha^{b - pos k}
        ks = np.arange(t + 1, dtype=np.int64)
        expo = (bitpos[None, :, None] - ks[:, None, None] * pos[None, None, :]) % gf.order
        elems = gf.exp[expo]  # (t+1, m, n)
        chien = (elems[..., None] >> bitpos) & 1  # (t+1, m, n, m)
        self._chien = chien.reshape((t + 1) * m, n * m).astype(np.float32)
        self._bitpos = bitpos

    def encode(self, messages: np.ndarray) -> np.ndarray:
        msg = _as_batch(messages, self.k, "message")
        return (np.rint(msg.astype(np.float32) @ self._gen).astype(np.int64) & 1).astype(np.uint8)

    def syndromes(self, words: np.ndarray) -> np.ndarray:
        """S_1 .. S_2t as GF(2^m) integers, shape (B, 2t)."""
        gf, m, t = self.gf, self.gf.m, self.t_design
        w = _as_batch(words, self.n, "codeword")
        planes = np.rint(w.astype(np.float32) @ self._syn).astype(np.int64) & 1
        odd = (planes.reshape(len(w), t, m) << self._bitpos).sum(axis=2)
        syn = np.zeros((len(w), 2 * t), dtype=np.int64)
        for idx in range(1, 2 * t + 1):
            if idx % 2:
                syn[:, idx - 1] = odd[:, idx // 2]
            else:
                half = syn[:, idx // 2 - 1]
                syn[:, idx - 1] = gf.mul(half, half)
        return syn

    def _berlekamp_massey(self, syn: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        gf, t = self.gf, self.t_design
        b = len(syn)
        width = t + 2
        lam = np.zeros((b, width), dtype=np.int64)
        lam[:, 0] = 1
        prev = lam.copy()
        length = np.zeros(b, dtype=np.int64)
        last_d = np.ones(b, dtype=np.int64)
        for step in range(2 * t):
            span = min(step, width - 1)
            disc = syn[:, step].copy()
            if span:
                terms = gf.mul(lam[:, 1 : span + 1], syn[:, step - 1 :: -1][:, :span])
                disc ^= np.bitwise_xor.reduce(terms, axis=1)
            prev = np.concatenate([np.zeros((b, 1), dtype=np.int64), prev[:, :-1]], axis=1)
            nz = disc != 0
            if not nz.any():
                continue
            coef = np.where(nz, gf.exp[(gf.log[np.where(nz, disc, 1)] - gf.log[last_d]) % gf.order], 0)
            new_lam = lam ^ gf.mul(coef[:, None], prev)
            grow = nz & (2 * length <= step)
            prev = np.where(grow[:, None], lam, prev)
            last_d = np.where(grow, disc, last_d)
            length = np.where(grow, step + 1 - length, length)
            lam = new_lam
        return lam[:, : t + 1], length

    def decode(self, words: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        w = _as_batch(words, self.n, "codeword")
        b = len(w)
        ok = np.ones(b, dtype=bool)
        corrected = w.copy()
        syn = self.syndromes(w)
        bad = np.flatnonzero(syn.any(axis=1))
        if bad.size:
            lam, length = self._berlekamp_massey(syn[bad])
            m, n = self.gf.m, self.n
            bits = ((lam[:, :, None] >> self._bitpos) & 1).reshape(len(bad), -1).astype(np.float32)
            evals = np.rint(bits @ self._chien).astype(np.int64) & 1
            roots = ~evals.reshape(len(bad), n, m).any(axis=2)
            nroots = roots.sum(axis=1)
            degree = np.where(lam != 0, np.arange(lam.shape[1]), 0).max(axis=1)
            good = (length <= self.t_design) & (nroots == length) & (degree == length)
            corrected[bad] ^= roots.astype(np.uint8)
            ok[bad] = good
        return corrected[:, self.parity_len :].copy(), ok


@functools.lru_cache(maxsize=None)
def get_code(params: CodeParams) -> BlockCode:
    if params == BCH_492_57:
        return BchCode(9, 85, shorten=19)
    if params == RM_REP_80_5:
        return ReedMullerRepCode(5)
    if params.family == REP and params.k == 1:
        return RepetitionCode(params.n)
    raise ValueError(f"unsupported code parameters {params}")


def code_from_name(name: str) -> CodeParams:
    try:
        return CODES[name]
    except KeyError:
        raise ValueError(f"unknown code {name!r}; choose from {sorted(CODES)}") from None
