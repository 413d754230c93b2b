import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pufsense.codes import (
    BCH_492_57, REP_5, RM_REP_80_5, BchCode, DecodeError, GaloisTables, ReedMullerRepCode,
    RepetitionCode, code_from_name, get_code,
)


# --- independent GF(2^m) / GF(2)[x] arithmetic used as the oracle -----------

def gf_mul(a: int, b: int, m: int, prim: int) -> int:
    out = 0
    while b:
        if b & 1:
            out ^= a
        b >>= 1
        a <<= 1
        if a >> m:
            a ^= prim
    return out


def poly_eval(poly: int, x: int, m: int, prim: int) -> int:
    """Evaluate a binary polynomial (bitmask) at a field element by Horner's rule."""
    acc = 0
    for i in range(poly.bit_length() - 1, -1, -1):
        acc = gf_mul(acc, x, m, prim) ^ ((poly >> i) & 1)
    return acc


def alpha_pow(e: int, m: int, prim: int) -> int:
    out = 1
    for _ in range(e):
        out = gf_mul(out, 2, m, prim)
    return out


def poly_mod(a: int, g: int) -> int:
    dg = g.bit_length() - 1
    while a and a.bit_length() - 1 >= dg:
        a ^= g << (a.bit_length() - 1 - dg)
    return a


def as_poly(bits) -> int:
    return sum(int(b) << i for i, b in enumerate(bits))


def all_messages(k: int) -> np.ndarray:
    return ((np.arange(2 ** k)[:, None] >> np.arange(k)) & 1).astype(np.uint8)


# --- BCH ---------------------------------------------------------------------

def test_galois_tables_match_bitwise_multiplication():
    for m in (4, 9):
        gf = GaloisTables(m)
        rng = np.random.default_rng(m)
        for a, b in rng.integers(0, 2 ** m, size=(200, 2)):
            assert gf.mul_scalar(int(a), int(b)) == gf_mul(int(a), int(b), m, gf.prim)


def test_non_primitive_polynomial_rejected():
    with pytest.raises(ValueError):
        GaloisTables(4, 0b11111)  # x^4+x^3+x^2+x+1 has order 5


@pytest.mark.parametrize("m,t,shorten", [(4, 2, 0), (5, 3, 0), (9, 85, 19)])
def test_generator_has_consecutive_roots(m, t, shorten):
    code = BchCode(m, t, shorten)
    prim = code.gf.prim
    for i in range(1, 2 * t + 1):
        assert poly_eval(code.generator, alpha_pow(i, m, prim), m, prim) == 0


def test_production_bch_parameters():
    code = get_code(BCH_492_57)
    assert isinstance(code, BchCode)
    assert code.generator.bit_length() - 1 == 435
    assert (code.full_n, code.full_k) == (511, 76)
    assert (code.n, code.k, code.params.d, code.params.t) == (492, 57, 171, 85)


def test_production_bch_codewords_are_multiples_of_generator():
    code = get_code(BCH_492_57)
    msgs = np.random.default_rng(0).integers(0, 2, size=(20, 57), dtype=np.uint8)
    words = code.encode(msgs)
    for msg, w in zip(msgs, words):
        assert poly_mod(as_poly(w), code.generator) == 0
        assert np.array_equal(w[435:], msg)  # systematic
    assert not code.syndromes(words).any()


def test_bch_15_7_min_distance_and_nearest_decoding():
    code = BchCode(4, 2)
    assert (code.n, code.k) == (15, 7)
    book = code.encode(all_messages(7))
    weights = book.sum(axis=1)
    assert weights[1:].min() == 5
    rng = np.random.default_rng(1)
    words = rng.integers(0, 2, size=(400, 15), dtype=np.uint8)
    msgs, ok = code.decode(words)
    dists = (words[:, None, :] != book[None]).sum(axis=2)
    nearest = dists.argmin(axis=1)
    for w, m, good, d, near in zip(words, msgs, ok, dists, nearest):
        if d[near] <= 2:
            assert good and np.array_equal(m, all_messages(7)[near])
        else:
            assert not good  # no codeword within t: a bounded-distance decoder must fail


def test_bch_15_7_corrects_every_pattern_up_to_t():
    code = BchCode(4, 2)
    msg = np.array([1, 0, 1, 1, 0, 0, 1], dtype=np.uint8)
    cw = code.encode(msg[None])[0]
    patterns = [()] + [(i,) for i in range(15)] + list(itertools.combinations(range(15), 2))
    words = np.repeat(cw[None], len(patterns), axis=0)
    for row, pat in zip(words, patterns):
        row[list(pat)] ^= 1
    msgs, ok = code.decode(words)
    assert ok.all() and (msgs == msg).all()


def test_production_bch_corrects_85_and_flags_95():
    code = get_code(BCH_492_57)
    rng = np.random.default_rng(2)
    msgs = rng.integers(0, 2, size=(60, 57), dtype=np.uint8)
    words = code.encode(msgs)
    noisy = words.copy()
    for row in noisy[:30]:
        row[rng.choice(492, 85, replace=False)] ^= 1
    for row in noisy[30:]:
        row[rng.choice(492, 95, replace=False)] ^= 1
    out, ok = code.decode(noisy)
    assert ok[:30].all() and (out[:30] == msgs[:30]).all()
    # beyond the radius the decoder gives up rather than miscorrecting (for these draws)
    assert not ok[30:].any()


@given(st.integers(0, 2 ** 57 - 1), st.lists(st.integers(0, 491), max_size=85, unique=True))
@settings(max_examples=40, deadline=None)
def test_bch_round_trip_property(msg_int, errors):
    code = get_code(BCH_492_57)
    msg = np.array([(msg_int >> i) & 1 for i in range(57)], dtype=np.uint8)
    word = code.encode(msg[None])[0]
    word[errors] ^= 1
    assert np.array_equal(code.decode_one(word), msg)


# --- RM(1,4) with repetition ---------------------------------------------------

def test_rm_codebook_distance():
    code = ReedMullerRepCode()
    rm = code.encode_rm(all_messages(5))
    d = (rm[:, None, :] != rm[None]).sum(axis=2)
    assert d[~np.eye(32, dtype=bool)].min() == 8
    full = code.encode(all_messages(5))
    assert full.shape == (32, 80)
    dfull = (full[:, None, :] != full[None]).sum(axis=2)
    assert dfull[~np.eye(32, dtype=bool)].min() == 40


def test_reed_decoder_exhaustive_up_to_three_symbol_errors():
    code = ReedMullerRepCode()
    msgs = all_messages(5)
    rm = code.encode_rm(msgs)
    for nerr in range(4):
        pats = list(itertools.combinations(range(16), nerr))
        mask = np.zeros((len(pats), 16), dtype=np.uint8)
        for row, pat in zip(mask, pats):
            row[list(pat)] = 1
        for msg, cw in zip(msgs, rm):
            out, ok = code.decode_rm(cw[None] ^ mask)
            assert ok.all() and (out == msg).all()


@pytest.mark.parametrize("decoder", ["nearest", "two_stage"])
def test_rm_rep_corrects_within_radius(decoder):
    code = ReedMullerRepCode(decoder=decoder)
    rng = np.random.default_rng(3)
    msgs = all_messages(5)
    words = code.encode(msgs)
    r = code.decoding_radius
    noisy = words.copy()
    for row in noisy:
        if decoder == "nearest":
            row[rng.choice(80, r, replace=False)] ^= 1
        else:
            # worst case for two-stage: 3 symbols fully outvoted, 3 flips in each
            syms = rng.choice(16, 3, replace=False)
            for s in syms:
                row[5 * s : 5 * s + 3] ^= 1
            row[5 * rng.choice(np.setdiff1d(np.arange(16), syms))] ^= 1
    out, ok = code.decode(noisy)
    assert ok.all() and (out == msgs).all()


def test_rm_nearest_reports_ties():
    code = ReedMullerRepCode()
    book = code.encode(all_messages(5))
    rng = np.random.default_rng(4)
    word = book[0].copy()
    diff = np.flatnonzero(book[0] != book[2])  # the two codewords are 40 apart
    word[rng.choice(diff, 20, replace=False)] ^= 1
    dists = (book != word).sum(axis=1)
    assert dists[0] == dists[2] == dists.min()
    _, ok = code.decode(word[None])
    assert not ok[0]


# --- repetition --------------------------------------------------------------

def test_repetition_exhaustive():
    code = RepetitionCode(5)
    words = all_messages(5)
    msgs, ok = code.decode(words)
    assert ok.all()
    assert np.array_equal(msgs[:, 0], (words.sum(axis=1) >= 3).astype(np.uint8))
    with pytest.raises(ValueError):
        RepetitionCode(4)


def test_decode_one_raises_on_failure():
    code = get_code(BCH_492_57)
    word = code.encode(np.zeros((1, 57), dtype=np.uint8))[0]
    word[:120] ^= 1
    with pytest.raises(DecodeError):
        code.decode_one(word)


def test_code_lookup():
    assert code_from_name("rm_rep") == RM_REP_80_5
    assert get_code(REP_5).n == 5
    with pytest.raises(ValueError):
        code_from_name("golay")
