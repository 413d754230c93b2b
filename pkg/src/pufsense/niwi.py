"""Groth-Sahai witness-indistinguishable proofs for pairing-product equations.

Instantiated under SXDH on BLS12-381. A statement is an equation

    prod_j e(A_j, Y_j) * prod_i e(X_i, B_i) * prod_ij e(X_i, Y_j)^gamma_ij = t

over secret G1 variables X_i, secret G2 variables Y_j and public constants
A_j in G1, B_i in G2. Scalar slots hold committed Zp values (identities)
that appear in no equation. Commitments live in G1^2 / G2^2 and a proof is
four G1 plus four G2 elements, independent of the equation size.

With a binding CRS commitments are extractable (perfectly sound); with a
hiding CRS they are perfectly hiding and proofs are witness indistinguishable.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from random import Random
from typing import Sequence

from .certibs import cert_hash, reading_message
from .groups import (
    G1, G2, GT, ORDER, EncodingError, G1Element, G2Element, GTElement,
    decode_g1, decode_g2, encode_g1, encode_g2, hash_to_g1, random_scalar,
)
from . import bls

BINDING = "binding"
HIDING = "hiding"

SLOT_SCALAR = "scalar_d"
SLOT_G1 = "g1_c"
SLOT_G2 = "g2_c"

EQ1A = 1  # reading signature: e(sigma, g2) e(h_M^-1, pk) = 1
EQ1B = 2  # certificate: e(cert, g2) e(h_c, mpk^-1) = 1
EQ2 = 3  # aggregate over Q readings and their certificates
LAYOUT_NAMES = {EQ1A: "eq1a", EQ1B: "eq1b", EQ2: "aggregate_eq2"}

G1Pair = tuple[G1Element, G1Element]
G2Pair = tuple[G2Element, G2Element]


class ProofFormatError(ValueError):
    """A serialized proof bundle is malformed."""


@dataclass(frozen=True)
class ExtractKey:
    alpha: int = field(repr=False)
    beta: int = field(repr=False)


@dataclass(frozen=True)
class Crs:
    mode: str
    u1: G1Pair
    u2: G1Pair
    v1: G2Pair
    v2: G2Pair

    @property
    def u(self) -> G1Pair:
        """Base for scalar commitments: u2 + (0, g1)."""
        return (self.u2[0], self.u2[1] * G1.generator())

    def to_bytes(self) -> bytes:
        mode = 0 if self.mode == BINDING else 1
        g1s = b"".join(encode_g1(e) for e in (*self.u1, *self.u2))
        g2s = b"".join(encode_g2(e) for e in (*self.v1, *self.v2))
        return bytes([mode]) + g1s + g2s

    @classmethod
    def from_bytes(cls, data: bytes) -> Crs:
        if len(data) != 1 + 4 * 49 + 4 * 97 or data[0] not in (0, 1):
            raise EncodingError("bad CRS encoding")
        g1s = [decode_g1(data[1 + 49 * i : 50 + 49 * i]) for i in range(4)]
        off = 1 + 4 * 49
        g2s = [decode_g2(data[off + 97 * i : off + 97 * (i + 1)]) for i in range(4)]
        mode = BINDING if data[0] == 0 else HIDING
        return cls(mode, (g1s[0], g1s[1]), (g1s[2], g1s[3]), (g2s[0], g2s[1]), (g2s[2], g2s[3]))


def _crs_from_trapdoor(mode: str, alpha: int, t: int, beta: int, s: int) -> Crs:
    g1, g2 = G1.generator(), G2.generator()
    u1 = (g1, g1 ** alpha)
    v1 = (g2, g2 ** beta)
    if mode == BINDING:
        u2 = (g1 ** t, g1 ** (alpha * t))
        v2 = (g2 ** s, g2 ** (beta * s))
    elif mode == HIDING:
        u2 = (g1 ** t, g1 ** (alpha * t - 1))
        v2 = (g2 ** s, g2 ** (beta * s - 1))
    else:
        raise ValueError(f"unknown CRS mode {mode!r}")
    return Crs(mode, u1, u2, v1, v2)


def crs_gen(mode: str = HIDING, rng: Random | None = None) -> tuple[Crs, ExtractKey | None]:
    """Fresh CRS; the extraction key is returned only in binding mode."""
    alpha, t, beta, s = (random_scalar(rng) for _ in range(4))
    crs = _crs_from_trapdoor(mode, alpha, t, beta, s)
    return crs, (ExtractKey(alpha, beta) if mode == BINDING else None)


def identity_scalar(identity: bytes) -> int:
    """Zp value committed in an identity slot."""
    return int.from_bytes(hashlib.sha256(b"NIWI:ID" + bytes(identity)).digest(), "big") % ORDER


@dataclass(frozen=True)
class Commitment:
    slot: str
    elements: G1Pair | G2Pair

    def to_bytes(self) -> bytes:
        enc = encode_g2 if self.slot == SLOT_G2 else encode_g1
        return enc(self.elements[0]) + enc(self.elements[1])


@dataclass(frozen=True)
class Opening:
    """Prover-side secret: committed value and randomness."""

    slot: str
    value: G1Element | G2Element | int = field(repr=False)
    randomness: tuple[int, ...] = field(repr=False)


def commit(crs: Crs, value: G1Element | G2Element | int, slot: str,
           rng: Random | None = None) -> tuple[Commitment, Opening]:
    if slot == SLOT_G1:
        if not isinstance(value, G1Element):
            raise TypeError("G1 slot needs a G1 element")
        r1, r2 = random_scalar(rng), random_scalar(rng)
        u1, u2 = crs.u1, crs.u2
        c = (u1[0] ** r1 * u2[0] ** r2, value * u1[1] ** r1 * u2[1] ** r2)
        return Commitment(slot, c), Opening(slot, value, (r1, r2))
    if slot == SLOT_G2:
        if not isinstance(value, G2Element):
            raise TypeError("G2 slot needs a G2 element")
        s1, s2 = random_scalar(rng), random_scalar(rng)
        v1, v2 = crs.v1, crs.v2
        d = (v1[0] ** s1 * v2[0] ** s2, value * v1[1] ** s1 * v2[1] ** s2)
        return Commitment(slot, d), Opening(slot, value, (s1, s2))
    if slot == SLOT_SCALAR:
        if isinstance(value, bool) or not isinstance(value, int):
            raise TypeError("scalar slot needs an integer")
        x = value % ORDER
        r = random_scalar(rng)
        u, u1 = crs.u, crs.u1
        c = (u[0] ** x * u1[0] ** r, u[1] ** x * u1[1] ** r)
        return Commitment(slot, c), Opening(slot, x, (r,))
    raise ValueError(f"unknown slot kind {slot!r}")


def extract(xk: ExtractKey, commitment: Commitment) -> G1Element | G2Element:
    """Open a binding-mode commitment; scalar slots yield g1^x."""
    c0, c1 = commitment.elements
    if commitment.slot == SLOT_G2:
        return c1 * c0 ** (-xk.beta)
    return c1 * c0 ** (-xk.alpha)


@dataclass(frozen=True)
class PpeStatement:
    layout: int
    b_consts: tuple[G2Element, ...]  # paired with G1 variable i
    a_consts: tuple[G1Element, ...]  # paired with G2 variable j
    num_scalars: int = 0
    gamma: tuple[tuple[int, ...], ...] | None = None  # X_i . Y_j exponents
    target: GTElement | None = None  # None means the unit of GT

    @property
    def m(self) -> int:
        return len(self.b_consts)

    @property
    def n(self) -> int:
        return len(self.a_consts)

    def gamma_at(self, i: int, j: int) -> int:
        return 0 if self.gamma is None else self.gamma[i][j]

    def target_value(self) -> GTElement:
        return GT.unity() if self.target is None else self.target

    @property
    def q(self) -> int:
        return self.n if self.layout == EQ2 else 1


@dataclass(frozen=True)
class Witness:
    x: tuple[G1Element, ...]
    y: tuple[G2Element, ...] = ()
    scalars: tuple[int, ...] = ()


@dataclass(frozen=True)
class CommittedWitness:
    scalars: tuple[Commitment, ...]
    x: tuple[Commitment, ...]
    y: tuple[Commitment, ...]
    openings_x: tuple[Opening, ...] = field(repr=False, default=())
    openings_y: tuple[Opening, ...] = field(repr=False, default=())

    def public(self) -> tuple[Commitment, ...]:
        """Commitments in slot order: scalars, G1 variables, G2 variables."""
        return (*self.scalars, *self.x, *self.y)


@dataclass(frozen=True)
class Proof:
    pi: tuple[G1Element, G1Element, G1Element, G1Element]
    theta: tuple[G2Element, G2Element, G2Element, G2Element]


def _pi_pairs(p: Proof) -> tuple[G1Pair, G1Pair]:
    return (p.pi[0], p.pi[1]), (p.pi[2], p.pi[3])


def _theta_pairs(p: Proof) -> tuple[G2Pair, G2Pair]:
    return (p.theta[0], p.theta[1]), (p.theta[2], p.theta[3])


def satisfied(statement: PpeStatement, witness: Witness) -> bool:
    """Evaluate the equation on a plain witness."""
    if len(witness.x) != statement.m or len(witness.y) != statement.n:
        raise ValueError("witness shape does not match the statement")
    acc = GT.unity()
    for xi, bi in zip(witness.x, statement.b_consts):
        acc = acc * xi.pair(bi)
    for aj, yj in zip(statement.a_consts, witness.y):
        acc = acc * aj.pair(yj)
    for i, xi in enumerate(witness.x):
        for j, yj in enumerate(witness.y):
            g = statement.gamma_at(i, j)
            if g:
                acc = acc * xi.pair(yj) ** g
    return acc == statement.target_value()


def commit_witness(crs: Crs, statement: PpeStatement, witness: Witness,
                   rng: Random | None = None) -> CommittedWitness:
    if (len(witness.x), len(witness.y), len(witness.scalars)) != (statement.m, statement.n,
                                                                  statement.num_scalars):
        raise ValueError("witness shape does not match the statement")
    scal = tuple(commit(crs, s, SLOT_SCALAR, rng)[0] for s in witness.scalars)
    cx = [commit(crs, x, SLOT_G1, rng) for x in witness.x]
    cy = [commit(crs, y, SLOT_G2, rng) for y in witness.y]
    return CommittedWitness(scal, tuple(c for c, _ in cx), tuple(c for c, _ in cy),
                            tuple(o for _, o in cx), tuple(o for _, o in cy))


def _prod(items) -> G1Element | G2Element | None:
    out = None
    for it in items:
        out = it if out is None else out * it
    return out


def prove(crs: Crs, statement: PpeStatement, committed: CommittedWitness,
          rng: Random | None = None) -> Proof:
    """Proof that the committed values satisfy ``statement``."""
    m, n = statement.m, statement.n
    if len(committed.openings_x) != m or len(committed.openings_y) != n:
        raise ValueError("openings do not match the statement")
    xs = [o.value for o in committed.openings_x]
    ys = [o.value for o in committed.openings_y]
    R = [o.randomness for o in committed.openings_x]
    S = [o.randomness for o in committed.openings_y]
    T = [[random_scalar(rng) for _ in range(2)] for _ in range(2)]
    us = (crs.u1, crs.u2)
    vs = (crs.v1, crs.v2)
    # coefficient of v_l inside the k-th G2 proof element
    coef = [[(sum(statement.gamma_at(i, j) * R[i][k] * S[j][l]
                  for i in range(m) for j in range(n)) - T[l][k]) % ORDER
             for l in range(2)] for k in range(2)]

    pi: list[G1Element] = []
    for k in range(2):
        first = us[0][0] ** T[k][0] * us[1][0] ** T[k][1]
        second = us[0][1] ** T[k][0] * us[1][1] ** T[k][1]
        for j in range(n):
            second = second * statement.a_consts[j] ** S[j][k]
            for i in range(m):
                g = statement.gamma_at(i, j)
                if g:
                    second = second * xs[i] ** (g * S[j][k] % ORDER)
        pi.extend((first, second))

    theta: list[G2Element] = []
    for k in range(2):
        first = vs[0][0] ** coef[k][0] * vs[1][0] ** coef[k][1]
        second = vs[0][1] ** coef[k][0] * vs[1][1] ** coef[k][1]
        for i in range(m):
            second = second * statement.b_consts[i] ** R[i][k]
            for j in range(n):
                g = statement.gamma_at(i, j)
                if g:
                    second = second * ys[j] ** (g * R[i][k] % ORDER)
        theta.extend((first, second))
    return Proof(tuple(pi), tuple(theta))  # type: ignore[arg-type]


def verify(crs: Crs, statement: PpeStatement, commitments: Sequence[Commitment],
           proof: Proof) -> bool:
    """Check the proof entrywise on the 2x2 matrix of target-group values."""
    m, n, s = statement.m, statement.n, statement.num_scalars
    if len(commitments) != s + m + n:
        return False
    kinds = [SLOT_SCALAR] * s + [SLOT_G1] * m + [SLOT_G2] * n
    if any(c.slot != k for c, k in zip(commitments, kinds)):
        return False
    cx = [c.elements for c in commitments[s : s + m]]
    dy = [c.elements for c in commitments[s + m :]]
    one = GT.unity()
    lhs = [[one, one], [one, one]]
    for i in range(m):
        b = statement.b_consts[i]
        lhs[0][1] = lhs[0][1] * cx[i][0].pair(b)
        lhs[1][1] = lhs[1][1] * cx[i][1].pair(b)
    for j in range(n):
        a = statement.a_consts[j]
        lhs[1][0] = lhs[1][0] * a.pair(dy[j][0])
        lhs[1][1] = lhs[1][1] * a.pair(dy[j][1])
    for i in range(m):
        for j in range(n):
            g = statement.gamma_at(i, j)
            if g:
                for a in range(2):
                    for b in range(2):
                        lhs[a][b] = lhs[a][b] * cx[i][a].pair(dy[j][b]) ** g
    us = (crs.u1, crs.u2)
    vs = (crs.v1, crs.v2)
    pis = _pi_pairs(proof)
    thetas = _theta_pairs(proof)
    for a in range(2):
        for b in range(2):
            rhs = statement.target_value() if (a, b) == (1, 1) else one
            for k in range(2):
                rhs = rhs * us[k][a].pair(thetas[k][b]) * pis[k][a].pair(vs[k][b])
            if lhs[a][b] != rhs:
                return False
    return True


# --- the three statement layouts ------------------------------------------

def eq1a_statement(message: bytes, tau: bytes) -> PpeStatement:
    h = hash_to_g1(bls.MSG_TAG, reading_message(message, tau))
    return PpeStatement(EQ1A, (G2.generator(),), (h ** -1,))


def eq1a_witness(sigma: G1Element, pk: G2Element) -> Witness:
    return Witness((sigma,), (pk,))


def eq1b_statement(mpk: G2Element) -> PpeStatement:
    return PpeStatement(EQ1B, (G2.generator(), mpk ** -1), (), num_scalars=1)


def eq1b_witness(cert_sig: G1Element, identity: bytes, pk: G2Element) -> Witness:
    return Witness((cert_sig, cert_hash(identity, pk)), (), (identity_scalar(identity),))


def eq2_statement(readings: Sequence[tuple[bytes, bytes]], mpk: G2Element) -> PpeStatement:
    """Aggregate statement over Q public (message, tau) pairs."""
    q = len(readings)
    if q < 1:
        raise ValueError("need at least one reading")
    hs = tuple(hash_to_g1(bls.MSG_TAG, reading_message(m, t)) ** -1 for m, t in readings)
    mpk_inv = mpk ** -1
    return PpeStatement(EQ2, (G2.generator(),) + (mpk_inv,) * q, hs, num_scalars=q)


def eq2_witness(aggregate_sig: G1Element, identities: Sequence[bytes],
                pks: Sequence[G2Element]) -> Witness:
    hcs = tuple(cert_hash(i, pk) for i, pk in zip(identities, pks))
    return Witness((aggregate_sig, *hcs), tuple(pks), tuple(identity_scalar(i) for i in identities))


def layout_shape(layout: int, q: int) -> tuple[int, int, int]:
    """(scalar slots, G1 variables, G2 variables) for a layout."""
    if layout == EQ1A:
        return 0, 1, 1
    if layout == EQ1B:
        return 1, 2, 0
    if layout == EQ2:
        return q, 1 + q, q
    raise ProofFormatError(f"unknown statement layout {layout}")


# --- bundle serialization -------------------------------------------------

def encode_proof_bundle(layout: int, q: int, commitments: Sequence[Commitment], proof: Proof) -> bytes:
    """Layout byte, Q (u16), commitments in slot order, then pi (G1^4), theta (G2^4)."""
    s, m, n = layout_shape(layout, q)
    if len(commitments) != s + m + n:
        raise ValueError("commitment count does not match the layout")
    out = [bytes([layout]), struct.pack(">H", q)]
    out.extend(c.to_bytes() for c in commitments)
    out.extend(encode_g1(e) for e in proof.pi)
    out.extend(encode_g2(e) for e in proof.theta)
    return b"".join(out)


def proof_bundle_size(layout: int, q: int) -> int:
    s, m, n = layout_shape(layout, q)
    return 3 + 2 * 49 * (s + m) + 2 * 97 * n + 4 * 49 + 4 * 97


def decode_proof_bundle(data: bytes) -> tuple[int, int, tuple[Commitment, ...], Proof]:
    if len(data) < 3:
        raise ProofFormatError("truncated proof bundle")
    layout = data[0]
    (q,) = struct.unpack(">H", data[1:3])
    if q < 1 or (layout != EQ2 and q != 1):
        raise ProofFormatError("bad reading count")
    s, m, n = layout_shape(layout, q)
    if len(data) != proof_bundle_size(layout, q):
        raise ProofFormatError("proof bundle length mismatch")
    pos = 3

    def take(width: int) -> bytes:
        nonlocal pos
        chunk = data[pos : pos + width]
        pos += width
        return chunk

    try:
        comms = []
        for slot in [SLOT_SCALAR] * s + [SLOT_G1] * m:
            comms.append(Commitment(slot, (decode_g1(take(49)), decode_g1(take(49)))))
        for _ in range(n):
            comms.append(Commitment(SLOT_G2, (decode_g2(take(97)), decode_g2(take(97)))))
        pi = tuple(decode_g1(take(49)) for _ in range(4))
        theta = tuple(decode_g2(take(97)) for _ in range(4))
    except EncodingError as exc:
        raise ProofFormatError(str(exc)) from None
    return layout, q, tuple(comms), Proof(pi, theta)  # type: ignore[arg-type]


# --- element accounting ---------------------------------------------------

@dataclass(frozen=True)
class ElementCount:
    g1: int = 0
    g2: int = 0
    g: int = 0  # symmetric-group elements


def element_counts(setting: str, q: int, aggregated: bool = True) -> ElementCount:
    """Group elements sent per report under the published accounting.

    Symmetric: 30 per reading without aggregation, 6Q + 12 with it.
    Asymmetric aggregated: 6 + 2Q in G1 and 4 + 2Q in G2. The asymmetric
    non-aggregated row is derived the same way (per reading: commitments to
    I, pk, sigma, cert and two proofs of 4 + 4 elements).
    """
    if q < 1:
        raise ValueError("Q must be at least 1")
    if setting == "symmetric":
        return ElementCount(g=6 * q + 12 if aggregated else 30 * q)
    if setting == "asymmetric":
        if aggregated:
            return ElementCount(g1=6 + 2 * q, g2=4 + 2 * q)
        return ElementCount(g1=14 * q, g2=10 * q)
    raise ValueError(f"unknown setting {setting!r}")


def actual_counts(q: int) -> ElementCount:
    """Elements in the bundle this implementation sends (adds c(h_c_i))."""
    s, m, n = layout_shape(EQ2, q)
    return ElementCount(g1=2 * (s + m) + 4, g2=2 * n + 4)
