"""Participatory-sensing roles: authority, trusted sensor, host prover, server.

The host aggregates the sensors' reading signatures and certificates into
one signature and proves, in zero knowledge of which sensors signed, that
it holds a valid aggregate for the public readings. The server sees only
messages, freshness stamps, commitments and the proof.
"""

from __future__ import annotations

import hashlib
import logging
import struct
import time
from dataclasses import dataclass
from random import Random
from typing import BinaryIO, Callable, Sequence

import numpy as np

from . import bls, certibs, niwi
from .certibs import TAU_BYTES, AttestedReading, Enrollment, MasterKeys
from .codes import BCH_492_57, CodeParams
from .fuzzy import response_bits_needed
from .groups import (
    DEFAULT_GROUP, PAPER_WIDTHS, SYMMETRIC_G_BITS, EncodingError, ElementWidths, G2Element,
    GroupConfig, decode_g2, encode_g2,
)
from .puf import PufModel, full_challenge
from .replay import ReplayCache

logger = logging.getLogger(__name__)

SECURITY_LEVEL = 128  # bits, what BLS12-381 provides

REASON_PROOF = "proof_invalid"
REASON_REPLAY = "replay"
REASON_MALFORMED = "malformed"


# --- freshness stamp ------------------------------------------------------

def make_tau(counter: int, seconds: int) -> bytes:
    """Monotonic counter (u64) and wall-clock seconds (u64)."""
    return struct.pack(">QQ", counter, seconds)


def parse_tau(tau: bytes) -> tuple[int, int]:
    if len(tau) != TAU_BYTES:
        raise ValueError(f"freshness stamp must be {TAU_BYTES} bytes")
    counter, seconds = struct.unpack(">QQ", tau)
    return counter, seconds


# --- setup ----------------------------------------------------------------

@dataclass(frozen=True)
class SetupBundle:
    """Public parameters every party needs."""

    group: GroupConfig
    mpk: G2Element
    crs: niwi.Crs

    def to_bytes(self) -> bytes:
        desc = self.group.descriptor()
        return struct.pack(">H", len(desc)) + desc + encode_g2(self.mpk) + self.crs.to_bytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> SetupBundle:
        if len(data) < 2:
            raise EncodingError("truncated setup bundle")
        (dlen,) = struct.unpack(">H", data[:2])
        desc = data[2 : 2 + dlen].decode("ascii", "replace")
        setting, _, curve = desc.partition(":")
        group = GroupConfig(setting, curve)
        off = 2 + dlen
        mpk = decode_g2(data[off : off + 97])
        return cls(group, mpk, niwi.Crs.from_bytes(data[off + 97 :]))


def ta_setup(security_level: int = SECURITY_LEVEL, rng: Random | None = None,
             mode: str = niwi.HIDING) -> tuple[GroupConfig, MasterKeys, niwi.Crs, niwi.ExtractKey | None]:
    if security_level != SECURITY_LEVEL:
        raise ValueError(f"only {SECURITY_LEVEL}-bit security is available (BLS12-381)")
    master = certibs.setup(rng)
    crs, xk = niwi.crs_gen(mode, rng)
    return DEFAULT_GROUP, master, crs, xk


class TrustedAuthority:
    def __init__(self, master: MasterKeys, crs: niwi.Crs, group: GroupConfig = DEFAULT_GROUP,
                 extract_key: niwi.ExtractKey | None = None) -> None:
        self.master = master
        self.crs = crs
        self.group = group
        self.extract_key = extract_key
        self.registry: dict[bytes, G2Element] = {}

    @classmethod
    def setup(cls, rng: Random | None = None, mode: str = niwi.HIDING) -> TrustedAuthority:
        group, master, crs, xk = ta_setup(rng=rng, mode=mode)
        return cls(master, crs, group, xk)

    @property
    def bundle(self) -> SetupBundle:
        return SetupBundle(self.group, self.master.mpk, self.crs)

    def enroll_sensor(self, identity: bytes, puf: PufModel, code: CodeParams = BCH_492_57,
                      rng: np.random.Generator | None = None) -> Enrollment:
        """Read the device's PUF once and bind a certified signing key to it."""
        identity = bytes(identity)
        if identity in self.registry:
            raise ValueError(f"identity {identity!r} already enrolled")
        challenge = full_challenge(puf, response_bits_needed(certibs.SK_KEY_BITS, code))
        response = puf.reference(challenge)
        enrollment = certibs.enroll(self.master, identity, response, code, challenge, rng)
        self.registry[identity] = enrollment.pk
        logger.info("enrolled sensor %r", identity)
        return enrollment


# --- sensor ---------------------------------------------------------------

class TrustedSensor:
    """Signs readings with a key rebuilt from its PUF at power-up."""

    def __init__(self, enrollment: Enrollment, puf: PufModel, counter: int = 0,
                 clock: Callable[[], float] = time.time) -> None:
        self.enrollment = enrollment
        self.puf = puf
        self.counter = counter
        self.clock = clock
        self._sk: int | None = None

    @property
    def identity(self) -> bytes:
        return self.enrollment.identity

    def power_up(self, readout_index: int | None = None) -> None:
        """Re-derive the signing key; raises DecodeError if the PUF is too noisy."""
        helper = self.enrollment.helper
        response = self.puf.sample(helper.challenge, readout_index)
        sk = certibs.recover_signing_key(response, helper)
        if bls.KeyPair.from_secret(sk).pk != self.enrollment.pk:
            raise ValueError("recovered key does not match the enrolled public key")
        self._sk = sk

    def read(self, message: bytes, now: float | None = None) -> AttestedReading:
        if self._sk is None:
            self.power_up()
        seconds = int(self.clock() if now is None else now)
        self.counter += 1
        tau = make_tau(self.counter, seconds)
        e = self.enrollment
        return certibs.attest(self._sk, e.identity, e.pk, e.cert, message, tau)


# --- report ---------------------------------------------------------------

@dataclass(frozen=True)
class ReportBundle:
    readings: tuple[tuple[bytes, bytes], ...]  # (M_i, tau_i)
    commitments: tuple[niwi.Commitment, ...]
    proof: niwi.Proof
    layout: int = niwi.EQ2

    @property
    def q(self) -> int:
        return len(self.readings)

    def proof_bytes(self) -> bytes:
        return niwi.encode_proof_bundle(self.layout, self.q, self.commitments, self.proof)

    def to_bytes(self) -> bytes:
        parts = [struct.pack(">H", self.q)]
        for msg, tau in self.readings:
            parts.append(struct.pack(">I", len(msg)) + msg + tau)
        parts.append(self.proof_bytes())
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, data: bytes) -> ReportBundle:
        try:
            (q,) = struct.unpack(">H", data[:2])
            pos = 2
            readings = []
            for _ in range(q):
                (mlen,) = struct.unpack(">I", data[pos : pos + 4])
                pos += 4
                if pos + mlen + TAU_BYTES > len(data):
                    raise niwi.ProofFormatError("reading runs past the end")
                readings.append((data[pos : pos + mlen], data[pos + mlen : pos + mlen + TAU_BYTES]))
                pos += mlen + TAU_BYTES
        except struct.error:
            raise niwi.ProofFormatError("truncated report") from None
        layout, pq, comms, proof = niwi.decode_proof_bundle(data[pos:])
        if layout != niwi.EQ2 or pq != q:
            raise niwi.ProofFormatError("proof bundle does not match the readings")
        return cls(tuple(readings), comms, proof, layout)


def host_aggregate_and_prove(readings: Sequence[AttestedReading], crs: niwi.Crs, mpk: G2Element,
                             rng: Random | None = None, check: bool = True) -> ReportBundle:
    """Aggregate Q attested readings and prove knowledge of the aggregate.

    With ``check=False`` the host skips its own validity check and proves
    anyway, which is how a cheating host behaves; the server must catch it.
    """
    if not readings:
        raise ValueError("need at least one reading")
    pairs = [(r.message, r.tau) for r in readings]
    if len(set(pairs)) != len(pairs):
        raise ValueError("duplicate reading in report")
    agg = bls.aggregate([r.sigma for r in readings] + [r.cert.sig for r in readings])
    statement = niwi.eq2_statement(pairs, mpk)
    witness = niwi.eq2_witness(agg, [r.identity for r in readings], [r.pk for r in readings])
    if check and not niwi.satisfied(statement, witness):
        raise ValueError("readings do not verify under the master key; refusing to prove")
    committed = niwi.commit_witness(crs, statement, witness, rng)
    proof = niwi.prove(crs, statement, committed, rng)
    return ReportBundle(tuple(pairs), committed.public(), proof)


class Host:
    def __init__(self, bundle: SetupBundle, rng: Random | None = None) -> None:
        self.bundle = bundle
        self.rng = rng

    def report(self, readings: Sequence[AttestedReading]) -> ReportBundle:
        return host_aggregate_and_prove(readings, self.bundle.crs, self.bundle.mpk, self.rng)


@dataclass(frozen=True)
class Verdict:
    accepted: bool
    reason: str | None = None

    def __bool__(self) -> bool:
        return self.accepted

    def __str__(self) -> str:
        return "accept" if self.accepted else f"reject: {self.reason}"

    def to_bytes(self) -> bytes:
        reason = (self.reason or "").encode()
        return bytes([1 if self.accepted else 0]) + reason

    @classmethod
    def from_bytes(cls, data: bytes) -> Verdict:
        if not data or data[0] not in (0, 1):
            raise ValueError("bad verdict encoding")
        return cls(bool(data[0]), data[1:].decode() or None)


def reading_key(message: bytes, tau: bytes) -> bytes:
    return hashlib.sha256(struct.pack(">I", len(message)) + message + tau).digest()


class PsServer:
    """Verifies reports; replay keys are hashes of (M_i, tau_i)."""

    def __init__(self, bundle: SetupBundle, cache: ReplayCache | None = None,
                 max_age: float | None = None, clock: Callable[[], float] = time.time) -> None:
        self.bundle = bundle
        self.clock = clock
        self.max_age = max_age
        self.cache = cache if cache is not None else ReplayCache(max_age=max_age, clock=clock)

    def verify(self, report: ReportBundle | bytes) -> Verdict:
        if isinstance(report, (bytes, bytearray)):
            try:
                report = ReportBundle.from_bytes(bytes(report))
            except (niwi.ProofFormatError, EncodingError, ValueError) as exc:
                logger.info("malformed report: %s", exc)
                return Verdict(False, REASON_MALFORMED)
        for _, tau in report.readings:
            try:
                _, seconds = parse_tau(tau)
            except ValueError:
                return Verdict(False, REASON_MALFORMED)
            if self.max_age is not None and seconds < self.clock() - self.max_age:
                return Verdict(False, REASON_REPLAY)
        if len(set(report.readings)) != len(report.readings):
            return Verdict(False, REASON_REPLAY)
        statement = niwi.eq2_statement(report.readings, self.bundle.mpk)
        if not niwi.verify(self.bundle.crs, statement, report.commitments, report.proof):
            return Verdict(False, REASON_PROOF)
        keys = [reading_key(m, t) for m, t in report.readings]
        if not self.cache.check_and_add(keys):
            return Verdict(False, REASON_REPLAY)
        return Verdict(True)


def server_verify(bundle: SetupBundle, report: ReportBundle | bytes,
                  cache: ReplayCache) -> Verdict:
    return PsServer(bundle, cache).verify(report)


# --- overhead accounting ----------------------------------------------------

@dataclass(frozen=True)
class AppProfile:
    name: str
    payloads: tuple[int, ...]  # bytes per reading

    @property
    def q(self) -> int:
        return len(self.payloads)


STREET_VIEW = AppProfile("Google Street View", (900 * 1024, 82))
WIKICITY = AppProfile("Wikicity", (82,))
APPS = (STREET_VIEW, WIKICITY)


def report_overhead_bits(q: int, widths: ElementWidths = PAPER_WIDTHS) -> int:
    c = niwi.element_counts("asymmetric", q)
    return widths.bits(g1=c.g1, g2=c.g2)


def symmetric_overhead_bits(q: int, aggregated: bool = True) -> int:
    return niwi.element_counts("symmetric", q, aggregated).g * SYMMETRIC_G_BITS


@dataclass(frozen=True)
class OverheadRow:
    name: str
    q: int
    payload_bytes: int
    overhead_bytes: float
    hc_surcharge_bytes: float  # extra c(h_c_i) commitments this implementation sends
    ratio: float

    @property
    def percent(self) -> float:
        return 100.0 * self.ratio


def overhead_report(apps: Sequence[AppProfile] = APPS,
                    widths: ElementWidths = PAPER_WIDTHS) -> list[OverheadRow]:
    rows = []
    for app in apps:
        over = report_overhead_bits(app.q, widths) / 8
        extra = niwi.actual_counts(app.q).g1 - niwi.element_counts("asymmetric", app.q).g1
        payload = sum(app.payloads)
        rows.append(OverheadRow(app.name, app.q, payload, over, extra * widths.g1 / 8,
                                over / payload))
    return rows


def format_overhead_table(rows: Sequence[OverheadRow]) -> str:
    head = (f"{'application':<20} {'Q':>2} {'payload B':>10} {'overhead B':>10} "
            f"{'ratio':>10} {'percent':>9} {'+c(h_c) B':>9}")
    lines = [head, "-" * len(head)]
    for r in rows:
        lines.append(f"{r.name:<20} {r.q:>2} {r.payload_bytes:>10} {r.overhead_bytes:>10g} "
                     f"{r.ratio:>10.3g} {r.percent:>8.3g}% {r.hc_surcharge_bytes:>9g}")
    return "\n".join(lines)


# --- wire framing -----------------------------------------------------------

MSG_SETUP_BUNDLE = 1
MSG_REPORT = 2
MSG_VERDICT = 3
MAX_MESSAGE = 64 * 1024 * 1024


def frame_message(msg_type: int, payload: bytes) -> bytes:
    """u32 big-endian length of (type byte + payload), type byte, payload."""
    return struct.pack(">IB", len(payload) + 1, msg_type) + payload


def write_message(stream: BinaryIO, msg_type: int, payload: bytes) -> None:
    stream.write(frame_message(msg_type, payload))
    stream.flush()


def _read_exact(stream: BinaryIO, n: int) -> bytes:
    buf = b""
    while len(buf) < n:
        chunk = stream.read(n - len(buf))
        if not chunk:
            raise EOFError("stream closed mid-message")
        buf += chunk
    return buf


def read_message(stream: BinaryIO) -> tuple[int, bytes]:
    (length,) = struct.unpack(">I", _read_exact(stream, 4))
    if not 1 <= length <= MAX_MESSAGE:
        raise ValueError("bad message length")
    body = _read_exact(stream, length)
    return body[0], body[1:]


def parse_frame(data: bytes) -> tuple[int, bytes]:
    if len(data) < 5:
        raise ValueError("truncated message")
    (length,) = struct.unpack(">I", data[:4])
    if length != len(data) - 4 or length < 1:
        raise ValueError("message length mismatch")
    return data[4], data[5:]
