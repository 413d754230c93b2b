"""Event footage protection: encrypt, MAC, then sign the list of MACs.

Each frame is encrypted with AES-128-CTR under k_E and tagged with
HMAC-SHA256 under k_M. The camera signs the ordered tag list together with
its identity, the frame count, the geometry and the freshness value
tau = SHA-256(I || event counter), so dropping, reordering or replaying
frames breaks the signature.
"""

from __future__ import annotations

import hashlib
import hmac
import re
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from .. import bls
from ..certibs import Certificate, verify_certificate
from ..groups import (
    G1_BYTES, PAPER_WIDTHS, EncodingError, ElementWidths, G1Element, G2Element, decode_g1, encode_g1,
)
from ..replay import ReplayCache
from .motion import BYTES_PER_PIXEL, LAYOUT_CODES, LAYOUT_NAMES, YUV422, Frame

MAGIC = b"SFTG"
VERSION = 1
TAU_LEN = 32
MAC_LEN = 32
SIG_DOMAIN = b"SFTG-SIG"
MAC_KDF_DOMAIN = b"KDF:MAC"

REASON_CERT = "cert_invalid"
REASON_SIG = "sig_invalid"
REASON_MAC = "mac_mismatch"
REASON_REPLAY = "replay"
REASON_TIMESTAMP = "timestamp_malformed"
REASON_MALFORMED = "malformed"

_SAFE_NAME = re.compile(r"^[A-Za-z0-9_.-]{1,64}$")


class FootageRejected(Exception):
    def __init__(self, reason: str, detail: str = "") -> None:
        super().__init__(f"{reason}: {detail}" if detail else reason)
        self.reason = reason


@dataclass(frozen=True)
class CameraKeys:
    """Keys a booted camera holds in volatile memory."""

    sk: int = field(repr=False)
    pk: G2Element
    k_e: bytes = field(repr=False)
    k_m: bytes = field(repr=False)


def derive_mac_key(k_e: bytes) -> bytes:
    return hashlib.sha256(MAC_KDF_DOMAIN + k_e).digest()


def freshness(identity: bytes, event_count: int) -> bytes:
    return hashlib.sha256(bytes(identity) + struct.pack(">Q", event_count)).digest()


def _ctr_nonce(event_count: int, frame_index: int) -> bytes:
    # event (u64) || frame (u32) || block counter (u32) starting at zero
    return struct.pack(">QII", event_count, frame_index, 0)


def _aes_ctr(key: bytes, nonce: bytes, data: bytes) -> bytes:
    ctx = Cipher(algorithms.AES(key), modes.CTR(nonce)).encryptor()
    return ctx.update(data) + ctx.finalize()


def frame_mac(k_m: bytes, ciphertext: bytes) -> bytes:
    return hmac.new(k_m, ciphertext, hashlib.sha256).digest()


def _geometry_bytes(width: int, height: int, layout: str) -> bytes:
    return struct.pack(">HHB", width, height, LAYOUT_CODES[layout])


def signed_preimage(identity: bytes, geometry: tuple[int, int, str], macs: Sequence[bytes],
                    tau: bytes) -> bytes:
    return (SIG_DOMAIN + struct.pack(">H", len(identity)) + identity
            + _geometry_bytes(*geometry) + struct.pack(">I", len(macs)) + b"".join(macs) + tau)


@dataclass(frozen=True)
class ProtectedFootage:
    identity: bytes
    event_count: int
    geometry: tuple[int, int, str]  # width, height, layout
    ciphertexts: tuple[bytes, ...]
    tau: bytes
    sigma: G1Element
    macs: tuple[bytes, ...] | None = None  # optional audit copy, not serialized

    @property
    def n(self) -> int:
        return len(self.ciphertexts)

    def to_bytes(self) -> bytes:
        w, h, layout = self.geometry
        parts = [MAGIC, bytes([VERSION]), struct.pack(">H", len(self.identity)), self.identity,
                 struct.pack(">Q", self.event_count), struct.pack(">I", self.n),
                 _geometry_bytes(w, h, layout)]
        for c in self.ciphertexts:
            parts.append(struct.pack(">I", len(c)) + c)
        parts.append(self.tau)
        parts.append(encode_g1(self.sigma))
        return b"".join(parts)

    def payload_bytes(self) -> bytes:
        """Only what the published accounting counts: C_1..C_N, tau, sigma."""
        return b"".join(self.ciphertexts) + self.tau + encode_g1(self.sigma)

    @classmethod
    def from_bytes(cls, data: bytes) -> ProtectedFootage:
        try:
            return cls._parse(data)
        except (struct.error, IndexError, EncodingError, ValueError) as exc:
            raise FootageRejected(REASON_MALFORMED, str(exc)) from None

    @classmethod
    def _parse(cls, data: bytes) -> ProtectedFootage:
        if data[:4] != MAGIC or data[4] != VERSION:
            raise ValueError("not a footage container")
        pos = 5
        (ilen,) = struct.unpack_from(">H", data, pos)
        pos += 2
        identity = data[pos : pos + ilen]
        if len(identity) != ilen or ilen == 0:
            raise ValueError("bad identity field")
        pos += ilen
        event_count, n = struct.unpack_from(">QI", data, pos)
        pos += 12
        w, h, code = struct.unpack_from(">HHB", data, pos)
        pos += 5
        layout = LAYOUT_NAMES.get(code)
        if layout is None:
            raise ValueError("unknown pixel layout")
        if w == 0 or h == 0 or (layout == YUV422 and w % 2):
            raise ValueError("bad frame geometry")
        expected = w * h * BYTES_PER_PIXEL[layout]
        cts = []
        for _ in range(n):
            (clen,) = struct.unpack_from(">I", data, pos)
            pos += 4
            if clen != expected:
                raise ValueError("ciphertext length does not match geometry")
            ct = data[pos : pos + clen]
            if len(ct) != clen:
                raise ValueError("ciphertext truncated")
            cts.append(ct)
            pos += clen
        tau = data[pos : pos + TAU_LEN]
        pos += TAU_LEN
        sig_bytes = data[pos : pos + G1_BYTES]
        pos += G1_BYTES
        if len(tau) != TAU_LEN or len(sig_bytes) != G1_BYTES or pos != len(data):
            raise ValueError("bad container length")
        return cls(identity, event_count, (w, h, layout), tuple(cts), tau, decode_g1(sig_bytes))


def protect_footage(keys: CameraKeys, identity: bytes, event_count: int,
                    frames: Sequence[Frame]) -> ProtectedFootage:
    if not frames:
        raise ValueError("footage needs at least one frame")
    geometry = frames[0].geometry
    if any(f.geometry != geometry for f in frames):
        raise ValueError("all frames in one footage must share geometry")
    identity = bytes(identity)
    if not identity or len(identity) > 0xFFFF:
        raise ValueError("identity must be 1..65535 bytes")
    cts = tuple(_aes_ctr(keys.k_e, _ctr_nonce(event_count, i), f.data) for i, f in enumerate(frames))
    macs = tuple(frame_mac(keys.k_m, c) for c in cts)
    tau = freshness(identity, event_count)
    sigma = bls.sign(keys.sk, signed_preimage(identity, geometry, macs, tau))
    return ProtectedFootage(identity, event_count, geometry, cts, tau, sigma, macs)


@dataclass(frozen=True)
class KeyExchangeRecord:
    """What the caretaker copies from the camera over a local link."""

    identity: bytes
    pk: G2Element
    cert: Certificate
    k_e: bytes = field(repr=False)


def caretaker_verify_decrypt(record: KeyExchangeRecord, mpk: G2Element,
                             footage: ProtectedFootage | bytes,
                             replay_cache: ReplayCache) -> list[Frame]:
    """Verify certificate, freshness and signature, then decrypt.

    Raises FootageRejected with one of the REASON_* codes.
    """
    if isinstance(footage, (bytes, bytearray)):
        footage = ProtectedFootage.from_bytes(bytes(footage))
    if footage.identity != record.identity or record.cert.pk != record.pk:
        raise FootageRejected(REASON_CERT, "footage is not from the paired camera")
    if not verify_certificate(mpk, footage.identity, record.cert):
        raise FootageRejected(REASON_CERT)
    k_m = derive_mac_key(record.k_e)
    macs = tuple(frame_mac(k_m, c) for c in footage.ciphertexts)
    if footage.macs is not None and not (
            len(footage.macs) == len(macs)
            and all(hmac.compare_digest(a, b) for a, b in zip(footage.macs, macs))):
        raise FootageRejected(REASON_MAC)
    if not hmac.compare_digest(footage.tau, freshness(footage.identity, footage.event_count)):
        raise FootageRejected(REASON_TIMESTAMP)
    preimage = signed_preimage(footage.identity, footage.geometry, macs, footage.tau)
    if not bls.verify(record.pk, preimage, footage.sigma):
        raise FootageRejected(REASON_SIG)
    if not replay_cache.check_and_add([footage.tau]):
        raise FootageRejected(REASON_REPLAY)
    w, h, layout = footage.geometry
    return [Frame(w, h, layout, _aes_ctr(record.k_e, _ctr_nonce(footage.event_count, i), c), i)
            for i, c in enumerate(footage.ciphertexts)]


# --- overhead accounting ----------------------------------------------------

def security_overhead_bits(widths: ElementWidths = PAPER_WIDTHS) -> int:
    """tau (SHA-256) plus one G1 signature."""
    return 8 * TAU_LEN + widths.g1


def framing_bits(footage: ProtectedFootage) -> int:
    """Container bits that are neither ciphertext, tau nor sigma."""
    header = 4 + 1 + 2 + len(footage.identity) + 8 + 4 + 5
    return 8 * (header + 4 * footage.n)


# --- storage server stub ----------------------------------------------------

class StorageServer:
    """Directory-backed upload area with a notification log."""

    def __init__(self, root: str | Path) -> None:
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def upload(self, footage: ProtectedFootage) -> Path:
        ident = footage.identity.decode("ascii", "replace")
        if not _SAFE_NAME.match(ident):
            ident = footage.identity.hex()
        name = f"{ident}-{footage.event_count:08d}.sftg"
        path = self.root / name
        path.write_bytes(footage.to_bytes())
        with (self.root / "notify.log").open("a") as log:
            log.write(name + "\n")
        return path

    def notifications(self) -> list[str]:
        log = self.root / "notify.log"
        return log.read_text().split() if log.exists() else []

    def fetch(self, name: str) -> bytes:
        path = (self.root / name).resolve()
        if path.parent != self.root.resolve():
            raise ValueError("name escapes the storage area")
        return path.read_bytes()
