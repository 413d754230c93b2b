"""Software model of an authenticated, integrity-checked, encrypted boot chain.

Each partition is AES-256-CTR encrypted, HMAC-SHA256 tagged and signed by a
root key whose public half is burned into the boot ROM. Every signature
also covers the digest of the previous link, so partitions cannot be
reordered, swapped between images or dropped. Verification runs in boot
order: signature, then MAC, then decryption, stopping at the first failure.
"""

from __future__ import annotations

import hashlib
import hmac
import os
import struct
from dataclasses import dataclass, field
from random import Random
from typing import Mapping

from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from .. import bls
from ..groups import G1_BYTES, EncodingError, G1Element, G2Element, decode_g1, encode_g1, encode_g2

PARTITION_ORDER = ("fsbl", "bitstream", "u-boot", "os", "app")
NONCE_LEN = 16
MAC_LEN = 32
IMAGE_MAGIC = b"BOOT"


class BootError(Exception):
    def __init__(self, failed_at: str, stage: str) -> None:
        super().__init__(f"boot halted at {failed_at}: {stage}")
        self.failed_at = failed_at
        self.stage = stage


@dataclass(frozen=True)
class BootRom:
    """Immutable on-chip state: root public key and the device boot keys."""

    root_pk: G2Element
    aes_key: bytes = field(repr=False)
    hmac_key: bytes = field(repr=False)
    partition_order: tuple[str, ...] = PARTITION_ORDER


@dataclass(frozen=True)
class BootSigner:
    """Image-building secrets held by the device vendor."""

    root_sk: int = field(repr=False)
    aes_key: bytes = field(repr=False)
    hmac_key: bytes = field(repr=False)
    partition_order: tuple[str, ...] = PARTITION_ORDER

    @classmethod
    def generate(cls, rng: Random | None = None,
                 partition_order: tuple[str, ...] = PARTITION_ORDER) -> BootSigner:
        kp = bls.KeyPair.generate(rng)
        if rng is None:
            aes_key, hmac_key = os.urandom(32), os.urandom(32)
        else:
            aes_key, hmac_key = rng.randbytes(32), rng.randbytes(32)
        return cls(kp.sk, aes_key, hmac_key, partition_order)

    @property
    def rom(self) -> BootRom:
        pk = bls.KeyPair.from_secret(self.root_sk).pk
        return BootRom(pk, self.aes_key, self.hmac_key, self.partition_order)


@dataclass(frozen=True)
class Partition:
    name: str
    nonce: bytes
    ciphertext: bytes
    mac: bytes
    signature: G1Element


@dataclass(frozen=True)
class BootImage:
    partitions: tuple[Partition, ...]

    def to_bytes(self) -> bytes:
        parts = [IMAGE_MAGIC, struct.pack(">H", len(self.partitions))]
        for p in self.partitions:
            name = p.name.encode()
            parts += [bytes([len(name)]), name, p.nonce, struct.pack(">I", len(p.ciphertext)),
                      p.ciphertext, p.mac, encode_g1(p.signature)]
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, data: bytes) -> BootImage:
        try:
            if data[:4] != IMAGE_MAGIC:
                raise ValueError("not a boot image")
            (count,) = struct.unpack_from(">H", data, 4)
            pos = 6
            parts = []
            for _ in range(count):
                nlen = data[pos]
                name = data[pos + 1 : pos + 1 + nlen].decode()
                pos += 1 + nlen
                nonce = data[pos : pos + NONCE_LEN]
                pos += NONCE_LEN
                (clen,) = struct.unpack_from(">I", data, pos)
                pos += 4
                ct = data[pos : pos + clen]
                pos += clen
                mac = data[pos : pos + MAC_LEN]
                pos += MAC_LEN
                sig = decode_g1(data[pos : pos + G1_BYTES])
                pos += G1_BYTES
                if len(ct) != clen or len(mac) != MAC_LEN or len(nonce) != NONCE_LEN:
                    raise ValueError("partition truncated")
                parts.append(Partition(name, nonce, ct, mac, sig))
            if pos != len(data):
                raise ValueError("trailing bytes after the last partition")
        except (IndexError, struct.error, UnicodeDecodeError, EncodingError) as exc:
            raise ValueError(f"malformed boot image: {exc}") from None
        return cls(tuple(parts))


@dataclass(frozen=True)
class BootVerdict:
    ok: bool
    failed_at: str | None = None
    stage: str | None = None  # missing | signature | mac
    plaintexts: Mapping[str, bytes] = field(default_factory=dict, repr=False)

    def __bool__(self) -> bool:
        return self.ok


def _root_digest(root_pk: G2Element) -> bytes:
    return hashlib.sha256(b"ROM" + encode_g2(root_pk)).digest()


def _link_message(name: str, prev: bytes, nonce: bytes, ciphertext: bytes, mac: bytes) -> bytes:
    body = hashlib.sha256(nonce + ciphertext).digest()
    encoded = name.encode()
    return b"BOOT" + bytes([len(encoded)]) + encoded + prev + body + mac


def _mac(key: bytes, name: str, nonce: bytes, ciphertext: bytes) -> bytes:
    encoded = name.encode()
    return hmac.new(key, bytes([len(encoded)]) + encoded + nonce + ciphertext, hashlib.sha256).digest()


def _ctr(key: bytes, nonce: bytes, data: bytes) -> bytes:
    ctx = Cipher(algorithms.AES(key), modes.CTR(nonce)).encryptor()
    return ctx.update(data) + ctx.finalize()


def build_boot_image(signer: BootSigner, plaintexts: Mapping[str, bytes],
                     rng: Random | None = None) -> BootImage:
    missing = [n for n in signer.partition_order if n not in plaintexts]
    if missing:
        raise ValueError(f"missing partitions: {missing}")
    prev = _root_digest(signer.rom.root_pk)
    parts = []
    for name in signer.partition_order:
        nonce = os.urandom(NONCE_LEN) if rng is None else rng.randbytes(NONCE_LEN)
        ct = _ctr(signer.aes_key, nonce, plaintexts[name])
        mac = _mac(signer.hmac_key, name, nonce, ct)
        msg = _link_message(name, prev, nonce, ct, mac)
        sig = bls.sign(signer.root_sk, msg, bls.BOOT_TAG)
        parts.append(Partition(name, nonce, ct, mac, sig))
        prev = hashlib.sha256(msg).digest()
    return BootImage(tuple(parts))


def verify_boot_chain(image: BootImage, rom: BootRom) -> BootVerdict:
    prev = _root_digest(rom.root_pk)
    plain: dict[str, bytes] = {}
    for idx, name in enumerate(rom.partition_order):
        if idx >= len(image.partitions) or image.partitions[idx].name != name:
            return BootVerdict(False, name, "missing")
        p = image.partitions[idx]
        msg = _link_message(name, prev, p.nonce, p.ciphertext, p.mac)
        if not bls.verify(rom.root_pk, msg, p.signature, bls.BOOT_TAG):
            return BootVerdict(False, name, "signature")
        if not hmac.compare_digest(p.mac, _mac(rom.hmac_key, name, p.nonce, p.ciphertext)):
            return BootVerdict(False, name, "mac")
        plain[name] = _ctr(rom.aes_key, p.nonce, p.ciphertext)
        prev = hashlib.sha256(msg).digest()
    extra = image.partitions[len(rom.partition_order):]
    if extra:
        return BootVerdict(False, extra[0].name, "unexpected")
    return BootVerdict(True, plaintexts=plain)


def sample_firmware(seed: int = 0, size: int = 256) -> dict[str, bytes]:
    """Deterministic stand-in partition contents."""
    rng = Random(seed)
    return {name: name.encode() + b"\0" + rng.randbytes(size) for name in PARTITION_ORDER}
