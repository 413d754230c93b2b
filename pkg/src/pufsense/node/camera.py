"""Secure camera node: enrollment, PUF-keyed boot and the event pipeline."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .. import bls, certibs
from ..certibs import Certificate, MasterKeys
from ..codes import BCH_492_57, CodeParams
from ..fuzzy import HelperData, KeyMaterial, dump_helper, flip_bits, gen, load_helper, rep, response_bits_needed
from ..groups import decode_g1, decode_g2, encode_g1, encode_g2
from ..puf import PufChallenge, RoPufModel
from .boot import BootError, BootImage, BootRom, verify_boot_chain
from .footage import CameraKeys, KeyExchangeRecord, ProtectedFootage, derive_mac_key, protect_footage
from .motion import DEFAULT_AREA_THRESHOLD, DEFAULT_PIXEL_THRESHOLD, EventDetector, Frame

logger = logging.getLogger(__name__)

SK_BITS = certibs.SK_KEY_BITS
KE_BITS = 128


@dataclass
class CameraStore:
    """Non-volatile camera memory: public helper data, certificate, counter."""

    identity: bytes
    cert: Certificate
    helper_sk: HelperData
    helper_ke: HelperData
    event_count: int = 0

    def next_event(self) -> int:
        self.event_count += 1
        return self.event_count

    def to_json(self, storage_key: bytes) -> dict:
        return {
            "identity": self.identity.hex(),
            "pk": encode_g2(self.cert.pk).hex(),
            "cert": encode_g1(self.cert.sig).hex(),
            "helper_sk": dump_helper(self.helper_sk, storage_key).hex(),
            "helper_ke": dump_helper(self.helper_ke, storage_key).hex(),
            "event_count": self.event_count,
        }

    @classmethod
    def from_json(cls, data: dict, storage_key: bytes) -> CameraStore:
        cert = Certificate(decode_g2(bytes.fromhex(data["pk"])), decode_g1(bytes.fromhex(data["cert"])))
        return cls(bytes.fromhex(data["identity"]), cert,
                   load_helper(bytes.fromhex(data["helper_sk"]), storage_key),
                   load_helper(bytes.fromhex(data["helper_ke"]), storage_key),
                   int(data["event_count"]))

    def save(self, path: str | Path, storage_key: bytes) -> None:
        Path(path).write_text(json.dumps(self.to_json(storage_key), indent=2))

    @classmethod
    def load(cls, path: str | Path, storage_key: bytes) -> CameraStore:
        return cls.from_json(json.loads(Path(path).read_text()), storage_key)


def pick_challenges(puf: RoPufModel, rng: np.random.Generator,
                    code: CodeParams = BCH_492_57) -> tuple[PufChallenge, PufChallenge]:
    """Two disjoint random oscillator-pair sets, one per key."""
    per = puf.bits_per_pair
    n_sk = -(-response_bits_needed(SK_BITS, code) // per)
    n_ke = -(-response_bits_needed(KE_BITS, code) // per)
    if n_sk + n_ke > puf.num_pairs:
        raise ValueError("PUF has too few oscillator pairs for both keys")
    order = rng.permutation(puf.num_pairs)
    return (PufChallenge.ro_pairs(sorted(order[:n_sk].tolist())),
            PufChallenge.ro_pairs(sorted(order[n_sk : n_sk + n_ke].tolist())))


def enroll_camera(master: MasterKeys, identity: bytes, puf: RoPufModel,
                  rng: np.random.Generator | None = None,
                  code: CodeParams = BCH_492_57) -> CameraStore:
    """TA-side enrollment: bind sk and k_E to the PUF and certify pk."""
    c1, c2 = pick_challenges(puf, rng if rng is not None else np.random.default_rng(), code)
    # no rng: key bits come from the OS generator
    key_sk = KeyMaterial.random(SK_BITS, rng)
    key_ke = KeyMaterial.random(KE_BITS, rng)
    helper_sk = gen(puf.reference(c1), key_sk, code, c1)
    helper_ke = gen(puf.reference(c2), key_ke, code, c2)
    pk = bls.KeyPair.from_secret(certibs.derive_signing_key(key_sk)).pk
    cert = certibs.issue_certificate(master, identity, pk)
    return CameraStore(bytes(identity), cert, helper_sk, helper_ke)


def _readout(puf: RoPufModel, challenge: PufChallenge, index: int | None,
             flip_rate: float | None, rng: np.random.Generator | None) -> np.ndarray:
    if flip_rate is None:
        return puf.sample(challenge, index).bits
    gen_rng = rng if rng is not None else np.random.default_rng()
    return flip_bits(puf.reference(challenge).bits, flip_rate, gen_rng)


def node_boot(image: BootImage, rom: BootRom, puf: RoPufModel, store: CameraStore,
              readout_index: int | None = None, flip_rate: float | None = None,
              rng: np.random.Generator | None = None) -> CameraKeys:
    """Verify the boot chain, then rebuild sk and k_E from the PUF.

    Raises BootError if any partition fails, DecodeError if the PUF
    readout is too noisy, ValueError if the rebuilt key does not match pk.
    """
    verdict = verify_boot_chain(image, rom)
    if not verdict:
        raise BootError(verdict.failed_at or "?", verdict.stage or "?")
    r1 = _readout(puf, store.helper_sk.challenge, readout_index, flip_rate, rng)
    r2 = _readout(puf, store.helper_ke.challenge, readout_index, flip_rate, rng)
    sk = certibs.derive_signing_key(rep(r1, store.helper_sk))
    k_e = rep(r2, store.helper_ke).to_bytes()
    pk = bls.KeyPair.from_secret(sk).pk
    if pk != store.cert.pk:
        raise ValueError("PUF-derived key does not match the certified key")
    return CameraKeys(sk, pk, k_e, derive_mac_key(k_e))


def key_exchange(keys: CameraKeys, store: CameraStore) -> KeyExchangeRecord:
    """Local-link transfer of pk, cert and k_E to the caretaker."""
    return KeyExchangeRecord(store.identity, keys.pk, store.cert, keys.k_e)


def record_to_json(record: KeyExchangeRecord) -> dict:
    return {"identity": record.identity.hex(), "pk": encode_g2(record.pk).hex(),
            "cert": encode_g1(record.cert.sig).hex(), "k_e": record.k_e.hex()}


def record_from_json(data: dict) -> KeyExchangeRecord:
    pk = decode_g2(bytes.fromhex(data["pk"]))
    return KeyExchangeRecord(bytes.fromhex(data["identity"]), pk,
                             Certificate(pk, decode_g1(bytes.fromhex(data["cert"]))),
                             bytes.fromhex(data["k_e"]))


class SecureCamera:
    """Watches a frame stream and protects footage around each event.

    On an event at frame t the footage is frames t .. t+footage_len-1
    (fewer if the stream ends); detection resumes after the footage.
    """

    def __init__(self, keys: CameraKeys, store: CameraStore, footage_len: int = 8,
                 threshold: float = DEFAULT_AREA_THRESHOLD,
                 pixel_threshold: int = DEFAULT_PIXEL_THRESHOLD) -> None:
        if footage_len <= 0:
            raise ValueError("footage length must be positive")
        self.keys = keys
        self.store = store
        self.footage_len = footage_len
        self.detector = EventDetector(threshold, pixel_threshold)

    def process(self, frames: Sequence[Frame]) -> list[ProtectedFootage]:
        out = []
        i = 0
        while i < len(frames):
            if self.detector.feed(frames[i]):
                clip = list(frames[i : i + self.footage_len])
                event = self.store.next_event()
                out.append(protect_footage(self.keys, self.store.identity, event, clip))
                logger.info("event %d at frame %d: %d frames protected", event, i, len(clip))
                i += len(clip)
                self.detector.reset()
                continue
            i += 1
        return out
