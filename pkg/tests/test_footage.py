import hashlib
import struct
from random import Random

import pytest

from pufsense import bls, certibs
from pufsense.groups import G1
from pufsense.node import footage as ft
from pufsense.node.footage import CameraKeys, FootageRejected, KeyExchangeRecord, ProtectedFootage
from pufsense.node.motion import YUV422, synthetic_scene
from pufsense.replay import ReplayCache

IDENT = b"cam-1"


@pytest.fixture(scope="module")
def camera(master):
    kp = bls.KeyPair.generate(Random("cam"))
    k_e = bytes(range(16))
    keys = CameraKeys(kp.sk, kp.pk, k_e, ft.derive_mac_key(k_e))
    record = KeyExchangeRecord(IDENT, kp.pk, certibs.issue_certificate(master, IDENT, kp.pk), k_e)
    return keys, record


def check(record, mpk, data, cache=None):
    return ft.caretaker_verify_decrypt(record, mpk, data, cache if cache is not None else ReplayCache())


@pytest.mark.parametrize("n", [1, 2, 5, 16])
def test_round_trip(camera, master, n):
    keys, record = camera
    frames = synthetic_scene(16, 8, n, seed=n)
    protected = ft.protect_footage(keys, IDENT, n, frames)
    out = check(record, master.mpk, protected.to_bytes())
    assert [f.data for f in out] == [f.data for f in frames]


def test_yuv_round_trip(camera, master):
    keys, record = camera
    frames = synthetic_scene(16, 8, 3, layout=YUV422)
    out = check(record, master.mpk, ft.protect_footage(keys, IDENT, 1, frames).to_bytes())
    assert [f.data for f in out] == [f.data for f in frames]


def test_ciphertext_differs_from_plaintext_and_across_events(camera):
    keys, _ = camera
    frames = synthetic_scene(16, 8, 2)
    a = ft.protect_footage(keys, IDENT, 1, frames)
    b = ft.protect_footage(keys, IDENT, 2, frames)
    assert a.ciphertexts[0] != frames[0].data
    assert a.ciphertexts[0] != b.ciphertexts[0]
    assert a.ciphertexts[0] != a.ciphertexts[1] or frames[0].data != frames[1].data


def test_every_single_bit_flip_is_rejected(camera, master):
    keys, record = camera
    data = ft.protect_footage(keys, IDENT, 3, synthetic_scene(4, 2, 2)).to_bytes()
    assert check(record, master.mpk, data)
    reasons = set()
    for bit in range(8 * len(data)):
        mutated = bytearray(data)
        mutated[bit // 8] ^= 0x80 >> (bit % 8)
        with pytest.raises(FootageRejected) as exc:
            check(record, master.mpk, bytes(mutated))
        reasons.add(exc.value.reason)
    assert reasons >= {ft.REASON_SIG, ft.REASON_MALFORMED, ft.REASON_TIMESTAMP, ft.REASON_CERT}


def _rebuild(p: ProtectedFootage, **changes) -> ProtectedFootage:
    fields = dict(identity=p.identity, event_count=p.event_count, geometry=p.geometry,
                  ciphertexts=p.ciphertexts, tau=p.tau, sigma=p.sigma)
    fields.update(changes)
    return ProtectedFootage(**fields)


def test_dropping_swapping_and_truncating_frames(camera, master):
    keys, record = camera
    p = ft.protect_footage(keys, IDENT, 4, synthetic_scene(8, 8, 3, quiet=0, speed=1))
    c = p.ciphertexts
    for cts in ((c[1], c[0], c[2]), c[:2], c + (c[0],)):
        with pytest.raises(FootageRejected) as exc:
            check(record, master.mpk, _rebuild(p, ciphertexts=cts).to_bytes())
        assert exc.value.reason == ft.REASON_SIG


def test_replay_rejected(camera, master):
    keys, record = camera
    data = ft.protect_footage(keys, IDENT, 5, synthetic_scene(8, 8, 2)).to_bytes()
    cache = ReplayCache()
    check(record, master.mpk, data, cache)
    with pytest.raises(FootageRejected) as exc:
        check(record, master.mpk, data, cache)
    assert exc.value.reason == ft.REASON_REPLAY


def test_wrong_camera_or_authority(camera, master):
    keys, record = camera
    data = ft.protect_footage(keys, IDENT, 6, synthetic_scene(8, 8, 2)).to_bytes()
    rogue = certibs.setup(Random("rogue"))
    with pytest.raises(FootageRejected) as exc:
        check(record, rogue.mpk, data)
    assert exc.value.reason == ft.REASON_CERT
    other = KeyExchangeRecord(b"cam-2", record.pk, record.cert, record.k_e)
    with pytest.raises(FootageRejected):
        check(other, master.mpk, data)


def test_forged_signature_and_bad_stamp(camera, master):
    keys, record = camera
    p = ft.protect_footage(keys, IDENT, 7, synthetic_scene(8, 8, 2))
    cases = {ft.REASON_SIG: _rebuild(p, sigma=p.sigma * G1.generator()),
             ft.REASON_TIMESTAMP: _rebuild(p, tau=bytes(32))}
    for reason, bad in cases.items():
        with pytest.raises(FootageRejected) as exc:
            check(record, master.mpk, bad)
        assert exc.value.reason == reason


def test_audit_macs_checked(camera, master):
    keys, record = camera
    p = ft.protect_footage(keys, IDENT, 8, synthetic_scene(8, 8, 2))
    assert check(record, master.mpk, p)
    wrong_macs = ProtectedFootage(p.identity, p.event_count, p.geometry, p.ciphertexts, p.tau,
                                  p.sigma, (bytes(32),) * 2)
    with pytest.raises(FootageRejected) as exc:
        check(record, master.mpk, wrong_macs)
    assert exc.value.reason == ft.REASON_MAC


def test_freshness_is_hash_of_identity_and_counter():
    assert ft.freshness(b"cam", 3) == hashlib.sha256(b"cam" + struct.pack(">Q", 3)).digest()
    stamps = {ft.freshness(IDENT, i) for i in range(1000)}
    assert len(stamps) == 1000


@pytest.mark.parametrize("n", [1, 10])
def test_security_overhead_is_constant(camera, n):
    keys, _ = camera
    p = ft.protect_footage(keys, IDENT, 1, synthetic_scene(8, 8, n))
    assert ft.security_overhead_bits() == 416
    assert 8 * len(p.payload_bytes()) - 8 * sum(map(len, p.ciphertexts)) == 8 * (32 + 49)
    assert 8 * len(p.to_bytes()) == 8 * len(p.payload_bytes()) + ft.framing_bits(p)


def test_protect_rejects_bad_input(camera):
    keys, _ = camera
    with pytest.raises(ValueError):
        ft.protect_footage(keys, IDENT, 1, [])
    mixed = synthetic_scene(8, 8, 1) + synthetic_scene(16, 8, 1)
    with pytest.raises(ValueError):
        ft.protect_footage(keys, IDENT, 1, mixed)


def test_secret_keys_not_in_repr(camera):
    keys, record = camera
    assert keys.k_e.hex() not in repr(keys) and str(keys.sk) not in repr(keys)
    assert record.k_e.hex() not in repr(record)


def test_storage_server(tmp_path, camera):
    keys, _ = camera
    store = ft.StorageServer(tmp_path / "s")
    p = ft.protect_footage(keys, IDENT, 2, synthetic_scene(8, 8, 1))
    path = store.upload(p)
    assert store.notifications() == [path.name]
    assert store.fetch(path.name) == p.to_bytes()
    with pytest.raises(ValueError):
        store.fetch("../escape")
    weird = ft.protect_footage(keys, b"../x", 1, synthetic_scene(8, 8, 1))
    assert store.upload(weird).parent == (tmp_path / "s")
