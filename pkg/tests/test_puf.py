import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pufsense import puf
from pufsense.puf import PufChallenge, PufResponse, RoPufModel, SramPufModel


def resp(text: str) -> PufResponse:
    return PufResponse.from_string(text)


@pytest.mark.parametrize("bits,expected", [("11111111", 1.0), ("10110010", 0.5), ("10000000", 0.125)])
def test_hamming_weight_hand_values(bits, expected):
    assert puf.hamming_weight(resp(bits)) == expected


def test_hd_intra_hand_values():
    ref = resp("00000000")
    assert puf.hd_intra(ref, [resp("00000001"), resp("00000111")]) == (0.25, 0.375)
    assert puf.hd_intra(ref, [ref, ref]) == (0.0, 0.0)


def test_hd_inter_hand_values():
    assert puf.hd_inter([resp("1100"), resp("0011")]) == 1.0
    assert puf.hd_inter([resp("1100"), resp("1010")]) == 0.5
    assert puf.hd_inter([resp("1011")] * 4) == 0.0


def test_hd_inter_matches_pairwise_loop():
    rng = np.random.default_rng(5)
    rows = [rng.integers(0, 2, 64, dtype=np.uint8) for _ in range(6)]
    slow = np.mean([np.mean(a != b) for i, a in enumerate(rows) for b in rows[i + 1:]])
    assert puf.hd_inter(rows) == pytest.approx(slow)


@given(st.lists(st.integers(0, 1), min_size=1, max_size=256))
def test_weight_of_complement_sums_to_one(bits):
    r = np.array(bits, dtype=np.uint8)
    assert puf.hamming_weight(r) + puf.hamming_weight(1 - r) == pytest.approx(1.0)


def test_response_is_immutable():
    r = resp("0101")
    with pytest.raises(ValueError):
        r.bits[0] = 1
    with pytest.raises(ValueError):
        PufResponse(np.array([], dtype=np.uint8))


def test_challenge_serialization_round_trip():
    for ch in (PufChallenge.sram_range(16, 1040), PufChallenge.ro_pairs([3, 1, 7])):
        assert PufChallenge.from_bytes(ch.to_bytes()) == ch


def test_sram_zero_noise_is_repeatable():
    model = SramPufModel(1024, bias=0.6, mean_flip_rate=0.0, rng_seed=9)
    ch = puf.full_challenge(model)
    assert model.sample(ch, 0) == model.sample(ch, 1) == model.reference(ch)


def test_sram_samples_are_deterministic_per_index():
    model = puf.atmega328p_sram(seed=3)
    ch = PufChallenge.sram_range(0, 2048)
    assert model.sample(ch, 5) == model.sample(ch, 5)
    assert model.sample(ch, 5) != model.sample(ch, 6)
    # same seed, fresh object: same silicon, same readouts
    assert puf.atmega328p_sram(seed=3).sample(ch, 5) == model.sample(ch, 5)


def test_sram_subrange_matches_full_readout():
    model = puf.atmega328p_sram(seed=3)
    full = model.sample(puf.full_challenge(model), 2).bits
    part = model.sample(PufChallenge.sram_range(100, 300), 2).bits
    assert np.array_equal(full[100:300], part)


def test_sram_1024_cells_weight_near_bias():
    model = SramPufModel(1024, bias=0.635, mean_flip_rate=0.034, rng_seed=11)
    ch = puf.full_challenge(model)
    hw = np.mean([puf.hamming_weight(model.sample(ch, i)) for i in range(100)])
    assert abs(100 * hw - 63.5) <= 2.0


@pytest.mark.parametrize("factory,target", [(puf.atmega328p_sram, 3.4), (puf.cortex_m4_sram, 7.66)])
def test_sram_hd_intra_tracks_flip_rate(factory, target):
    model = factory(seed=1)
    ch = puf.full_challenge(model)
    samples = [model.sample(ch, i) for i in range(101)]
    mean, _ = puf.hd_intra(samples[0], samples[1:])
    assert abs(100 * mean - target) <= 1.0


def test_sram_rejects_bad_parameters():
    with pytest.raises(ValueError):
        SramPufModel(10, bias=1.5, mean_flip_rate=0.1)
    with pytest.raises(ValueError):
        SramPufModel(10, bias=0.5, mean_flip_rate=0.6)
    with pytest.raises(ValueError):
        SramPufModel(10, bias=0.5, mean_flip_rate=0.1).sample(PufChallenge.sram_range(0, 11))


def test_ro_full_response_length():
    model = puf.zynq7010_ro(seed=0)
    assert model.num_pairs == 1039
    assert len(model.sample(puf.full_challenge(model), 0)) == 3117


@given(st.lists(st.integers(0, 1038), min_size=1, max_size=40))
@settings(max_examples=30, deadline=None)
def test_ro_length_is_three_bits_per_pair(pairs):
    model = puf.zynq7010_ro(seed=2)
    assert len(model.sample(PufChallenge.ro_pairs(pairs), 0)) == 3 * len(pairs)


def test_ro_single_pair_without_noise_is_repeatable():
    model = RoPufModel(num_ros=2, freq_noise_sd=0.0, rng_seed=4)
    ch = PufChallenge.ro_pairs([0])
    outs = {model.sample(ch, i).to_string() for i in range(5)}
    assert len(outs) == 1 and len(outs.pop()) == 3


def test_ro_race_by_hand():
    model = RoPufModel(num_ros=2)
    # fast RO at 200 MHz overflows 2^16 first; the slow one has counted
    # floor(65536 * 190/200) = 62259 = 0b1111001100110011
    counts = model.race(np.array([200e6, 190e6]), np.array([0]))
    assert counts.tolist() == [62259]
    # equal frequencies: the loser's counter is clamped below overflow
    assert model.race(np.array([1e8, 1e8]), np.array([0])).tolist() == [65535]


def test_ro_inter_device_distance_near_half():
    refs = []
    for d in range(10):
        m = puf.zynq7010_ro(seed=d)
        refs.append(m.sample(puf.full_challenge(m), 0))
    assert abs(100 * puf.hd_inter(refs) - 51.1) <= 3.0


def test_characterize_and_dump_round_trip(tmp_path):
    model = puf.atmega328p_sram(seed=0)
    ch = PufChallenge.sram_range(0, 512)
    samples = [model.sample(ch, i) for i in range(5)]
    other = puf.atmega328p_sram(seed=1).sample(ch, 0)
    stats = puf.characterize(samples[0], samples[1:], [other])
    assert stats.mean_hd_inter is not None and 0.3 < stats.mean_hd_inter < 0.7
    path = tmp_path / "r.txt"
    path.write_text(puf.dump_responses(samples))
    assert puf.read_responses(path) == samples
    with pytest.raises(ValueError):
        puf.parse_responses("0101\n01x1\n")


def test_profiles_lookup():
    assert isinstance(puf.make_profile("ro"), RoPufModel)
    with pytest.raises(ValueError):
        puf.make_profile("dram")
