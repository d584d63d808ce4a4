import hashlib
import json
from itertools import product

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pufkit import (
    Challenge,
    CodeParams,
    ConfigurationError,
    DimensionError,
    HelperData,
    PopulationConfig,
    create_population,
    decode_repetition,
    encode_repetition,
    evaluate,
    extract_key,
    gen_challenge_neighbor,
    keygen_init,
    keygen_reproduce,
)
from pufkit.keygen import correct_response, make_offset, pack_bits, reproduce_from_response


def bits(text):
    return np.array([int(c) for c in text], dtype=np.uint8)


def s(arr):
    return "".join(str(int(b)) for b in arr)


def xor(a, b):
    return "".join("1" if x != y else "0" for x, y in zip(a, b))


def oracle_key(bitstring, name="sha256", key_bits=256):
    data = int(bitstring, 2).to_bytes((len(bitstring) + 7) // 8, "big") if bitstring else b""
    return hashlib.new(name, data).digest()[: key_bits // 8]


@pytest.mark.parametrize("info, t, code", [("10", 3, "111000"), ("", 3, ""), ("101", 5, "111110000011111")])
def test_encode(info, t, code):
    assert s(encode_repetition(bits(info), t)) == code


@pytest.mark.parametrize("word, t, info", [("101000", 3, "10"), ("111000", 3, "10"), ("110100", 3, "10")])
def test_decode(word, t, info):
    assert s(decode_repetition(bits(word), t)) == info


def test_code_errors():
    with pytest.raises(ConfigurationError):
        encode_repetition(bits("10"), 2)
    with pytest.raises(DimensionError):
        decode_repetition(bits("1010"), 3)
    with pytest.raises(ConfigurationError):
        CodeParams(4, 2)
    with pytest.raises(ConfigurationError):
        CodeParams(1, 2)
    with pytest.raises(DimensionError):
        CodeParams.for_length(7, 3)


@given(st.lists(st.integers(0, 1), max_size=40), st.sampled_from([1, 3, 5, 7]))
def test_decode_inverts_encode(info, t):
    assert decode_repetition(encode_repetition(info, t), t).tolist() == info


def test_worked_example():
    r, info = "110010", "10"
    assert xor(r, "111000") == "001010"
    w = make_offset(bits(r), bits(info), 3)
    assert s(w) == "001010"
    noisy = "100010"
    assert xor(noisy, s(w)) == "101000"
    assert s(correct_response(bits(noisy), w, 3)) == r
    assert s(correct_response(bits(r), w, 3)) == r
    # two flips in the first block push its majority over
    assert s(correct_response(bits("000010"), w, 3)) != r


def test_pack_and_extract_match_oracle():
    assert pack_bits(bits("1")) == b"\x01"
    assert pack_bits(bits("100000001")) == b"\x01\x01"
    for text in ("110010", "1" * 17, "0" * 8, "10110"):
        assert extract_key(bits(text)).bytes == oracle_key(text)
    assert extract_key(bits("110010"), "sha-512", 128).bytes == oracle_key("110010", "sha512", 128)


def test_extract_properties():
    a = extract_key(bits("110010"))
    assert a == extract_key(bits("110010"))
    assert a != extract_key(bits("110011"))
    assert a.bytes == hashlib.sha256(b"\x32").digest()
    assert extract_key(bits("110010"), key_bits=128).bytes == a.bytes[:16]
    with pytest.raises(ConfigurationError):
        extract_key(bits("1"), "md5")
    with pytest.raises(ConfigurationError):
        extract_key(bits("1"), key_bits=192)


def test_key_repr_hides_material():
    key = extract_key(bits("1011"))
    assert key.hex() not in repr(key)


def test_single_bit_avalanche():
    rng = np.random.default_rng(0)
    base = rng.integers(0, 2, 64, dtype=np.uint8)
    keys = {extract_key(base).bytes}
    for i in range(64):
        flipped = base.copy()
        flipped[i] ^= 1
        keys.add(extract_key(flipped).bytes)
    assert len(keys) == 65


@pytest.fixture
def device():
    return create_population(PopulationConfig(n_oscillators=25, sigma_noise=0.0005, seed=21), 2)


def test_init_and_reproduce(device):
    inst = device[0]
    ch = gen_challenge_neighbor(25)
    key, helper = keygen_init(inst, ch, CodeParams(3, 8), rng=np.random.default_rng(1))
    assert key == extract_key(evaluate(inst, ch).bits)
    assert keygen_reproduce(inst, helper) == key
    assert keygen_reproduce(inst, helper, None, 5) == keygen_reproduce(inst, helper, None, 5)
    assert keygen_reproduce(device[1], helper) != key


def test_different_info_same_key(device):
    inst, ch = device[0], gen_challenge_neighbor(25)
    k1, h1 = keygen_init(inst, ch, CodeParams(3, 8), rng=np.random.default_rng(1))
    k2, h2 = keygen_init(inst, ch, CodeParams(3, 8), rng=np.random.default_rng(2))
    assert k1 == k2
    assert not np.array_equal(h1.offset, h2.offset)


def test_init_length_mismatch(device):
    ch = Challenge("explicit_pairs", tuple((i, i + 1) for i in range(7)))
    with pytest.raises(DimensionError):
        keygen_init(device[0], ch, CodeParams.for_length(7, 3))


def test_exhaustive_single_flip_per_block_small():
    rng = np.random.default_rng(3)
    for _ in range(5):
        r = rng.integers(0, 2, 12, dtype=np.uint8)
        w = make_offset(r, rng.integers(0, 2, 4, dtype=np.uint8), 3)
        for pattern in product(range(4), repeat=4):
            noisy = r.copy()
            for block, pos in enumerate(pattern):
                if pos < 3:
                    noisy[3 * block + pos] ^= 1
            assert np.array_equal(correct_response(noisy, w, 3), r)


def test_offset_bit_balance(device):
    inst, ch = device[0], gen_challenge_neighbor(25)
    code = CodeParams(3, 8)
    rng = np.random.default_rng(7)
    offsets = np.stack([keygen_init(inst, ch, code, rng=rng)[1].offset for _ in range(1000)])
    assert np.all(np.abs(offsets.mean(axis=0) - 0.5) <= 0.05)


def test_default_info_source_is_random(device):
    inst, ch = device[0], gen_challenge_neighbor(25)
    offsets = {keygen_init(inst, ch, CodeParams(3, 8))[1].offset.tobytes() for _ in range(8)}
    assert len(offsets) > 1


def test_helper_json_roundtrip(device):
    inst, ch = device[0], gen_challenge_neighbor(25)
    key, helper = keygen_init(inst, ch, CodeParams(3, 8), "sha-256", 256, np.random.default_rng(0))
    doc = json.loads(json.dumps(helper.to_dict()))
    assert set(doc) == {"code", "offset", "challenge", "hash_id", "key_bits"}
    assert doc["code"] == {"scheme": "repetition", "t": 3, "data_bits": 8}
    assert len(doc["offset"]) == 24 and set(doc["offset"]) <= {"0", "1"}
    restored = HelperData.from_dict(doc)
    assert restored == helper
    assert reproduce_from_response(evaluate(inst, ch).bits, restored) == key


def test_helper_rejects_bad_offset(device):
    ch = gen_challenge_neighbor(25)
    with pytest.raises(DimensionError):
        HelperData(CodeParams(3, 8), np.zeros(23, dtype=np.uint8), ch)
