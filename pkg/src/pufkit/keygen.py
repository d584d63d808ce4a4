"""
Code-offset fuzzy extractor over PUF responses.

Initialization binds a random repetition codeword to the reference response
through a public offset ``w = r xor c``. Reproduction strips the offset from a
noisy response, majority-decodes, re-encodes and re-applies the offset to
recover ``r`` exactly; the key is a hash of that corrected response.
"""
from __future__ import annotations

import hashlib
import secrets
from dataclasses import dataclass

import numpy as np

from .core import Challenge, bits_to_str, evaluate, str_to_bits
from .errors import ConfigurationError, DimensionError
from .oscillator import Environment, PufInstance

HASHES = {
    "sha-256": "sha256",
    "sha-384": "sha384",
    "sha-512": "sha512",
    "sha3-256": "sha3_256",
    "sha3-512": "sha3_512",
    "blake2b": "blake2b",
}
KEY_SIZES = (128, 256)


@dataclass(frozen=True)
class CodeParams:
    t: int
    data_bits: int
    scheme: str = "repetition"

    def __post_init__(self):
        if self.scheme != "repetition":
            raise ConfigurationError(f"unsupported code scheme {self.scheme!r}", "scheme")
        _check_t(self.t)
        if self.t < 3:
            raise ConfigurationError(f"repetition factor t must be >= 3, got {self.t}", "t")
        if self.data_bits < 1:
            raise ConfigurationError(f"data_bits must be >= 1, got {self.data_bits}", "data_bits")

    @property
    def n(self) -> int:
        return self.t * self.data_bits

    @classmethod
    def for_length(cls, m: int, t: int) -> CodeParams:
        _check_t(t)
        if m < t:
            raise DimensionError(f"response length {m} is shorter than t={t}")
        if m % t:
            raise DimensionError(f"response length {m} is not a multiple of t={t}")
        return cls(t, m // t)

    def to_dict(self) -> dict:
        return {"scheme": self.scheme, "t": self.t, "data_bits": self.data_bits}


def _check_t(t: int) -> None:
    if t < 1 or t % 2 == 0:
        raise ConfigurationError(f"repetition factor t must be odd, got {t}", "t")


@dataclass(frozen=True, eq=False)
class HelperData:
    code: CodeParams
    offset: np.ndarray
    challenge: Challenge
    hash_id: str = "sha-256"
    key_bits: int = 256

    def __post_init__(self):
        offset = np.asarray(self.offset, dtype=np.uint8)
        if offset.size != self.code.n:
            raise DimensionError(f"offset has {offset.size} bits, code expects {self.code.n}")
        if self.challenge.m != self.code.n:
            raise DimensionError(f"challenge yields {self.challenge.m} bits, code expects {self.code.n}")
        _check_hash(self.hash_id, self.key_bits)
        object.__setattr__(self, "offset", offset)

    def __eq__(self, other):
        if not isinstance(other, HelperData):
            return NotImplemented
        return (
            self.code == other.code
            and np.array_equal(self.offset, other.offset)
            and self.challenge == other.challenge
            and self.hash_id == other.hash_id
            and self.key_bits == other.key_bits
        )

    __hash__ = None

    def to_dict(self) -> dict:
        return {
            "code": self.code.to_dict(),
            "offset": bits_to_str(self.offset),
            "challenge": self.challenge.to_dict(),
            "hash_id": self.hash_id,
            "key_bits": self.key_bits,
        }

    @classmethod
    def from_dict(cls, data: dict) -> HelperData:
        code = data["code"]
        return cls(
            CodeParams(code["t"], code["data_bits"], code.get("scheme", "repetition")),
            str_to_bits(data["offset"]),
            Challenge.from_dict(data["challenge"]),
            data["hash_id"],
            data["key_bits"],
        )


@dataclass(frozen=True)
class Key:
    bytes: bytes

    @property
    def bits(self) -> int:
        return 8 * len(self.bytes)

    def hex(self) -> str:
        return self.bytes.hex()

    def __repr__(self):
        return f"Key(<{self.bits} bits>)"


def _check_hash(hash_id: str, key_bits: int) -> None:
    if hash_id not in HASHES:
        raise ConfigurationError(f"unsupported hash {hash_id!r}, expected one of {sorted(HASHES)}", "hash_id")
    if key_bits not in KEY_SIZES:
        raise ConfigurationError(f"key_bits must be one of {KEY_SIZES}, got {key_bits}", "key_bits")


def encode_repetition(info, t: int) -> np.ndarray:
    _check_t(t)
    return np.repeat(np.asarray(info, dtype=np.uint8), t)


def decode_repetition(bits, t: int) -> np.ndarray:
    _check_t(t)
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.size % t:
        raise DimensionError(f"length {bits.size} is not a multiple of t={t}")
    return (bits.reshape(-1, t).sum(axis=1) > t // 2).astype(np.uint8)


def pack_bits(bits) -> bytes:
    """Big-endian packing, left-padded with zeros to a whole byte."""
    bits = np.asarray(bits, dtype=np.uint8)
    pad = (-bits.size) % 8
    return np.packbits(np.concatenate([np.zeros(pad, dtype=np.uint8), bits])).tobytes()


def extract_key(corrected_response, hash_id: str = "sha-256", key_bits: int = 256) -> Key:
    _check_hash(hash_id, key_bits)
    digest = hashlib.new(HASHES[hash_id], pack_bits(corrected_response)).digest()
    return Key(digest[: key_bits // 8])


def make_offset(reference, info, t: int) -> np.ndarray:
    """Secure sketch: ``w = r xor encode(s)``."""
    reference = np.asarray(reference, dtype=np.uint8)
    codeword = encode_repetition(info, t)
    if codeword.size != reference.size:
        raise DimensionError(f"codeword has {codeword.size} bits, response has {reference.size}")
    return reference ^ codeword


def correct_response(noisy, offset, t: int) -> np.ndarray:
    """Recover the reference response from a noisy one and the public offset."""
    noisy = np.asarray(noisy, dtype=np.uint8)
    offset = np.asarray(offset, dtype=np.uint8)
    if noisy.shape != offset.shape:
        raise DimensionError(f"response has {noisy.size} bits, offset has {offset.size}")
    return encode_repetition(decode_repetition(noisy ^ offset, t), t) ^ offset


def keygen_init(
    instance: PufInstance,
    challenge: Challenge,
    code: CodeParams,
    hash_id: str = "sha-256",
    key_bits: int = 256,
    rng: np.random.Generator | None = None,
) -> tuple[Key, HelperData]:
    """Enroll ``instance``: measure the noise-free reference response, draw
    random information bits and publish the offset.

    Without ``rng`` the information bits come from the OS CSPRNG.
    """
    if challenge.m != code.n:
        raise DimensionError(f"challenge yields {challenge.m} bits, code expects {code.n}")
    reference = evaluate(instance, challenge).bits
    if rng is None:
        info = np.frombuffer(secrets.token_bytes(code.data_bits), dtype=np.uint8) & 1
    else:
        info = rng.integers(0, 2, code.data_bits, dtype=np.uint8)
    helper = HelperData(code, make_offset(reference, info, code.t), challenge, hash_id, key_bits)
    return extract_key(reference, hash_id, key_bits), helper


def reproduce_from_response(noisy, helper: HelperData) -> Key:
    return extract_key(correct_response(noisy, helper.offset, helper.code.t), helper.hash_id, helper.key_bits)


def keygen_reproduce(
    instance: PufInstance,
    helper: HelperData,
    env: Environment | None = None,
    measurement_index: int | None = None,
) -> Key:
    if instance.n_oscillators <= max(max(p) for p in helper.challenge.pairs):
        raise DimensionError("helper challenge does not fit this instance's oscillator array")
    noisy = evaluate(instance, helper.challenge, env, measurement_index).bits
    return reproduce_from_response(noisy, helper)
