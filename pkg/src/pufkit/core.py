"""Challenges, responses and the RO-PUF pair-selection strategies."""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .errors import BoundsError, ConfigurationError, DimensionError
from .oscillator import Environment, PufInstance, measure_all

STRATEGIES = ("explicit_pairs", "disjoint", "neighbor", "kgroup")

# provisioning measurements live far from the indices used for normal evaluation
PROVISIONING_BASE = 2**40


@dataclass(frozen=True)
class Challenge:
    strategy: str
    pairs: tuple[tuple[int, int], ...]
    k: int | None = None
    note: str | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigurationError(f"unknown strategy {self.strategy!r}, expected one of {STRATEGIES}", "strategy")
        pairs = tuple((int(a), int(b)) for a, b in self.pairs)
        object.__setattr__(self, "pairs", pairs)
        if not pairs:
            raise ConfigurationError("a challenge needs at least one pair", "pairs")
        for a, b in pairs:
            if a < 0 or b < 0:
                raise BoundsError(f"negative oscillator index in pair ({a}, {b})")
            if a == b:
                raise ConfigurationError(f"pair ({a}, {b}) compares an oscillator with itself", "pairs")
        if self.strategy == "disjoint":
            flat = [i for pair in pairs for i in pair]
            if len(flat) != len(set(flat)):
                raise ConfigurationError("disjoint challenge uses an oscillator more than once", "pairs")
        if self.strategy == "neighbor" and pairs != tuple((i, i + 1) for i in range(len(pairs))):
            raise ConfigurationError("neighbor challenge must be (0,1),(1,2),...", "pairs")
        if self.strategy == "kgroup" and (self.k is None or self.k < 2):
            raise ConfigurationError("kgroup challenge needs a group size k >= 2", "k")

    @property
    def m(self) -> int:
        return len(self.pairs)

    def validate_for(self, n_oscillators: int) -> None:
        top = max(max(pair) for pair in self.pairs)
        if top >= n_oscillators:
            raise BoundsError(f"challenge references oscillator {top}, array has {n_oscillators}")

    def to_dict(self) -> dict:
        return {"strategy": self.strategy, "pairs": [list(p) for p in self.pairs], "k": self.k}

    @classmethod
    def from_dict(cls, data: dict) -> Challenge:
        return cls(data["strategy"], tuple(tuple(p) for p in data["pairs"]), data.get("k"))


def bits_to_str(bits) -> str:
    return "".join("1" if b else "0" for b in bits)


def str_to_bits(text: str) -> np.ndarray:
    if any(c not in "01" for c in text):
        raise DimensionError(f"bit string may only contain '0' and '1': {text[:32]!r}")
    return np.frombuffer(text.encode("ascii"), dtype=np.uint8) - ord("0")


@dataclass(frozen=True, eq=False)
class Response:
    bits: np.ndarray
    tie_flags: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=np.uint8)
        ties = np.asarray(self.tie_flags, dtype=np.uint8)
        if bits.shape != ties.shape or bits.ndim != 1:
            raise DimensionError("bits and tie_flags must be 1-d vectors of equal length")
        object.__setattr__(self, "bits", bits)
        object.__setattr__(self, "tie_flags", ties)

    @property
    def m(self) -> int:
        return self.bits.size

    def __eq__(self, other):
        if not isinstance(other, Response):
            return NotImplemented
        return np.array_equal(self.bits, other.bits) and np.array_equal(self.tie_flags, other.tie_flags)

    __hash__ = None

    def to_dict(self) -> dict:
        return {"bits": bits_to_str(self.bits), "ties": bits_to_str(self.tie_flags)}

    @classmethod
    def from_dict(cls, data: dict) -> Response:
        return cls(str_to_bits(data["bits"]), str_to_bits(data["ties"]))


def compare_pair(freq_a: float, freq_b: float) -> tuple[int, int]:
    if freq_a > freq_b:
        return 1, 0
    if freq_a < freq_b:
        return 0, 0
    return 0, 1


def _compare(values: np.ndarray, challenge: Challenge) -> Response:
    idx = np.asarray(challenge.pairs)
    a, b = values[idx[:, 0]], values[idx[:, 1]]
    return Response((a > b).astype(np.uint8), (a == b).astype(np.uint8))


def evaluate(
    instance: PufInstance,
    challenge: Challenge,
    env: Environment | None = None,
    measurement_index: int | None = None,
) -> Response:
    """Apply ``challenge`` to ``instance``.

    One measurement of the whole array is taken, so all pairs see the same
    noise draw. ``measurement_index=None`` evaluates noise-free.
    """
    challenge.validate_for(instance.n_oscillators)
    freqs = measure_all(instance, env, measurement_index)
    window = instance.config.counter_window
    if window is not None:
        freqs = np.floor(freqs * window)
    return _compare(freqs, challenge)


def gen_challenge_all_pairs(n: int) -> Challenge:
    if n < 2:
        raise ConfigurationError(f"need at least 2 oscillators, got {n}", "n")
    return Challenge("explicit_pairs", tuple(combinations(range(n), 2)))


def gen_challenge_disjoint(n: int, seed: int | list[int]) -> Challenge:
    if n < 2:
        raise ConfigurationError(f"need at least 2 oscillators, got {n}", "n")
    if n % 2:
        raise ConfigurationError(
            f"disjoint pairing needs an even oscillator count, got {n}; drop one oscillator", "n"
        )
    perm = np.random.default_rng(seed).permutation(n)
    return Challenge("disjoint", tuple((int(perm[i]), int(perm[i + 1])) for i in range(0, n, 2)))


def gen_challenge_neighbor(n: int) -> Challenge:
    if n < 2:
        raise ConfigurationError(f"need at least 2 oscillators, got {n}", "n")
    return Challenge("neighbor", tuple((i, i + 1) for i in range(n - 1)))


def provision_kgroup(
    instance: PufInstance,
    k: int,
    env: Environment | None = None,
    provisioning_repeats: int = 1,
) -> Challenge:
    """Select, in each consecutive block of ``k`` oscillators, the pair whose
    averaged frequencies differ the most.

    Frequencies are averaged over ``provisioning_repeats`` noisy measurements
    taken from a dedicated index range. The selection is public challenge data.
    """
    n = instance.n_oscillators
    if k < 2:
        raise ConfigurationError(f"group size k must be >= 2, got {k}", "k")
    if n % k:
        raise ConfigurationError(f"group size k={k} does not divide n_oscillators={n}", "k")
    if provisioning_repeats < 1:
        raise ConfigurationError(f"provisioning_repeats must be >= 1, got {provisioning_repeats}", "provisioning_repeats")
    if instance.config.sigma_noise == 0:
        avg = measure_all(instance, env)
    else:
        avg = np.mean(
            [measure_all(instance, env, PROVISIONING_BASE + r) for r in range(provisioning_repeats)], axis=0
        )
    pairs = []
    for start in range(0, n, k):
        block = avg[start:start + k]
        lo, hi = int(np.argmin(block)), int(np.argmax(block))
        if lo == hi:
            lo, hi = 0, 1
        pairs.append(tuple(sorted((start + lo, start + hi))))
    return Challenge("kgroup", tuple(pairs), k, note=f"averaged over {provisioning_repeats} measurement(s)")


def make_challenge(
    strategy: str,
    instance: PufInstance,
    seed: int | list[int] = 0,
    k: int | None = None,
    provisioning_repeats: int = 10,
) -> Challenge:
    """Build a challenge of any strategy for ``instance``'s array size."""
    n = instance.n_oscillators
    if strategy in ("explicit_pairs", "all_pairs"):
        return gen_challenge_all_pairs(n)
    if strategy == "disjoint":
        return gen_challenge_disjoint(n, seed)
    if strategy == "neighbor":
        return gen_challenge_neighbor(n)
    if strategy == "kgroup":
        if k is None:
            raise ConfigurationError("kgroup strategy requires k", "k")
        return provision_kgroup(instance, k, instance.config.nominal, provisioning_repeats)
    raise ConfigurationError(f"unknown strategy {strategy!r}", "strategy")
