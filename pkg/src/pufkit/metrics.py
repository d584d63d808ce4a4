"""
Hamming distances, intra/inter-distance sampling and threshold analysis.

A presented response is accepted when its distance to the reference is at
most the threshold (inclusive). FAR is the accepted fraction of inter-distance
samples, FRR the rejected fraction of intra-distance samples.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path

import numpy as np

from .core import Challenge, evaluate
from .errors import ConfigurationError, DimensionError
from .oscillator import Environment, OscillatorPopulation, PufInstance


def _as_bits(x) -> np.ndarray:
    return np.asarray(getattr(x, "bits", x), dtype=np.uint8)


def hamming_distance(x, y) -> int:
    x, y = _as_bits(x), _as_bits(y)
    if x.shape != y.shape:
        raise DimensionError(f"length mismatch: {x.size} vs {y.size}")
    return int(np.count_nonzero(x != y))


def fractional_hd(x, y) -> float:
    x = _as_bits(x)
    if x.size == 0:
        raise DimensionError("fractional distance of empty vectors is undefined")
    return hamming_distance(x, y) / x.size


@dataclass(frozen=True)
class DistanceSamples:
    kind: str
    values: tuple[int, ...]
    m: int

    def __post_init__(self):
        if self.kind not in ("intra", "inter"):
            raise ConfigurationError(f"kind must be 'intra' or 'inter', got {self.kind!r}", "kind")
        values = tuple(int(v) for v in self.values)
        if any(v < 0 or v > self.m for v in values):
            raise DimensionError(f"distance outside [0, {self.m}]")
        object.__setattr__(self, "values", values)

    def __len__(self):
        return len(self.values)

    def fractional(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float) / self.m

    def histogram(self) -> np.ndarray:
        return np.bincount(np.asarray(self.values, dtype=np.int64), minlength=self.m + 1)

    def merged(self, other: DistanceSamples) -> DistanceSamples:
        if other.kind != self.kind or other.m != self.m:
            raise DimensionError("can only merge samples of the same kind and length")
        return DistanceSamples(self.kind, self.values + other.values, self.m)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "values": list(self.values), "m": self.m}


def intra_distance_samples(
    instance: PufInstance,
    challenge: Challenge,
    repeats: int,
    envs: list[Environment],
) -> DistanceSamples:
    """Distances from a nominal first measurement to ``repeats - 1`` later ones.

    Measurement ``i`` (``i >= 1``) runs at ``envs[(i - 1) % len(envs)]`` with
    noise stream ``i``; the reference uses stream 0 at nominal conditions.
    """
    if repeats < 2:
        raise ConfigurationError(f"repeats must be >= 2, got {repeats}", "repeats")
    if not envs:
        raise ConfigurationError("envs must not be empty", "envs")
    reference = evaluate(instance, challenge, instance.config.nominal, 0)
    values = [
        hamming_distance(reference, evaluate(instance, challenge, envs[(i - 1) % len(envs)], i))
        for i in range(1, repeats)
    ]
    return DistanceSamples("intra", tuple(values), challenge.m)


def inter_distance_samples(
    population: OscillatorPopulation | list[PufInstance],
    challenge: Challenge | list[Challenge],
) -> DistanceSamples:
    """Distances between noise-free nominal responses of every instance pair.

    A per-instance challenge list is accepted for strategies whose selection
    depends on the instance (k-group).
    """
    instances = list(population.instances if isinstance(population, OscillatorPopulation) else population)
    if len(instances) < 2:
        raise ConfigurationError(f"need at least 2 instances, got {len(instances)}", "instances")
    challenges = challenge if isinstance(challenge, list) else [challenge] * len(instances)
    responses = np.stack([evaluate(inst, ch).bits for inst, ch in zip(instances, challenges)])
    m = responses.shape[1]
    values = [int(np.count_nonzero(responses[i] != responses[j])) for i, j in combinations(range(len(instances)), 2)]
    return DistanceSamples("inter", tuple(values), m)


@dataclass(frozen=True)
class FarFrrCurve:
    thresholds: tuple[int, ...]
    false_accepts: tuple[int, ...]
    false_rejects: tuple[int, ...]
    n_inter: int
    n_intra: int

    @property
    def far(self) -> np.ndarray:
        return np.asarray(self.false_accepts) / self.n_inter

    @property
    def frr(self) -> np.ndarray:
        return np.asarray(self.false_rejects) / self.n_intra

    @property
    def rows(self) -> list[tuple[int, float, float]]:
        return list(zip(self.thresholds, self.far.tolist(), self.frr.tolist()))

    def to_dict(self) -> dict:
        return {"rows": [{"threshold": t, "far": a, "frr": r} for t, a, r in self.rows]}


def _check_pair(intra: DistanceSamples, inter: DistanceSamples) -> None:
    if intra.m != inter.m:
        raise DimensionError(f"response length mismatch: intra m={intra.m}, inter m={inter.m}")
    if not len(intra) or not len(inter):
        raise ConfigurationError("both sample sets must be nonempty", "samples")


def far_frr_curve(intra: DistanceSamples, inter: DistanceSamples) -> FarFrrCurve:
    _check_pair(intra, inter)
    thresholds = np.arange(intra.m + 1)
    inter_sorted = np.sort(inter.values)
    intra_sorted = np.sort(intra.values)
    accepted_inter = np.searchsorted(inter_sorted, thresholds, side="right")
    accepted_intra = np.searchsorted(intra_sorted, thresholds, side="right")
    return FarFrrCurve(
        tuple(thresholds.tolist()),
        tuple(accepted_inter.tolist()),
        tuple((len(intra) - accepted_intra).tolist()),
        len(inter),
        len(intra),
    )


def equal_error_threshold(curve: FarFrrCurve) -> tuple[int, float]:
    # exact integer comparison of |FA/n_inter - FR/n_intra|
    gaps = [abs(fa * curve.n_intra - fr * curve.n_inter) for fa, fr in zip(curve.false_accepts, curve.false_rejects)]
    best = gaps.index(min(gaps))
    eer = max(curve.false_accepts[best] / curve.n_inter, curve.false_rejects[best] / curve.n_intra)
    return curve.thresholds[best], eer


def overlap_measure(intra: DistanceSamples, inter: DistanceSamples) -> float:
    """Probability that a random intra-distance is >= a random inter-distance."""
    if not len(intra) or not len(inter):
        raise ConfigurationError("both sample sets must be nonempty", "samples")
    inter_sorted = np.sort(inter.values)
    # for each intra value a, count inter values b <= a
    counts = np.searchsorted(inter_sorted, np.asarray(intra.values), side="right")
    return float(counts.sum()) / (len(intra) * len(inter))


@dataclass(frozen=True)
class EvaluationReport:
    intra: DistanceSamples
    inter: DistanceSamples
    curve: FarFrrCurve
    eer_threshold: int
    eer: float
    overlap: float

    @classmethod
    def build(cls, intra: DistanceSamples, inter: DistanceSamples) -> EvaluationReport:
        curve = far_frr_curve(intra, inter)
        tau, eer = equal_error_threshold(curve)
        return cls(intra, inter, curve, tau, eer, overlap_measure(intra, inter))

    @property
    def m(self) -> int:
        return self.intra.m

    def to_dict(self) -> dict:
        return {
            "intra": self.intra.to_dict(),
            "inter": self.inter.to_dict(),
            "curve": self.curve.to_dict(),
            "eer_threshold": self.eer_threshold,
            "eer": self.eer,
            "overlap": self.overlap,
        }

    def histogram_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["distance", "count_intra", "count_inter"])
        for d, (a, b) in enumerate(zip(self.intra.histogram(), self.inter.histogram())):
            writer.writerow([d, int(a), int(b)])
        return buf.getvalue()

    def curve_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["threshold", "far", "frr"])
        for t, far, frr in self.curve.rows:
            writer.writerow([t, f"{far:.6f}", f"{frr:.6f}"])
        return buf.getvalue()

    def write(self, report: str | Path | None = None, histogram: str | Path | None = None, curve: str | Path | None = None) -> None:
        if report:
            Path(report).write_text(json.dumps(self.to_dict(), indent=1))
        if histogram:
            Path(histogram).write_text(self.histogram_csv())
        if curve:
            Path(curve).write_text(self.curve_csv())


def evaluate_population(
    population: OscillatorPopulation,
    challenge_for,
    repeats: int,
    envs: list[Environment] | None = None,
) -> EvaluationReport:
    """Full identifiability report for a population.

    ``challenge_for`` maps an instance to the challenge applied to it, which
    lets instance-specific strategies (k-group) share this path.
    """
    if len(population) < 2:
        raise ConfigurationError(f"need at least 2 instances, got {len(population)}", "instances")
    envs = envs or [population.config.nominal]
    challenges = [challenge_for(inst) for inst in population.instances]
    intra = None
    for inst, ch in zip(population.instances, challenges):
        samples = intra_distance_samples(inst, ch, repeats, envs)
        intra = samples if intra is None else intra.merged(samples)
    inter = inter_distance_samples(population, challenges)
    return EvaluationReport.build(intra, inter)
