"""
Verifier-side challenge-response database.

Records are consumed when issued (burn-on-issue), whether or not a response
ever arrives. Every mutation takes the database lock, so one writer runs at a
time; when the database is bound to a file each mutation is persisted
atomically before the call returns.
"""
from __future__ import annotations

import json
import os
import re
import tempfile
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import Challenge, bits_to_str, evaluate, make_challenge, str_to_bits
from .errors import ConfigurationError, ConflictError, DimensionError, ExhaustedError, NotFoundError, ProtocolOrderError
from .keygen import CodeParams, HelperData, keygen_init, keygen_reproduce
from .metrics import hamming_distance
from .oscillator import Environment, PufInstance

ID_PATTERN = re.compile(r"[A-Za-z0-9_-]{1,64}")


@dataclass
class CrpRecord:
    challenge: Challenge
    response: np.ndarray
    used: bool = False
    helper: HelperData | None = None
    response_hash: bytes | None = None

    def to_dict(self) -> dict:
        out = {"challenge": self.challenge.to_dict(), "response": bits_to_str(self.response), "used": self.used}
        if self.helper is not None:
            out["helper"] = self.helper.to_dict()
        if self.response_hash is not None:
            out["hash"] = self.response_hash.hex()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> CrpRecord:
        return cls(
            Challenge.from_dict(data["challenge"]),
            str_to_bits(data["response"]),
            bool(data["used"]),
            HelperData.from_dict(data["helper"]) if "helper" in data else None,
            bytes.fromhex(data["hash"]) if "hash" in data else None,
        )


@dataclass(frozen=True)
class AuthOutcome:
    accept: bool
    distance: int
    threshold: int
    record_index: int


def validate_id(entity_id: str) -> None:
    if not isinstance(entity_id, str) or not ID_PATTERN.fullmatch(entity_id):
        raise ConfigurationError(f"entity id must match [a-zA-Z0-9_-]{{1,64}}, got {entity_id!r}", "id")


def atomic_write_text(path: Path, text: str) -> None:
    """Write via a temporary file in the same directory, then rename over ``path``."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@dataclass
class CrpDatabase:
    threshold: int
    m: int
    entities: dict[str, list[CrpRecord]] = field(default_factory=dict)
    path: Path | None = field(default=None, compare=False)
    _lock: threading.RLock = field(default_factory=threading.RLock, repr=False, compare=False)

    def __post_init__(self):
        if self.threshold < 0:
            raise ConfigurationError(f"threshold must be >= 0, got {self.threshold}", "threshold")
        if self.m < 1:
            raise ConfigurationError(f"m must be >= 1, got {self.m}", "m")

    # persistence

    def to_dict(self) -> dict:
        with self._lock:
            return {
                "threshold": self.threshold,
                "m": self.m,
                "entities": {eid: {"crps": [r.to_dict() for r in recs]} for eid, recs in self.entities.items()},
            }

    @classmethod
    def from_dict(cls, data: dict, path: Path | None = None) -> CrpDatabase:
        db = cls(int(data["threshold"]), int(data["m"]), path=path)
        for eid, body in data["entities"].items():
            validate_id(eid)
            records = [CrpRecord.from_dict(r) for r in body["crps"]]
            for r in records:
                if r.response.size != db.m:
                    raise DimensionError(f"entity {eid!r} has a record of length {r.response.size}, database m={db.m}")
            db.entities[eid] = records
        return db

    @classmethod
    def load(cls, path: str | Path) -> CrpDatabase:
        path = Path(path)
        return cls.from_dict(json.loads(path.read_text()), path)

    def save(self, path: str | Path | None = None) -> None:
        target = Path(path) if path is not None else self.path
        if target is None:
            raise ConfigurationError("database has no file path", "path")
        with self._lock:
            atomic_write_text(target, json.dumps(self.to_dict()))

    def _persist(self) -> None:
        if self.path is not None:
            self.save()

    # protocol

    def records(self, entity_id: str) -> list[CrpRecord]:
        try:
            return self.entities[entity_id]
        except KeyError:
            raise NotFoundError(f"unknown entity id {entity_id!r}") from None

    def enroll(
        self,
        entity_id: str,
        instance: PufInstance,
        strategy: str = "disjoint",
        num_crps: int = 10,
        seed: int = 0,
        k: int | None = None,
        reenroll: bool = False,
    ) -> list[CrpRecord]:
        """Collect ``num_crps`` noise-free nominal CRPs from ``instance``.

        Challenge ``i`` of a seeded strategy uses seed ``(seed, i)``; fixed
        strategies (neighbor, all-pairs, k-group) repeat the same challenge.
        """
        validate_id(entity_id)
        if num_crps < 1:
            raise ConfigurationError(f"num_crps must be >= 1, got {num_crps}", "num_crps")
        records = []
        for i in range(num_crps):
            challenge = make_challenge(strategy, instance, seed=[seed, i], k=k)
            response = evaluate(instance, challenge).bits
            if response.size != self.m:
                raise DimensionError(f"strategy {strategy!r} yields {response.size} bits, database m={self.m}")
            records.append(CrpRecord(challenge, response))
        return self._store(entity_id, records, reenroll)

    def enroll_hashed(
        self,
        entity_id: str,
        instance: PufInstance,
        strategy: str = "disjoint",
        num_crps: int = 10,
        seed: int = 0,
        t: int = 3,
        hash_id: str = "sha-256",
        k: int | None = None,
        reenroll: bool = False,
    ) -> list[CrpRecord]:
        """Enroll CRPs for hash comparison: each record keeps the hash of the
        reference response and the helper data that lets the prover
        error-correct its own measurement before hashing.
        """
        validate_id(entity_id)
        if num_crps < 1:
            raise ConfigurationError(f"num_crps must be >= 1, got {num_crps}", "num_crps")
        rng = np.random.default_rng([seed, 1])
        records = []
        for i in range(num_crps):
            challenge = make_challenge(strategy, instance, seed=[seed, i], k=k)
            if challenge.m != self.m:
                raise DimensionError(f"strategy {strategy!r} yields {challenge.m} bits, database m={self.m}")
            key, helper = keygen_init(instance, challenge, CodeParams.for_length(challenge.m, t), hash_id, 256, rng)
            records.append(CrpRecord(challenge, evaluate(instance, challenge).bits, helper=helper, response_hash=key.bytes))
        return self._store(entity_id, records, reenroll)

    def _store(self, entity_id: str, records: list[CrpRecord], reenroll: bool) -> list[CrpRecord]:
        with self._lock:
            if entity_id in self.entities and not reenroll:
                raise ConflictError(f"entity {entity_id!r} is already enrolled; pass reenroll to replace it")
            self.entities[entity_id] = records
            self._persist()
        return records

    def issue_challenge(self, entity_id: str) -> tuple[Challenge, int]:
        with self._lock:
            records = self.records(entity_id)
            for idx, record in enumerate(records):
                if not record.used:
                    record.used = True
                    self._persist()
                    return record.challenge, idx
            raise ExhaustedError(f"all {len(records)} CRPs of {entity_id!r} have been used")

    def _issued_record(self, entity_id: str, record_index: int) -> CrpRecord:
        records = self.records(entity_id)
        if not 0 <= record_index < len(records):
            raise NotFoundError(f"entity {entity_id!r} has no record {record_index}")
        record = records[record_index]
        if not record.used:
            raise ProtocolOrderError(f"record {record_index} of {entity_id!r} was never issued")
        return record

    def verify_response(self, entity_id: str, record_index: int, presented) -> AuthOutcome:
        with self._lock:
            record = self._issued_record(entity_id, record_index)
            threshold = self.threshold
        distance = hamming_distance(record.response, presented)
        return AuthOutcome(distance <= threshold, distance, threshold, record_index)

    def authenticate_hashed(self, entity_id: str, record_index: int, presented_hash: bytes, helper: HelperData | None = None) -> AuthOutcome:
        """Accept iff the prover's hash of its corrected response matches.

        ``distance`` is 0 on a match and 1 otherwise; the threshold is 0.
        """
        with self._lock:
            record = self._issued_record(entity_id, record_index)
        if record.response_hash is None or (record.helper is None and helper is None):
            raise ConfigurationError(f"record {record_index} of {entity_id!r} has no helper data", "helper")
        match = bytes(presented_hash) == record.response_hash
        return AuthOutcome(match, 0 if match else 1, 0, record_index)

    def helper_for(self, entity_id: str, record_index: int) -> HelperData:
        record = self._issued_record(entity_id, record_index)
        if record.helper is None:
            raise ConfigurationError(f"record {record_index} of {entity_id!r} has no helper data", "helper")
        return record.helper


def hashed_proof(instance: PufInstance, helper: HelperData, env: Environment | None = None, measurement_index: int | None = None) -> bytes:
    """Prover side of hash comparison: error-correct a fresh measurement, then hash it."""
    return keygen_reproduce(instance, helper, env, measurement_index).bytes
