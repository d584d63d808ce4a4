import json
import threading

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pufkit import (
    ConfigurationError,
    ConflictError,
    CrpDatabase,
    DimensionError,
    ExhaustedError,
    NotFoundError,
    PopulationConfig,
    ProtocolOrderError,
    create_population,
)
from pufkit.authn import hashed_proof


@pytest.fixture
def pop():
    return create_population(PopulationConfig(n_oscillators=64, sigma_noise=0.0005, seed=8), 3)


@pytest.fixture
def db(pop):
    db = CrpDatabase(threshold=3, m=32)
    db.enroll("device-01", pop[0], "disjoint", 10, seed=1)
    return db


def test_enroll_fresh(db):
    records = db.records("device-01")
    assert len(records) == 10
    assert not any(r.used for r in records)
    assert len({r.challenge for r in records}) == 10


def test_enroll_deterministic(pop):
    a, b = CrpDatabase(3, 32), CrpDatabase(3, 32)
    a.enroll("x", pop[0], "disjoint", 5, seed=4)
    b.enroll("x", pop[0], "disjoint", 5, seed=4)
    assert a.to_dict() == b.to_dict()


def test_enroll_conflict_and_reenroll(db, pop):
    with pytest.raises(ConflictError):
        db.enroll("device-01", pop[0], "disjoint", 2)
    db.enroll("device-01", pop[0], "disjoint", 2, reenroll=True)
    assert len(db.records("device-01")) == 2


@pytest.mark.parametrize("bad", ["", "a" * 65, "dev ice", "dev/ice", "é"])
def test_enroll_rejects_bad_ids(pop, bad):
    with pytest.raises(ConfigurationError):
        CrpDatabase(3, 32).enroll(bad, pop[0], "disjoint", 1)


def test_enroll_length_mismatch(pop):
    with pytest.raises(DimensionError):
        CrpDatabase(3, 32).enroll("x", pop[0], "neighbor", 1)


def test_issue_order_and_exhaustion(db):
    _, idx = db.issue_challenge("device-01")
    assert idx == 0
    assert sum(not r.used for r in db.records("device-01")) == 9
    issued = [idx] + [db.issue_challenge("device-01")[1] for _ in range(9)]
    assert issued == list(range(10))
    with pytest.raises(ExhaustedError):
        db.issue_challenge("device-01")
    with pytest.raises(NotFoundError):
        db.issue_challenge("nobody")


def test_issue_never_repeats_under_threads(pop):
    db = CrpDatabase(3, 32)
    db.enroll("d", pop[0], "disjoint", 200)
    got, lock = [], threading.Lock()

    def worker():
        while True:
            try:
                idx = db.issue_challenge("d")[1]
            except ExhaustedError:
                return
            with lock:
                got.append(idx)

    threads = [threading.Thread(target=worker) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert sorted(got) == list(range(200))


def test_verify(db):
    _, idx = db.issue_challenge("device-01")
    stored = db.records("device-01")[idx].response
    out = db.verify_response("device-01", idx, stored)
    assert out.accept and out.distance == 0 and out.threshold == 3 and out.record_index == idx
    out = db.verify_response("device-01", idx, 1 - stored)
    assert not out.accept and out.distance == 32
    flipped = stored.copy()
    flipped[[0, 5, 9]] ^= 1
    out = db.verify_response("device-01", idx, flipped)
    assert out.accept and out.distance == 3
    flipped[11] ^= 1
    assert not db.verify_response("device-01", idx, flipped).accept


def test_verify_errors(db):
    with pytest.raises(ProtocolOrderError):
        db.verify_response("device-01", 0, np.zeros(32, dtype=np.uint8))
    _, idx = db.issue_challenge("device-01")
    with pytest.raises(DimensionError):
        db.verify_response("device-01", idx, np.zeros(31, dtype=np.uint8))
    with pytest.raises(NotFoundError):
        db.verify_response("device-01", 99, np.zeros(32, dtype=np.uint8))


@given(st.integers(0, 32), st.integers(0, 32), st.integers(0, 2**16))
def test_verify_monotone_in_threshold(tau, extra, seed):
    pop = create_population(PopulationConfig(n_oscillators=64, sigma_noise=0.0), 1)
    presented = np.random.default_rng(seed).integers(0, 2, 32, dtype=np.uint8)
    results = []
    for threshold in (tau, tau + extra):
        db = CrpDatabase(threshold, 32)
        db.enroll("d", pop[0], "disjoint", 1)
        db.issue_challenge("d")
        results.append(db.verify_response("d", 0, presented).accept)
    assert not results[0] or results[1]


def test_json_file_roundtrip(db, tmp_path):
    path = tmp_path / "crp.json"
    db.save(path)
    doc = json.loads(path.read_text())
    assert set(doc) == {"threshold", "m", "entities"}
    record = doc["entities"]["device-01"]["crps"][0]
    assert set(record) == {"challenge", "response", "used"}
    assert len(record["response"]) == 32
    loaded = CrpDatabase.load(path)
    assert loaded.to_dict() == db.to_dict()


def test_bound_database_persists_each_issue(db, tmp_path):
    path = tmp_path / "crp.json"
    db.save(path)
    bound = CrpDatabase.load(path)
    bound.issue_challenge("device-01")
    on_disk = json.loads(path.read_text())["entities"]["device-01"]["crps"]
    assert [r["used"] for r in on_disk[:2]] == [True, False]
    assert not list(tmp_path.glob(".crp.json.*"))


def test_hashed_authentication():
    pop = create_population(PopulationConfig(n_oscillators=48, sigma_noise=0.0005, seed=2), 101)
    db = CrpDatabase(0, 24)
    db.enroll_hashed("dev", pop[0], "disjoint", 120, seed=3)
    # noiseless prover
    _, idx = db.issue_challenge("dev")
    helper = db.helper_for("dev", idx)
    assert db.authenticate_hashed("dev", idx, hashed_proof(pop[0], helper), helper).accept
    # noisy genuine prover
    _, idx = db.issue_challenge("dev")
    helper = db.helper_for("dev", idx)
    assert db.authenticate_hashed("dev", idx, hashed_proof(pop[0], helper, None, 77), helper).accept
    # impostors
    accepts = 0
    for impostor in pop.instances[1:101]:
        _, idx = db.issue_challenge("dev")
        helper = db.helper_for("dev", idx)
        accepts += db.authenticate_hashed("dev", idx, hashed_proof(impostor, helper), helper).accept
    assert accepts == 0


def test_hashed_within_code_capability_exhaustive():
    from pufkit.keygen import extract_key, reproduce_from_response

    pop = create_population(PopulationConfig(n_oscillators=12, sigma_noise=0.0, seed=5), 1)
    db = CrpDatabase(0, 6)
    db.enroll_hashed("dev", pop[0], "disjoint", 1, seed=0, t=3)
    _, idx = db.issue_challenge("dev")
    record = db.records("dev")[idx]
    for first in range(3):
        for second in range(3):
            noisy = record.response.copy()
            noisy[first] ^= 1
            noisy[3 + second] ^= 1
            proof = reproduce_from_response(noisy, record.helper).bytes
            assert db.authenticate_hashed("dev", idx, proof).accept
    assert extract_key(record.response).bytes == record.response_hash


def test_hashed_requires_helper(db):
    _, idx = db.issue_challenge("device-01")
    with pytest.raises(ConfigurationError):
        db.authenticate_hashed("device-01", idx, b"\x00" * 32)
    with pytest.raises(ConfigurationError):
        db.helper_for("device-01", idx)


def test_hashed_records_roundtrip(tmp_path):
    pop = create_population(PopulationConfig(n_oscillators=12, seed=5), 1)
    db = CrpDatabase(0, 6)
    db.enroll_hashed("dev", pop[0], "disjoint", 2)
    db.save(tmp_path / "h.json")
    loaded = CrpDatabase.load(tmp_path / "h.json")
    assert loaded.to_dict() == db.to_dict()
    assert loaded.records("dev")[0].helper == db.records("dev")[0].helper
