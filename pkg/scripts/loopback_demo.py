"""Enroll a device, start a verifier on loopback, and run genuine and impostor provers.

    python scripts/loopback_demo.py --crps 8
"""
import argparse
import tempfile
from pathlib import Path

from pufkit import CrpDatabase, PopulationConfig, create_population, gen_challenge_disjoint
from pufkit.metrics import evaluate_population
from pufkit.proto import ServerError, VerifierServer, run_prover


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--crps", type=int, default=8)
    parser.add_argument("--instances", type=int, default=50)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    population = create_population(PopulationConfig(n_oscillators=128, seed=args.seed), args.instances)
    challenge = gen_challenge_disjoint(128, args.seed)
    report = evaluate_population(population, lambda inst: challenge, repeats=10)
    print(f"EER threshold {report.eer_threshold} (eer={report.eer:.4f}, overlap={report.overlap:.4f})")

    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "crp.json"
        db = CrpDatabase(report.eer_threshold, 64)
        db.enroll("device-01", population[0], "disjoint", args.crps, seed=args.seed)
        db.save(path)
        with VerifierServer(path) as server:
            for attempt in range(args.crps + 1):
                device = population[1] if attempt % 3 == 2 else population[0]
                role = "impostor" if device.instance_id else "genuine"
                try:
                    out = run_prover(server.address, "device-01", device, None, attempt)
                    print(f"{role:8s} record {out.record_index}: distance {out.distance:2d} -> {'ACCEPT' if out.accept else 'REJECT'}")
                except ServerError as exc:
                    print(f"{role:8s} -> server error {exc.code}")


if __name__ == "__main__":
    main()
