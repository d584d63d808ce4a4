"""Sweep measurement noise and report how identifiability degrades.

Prints one CSV row per (strategy, noise ratio): mean intra/inter distance,
overlap, EER threshold and EER.

    python scripts/identifiability_sweep.py --instances 50 --repeats 20
"""
import argparse
import sys

from pufkit import PopulationConfig, create_population, gen_challenge_disjoint, gen_challenge_neighbor, provision_kgroup
from pufkit.metrics import evaluate_population


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--instances", type=int, default=50)
    parser.add_argument("--oscillators", type=int, default=128)
    parser.add_argument("--repeats", type=int, default=20)
    parser.add_argument("--ratios", default="0.01,0.05,0.1,0.2,0.5,1.0", help="sigma_noise / sigma_process values")
    parser.add_argument("--k", type=int, default=4)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    n = args.oscillators
    strategies = {
        "disjoint": lambda inst: gen_challenge_disjoint(n, args.seed),
        "neighbor": lambda inst: gen_challenge_neighbor(n),
        f"kgroup{args.k}": lambda inst: provision_kgroup(inst, args.k, inst.config.nominal, 10),
    }
    print("strategy,noise_ratio,m,mean_intra,mean_inter,overlap,eer_threshold,eer")
    for ratio in (float(r) for r in args.ratios.split(",")):
        config = PopulationConfig(n_oscillators=n, sigma_process=0.01, sigma_noise=0.01 * ratio, seed=args.seed)
        population = create_population(config, args.instances)
        for name, challenge_for in strategies.items():
            report = evaluate_population(population, challenge_for, args.repeats)
            print(
                f"{name},{ratio},{report.m},{report.intra.fractional().mean():.5f},"
                f"{report.inter.fractional().mean():.5f},{report.overlap:.6f},{report.eer_threshold},{report.eer:.6f}"
            )
            sys.stdout.flush()


if __name__ == "__main__":
    main()
