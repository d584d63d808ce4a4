"""Intra-distance across temperature and supply corners.

Environment effects are common-mode, so with exact frequency comparison only
measurement noise moves bits. A counter window quantizes frequencies and makes
the temperature corner visible as extra ties and flips.

    python scripts/environment_sweep.py --temps=-40,25,125 --counter-window 1e-6
"""
import argparse

import numpy as np

from pufkit import Environment, PopulationConfig, create_population, evaluate, gen_challenge_neighbor
from pufkit.metrics import intra_distance_samples


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--instances", type=int, default=20)
    parser.add_argument("--oscillators", type=int, default=64)
    parser.add_argument("--repeats", type=int, default=20)
    parser.add_argument("--temps", default="-40,0,25,85,125")
    parser.add_argument("--volts", default="1.08,1.2,1.32")
    parser.add_argument("--counter-window", type=float)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    config = PopulationConfig(n_oscillators=args.oscillators, counter_window=args.counter_window, seed=args.seed)
    population = create_population(config, args.instances)
    challenge = gen_challenge_neighbor(args.oscillators)
    print("temperature,voltage,mean_intra,max_intra,tie_fraction")
    for t in (float(x) for x in args.temps.split(",")):
        for v in (float(x) for x in args.volts.split(",")):
            env = Environment(t, v)
            values, ties = [], []
            for inst in population.instances:
                values.extend(intra_distance_samples(inst, challenge, args.repeats, [env]).fractional())
                ties.append(evaluate(inst, challenge, env, 1).tie_flags.mean())
            print(f"{t},{v},{np.mean(values):.5f},{np.max(values):.5f},{np.mean(ties):.5f}")


if __name__ == "__main__":
    main()
