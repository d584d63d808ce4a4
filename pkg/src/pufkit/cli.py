"""pufkit command line.

Exit codes: 0 success/accept, 1 reject/mismatch, 2 usage, validation or
transport error.
"""
from __future__ import annotations

import argparse
import hashlib
import itertools
import json
import logging
import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import authn, proto
from .core import make_challenge
from .errors import ConfigurationError, PufkitError
from .keygen import CodeParams, HelperData, keygen_init, keygen_reproduce
from .metrics import evaluate_population
from .oscillator import Environment, OscillatorPopulation, PopulationConfig, create_population

EXIT_OK, EXIT_REJECT, EXIT_ERROR = 0, 1, 2
SEED_ENV = "PUFKIT_SEED"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def resolve_seed(seed: int | None) -> int:
    if seed is not None:
        return seed
    value = os.environ.get(SEED_ENV)
    if value is None:
        return 0
    try:
        return int(value)
    except ValueError:
        raise ConfigurationError(f"{SEED_ENV} must be an integer, got {value!r}", SEED_ENV) from None


@dataclass
class RunConfig:
    """Validated analysis settings; errors name the offending flag."""

    population: PopulationConfig
    strategy: str = "disjoint"
    k: int | None = None
    repeats: int = 10
    temps: list[float] = field(default_factory=list)
    volts: list[float] = field(default_factory=list)
    provisioning_repeats: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.strategy not in ("disjoint", "neighbor", "kgroup", "all_pairs"):
            raise ConfigurationError(f"unknown strategy {self.strategy!r}", "strategy")
        if self.repeats < 2:
            raise ConfigurationError(f"repeats must be >= 2, got {self.repeats}", "repeats")
        if self.strategy == "kgroup":
            if self.k is None or self.k < 2:
                raise ConfigurationError("kgroup strategy needs --k >= 2", "k")
            if self.population.n_oscillators % self.k:
                raise ConfigurationError(f"k={self.k} does not divide {self.population.n_oscillators} oscillators", "k")
        if self.strategy == "disjoint" and self.population.n_oscillators % 2:
            raise ConfigurationError("disjoint strategy needs an even oscillator count", "strategy")
        if self.provisioning_repeats < 1:
            raise ConfigurationError("provisioning repeats must be >= 1", "provisioning_repeats")

    @property
    def environments(self) -> list[Environment]:
        temps = self.temps or [self.population.t_nominal]
        volts = self.volts or [self.population.v_nominal]
        return [Environment(t, v) for t, v in itertools.product(temps, volts)]

    def challenge_for(self, instance):
        return make_challenge(self.strategy, instance, self.seed, self.k, self.provisioning_repeats)


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _load_instance(path: str, index: int):
    population = OscillatorPopulation.load(path)
    if not 0 <= index < len(population):
        raise ConfigurationError(f"instance {index} not in population of {len(population)}", "instance")
    return population[index]


def _env(args, config: PopulationConfig) -> Environment:
    return Environment(
        config.t_nominal if args.temp is None else args.temp,
        config.v_nominal if args.volt is None else args.volt,
    )


def cmd_simulate(args) -> int:
    config = PopulationConfig(
        n_oscillators=args.oscillators,
        f_nom=args.f_nom,
        sigma_process=args.sigma_process,
        sigma_noise=args.sigma_process * 0.05 if args.sigma_noise is None else args.sigma_noise,
        alpha_T=args.alpha_t,
        alpha_V=args.alpha_v,
        t_nominal=args.t_nominal,
        v_nominal=args.v_nominal,
        counter_window=args.counter_window,
        seed=resolve_seed(args.seed),
    )
    population = create_population(config, args.instances)
    population.save(args.out)
    print(f"wrote {len(population)} instances x {config.n_oscillators} oscillators (seed {config.seed}) to {args.out}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    population = OscillatorPopulation.load(args.population)
    if len(population) < 2:
        raise ConfigurationError(f"analysis needs at least 2 instances, got {len(population)}", "population")
    run = RunConfig(
        population.config,
        args.strategy,
        args.k,
        args.repeats,
        _floats(args.temps) if args.temps else [],
        _floats(args.volts) if args.volts else [],
        args.provisioning_repeats,
        resolve_seed(args.seed),
    )
    report = evaluate_population(population, run.challenge_for, run.repeats, run.environments)
    report.write(args.report, args.histogram, args.curve)
    print(
        f"m={report.m} intra={len(report.intra)} inter={len(report.inter)} "
        f"eer_threshold={report.eer_threshold} eer={report.eer:.6f} overlap={report.overlap:.6f}"
    )
    return EXIT_OK


def _key_digest(key_bytes: bytes) -> str:
    return hashlib.sha256(key_bytes).hexdigest()


def cmd_keygen_init(args) -> int:
    instance = _load_instance(args.population, args.instance)
    seed = resolve_seed(args.seed)
    challenge = make_challenge(args.strategy, instance, seed, args.k, args.provisioning_repeats)
    usable = challenge.m - challenge.m % args.t
    if usable < args.t:
        raise ConfigurationError(f"{challenge.m}-bit response is shorter than t={args.t}", "t")
    # a prefix of any strategy's pair list is still a valid challenge of that strategy
    challenge = replace(challenge, pairs=challenge.pairs[:usable])
    code = CodeParams.for_length(challenge.m, args.t)
    key, helper = keygen_init(instance, challenge, code, args.hash, args.key_bits, np.random.default_rng([seed, 2]))
    Path(args.helper).write_text(json.dumps(helper.to_dict(), indent=1))
    digest_path = args.digest or f"{args.helper}.digest"
    Path(digest_path).write_text(_key_digest(key.bytes) + "\n")
    print(f"wrote helper data ({code.data_bits}x{code.t} bits) to {args.helper}, key digest to {digest_path}")
    if args.reveal_key:
        print(key.hex())
    return EXIT_OK


def cmd_keygen_reproduce(args) -> int:
    instance = _load_instance(args.population, args.instance)
    helper = HelperData.from_dict(json.loads(Path(args.helper).read_text()))
    digest_path = args.digest or f"{args.helper}.digest"
    expected = Path(digest_path).read_text().strip()
    key = keygen_reproduce(instance, helper, _env(args, instance.config), args.measurement)
    if args.reveal_key:
        print(key.hex())
    if _key_digest(key.bytes) == expected:
        print("MATCH")
        return EXIT_OK
    print("MISMATCH")
    return EXIT_REJECT


def cmd_enroll(args) -> int:
    instance = _load_instance(args.population, args.instance)
    seed = resolve_seed(args.seed)
    db_path = Path(args.db)
    if db_path.exists():
        db = authn.CrpDatabase.load(db_path)
    else:
        m = make_challenge(args.strategy, instance, seed, args.k).m
        threshold = args.threshold
        if threshold is None:
            population = OscillatorPopulation.load(args.population)
            run = RunConfig(population.config, args.strategy, args.k, 10, seed=seed)
            threshold = evaluate_population(population, run.challenge_for, run.repeats).eer_threshold
        db = authn.CrpDatabase(threshold, m, path=db_path)
    db.enroll(args.id, instance, args.strategy, args.num_crps, seed, args.k, args.reenroll)
    db.save()
    print(f"enrolled {args.num_crps} CRPs for {args.id!r} (m={db.m}, threshold={db.threshold}) in {db_path}")
    return EXIT_OK


def cmd_serve(args) -> int:
    server = proto.VerifierServer(args.db, args.host, args.port, args.threshold, args.timeout)
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(levelname)s %(message)s")
    try:
        server.start()
        print(f"serving on {server.host}:{server.port}", flush=True)
        server.join()
    except KeyboardInterrupt:
        server.stop()
    return EXIT_OK


def cmd_prove(args) -> int:
    instance = _load_instance(args.population, args.instance)
    measurement = resolve_seed(args.seed) if args.measurement is None else args.measurement
    outcome = proto.run_prover(
        proto.parse_address(args.server), args.id, instance, _env(args, instance.config), measurement, args.timeout
    )
    verdict = "ACCEPT" if outcome.accept else "REJECT"
    print(f"{verdict} record={outcome.record_index} distance={outcome.distance} threshold={outcome.threshold}")
    return EXIT_OK if outcome.accept else EXIT_REJECT


def _strategy_args(p, default="disjoint"):
    p.add_argument("--strategy", choices=["disjoint", "neighbor", "kgroup", "all_pairs"], default=default)
    p.add_argument("--k", type=int, help="group size for the kgroup strategy")
    p.add_argument("--provisioning-repeats", type=int, default=10)


def _env_args(p):
    p.add_argument("--temp", type=float, help="temperature in C (default nominal)")
    p.add_argument("--volt", type=float, help="supply voltage in V (default nominal)")
    p.add_argument("--measurement", type=int, help="noise stream index (default: the seed)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pufkit", description="Ring-oscillator PUF simulator and evaluation toolkit")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="create a population file")
    p.add_argument("--instances", type=int, required=True)
    p.add_argument("--oscillators", type=int, default=64)
    p.add_argument("--f-nom", type=float, default=100e6)
    p.add_argument("--sigma-process", type=float, default=0.01)
    p.add_argument("--sigma-noise", type=float, help="default 0.05 * sigma-process")
    p.add_argument("--alpha-t", type=float, default=-2e-4)
    p.add_argument("--alpha-v", type=float, default=0.1)
    p.add_argument("--t-nominal", type=float, default=25.0)
    p.add_argument("--v-nominal", type=float, default=1.2)
    p.add_argument("--counter-window", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="intra/inter distances, FAR/FRR curve and EER")
    p.add_argument("--population", required=True)
    _strategy_args(p)
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--temps", help="comma-separated temperature sweep")
    p.add_argument("--volts", help="comma-separated voltage sweep")
    p.add_argument("--seed", type=int)
    p.add_argument("--report", default="report.json")
    p.add_argument("--histogram", default="histogram.csv")
    p.add_argument("--curve", default="curve.csv")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("keygen-init", help="enroll a key and write helper data")
    p.add_argument("--population", required=True)
    p.add_argument("--instance", type=int, default=0)
    _strategy_args(p, default="neighbor")
    p.add_argument("--t", type=int, default=3)
    p.add_argument("--key-bits", type=int, choices=[128, 256], default=256)
    p.add_argument("--hash", default="sha-256")
    p.add_argument("--helper", required=True)
    p.add_argument("--digest", help="key digest file (default <helper>.digest)")
    p.add_argument("--seed", type=int)
    p.add_argument("--reveal-key", action="store_true")
    p.set_defaults(func=cmd_keygen_init)

    p = sub.add_parser("keygen-reproduce", help="regenerate a key and compare to the stored digest")
    p.add_argument("--population", required=True)
    p.add_argument("--instance", type=int, default=0)
    p.add_argument("--helper", required=True)
    p.add_argument("--digest")
    _env_args(p)
    p.add_argument("--reveal-key", action="store_true")
    p.set_defaults(func=cmd_keygen_reproduce)

    p = sub.add_parser("enroll", help="add an entity's CRPs to a verifier database")
    p.add_argument("--db", required=True)
    p.add_argument("--population", required=True)
    p.add_argument("--instance", type=int, default=0)
    p.add_argument("--id", required=True)
    p.add_argument("--num-crps", type=int, default=10)
    _strategy_args(p)
    p.add_argument("--threshold", type=int, help="acceptance threshold for a new database (default: EER threshold)")
    p.add_argument("--reenroll", action="store_true")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_enroll)

    p = sub.add_parser("serve", help="run the verifier")
    p.add_argument("--db", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=7878)
    p.add_argument("--threshold", type=int, help="override the database threshold")
    p.add_argument("--timeout", type=float, default=proto.DEFAULT_TIMEOUT)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("prove", help="authenticate against a verifier")
    p.add_argument("--server", default="127.0.0.1:7878")
    p.add_argument("--id", required=True)
    p.add_argument("--population", required=True)
    p.add_argument("--instance", type=int, default=0)
    _env_args(p)
    p.add_argument("--timeout", type=float, default=proto.DEFAULT_TIMEOUT)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_prove)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.verbose:
        logging.basicConfig(level=logging.DEBUG)
    try:
        return args.func(args)
    except proto.ServerError as exc:
        print(f"error: verifier reported {exc.code}: {exc.detail}", file=sys.stderr)
    except proto.TransportError as exc:
        print(f"error: transport: {exc}", file=sys.stderr)
    except ConfigurationError as exc:
        where = f" [{exc.field}]" if exc.field else ""
        print(f"error: invalid configuration{where}: {exc}", file=sys.stderr)
    except (PufkitError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
