"""Ring-oscillator PUF simulation and evaluation toolkit."""
from .authn import AuthOutcome, CrpDatabase, CrpRecord
from .core import (
    Challenge,
    Response,
    compare_pair,
    evaluate,
    gen_challenge_all_pairs,
    gen_challenge_disjoint,
    gen_challenge_neighbor,
    make_challenge,
    provision_kgroup,
)
from .errors import (
    BoundsError,
    ConfigurationError,
    ConflictError,
    DimensionError,
    ExhaustedError,
    NotFoundError,
    ProtocolOrderError,
    PufkitError,
)
from .keygen import CodeParams, HelperData, Key, decode_repetition, encode_repetition, extract_key, keygen_init, keygen_reproduce
from .metrics import (
    DistanceSamples,
    EvaluationReport,
    FarFrrCurve,
    equal_error_threshold,
    far_frr_curve,
    fractional_hd,
    hamming_distance,
    inter_distance_samples,
    intra_distance_samples,
    overlap_measure,
)
from .oscillator import (
    Environment,
    OscillatorPopulation,
    PopulationConfig,
    PufInstance,
    count_cycles,
    create_population,
    measure_frequency,
)

__version__ = "0.1.0"
