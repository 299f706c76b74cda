"""Hierarchical structure bandits over quantized context spaces.

The package centers on :class:`HsbLearner`, an adversarial contextual bandit
whose per-round work is linear in the number of tree or DAG nodes containing
the observed cell. Its selection probabilities provably coincide with an
exponentially weighted mixture over all piecewise-constant mappings the
splitting structure can express; :mod:`hsbandit.experts` holds that mixture in
explicit form for validation, :mod:`hsbandit.baselines` the classic
exponential-weighting baselines, and :mod:`hsbandit.experiments` the
evaluation protocols behind the ``hsbandit`` command-line tool.
"""

from .baselines import Exp3, SExp3, exp3_tuning
from .decision import ArmDecision, sample_arm
from .ecoc import (
    EcocSetup,
    OnlinePerceptron,
    hamming_decode,
    make_separable_stream,
    one_vs_all_matrix,
)
from .environments import (
    LoggedRound,
    ReplayResult,
    SinusoidalBernoulliEnv,
    make_logged_stream,
    read_logged_csv,
    replay_evaluate,
    write_logged_csv,
)
from .errors import (
    CapacityError,
    ConfigError,
    DomainError,
    HsbError,
    LogParseError,
    ProtocolError,
    ShapeError,
    SnapshotFormatError,
)
from .evaluation import (
    BoundCheck,
    QuantizationGapReport,
    RegretReport,
    aggregate_runs,
    best_mapping_loss,
    check_structured_bound,
    clairvoyant_loss_rate,
    optimal_policy_thresholds,
    optimized_structured_bound,
    quantization_gap,
    structured_bound,
    flat_mixture_regret_bound,
)
from .experiments import (
    ExperimentConfig,
    run_ecoc,
    run_replay,
    run_synthetic,
    verify,
)
from .experts import (
    FlatMixture,
    FlatMixtureBandit,
    WeightedExpert,
    count_experts,
    enumerate_weighted_experts,
    total_weight,
)
from .grid import CellGrid
from .hsb import HsbLearner, optimal_eta
from .records import RoundRecord, read_round_records, write_round_records
from .structures import (
    ArbitrarySplittingStructure,
    ExplicitStructure,
    Node,
    Structure,
    UniformTreeStructure,
    build_arbitrary_position_splitting,
    build_arbitrary_splitting,
    build_binary_tree,
    build_kary_tree,
    build_kgroup_lexicographic,
    build_lexicographic_graph,
)

__version__ = "0.1.0"

__all__ = [
    "ArbitrarySplittingStructure",
    "ArmDecision",
    "BoundCheck",
    "CapacityError",
    "CellGrid",
    "ConfigError",
    "DomainError",
    "EcocSetup",
    "Exp3",
    "ExperimentConfig",
    "ExplicitStructure",
    "FlatMixture",
    "FlatMixtureBandit",
    "HsbError",
    "HsbLearner",
    "LogParseError",
    "LoggedRound",
    "Node",
    "OnlinePerceptron",
    "ProtocolError",
    "QuantizationGapReport",
    "RegretReport",
    "ReplayResult",
    "RoundRecord",
    "SExp3",
    "ShapeError",
    "SinusoidalBernoulliEnv",
    "SnapshotFormatError",
    "Structure",
    "UniformTreeStructure",
    "WeightedExpert",
    "aggregate_runs",
    "best_mapping_loss",
    "build_arbitrary_position_splitting",
    "build_arbitrary_splitting",
    "build_binary_tree",
    "build_kary_tree",
    "build_kgroup_lexicographic",
    "build_lexicographic_graph",
    "check_structured_bound",
    "clairvoyant_loss_rate",
    "count_experts",
    "enumerate_weighted_experts",
    "exp3_tuning",
    "hamming_decode",
    "make_logged_stream",
    "make_separable_stream",
    "one_vs_all_matrix",
    "optimal_eta",
    "optimal_policy_thresholds",
    "optimized_structured_bound",
    "quantization_gap",
    "read_logged_csv",
    "read_round_records",
    "replay_evaluate",
    "run_ecoc",
    "run_replay",
    "run_synthetic",
    "sample_arm",
    "structured_bound",
    "flat_mixture_regret_bound",
    "total_weight",
    "verify",
    "write_logged_csv",
    "write_round_records",
]
