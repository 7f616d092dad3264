"""Median-based Byzantine-tolerant gradient aggregation and a parameter-server SGD simulator."""
from .aggregators import (
    AGGREGATOR_KINDS,
    AggregatorSpec,
    agg_geomed,
    agg_krum,
    agg_marmed,
    agg_meamed,
    agg_mean,
    agg_medoid,
    agg_multikrum,
    aggregate,
    krum_scores,
)
from .attacks import (
    ATTACK_KINDS,
    AttackContext,
    AttackSpec,
    apply_attack,
    attack_rng,
    bitflip32,
    dimensional_worst_case,
    partition_dims,
)
from .gradcore import ContractError, from_wire, median_1d, select_kth, to_wire
from .problems import ProblemSpec
from .resilience import (
    ETA,
    ResilienceBound,
    build_mean_counterexample,
    build_selection_counterexample,
    check_condition_i,
    eta_geomed,
    eta_krum,
    eta_marmed,
    eta_meamed,
    random_dimensional_adversary,
    resilience_bound,
)
from .simulator import ExperimentConfig, LRSchedule, MetricsRecord, run_experiment, run_round, train

__version__ = "0.1.0"
